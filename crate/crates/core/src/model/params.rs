use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::{Tape, Tensor, Var};
use crate::scalar::Scalar;

macro_rules! param_ids {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Every learnable tensor of the network, in storage order.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum ParamId {
            $($variant),*
        }

        impl ParamId {
            pub const ALL: &'static [ParamId] = &[$(ParamId::$variant),*];

            /// Dotted path used in checkpoints and diagnostics.
            pub fn name(self) -> &'static str {
                match self {
                    $(ParamId::$variant => $name),*
                }
            }
        }
    };
}

param_ids! {
    SpatialKernel => "tokenize.spatial_conv.kernel",
    SpatialBias => "tokenize.spatial_conv.bias",
    SpectralKernel => "tokenize.spectral_conv.kernel",
    SpectralBias => "tokenize.spectral_conv.bias",
    SpatialProjWeight => "tokenize.spatial_proj.weight",
    SpatialProjBias => "tokenize.spatial_proj.bias",
    SpectralProjWeight => "tokenize.spectral_proj.weight",
    SpectralProjBias => "tokenize.spectral_proj.bias",
    ScoreWeight => "graph.score.weight",
    ScoreBias => "graph.score.bias",
    GraphWeight => "graph.proj.weight",
    GraphBias => "graph.proj.bias",
    QueryWeight => "attention.query.weight",
    QueryBias => "attention.query.bias",
    KeyWeight => "attention.key.weight",
    KeyBias => "attention.key.bias",
    ValueWeight => "attention.value.weight",
    ValueBias => "attention.value.bias",
    FuseGraphWeight => "fuse.graph.weight",
    FuseGraphBias => "fuse.graph.bias",
    FuseAttnWeight => "fuse.attention.weight",
    FuseAttnBias => "fuse.attention.bias",
    GruWz => "ssm.w_z",
    GruUz => "ssm.u_z",
    GruBz => "ssm.b_z",
    GruWr => "ssm.w_r",
    GruUr => "ssm.u_r",
    GruBr => "ssm.b_r",
    GruWh => "ssm.w_h",
    GruUh => "ssm.u_h",
    GruBh => "ssm.b_h",
    Classifier => "classifier.weight",
}

impl ParamId {
    /// Tensor shape under `cfg`. Dense weights are `f_in × f_out`; conv
    /// kernels are `k × k × c_in × c_out`.
    pub fn shape(self, cfg: &ModelConfig) -> Vec<usize> {
        use ParamId::*;
        let (b, f, d) = (cfg.bands, cfg.features, cfg.d_model);
        let spectral_channels = cfg.spectral_tokens * f;
        match self {
            SpatialKernel => vec![3, 3, b, f],
            SpatialBias => vec![f],
            SpectralKernel => vec![1, 1, b, spectral_channels],
            SpectralBias => vec![spectral_channels],
            SpatialProjWeight | SpectralProjWeight | GraphWeight | ValueWeight => vec![f, f],
            SpatialProjBias | SpectralProjBias | GraphBias | ValueBias => vec![f],
            ScoreWeight => vec![f, 1],
            ScoreBias => vec![1],
            QueryWeight | KeyWeight | FuseGraphWeight | FuseAttnWeight => vec![f, d],
            QueryBias | KeyBias | FuseGraphBias | FuseAttnBias | GruBz | GruBr | GruBh => vec![d],
            GruWz | GruUz | GruWr | GruUr | GruWh | GruUh => vec![d, d],
            Classifier => vec![d, cfg.classes],
        }
    }

    pub fn is_bias(self) -> bool {
        use ParamId::*;
        matches!(
            self,
            SpatialBias
                | SpectralBias
                | SpatialProjBias
                | SpectralProjBias
                | ScoreBias
                | GraphBias
                | QueryBias
                | KeyBias
                | ValueBias
                | FuseGraphBias
                | FuseAttnBias
                | GruBz
                | GruBr
                | GruBh
        )
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|p| p.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// All learnable tensors for one [`ModelConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ModelParams<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = ParamId::ALL
            .iter()
            .map(|&id| {
                let shape = id.shape(config);
                if id.is_bias() {
                    return Tensor::zeros(&shape);
                }
                let (fan_in, fan_out) = fans(&shape);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Tensor::from_fn(&shape, |_| T::of(rng.random_range(-limit..limit)))
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let tensors = ParamId::ALL.iter().map(|id| Tensor::zeros(&id.shape(config))).collect();
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    /// Builds from tensors in [`ParamId::ALL`] order, checking every shape.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Tensor<T>>) -> Result<Self> {
        config.validate()?;
        if tensors.len() != ParamId::ALL.len() {
            return Err(Error::Argument(format!(
                "expected {} parameter tensors, got {}",
                ParamId::ALL.len(),
                tensors.len()
            )));
        }
        for (&id, t) in ParamId::ALL.iter().zip(&tensors) {
            let shape = id.shape(config);
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape {
                    op: id.name(),
                    lhs: t.shape().to_vec(),
                    rhs: shape,
                });
            }
            if !t.is_finite() {
                return Err(Error::NonFinite(id.name()));
            }
        }
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.index()]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.index()]
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor<T>)> {
        ParamId::ALL.iter().copied().zip(&self.tensors)
    }

    /// Total number of scalar parameters actually allocated.
    pub fn element_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    /// Records every tensor as a gradient-receiving leaf.
    pub fn register(&self, tape: &mut Tape<T>) -> ParamVars {
        ParamVars {
            vars: self.tensors.iter().map(|t| tape.param(t.clone())).collect(),
        }
    }

    /// Records every tensor as a constant leaf (inference).
    pub fn register_frozen(&self, tape: &mut Tape<T>) -> ParamVars {
        ParamVars {
            vars: self.tensors.iter().map(|t| tape.constant(t.clone())).collect(),
        }
    }
}

fn fans(shape: &[usize]) -> (usize, usize) {
    match *shape {
        [k1, k2, c_in, c_out] => (k1 * k2 * c_in, k1 * k2 * c_out),
        [f_in, f_out] => (f_in, f_out),
        _ => unreachable!("weights are rank 2 or 4"),
    }
}

/// Tape handles for every parameter.
#[derive(Clone, Debug)]
pub struct ParamVars {
    vars: Vec<Var>,
}

impl ParamVars {
    pub fn get(&self, id: ParamId) -> Var {
        self.vars[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, Var)> + '_ {
        ParamId::ALL.iter().copied().zip(self.vars.iter().copied())
    }
}
