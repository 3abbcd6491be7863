use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, ParamId, ParamVars};
use crate::numerics::kernels::top_indices;
use crate::numerics::{Padding, Tape, Tensor, Var};
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default)]
pub struct ForwardOptions {
    /// Use these top-N indices (`batch × N`, row-major) instead of ranking
    /// the scores. Selection is piecewise constant, so finite-difference
    /// checks hold it fixed.
    pub frozen_indices: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug)]
pub struct Tokens {
    /// `batch × S² × F`
    pub spatial: Var,
    /// `batch × N_spc × F`
    pub spectral: Var,
    /// `batch × (S² + N_spc) × F`
    pub tokens: Var,
}

#[derive(Clone, Debug)]
pub struct Prioritized {
    /// `batch × T × 1`, non-negative
    pub scores: Var,
    /// `batch × N`, highest score first
    pub indices: Vec<usize>,
    /// `batch × N × F`
    pub gathered: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct GraphOutput {
    /// `batch × N × N`
    pub adjacency: Var,
    /// `batch × N × F`
    pub propagated: Var,
    /// `batch × N × F`
    pub output: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct Attention {
    pub query: Var,
    pub key: Var,
    pub value: Var,
    /// `batch × S² × N_spc`, rows sum to 1
    pub weights: Var,
    /// `batch × S² × F`
    pub output: Var,
}

#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub tokens: Tokens,
    pub prioritized: Prioritized,
    pub graph: GraphOutput,
    pub attention: Attention,
    /// `batch × (N + S²) × d_model`
    pub fused: Var,
    /// GRU state after each timestep, `batch × d_model` each.
    pub states: Vec<Var>,
    /// `batch × C`
    pub logits: Var,
}

/// Spatial stream: ReLU(3×3 same conv) flattened to `S²` tokens and
/// projected to `F`. Spectral stream: ReLU(1×1 conv) mean-pooled over the
/// patch, its `N_spc·F` channels split into `N_spc` tokens and projected to
/// `F`. Both are stacked along the token axis.
pub fn tokenize<T: Scalar>(tape: &mut Tape<T>, patches: Var, p: &ParamVars, cfg: &ModelConfig) -> Result<Tokens> {
    let n = batch_of(tape, patches)?;
    let (s2, f, nspc) = (cfg.spatial_tokens(), cfg.features, cfg.spectral_tokens);

    let sp = tape.conv2d(patches, p.get(ParamId::SpatialKernel), p.get(ParamId::SpatialBias), Padding::Same)?;
    let sp = tape.relu(sp)?;
    let sp = tape.reshape(sp, &[n, s2, f])?;
    let spatial = tape.dense(sp, p.get(ParamId::SpatialProjWeight), p.get(ParamId::SpatialProjBias))?;

    let sc = tape.conv2d(patches, p.get(ParamId::SpectralKernel), p.get(ParamId::SpectralBias), Padding::Same)?;
    let sc = tape.relu(sc)?;
    let sc = tape.reshape(sc, &[n, s2, nspc * f])?;
    let sc = tape.mean_axis1(sc)?;
    let sc = tape.reshape(sc, &[n, nspc, f])?;
    let spectral = tape.dense(sc, p.get(ParamId::SpectralProjWeight), p.get(ParamId::SpectralProjBias))?;

    let tokens = tape.concat(spatial, spectral)?;
    Ok(Tokens {
        spatial,
        spectral,
        tokens,
    })
}

/// Scores tokens with ReLU(dense), keeps the `count` best per sample and
/// gathers them highest first.
pub fn prioritize<T: Scalar>(
    tape: &mut Tape<T>,
    tokens: Var,
    p: &ParamVars,
    count: usize,
    frozen: Option<&[usize]>,
) -> Result<Prioritized> {
    let &[n, t, _] = tape.value(tokens).shape() else {
        return Err(Error::Dimension("tokens must be batch x tokens x features".into()));
    };
    if count == 0 || count > t {
        return Err(Error::Argument(format!("cannot prioritize {count} of {t} tokens")));
    }
    let raw = tape.dense(tokens, p.get(ParamId::ScoreWeight), p.get(ParamId::ScoreBias))?;
    let scores = tape.relu(raw)?;
    let indices = match frozen {
        Some(ix) => ix.to_vec(),
        None => top_indices(tape.value(scores).data(), n, t, count)?,
    };
    let gathered = tape.gather(tokens, indices.clone(), count)?;
    Ok(Prioritized {
        scores,
        indices,
        gathered,
    })
}

/// `A = X·Xᵀ`, `Y = A·X`, output `ReLU(dense(Y))`.
pub fn graph_propagate<T: Scalar>(tape: &mut Tape<T>, gathered: Var, p: &ParamVars) -> Result<GraphOutput> {
    let xt = tape.transpose(gathered)?;
    let adjacency = tape.matmul(gathered, xt)?;
    let propagated = tape.matmul(adjacency, gathered)?;
    let out = tape.dense(propagated, p.get(ParamId::GraphWeight), p.get(ParamId::GraphBias))?;
    let output = tape.relu(out)?;
    Ok(GraphOutput {
        adjacency,
        propagated,
        output,
    })
}

/// Queries from spatial tokens; keys and values from spectral tokens.
pub fn cross_attention<T: Scalar>(tape: &mut Tape<T>, spatial: Var, spectral: Var, p: &ParamVars) -> Result<Attention> {
    let query = tape.dense(spatial, p.get(ParamId::QueryWeight), p.get(ParamId::QueryBias))?;
    let key = tape.dense(spectral, p.get(ParamId::KeyWeight), p.get(ParamId::KeyBias))?;
    let value = tape.dense(spectral, p.get(ParamId::ValueWeight), p.get(ParamId::ValueBias))?;
    let d_k = *tape.value(key).shape().last().unwrap();
    let kt = tape.transpose(key)?;
    let logits = tape.matmul(query, kt)?;
    let logits = tape.scale(logits, T::one() / T::of(d_k as f64).sqrt())?;
    let weights = tape.softmax(logits)?;
    let output = tape.matmul(weights, value)?;
    Ok(Attention {
        query,
        key,
        value,
        weights,
        output,
    })
}

/// Projects both branches to `d_model` and stacks graph tokens before
/// attention tokens.
pub fn fuse<T: Scalar>(tape: &mut Tape<T>, graph_out: Var, attn_out: Var, p: &ParamVars) -> Result<Var> {
    let g = tape.dense(graph_out, p.get(ParamId::FuseGraphWeight), p.get(ParamId::FuseGraphBias))?;
    let a = tape.dense(attn_out, p.get(ParamId::FuseAttnWeight), p.get(ParamId::FuseAttnBias))?;
    tape.concat(g, a)
}

/// GRU over the token axis from a zero state; returns the state after every
/// step.
pub fn gru_ssm<T: Scalar>(tape: &mut Tape<T>, sequence: Var, p: &ParamVars) -> Result<Vec<Var>> {
    let &[n, steps, _] = tape.value(sequence).shape() else {
        return Err(Error::Dimension("sequence must be batch x steps x features".into()));
    };
    if steps == 0 {
        return Err(Error::Argument("GRU needs at least one timestep".into()));
    }
    let d = tape.value(p.get(ParamId::GruUz)).shape()[0];
    let mut h = tape.constant(Tensor::zeros(&[n, d]));
    let mut states = Vec::with_capacity(steps);
    for t in 0..steps {
        let x = tape.select_axis1(sequence, t)?;
        let z = gate(tape, x, h, p, ParamId::GruWz, ParamId::GruBz, ParamId::GruUz)?;
        let z = tape.sigmoid(z)?;
        let r = gate(tape, x, h, p, ParamId::GruWr, ParamId::GruBr, ParamId::GruUr)?;
        let r = tape.sigmoid(r)?;
        let rh = tape.mul(r, h)?;
        let cand = gate(tape, x, rh, p, ParamId::GruWh, ParamId::GruBh, ParamId::GruUh)?;
        let cand = tape.tanh(cand)?;
        let keep = tape.one_minus(z)?;
        let kept = tape.mul(keep, h)?;
        let fresh = tape.mul(z, cand)?;
        h = tape.add(kept, fresh)?;
        states.push(h);
    }
    Ok(states)
}

fn gate<T: Scalar>(tape: &mut Tape<T>, x: Var, h: Var, p: &ParamVars, w: ParamId, b: ParamId, u: ParamId) -> Result<Var> {
    let wx = tape.dense(x, p.get(w), p.get(b))?;
    let uh = tape.matmul(h, p.get(u))?;
    tape.add(wx, uh)
}

/// Bias-free linear classifier.
pub fn classify<T: Scalar>(tape: &mut Tape<T>, h: Var, p: &ParamVars) -> Result<Var> {
    tape.matmul(h, p.get(ParamId::Classifier))
}

fn batch_of<T: Scalar>(tape: &Tape<T>, patches: Var) -> Result<usize> {
    match *tape.value(patches).shape() {
        [n, _, _, _] if n > 0 => Ok(n),
        ref s => Err(Error::Dimension(format!("patch batch must be batch x S x S x bands, got {s:?}"))),
    }
}

/// Runs the whole network on `patches` (`batch × S × S × bands`).
pub fn forward_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    patches: Var,
    p: &ParamVars,
    cfg: &ModelConfig,
    opts: &ForwardOptions,
) -> Result<ForwardVars> {
    let shape = tape.value(patches).shape().to_vec();
    let n = batch_of(tape, patches)?;
    if shape[1..] != [cfg.patch_size, cfg.patch_size, cfg.bands] {
        return Err(Error::Shape {
            op: "forward",
            lhs: shape,
            rhs: vec![n, cfg.patch_size, cfg.patch_size, cfg.bands],
        });
    }
    let tokens = tokenize(tape, patches, p, cfg)?;
    let prioritized = prioritize(tape, tokens.tokens, p, cfg.prioritized, opts.frozen_indices.as_deref())?;
    let graph = graph_propagate(tape, prioritized.gathered, p)?;
    let attention = cross_attention(tape, tokens.spatial, tokens.spectral, p)?;
    let fused = fuse(tape, graph.output, attention.output, p)?;
    let states = gru_ssm(tape, fused, p)?;
    let logits = classify(tape, *states.last().expect("non-empty sequence"), p)?;
    Ok(ForwardVars {
        tokens,
        prioritized,
        graph,
        attention,
        fused,
        states,
        logits,
    })
}

/// Every intermediate activation of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub spatial: Tensor<T>,
    pub spectral: Tensor<T>,
    pub tokens: Tensor<T>,
    pub scores: Tensor<T>,
    pub indices: Vec<usize>,
    pub prioritized: Tensor<T>,
    pub adjacency: Tensor<T>,
    pub propagated: Tensor<T>,
    pub graph_out: Tensor<T>,
    pub query: Tensor<T>,
    pub key: Tensor<T>,
    pub value: Tensor<T>,
    pub attn_weights: Tensor<T>,
    pub attn_out: Tensor<T>,
    pub fused: Tensor<T>,
    pub states: Vec<Tensor<T>>,
    pub logits: Tensor<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    fn collect(tape: &Tape<T>, v: &ForwardVars) -> Self {
        let get = |var: Var| tape.value(var).clone();
        Self {
            spatial: get(v.tokens.spatial),
            spectral: get(v.tokens.spectral),
            tokens: get(v.tokens.tokens),
            scores: get(v.prioritized.scores),
            indices: v.prioritized.indices.clone(),
            prioritized: get(v.prioritized.gathered),
            adjacency: get(v.graph.adjacency),
            propagated: get(v.graph.propagated),
            graph_out: get(v.graph.output),
            query: get(v.attention.query),
            key: get(v.attention.key),
            value: get(v.attention.value),
            attn_weights: get(v.attention.weights),
            attn_out: get(v.attention.output),
            fused: get(v.fused),
            states: v.states.iter().map(|&s| get(s)).collect(),
            logits: get(v.logits),
        }
    }

    /// `(stage, shape)` for every recorded activation, in execution order.
    /// GRU states are listed as one stage of shape `steps × batch × d`.
    pub fn stages(&self) -> Vec<(&'static str, Vec<usize>)> {
        let batch = self.logits.shape()[0];
        let k = self.indices.len() / batch.max(1);
        let mut states_shape = vec![self.states.len()];
        states_shape.extend_from_slice(self.states[0].shape());
        vec![
            ("spatial", self.spatial.shape().to_vec()),
            ("spectral", self.spectral.shape().to_vec()),
            ("tokens", self.tokens.shape().to_vec()),
            ("scores", self.scores.shape().to_vec()),
            ("indices", vec![batch, k]),
            ("prioritized", self.prioritized.shape().to_vec()),
            ("adjacency", self.adjacency.shape().to_vec()),
            ("propagated", self.propagated.shape().to_vec()),
            ("graph_out", self.graph_out.shape().to_vec()),
            ("query", self.query.shape().to_vec()),
            ("key", self.key.shape().to_vec()),
            ("value", self.value.shape().to_vec()),
            ("attn_weights", self.attn_weights.shape().to_vec()),
            ("attn_out", self.attn_out.shape().to_vec()),
            ("fused", self.fused.shape().to_vec()),
            ("states", states_shape),
            ("logits", self.logits.shape().to_vec()),
        ]
    }

    /// Total elements over all stages.
    pub fn element_count(&self) -> usize {
        self.stages().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

/// Inference-style forward pass: returns logits and the full trace.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    patches: &Tensor<T>,
    opts: &ForwardOptions,
) -> Result<(Tensor<T>, ForwardTrace<T>)> {
    let mut tape = Tape::new();
    let p = params.register_frozen(&mut tape);
    let x = tape.constant(patches.clone());
    let vars = forward_on_tape(&mut tape, x, &p, params.config(), opts)?;
    let trace = ForwardTrace::collect(&tape, &vars);
    Ok((trace.logits.clone(), trace))
}
