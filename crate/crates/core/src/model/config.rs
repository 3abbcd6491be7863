use crate::error::{Error, Result};

/// Architecture hyperparameters.
///
/// Token counts: `S²` spatial tokens (one per position of the same-padded
/// 3×3 convolution), `spectral_tokens` spectral tokens, and `prioritized`
/// tokens kept for the graph. The GRU runs over `prioritized + S²` steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub patch_size: usize,
    pub bands: usize,
    pub classes: usize,
    /// Token feature width `F`.
    pub features: usize,
    /// Attention key width and GRU state width.
    pub d_model: usize,
    pub spectral_tokens: usize,
    pub prioritized: usize,
}

impl ModelConfig {
    pub const DEFAULT_FEATURES: usize = 64;
    pub const DEFAULT_D_MODEL: usize = 128;

    /// Defaults: `F = 64`, `d_model = 128`, `S` spectral tokens and half of
    /// all tokens (rounded up) prioritized.
    pub fn new(patch_size: usize, bands: usize, classes: usize) -> Self {
        let spectral_tokens = patch_size;
        Self {
            patch_size,
            bands,
            classes,
            features: Self::DEFAULT_FEATURES,
            d_model: Self::DEFAULT_D_MODEL,
            spectral_tokens,
            prioritized: Self::default_prioritized(patch_size, spectral_tokens),
        }
    }

    pub fn default_prioritized(patch_size: usize, spectral_tokens: usize) -> usize {
        (patch_size * patch_size + spectral_tokens).div_ceil(2)
    }

    pub fn with_dims(mut self, features: usize, d_model: usize) -> Self {
        self.features = features;
        self.d_model = d_model;
        self
    }

    pub fn with_tokens(mut self, spectral_tokens: usize, prioritized: usize) -> Self {
        self.spectral_tokens = spectral_tokens;
        self.prioritized = prioritized;
        self
    }

    pub fn spatial_tokens(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn token_count(&self) -> usize {
        self.spatial_tokens() + self.spectral_tokens
    }

    /// GRU timesteps: graph tokens followed by attention tokens.
    pub fn sequence_len(&self) -> usize {
        self.prioritized + self.spatial_tokens()
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("patch_size", self.patch_size),
            ("bands", self.bands),
            ("classes", self.classes),
            ("features", self.features),
            ("d_model", self.d_model),
            ("spectral_tokens", self.spectral_tokens),
            ("prioritized", self.prioritized),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Argument(format!("model {name} must be >= 1")));
        }
        if self.patch_size.is_multiple_of(2) {
            return Err(Error::Argument(format!("patch size must be odd, got {}", self.patch_size)));
        }
        if self.prioritized > self.token_count() {
            return Err(Error::Argument(format!(
                "cannot prioritize {} of {} tokens",
                self.prioritized,
                self.token_count()
            )));
        }
        Ok(())
    }

    /// `key = value` lines, one per field.
    pub fn to_kv(&self) -> String {
        format!(
            "patch_size = {}\nbands = {}\nclasses = {}\nfeatures = {}\nd_model = {}\nspectral_tokens = {}\nprioritized = {}\n",
            self.patch_size, self.bands, self.classes, self.features, self.d_model, self.spectral_tokens, self.prioritized
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::new(0, 0, 0);
        let mut seen = [false; 7];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected key = value, got `{line}`")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad value in `{line}`")))?;
            let (slot, field) = match key.trim() {
                "patch_size" => (0, &mut cfg.patch_size),
                "bands" => (1, &mut cfg.bands),
                "classes" => (2, &mut cfg.classes),
                "features" => (3, &mut cfg.features),
                "d_model" => (4, &mut cfg.d_model),
                "spectral_tokens" => (5, &mut cfg.spectral_tokens),
                "prioritized" => (6, &mut cfg.prioritized),
                other => return Err(Error::Format(format!("unknown model key `{other}`"))),
            };
            *field = value;
            seen[slot] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("model config is missing fields".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
