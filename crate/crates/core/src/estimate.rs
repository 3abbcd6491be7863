//! Closed-form parameter, operation and memory estimates.
//!
//! Operation counts follow the contraction kernels' convention: a
//! multiply-add is 2 operations, elementwise work is ignored, and a
//! convolution is charged a full k×k window per output position.

use std::fmt::Write;

use crate::model::ModelConfig;
use crate::train::TrainConfig;

/// Bytes per stored value (f32).
pub const BYTES_PER_VALUE: u64 = 4;

/// Number of learnable scalars in a model with configuration `cfg`.
pub fn count_params(cfg: &ModelConfig) -> u64 {
    let (b, f, d, c, nspc) = (
        cfg.bands as u64,
        cfg.features as u64,
        cfg.d_model as u64,
        cfg.classes as u64,
        cfg.spectral_tokens as u64,
    );
    let spatial_conv = 9 * b * f + f;
    let spectral_conv = b * nspc * f + nspc * f;
    let projections = 2 * (f * f + f);
    let score = f + 1;
    let graph = f * f + f;
    let attention = 2 * (f * d + d) + (f * f + f);
    let fusion = 2 * (f * d + d);
    let gru = 6 * d * d + 3 * d;
    let classifier = d * c;
    spatial_conv + spectral_conv + projections + score + graph + attention + fusion + gru + classifier
}

/// Per-stage operation counts for one forward pass over `batch` patches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlopTerms {
    pub batch: u64,
    pub spatial_conv: u64,
    pub spectral_conv: u64,
    pub token_projection: u64,
    pub scoring: u64,
    pub adjacency: u64,
    pub propagation: u64,
    pub graph_projection: u64,
    pub qkv_projection: u64,
    pub attention_weights: u64,
    pub attention_aggregation: u64,
    pub fusion: u64,
    pub gru: u64,
    pub classifier: u64,
    /// Comparisons for ranking `T` scores per sample, `T·⌈log₂T⌉`; not part
    /// of the operation totals.
    pub sort_comparisons: u64,
}

impl FlopTerms {
    pub fn tokenization(&self) -> u64 {
        self.spatial_conv + self.spectral_conv + self.token_projection
    }

    pub fn graph(&self) -> u64 {
        self.scoring + self.adjacency + self.propagation + self.graph_projection
    }

    pub fn attention(&self) -> u64 {
        self.qkv_projection + self.attention_weights + self.attention_aggregation
    }

    /// GRU recurrence plus the classifier head on its final state.
    pub fn ssm(&self) -> u64 {
        self.gru + self.classifier
    }

    pub fn total(&self) -> u64 {
        self.tokenization() + self.graph() + self.attention() + self.fusion + self.ssm()
    }

    pub fn stages(&self) -> [(&'static str, u64); 5] {
        [
            ("tokenization", self.tokenization()),
            ("graph", self.graph()),
            ("attention", self.attention()),
            ("fusion", self.fusion),
            ("ssm", self.ssm()),
        ]
    }
}

pub fn estimate_flops(cfg: &ModelConfig, batch: usize) -> FlopTerms {
    let (s2, b, f, d, c) = (
        cfg.spatial_tokens() as u64,
        cfg.bands as u64,
        cfg.features as u64,
        cfg.d_model as u64,
        cfg.classes as u64,
    );
    let (nspc, n, t, l) = (
        cfg.spectral_tokens as u64,
        cfg.prioritized as u64,
        cfg.token_count() as u64,
        cfg.sequence_len() as u64,
    );
    let nb = batch as u64;
    let mac = |x: u64| 2 * x * nb;
    FlopTerms {
        batch: nb,
        spatial_conv: mac(s2 * 9 * b * f),
        spectral_conv: mac(s2 * b * nspc * f),
        token_projection: mac(s2 * f * f + nspc * f * f),
        scoring: mac(t * f),
        adjacency: mac(n * n * f),
        propagation: mac(n * n * f),
        graph_projection: mac(n * f * f),
        qkv_projection: mac(s2 * f * d + nspc * f * d + nspc * f * f),
        attention_weights: mac(s2 * nspc * d),
        attention_aggregation: mac(s2 * nspc * f),
        fusion: mac(n * f * d + s2 * f * d),
        gru: mac(l * 6 * d * d),
        classifier: mac(d * c),
        sort_comparisons: nb * t * u64::from(t.max(2).next_power_of_two().trailing_zeros()),
    }
}

/// Elements of every recorded activation for one sample.
pub fn activation_elements_per_sample(cfg: &ModelConfig) -> u64 {
    let (s2, f, d, c) = (
        cfg.spatial_tokens() as u64,
        cfg.features as u64,
        cfg.d_model as u64,
        cfg.classes as u64,
    );
    let (nspc, n, t, l) = (
        cfg.spectral_tokens as u64,
        cfg.prioritized as u64,
        cfg.token_count() as u64,
        cfg.sequence_len() as u64,
    );
    let tokens = s2 * f + nspc * f + t * f;
    let prioritization = t + n + n * f;
    let graph = n * n + n * f + n * f;
    let attention = s2 * d + nspc * d + nspc * f + s2 * nspc + s2 * f;
    let fusion = l * d;
    let ssm = l * d + c;
    tokens + prioritization + graph + attention + fusion + ssm
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResourceReport {
    pub parameters: u64,
    pub parameter_bytes: u64,
    pub activation_bytes: u64,
    pub gradient_bytes: u64,
    pub optimizer_bytes: u64,
    pub total_bytes: u64,
    pub flops: FlopTerms,
}

/// Parameters at 4 bytes each; activations summed over every recorded
/// stage for a full batch; gradients sized like activations; Adam state
/// twice the parameters.
pub fn estimate_memory(cfg: &ModelConfig, train: &TrainConfig) -> ResourceReport {
    ResourceReport::from_counts(
        count_params(cfg),
        activation_elements_per_sample(cfg) * train.batch_size as u64,
        estimate_flops(cfg, train.batch_size),
    )
}

impl ResourceReport {
    /// Applies the byte rules to raw parameter and activation counts.
    pub fn from_counts(parameters: u64, activation_values: u64, flops: FlopTerms) -> Self {
        let parameter_bytes = BYTES_PER_VALUE * parameters;
        let activation_bytes = BYTES_PER_VALUE * activation_values;
        let gradient_bytes = activation_bytes;
        let optimizer_bytes = 2 * parameter_bytes;
        Self {
            parameters,
            parameter_bytes,
            activation_bytes,
            gradient_bytes,
            optimizer_bytes,
            total_bytes: parameter_bytes + activation_bytes + gradient_bytes + optimizer_bytes,
            flops,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# operations: multiply-add = 2, elementwise excluded, per forward pass over one batch\n");
        writeln!(s, "parameters = {}", self.parameters).unwrap();
        writeln!(s, "parameter_bytes = {}", self.parameter_bytes).unwrap();
        writeln!(s, "activation_bytes = {}", self.activation_bytes).unwrap();
        writeln!(s, "gradient_bytes = {}", self.gradient_bytes).unwrap();
        writeln!(s, "optimizer_bytes = {}", self.optimizer_bytes).unwrap();
        writeln!(s, "total_bytes = {}", self.total_bytes).unwrap();
        writeln!(s, "batch = {}", self.flops.batch).unwrap();
        for (name, v) in self.flops.stages() {
            writeln!(s, "flops.{name} = {v}").unwrap();
        }
        writeln!(s, "flops.total = {}", self.flops.total()).unwrap();
        writeln!(s, "sort_comparisons = {}", self.flops.sort_comparisons).unwrap();
        s
    }
}
