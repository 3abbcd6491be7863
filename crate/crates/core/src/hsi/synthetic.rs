use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::hsi::HsiCube;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: u32,
    pub noise: f64,
    pub seed: u64,
}

/// Labeled scene of `classes` contiguous rectangular regions.
///
/// The scene is cut into a `rows × cols` grid (`rows = ⌊√C⌋`,
/// `cols = ⌈C/rows⌉`); cell `k` in row-major order gets class
/// `min(k, C−1) + 1`, so surplus cells extend the last class along the final
/// row. Class `c` has the spectrum `0.1 + 0.8·exp(−(band − μ_c)²/(2w²))` with
/// bump centers `μ_c = (c + ½)·B/C`, plus i.i.d. Gaussian noise of scale
/// `noise`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<HsiCube> {
    let SyntheticSpec {
        height,
        width,
        bands,
        classes,
        noise,
        seed,
    } = *spec;
    if classes < 2 {
        return Err(Error::Argument(format!("need at least 2 classes, got {classes}")));
    }
    if bands < classes as usize {
        return Err(Error::Argument(format!("need bands >= classes, got {bands} < {classes}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Argument(format!("noise must be finite and non-negative, got {noise}")));
    }
    if height == 0 || width == 0 {
        return Err(Error::Dimension(format!("scene extents must be positive, got {height}x{width}")));
    }

    let c = classes as usize;
    let rows = (c as f64).sqrt().floor() as usize;
    let cols = c.div_ceil(rows);
    let signatures = class_signatures(bands, c);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid scale");

    let mut values = Vec::with_capacity(height * width * bands);
    let mut labels = Vec::with_capacity(height * width);
    for r in 0..height {
        let cell_r = r * rows / height;
        for col in 0..width {
            let cell_c = col * cols / width;
            let class = (cell_r * cols + cell_c).min(c - 1);
            labels.push(class as u32 + 1);
            for &base in &signatures[class] {
                let v = if noise > 0.0 { base + normal.sample(&mut rng) } else { base };
                values.push(v as f32);
            }
        }
    }
    HsiCube::new(height, width, bands, classes, values, Some(labels))
}

pub(crate) fn class_signatures(bands: usize, classes: usize) -> Vec<Vec<f64>> {
    let width = (bands as f64 / (2.0 * classes as f64)).max(0.5);
    (0..classes)
        .map(|k| {
            let center = (k as f64 + 0.5) * bands as f64 / classes as f64;
            (0..bands)
                .map(|b| {
                    let d = b as f64 + 0.5 - center;
                    0.1 + 0.8 * (-d * d / (2.0 * width * width)).exp()
                })
                .collect()
        })
        .collect()
}
