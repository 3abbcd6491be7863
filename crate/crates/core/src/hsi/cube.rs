use crate::error::{Error, Result};

/// `height × width × bands` reflectance cube with optional per-pixel labels.
///
/// Label 0 marks an unlabeled pixel; classes are `1..=classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    classes: u32,
    values: Vec<f32>,
    labels: Option<Vec<u32>>,
}

impl HsiCube {
    pub fn new(
        height: usize,
        width: usize,
        bands: usize,
        classes: u32,
        values: Vec<f32>,
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::Dimension(format!(
                "cube extents must be positive, got {height}x{width}x{bands}"
            )));
        }
        let n = height * width * bands;
        if values.len() != n {
            return Err(Error::SizeMismatch {
                declared: n,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("cube contains non-finite values".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != height * width {
                return Err(Error::SizeMismatch {
                    declared: height * width,
                    actual: labels.len(),
                });
            }
            if let Some(&bad) = labels.iter().find(|&&l| l > classes) {
                return Err(Error::Argument(format!(
                    "label {bad} exceeds declared class count {classes}"
                )));
            }
        }
        Ok(Self {
            height,
            width,
            bands,
            classes,
            values,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn classes(&self) -> u32 {
        self.classes
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    /// Spectrum of pixel `(row, col)`.
    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let o = (row * self.width + col) * self.bands;
        &self.values[o..o + self.bands]
    }

    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels.as_ref().map_or(0, |l| l[row * self.width + col])
    }

    /// Copy with labels dropped, as for inference-only cubes.
    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            ..self.clone()
        }
    }

    /// Per-band min-max scaling to `[0, 1]`. Constant bands become 0.
    pub fn normalized(&self) -> Self {
        let b = self.bands;
        let mut lo = vec![f32::INFINITY; b];
        let mut hi = vec![f32::NEG_INFINITY; b];
        for px in self.values.chunks(b) {
            for (i, &v) in px.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        let mut values = self.values.clone();
        for px in values.chunks_mut(b) {
            for (i, v) in px.iter_mut().enumerate() {
                let range = hi[i] - lo[i];
                *v = if range > 0.0 { (*v - lo[i]) / range } else { 0.0 };
            }
        }
        Self {
            values,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_maps_each_band_to_unit_interval() {
        let values = vec![1.0, 5.0, 3.0, 5.0, 2.0, 5.0, 5.0, 5.0];
        let cube = HsiCube::new(2, 2, 2, 0, values, None).unwrap().normalized();
        assert_eq!(cube.pixel(0, 0), &[0.0, 0.0]);
        assert_eq!(cube.pixel(1, 1), &[1.0, 0.0]);
        assert_eq!(cube.pixel(0, 1)[0], 0.5);
    }

    #[test]
    fn rejects_label_above_class_count() {
        let err = HsiCube::new(1, 2, 1, 1, vec![0.0; 2], Some(vec![1, 2])).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn rejects_non_finite_values() {
        assert!(HsiCube::new(1, 1, 2, 0, vec![0.0, f32::NAN], None).is_err());
    }
}
