use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hsi::HsiCube;
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Fully interior `size × size × bands` patches of a cube, enumerated
/// row-major by center.
///
/// Patch data is read from the shared cube on demand; [`PatchSet::batch`]
/// materializes any subset as a `batch × size × size × bands` tensor.
#[derive(Clone, Debug)]
pub struct PatchSet {
    cube: Arc<HsiCube>,
    size: usize,
    stride: usize,
    centers: Vec<(usize, usize)>,
    labels: Vec<u32>,
}

/// Extracts every interior patch whose center lies on the stride grid.
///
/// `size` must be odd so the center pixel is unambiguous. A patch takes the
/// label of its center pixel; label 0 (unlabeled) patches are kept but never
/// enter a supervised split.
pub fn extract_patches(cube: Arc<HsiCube>, size: usize, stride: usize) -> Result<PatchSet> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::Argument(format!("patch size must be odd, got {size}")));
    }
    if size > cube.height().min(cube.width()) {
        return Err(Error::Dimension(format!(
            "patch size {size} exceeds cube extent {}x{}",
            cube.height(),
            cube.width()
        )));
    }
    if stride == 0 || stride > size {
        return Err(Error::Argument(format!("stride must be in 1..={size}, got {stride}")));
    }
    let half = size / 2;
    let mut centers = Vec::new();
    let mut labels = Vec::new();
    for row in (half..cube.height() - half).step_by(stride) {
        for col in (half..cube.width() - half).step_by(stride) {
            centers.push((row, col));
            labels.push(cube.label(row, col));
        }
    }
    Ok(PatchSet {
        cube,
        size,
        stride,
        centers,
        labels,
    })
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn bands(&self) -> usize {
        self.cube.bands()
    }

    pub fn cube(&self) -> &HsiCube {
        &self.cube
    }

    /// `(row, col)` of each patch center.
    pub fn centers(&self) -> &[(usize, usize)] {
        &self.centers
    }

    /// Center-pixel label of each patch (0 = unlabeled).
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Fraction of extent shared by adjacent patches, `1 − stride/size`.
    pub fn overlap_ratio(&self) -> f64 {
        1.0 - self.stride as f64 / self.size as f64
    }

    /// Patch `i` flattened as `size × size × bands`.
    pub fn patch(&self, i: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.size * self.size * self.bands());
        self.append_patch(i, &mut out);
        out
    }

    fn append_patch(&self, i: usize, out: &mut Vec<f32>) {
        let (row, col) = self.centers[i];
        let half = self.size / 2;
        let b = self.bands();
        let w = self.cube.width();
        let values = self.cube.values();
        for r in row - half..=row + half {
            let start = (r * w + col - half) * b;
            out.extend_from_slice(&values[start..start + self.size * b]);
        }
    }

    /// Patches at `indices` as a `batch × size × size × bands` tensor.
    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> Tensor<T> {
        let mut flat = Vec::with_capacity(indices.len() * self.size * self.size * self.bands());
        for &i in indices {
            self.append_patch(i, &mut flat);
        }
        let shape = [indices.len(), self.size, self.size, self.bands()];
        Tensor::new(shape.to_vec(), flat.into_iter().map(|v| T::of(f64::from(v))).collect())
            .expect("patch layout matches shape")
    }
}
