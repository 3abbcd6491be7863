use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hsi::PatchSet;

/// Per-class train/test partition of the labeled patches of a [`PatchSet`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub fraction_ppm: u32,
    pub seed: u64,
    /// `(class, train indices, test indices)` in ascending class order; index
    /// lists are sorted.
    pub classes: Vec<(u32, Vec<usize>, Vec<usize>)>,
}

impl SplitSpec {
    pub fn fraction(&self) -> f64 {
        f64::from(self.fraction_ppm) / 1e6
    }

    pub fn train_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.classes.iter().flat_map(|(_, tr, _)| tr.iter().copied()).collect();
        v.sort_unstable();
        v
    }

    pub fn test_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.classes.iter().flat_map(|(_, _, te)| te.iter().copied()).collect();
        v.sort_unstable();
        v
    }
}

/// Number of training samples taken from a class of `count` samples.
pub(crate) fn train_quota(fraction: f64, count: usize) -> usize {
    // the small offset keeps products like 0.1 × 100 from rounding up past 10
    let k = (fraction * count as f64 - 1e-9).ceil() as usize;
    k.clamp(1, count)
}

/// Draws `⌈fraction · n_c⌉` (at least 1) training patches from each class,
/// the rest of that class going to test. Deterministic in `seed`.
pub fn stratified_split(patches: &PatchSet, fraction: f64, seed: u64) -> Result<SplitSpec> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!("train fraction must be in (0, 1], got {fraction}")));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &label) in patches.labels().iter().enumerate() {
        if label > 0 {
            by_class.entry(label).or_default().push(i);
        }
    }
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::Split {
            class,
            count: members.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = by_class
        .into_iter()
        .map(|(class, mut members)| {
            let k = train_quota(fraction, members.len());
            members.shuffle(&mut rng);
            let mut test = members.split_off(k);
            members.sort_unstable();
            test.sort_unstable();
            (class, members, test)
        })
        .collect();
    Ok(SplitSpec {
        fraction_ppm: (fraction * 1e6).round() as u32,
        seed,
        classes,
    })
}
