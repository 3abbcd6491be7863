use std::collections::BTreeSet;
use std::sync::Arc;

use graphmamba::hsi::{
    extract_patches, generate_synthetic, load_cube, save_cube, stratified_split, SyntheticSpec,
};
use graphmamba::{Error, HsiCube};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cube(h: usize, w: usize, b: usize, classes: u32, seed: u64) -> HsiCube {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..h * w * b).map(|_| r.random_range(-1.0f32..1.0)).collect();
    let labels = (0..h * w).map(|_| r.random_range(0..=classes)).collect();
    HsiCube::new(h, w, b, classes, values, Some(labels)).unwrap()
}

#[test]
fn cube_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.hsic");
    let cube = random_cube(7, 5, 4, 3, 1);
    save_cube(&cube, &path).unwrap();
    assert_eq!(load_cube(&path).unwrap(), cube);

    let unlabeled = cube.without_labels();
    save_cube(&unlabeled, &path).unwrap();
    assert_eq!(load_cube(&path).unwrap(), unlabeled);
}

#[test]
fn wrong_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.hsic");
    std::fs::write(&path, b"NOPE0000000000000000000000000000").unwrap();
    assert!(matches!(load_cube(&path), Err(Error::BadMagic { .. })));
}

#[test]
fn five_by_five_gives_nine_patches() {
    let cube = Arc::new(random_cube(5, 5, 2, 2, 2));
    let p = extract_patches(cube.clone(), 3, 1).unwrap();
    assert_eq!(p.len(), 9);
    let q = extract_patches(cube, 3, 3).unwrap();
    assert_eq!(q.overlap_ratio(), 0.0);
}

#[test]
fn patches_equal_direct_slices() {
    let cube = Arc::new(random_cube(9, 11, 3, 4, 3));
    for (size, stride) in [(3, 1), (5, 2), (7, 7), (1, 1)] {
        let set = extract_patches(cube.clone(), size, stride).unwrap();
        let half = size / 2;
        for i in 0..set.len() {
            let (r, c) = set.centers()[i];
            let mut expected = Vec::new();
            for dr in 0..size {
                for dc in 0..size {
                    expected.extend_from_slice(cube.pixel(r + dr - half, c + dc - half));
                }
            }
            assert_eq!(set.patch(i), expected);
            assert_eq!(set.labels()[i], cube.label(r, c));
        }
        let batch = set.batch::<f32>(&[0, set.len() - 1]);
        assert_eq!(batch.shape(), [2, size, size, 3]);
        assert_eq!(&batch.data()[..size * size * 3], set.patch(0).as_slice());
    }
}

#[test]
fn invalid_patch_requests() {
    let cube = Arc::new(random_cube(6, 6, 2, 2, 4));
    assert!(matches!(extract_patches(cube.clone(), 4, 1), Err(Error::Argument(_))));
    assert!(matches!(extract_patches(cube.clone(), 7, 1), Err(Error::Dimension(_))));
    assert!(matches!(extract_patches(cube.clone(), 3, 4), Err(Error::Argument(_))));
    assert!(matches!(extract_patches(cube, 3, 0), Err(Error::Argument(_))));
}

fn one_class_cube(n: usize) -> Arc<HsiCube> {
    Arc::new(HsiCube::new(1, n, 1, 1, vec![0.5; n], Some(vec![1; n])).unwrap())
}

#[test]
fn split_examples() {
    let patches = extract_patches(one_class_cube(100), 1, 1).unwrap();
    let split = stratified_split(&patches, 0.1, 0).unwrap();
    assert_eq!(split.train_indices().len(), 10);
    assert_eq!(split.test_indices().len(), 90);

    let all = stratified_split(&patches, 1.0, 0).unwrap();
    assert_eq!(all.train_indices().len(), 100);
    assert!(all.test_indices().is_empty());

    let again = stratified_split(&patches, 0.1, 0).unwrap();
    assert_eq!(split.train_indices(), again.train_indices());
    assert_eq!(split.test_indices(), again.test_indices());
}

#[test]
fn noiseless_classes_share_one_spectrum() {
    let spec = SyntheticSpec {
        height: 10,
        width: 12,
        bands: 6,
        classes: 3,
        noise: 0.0,
        seed: 5,
    };
    let cube = generate_synthetic(&spec).unwrap();
    let mut seen: Vec<Option<Vec<f32>>> = vec![None; 4];
    for r in 0..10 {
        for c in 0..12 {
            let k = cube.label(r, c) as usize;
            assert!((1..=3).contains(&k));
            match &seen[k] {
                Some(s) => assert_eq!(s.as_slice(), cube.pixel(r, c)),
                None => seen[k] = Some(cube.pixel(r, c).to_vec()),
            }
        }
    }
    let spectra: Vec<Vec<f32>> = seen.into_iter().flatten().collect();
    assert_eq!(spectra.len(), 3);
    for a in 0..3 {
        for b in a + 1..3 {
            let d: f32 = spectra[a].iter().zip(&spectra[b]).map(|(x, y)| (x - y).powi(2)).sum();
            assert!(d > 0.0);
        }
    }
}

#[test]
fn low_noise_scene_is_nearest_centroid_separable() {
    let spec = SyntheticSpec {
        height: 24,
        width: 24,
        bands: 8,
        classes: 4,
        noise: 0.01,
        seed: 6,
    };
    let cube = generate_synthetic(&spec).unwrap();
    let b = cube.bands();
    let mut sums = vec![vec![0.0f64; b]; 5];
    let mut counts = [0usize; 5];
    for r in 0..24 {
        for c in 0..24 {
            let k = cube.label(r, c) as usize;
            counts[k] += 1;
            sums[k].iter_mut().zip(cube.pixel(r, c)).for_each(|(s, &v)| *s += f64::from(v));
        }
    }
    let centroids: Vec<Vec<f64>> = (1..=4).map(|k| sums[k].iter().map(|s| s / counts[k] as f64).collect()).collect();
    for r in 0..24 {
        for c in 0..24 {
            let px = cube.pixel(r, c);
            let nearest = (0..4)
                .min_by(|&x, &y| {
                    let d = |k: usize| -> f64 { centroids[k].iter().zip(px).map(|(m, &v)| (m - f64::from(v)).powi(2)).sum() };
                    d(x).total_cmp(&d(y))
                })
                .unwrap();
            assert_eq!(nearest as u32 + 1, cube.label(r, c));
        }
    }
}

#[test]
fn normalization_maps_each_band_to_unit_range() {
    let cube = random_cube(6, 7, 3, 2, 7).normalized();
    for band in 0..3 {
        let vals: Vec<f32> = (0..42).map(|i| cube.values()[i * 3 + band]).collect();
        let lo = vals.iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = vals.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }
}

proptest! {
    #[test]
    fn patch_count_formula(h in 1usize..30, w in 1usize..30, half in 0usize..8) {
        let s = 2 * half + 1;
        prop_assume!(s <= h.min(w));
        let cube = Arc::new(HsiCube::new(h, w, 1, 1, vec![0.0; h * w], None).unwrap());
        let set = extract_patches(cube, s, 1).unwrap();
        prop_assert_eq!(set.len(), (h - s + 1) * (w - s + 1));
    }

    #[test]
    fn overlap_ratio_formula(half in 0usize..8, stride_frac in 0.0f64..1.0) {
        let s = 2 * half + 1;
        let stride = 1 + ((s - 1) as f64 * stride_frac).round() as usize;
        let cube = Arc::new(HsiCube::new(s, s, 1, 1, vec![0.0; s * s], None).unwrap());
        let set = extract_patches(cube, s, stride).unwrap();
        let r = set.overlap_ratio();
        prop_assert_eq!(r, 1.0 - stride as f64 / s as f64);
        prop_assert!((0.0..1.0).contains(&r));
        prop_assert_eq!(r == 0.0, stride == s);
    }

    #[test]
    fn split_partitions_labeled_patches(seed in 0u64..500, p in 0.01f64..1.0) {
        let cube = Arc::new(random_cube(10, 10, 1, 3, seed));
        let set = extract_patches(cube, 1, 1).unwrap();
        let split = match stratified_split(&set, p, seed) {
            Ok(s) => s,
            Err(Error::Split { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let train: BTreeSet<usize> = split.train_indices().into_iter().collect();
        let test: BTreeSet<usize> = split.test_indices().into_iter().collect();
        prop_assert!(train.is_disjoint(&test));
        let labeled: BTreeSet<usize> = (0..set.len()).filter(|&i| set.labels()[i] != 0).collect();
        prop_assert_eq!(&train | &test, labeled);
        for class in 1..=3u32 {
            let n = set.labels().iter().filter(|&&l| l == class).count();
            let k = train.iter().filter(|&&i| set.labels()[i] == class).count();
            let expected = ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
            prop_assert_eq!(k, expected);
        }
        let again = stratified_split(&set, p, seed).unwrap();
        prop_assert_eq!(again.train_indices(), split.train_indices());
    }
}
