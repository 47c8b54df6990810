//! Generated datasets used as fixtures by the harness and its tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{FeatureMatrix, TabularDataset};

/// Named fixtures accepted as `dataset = synthetic:<name>`.
pub const FIXTURES: [&str; 3] = ["separable", "imbalanced", "blobs"];

pub fn by_name(name: &str, seed: u64) -> Option<TabularDataset> {
    match name {
        "separable" => Some(separable(200, seed)),
        "imbalanced" => Some(imbalanced(2000, 20.0, seed)),
        "blobs" => Some(blobs(600, 3, seed)),
        _ => None,
    }
}

/// Half-width of the empty band around the separable fixture's boundary.
pub const SEPARABLE_MARGIN: f64 = 0.3;

/// Two uniform features on `[-1, 1]²`, labelled by the sign of `x0 + x1`,
/// with a band of [`SEPARABLE_MARGIN`] around the boundary kept empty.
pub fn separable(n: usize, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let x0: f64 = rng.gen_range(-1.0..1.0);
        let x1: f64 = rng.gen_range(-1.0..1.0);
        let s = x0 + x1;
        if s.abs() < SEPARABLE_MARGIN {
            continue;
        }
        rows.push(vec![x0, x1]);
        labels.push(usize::from(s > 0.0));
    }
    build(&rows, labels, 2)
}

/// Imbalanced binary task: `n / (ir + 1)` minority rows (label 1).
///
/// Four informative features: the minority class is shifted by
/// [`IMBALANCED_SHIFT`] along each of them, and the majority class draws its
/// features from a standard normal. Two further features are pure noise.
/// Rows are shuffled.
pub fn imbalanced(n: usize, ir: f64, seed: u64) -> TabularDataset {
    shifted_gaussians(n, ir, IMBALANCED_SHIFT, seed)
}

pub const IMBALANCED_SHIFT: f64 = 2.0;

/// [`imbalanced`] with a chosen class separation.
pub fn shifted_gaussians(n: usize, ir: f64, shift: f64, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let minority = ((n as f64) / (ir + 1.0)).round() as usize;
    let mut labels: Vec<usize> = (0..n).map(|i| usize::from(i < minority)).collect();
    // Fisher-Yates through the same stream keeps the fixture a pure function of seed
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| {
            (0..6)
                .map(|f| {
                    let z: f64 = rng.sample(StandardNormal);
                    if y == 1 && f < 4 {
                        z + shift
                    } else {
                        z
                    }
                })
                .collect()
        })
        .collect();
    build(&rows, labels, 2)
}

/// Isotropic Gaussian blobs with unit spread, centres evenly spaced on a
/// circle of radius 2.5, equal class sizes (up to rounding).
pub fn blobs(n: usize, n_classes: usize, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % n_classes;
        let angle = std::f64::consts::TAU * c as f64 / n_classes as f64;
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        rows.push(vec![2.5 * angle.cos() + dx, 2.5 * angle.sin() + dy]);
        labels.push(c);
    }
    build(&rows, labels, n_classes)
}

fn build(rows: &[Vec<f64>], labels: Vec<usize>, n_classes: usize) -> TabularDataset {
    let features = FeatureMatrix::from_dense_rows(rows).expect("rectangular rows");
    TabularDataset::from_parts(features, labels, n_classes).expect("labels within range")
}
