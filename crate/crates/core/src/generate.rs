//! Random instances for property tests, the acceptance suite and benchmarks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::bounds::gram_from_parameters;
use crate::diversity::Abundance;
use crate::simkernel::{DataMatrix, SimilarityMatrix};

/// Gram similarity matrix from `x ~ Normal(0, scale²)` of shape `r × n`.
pub fn random_gram<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    r: usize,
    scale: f64,
) -> SimilarityMatrix {
    let normal = Normal::new(0.0, scale).expect("positive scale");
    let x = DMatrix::from_fn(r, n, |_, _| normal.sample(rng));
    gram_from_parameters(&x).expect("r, n >= 2 and finite parameters")
}

/// Gram matrix with `n ∈ [n_min, n_max]`, `r ∈ [2, n + 3]` and a log-uniform scale
/// in `[0.1, 10]`, all drawn from `rng`.
pub fn random_gram_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n_min: usize,
    n_max: usize,
) -> SimilarityMatrix {
    let n = rng.random_range(n_min.max(2)..=n_max);
    let r = rng.random_range(2..=n + 3);
    let scale = 10f64.powf(rng.random_range(-1.0..=1.0));
    random_gram(rng, n, r, scale)
}

/// Random abundance over `n` elements; roughly `zero_fraction` of entries are 0
/// (at least one stays positive).
pub fn random_abundance<R: Rng + ?Sized>(rng: &mut R, n: usize, zero_fraction: f64) -> Abundance {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < zero_fraction {
                0.0
            } else {
                rng.random::<f64>() + 1e-3
            }
        })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    Abundance::from_weights(&w).expect("positive weights")
}

/// Standard normal features, `n × d`.
pub fn random_data<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> DataMatrix {
    DataMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))).expect("finite")
}

/// Two Gaussian clusters of `per_cluster` points in `d` dimensions, centers
/// `separation` apart along the first axis.
pub fn two_clusters<R: Rng + ?Sized>(
    rng: &mut R,
    per_cluster: usize,
    d: usize,
    separation: f64,
) -> DataMatrix {
    let n = 2 * per_cluster;
    DataMatrix::new(DMatrix::from_fn(n, d, |i, j| {
        let noise: f64 = rng.sample(StandardNormal);
        if j == 0 && i >= per_cluster {
            noise + separation
        } else {
            noise
        }
    }))
    .expect("finite")
}

/// A uniformly random permutation of `0..n`.
pub fn random_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
