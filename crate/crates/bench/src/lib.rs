//! Shared fixtures for the criterion benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simdiv::generate::{random_data, random_gram};
use simdiv::{DataMatrix, SimilarityMatrix};

/// Deterministic Gram similarity matrix of order `n` with `r = n`.
pub fn fixture_gram(n: usize, seed: u64) -> SimilarityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_gram(&mut rng, n, n, 1.0)
}

/// Deterministic standard-normal feature table, `n × d`.
pub fn fixture_data(n: usize, d: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_data(&mut rng, n, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(fixture_gram(8, 3), fixture_gram(8, 3));
        assert_eq!(fixture_data(5, 2, 3), fixture_data(5, 2, 3));
        assert_eq!(fixture_gram(8, 3).n(), 8);
    }
}
