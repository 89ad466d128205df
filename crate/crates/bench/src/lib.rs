//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sclkit::classifier::{random_decomposition, RandomParams};
use sclkit::hypgraph::{random_quasi_tree, QuasiTreeParams};
use sclkit::words::random_word;
use sclkit::{FiniteMetricGraph, NtDecomposition, Word};

/// Quasi-tree with `n` vertices, `n/20` chords of span at most 4.
pub fn quasi_tree(n: usize, seed: u64) -> FiniteMetricGraph {
    let p = QuasiTreeParams { n, locality: 3, chords: n / 20, span: 4 };
    random_quasi_tree(p, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn words(rank: usize, len: usize, count: usize, seed: u64) -> Vec<Word> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_word(rank, len, &mut rng)).collect()
}

pub fn decompositions(count: usize, seed: u64) -> Vec<NtDecomposition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_decomposition(&mut rng, RandomParams::default())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(quasi_tree(100, 1).edges(), quasi_tree(100, 1).edges());
        assert_eq!(words(2, 8, 3, 5), words(2, 8, 3, 5));
        assert_eq!(decompositions(4, 2).len(), 4);
    }
}
