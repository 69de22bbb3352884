//! Seeded random models for tests, identity checks and the CLI.
//!
//! All randomness goes through ChaCha8 seeded with `seed_from_u64`, which is
//! specified independently of platform and word size, so a seed reproduces the
//! same draws everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::simplex::{ConditionalFamily, SimplexVector};

/// Offset added to every uniform draw before normalizing; keeps random chains irreducible.
pub const POSITIVE_FLOOR: f64 = 0.05;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized vector of `floor + U[0,1)` draws.
pub fn random_simplex<R: Rng>(rng: &mut R, dim: usize, floor: f64) -> SimplexVector {
    let raw: Vec<f64> = (0..dim).map(|_| floor + rng.random::<f64>()).collect();
    SimplexVector::normalized(raw).expect("positive draws normalize")
}

/// Family whose members are independent [`random_simplex`] draws.
pub fn random_family<R: Rng>(
    rng: &mut R,
    alphabet: usize,
    order: usize,
    floor: f64,
) -> Result<ConditionalFamily> {
    let count = ConditionalFamily::member_count(alphabet, order)?;
    let mut probs = Vec::with_capacity(count * alphabet);
    for _ in 0..count {
        probs.extend_from_slice(&random_simplex(rng, alphabet, floor));
    }
    Ok(ConditionalFamily::from_flat_unchecked(
        alphabet, order, probs,
    ))
}

/// Column-stochastic `n x n` matrix with random columns.
pub fn random_column_stochastic<R: Rng>(rng: &mut R, n: usize, floor: f64) -> DenseMatrix {
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|_| random_simplex(rng, n, floor).into_vec())
        .collect();
    DenseMatrix::from_columns(&cols).expect("square")
}
