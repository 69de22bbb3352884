//! Probability vectors and conditional families.

use std::ops::Deref;

use serde::Serialize;

use crate::error::{Error, Result};

/// Entries below this are treated as round-off and clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;
/// Allowed deviation of a simplex vector's sum from one.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Largest number of stored probabilities (`N^k * N`) a family may hold.
pub const MAX_FAMILY_ENTRIES: usize = 1 << 26;

/// `base^exp` or `None` on overflow.
pub fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Number of states `N^k`, failing with a capacity error when it cannot be represented.
pub fn state_count(alphabet: usize, order: usize) -> Result<usize> {
    checked_pow(alphabet, order).ok_or_else(|| {
        Error::capacity(
            format!("state space {alphabet}^{order}"),
            (alphabet as u128).saturating_pow(order as u32),
            usize::MAX as u128,
        )
    })
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    /// Validates `entries`: non-empty, finite, entries `>= -1e-12` (clamped to zero), sum one within `1e-9`.
    pub fn new(mut entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::contract(
                "simplex vector must have positive dimension",
            ));
        }
        for (i, v) in entries.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::contract(format!("entry {i} is not finite")));
            }
            if *v < -NEGATIVE_TOLERANCE {
                return Err(Error::contract(format!("entry {i} is negative ({v})")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::contract(format!("entries sum to {sum}, not 1")));
        }
        Ok(SimplexVector(entries))
    }

    /// Scales non-negative `entries` to sum to one.
    pub fn normalized(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::contract(
                "cannot normalize: negative or non-finite entry",
            ));
        }
        let sum: f64 = entries.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::contract("cannot normalize a zero vector"));
        }
        Ok(SimplexVector(
            entries.into_iter().map(|v| v / sum).collect(),
        ))
    }

    /// Wraps the output of a column-stochastic map. Round-off negatives are clamped.
    pub(crate) fn from_stochastic(mut entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        for v in entries.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        SimplexVector(entries)
    }

    pub fn uniform(dim: usize) -> Self {
        assert!(dim > 0, "uniform vector of dimension zero");
        SimplexVector(vec![1.0 / dim as f64; dim])
    }

    /// Unit mass on `index` (0-based).
    pub fn point_mass(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        SimplexVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        l1_distance(&self.0, other)
    }
}

impl Deref for SimplexVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn max_abs_difference(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// The tuple of `N^k` next-symbol distributions of an order-`k` process over `N` symbols.
///
/// Member `i` (0-based) is the distribution of the next symbol given history state `i`.
/// Members are stored contiguously, `N` probabilities each.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFamily {
    alphabet: usize,
    order: usize,
    probs: Vec<f64>,
}

impl ConditionalFamily {
    pub fn new(alphabet: usize, order: usize, members: Vec<Vec<f64>>) -> Result<Self> {
        let expected = Self::member_count(alphabet, order)?;
        if members.len() != expected {
            return Err(Error::contract(format!(
                "order-{order} family over {alphabet} symbols needs {expected} members, got {}",
                members.len()
            )));
        }
        let mut probs = Vec::with_capacity(expected * alphabet);
        for (i, m) in members.into_iter().enumerate() {
            if m.len() != alphabet {
                return Err(Error::contract(format!(
                    "member {i} has {} entries, expected {alphabet}",
                    m.len()
                )));
            }
            let m =
                SimplexVector::new(m).map_err(|e| Error::contract(format!("member {i}: {e}")))?;
            probs.extend_from_slice(&m);
        }
        Ok(ConditionalFamily {
            alphabet,
            order,
            probs,
        })
    }

    /// Builds from contiguous storage (`N^k * N` values, member-major).
    pub fn from_flat(alphabet: usize, order: usize, probs: Vec<f64>) -> Result<Self> {
        let count = Self::member_count(alphabet, order)?;
        if probs.len() != count * alphabet {
            return Err(Error::contract(format!(
                "flat family storage has {} values, expected {}",
                probs.len(),
                count * alphabet
            )));
        }
        let mut probs = probs;
        for (i, chunk) in probs.chunks_mut(alphabet).enumerate() {
            let m = SimplexVector::new(chunk.to_vec())
                .map_err(|e| Error::contract(format!("member {i}: {e}")))?;
            chunk.copy_from_slice(&m);
        }
        Ok(ConditionalFamily {
            alphabet,
            order,
            probs,
        })
    }

    /// Already-validated storage; callers guarantee every chunk is a simplex vector.
    pub(crate) fn from_flat_unchecked(alphabet: usize, order: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(
            Some(probs.len()),
            checked_pow(alphabet, order).map(|c| c * alphabet)
        );
        ConditionalFamily {
            alphabet,
            order,
            probs,
        }
    }

    pub fn uniform(alphabet: usize, order: usize) -> Result<Self> {
        let count = Self::member_count(alphabet, order)?;
        Ok(ConditionalFamily {
            alphabet,
            order,
            probs: vec![1.0 / alphabet as f64; count * alphabet],
        })
    }

    /// Validates the alphabet and checks `N^k * N` against [`MAX_FAMILY_ENTRIES`].
    pub fn member_count(alphabet: usize, order: usize) -> Result<usize> {
        if alphabet < 2 {
            return Err(Error::contract(format!(
                "alphabet size must be >= 2, got {alphabet}"
            )));
        }
        let count = state_count(alphabet, order)?;
        match count.checked_mul(alphabet) {
            Some(n) if n <= MAX_FAMILY_ENTRIES => Ok(count),
            _ => Err(Error::capacity(
                format!("order-{order} family over {alphabet} symbols"),
                count as u128 * alphabet as u128,
                MAX_FAMILY_ENTRIES as u128,
            )),
        }
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of members, `N^k`.
    pub fn len(&self) -> usize {
        self.probs.len() / self.alphabet
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Member `i` (0-based).
    pub fn member(&self, i: usize) -> &[f64] {
        &self.probs[i * self.alphabet..(i + 1) * self.alphabet]
    }

    pub fn members(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.alphabet)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_clamps_small_negatives() {
        let v = SimplexVector::new(vec![1.0 + 5e-13, -5e-13]).unwrap();
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn simplex_rejects_bad_sums_and_negatives() {
        assert!(SimplexVector::new(vec![0.5, 0.4]).is_err());
        assert!(SimplexVector::new(vec![1.1, -0.1]).is_err());
        assert!(SimplexVector::new(vec![]).is_err());
        assert!(SimplexVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn family_member_count_enforced() {
        let err = ConditionalFamily::new(2, 1, vec![vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        assert!(ConditionalFamily::new(1, 0, vec![vec![1.0]]).is_err());
        let fam = ConditionalFamily::new(2, 1, vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        assert_eq!(fam.len(), 2);
        assert_eq!(fam.member(1), &[0.6, 0.4]);
    }

    #[test]
    fn family_capacity_error() {
        let err = ConditionalFamily::member_count(4, 40).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }
}
