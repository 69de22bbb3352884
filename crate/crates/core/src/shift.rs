//! `k`-shift matrices and marginal stationary distributions.
//!
//! A shift chain holds families of orders `1..=k`. Its shift matrix maps the
//! distribution of one symbol to the distribution of the symbol `k` steps later,
//! where step `m` draws from the order-`m` family conditioned on everything drawn
//! so far.

use std::sync::Arc;

use crate::dense::{DenseMatrix, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::markov::{chain_decompose, stationary, HigherOrderChain, SolverConfig};
use crate::simplex::{l1_distance, ConditionalFamily, SimplexVector};
use crate::tensor_ops::{materialize_with_cap, StructuredOperator};

/// Input residual `‖θ - Qθ‖₁` above which a vector is not accepted as stationary.
pub const STATIONARITY_GATE: f64 = 1e-6;

/// Families of orders `1, 2, ..., k` over one alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftChain {
    alphabet: usize,
    families: Vec<Arc<ConditionalFamily>>,
}

impl ShiftChain {
    pub fn new(families: Vec<Arc<ConditionalFamily>>) -> Result<Self> {
        let first = families
            .first()
            .ok_or_else(|| Error::contract("a shift chain needs at least one family"))?;
        let alphabet = first.alphabet();
        for (pos, fam) in families.iter().enumerate() {
            if fam.order() != pos + 1 {
                return Err(Error::contract(format!(
                    "shift chain position {} holds an order-{} family; orders must run 1..=k",
                    pos + 1,
                    fam.order()
                )));
            }
            if fam.alphabet() != alphabet {
                return Err(Error::contract(format!(
                    "family of order {} uses {} symbols, expected {alphabet}",
                    pos + 1,
                    fam.alphabet()
                )));
            }
        }
        Ok(ShiftChain { alphabet, families })
    }

    pub fn from_families(families: Vec<ConditionalFamily>) -> Result<Self> {
        Self::new(families.into_iter().map(Arc::new).collect())
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Number of shifts `k`.
    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }

    pub fn families(&self) -> &[Arc<ConditionalFamily>] {
        &self.families
    }

    /// `M^(1)_1 ⋯ M^(k)_k C^(k+1)_1 B^(k)_k(Q^(k)) ⋯ B^(1)_1(Q^(1))`
    pub fn operator(&self) -> Result<StructuredOperator> {
        let n = self.alphabet;
        let k = self.len();
        let mut ops = Vec::with_capacity(2 * k + 1);
        for m in 1..=k {
            ops.push(StructuredOperator::marginalization(n, m, m)?);
        }
        ops.push(StructuredOperator::cycling(n, k + 1, 1)?);
        for (pos, fam) in self.families.iter().enumerate().rev() {
            let m = pos + 1;
            ops.push(StructuredOperator::branching(m, m, fam.clone())?);
        }
        StructuredOperator::compose(ops)
    }
}

/// The shift matrix as the materialized operator product.
pub fn shift_matrix(chain: &ShiftChain) -> Result<DenseMatrix> {
    materialize_with_cap(&chain.operator()?, DEFAULT_DENSE_CAP)
}

/// The shift matrix by the backward block recursion
/// `Q̄^(k+1)_i = E_N`, column `j` of `Q̄^(m)_i` = `Q̄^(m+1)_{Ni+j} q^(m)_{Ni+j}`,
/// returning `Q̄^(1)_0`.
pub fn shift_matrix_recursive(chain: &ShiftChain) -> Result<DenseMatrix> {
    let n = chain.alphabet;
    let k = chain.len();
    // `blocks[i]` is the row-major N×N matrix Q̄^(m+1)_i; `None` stands for level k+1,
    // where every block is the identity.
    let mut blocks: Option<Vec<Vec<f64>>> = None;
    for m in (1..=k).rev() {
        let family = &chain.families[m - 1];
        let count = family.len() / n;
        let mut next = Vec::with_capacity(count);
        for i in 0..count {
            let mut bar = vec![0.0; n * n];
            for j in 0..n {
                let child = n * i + j;
                let q = family.member(child);
                for r in 0..n {
                    bar[r * n + j] = match &blocks {
                        None => q[r],
                        Some(b) => b[child][r * n..(r + 1) * n]
                            .iter()
                            .zip(q)
                            .map(|(a, p)| a * p)
                            .sum(),
                    };
                }
            }
            next.push(bar);
        }
        blocks = Some(next);
    }
    let top = blocks
        .and_then(|mut b| b.pop())
        .ok_or_else(|| Error::contract("empty shift chain"))?;
    DenseMatrix::from_row_major(n, n, top)
}

/// Sums out the least significant symbol until `theta` is over `target`-symbol states.
pub fn marginalize_lowest(
    theta: &SimplexVector,
    alphabet: usize,
    order: usize,
    target: usize,
) -> Result<SimplexVector> {
    if target > order {
        return Err(Error::contract(format!(
            "cannot marginalize order {order} up to order {target}"
        )));
    }
    let mut cur = theta.clone();
    for j in (target..order).rev() {
        cur = StructuredOperator::marginalization(alphabet, j, j)?.apply(&cur)?;
    }
    Ok(cur)
}

/// Order-`m` marginal `M^(m)_m ⋯ M^(k-1)_{k-1} θ^(k)` of the stationary vector of `family`.
pub fn marginal_stationary(
    family: &ConditionalFamily,
    m: usize,
    config: &SolverConfig,
) -> Result<SimplexVector> {
    let k = family.order();
    if m == 0 || m > k {
        return Err(Error::contract(format!("target order {m} outside 1..={k}")));
    }
    let chain = HigherOrderChain::new(family.clone())?;
    let theta = stationary(&chain, config)?.theta;
    marginalize_lowest(&theta, family.alphabet(), k, m)
}

/// Residuals of the marginal stationarity conditions without checking that `theta`
/// is stationary.
///
/// With `θ` factored into `Θ^(0), ..., Θ^(k-1)` and `θ^(0)` its one-symbol marginal,
/// entry `m - 1` is `‖θ^(0) - S(Θ^(1..m)) θ^(0)‖₁` for `m = 1..k-1` and the last entry
/// is `‖θ^(0) - S(Θ^(1..k-1), Q^(k)) θ^(0)‖₁`.
pub fn marginal_condition_residuals(
    theta: &SimplexVector,
    family: &ConditionalFamily,
) -> Result<Vec<f64>> {
    let n = family.alphabet();
    let k = family.order();
    if k == 0 {
        return Err(Error::contract("marginal conditions need order >= 1"));
    }
    let d = chain_decompose(theta, n, k)?;
    let theta0 = d.levels[0].member(0).to_vec();
    let levels: Vec<Arc<ConditionalFamily>> = d.levels.into_iter().skip(1).map(Arc::new).collect();

    let residual = |families: Vec<Arc<ConditionalFamily>>| -> Result<f64> {
        let s = shift_matrix_recursive(&ShiftChain::new(families)?)?;
        Ok(l1_distance(&theta0, &s.matvec(&theta0)?))
    };

    let mut out = Vec::with_capacity(k);
    for m in 1..k {
        out.push(residual(levels[..m].to_vec())?);
    }
    let mut with_q = levels;
    with_q.push(Arc::new(family.clone()));
    out.push(residual(with_q)?);
    Ok(out)
}

/// [`marginal_condition_residuals`] for a vector that must be stationary for `family`.
pub fn verify_marginal_conditions(
    theta: &SimplexVector,
    family: &ConditionalFamily,
) -> Result<Vec<f64>> {
    let chain = HigherOrderChain::new(family.clone())?;
    let image = chain.transition_apply(theta)?;
    let input_residual = theta.l1_distance(&image);
    if input_residual > STATIONARITY_GATE {
        return Err(Error::contract(format!(
            "vector is not stationary for the family: ‖θ - Qθ‖₁ = {input_residual:e}"
        )));
    }
    marginal_condition_residuals(theta, family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::build_transition;
    use crate::sampling::{random_family, rng_from_seed, POSITIVE_FLOOR};

    fn chain(n: usize, k: usize, seed: u64) -> ShiftChain {
        let mut rng = rng_from_seed(seed);
        ShiftChain::from_families(
            (1..=k)
                .map(|m| random_family(&mut rng, n, m, POSITIVE_FLOOR).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_shift_is_transition() {
        let c = chain(3, 1, 2);
        let q = build_transition(&c.families()[0]).unwrap();
        assert!(shift_matrix(&c).unwrap().max_abs_difference(&q) < 1e-15);
        assert!(shift_matrix_recursive(&c).unwrap().max_abs_difference(&q) < 1e-15);
    }

    #[test]
    fn orders_must_run_from_one() {
        let fam = ConditionalFamily::uniform(2, 2).unwrap();
        assert!(ShiftChain::from_families(vec![fam]).is_err());
        let a = ConditionalFamily::uniform(2, 1).unwrap();
        let b = ConditionalFamily::uniform(3, 2).unwrap();
        assert!(ShiftChain::from_families(vec![a, b]).is_err());
        assert!(ShiftChain::from_families(vec![]).is_err());
    }

    #[test]
    fn uniform_chain_gives_flat_matrix() {
        let c = ShiftChain::from_families(
            (1..=3)
                .map(|m| ConditionalFamily::uniform(3, m).unwrap())
                .collect(),
        )
        .unwrap();
        let s = shift_matrix(&c).unwrap();
        assert!(s
            .as_row_major()
            .iter()
            .all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn definition_and_recursion_agree() {
        for seed in 0..10 {
            for (n, k) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
                let c = chain(n, k, seed);
                let a = shift_matrix(&c).unwrap();
                let b = shift_matrix_recursive(&c).unwrap();
                assert!(a.max_abs_difference(&b) < 1e-12);
                assert!(a.is_column_stochastic(1e-12));
            }
        }
    }

    #[test]
    fn deterministic_two_step_trace() {
        // order 1: next = other symbol; order 2 given (x, y): next = x
        let f1 = ConditionalFamily::new(2, 1, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f2 = ConditionalFamily::new(
            2,
            2,
            vec![
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, 1.0],
            ],
        )
        .unwrap();
        let c = ShiftChain::from_families(vec![f1, f2]).unwrap();
        // start x -> y = 1 - x -> z = x: identity
        let expected = DenseMatrix::identity(2);
        assert_eq!(shift_matrix(&c).unwrap(), expected);
        assert_eq!(shift_matrix_recursive(&c).unwrap(), expected);

        // order 2 given (x, y): next = y, so the two-step map is the flip
        let f1 = ConditionalFamily::new(2, 1, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f2 = ConditionalFamily::new(
            2,
            2,
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
            ],
        )
        .unwrap();
        let c = ShiftChain::from_families(vec![f1, f2]).unwrap();
        let flip = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(shift_matrix(&c).unwrap(), flip);
        assert_eq!(shift_matrix_recursive(&c).unwrap(), flip);
    }

    #[test]
    fn marginal_order_k_is_stationary_vector() {
        let fam = random_family(&mut rng_from_seed(3), 2, 2, POSITIVE_FLOOR).unwrap();
        let cfg = SolverConfig::default();
        let theta = stationary(&HigherOrderChain::new(fam.clone()).unwrap(), &cfg)
            .unwrap()
            .theta;
        assert_eq!(marginal_stationary(&fam, 2, &cfg).unwrap(), theta);
        assert!(marginal_stationary(&fam, 0, &cfg).is_err());
        assert!(marginal_stationary(&fam, 3, &cfg).is_err());
    }

    #[test]
    fn marginal_uniform_family() {
        let fam = ConditionalFamily::uniform(3, 3).unwrap();
        for m in 1..=3 {
            let w = marginal_stationary(&fam, m, &SolverConfig::default()).unwrap();
            let d = 3usize.pow(m as u32);
            assert!(w.l1_distance(&vec![1.0 / d as f64; d]) < 1e-13);
        }
    }

    #[test]
    fn marginal_matches_brute_force_top_digit() {
        let fam = random_family(&mut rng_from_seed(21), 2, 3, POSITIVE_FLOOR).unwrap();
        let cfg = SolverConfig::default();
        let theta = stationary(&HigherOrderChain::new(fam.clone()).unwrap(), &cfg)
            .unwrap()
            .theta;
        let mut brute = [0.0; 2];
        for s in 0..8 {
            let tuple = crate::markov::decode_state(2, 3, s + 1).unwrap();
            brute[tuple[0] - 1] += theta[s];
        }
        let w = marginal_stationary(&fam, 1, &cfg).unwrap();
        assert!(w.l1_distance(&brute) < 1e-14);
    }

    #[test]
    fn marginal_conditions_order_one() {
        let fam = random_family(&mut rng_from_seed(5), 3, 1, POSITIVE_FLOOR).unwrap();
        let theta = stationary(
            &HigherOrderChain::new(fam.clone()).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap()
        .theta;
        let r = verify_marginal_conditions(&theta, &fam).unwrap();
        assert_eq!(r.len(), 1);
        let q = build_transition(&fam).unwrap();
        let direct = theta.l1_distance(&q.matvec(&theta).unwrap());
        assert!((r[0] - direct).abs() < 1e-15);
        assert!(r[0] < 1e-11);
    }

    #[test]
    fn marginal_conditions_hold_at_stationarity() {
        for seed in 0..5 {
            let fam = random_family(&mut rng_from_seed(seed), 2, 3, POSITIVE_FLOOR).unwrap();
            let theta = stationary(
                &HigherOrderChain::new(fam.clone()).unwrap(),
                &SolverConfig::default(),
            )
            .unwrap()
            .theta;
            let r = verify_marginal_conditions(&theta, &fam).unwrap();
            assert_eq!(r.len(), 3);
            assert!(r.iter().all(|&e| e < 1e-9), "{r:?}");
        }
    }

    #[test]
    fn uniform_vector_is_rejected_and_violates_conditions() {
        // draw until the family's stationary vector is visibly far from uniform
        let mut seed = 0;
        let fam = loop {
            let fam = random_family(&mut rng_from_seed(seed), 2, 3, POSITIVE_FLOOR).unwrap();
            let q = build_transition(&fam).unwrap();
            let u = SimplexVector::uniform(8);
            if u.l1_distance(&q.matvec(&u).unwrap()) > 0.05 {
                break fam;
            }
            seed += 1;
        };
        let u = SimplexVector::uniform(8);
        assert!(matches!(
            verify_marginal_conditions(&u, &fam),
            Err(Error::Contract(_))
        ));
        let r = marginal_condition_residuals(&u, &fam).unwrap();
        assert!(r.iter().any(|&e| e > 1e-3), "{r:?}");
    }

    #[test]
    fn one_step_shift_preserves_stationary_marginal() {
        let fam = random_family(&mut rng_from_seed(13), 3, 2, POSITIVE_FLOOR).unwrap();
        let chain = HigherOrderChain::new(fam.clone()).unwrap();
        let theta = stationary(&chain, &SolverConfig::default()).unwrap().theta;
        let d = chain_decompose(&theta, 3, 2).unwrap();
        let theta0 = d.levels[0].member(0).to_vec();
        let s1 =
            shift_matrix(&ShiftChain::from_families(vec![d.levels[1].clone()]).unwrap()).unwrap();
        let shifted = s1.matvec(&theta0).unwrap();
        let next = chain.transition_apply(&theta).unwrap();
        let top = marginalize_lowest(&next, 3, 2, 1).unwrap();
        assert!(top.l1_distance(&shifted) < 1e-11);
    }
}
