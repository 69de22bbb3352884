//! Higher-order chains over a finite alphabet.
//!
//! A history `(X_1, ..., X_k)` is stored as the base-`N` number with `X_1` the
//! most significant digit. One transition prepends the new symbol as the most
//! significant digit and drops the least significant one. Transition matrices
//! are column-stochastic: column `j` is the distribution of the successor of
//! state `j`, and a stationary vector solves `θ = Qθ`.
//!
//! Public indices and symbols in [`encode_state`], [`decode_state`] and
//! [`reachable_set`] are 1-based; everything else is 0-based.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dense::{check_dense_cap, DenseMatrix, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::recursive::check_irreducibility;
use crate::simplex::{l1_distance, state_count, ConditionalFamily, SimplexVector};
use crate::tensor_ops::StructuredOperator;

/// Largest dimension at which [`stationary`] also solves the linear system directly.
pub const DIRECT_CHECK_MAX_DIM: usize = 64;
/// Agreement required between the iterative and direct stationary vectors.
pub const DIRECT_CHECK_TOLERANCE: f64 = 1e-9;

/// 1-based index of the 1-based symbol tuple: `1 + Σ_j (X_j - 1) N^(k-j)`.
pub fn encode_state(alphabet: usize, order: usize, tuple: &[usize]) -> Result<usize> {
    state_count(alphabet, order)?;
    if tuple.len() != order {
        return Err(Error::contract(format!(
            "order-{order} state needs {order} symbols, got {}",
            tuple.len()
        )));
    }
    let mut index = 0usize;
    for (pos, &sym) in tuple.iter().enumerate() {
        if sym == 0 || sym > alphabet {
            return Err(Error::contract(format!(
                "symbol {sym} at position {} outside 1..={alphabet}",
                pos + 1
            )));
        }
        index = index * alphabet + (sym - 1);
    }
    Ok(index + 1)
}

/// Inverse of [`encode_state`].
pub fn decode_state(alphabet: usize, order: usize, index: usize) -> Result<Vec<usize>> {
    let count = state_count(alphabet, order)?;
    if index == 0 || index > count {
        return Err(Error::contract(format!(
            "state index {index} outside 1..={count}"
        )));
    }
    let mut rest = index - 1;
    let mut tuple = vec![0; order];
    for slot in tuple.iter_mut().rev() {
        *slot = rest % alphabet + 1;
        rest /= alphabet;
    }
    Ok(tuple)
}

/// 1-based indices of the `N` states reachable from state `j` in one step, ascending.
pub fn reachable_set(alphabet: usize, order: usize, j: usize) -> Result<Vec<usize>> {
    if order == 0 {
        return Err(Error::contract("reachable states need order >= 1"));
    }
    let count = state_count(alphabet, order)?;
    if j == 0 || j > count {
        return Err(Error::contract(format!(
            "state index {j} outside 1..={count}"
        )));
    }
    let stride = count / alphabet;
    Ok((0..alphabet)
        .map(|y| y * stride + (j - 1) / alphabet + 1)
        .collect())
}

/// A linear map on distributions over `dim()` states.
pub trait TransitionOperator {
    fn dim(&self) -> usize;

    /// Writes the image of `x` into `out`. Both slices have length `dim()`.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
}

impl TransitionOperator for DenseMatrix {
    fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Matrix-free order-`k` chain built from a conditional family.
#[derive(Debug, Clone)]
pub struct HigherOrderChain {
    family: Arc<ConditionalFamily>,
    /// `N^(k-1)`: the number of states sharing a most significant digit.
    stride: usize,
}

impl HigherOrderChain {
    pub fn new(family: impl Into<Arc<ConditionalFamily>>) -> Result<Self> {
        let family = family.into();
        if family.order() == 0 {
            return Err(Error::contract("a transition needs order >= 1"));
        }
        let stride = family.len() / family.alphabet();
        Ok(HigherOrderChain { family, stride })
    }

    pub fn family(&self) -> &ConditionalFamily {
        &self.family
    }

    pub fn alphabet(&self) -> usize {
        self.family.alphabet()
    }

    pub fn order(&self) -> usize {
        self.family.order()
    }

    pub fn state_count(&self) -> usize {
        self.family.len()
    }

    /// One step `θ ↦ Qθ` in `O(N^(k+1))` time without forming `Q`.
    pub fn transition_apply(&self, theta: &SimplexVector) -> Result<SimplexVector> {
        if theta.dim() != self.state_count() {
            return Err(Error::contract(format!(
                "distribution of dimension {} for a chain with {} states",
                theta.dim(),
                self.state_count()
            )));
        }
        let mut out = vec![0.0; theta.dim()];
        self.apply_into(theta, &mut out);
        Ok(SimplexVector::from_stochastic(out))
    }
}

impl TransitionOperator for HigherOrderChain {
    fn dim(&self) -> usize {
        self.state_count()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.family.alphabet();
        let probs = self.family.as_flat();
        // Successor y*stride + p collects the N predecessors p*N .. p*N + N - 1,
        // summed in a fixed order.
        for p in 0..self.stride {
            let block = &x[p * n..(p + 1) * n];
            let members = &probs[p * n * n..(p + 1) * n * n];
            for y in 0..n {
                let mut acc = 0.0;
                for (c, &mass) in block.iter().enumerate() {
                    acc += members[c * n + y] * mass;
                }
                out[y * self.stride + p] = acc;
            }
        }
    }
}

/// Dense order-`k` transition matrix: column `j` carries `q_j(y)` at the row of its `y`-th successor.
pub fn build_transition(family: &ConditionalFamily) -> Result<DenseMatrix> {
    build_transition_with_cap(family, DEFAULT_DENSE_CAP)
}

pub fn build_transition_with_cap(family: &ConditionalFamily, cap: usize) -> Result<DenseMatrix> {
    if family.order() == 0 {
        return Err(Error::contract("a transition needs order >= 1"));
    }
    let states = family.len();
    check_dense_cap("transition matrix", states, states, cap)?;
    let n = family.alphabet();
    let stride = states / n;
    let mut q = DenseMatrix::zeros(states, states);
    for (j, member) in family.members().enumerate() {
        for (y, &p) in member.iter().enumerate() {
            q.set(y * stride + j / n, j, p);
        }
    }
    Ok(q)
}

/// Iteration controls for [`stationary`] and the recursive fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Stop once the L1 residual is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step `γ` of the damped update `x ← (1-γ)x + γ·T(x)`.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-12,
            max_iterations: 1_000_000,
            damping: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::contract(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::contract("max_iterations must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::contract(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryResult {
    pub theta: SimplexVector,
    /// `‖θ - Qθ‖₁` of the returned vector.
    pub residual: f64,
    pub iterations: usize,
    /// L1 distance to the direct linear solve, when one was performed.
    pub direct_check: Option<f64>,
}

/// Stationary vector by damped power iteration from the uniform start.
///
/// For at most [`DIRECT_CHECK_MAX_DIM`] states the result is cross-checked against
/// a direct solve of `(Q - I)θ = 0, 1ᵀθ = 1` whenever `Q` is irreducible.
pub fn stationary<T: TransitionOperator + ?Sized>(
    op: &T,
    config: &SolverConfig,
) -> Result<StationaryResult> {
    config.validate()?;
    let dim = op.dim();
    if dim == 0 {
        return Err(Error::contract("empty state space"));
    }
    let gamma = config.damping;
    let mut theta = vec![1.0 / dim as f64; dim];
    let mut image = vec![0.0; dim];
    let mut iterations = 0;
    let residual = loop {
        op.apply_into(&theta, &mut image);
        let residual = l1_distance(&theta, &image);
        if residual <= config.tolerance {
            break residual;
        }
        if iterations == config.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual,
                last: theta,
            });
        }
        let mut sum = 0.0;
        for (t, q) in theta.iter_mut().zip(&image) {
            *t = (1.0 - gamma) * *t + gamma * q;
            sum += *t;
        }
        for t in theta.iter_mut() {
            *t /= sum;
        }
        iterations += 1;
    };

    let direct_check = if dim <= DIRECT_CHECK_MAX_DIM {
        direct_cross_check(op, &theta, config.tolerance)?
    } else {
        None
    };

    Ok(StationaryResult {
        theta: SimplexVector::from_stochastic(theta),
        residual,
        iterations,
        direct_check,
    })
}

fn dense_from_operator<T: TransitionOperator + ?Sized>(op: &T) -> DenseMatrix {
    let dim = op.dim();
    let mut q = DenseMatrix::zeros(dim, dim);
    let mut unit = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for j in 0..dim {
        unit[j] = 1.0;
        op.apply_into(&unit, &mut col);
        unit[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            q.set(i, j, *v);
        }
    }
    q
}

/// Solves `(Q - I)θ = 0` with the last equation replaced by `1ᵀθ = 1`.
pub fn direct_stationary(q: &DenseMatrix) -> Result<Vec<f64>> {
    if !q.is_square() {
        return Err(Error::contract("stationary solve needs a square matrix"));
    }
    let dim = q.rows();
    let mut a = DMatrix::<f64>::from_fn(dim, dim, |i, j| {
        q.get(i, j) - if i == j { 1.0 } else { 0.0 }
    });
    for j in 0..dim {
        a[(dim - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(dim);
    b[dim - 1] = 1.0;
    a.lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Domain("stationary system is singular".into()))
}

fn direct_cross_check<T: TransitionOperator + ?Sized>(
    op: &T,
    theta: &[f64],
    tolerance: f64,
) -> Result<Option<f64>> {
    let q = dense_from_operator(op);
    if !check_irreducibility(&q, 1e-12)? {
        return Ok(None);
    }
    let direct = direct_stationary(&q)?;
    let diff = l1_distance(theta, &direct);
    // A loose user tolerance leaves the iterate correspondingly far from the exact root.
    let allowed = DIRECT_CHECK_TOLERANCE.max(tolerance * 1e3);
    if diff > allowed {
        return Err(Error::CrossCheck {
            what: "iterative and direct stationary vectors".into(),
            difference: diff,
        });
    }
    Ok(Some(diff))
}

/// Chain-rule factors of a joint distribution over `k`-symbol states.
///
/// `levels[m]` is the order-`m` family of next-symbol conditionals given the first
/// `m` symbols, for `m = 0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDecomposition {
    pub alphabet: usize,
    pub order: usize,
    pub levels: Vec<ConditionalFamily>,
}

/// Factors `θ` into conditionals `P(X_{m+1} | X_1..X_m)`. Prefixes of zero mass get
/// the uniform conditional.
pub fn chain_decompose(
    theta: &SimplexVector,
    alphabet: usize,
    order: usize,
) -> Result<ChainDecomposition> {
    let states = state_count(alphabet, order)?;
    ConditionalFamily::member_count(alphabet, order)?;
    if theta.dim() != states {
        return Err(Error::contract(format!(
            "distribution of dimension {} is not over {alphabet}^{order} states",
            theta.dim()
        )));
    }
    let mut levels = Vec::with_capacity(order);
    let mut joint: Vec<f64> = theta.to_vec();
    for m in (0..order).rev() {
        let prefixes = joint.len() / alphabet;
        let mut marginal = Vec::with_capacity(prefixes);
        let mut probs = Vec::with_capacity(joint.len());
        for block in joint.chunks(alphabet) {
            let mass: f64 = block.iter().sum();
            marginal.push(mass);
            if mass > 0.0 {
                probs.extend(block.iter().map(|v| v / mass));
            } else {
                probs.extend(std::iter::repeat_n(1.0 / alphabet as f64, alphabet));
            }
        }
        levels.push(ConditionalFamily::from_flat_unchecked(alphabet, m, probs));
        joint = marginal;
    }
    levels.reverse();
    Ok(ChainDecomposition {
        alphabet,
        order,
        levels,
    })
}

/// Rebuilds the joint distribution by branching from the one-point distribution.
pub fn chain_compose(d: &ChainDecomposition) -> Result<SimplexVector> {
    if d.levels.len() != d.order {
        return Err(Error::contract(format!(
            "decomposition of order {} carries {} levels",
            d.order,
            d.levels.len()
        )));
    }
    let mut theta = SimplexVector::new(vec![1.0])?;
    for (m, level) in d.levels.iter().enumerate() {
        if level.order() != m || level.alphabet() != d.alphabet {
            return Err(Error::contract(format!(
                "level {m} has the wrong order or alphabet"
            )));
        }
        let op = StructuredOperator::branching(m, m, Arc::new(level.clone()))?;
        theta = op.apply(&theta)?;
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_family, random_simplex, rng_from_seed, POSITIVE_FLOOR};

    #[test]
    fn encode_examples() {
        assert_eq!(encode_state(2, 2, &[1, 1]).unwrap(), 1);
        assert_eq!(encode_state(2, 2, &[1, 2]).unwrap(), 2);
        assert_eq!(encode_state(2, 2, &[2, 2]).unwrap(), 4);
        assert!(encode_state(2, 2, &[3, 1]).is_err());
        assert!(encode_state(2, 2, &[0, 1]).is_err());
        assert!(encode_state(2, 2, &[1]).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_state(2, 2, 3).unwrap(), vec![2, 1]);
        assert_eq!(decode_state(2, 2, 1).unwrap(), vec![1, 1]);
        assert_eq!(decode_state(3, 1, 2).unwrap(), vec![2]);
        assert!(decode_state(2, 2, 0).is_err());
        assert!(decode_state(2, 2, 5).is_err());
    }

    #[test]
    fn reachable_examples() {
        assert_eq!(reachable_set(2, 2, 1).unwrap(), vec![1, 3]);
        assert_eq!(reachable_set(2, 2, 4).unwrap(), vec![2, 4]);
        assert_eq!(reachable_set(2, 1, 1).unwrap(), vec![1, 2]);
    }

    #[test]
    fn reachable_matches_symbol_shift() {
        // successor of (x1..xk) under new symbol y is (y, x1..x_{k-1})
        for (n, k) in [(2usize, 3usize), (3, 2), (4, 2)] {
            let count = n.pow(k as u32);
            for j in 1..=count {
                let tuple = decode_state(n, k, j).unwrap();
                let expected: Vec<usize> = (1..=n)
                    .map(|y| {
                        let mut next = vec![y];
                        next.extend_from_slice(&tuple[..k - 1]);
                        encode_state(n, k, &next).unwrap()
                    })
                    .collect();
                assert_eq!(reachable_set(n, k, j).unwrap(), expected);
            }
        }
    }

    #[test]
    fn order_one_transition_is_member_matrix() {
        let fam = ConditionalFamily::new(2, 1, vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let q = build_transition(&fam).unwrap();
        assert_eq!(q.to_rows(), vec![vec![0.3, 0.6], vec![0.7, 0.4]]);
    }

    #[test]
    fn transition_support_is_reachable_set() {
        let fam = random_family(&mut rng_from_seed(4), 2, 2, POSITIVE_FLOOR).unwrap();
        let q = build_transition(&fam).unwrap();
        for j in 0..4 {
            let reach = reachable_set(2, 2, j + 1).unwrap();
            for i in 0..4 {
                if reach.contains(&(i + 1)) {
                    assert!(q.get(i, j) > 0.0);
                } else {
                    assert_eq!(q.get(i, j), 0.0);
                }
            }
        }
        assert!(q.is_column_stochastic(1e-12));
    }

    #[test]
    fn uniform_family_transition() {
        let q = build_transition(&ConditionalFamily::uniform(2, 2).unwrap()).unwrap();
        for j in 0..4 {
            let reach = reachable_set(2, 2, j + 1).unwrap();
            for r in reach {
                assert_eq!(q.get(r - 1, j), 0.5);
            }
        }
    }

    #[test]
    fn deterministic_family_settles() {
        // q_j is a point mass on the top digit of j: the successor of (x1, x2) is (x1, x1)
        let members = (0..4)
            .map(|j| {
                if j < 2 {
                    vec![1.0, 0.0]
                } else {
                    vec![0.0, 1.0]
                }
            })
            .collect();
        let chain = HigherOrderChain::new(ConditionalFamily::new(2, 2, members).unwrap()).unwrap();
        let start = SimplexVector::uniform(4);
        let once = chain.transition_apply(&start).unwrap();
        let twice = chain.transition_apply(&once).unwrap();
        // states (1,1) and (2,2) absorb everything after one step
        assert_eq!(once.as_slice(), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(twice, once);
    }

    #[test]
    fn first_order_apply_is_matvec() {
        let fam = ConditionalFamily::new(2, 1, vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let chain = HigherOrderChain::new(fam).unwrap();
        let theta = SimplexVector::new(vec![0.25, 0.75]).unwrap();
        let out = chain.transition_apply(&theta).unwrap();
        assert!((out[0] - (0.25 * 0.3 + 0.75 * 0.6)).abs() < 1e-15);
        assert!((out[1] - (0.25 * 0.7 + 0.75 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn matrix_free_matches_dense_order_four() {
        let mut rng = rng_from_seed(100);
        for _ in 0..100 {
            let fam = random_family(&mut rng, 2, 4, 0.0).unwrap();
            let theta = random_simplex(&mut rng, 16, 0.0);
            let dense = build_transition(&fam).unwrap().matvec(&theta).unwrap();
            let chain = HigherOrderChain::new(fam).unwrap();
            let free = chain.transition_apply(&theta).unwrap();
            assert!(crate::simplex::max_abs_difference(&free, &dense) < 1e-12);
        }
    }

    #[test]
    fn transition_apply_dimension_mismatch() {
        let chain = HigherOrderChain::new(ConditionalFamily::uniform(2, 2).unwrap()).unwrap();
        assert!(chain.transition_apply(&SimplexVector::uniform(3)).is_err());
        assert!(HigherOrderChain::new(ConditionalFamily::uniform(2, 0).unwrap()).is_err());
    }

    #[test]
    fn stationary_two_state() {
        let q = DenseMatrix::from_rows(&[vec![0.9, 0.5], vec![0.1, 0.5]]).unwrap();
        let r = stationary(&q, &SolverConfig::default()).unwrap();
        assert!((r.theta[0] - 5.0 / 6.0).abs() < 1e-11);
        assert!((r.theta[1] - 1.0 / 6.0).abs() < 1e-11);
        assert!(r.residual <= 1e-12);
        assert!(r.direct_check.unwrap() < 1e-9);
    }

    #[test]
    fn stationary_identity_returns_uniform() {
        let r = stationary(&DenseMatrix::identity(3), &SolverConfig::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.theta.as_slice(), &[1.0 / 3.0; 3]);
        assert!(r.direct_check.is_none());
    }

    #[test]
    fn stationary_periodic_chain() {
        let q = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = stationary(&q, &SolverConfig::default()).unwrap();
        assert_eq!(r.theta.as_slice(), &[0.5, 0.5]);
        // Without damping a non-uniform start would oscillate; from uniform it is already fixed.
        let q3 = DenseMatrix::from_rows(&[
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let r = stationary(&q3, &SolverConfig::default()).unwrap();
        assert!(r.theta.l1_distance(&[1.0 / 3.0; 3]) < 1e-12);
    }

    #[test]
    fn stationary_reports_non_convergence() {
        let q = DenseMatrix::from_rows(&[vec![0.9, 0.5], vec![0.1, 0.5]]).unwrap();
        let cfg = SolverConfig {
            max_iterations: 3,
            ..SolverConfig::default()
        };
        match stationary(&q, &cfg).unwrap_err() {
            Error::NonConvergence {
                iterations,
                residual,
                last,
            } => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
                assert_eq!(last.len(), 2);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn solver_config_validation() {
        let bad = SolverConfig {
            damping: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            tolerance: -1.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn decompose_uniform_is_uniform() {
        let d = chain_decompose(&SimplexVector::uniform(27), 3, 3).unwrap();
        assert_eq!(d.levels.len(), 3);
        for (m, level) in d.levels.iter().enumerate() {
            assert_eq!(level.order(), m);
            assert!(level
                .as_flat()
                .iter()
                .all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        }
        let back = chain_compose(&d).unwrap();
        assert!(back.l1_distance(&[1.0 / 27.0; 27]) < 1e-14);
    }

    #[test]
    fn decompose_point_mass() {
        let d = chain_decompose(&SimplexVector::point_mass(8, 0), 2, 3).unwrap();
        // on-support prefixes are all-ones histories: state 0 at each level
        for level in &d.levels {
            assert_eq!(level.member(0), &[1.0, 0.0]);
            for i in 1..level.len() {
                assert_eq!(level.member(i), &[0.5, 0.5]);
            }
        }
        assert_eq!(chain_compose(&d).unwrap(), SimplexVector::point_mass(8, 0));
    }

    #[test]
    fn compose_single_level() {
        let d = ChainDecomposition {
            alphabet: 2,
            order: 1,
            levels: vec![ConditionalFamily::new(2, 0, vec![vec![0.3, 0.7]]).unwrap()],
        };
        assert_eq!(chain_compose(&d).unwrap().as_slice(), &[0.3, 0.7]);
    }

    #[test]
    fn decompose_rejects_wrong_dimension() {
        assert!(chain_decompose(&SimplexVector::uniform(5), 2, 2).is_err());
    }

    #[test]
    fn decompose_roundtrip_random() {
        let mut rng = rng_from_seed(8);
        for _ in 0..100 {
            let theta = random_simplex(&mut rng, 8, 0.0);
            let d = chain_decompose(&theta, 2, 3).unwrap();
            let back = chain_compose(&d).unwrap();
            assert!(crate::simplex::max_abs_difference(&back, &theta) < 1e-12);
        }
    }
}
