//! Commutation, marginalization, branching and cycling operators.
//!
//! States of a `k`-symbol history are encoded base `N` with the first symbol most
//! significant, so a vector over `N^k` states is a Kronecker product of `k`
//! factors of size `N`, the first factor outermost.
//!
//! Every operator can be applied matrix-free ([`StructuredOperator::apply`]) or
//! materialized densely ([`materialize`]). The dense route is assembled from the
//! Kronecker-sum definitions and never shares index arithmetic with the
//! matrix-free route, so the two check each other.

use std::sync::Arc;

use serde::Serialize;

use crate::dense::{check_dense_cap, DenseMatrix, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::sampling;
use crate::simplex::{checked_pow, ConditionalFamily, SimplexVector};

/// A structured stochastic operator, applied matrix-free or materialized.
#[derive(Debug, Clone)]
pub enum StructuredOperator {
    /// `E_{N^m} ⊗ 1_N^T ⊗ E_{N^{k-m}}`: sums out the symbol at 0-based position `position`
    /// of a `(order + 1)`-symbol state.
    Marginalization {
        alphabet: usize,
        order: usize,
        position: usize,
    },
    /// Inserts a new symbol after the first `position` symbols of an `order`-symbol
    /// state, distributed as the family member indexed by that state.
    Branching {
        order: usize,
        position: usize,
        family: Arc<ConditionalFamily>,
    },
    /// `C_{N^shift, N^{order-shift}}`: moves the last `shift` symbols to the front.
    Cycling {
        alphabet: usize,
        order: usize,
        shift: usize,
    },
    /// `C_{low, high}`: maps `u ⊗ v` to `v ⊗ u` for `u` of size `high`, `v` of size `low`.
    Commutation { low: usize, high: usize },
    /// Matrix product in list order: `[A, B]` is `A·B`, so `B` acts first.
    Composition(Vec<StructuredOperator>),
}

impl StructuredOperator {
    pub fn marginalization(alphabet: usize, order: usize, position: usize) -> Result<Self> {
        let op = StructuredOperator::Marginalization {
            alphabet,
            order,
            position,
        };
        op.validate()?;
        Ok(op)
    }

    pub fn branching(
        order: usize,
        position: usize,
        family: Arc<ConditionalFamily>,
    ) -> Result<Self> {
        let op = StructuredOperator::Branching {
            order,
            position,
            family,
        };
        op.validate()?;
        Ok(op)
    }

    /// Cycling operator with the shift reduced modulo `order` (zero for `order == 0`).
    pub fn cycling(alphabet: usize, order: usize, shift: i64) -> Result<Self> {
        let shift = if order == 0 {
            0
        } else {
            shift.rem_euclid(order as i64) as usize
        };
        let op = StructuredOperator::Cycling {
            alphabet,
            order,
            shift,
        };
        op.validate()?;
        Ok(op)
    }

    pub fn commutation(low: usize, high: usize) -> Result<Self> {
        let op = StructuredOperator::Commutation { low, high };
        op.validate()?;
        Ok(op)
    }

    pub fn compose(ops: Vec<StructuredOperator>) -> Result<Self> {
        let op = StructuredOperator::Composition(ops);
        op.validate()?;
        Ok(op)
    }

    /// Checks index ranges and, for compositions, that adjacent dimensions match.
    pub fn validate(&self) -> Result<()> {
        match self {
            StructuredOperator::Marginalization {
                alphabet,
                order,
                position,
            } => {
                check_alphabet(*alphabet)?;
                if position > order {
                    return Err(Error::contract(format!(
                        "marginalization position {position} exceeds order {order}"
                    )));
                }
                dim_of(*alphabet, order + 1).map(|_| ())
            }
            StructuredOperator::Branching {
                order,
                position,
                family,
            } => {
                if position > order {
                    return Err(Error::contract(format!(
                        "branching position {position} exceeds order {order}"
                    )));
                }
                if family.order() != *order {
                    return Err(Error::contract(format!(
                        "order-{order} branching needs an order-{order} family, got order {}",
                        family.order()
                    )));
                }
                dim_of(family.alphabet(), order + 1).map(|_| ())
            }
            StructuredOperator::Cycling {
                alphabet,
                order,
                shift,
            } => {
                check_alphabet(*alphabet)?;
                if (*order == 0 && *shift != 0) || (*order > 0 && shift >= order) {
                    return Err(Error::contract(format!(
                        "cycling shift {shift} not reduced modulo order {order}"
                    )));
                }
                dim_of(*alphabet, *order).map(|_| ())
            }
            StructuredOperator::Commutation { low, high } => {
                if *low == 0 || *high == 0 {
                    return Err(Error::contract("commutation factors must be positive"));
                }
                low.checked_mul(*high).map(|_| ()).ok_or_else(|| {
                    Error::capacity("commutation dimension", u128::MAX, usize::MAX as u128)
                })
            }
            StructuredOperator::Composition(ops) => {
                if ops.is_empty() {
                    return Err(Error::contract("empty composition"));
                }
                for op in ops {
                    op.validate()?;
                }
                for (i, pair) in ops.windows(2).enumerate() {
                    let (left, right) = (&pair[0], &pair[1]);
                    if left.input_dim() != right.output_dim() {
                        return Err(Error::contract(format!(
                            "composition factors {i} and {} do not chain: input {} vs output {}",
                            i + 1,
                            left.input_dim(),
                            right.output_dim()
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            StructuredOperator::Marginalization {
                alphabet, order, ..
            } => pow(*alphabet, order + 1),
            StructuredOperator::Branching { order, family, .. } => pow(family.alphabet(), *order),
            StructuredOperator::Cycling {
                alphabet, order, ..
            } => pow(*alphabet, *order),
            StructuredOperator::Commutation { low, high } => low * high,
            StructuredOperator::Composition(ops) => ops.last().map_or(0, Self::input_dim),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            StructuredOperator::Marginalization {
                alphabet, order, ..
            } => pow(*alphabet, *order),
            StructuredOperator::Branching { order, family, .. } => {
                pow(family.alphabet(), order + 1)
            }
            StructuredOperator::Cycling {
                alphabet, order, ..
            } => pow(*alphabet, *order),
            StructuredOperator::Commutation { low, high } => low * high,
            StructuredOperator::Composition(ops) => ops.first().map_or(0, Self::output_dim),
        }
    }

    /// Applies the operator to a probability vector. The output is again a probability vector.
    pub fn apply(&self, x: &SimplexVector) -> Result<SimplexVector> {
        self.apply_linear(x).map(SimplexVector::from_stochastic)
    }

    /// Matrix-free application to an arbitrary real vector.
    pub fn apply_linear(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if x.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "operator expects input of dimension {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            StructuredOperator::Marginalization {
                alphabet,
                order,
                position,
            } => {
                let n = *alphabet;
                let low = pow(n, order - position);
                let high = pow(n, *position);
                let mut out = vec![0.0; high * low];
                for a in 0..high {
                    for y in 0..n {
                        let src = &x[(a * n + y) * low..(a * n + y + 1) * low];
                        for (o, v) in out[a * low..(a + 1) * low].iter_mut().zip(src) {
                            *o += v;
                        }
                    }
                }
                out
            }
            StructuredOperator::Branching {
                order,
                position,
                family,
            } => {
                let n = family.alphabet();
                let low = pow(n, order - position);
                let high = pow(n, *position);
                let mut out = vec![0.0; high * n * low];
                for a in 0..high {
                    for b in 0..low {
                        let state = a * low + b;
                        let mass = x[state];
                        for (y, p) in family.member(state).iter().enumerate() {
                            out[(a * n + y) * low + b] = p * mass;
                        }
                    }
                }
                out
            }
            StructuredOperator::Cycling {
                alphabet,
                order,
                shift,
            } => swap_blocks(x, pow(*alphabet, *shift), pow(*alphabet, order - shift)),
            StructuredOperator::Commutation { low, high } => swap_blocks(x, *low, *high),
            StructuredOperator::Composition(ops) => {
                let mut cur = x.to_vec();
                for op in ops.iter().rev() {
                    cur = op.apply_unchecked(&cur);
                }
                cur
            }
        }
    }
}

/// `x` indexed as `i * low + r` (`i < high`, `r < low`) is sent to index `r * high + i`.
fn swap_blocks(x: &[f64], low: usize, high: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 0..high {
        for r in 0..low {
            out[r * high + i] = x[i * low + r];
        }
    }
    out
}

/// Where state `index` of an `order`-symbol history lands under `Cycling { shift }`.
pub fn cycled_index(alphabet: usize, order: usize, shift: usize, index: usize) -> usize {
    let low = pow(alphabet, shift);
    let high = pow(alphabet, order - shift);
    let (i, r) = (index / low, index % low);
    r * high + i
}

fn check_alphabet(alphabet: usize) -> Result<()> {
    if alphabet < 2 {
        return Err(Error::contract(format!(
            "alphabet size must be >= 2, got {alphabet}"
        )));
    }
    Ok(())
}

fn dim_of(alphabet: usize, order: usize) -> Result<usize> {
    checked_pow(alphabet, order).ok_or_else(|| {
        Error::capacity(
            format!("dimension {alphabet}^{order}"),
            u128::MAX,
            usize::MAX as u128,
        )
    })
}

fn pow(base: usize, exp: usize) -> usize {
    checked_pow(base, exp).expect("dimension validated before use")
}

// Sparse Kronecker factors. Only the dense materialization uses these.

#[derive(Debug, Clone)]
struct Coo {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Coo {
    /// `E_n`
    fn identity(n: usize) -> Self {
        Coo {
            rows: n,
            cols: n,
            entries: (0..n).map(|i| (i, i, 1.0)).collect(),
        }
    }

    /// `E_{n,i} = e_{n,i} e_{n,i}^T`
    fn unit_diag(n: usize, i: usize) -> Self {
        Coo {
            rows: n,
            cols: n,
            entries: vec![(i, i, 1.0)],
        }
    }

    /// `e_{n,i}`
    fn unit_col(n: usize, i: usize) -> Self {
        Coo {
            rows: n,
            cols: 1,
            entries: vec![(i, 0, 1.0)],
        }
    }

    /// `e_{n,i}^T`
    fn unit_row(n: usize, i: usize) -> Self {
        Coo {
            rows: 1,
            cols: n,
            entries: vec![(0, i, 1.0)],
        }
    }

    /// `1_n^T`
    fn ones_row(n: usize) -> Self {
        Coo {
            rows: 1,
            cols: n,
            entries: (0..n).map(|i| (0, i, 1.0)).collect(),
        }
    }

    fn column(v: &[f64]) -> Self {
        Coo {
            rows: v.len(),
            cols: 1,
            entries: v
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(i, &p)| (i, 0, p))
                .collect(),
        }
    }

    fn kron(&self, rhs: &Coo) -> Coo {
        let mut entries = Vec::with_capacity(self.entries.len() * rhs.entries.len());
        for &(ra, ca, va) in &self.entries {
            for &(rb, cb, vb) in &rhs.entries {
                entries.push((ra * rhs.rows + rb, ca * rhs.cols + cb, va * vb));
            }
        }
        Coo {
            rows: self.rows * rhs.rows,
            cols: self.cols * rhs.cols,
            entries,
        }
    }

    fn kron3(a: &Coo, b: &Coo, c: &Coo) -> Coo {
        a.kron(b).kron(c)
    }

    fn add_into(&self, target: &mut DenseMatrix) {
        debug_assert_eq!((self.rows, self.cols), (target.rows(), target.cols()));
        for &(r, c, v) in &self.entries {
            target.add_at(r, c, v);
        }
    }
}

/// The commutation matrix `C_{n,m} = Σ_i e_{m,i}^T ⊗ E_n ⊗ e_{m,i}` of size `nm × mn`.
pub fn commutation_matrix(n: usize, m: usize) -> Result<DenseMatrix> {
    commutation_matrix_with_cap(n, m, DEFAULT_DENSE_CAP)
}

pub fn commutation_matrix_with_cap(n: usize, m: usize, cap: usize) -> Result<DenseMatrix> {
    if n == 0 || m == 0 {
        return Err(Error::contract("commutation factors must be positive"));
    }
    let dim = n
        .checked_mul(m)
        .ok_or_else(|| Error::capacity("commutation dimension", u128::MAX, cap as u128))?;
    check_dense_cap("commutation matrix", dim, dim, cap)?;
    let mut out = DenseMatrix::zeros(dim, dim);
    let e_n = Coo::identity(n);
    for i in 0..m {
        Coo::kron3(&Coo::unit_row(m, i), &e_n, &Coo::unit_col(m, i)).add_into(&mut out);
    }
    Ok(out)
}

/// Dense form of `op` built from the Kronecker-sum definitions, default size cap.
pub fn materialize(op: &StructuredOperator) -> Result<DenseMatrix> {
    materialize_with_cap(op, DEFAULT_DENSE_CAP)
}

pub fn materialize_with_cap(op: &StructuredOperator, cap: usize) -> Result<DenseMatrix> {
    op.validate()?;
    match op {
        StructuredOperator::Marginalization {
            alphabet,
            order,
            position,
        } => {
            let n = *alphabet;
            let (rows, cols) = (op.output_dim(), op.input_dim());
            check_dense_cap("marginalization matrix", rows, cols, cap)?;
            let mut out = DenseMatrix::zeros(rows, cols);
            Coo::kron3(
                &Coo::identity(pow(n, *position)),
                &Coo::ones_row(n),
                &Coo::identity(pow(n, order - position)),
            )
            .add_into(&mut out);
            Ok(out)
        }
        StructuredOperator::Branching {
            order,
            position,
            family,
        } => {
            let n = family.alphabet();
            let (rows, cols) = (op.output_dim(), op.input_dim());
            check_dense_cap("branching matrix", rows, cols, cap)?;
            let high = pow(n, *position);
            let low = pow(n, order - position);
            let mut out = DenseMatrix::zeros(rows, cols);
            for i in 0..high {
                for j in 0..low {
                    Coo::kron3(
                        &Coo::unit_diag(high, i),
                        &Coo::column(family.member(low * i + j)),
                        &Coo::unit_diag(low, j),
                    )
                    .add_into(&mut out);
                }
            }
            Ok(out)
        }
        StructuredOperator::Cycling {
            alphabet,
            order,
            shift,
        } => {
            commutation_matrix_with_cap(pow(*alphabet, *shift), pow(*alphabet, order - shift), cap)
        }
        StructuredOperator::Commutation { low, high } => {
            commutation_matrix_with_cap(*low, *high, cap)
        }
        StructuredOperator::Composition(ops) => {
            let mut acc: Option<DenseMatrix> = None;
            for factor in ops {
                let m = materialize_with_cap(factor, cap)?;
                acc = Some(match acc {
                    None => m,
                    Some(left) => {
                        check_dense_cap("composition product", left.rows(), m.cols(), cap)?;
                        left.matmul(&m)?
                    }
                });
            }
            acc.ok_or_else(|| Error::contract("empty composition"))
        }
    }
}

/// Largest elementwise error of each operator identity over all admissible index pairs.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub alphabet: usize,
    pub order: usize,
    pub seed: u64,
    /// `M^(k)_m = C^(k)_{m-n} M^(k)_n C^(k+1)_{n-m}`
    pub marginal_rotation: f64,
    /// `M^(k)_n M^(k+1)_m = M^(k)_m M^(k+1)_{n+1}` for `n >= m`
    pub marginal_exchange_upper: f64,
    /// `M^(k)_n M^(k+1)_m = M^(k)_{m-1} M^(k+1)_n` for `n < m`
    pub marginal_exchange_lower: f64,
    /// `B^(k)_m(Q) = C^(k+1)_{m-n} B^(k)_n(Q) C^(k)_{n-m}` with the same family on both sides.
    pub branching_rotation: f64,
    /// The branching identity with the right-hand family reindexed by the input rotation.
    pub branching_rotation_reindexed: f64,
    /// `C^(k)_{mod_k(nm)} = (C^(k)_n)^m`
    pub cycling_power: f64,
}

impl IdentityReport {
    /// Named errors of the four stated identities (reindexed branching variant excluded).
    pub fn stated(&self) -> [(&'static str, f64); 5] {
        [
            ("marginal_rotation", self.marginal_rotation),
            ("marginal_exchange_upper", self.marginal_exchange_upper),
            ("marginal_exchange_lower", self.marginal_exchange_lower),
            ("branching_rotation", self.branching_rotation),
            ("cycling_power", self.cycling_power),
        ]
    }

    pub fn max_stated_error(&self) -> f64 {
        self.stated().iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }
}

/// Evaluates the operator identities on dense forms for a random strictly positive
/// order-`order` family drawn from `seed`.
pub fn check_identities(alphabet: usize, order: usize, seed: u64) -> Result<IdentityReport> {
    check_alphabet(alphabet)?;
    let widest = dim_of(alphabet, order + 2)?;
    check_dense_cap(
        "identity operands",
        widest,
        widest / alphabet,
        DEFAULT_DENSE_CAP,
    )?;

    let mut rng = sampling::rng_from_seed(seed);
    let family = Arc::new(sampling::random_family(
        &mut rng,
        alphabet,
        order,
        sampling::POSITIVE_FLOOR,
    )?);
    let n = alphabet;
    let k = order;
    let dense = |ops: Vec<StructuredOperator>| -> Result<DenseMatrix> {
        materialize(&StructuredOperator::compose(ops)?)
    };
    let marg = |ord: usize, pos: usize| StructuredOperator::marginalization(n, ord, pos);
    let cyc = |ord: usize, shift: i64| StructuredOperator::cycling(n, ord, shift);

    let mut report = IdentityReport {
        alphabet,
        order,
        seed,
        marginal_rotation: 0.0,
        marginal_exchange_upper: 0.0,
        marginal_exchange_lower: 0.0,
        branching_rotation: 0.0,
        branching_rotation_reindexed: 0.0,
        cycling_power: 0.0,
    };

    for m in 0..=k {
        for nn in 0..=k {
            let (mi, ni) = (m as i64, nn as i64);

            let lhs = materialize(&marg(k, m)?)?;
            let rhs = dense(vec![cyc(k, mi - ni)?, marg(k, nn)?, cyc(k + 1, ni - mi)?])?;
            report.marginal_rotation = report.marginal_rotation.max(lhs.max_abs_difference(&rhs));

            let lhs = dense(vec![marg(k, nn)?, marg(k + 1, m)?])?;
            if nn >= m {
                let rhs = dense(vec![marg(k, m)?, marg(k + 1, nn + 1)?])?;
                report.marginal_exchange_upper = report
                    .marginal_exchange_upper
                    .max(lhs.max_abs_difference(&rhs));
            } else {
                let rhs = dense(vec![marg(k, m - 1)?, marg(k + 1, nn)?])?;
                report.marginal_exchange_lower = report
                    .marginal_exchange_lower
                    .max(lhs.max_abs_difference(&rhs));
            }

            let lhs = materialize(&StructuredOperator::branching(k, m, family.clone())?)?;
            let input_rotation = cyc(k, ni - mi)?;
            let rhs = dense(vec![
                cyc(k + 1, mi - ni)?,
                StructuredOperator::branching(k, nn, family.clone())?,
                input_rotation.clone(),
            ])?;
            report.branching_rotation = report.branching_rotation.max(lhs.max_abs_difference(&rhs));

            let shift = match input_rotation {
                StructuredOperator::Cycling { shift, .. } => shift,
                _ => unreachable!(),
            };
            let reindexed = Arc::new(reindex_family(&family, shift));
            let rhs = dense(vec![
                cyc(k + 1, mi - ni)?,
                StructuredOperator::branching(k, nn, reindexed)?,
                input_rotation,
            ])?;
            report.branching_rotation_reindexed = report
                .branching_rotation_reindexed
                .max(lhs.max_abs_difference(&rhs));
        }
    }

    let kk = k as i64;
    for nn in -kk..=kk {
        let base = materialize(&cyc(k, nn)?)?;
        for m in 0..=2 * kk {
            let lhs = materialize(&cyc(k, nn * m)?)?;
            let rhs = base.pow(m as usize)?;
            report.cycling_power = report.cycling_power.max(lhs.max_abs_difference(&rhs));
        }
    }

    Ok(report)
}

/// Transition matrix assembled as `C_{N,N^{k-1}} Σ_i E_{N^{k-1},i} ⊗ Q_i`, where block
/// `Q_i` holds members `N·i .. N·i + N - 1` as columns.
pub fn transition_from_blocks(family: &ConditionalFamily) -> Result<DenseMatrix> {
    let k = family.order();
    if k == 0 {
        return Err(Error::contract("a transition needs order >= 1"));
    }
    let n = family.alphabet();
    let states = family.len();
    check_dense_cap("transition matrix", states, states, DEFAULT_DENSE_CAP)?;
    let blocks = states / n;
    let mut block_diag = DenseMatrix::zeros(states, states);
    for i in 0..blocks {
        let mut q_i = Coo {
            rows: n,
            cols: n,
            entries: Vec::with_capacity(n * n),
        };
        for c in 0..n {
            for (r, &p) in family.member(n * i + c).iter().enumerate() {
                q_i.entries.push((r, c, p));
            }
        }
        Coo::unit_diag(blocks, i)
            .kron(&q_i)
            .add_into(&mut block_diag);
    }
    commutation_matrix(n, blocks)?.matmul(&block_diag)
}

/// The two shift-operator factorizations of the order-`k` transition:
/// `M^(k)_k C^(k+1)_1 B^(k)_k(Q)` and `C^(k)_1 M^(k)_{k-1} B^(k)_k(Q)`.
pub fn transition_factorizations(
    family: Arc<ConditionalFamily>,
) -> Result<(StructuredOperator, StructuredOperator)> {
    let k = family.order();
    if k == 0 {
        return Err(Error::contract("a transition needs order >= 1"));
    }
    let n = family.alphabet();
    let branch = StructuredOperator::branching(k, k, family)?;
    let first = StructuredOperator::compose(vec![
        StructuredOperator::marginalization(n, k, k)?,
        StructuredOperator::cycling(n, k + 1, 1)?,
        branch.clone(),
    ])?;
    let second = StructuredOperator::compose(vec![
        StructuredOperator::cycling(n, k, 1)?,
        StructuredOperator::marginalization(n, k, k - 1)?,
        branch,
    ])?;
    Ok((first, second))
}

/// Moves member `s` to the slot `s` occupies after cycling by `shift`.
fn reindex_family(family: &ConditionalFamily, shift: usize) -> ConditionalFamily {
    let n = family.alphabet();
    let k = family.order();
    let mut probs = vec![0.0; family.as_flat().len()];
    for s in 0..family.len() {
        let t = cycled_index(n, k, shift, s);
        probs[t * n..(t + 1) * n].copy_from_slice(family.member(s));
    }
    ConditionalFamily::from_flat_unchecked(n, k, probs)
}
