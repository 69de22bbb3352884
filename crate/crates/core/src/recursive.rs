//! Recursive chains: the order-`(m+1)` conditionals are a fixed map `f` of the
//! order-`m` ones, so `f: Δ_N → column-stochastic N×N` generates every finite
//! truncation. Their one-symbol stationary marginals are tied to the fixed point
//! `ω = f(ω)ω`.

use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::bandit::{bandit_matrix, BanditParams};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::markov::{stationary, HigherOrderChain, SolverConfig};
use crate::sampling::{random_simplex, rng_from_seed};
use crate::shift::marginalize_lowest;
use crate::simplex::{l1_distance, ConditionalFamily, SimplexVector};

/// Column-sum tolerance applied to every matrix a recursive map returns.
pub const MAP_STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// A pure map from a distribution over `N` symbols to an `N×N` column-stochastic matrix.
pub trait RecursiveMap: Send + Sync {
    fn alphabet(&self) -> usize;

    fn map(&self, omega: &SimplexVector) -> Result<DenseMatrix>;
}

/// The built-in recursive maps.
#[derive(Debug, Clone, PartialEq)]
pub enum RecursiveSpec {
    /// `f(ω) = R`
    Constant(DenseMatrix),
    /// `f(ω) = (1-ε)·[ω ω ⋯ ω] + ε·R`
    Mixture { epsilon: f64, base: DenseMatrix },
    /// The two-armed bandit confidence update over outcomes
    /// (arm 0 win, arm 0 loss, arm 1 win, arm 1 loss).
    Bandit(BanditParams),
}

impl RecursiveSpec {
    pub fn constant(r: DenseMatrix) -> Result<Self> {
        check_stochastic_square(&r, "constant map")?;
        Self::validated(RecursiveSpec::Constant(r))
    }

    pub fn mixture(epsilon: f64, r: DenseMatrix) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::contract(format!(
                "mixture weight must lie in [0, 1], got {epsilon}"
            )));
        }
        check_stochastic_square(&r, "mixture base")?;
        Self::validated(RecursiveSpec::Mixture { epsilon, base: r })
    }

    pub fn bandit(params: BanditParams) -> Result<Self> {
        Self::validated(RecursiveSpec::Bandit(params))
    }

    /// Evaluates the map on the uniform point, the vertices, and a few seeded interior
    /// points, rejecting any non-stochastic output.
    fn validated(spec: Self) -> Result<Self> {
        let n = spec.alphabet();
        let mut probes = vec![SimplexVector::uniform(n)];
        probes.extend((0..n).map(|i| SimplexVector::point_mass(n, i)));
        let mut rng = rng_from_seed(0x5eed);
        probes.extend((0..8).map(|_| random_simplex(&mut rng, n, 0.0)));
        for p in &probes {
            spec.map(p)?;
        }
        Ok(spec)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RecursiveSpec::Constant(_) => "constant",
            RecursiveSpec::Mixture { .. } => "mixture",
            RecursiveSpec::Bandit(_) => "bandit",
        }
    }
}

fn check_stochastic_square(r: &DenseMatrix, what: &str) -> Result<()> {
    if !r.is_square() {
        return Err(Error::contract(format!("{what} must be square")));
    }
    if r.rows() < 2 {
        return Err(Error::contract(format!("{what} needs at least 2 symbols")));
    }
    if !r.is_column_stochastic(MAP_STOCHASTIC_TOLERANCE) {
        return Err(Error::contract(format!("{what} is not column-stochastic")));
    }
    Ok(())
}

impl RecursiveMap for RecursiveSpec {
    fn alphabet(&self) -> usize {
        match self {
            RecursiveSpec::Constant(r) => r.rows(),
            RecursiveSpec::Mixture { base, .. } => base.rows(),
            RecursiveSpec::Bandit(_) => 4,
        }
    }

    fn map(&self, omega: &SimplexVector) -> Result<DenseMatrix> {
        let n = self.alphabet();
        if omega.dim() != n {
            return Err(Error::contract(format!(
                "map over {n} symbols applied to a vector of dimension {}",
                omega.dim()
            )));
        }
        let out = match self {
            RecursiveSpec::Constant(r) => r.clone(),
            RecursiveSpec::Mixture { epsilon, base } => {
                let mut m = DenseMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        m.set(i, j, (1.0 - epsilon) * omega[i] + epsilon * base.get(i, j));
                    }
                }
                m
            }
            RecursiveSpec::Bandit(params) => bandit_matrix(params, omega)?,
        };
        if !out.is_column_stochastic(MAP_STOCHASTIC_TOLERANCE) {
            return Err(Error::contract(
                "recursive map produced a non-stochastic matrix",
            ));
        }
        Ok(out)
    }
}

/// Order-1 family made of the columns of `f(uniform)`.
pub fn default_base<M: RecursiveMap + ?Sized>(spec: &M) -> Result<ConditionalFamily> {
    let n = spec.alphabet();
    let f = spec.map(&SimplexVector::uniform(n))?;
    ConditionalFamily::new(n, 1, (0..n).map(|j| f.column(j)).collect())
}

/// Raises the order by one: the columns of `f(q_i)` become members `N·i .. N·i + N - 1`.
pub fn grow_truncation<M: RecursiveMap + ?Sized>(
    spec: &M,
    family: &ConditionalFamily,
) -> Result<ConditionalFamily> {
    let n = spec.alphabet();
    if family.alphabet() != n {
        return Err(Error::contract(format!(
            "family over {} symbols for a map over {n}",
            family.alphabet()
        )));
    }
    let order = family.order() + 1;
    let count = ConditionalFamily::member_count(n, order)?;
    let mut probs = Vec::with_capacity(count * n);
    for member in family.members() {
        let f = spec.map(&SimplexVector::from_stochastic(member.to_vec()))?;
        for j in 0..n {
            probs.extend(f.column(j));
        }
    }
    Ok(ConditionalFamily::from_flat_unchecked(n, order, probs))
}

/// Order-`k` truncation grown from `base` (default: [`default_base`]).
pub fn build_truncation<M: RecursiveMap + ?Sized>(
    spec: &M,
    base: Option<&ConditionalFamily>,
    k: usize,
) -> Result<ConditionalFamily> {
    let n = spec.alphabet();
    if k == 0 {
        return Err(Error::contract("truncation order must be >= 1"));
    }
    ConditionalFamily::member_count(n, k)?;
    let mut family = match base {
        Some(b) => {
            if b.order() != 1 || b.alphabet() != n {
                return Err(Error::contract(format!(
                    "base must be an order-1 family over {n} symbols"
                )));
            }
            b.clone()
        }
        None => default_base(spec)?,
    };
    for _ in 1..k {
        family = grow_truncation(spec, &family)?;
    }
    Ok(family)
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointResult {
    pub omega: SimplexVector,
    pub iterations: usize,
    /// `‖ω - f(ω)ω‖₁`
    pub residual: f64,
}

/// Budget for [`fixed_point`] when the caller has no preference.
pub fn default_fixed_point_config() -> SolverConfig {
    SolverConfig {
        max_iterations: 100_000,
        ..SolverConfig::default()
    }
}

/// Solves `ω = f(ω)ω` by `ω ← (1-γ)ω + γ·f(ω)ω`, renormalized onto the simplex each step.
pub fn fixed_point<M: RecursiveMap + ?Sized>(
    spec: &M,
    config: &SolverConfig,
    start: &SimplexVector,
) -> Result<FixedPointResult> {
    config.validate()?;
    let n = spec.alphabet();
    if start.dim() != n {
        return Err(Error::contract(format!(
            "start of dimension {} for a map over {n} symbols",
            start.dim()
        )));
    }
    let gamma = config.damping;
    let mut omega = start.clone();
    let mut iterations = 0;
    loop {
        let image = spec.map(&omega)?.matvec(&omega)?;
        let residual = omega.l1_distance(&image);
        if residual <= config.tolerance {
            return Ok(FixedPointResult {
                omega,
                iterations,
                residual,
            });
        }
        if iterations == config.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual,
                last: omega.into_vec(),
            });
        }
        let next: Vec<f64> = omega
            .iter()
            .zip(&image)
            .map(|(w, v)| ((1.0 - gamma) * w + gamma * v).max(0.0))
            .collect();
        omega = SimplexVector::normalized(next)?;
        iterations += 1;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationStep {
    pub order: usize,
    /// `‖ω^(k)_1 - ω*‖₁`: one-symbol stationary marginal of the order-`k` truncation
    /// against the fixed point.
    pub distance: f64,
    /// `‖θ^(k) - M^(k)_k θ^(k+1)‖₁`
    pub hypothesis_residual: f64,
    pub marginal: SimplexVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub fixed_point: FixedPointResult,
    pub steps: Vec<TruncationStep>,
}

/// Measures, for `k = 1..=k_max`, how far the truncations' one-symbol stationary
/// marginals are from the fixed point and how well consecutive stationary vectors
/// nest. Solves up to order `k_max + 1`.
pub fn truncation_convergence<M: RecursiveMap + ?Sized>(
    spec: &M,
    base: Option<&ConditionalFamily>,
    k_max: usize,
    config: &SolverConfig,
) -> Result<TruncationReport> {
    if k_max == 0 {
        return Err(Error::contract("k_max must be >= 1"));
    }
    let n = spec.alphabet();
    ConditionalFamily::member_count(n, k_max + 1)?;
    let fixed = fixed_point(spec, config, &SimplexVector::uniform(n))?;

    let mut family = build_truncation(spec, base, 1)?;
    let mut thetas = Vec::with_capacity(k_max + 1);
    for k in 1..=k_max + 1 {
        if k > 1 {
            family = grow_truncation(spec, &family)?;
        }
        let chain = HigherOrderChain::new(family.clone())?;
        thetas.push(stationary(&chain, config)?.theta);
    }

    let mut steps = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let theta = &thetas[k - 1];
        let marginal = marginalize_lowest(theta, n, k, 1)?;
        let nested = marginalize_lowest(&thetas[k], n, k + 1, k)?;
        steps.push(TruncationStep {
            order: k,
            distance: marginal.l1_distance(&fixed.omega),
            hypothesis_residual: l1_distance(theta, &nested),
            marginal,
        });
    }
    Ok(TruncationReport {
        fixed_point: fixed,
        steps,
    })
}

/// Whether the directed graph with an edge `j → i` for every entry `q[i][j] > threshold`
/// is strongly connected.
pub fn check_irreducibility(q: &DenseMatrix, threshold: f64) -> Result<bool> {
    if !q.is_square() {
        return Err(Error::contract(format!(
            "irreducibility needs a square matrix, got {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    let n = q.rows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if q.get(i, j) > threshold {
                graph.add_edge(nodes[j], nodes[i], ());
            }
        }
    }
    Ok(kosaraju_scc(&graph).len() == 1)
}
