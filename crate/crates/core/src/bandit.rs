//! Two-armed bandit with multiplicative confidences.
//!
//! The gambler holds confidences `(c0, c1)`, plays arm 0 with probability
//! `c0 / (c0 + c1)`, and multiplies the played arm's confidence by `δ` after a
//! win or divides it by `δ` after a loss. Outcomes are coded
//! 1 = arm 0 win, 2 = arm 0 loss, 3 = arm 1 win, 4 = arm 1 loss.
//!
//! Viewed as a recursive chain over these four outcomes, the outcome distribution
//! `ω` determines the confidences `q0 = ω1 + ω2`, `q1 = ω3 + ω4`, and the map
//! `f(ω)` gives the next-outcome distribution after each possible outcome.
//!
//! Note: the closed-form ratio `q0 / q1 = (δ(1-p1) - p1) / (δ(1-p0) - p0)` tends to
//! `(1-p1)/(1-p0)` as `δ → ∞`, a finite value. It does not single out the better
//! arm in that limit.

use rand::Rng;
use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::recursive::RecursiveSpec;
use crate::sampling::rng_from_seed;
use crate::simplex::SimplexVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BanditParams {
    pub p0: f64,
    pub p1: f64,
    pub delta: f64,
}

impl BanditParams {
    pub fn new(p0: f64, p1: f64, delta: f64) -> Result<Self> {
        for (name, p) in [("p0", p0), ("p1", p1)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::contract(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        if !(delta > 1.0 && delta.is_finite()) {
            return Err(Error::contract(format!(
                "delta must be a finite value > 1, got {delta}"
            )));
        }
        Ok(BanditParams { p0, p1, delta })
    }
}

/// Outcome of one play, in the order of the four-state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BanditOutcome {
    Arm0Win = 1,
    Arm0Loss = 2,
    Arm1Win = 3,
    Arm1Loss = 4,
}

impl BanditOutcome {
    pub fn code(self) -> usize {
        self as usize
    }

    fn from_play(arm0: bool, win: bool) -> Self {
        match (arm0, win) {
            (true, true) => BanditOutcome::Arm0Win,
            (true, false) => BanditOutcome::Arm0Loss,
            (false, true) => BanditOutcome::Arm1Win,
            (false, false) => BanditOutcome::Arm1Loss,
        }
    }
}

/// `f(ω)`: column `j` is the outcome distribution after confidences `(q0, q1)` were
/// updated by outcome `j`.
pub fn bandit_matrix(params: &BanditParams, omega: &[f64]) -> Result<DenseMatrix> {
    if omega.len() != 4 {
        return Err(Error::contract(format!(
            "bandit map needs a 4-vector, got dimension {}",
            omega.len()
        )));
    }
    let q0 = omega[0] + omega[1];
    let q1 = omega[2] + omega[3];
    if (q0 + q1 - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!(
            "confidences sum to {}, not 1",
            q0 + q1
        )));
    }
    let BanditParams { p0, p1, delta } = *params;
    let updated = [
        (q0 * delta, q1),
        (q0 / delta, q1),
        (q0, q1 * delta),
        (q0, q1 / delta),
    ];
    let columns: Vec<Vec<f64>> = updated
        .iter()
        .map(|&(a, b)| {
            let s = a + b;
            vec![
                p0 * a / s,
                (1.0 - p0) * a / s,
                p1 * b / s,
                (1.0 - p1) * b / s,
            ]
        })
        .collect();
    DenseMatrix::from_columns(&columns)
}

/// The bandit as a recursive map over the four outcomes.
pub fn bandit_map(params: BanditParams) -> Result<RecursiveSpec> {
    RecursiveSpec::bandit(params)
}

/// `q0 / q1 = (δ(1-p1) - p1) / (δ(1-p0) - p0)`, defined when both terms are positive.
pub fn closed_form_ratio(params: &BanditParams) -> Result<f64> {
    let BanditParams { p0, p1, delta } = *params;
    let num = delta * (1.0 - p1) - p1;
    let den = delta * (1.0 - p0) - p0;
    if num <= 0.0 || den <= 0.0 {
        return Err(Error::Domain(format!(
            "closed form needs δ(1-p1) - p1 > 0 and δ(1-p0) - p0 > 0, got {num} and {den}"
        )));
    }
    Ok(num / den)
}

/// `ω = (p0 q0, (1-p0) q0, p1 q1, (1-p1) q1)` with `q0 = r/(1+r)`, `q1 = 1/(1+r)`.
pub fn closed_form_stationary(params: &BanditParams) -> Result<SimplexVector> {
    let r = closed_form_ratio(params)?;
    let q0 = r / (1.0 + r);
    let q1 = 1.0 / (1.0 + r);
    let BanditParams { p0, p1, .. } = *params;
    SimplexVector::new(vec![p0 * q0, (1.0 - p0) * q0, p1 * q1, (1.0 - p1) * q1])
}

/// Absolute residuals of the two reduced scalar equations at `q0 = r`, `q1 = 1`.
pub fn residual_reduced(params: &BanditParams, r: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::contract(format!("ratio must be positive, got {r}")));
    }
    let BanditParams { p0, p1, delta } = *params;
    let (q0, q1) = (r, 1.0);
    let d1 = q0 * delta + q1;
    let d2 = q0 + q1 * delta;
    let win_side = p0 * q0 + (1.0 - p1) * q1;
    let loss_side = (1.0 - p0) * q0 + p1 * q1;
    let first = d1 * d2 - delta * win_side * d2 - loss_side * d1;
    let second = d1 * d2 - win_side * d2 - delta * loss_side * d1;
    Ok((first.abs(), second.abs()))
}

/// Long-run arm-0 share at which the log-confidence ratio has zero drift:
/// `(1-2p1) / ((1-2p1) + (1-2p0))`. Only meaningful when both rates are below 1/2.
pub fn zero_drift_share(params: &BanditParams) -> Option<f64> {
    let a = 1.0 - 2.0 * params.p1;
    let b = 1.0 - 2.0 * params.p0;
    (a > 0.0 && b > 0.0).then(|| a / (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    /// Empirical frequency of outcomes 1..=4 over the recorded steps.
    pub freq: [f64; 4],
    pub arm0_choice_freq: f64,
    /// `q0` of the closed-form recursive-model solution, when defined.
    pub model_q0: Option<f64>,
    pub zero_drift_q0: Option<f64>,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
}

/// Plays the infinite-memory process for `burn_in + steps` rounds and tallies the last `steps`.
///
/// Confidences start at `(1/2, 1/2)` and are renormalized to sum to one after every
/// update; only their ratio affects play. Nothing guarantees the confidence walk is
/// ergodic (e.g. a rate above 1/2 can lock play onto one arm).
pub fn simulate(
    params: &BanditParams,
    steps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if steps == 0 {
        return Err(Error::contract("steps must be >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let (mut c0, mut c1) = (0.5f64, 0.5f64);
    let mut counts = [0u64; 4];
    for t in 0..burn_in + steps {
        let arm0 = rng.random::<f64>() < c0;
        let rate = if arm0 { params.p0 } else { params.p1 };
        let win = rng.random::<f64>() < rate;
        let factor = if win {
            params.delta
        } else {
            1.0 / params.delta
        };
        if arm0 {
            c0 *= factor;
        } else {
            c1 *= factor;
        }
        let s = c0 + c1;
        c0 /= s;
        c1 /= s;
        if t >= burn_in {
            counts[BanditOutcome::from_play(arm0, win).code() - 1] += 1;
        }
    }
    let total = steps as f64;
    let freq = counts.map(|c| c as f64 / total);
    let model_q0 = closed_form_ratio(params).ok().map(|r| r / (1.0 + r));
    Ok(SimulationReport {
        freq,
        arm0_choice_freq: freq[0] + freq[1],
        model_q0,
        zero_drift_q0: zero_drift_share(params),
        steps,
        burn_in,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursive::{default_fixed_point_config, fixed_point, RecursiveMap};

    fn params(p0: f64, p1: f64, delta: f64) -> BanditParams {
        BanditParams::new(p0, p1, delta).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(BanditParams::new(1.2, 0.2, 2.0).is_err());
        assert!(BanditParams::new(0.2, -0.1, 2.0).is_err());
        assert!(BanditParams::new(0.2, 0.2, 1.0).is_err());
        assert!(BanditParams::new(0.2, 0.2, f64::INFINITY).is_err());
    }

    #[test]
    fn symmetric_arms_mirror_columns() {
        let p = params(0.3, 0.3, 2.0);
        let f = bandit_matrix(&p, &[0.2, 0.3, 0.1, 0.4]).unwrap();
        let c1 = f.column(0);
        let c3 = f.column(2);
        assert!((c1[0] - c3[2]).abs() < 1e-15 && (c1[1] - c3[3]).abs() < 1e-15);
        assert!((c1[2] - c3[0]).abs() < 1e-15 && (c1[3] - c3[1]).abs() < 1e-15);
    }

    #[test]
    fn column_at_closed_form() {
        let p = params(0.4, 0.2, 2.0);
        let w = closed_form_stationary(&p).unwrap();
        let f = bandit_matrix(&p, &w).unwrap();
        let expected = [
            0.4 * 14.0 / 18.0,
            0.6 * 14.0 / 18.0,
            0.2 * 4.0 / 18.0,
            0.8 * 4.0 / 18.0,
        ];
        for (a, b) in f.column(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn columns_sum_to_one() {
        let p = params(0.45, 0.1, 4.0);
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            let w = crate::sampling::random_simplex(&mut rng, 4, 0.0);
            assert!(bandit_matrix(&p, &w).unwrap().is_column_stochastic(1e-15));
        }
    }

    /// Column `j` of the map written out directly from the confidence update.
    fn hand_column(p0: f64, p1: f64, d: f64, w: &[f64], j: usize) -> [f64; 4] {
        let (q0, q1) = (w[0] + w[1], w[2] + w[3]);
        let (a, b) = match j {
            0 => (q0 * d, q1),
            1 => (q0 / d, q1),
            2 => (q0, q1 * d),
            _ => (q0, q1 / d),
        };
        let s = a + b;
        [
            p0 * a / s,
            (1.0 - p0) * a / s,
            p1 * b / s,
            (1.0 - p1) * b / s,
        ]
    }

    #[test]
    fn order_two_truncation_by_hand() {
        let spec = bandit_map(params(0.4, 0.2, 2.0)).unwrap();
        let fam = crate::recursive::build_truncation(&spec, None, 2).unwrap();
        assert_eq!(fam.len(), 16);
        let u = [0.25; 4];
        for i in 0..4 {
            let first = hand_column(0.4, 0.2, 2.0, &u, i);
            for j in 0..4 {
                let second = hand_column(0.4, 0.2, 2.0, &first, j);
                assert!(crate::simplex::max_abs_difference(fam.member(4 * i + j), &second) < 1e-15);
            }
        }
    }

    #[test]
    fn map_is_continuous_inside_simplex() {
        let p = params(0.3, 0.1, 2.0);
        let mut rng = rng_from_seed(5);
        for _ in 0..20 {
            let w = crate::sampling::random_simplex(&mut rng, 4, 0.05);
            let base = bandit_matrix(&p, &w).unwrap();
            for h in [1e-4, 1e-6, 1e-8] {
                let mut moved = w.to_vec();
                moved[0] += h;
                moved[2] -= h;
                let diff = bandit_matrix(&p, &moved).unwrap().max_abs_difference(&base);
                assert!(diff < 10.0 * h, "h {h}: {diff}");
            }
        }
    }

    #[test]
    fn map_rejects_unnormalized_confidences() {
        let p = params(0.4, 0.2, 2.0);
        assert!(bandit_matrix(&p, &[0.5, 0.5, 0.5, 0.5]).is_err());
        assert!(bandit_matrix(&p, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(closed_form_ratio(&params(0.3, 0.3, 3.0)).unwrap(), 1.0);
        assert!((closed_form_ratio(&params(0.4, 0.2, 2.0)).unwrap() - 1.75).abs() < 1e-15);
        assert!(matches!(
            closed_form_ratio(&params(0.7, 0.2, 1.5)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn stationary_examples() {
        let w = closed_form_stationary(&params(0.5, 0.5, 2.0)).unwrap();
        assert!(w.l1_distance(&[0.25; 4]) < 1e-15);
        let w = closed_form_stationary(&params(0.4, 0.2, 2.0)).unwrap();
        let expected = [2.8 / 11.0, 4.2 / 11.0, 0.8 / 11.0, 3.2 / 11.0];
        assert!(w.l1_distance(&expected) < 1e-15);
        let spec = bandit_map(params(0.4, 0.2, 2.0)).unwrap();
        let image = spec.map(&w).unwrap().matvec(&w).unwrap();
        assert!(w.l1_distance(&image) < 1e-12);
    }

    #[test]
    fn reduced_residuals() {
        let p = params(0.4, 0.2, 2.0);
        let r = closed_form_ratio(&p).unwrap();
        let (a, b) = residual_reduced(&p, r).unwrap();
        assert!(a < 1e-10 && b < 1e-10);
        let (a, b) = residual_reduced(&params(0.3, 0.3, 2.0), 1.0).unwrap();
        assert!(a < 1e-15 && b < 1e-15);
        let (a, b) = residual_reduced(&p, 2.0 * r).unwrap();
        assert!(a.max(b) > 1e-3);
        assert!(residual_reduced(&p, 0.0).is_err());
    }

    #[test]
    fn arm_swap_inverts_ratio() {
        for (p0, p1, d) in [(0.1, 0.4, 2.0), (0.2, 0.45, 1.5), (0.3, 0.1, 4.0)] {
            let r = closed_form_ratio(&params(p0, p1, d)).unwrap();
            let s = closed_form_ratio(&params(p1, p0, d)).unwrap();
            assert!((r * s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_point_recovers_ratio() {
        let spec = bandit_map(params(0.4, 0.2, 2.0)).unwrap();
        let fp = fixed_point(
            &spec,
            &default_fixed_point_config(),
            &SimplexVector::uniform(4),
        )
        .unwrap();
        let ratio = (fp.omega[0] + fp.omega[1]) / (fp.omega[2] + fp.omega[3]);
        assert!((ratio - 1.75).abs() < 1e-8);
    }

    #[test]
    fn simulation_is_reproducible() {
        let p = params(0.4, 0.2, 2.0);
        let a = simulate(&p, 20_000, 100, 9).unwrap();
        let b = simulate(&p, 20_000, 100, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, 20_000, 100, 10).unwrap();
        assert_ne!(a.freq, c.freq);
        assert!((a.freq.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(simulate(&p, 0, 0, 1).is_err());
    }

    #[test]
    fn simulation_follows_zero_drift_share() {
        let p = params(0.4, 0.2, 2.0);
        let report = simulate(&p, 1_000_000, 10_000, 3).unwrap();
        assert_eq!(report.zero_drift_q0, Some(0.75));
        assert!((report.model_q0.unwrap() - 7.0 / 11.0).abs() < 1e-15);
        assert!((report.arm0_choice_freq - 0.75).abs() < 0.02, "{report:?}");
    }
}
