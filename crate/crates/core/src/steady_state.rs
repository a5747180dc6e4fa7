//! Open-loop equilibrium, synchronization condition, energy function and the
//! region-of-attraction level r̄.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::netcase::NetworkCase;

#[derive(Debug, Error, PartialEq)]
pub enum SteadyStateError {
    #[error("shifted injections are not balanced (sum = {sum:e})")]
    Unbalanced { sum: f64 },
    #[error("synchronization condition fails (value {0:.6} >= 1)")]
    NotSynchronizable(f64),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("equilibrium angle on line {line} is outside (-pi/2, pi/2)")]
    OutsideBox { line: usize },
    #[error("threshold ordering violated at bus {bus} against sync frequency {sync_freq:e}")]
    ThresholdOrdering { bus: usize, sync_freq: f64 },
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub sync_freq: f64,
    pub angle_diffs: DVector<f64>,
    pub tilde_p: DVector<f64>,
    pub condition_value: f64,
    pub r_bar: f64,
}

impl Equilibrium {
    pub fn compute(case: &NetworkCase, p_star: &DVector<f64>) -> Result<Self, SteadyStateError> {
        let (sync_freq, tilde_p) = sync_frequency(case, p_star);
        let (holds, condition_value) = sync_condition(case, &tilde_p)?;
        if !holds {
            return Err(SteadyStateError::NotSynchronizable(condition_value));
        }
        let angle_diffs = equilibrium_angles(case, &tilde_p)?;
        let r_bar = r_bar(case, &angle_diffs);
        Ok(Self { sync_freq, angle_diffs, tilde_p, condition_value, r_bar })
    }

    /// Checks ω̲ < ω̲^thr < ω^∞ < ω̄^thr < ω̄ on I_ω using the computed ω^∞.
    pub fn check_threshold_ordering(&self, case: &NetworkCase) -> Result<(), SteadyStateError> {
        let cfg = case.config();
        for (&i, b) in cfg.freq_constrained.iter().zip(&cfg.bounds) {
            let p = cfg.params_of(i).expect("I_w is a subset of I_u");
            let w = self.sync_freq;
            if !(b.lower < p.threshold_lower && p.threshold_lower < w && w < p.threshold_upper && p.threshold_upper < b.upper) {
                return Err(SteadyStateError::ThresholdOrdering { bus: case.buses()[i].id, sync_freq: w });
            }
        }
        Ok(())
    }
}

/// Returns ω^∞ = Σp*/ΣE and p̃ = p* − ω^∞E.
pub fn sync_frequency(case: &NetworkCase, p_star: &DVector<f64>) -> (f64, DVector<f64>) {
    let e = case.damping();
    let w = p_star.sum() / e.sum();
    (w, p_star - &e * w)
}

/// z = L†p̃ via the deflated system (L + 11ᵀ/n) z = p̃ followed by mean removal.
pub fn pseudo_inverse_apply(case: &NetworkCase, rhs: &DVector<f64>) -> DVector<f64> {
    let n = case.n();
    let mut a = case.laplacian();
    a.add_scalar_mut(1.0 / n as f64);
    let mut z = a.lu().solve(rhs).expect("deflated Laplacian of a connected graph is nonsingular");
    let mean = z.mean();
    z.add_scalar_mut(-mean);
    z
}

/// (‖L†p̃‖_{E,∞} < 1, ‖L†p̃‖_{E,∞}).
pub fn sync_condition(case: &NetworkCase, p_tilde: &DVector<f64>) -> Result<(bool, f64), SteadyStateError> {
    let sum = p_tilde.sum();
    if sum.abs() > 1e-9 * p_tilde.norm() + 1e-14 {
        return Err(SteadyStateError::Unbalanced { sum });
    }
    let z = pseudo_inverse_apply(case, p_tilde);
    let value = case
        .lines()
        .iter()
        .map(|l| (z[l.from] - z[l.to]).abs())
        .fold(0.0, f64::max);
    Ok((value < 1.0, value))
}

fn flow_residual(case: &NetworkCase, theta: &DVector<f64>, p_tilde: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let mut lambda = vec![0.0; case.m()];
    case.edge_differences(theta.as_slice(), &mut lambda);
    let mut out = vec![0.0; case.n()];
    case.nonlinear_outflow(&lambda, &mut out);
    (DVector::from_vec(lambda), DVector::from_vec(out) - p_tilde)
}

/// Solves DᵀY_b sin(Dθ) = p̃ by damped Newton from θ = 0 with the last angle pinned.
pub fn equilibrium_angles(case: &NetworkCase, p_tilde: &DVector<f64>) -> Result<DVector<f64>, SteadyStateError> {
    let n = case.n();
    let mut theta = DVector::zeros(n);
    let (mut lambda, mut res) = flow_residual(case, &theta, p_tilde);
    let mut res_norm = res.amax();
    let mut iterations = 0;
    // one extra step past the tolerance buys a near machine-precision residual
    let mut polish = true;
    while res_norm > NEWTON_TOL || std::mem::take(&mut polish) {
        if iterations == NEWTON_MAX_ITER {
            return Err(SteadyStateError::NoConvergence { iterations, residual: res_norm });
        }
        iterations += 1;
        // Jacobian DᵀY diag(cos λ) D, reduced by dropping the pinned bus.
        let mut jac = DMatrix::zeros(n, n);
        for (k, l) in case.lines().iter().enumerate() {
            let w = l.susceptance * lambda[k].cos();
            jac[(l.from, l.from)] += w;
            jac[(l.to, l.to)] += w;
            jac[(l.from, l.to)] -= w;
            jac[(l.to, l.from)] -= w;
        }
        let red = jac.view((0, 0), (n - 1, n - 1)).into_owned();
        let rhs = -res.rows(0, n - 1).into_owned();
        let Some(step) = red.lu().solve(&rhs) else {
            return Err(SteadyStateError::NoConvergence { iterations, residual: res_norm });
        };
        let mut alpha = 1.0;
        loop {
            let mut trial = theta.clone();
            for i in 0..n - 1 {
                trial[i] += alpha * step[i];
            }
            let (l2, r2) = flow_residual(case, &trial, p_tilde);
            let norm2 = r2.amax();
            if norm2 < res_norm || (alpha < 1e-6 && res_norm > NEWTON_TOL) {
                theta = trial;
                lambda = l2;
                res = r2;
                res_norm = norm2;
                break;
            }
            if alpha < 1e-6 {
                break;
            }
            alpha *= 0.5;
        }
    }
    if let Some(k) = lambda.iter().position(|v| v.abs() >= FRAC_PI_2) {
        return Err(SteadyStateError::OutsideBox { line: k });
    }
    Ok(lambda)
}

/// a(λ, λ^∞) = cos λ^∞ − cos λ − λ sin λ^∞ + λ^∞ sin λ^∞.
pub fn potential(lambda: f64, lambda_inf: f64) -> f64 {
    lambda_inf.cos() - lambda.cos() - lambda * lambda_inf.sin() + lambda_inf * lambda_inf.sin()
}

/// V(λ, ω_𝔊). `omega` is the full bus vector; only buses with M > 0 contribute.
pub fn energy(case: &NetworkCase, eq: &Equilibrium, lambda: &[f64], omega: &[f64]) -> f64 {
    let kinetic: f64 = case
        .inertial_buses()
        .iter()
        .map(|&i| {
            let d = omega[i] - eq.sync_freq;
            0.5 * case.buses()[i].inertia * d * d
        })
        .sum();
    let potential_sum: f64 = case
        .lines()
        .iter()
        .enumerate()
        .map(|(k, l)| l.susceptance * potential(lambda[k], eq.angle_diffs[k]))
        .sum();
    kinetic + potential_sum
}

/// r̄ = min over lines and signs of b_k a(±π/2, λ_k^∞).
pub fn r_bar(case: &NetworkCase, angle_diffs: &DVector<f64>) -> f64 {
    case.lines()
        .iter()
        .enumerate()
        .flat_map(|(k, l)| {
            let li = angle_diffs[k];
            [FRAC_PI_2, -FRAC_PI_2].map(|s| l.susceptance * potential(s, li))
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn phi_contains(case: &NetworkCase, eq: &Equilibrium, r: f64, lambda: &[f64], omega: &[f64]) -> bool {
    lambda.iter().all(|l| l.abs() <= FRAC_PI_2) && energy(case, eq, lambda, omega) <= r
}
