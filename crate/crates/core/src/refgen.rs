//! Reference trajectory from the discretized safety controller.
//!
//! The controller is rolled through the linear prediction model. Load buses
//! in I_ω couple input and frequency algebraically; that coupling is resolved
//! by solving the scalar fixed point directly.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::dynamics::{linear_outflow_at, linear_step};
use crate::mpc::kappa;
use crate::netcase::{ControlParams, FrequencyBounds, NetworkCase};

#[derive(Debug, Error, PartialEq)]
pub enum RefgenError {
    #[error("reference trajectory infeasible: {0}; try a smaller control period")]
    Infeasible(String),
    #[error("forecast has {found} columns, horizon needs {expected}")]
    Dimension { expected: usize, found: usize },
}

/// How a load-bus fixed point was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgebraicCase {
    Interior,
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    /// m × (N+1)
    pub lambda: DMatrix<f64>,
    /// n × (N+1)
    pub omega: DMatrix<f64>,
    /// n × N, zero outside I_ω
    pub input: DMatrix<f64>,
    /// |I_u| × N, smallest magnitude slack that qualifies the reference
    pub beta: DMatrix<f64>,
    /// |I_ω| × N, column k − 1 holds γ(k)
    pub gamma: DMatrix<f64>,
    /// κ_i per bus of I_ω
    pub kappa: Vec<bool>,
    pub feasible: bool,
    /// First violated constraint when infeasible.
    pub violation: Option<String>,
    /// max over i, k of |ω̂(k+1) − ω̂(k)| / T
    pub max_step_bound: f64,
}

impl ReferenceTrajectory {
    pub fn require_feasible(self) -> Result<Self, RefgenError> {
        match (&self.violation, self.feasible) {
            (_, true) => Ok(self),
            (Some(v), false) => Err(RefgenError::Infeasible(v.clone())),
            (None, false) => Err(RefgenError::Infeasible("unspecified".into())),
        }
    }
}

/// Raw reference input û^a followed by saturation.
pub fn reference_input(params: &ControlParams, bounds: &FrequencyBounds, omega: f64, v: f64) -> f64 {
    let raw = if omega > params.threshold_upper {
        let den = omega - params.threshold_upper;
        assert!(den > 0.0);
        f64::min(0.0, params.gain_upper * (bounds.upper - omega) / den - v)
    } else if omega < params.threshold_lower {
        let den = params.threshold_lower - omega;
        assert!(den > 0.0);
        f64::max(0.0, params.gain_lower * (bounds.lower - omega) / den - v)
    } else {
        0.0
    };
    params.saturate(raw)
}

/// Solves 0 = ϑ − Eω̂ + û with û given by the reference controller at ω̂.
/// Returns (ω̂, û, case).
pub fn resolve_algebraic(params: &ControlParams, bounds: &FrequencyBounds, damping: f64, theta: f64) -> (f64, f64, AlgebraicCase) {
    let free = theta / damping;
    if bounds.lower <= free && free <= bounds.upper {
        return (free, 0.0, AlgebraicCase::Interior);
    }
    let (target, case) = if free > bounds.upper {
        (bounds.upper, AlgebraicCase::Upper)
    } else {
        (bounds.lower, AlgebraicCase::Lower)
    };
    let u = damping * target - theta;
    let clipped = params.saturate(u);
    if clipped == u {
        (target, u, case)
    } else {
        ((theta + clipped) / damping, clipped, case)
    }
}

/// ϑ_i = −[DᵀY_b λ̂]_i + p̂_i.
fn theta_at(case: &NetworkCase, lambda: &[f64], i: usize, p: f64) -> f64 {
    -linear_outflow_at(case, lambda, i) + p
}

pub fn generate_reference(
    case: &NetworkCase,
    lambda0: &[f64],
    omega0: &[f64],
    forecast: &DMatrix<f64>,
) -> Result<ReferenceTrajectory, RefgenError> {
    let cfg = case.config();
    let horizon = cfg.horizon;
    let (n, m, steps, period) = (case.n(), case.m(), horizon.steps, horizon.period);
    if forecast.ncols() != steps || forecast.nrows() != n {
        return Err(RefgenError::Dimension { expected: steps, found: forecast.ncols() });
    }
    let mut lam = DMatrix::zeros(m, steps + 1);
    let mut om = DMatrix::zeros(n, steps + 1);
    let mut input = DMatrix::zeros(n, steps);
    for k in 0..m {
        lam[(k, 0)] = lambda0[k].sin();
    }
    for &i in case.inertial_buses() {
        om[(i, 0)] = omega0[i];
    }
    let mut lnext = vec![0.0; m];
    let mut onext = vec![0.0; n];
    for k in 0..=steps {
        let lk: Vec<f64> = lam.column(k).iter().copied().collect();
        let pcol = k.min(steps - 1);
        // load buses: fixed point in I_ω, plain algebraic row elsewhere
        for &i in case.algebraic_buses() {
            let theta = theta_at(case, &lk, i, forecast[(i, pcol)]);
            let e = case.buses()[i].damping;
            match cfg.freq_slot(i) {
                Some(s) => {
                    let params = cfg.params_of(i).expect("I_w in I_u");
                    let (w, u, _) = resolve_algebraic(params, &cfg.bounds[s], e, theta);
                    om[(i, k)] = w;
                    if k < steps {
                        input[(i, k)] = u;
                    }
                }
                None => om[(i, k)] = theta / e,
            }
        }
        if k == steps {
            break;
        }
        for (s, &i) in cfg.freq_constrained.iter().enumerate() {
            let b = &case.buses()[i];
            if b.inertia == 0.0 {
                continue;
            }
            let v = theta_at(case, &lk, i, forecast[(i, k)]) - b.damping * om[(i, k)];
            input[(i, k)] = reference_input(&cfg.params[cfg.controlled_slot(i).unwrap()], &cfg.bounds[s], om[(i, k)], v);
        }
        let ok: Vec<f64> = om.column(k).iter().copied().collect();
        let uk: Vec<f64> = input.column(k).iter().copied().collect();
        let pk: Vec<f64> = forecast.column(k).iter().copied().collect();
        linear_step(case, period, &lk, &ok, &uk, &pk, &mut lnext, &mut onext);
        lam.column_mut(k + 1).copy_from_slice(&lnext);
        for &i in case.inertial_buses() {
            om[(i, k + 1)] = onext[i];
        }
    }

    let kap: Vec<bool> = cfg
        .freq_constrained
        .iter()
        .zip(&cfg.bounds)
        .map(|(&i, b)| kappa(omega0[i], cfg.params_of(i).unwrap().soft_input, b))
        .collect();

    let mut beta = DMatrix::zeros(cfg.controlled.len(), steps);
    let mut gamma = DMatrix::zeros(cfg.freq_constrained.len(), steps);
    let mut violation = None;
    let mut note = |msg: String| {
        if violation.is_none() {
            violation = Some(msg);
        }
    };
    for (s, (&i, p)) in cfg.controlled.iter().zip(&cfg.params).enumerate() {
        let id = case.buses()[i].id;
        for k in 0..steps {
            let u = input[(i, k)];
            let over = p.input_max.map_or(0.0, |hi| u - hi).max(p.input_min.map_or(0.0, |lo| lo - u)).max(0.0);
            if p.soft_input {
                beta[(s, k)] = over;
            } else if over > 0.0 {
                note(format!("input magnitude at bus {id}, step {k}"));
            }
            let w = om[(i, k)];
            if (w >= p.threshold_upper && u > 0.0) || (w <= p.threshold_lower && u < 0.0) {
                note(format!("sign of input at bus {id}, step {k}"));
            } else if p.in_band(w) && u != 0.0 {
                note(format!("nonzero input inside the threshold band at bus {id}, step {k}"));
            }
        }
    }
    for (s, (&i, b)) in cfg.freq_constrained.iter().zip(&cfg.bounds).enumerate() {
        let id = case.buses()[i].id;
        for k in 1..=steps {
            let w = om[(i, k)];
            if kap[s] {
                gamma[(s, k - 1)] = f64::max(0.0, f64::max(w - b.upper + b.margin, b.lower + b.margin - w));
            } else if !b.contains(w) {
                note(format!("frequency bound at bus {id}, step {k} (value {w:e})"));
            }
        }
    }
    let mut max_step_bound = 0.0f64;
    for i in 0..n {
        for k in 0..steps {
            max_step_bound = max_step_bound.max((om[(i, k + 1)] - om[(i, k)]).abs() / period);
        }
    }
    Ok(ReferenceTrajectory {
        lambda: lam,
        omega: om,
        input,
        beta,
        gamma,
        kappa: kap,
        feasible: violation.is_none(),
        violation,
        max_step_bound,
    })
}
