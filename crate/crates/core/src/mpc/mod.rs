//! Convexified receding-horizon problem and the centralized control law.

mod condensed;
mod qcvx;

pub use condensed::{Controller, ControllerStats};
pub use qcvx::{build_qcvx, qualification_point, ConvexifiedProblem, Layout, VarKind};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::netcase::{FrequencyBounds, NetworkCase};
use crate::qp::{QpError, QpStatus};
use crate::refgen::{reference_input, resolve_algebraic, RefgenError};

#[derive(Debug, Error)]
pub enum MpcError {
    #[error(transparent)]
    Reference(#[from] RefgenError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("QP solver stopped with {status:?} after {iterations} iterations")]
    Solver { status: QpStatus, iterations: usize, dump: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// κ_i: false (hard bounds) iff ω_{i,0} is safe and the input limits are soft.
pub fn kappa(omega0: f64, soft_input: bool, bounds: &FrequencyBounds) -> bool {
    !(bounds.contains(omega0) && soft_input)
}

/// Active clause of the convexified stability set at one (bus, step).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// ω̂ ≥ ω̄^thr and û ≤ 0
    Upper,
    /// ω̂ ≤ ω̲^thr and û ≥ 0
    Lower,
    /// û = 0
    Inactive,
}

/// One branch per controlled bus (slot of I_u) and step k ∈ [0, N−1].
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPlan {
    pub branches: Vec<Vec<Branch>>,
}

impl BranchPlan {
    pub fn get(&self, slot: usize, k: usize) -> Branch {
        self.branches[slot][k]
    }

    pub fn steps(&self) -> usize {
        self.branches.first().map_or(0, Vec::len)
    }

    /// True when every controlled bus is pinned to zero at k = 0.
    pub fn first_step_inactive(&self) -> bool {
        self.branches.iter().all(|b| b[0] == Branch::Inactive)
    }
}

/// Classifies each (i, k) from the reference frequencies (n × (N+1)).
/// Threshold equality goes to the upper/lower branch.
pub fn classify_branches(case: &NetworkCase, omega_ref: &DMatrix<f64>) -> BranchPlan {
    let cfg = case.config();
    let steps = omega_ref.ncols() - 1;
    let branches = cfg
        .controlled
        .iter()
        .zip(&cfg.params)
        .map(|(&i, p)| {
            (0..steps)
                .map(|k| {
                    let w = omega_ref[(i, k)];
                    if w >= p.threshold_upper {
                        Branch::Upper
                    } else if w <= p.threshold_lower {
                        Branch::Lower
                    } else {
                        Branch::Inactive
                    }
                })
                .collect()
        })
        .collect();
    BranchPlan { branches }
}

/// Membership in the discrete stability set for i ∈ I_u and k ∈ [0, N−1].
/// `omega` is n × (N+1) or wider, `input` is n × N.
pub fn phi_disc_contains(case: &NetworkCase, omega: &DMatrix<f64>, input: &DMatrix<f64>, tol: f64) -> bool {
    let cfg = case.config();
    cfg.controlled.iter().zip(&cfg.params).all(|(&i, p)| {
        (0..input.ncols()).all(|k| {
            let (w, u) = (omega[(i, k)], input[(i, k)]);
            if p.in_band(w) {
                u.abs() <= tol
            } else {
                w * u <= tol
            }
        })
    })
}

/// Membership in the convexified set defined by `plan`.
pub fn phi_cvx_contains(case: &NetworkCase, plan: &BranchPlan, omega: &DMatrix<f64>, input: &DMatrix<f64>, tol: f64) -> bool {
    let cfg = case.config();
    cfg.controlled.iter().zip(&cfg.params).enumerate().all(|(s, (&i, p))| {
        (0..plan.steps()).all(|k| {
            let (w, u) = (omega[(i, k)], input[(i, k)]);
            match plan.get(s, k) {
                Branch::Upper => w >= p.threshold_upper - tol && u <= tol,
                Branch::Lower => w <= p.threshold_lower + tol && u >= -tol,
                Branch::Inactive => u.abs() <= tol,
            }
        })
    })
}

/// Reference controller applied directly at the measured state: one step,
/// no optimization. Returns an input on all n buses.
pub fn baseline_control(case: &NetworkCase, lambda: &[f64], omega: &[f64], p: &[f64]) -> DVector<f64> {
    let cfg = case.config();
    let mut flow = vec![0.0; case.n()];
    case.nonlinear_outflow(lambda, &mut flow);
    let mut u = DVector::zeros(case.n());
    for (&i, b) in cfg.freq_constrained.iter().zip(&cfg.bounds) {
        let params = cfg.params_of(i).expect("I_w in I_u");
        let bus = &case.buses()[i];
        let theta = -flow[i] + p[i];
        u[i] = if bus.inertia == 0.0 {
            resolve_algebraic(params, b, bus.damping, theta).1
        } else {
            reference_input(params, b, omega[i], theta - bus.damping * omega[i])
        };
    }
    u
}

/// Centralized law: first column of the optimal convexified input.
/// Builds a fresh controller; use [`Controller`] in closed loop.
pub fn centralized_control(case: &NetworkCase, lambda: &[f64], omega: &[f64], forecast: &DMatrix<f64>) -> Result<DVector<f64>, MpcError> {
    let mut c = Controller::new(case)?;
    c.control(lambda, omega, forecast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::tests::two_bus;
    use crate::refgen::generate_reference;

    fn fb() -> FrequencyBounds {
        FrequencyBounds { lower: -0.2, upper: 0.2, margin: 0.02 }
    }

    #[test]
    fn kappa_examples() {
        assert!(!kappa(0.0, true, &fb()));
        assert!(kappa(0.3, true, &fb()));
        assert!(kappa(0.0, false, &fb()));
    }

    fn omega_row(vals: &[f64]) -> DMatrix<f64> {
        // bus 0 carries the values, bus 1 zeros
        DMatrix::from_fn(2, vals.len(), |i, k| if i == 0 { vals[k] } else { 0.0 })
    }

    #[test]
    fn branch_classification() {
        let c = two_bus();
        let plan = classify_branches(&c, &omega_row(&[0.0, 0.1, -0.15, -0.1, 0.0]));
        assert_eq!(plan.branches[0], vec![Branch::Inactive, Branch::Upper, Branch::Lower, Branch::Lower]);
        assert!(plan.first_step_inactive());
        let zero = classify_branches(&c, &DMatrix::zeros(2, 4));
        assert!(zero.branches[0].iter().all(|b| *b == Branch::Inactive));
    }

    #[test]
    fn phi_disc_examples() {
        let c = two_bus();
        let om = omega_row(&[0.15, 0.05, 0.0, 0.0]);
        assert!(phi_disc_contains(&c, &om, &DMatrix::zeros(2, 3), 0.0));
        let mut u = DMatrix::zeros(2, 3);
        u[(0, 0)] = 0.01;
        assert!(!phi_disc_contains(&c, &om, &u, 0.0));
        let mut u = DMatrix::zeros(2, 3);
        u[(0, 1)] = -0.01;
        assert!(!phi_disc_contains(&c, &om, &u, 0.0));
    }

    #[test]
    fn phi_cvx_examples() {
        let c = two_bus();
        let fc = DMatrix::from_fn(2, 3, |i, _| c.buses()[i].base_injection);
        let r = generate_reference(&c, &[0.5], &[0.15, 0.0], &fc).unwrap();
        let plan = classify_branches(&c, &r.omega);
        assert!(phi_cvx_contains(&c, &plan, &r.omega, &r.input, 0.0));
        let om = omega_row(&[0.15, 0.15, 0.15, 0.15]);
        let plan = classify_branches(&c, &om);
        let mut u = DMatrix::zeros(2, 3);
        u[(0, 0)] = 0.1;
        assert!(!phi_cvx_contains(&c, &plan, &om, &u, 1e-9));
    }

    #[test]
    fn baseline_matches_reference_first_column() {
        let c = two_bus();
        let fc = DMatrix::from_fn(2, 3, |i, _| c.buses()[i].base_injection);
        let (lam, om) = ([0.4], [0.16, 0.0]);
        let r = generate_reference(&c, &lam, &om, &fc).unwrap();
        let p: Vec<f64> = fc.column(0).iter().copied().collect();
        let u = baseline_control(&c, &lam, &om, &p);
        // at k = 0 the linear flow of sin λ is the nonlinear flow
        assert!((u[0] - r.input[(0, 0)]).abs() <= 1e-12);
    }
}
