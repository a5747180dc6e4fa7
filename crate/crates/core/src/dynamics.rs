//! Nonlinear swing dynamics with zero-inertia buses and the linear discrete
//! prediction model.
//!
//! The plant is a semi-explicit index-1 DAE: load-bus frequencies are closed
//! form in (λ, u, p), so RK4 runs on the reduced state (λ, ω_𝔊) and the
//! algebraic frequencies are recomputed at every stage.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::netcase::NetworkCase;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("state dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("angle differences are not in the range of the incidence matrix (residual {0:e})")]
    NotInRange(f64),
    #[error("non-finite state after integration step {step}")]
    NonFinite { step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub lambda: DVector<f64>,
    pub omega: DVector<f64>,
}

impl SystemState {
    pub fn new(case: &NetworkCase, lambda: DVector<f64>, omega: DVector<f64>) -> Result<Self, DynamicsError> {
        if lambda.len() != case.m() {
            return Err(DynamicsError::Dimension { expected: case.m(), found: lambda.len() });
        }
        if omega.len() != case.n() {
            return Err(DynamicsError::Dimension { expected: case.n(), found: omega.len() });
        }
        let res = RangeProjector::new(case).residual(case, lambda.as_slice());
        if res > 1e-9 {
            return Err(DynamicsError::NotInRange(res));
        }
        Ok(Self { lambda, omega })
    }

    /// λ = Dθ.
    pub fn from_angles(case: &NetworkCase, theta: &[f64], omega: DVector<f64>) -> Self {
        let mut lambda = vec![0.0; case.m()];
        case.edge_differences(theta, &mut lambda);
        Self { lambda: DVector::from_vec(lambda), omega }
    }
}

/// Least-squares projection onto range(D), factorized once per case.
pub struct RangeProjector {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl RangeProjector {
    pub fn new(case: &NetworkCase) -> Self {
        let d = case.incidence_matrix();
        let mut g = d.transpose() * d;
        g.add_scalar_mut(1.0 / case.n() as f64);
        Self { lu: g.lu() }
    }

    /// ‖(I − DD†)λ‖₂.
    pub fn residual(&self, case: &NetworkCase, lambda: &[f64]) -> f64 {
        let mut rhs = vec![0.0; case.n()];
        for (k, l) in case.lines().iter().enumerate() {
            rhs[l.from] += lambda[k];
            rhs[l.to] -= lambda[k];
        }
        let theta = self.lu.solve(&DVector::from_vec(rhs)).expect("nonsingular");
        let mut fit = vec![0.0; case.m()];
        case.edge_differences(theta.as_slice(), &mut fit);
        fit.iter().zip(lambda).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

/// Frequencies of zero-inertia buses: ω_i = (−[DᵀY_b sin λ]_i + p_i + u_i)/E_i.
/// Returns (bus, ω_i) pairs in ascending bus order.
pub fn algebraic_frequencies(case: &NetworkCase, lambda: &[f64], u: &[f64], p: &[f64]) -> Vec<(usize, f64)> {
    let mut flow = vec![0.0; case.n()];
    case.nonlinear_outflow(lambda, &mut flow);
    case.algebraic_buses()
        .iter()
        .map(|&i| (i, (-flow[i] + p[i] + u[i]) / case.buses()[i].damping))
        .collect()
}

/// Fills the full frequency vector and returns ω̇ on inertial buses in `domega`.
fn derivatives(case: &NetworkCase, lambda: &[f64], omega: &mut [f64], u: &[f64], p: &[f64], flow: &mut [f64], dlambda: &mut [f64], domega: &mut [f64]) {
    case.nonlinear_outflow(lambda, flow);
    for &i in case.algebraic_buses() {
        omega[i] = (-flow[i] + p[i] + u[i]) / case.buses()[i].damping;
    }
    case.edge_differences(omega, dlambda);
    for &i in case.inertial_buses() {
        let b = &case.buses()[i];
        domega[i] = (-b.damping * omega[i] - flow[i] + p[i] + u[i]) / b.inertia;
    }
}

/// RK4 substeps per control period when simulating the plant.
pub const SUBSTEPS: usize = 10;

/// One classical RK4 step of size `h` with zero-order-hold `u`, `p`. The
/// returned load-bus frequencies are consistent with the new angles.
pub fn step_nonlinear(case: &NetworkCase, state: &SystemState, u: &[f64], p: &[f64], h: f64) -> SystemState {
    let (n, m) = (case.n(), case.m());
    let mut flow = vec![0.0; n];
    let mut kl = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let mut kw = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut lam = state.lambda.as_slice().to_vec();
    let mut om = state.omega.as_slice().to_vec();
    let coef = [0.0, 0.5, 0.5, 1.0];
    for s in 0..4 {
        if s > 0 {
            for k in 0..m {
                lam[k] = state.lambda[k] + coef[s] * h * kl[s - 1][k];
            }
            for &i in case.inertial_buses() {
                om[i] = state.omega[i] + coef[s] * h * kw[s - 1][i];
            }
        }
        derivatives(case, &lam, &mut om, u, p, &mut flow, &mut kl[s], &mut kw[s]);
    }
    let mut lambda = state.lambda.clone();
    for k in 0..m {
        lambda[k] += h / 6.0 * (kl[0][k] + 2.0 * kl[1][k] + 2.0 * kl[2][k] + kl[3][k]);
    }
    let mut omega = state.omega.clone();
    for &i in case.inertial_buses() {
        omega[i] += h / 6.0 * (kw[0][i] + 2.0 * kw[1][i] + 2.0 * kw[2][i] + kw[3][i]);
    }
    for (i, w) in algebraic_frequencies(case, lambda.as_slice(), u, p) {
        omega[i] = w;
    }
    SystemState { lambda, omega }
}

/// Advances `steps` RK4 substeps; errors on the first non-finite state.
pub fn integrate(case: &NetworkCase, state: &SystemState, u: &[f64], p: &[f64], h: f64, steps: usize, first_step: usize) -> Result<SystemState, DynamicsError> {
    let mut s = state.clone();
    for j in 0..steps {
        s = step_nonlinear(case, &s, u, p, h);
        if !(s.lambda.iter().all(|v| v.is_finite()) && s.omega.iter().all(|v| v.is_finite())) {
            return Err(DynamicsError::NonFinite { step: first_step + j });
        }
    }
    Ok(s)
}

/// Stacked discrete trajectories over a horizon of N steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    /// m × (N+1)
    pub lambda: DMatrix<f64>,
    /// n × (N+1)
    pub omega: DMatrix<f64>,
    /// n × N, zero rows outside I_u
    pub input: DMatrix<f64>,
    /// |I_u| × N
    pub beta: DMatrix<f64>,
    /// |I_ω| × N, column k − 1 holds γ(k)
    pub gamma: DMatrix<f64>,
    /// n × N
    pub forecast: DMatrix<f64>,
}

/// Linear outflow Dᵀ Y_b λ̂ at bus `i`.
pub fn linear_outflow_at(case: &NetworkCase, lambda_hat: &[f64], i: usize) -> f64 {
    case.incident_lines(i)
        .iter()
        .map(|&(k, s)| s * case.lines()[k].susceptance * lambda_hat[k])
        .sum()
}

/// One explicit step of the prediction model on λ̂ and inertial ω̂.
/// Load-bus entries of `omega_next` are left untouched.
pub fn linear_step(
    case: &NetworkCase,
    period: f64,
    lambda: &[f64],
    omega: &[f64],
    u: &[f64],
    p: &[f64],
    lambda_next: &mut [f64],
    omega_next: &mut [f64],
) {
    let mut flow = vec![0.0; case.n()];
    case.nodal_outflow(lambda, &mut flow);
    for (k, l) in case.lines().iter().enumerate() {
        lambda_next[k] = lambda[k] + period * (omega[l.from] - omega[l.to]);
    }
    for &i in case.inertial_buses() {
        let b = &case.buses()[i];
        omega_next[i] = omega[i] + period / b.inertia * (-b.damping * omega[i] - flow[i] + p[i] + u[i]);
    }
}

/// Algebraic row of the prediction model solved for ω̂_i.
pub fn linear_algebraic(case: &NetworkCase, lambda_hat: &[f64], i: usize, u: f64, p: f64) -> f64 {
    (-linear_outflow_at(case, lambda_hat, i) + p + u) / case.buses()[i].damping
}

/// Rolls the prediction model forward from λ̂(0) = sin λ0.
///
/// Inertial buses start from the measured ω0. Load-bus frequencies solve
/// their algebraic row at every k; at k = N the last input and forecast
/// columns are held.
pub fn predict_linear(
    case: &NetworkCase,
    period: f64,
    lambda0: &[f64],
    omega0: &[f64],
    input: &DMatrix<f64>,
    forecast: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m, steps) = (case.n(), case.m(), input.ncols());
    let mut lam = DMatrix::zeros(m, steps + 1);
    let mut om = DMatrix::zeros(n, steps + 1);
    for k in 0..m {
        lam[(k, 0)] = lambda0[k].sin();
    }
    for &i in case.inertial_buses() {
        om[(i, 0)] = omega0[i];
    }
    let mut lnext = vec![0.0; m];
    let mut onext = vec![0.0; n];
    for k in 0..=steps {
        let ck = k.min(steps - 1);
        let lk: Vec<f64> = lam.column(k).iter().copied().collect();
        for &i in case.algebraic_buses() {
            om[(i, k)] = linear_algebraic(case, &lk, i, input[(i, ck)], forecast[(i, ck)]);
        }
        if k == steps {
            break;
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
    (lam, om)
}

/// Largest absolute residual of the prediction-model equalities.
pub fn prediction_residual(
    case: &NetworkCase,
    period: f64,
    lambda0: &[f64],
    omega0: &[f64],
    lam: &DMatrix<f64>,
    om: &DMatrix<f64>,
    input: &DMatrix<f64>,
    forecast: &DMatrix<f64>,
) -> f64 {
    let steps = input.ncols();
    let mut worst = 0.0f64;
    for k in 0..case.m() {
        worst = worst.max((lam[(k, 0)] - lambda0[k].sin()).abs());
    }
    for &i in case.inertial_buses() {
        worst = worst.max((om[(i, 0)] - omega0[i]).abs());
    }
    for k in 0..=steps {
        let ck = k.min(steps - 1);
        let lk: Vec<f64> = lam.column(k).iter().copied().collect();
        for &i in case.algebraic_buses() {
            let b = &case.buses()[i];
            let r = -b.damping * om[(i, k)] - linear_outflow_at(case, &lk, i) + forecast[(i, ck)] + input[(i, ck)];
            worst = worst.max(r.abs());
        }
        if k == steps {
            break;
        }
        for (e, l) in case.lines().iter().enumerate() {
            let r = lam[(e, k + 1)] - lam[(e, k)] - period * (om[(l.from, k)] - om[(l.to, k)]);
            worst = worst.max(r.abs());
        }
        for &i in case.inertial_buses() {
            let b = &case.buses()[i];
            let r = b.inertia * (om[(i, k + 1)] - om[(i, k)]) / period
                - (-b.damping * om[(i, k)] - linear_outflow_at(case, &lk, i) + forecast[(i, k)] + input[(i, k)]);
            worst = worst.max(r.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::tests::{triangle, two_bus};
    use crate::netcase::{Bus, Line};
    use crate::steady_state::{energy, Equilibrium};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_6;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    /// Three buses: two generators and a load on a path, p balanced.
    fn three_bus() -> NetworkCase {
        let buses = vec![
            Bus { id: 1, inertia: 1.0, damping: 1.0, base_injection: 0.6 },
            Bus { id: 2, inertia: 0.0, damping: 1.0, base_injection: -0.9 },
            Bus { id: 3, inertia: 2.0, damping: 1.5, base_injection: 0.3 },
        ];
        let lines = vec![
            Line { id: 1, from: 0, to: 1, susceptance: 2.0 },
            Line { id: 2, from: 1, to: 2, susceptance: 1.5 },
        ];
        NetworkCase::new(buses, lines, triangle([1.0; 3]).config().clone()).unwrap()
    }

    #[test]
    fn algebraic_examples() {
        let c = two_bus();
        let w = algebraic_frequencies(&c, &[0.0], &[0.0, 0.0], &[0.5, -0.5]);
        assert_eq!(w, vec![(1, -0.5)]);
        let w = algebraic_frequencies(&c, &[FRAC_PI_6], &[0.0, 0.0], &[0.5, -0.5]);
        assert_abs_diff_eq!(w[0].1, 0.0, epsilon = 1e-15);
        let w1 = algebraic_frequencies(&c, &[0.3], &[0.0, 1.0], &[0.5, -0.5]);
        let w0 = algebraic_frequencies(&c, &[0.3], &[0.0, 0.0], &[0.5, -0.5]);
        assert_abs_diff_eq!(w1[0].1 - w0[0].1, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let c = three_bus();
        let p = c.base_injections();
        let eq = Equilibrium::compute(&c, &p).unwrap();
        let s0 = SystemState { lambda: eq.angle_diffs.clone(), omega: DVector::repeat(3, eq.sync_freq) };
        let s1 = step_nonlinear(&c, &s0, &[0.0; 3], p.as_slice(), 1e-3);
        assert!((&s1.lambda - &s0.lambda).amax() <= 1e-12);
        assert!((&s1.omega - &s0.omega).amax() <= 1e-12);
    }

    fn euler_oracle(c: &NetworkCase, s: &SystemState, p: &[f64], h: f64, steps: usize) -> SystemState {
        let mut lam = s.lambda.as_slice().to_vec();
        let mut om = s.omega.as_slice().to_vec();
        let n = c.n();
        for _ in 0..steps {
            let mut flow = vec![0.0; n];
            for (k, l) in c.lines().iter().enumerate() {
                let f = l.susceptance * lam[k].sin();
                flow[l.from] += f;
                flow[l.to] -= f;
            }
            for i in 0..n {
                let b = &c.buses()[i];
                if b.inertia == 0.0 {
                    om[i] = (-flow[i] + p[i]) / b.damping;
                }
            }
            let old = om.clone();
            for i in 0..n {
                let b = &c.buses()[i];
                if b.inertia > 0.0 {
                    om[i] += h * (-b.damping * old[i] - flow[i] + p[i]) / b.inertia;
                }
            }
            for (k, l) in c.lines().iter().enumerate() {
                lam[k] += h * (old[l.from] - old[l.to]);
            }
        }
        let mut s = SystemState { lambda: dv(&lam), omega: dv(&om) };
        for (i, w) in algebraic_frequencies(c, &lam, &vec![0.0; n], p) {
            s.omega[i] = w;
        }
        s
    }

    #[test]
    fn rk4_matches_fine_euler() {
        let c = two_bus();
        let p = [0.5, -0.5];
        let s0 = SystemState { lambda: dv(&[0.7]), omega: dv(&[0.2, 0.0]) };
        let rk = integrate(&c, &s0, &[0.0, 0.0], &p, 1e-4, 10_000, 0).unwrap();
        let eu = euler_oracle(&c, &s0, &p, 1e-6, 1_000_000);
        assert!((&rk.lambda - &eu.lambda).amax() <= 1e-6);
        assert!((&rk.omega - &eu.omega).amax() <= 1e-6);
    }

    #[test]
    fn rk4_fourth_order() {
        let c = three_bus();
        let p = c.base_injections();
        let s0 = SystemState::from_angles(&c, &[0.4, 0.0, -0.3], dv(&[0.3, 0.0, -0.2]));
        let z = [0.0; 3];
        let reference = integrate(&c, &s0, &z, p.as_slice(), 1e-4, 10_000, 0).unwrap();
        let coarse = integrate(&c, &s0, &z, p.as_slice(), 0.04, 25, 0).unwrap();
        let fine = integrate(&c, &s0, &z, p.as_slice(), 0.02, 50, 0).unwrap();
        let e1 = (&coarse.lambda - &reference.lambda).amax();
        let e2 = (&fine.lambda - &reference.lambda).amax();
        let ratio = e1 / e2;
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn energy_decays_without_input() {
        let c = three_bus();
        let p = c.base_injections();
        let eq = Equilibrium::compute(&c, &p).unwrap();
        let mut s = SystemState::from_angles(&c, &[0.2, -0.1, 0.1], dv(&[0.1, 0.0, -0.1]));
        let mut v = energy(&c, &eq, s.lambda.as_slice(), s.omega.as_slice());
        assert!(v < eq.r_bar);
        for _ in 0..5000 {
            s = step_nonlinear(&c, &s, &[0.0; 3], p.as_slice(), 1e-3);
            let v2 = energy(&c, &eq, s.lambda.as_slice(), s.omega.as_slice());
            assert!(v2 <= v + 1e-9);
            v = v2;
        }
    }

    #[test]
    fn range_invariant_preserved() {
        let c = triangle([1.0, 2.0, 3.0]);
        let proj = RangeProjector::new(&c);
        let mut s = SystemState::from_angles(&c, &[0.3, -0.2, 0.1], dv(&[0.5, -0.1, 0.2]));
        for _ in 0..2000 {
            s = step_nonlinear(&c, &s, &[0.1, 0.0, -0.1], &[0.2, -0.1, -0.1], 1e-3);
        }
        assert!(proj.residual(&c, s.lambda.as_slice()) <= 1e-9);
        assert!(SystemState::new(&c, dv(&[1.0, 1.0, 0.0]), dv(&[0.0; 3])).is_err());
    }

    #[test]
    fn prediction_zero_and_residual() {
        let c = three_bus();
        let z = DMatrix::zeros(3, 10);
        let (l, o) = predict_linear(&c, 1e-3, &[0.0; 2], &[0.0; 3], &z, &z);
        assert_eq!(l.amax(), 0.0);
        assert_eq!(o.amax(), 0.0);
        let u = DMatrix::from_fn(3, 10, |i, k| if i == 1 { 0.01 * k as f64 } else { -0.02 });
        let p = DMatrix::from_fn(3, 10, |i, _| c.buses()[i].base_injection);
        let (l, o) = predict_linear(&c, 1e-3, &[0.3, -0.2], &[0.1, 0.0, -0.05], &u, &p);
        let r = prediction_residual(&c, 1e-3, &[0.3, -0.2], &[0.1, 0.0, -0.05], &l, &o, &u, &p);
        assert!(r <= 1e-12, "{r}");
    }

    #[test]
    fn prediction_tracks_nonlinear_near_equilibrium() {
        let c = two_bus();
        let p = [0.5, -0.5];
        let s0 = SystemState { lambda: dv(&[FRAC_PI_6 + 0.02]), omega: dv(&[0.05, 0.0]) };
        let steps = 150;
        let pm = DMatrix::from_fn(2, steps, |i, _| p[i]);
        let (_, om) = predict_linear(&c, 1e-3, s0.lambda.as_slice(), s0.omega.as_slice(), &DMatrix::zeros(2, steps), &pm);
        let mut s = s0.clone();
        for k in 1..=steps {
            s = integrate(&c, &s, &[0.0; 2], &p, 1e-4, 10, 0).unwrap();
            for i in 0..2 {
                assert!((om[(i, k)] - s.omega[i]).abs() <= 0.05);
            }
        }
    }
}
