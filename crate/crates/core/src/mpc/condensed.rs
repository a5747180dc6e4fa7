//! Condensed convexified problem for closed-loop use.
//!
//! The prediction model is linear and time invariant, so each monitored
//! frequency ω̂_i(k) is a free response plus a convolution of the inputs
//! with precomputed impulse responses. Eliminating Λ̂ and Ω̂ leaves only
//! (Û, Γ̂, B̂) as variables. The constraint matrix is the same at every
//! control step; only the bounds move, so the QP workspace keeps its
//! scaling and cached factorizations.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{classify_branches, kappa, Branch, MpcError};
use crate::dynamics::{algebraic_frequencies, integrate, predict_linear, SystemState, SUBSTEPS};
use crate::netcase::NetworkCase;
use crate::qp::active_set::{ActiveRow, ActiveSetSettings, DualActiveSet};
use crate::qp::{Admm, CscMatrix, QpProblem, QpSolution, QpStatus, Settings};
use crate::refgen::generate_reference;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Row {
    /// ω̂ of controlled slot s at step k against its branch threshold.
    Branch(usize, usize),
    /// ω̂ + γ of constrained slot w at step k, bounded below.
    FreqLower(usize, usize),
    /// ω̂ − γ, bounded above.
    FreqUpper(usize, usize),
    Input(usize, usize),
    FreqSlack(usize, usize),
    InputSlack(usize, usize),
    /// û + β ≥ u_min
    SlackLower(usize, usize),
    /// û − β ≤ u_max
    SlackUpper(usize, usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ControllerStats {
    /// Control steps that needed a QP solve.
    pub solves: usize,
    /// Control steps answered without a QP (all first-step branches inactive).
    pub skipped: usize,
    pub iterations: usize,
    pub max_iterations: usize,
    /// Solves handed to the ADMM fallback.
    pub fallbacks: usize,
    /// Largest correction applied to a solver input to keep ω̂(1) on a hard bound.
    pub max_clip: f64,
}

pub struct Controller {
    case: NetworkCase,
    steps: usize,
    /// Buses whose predicted frequency enters a constraint, with their row in `responses`.
    monitor: HashMap<usize, usize>,
    /// Per input slot: |monitor| × (N+1) response to a unit input at step 0.
    responses: Vec<DMatrix<f64>>,
    rows: Vec<Row>,
    row_of: HashMap<Row, usize>,
    /// Controlled slots carrying an input slack, in slot order.
    beta_slots: Vec<usize>,
    solver: DualActiveSet,
    /// Fallback when the active-set solve stalls or returns a poor KKT point.
    workspace: Admm,
    active: Vec<ActiveRow>,
    stats: ControllerStats,
}

const INF: f64 = f64::INFINITY;
const KKT_TOL: f64 = 1e-7;
/// Distance kept from a hard frequency bound by the one-step clip.
const CLIP_MARGIN: f64 = 1e-6;
const WALL_PASSES: usize = 4;
/// Load-bus frequencies are placed this far outside the deadband.
const THRESHOLD_MARGIN: f64 = 1e-9;

impl Controller {
    pub fn new(case: &NetworkCase) -> Result<Self, MpcError> {
        Self::with_settings(case, Settings { uniform_rho: true, ..Settings::default() })
    }

    pub fn with_settings(case: &NetworkCase, settings: Settings) -> Result<Self, MpcError> {
        let cfg = case.config();
        let (n, steps, period) = (case.n(), cfg.horizon.steps, cfg.horizon.period);
        let nu = cfg.controlled.len();
        let nw = cfg.freq_constrained.len();
        let mut monitored: Vec<usize> = cfg.controlled.iter().chain(&cfg.freq_constrained).copied().collect();
        monitored.sort_unstable();
        monitored.dedup();
        let monitor: HashMap<usize, usize> = monitored.iter().enumerate().map(|(r, &i)| (i, r)).collect();

        let zeros_m = vec![0.0; case.m()];
        let zeros_n = vec![0.0; n];
        let no_forecast = DMatrix::zeros(n, steps);
        let responses: Vec<DMatrix<f64>> = cfg
            .controlled
            .iter()
            .map(|&j| {
                let mut input = DMatrix::zeros(n, steps);
                input[(j, 0)] = 1.0;
                let (_, om) = predict_linear(case, period, &zeros_m, &zeros_n, &input, &no_forecast);
                DMatrix::from_fn(monitored.len(), steps + 1, |r, k| om[(monitored[r], k)])
            })
            .collect();

        let beta_slots: Vec<usize> = cfg
            .params
            .iter()
            .enumerate()
            .filter(|(_, p)| p.soft_input && p.slack_weight > 0.0 && (p.input_min.is_some() || p.input_max.is_some()))
            .map(|(s, _)| s)
            .collect();
        let gamma_off = nu * steps;
        let beta_off = gamma_off + nw * steps;
        let nvar = beta_off + beta_slots.len() * steps;
        let input_var = |s: usize, k: usize| s * steps + k;

        let mut rows = Vec::new();
        let mut trip = Vec::new();
        let omega_row = |r: usize, bus: usize, k: usize, trip: &mut Vec<(usize, usize, f64)>| -> bool {
            let mr = monitor[&bus];
            let mut any = false;
            for (s, h) in responses.iter().enumerate() {
                for l in 0..=k.min(steps - 1) {
                    let v = h[(mr, k - l)];
                    if v != 0.0 {
                        trip.push((r, input_var(s, l), v));
                        any = true;
                    }
                }
            }
            any
        };
        for (s, &i) in cfg.controlled.iter().enumerate() {
            for k in 0..steps {
                let r = rows.len();
                if omega_row(r, i, k, &mut trip) {
                    rows.push(Row::Branch(s, k));
                }
            }
        }
        for (w, &i) in cfg.freq_constrained.iter().enumerate() {
            // ω̂(N) of a load bus is not tied to the inputs
            let last = if case.buses()[i].inertia > 0.0 { steps } else { steps - 1 };
            for k in 1..=last {
                let g = gamma_off + w * steps + k - 1;
                for (row, sign) in [(Row::FreqLower(w, k), 1.0), (Row::FreqUpper(w, k), -1.0)] {
                    let r = rows.len();
                    omega_row(r, i, k, &mut trip);
                    trip.push((r, g, sign));
                    rows.push(row);
                }
            }
        }
        for s in 0..nu {
            for k in 0..steps {
                trip.push((rows.len(), input_var(s, k), 1.0));
                rows.push(Row::Input(s, k));
            }
        }
        for w in 0..nw {
            for k in 1..=steps {
                trip.push((rows.len(), gamma_off + w * steps + k - 1, 1.0));
                rows.push(Row::FreqSlack(w, k));
            }
        }
        for (b, &s) in beta_slots.iter().enumerate() {
            let p = &cfg.params[s];
            for k in 0..steps {
                let bv = beta_off + b * steps + k;
                trip.push((rows.len(), bv, 1.0));
                rows.push(Row::InputSlack(s, k));
                if p.input_min.is_some() {
                    trip.push((rows.len(), input_var(s, k), 1.0));
                    trip.push((rows.len(), bv, 1.0));
                    rows.push(Row::SlackLower(s, k));
                }
                if p.input_max.is_some() {
                    trip.push((rows.len(), input_var(s, k), 1.0));
                    trip.push((rows.len(), bv, -1.0));
                    rows.push(Row::SlackUpper(s, k));
                }
            }
        }

        let mut p_diag = vec![0.0; nvar];
        for (s, p) in cfg.params.iter().enumerate() {
            for k in 0..steps {
                p_diag[input_var(s, k)] = 2.0 * p.input_weight;
            }
        }
        for (w, &i) in cfg.freq_constrained.iter().enumerate() {
            let e = cfg.params_of(i).expect("I_w in I_u").freq_slack_weight;
            for k in 0..steps {
                p_diag[gamma_off + w * steps + k] = 2.0 * e;
            }
        }
        for (b, &s) in beta_slots.iter().enumerate() {
            for k in 0..steps {
                p_diag[beta_off + b * steps + k] = 2.0 * cfg.params[s].slack_weight;
            }
        }
        // placeholder bounds: everything free, slacks pinned
        let nrows = rows.len();
        let qp = QpProblem {
            p_diag,
            q: vec![0.0; nvar],
            a: CscMatrix::from_triplets(nrows, nvar, &trip),
            l: vec![-INF; nrows],
            u: vec![INF; nrows],
        };
        let solver = DualActiveSet::new(&qp, ActiveSetSettings::default())?;
        let workspace = Admm::new(&qp, settings)?;
        let row_of = rows.iter().enumerate().map(|(r, row)| (*row, r)).collect();
        Ok(Self {
            case: case.clone(),
            steps,
            monitor,
            responses,
            rows,
            row_of,
            beta_slots,
            solver,
            workspace,
            active: Vec::new(),
            stats: ControllerStats::default(),
        })
    }

    pub fn case(&self) -> &NetworkCase {
        &self.case
    }

    pub fn stats(&self) -> ControllerStats {
        self.stats
    }

    pub fn num_variables(&self) -> usize {
        self.workspace.problem().n()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Impulse response of bus `bus`'s predicted frequency to a unit input
    /// on controlled slot `slot` at step 0.
    pub fn impulse_response(&self, slot: usize, bus: usize) -> Option<Vec<f64>> {
        let r = *self.monitor.get(&bus)?;
        Some(self.responses.get(slot)?.row(r).iter().copied().collect())
    }

    /// Computes u(t) from the measured state and the forecast (n × N).
    pub fn control(&mut self, lambda0: &[f64], omega0: &[f64], forecast: &DMatrix<f64>) -> Result<DVector<f64>, MpcError> {
        let case = &self.case;
        let cfg = case.config();
        let (n, steps) = (case.n(), self.steps);
        if lambda0.len() != case.m() || omega0.len() != n || forecast.nrows() != n || forecast.ncols() != steps {
            return Err(MpcError::Dimension("state or forecast".into()));
        }
        let reference = generate_reference(case, lambda0, omega0, forecast)?.require_feasible()?;
        let plan = classify_branches(case, &reference.omega);
        let mut u = DVector::zeros(n);
        if plan.first_step_inactive() {
            self.stats.skipped += 1;
            self.active.clear();
            return Ok(u);
        }

        let (_, free) = predict_linear(case, cfg.horizon.period, lambda0, omega0, &DMatrix::zeros(n, steps), forecast);
        let kap: Vec<bool> = cfg
            .freq_constrained
            .iter()
            .zip(&cfg.bounds)
            .map(|(&i, b)| kappa(omega0[i], cfg.params_of(i).unwrap().soft_input, b))
            .collect();
        let nrows = self.rows.len();
        let (mut lo, mut hi) = (vec![-INF; nrows], vec![INF; nrows]);
        for (r, row) in self.rows.iter().enumerate() {
            match *row {
                Row::Branch(s, k) => {
                    let i = cfg.controlled[s];
                    let p = &cfg.params[s];
                    match plan.get(s, k) {
                        Branch::Upper => lo[r] = p.threshold_upper - free[(i, k)],
                        Branch::Lower => hi[r] = p.threshold_lower - free[(i, k)],
                        Branch::Inactive => {}
                    }
                }
                Row::FreqLower(w, k) => {
                    let b = &cfg.bounds[w];
                    let shift = if kap[w] { b.margin } else { 0.0 };
                    lo[r] = b.lower + shift - free[(cfg.freq_constrained[w], k)];
                }
                Row::FreqUpper(w, k) => {
                    let b = &cfg.bounds[w];
                    let shift = if kap[w] { b.margin } else { 0.0 };
                    hi[r] = b.upper - shift - free[(cfg.freq_constrained[w], k)];
                }
                Row::Input(s, k) => {
                    let p = &cfg.params[s];
                    let (mut a, mut b) = if p.soft_input {
                        (-INF, INF)
                    } else {
                        (p.input_min.unwrap_or(-INF), p.input_max.unwrap_or(INF))
                    };
                    match plan.get(s, k) {
                        Branch::Upper => b = b.min(0.0),
                        Branch::Lower => a = a.max(0.0),
                        Branch::Inactive => (a, b) = (0.0, 0.0),
                    }
                    if a > b {
                        return Err(MpcError::Dimension(format!(
                            "input limits of bus {} exclude the branch sign at step {k}",
                            case.buses()[cfg.controlled[s]].id
                        )));
                    }
                    (lo[r], hi[r]) = (a, b);
                }
                Row::FreqSlack(w, _) => (lo[r], hi[r]) = (0.0, if kap[w] { INF } else { 0.0 }),
                Row::InputSlack(..) => lo[r] = 0.0,
                Row::SlackLower(s, _) => lo[r] = cfg.params[s].input_min.unwrap(),
                Row::SlackUpper(s, _) => hi[r] = cfg.params[s].input_max.unwrap(),
            }
        }
        let sol = self.solve(&lo, &hi)?;
        let cfg = self.case.config();

        // first input from the projected identity rows: signs and zeros are exact
        for (s, &i) in cfg.controlled.iter().enumerate() {
            u[i] = sol.z[self.row_of[&Row::Input(s, 0)]];
        }
        self.enforce_first_step(lambda0, omega0, forecast, &plan, &kap, &mut u);
        Ok(u)
    }

    /// Removes solver round-off from the first input: hard frequency walls
    /// one step ahead and exact zeros when a load bus lands in its band.
    fn enforce_first_step(
        &mut self,
        lambda0: &[f64],
        omega0: &[f64],
        forecast: &DMatrix<f64>,
        plan: &super::BranchPlan,
        kap: &[bool],
        u: &mut DVector<f64>,
    ) {
        let case = &self.case;
        let cfg = case.config();
        let mut flow = vec![0.0; case.n()];
        case.nonlinear_outflow(lambda0, &mut flow);
        let period = cfg.horizon.period;
        // (bus, bounds, allowed input interval) for each hard wall
        let mut walls = Vec::new();
        for (w, (&i, b)) in cfg.freq_constrained.iter().zip(&cfg.bounds).enumerate() {
            let bus = &case.buses()[i];
            let Some(s) = cfg.controlled_slot(i) else { continue };
            if kap[w] || bus.inertia == 0.0 {
                continue;
            }
            let sign = match plan.get(s, 0) {
                Branch::Upper => (f64::NEG_INFINITY, 0.0),
                Branch::Lower => (0.0, INF),
                Branch::Inactive => (0.0, 0.0),
            };
            let a = period / bus.inertia;
            let margin = CLIP_MARGIN.min(0.25 * (b.upper - b.lower));
            let base = omega0[i] + a * (-bus.damping * omega0[i] - flow[i] + forecast[(i, 0)]);
            let clipped = u[i].clamp((b.lower + margin - base) / a, (b.upper - margin - base) / a);
            let clipped = clipped.clamp(sign.0, sign.1);
            self.stats.max_clip = self.stats.max_clip.max((clipped - u[i]).abs());
            u[i] = clipped;
            walls.push((i, b.lower, b.upper, margin, sign, a * (1.0 - 0.5 * period * bus.damping / bus.inertia)));
        }
        let p0: Vec<f64> = forecast.column(0).iter().copied().collect();
        // the Euler wall is off by O(T²); correct against the simulated plant
        if !walls.is_empty() {
            let state = SystemState { lambda: DVector::from_column_slice(lambda0), omega: DVector::from_column_slice(omega0) };
            let h = period / SUBSTEPS as f64;
            for _ in 0..WALL_PASSES {
                let Ok(next) = integrate(case, &state, u.as_slice(), &p0, h, SUBSTEPS, 0) else { break };
                let mut moved = false;
                for &(i, lower, upper, margin, sign, gain) in &walls {
                    let w = next.omega[i];
                    let shift = if w < lower + 0.5 * margin {
                        (lower + margin - w) / gain
                    } else if w > upper - 0.5 * margin {
                        (upper - margin - w) / gain
                    } else {
                        continue;
                    };
                    let corrected = (u[i] + shift).clamp(sign.0, sign.1);
                    if corrected != u[i] {
                        self.stats.max_clip = self.stats.max_clip.max((corrected - u[i]).abs());
                        u[i] = corrected;
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
        }
        // ω is affine in u_i on a load bus; pull it back onto the threshold it
        // crossed rather than dropping the whole input
        for (i, w) in algebraic_frequencies(case, lambda0, u.as_slice(), &p0) {
            let Some(p) = cfg.params_of(i) else { continue };
            // the optimum sits on the threshold; keep rounding from landing it inside
            let near = p.threshold_lower - THRESHOLD_MARGIN < w && w < p.threshold_upper + THRESHOLD_MARGIN;
            if u[i] == 0.0 || !near {
                continue;
            }
            let d = case.buses()[i].damping;
            let target = if u[i] > 0.0 { p.threshold_lower - THRESHOLD_MARGIN } else { p.threshold_upper + THRESHOLD_MARGIN };
            let snapped = u[i] + d * (target - w);
            u[i] = if snapped * u[i] > 0.0 { snapped } else { 0.0 };
        }
    }

    fn solve(&mut self, lo: &[f64], hi: &[f64]) -> Result<QpSolution, MpcError> {
        self.solver.update_bounds(lo, hi)?;
        // the active pattern is nearly fixed relative to the horizon, so the
        // previous working set is reused as is rather than shifted by a step
        let (sol, active) = self.solver.solve(&self.active)?;
        self.stats.solves += 1;
        self.stats.iterations += sol.iterations;
        self.stats.max_iterations = self.stats.max_iterations.max(sol.iterations);
        if sol.status == QpStatus::Optimal && sol.primal_residual.max(sol.dual_residual) <= KKT_TOL {
            self.active = active;
            return Ok(sol);
        }
        self.active.clear();
        self.stats.fallbacks += 1;
        self.workspace.update_bounds(lo, hi)?;
        self.workspace.cold_start();
        let fallback = self.workspace.solve()?;
        if fallback.status != QpStatus::Optimal {
            return Err(MpcError::Solver {
                status: fallback.status,
                iterations: fallback.iterations,
                dump: self.solver.problem().to_triplet_text(),
            });
        }
        Ok(fallback)
    }

    /// Number of controlled slots with an input slack variable.
    pub fn slack_slots(&self) -> &[usize] {
        &self.beta_slots
    }
}
