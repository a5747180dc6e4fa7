//! Closed-loop scenario runner: forecast, solve, apply, integrate, log.

mod report;
mod scenario;

pub use report::{fmt_sig, report, RunSummary};
pub use scenario::{forecast, ControllerKind, Disturbance, DisturbanceSpec, ForecastModel, Overrides, Scenario, ScenarioFile, Signal};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::dynamics::SUBSTEPS;
use crate::dynamics::{algebraic_frequencies, integrate, DynamicsError, SystemState};
use crate::mpc::{baseline_control, Controller, MpcError};
use crate::netcase::{CaseError, NetworkCase};
use crate::partition::{DistributedController, PartitionError};
use crate::steady_state::{energy, Equilibrium, SteadyStateError};

#[derive(Debug, Error)]
pub enum ControlFailure {
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

impl ControlFailure {
    /// Text dump of the QP that failed, when the solver produced one.
    pub fn dump(&self) -> Option<&str> {
        match self {
            ControlFailure::Mpc(MpcError::Solver { dump, .. })
            | ControlFailure::Partition(PartitionError::Control { source: MpcError::Solver { dump, .. }, .. }) => Some(dump),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    SteadyState(#[from] SteadyStateError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Setup(#[from] MpcError),
    #[error("control step {step} (t = {time} s): {source}")]
    Control { step: usize, time: f64, source: ControlFailure },
    #[error("log grids differ: {0}")]
    GridMismatch(String),
    #[error("{path}: {msg}")]
    Trace { path: String, msg: String },
}

/// Static description of a run, enough to recompute every metric from the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub label: String,
    pub controller: ControllerKind,
    pub period: f64,
    pub duration: f64,
    pub enable_time: f64,
    pub bus_ids: Vec<usize>,
    pub line_ids: Vec<usize>,
    /// I_u as bus positions with c_i and the threshold band.
    pub controlled: Vec<usize>,
    pub input_weights: Vec<f64>,
    pub thresholds: Vec<(f64, f64)>,
    /// I_ω as bus positions with the safe interval.
    pub freq_constrained: Vec<usize>,
    pub bounds: Vec<(f64, f64)>,
    /// ω^∞ of the injection at the end of the run.
    pub sync_freq: f64,
    /// ∫ Σ(p_i − p_i(0)) dt on the control grid.
    pub injection_deviation_integral: f64,
}

impl RunMeta {
    pub fn from_case(case: &NetworkCase, label: &str, controller: ControllerKind, duration: f64, enable_time: f64) -> Self {
        let cfg = case.config();
        Self {
            label: label.to_string(),
            controller,
            period: cfg.horizon.period,
            duration,
            enable_time,
            bus_ids: case.bus_ids(),
            line_ids: case.lines().iter().map(|l| l.id).collect(),
            controlled: cfg.controlled.clone(),
            input_weights: cfg.params.iter().map(|p| p.input_weight).collect(),
            thresholds: cfg.params.iter().map(|p| (p.threshold_lower, p.threshold_upper)).collect(),
            freq_constrained: cfg.freq_constrained.clone(),
            bounds: cfg.bounds.iter().map(|b| (b.lower, b.upper)).collect(),
            sync_freq: 0.0,
            injection_deviation_integral: 0.0,
        }
    }
}

/// State, input and energy at one control instant. Load-bus frequencies are
/// the algebraic values under the applied input.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub lambda: Vec<f64>,
    pub omega: Vec<f64>,
    pub u: Vec<f64>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub meta: RunMeta,
    pub rows: Vec<LogRow>,
}

impl RunLog {
    /// Per-bus flag over I_ω: true when ω_i is outside its safe interval.
    pub fn bound_flags(&self, row: &LogRow) -> Vec<bool> {
        self.meta
            .freq_constrained
            .iter()
            .zip(&self.meta.bounds)
            .map(|(&i, &(lo, hi))| row.omega[i] < lo || row.omega[i] > hi)
            .collect()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary::compute(self)
    }
}

enum Law {
    Open,
    Centralized(Box<Controller>),
    Distributed(DistributedController),
    Baseline,
}

fn initial_state(s: &Scenario, eq: &Equilibrium, p0: &DVector<f64>) -> SystemState {
    let case = &s.case;
    let mut omega = DVector::from_element(case.n(), eq.sync_freq);
    if s.initial_perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        for &i in case.inertial_buses() {
            omega[i] += rng.gen_range(-s.initial_perturbation..=s.initial_perturbation);
        }
    }
    let zero = vec![0.0; case.n()];
    for (i, w) in algebraic_frequencies(case, eq.angle_diffs.as_slice(), &zero, p0.as_slice()) {
        omega[i] = w;
    }
    SystemState { lambda: eq.angle_diffs.clone(), omega }
}

/// Runs the closed loop from the equilibrium of p(0).
pub fn run(s: &Scenario) -> Result<RunLog, HarnessError> {
    run_with_progress(s, |_, _| {})
}

/// [`run`] with a callback receiving (step, total steps) after each step.
pub fn run_with_progress(s: &Scenario, mut progress: impl FnMut(usize, usize)) -> Result<RunLog, HarnessError> {
    s.validate()?;
    let case = &s.case;
    let (n, period, horizon) = (case.n(), case.horizon().period, case.horizon().steps);
    let p0 = s.disturbance.injection(0.0);
    let eq0 = Equilibrium::compute(case, &p0)?;
    let eq_end = Equilibrium::compute(case, &s.disturbance.injection(s.duration))?;
    let mut state = initial_state(s, &eq0, &p0);

    let mut law = match s.controller {
        ControllerKind::None => Law::Open,
        ControllerKind::Centralized => Law::Centralized(Box::new(Controller::new(case)?)),
        ControllerKind::Distributed => {
            let part = s.partition.clone().expect("validated");
            Law::Distributed(DistributedController::new(case, part)?)
        }
        ControllerKind::ReferenceBaseline => Law::Baseline,
    };

    let last = (s.duration / period).round() as usize;
    let enable_step = (s.enable_time / period - 1e-9).ceil().max(0.0) as usize;
    let mut meta = RunMeta::from_case(case, &s.label, s.controller, s.duration, s.enable_time);
    meta.sync_freq = eq_end.sync_freq;
    let mut rows = Vec::with_capacity(last + 1);
    let mut dp_prev = 0.0;
    let mut dp_integral = 0.0;
    let zero = DVector::zeros(n);

    for k in 0..=last {
        let t = k as f64 * period;
        let p = s.disturbance.injection(t);
        let (lam, om) = (state.lambda.as_slice(), state.omega.as_slice());
        let fail = |source: ControlFailure| HarnessError::Control { step: k, time: t, source };
        let u = if k < enable_step {
            zero.clone()
        } else {
            match &mut law {
                Law::Open => zero.clone(),
                Law::Baseline => baseline_control(case, lam, om, p.as_slice()),
                Law::Centralized(c) => {
                    let fc = forecast(s.forecast, &s.disturbance, t, horizon, period);
                    c.control(lam, om, &fc).map_err(|e| fail(e.into()))?
                }
                Law::Distributed(d) => {
                    let fc = forecast(s.forecast, &s.disturbance, t, horizon, period);
                    d.control(case, lam, om, &fc).map_err(|e| fail(e.into()))?
                }
            }
        };
        for (i, w) in algebraic_frequencies(case, lam, u.as_slice(), p.as_slice()) {
            state.omega[i] = w;
        }
        let dp = (&p - &p0).sum();
        if k > 0 {
            dp_integral += 0.5 * period * (dp + dp_prev);
        }
        dp_prev = dp;
        rows.push(LogRow {
            t,
            lambda: state.lambda.as_slice().to_vec(),
            omega: state.omega.as_slice().to_vec(),
            u: u.as_slice().to_vec(),
            energy: energy(case, &eq_end, state.lambda.as_slice(), state.omega.as_slice()),
        });
        if k < last {
            state = integrate(case, &state, u.as_slice(), p.as_slice(), period / SUBSTEPS as f64, SUBSTEPS, k * SUBSTEPS)?;
        }
        progress(k, last);
    }
    meta.injection_deviation_integral = dp_integral;
    Ok(RunLog { meta, rows })
}
