//! Full (non-condensed) convexified problem over (Λ̂, Ω̂, Û, B̂, Γ̂).

use nalgebra::DMatrix;

use super::{classify_branches, kappa, Branch, BranchPlan, MpcError};
use crate::netcase::NetworkCase;
use crate::qp::{CscMatrix, QpProblem};
use crate::refgen::{RefgenError, ReferenceTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Lambda,
    Omega,
    Input,
    InputSlack,
    FreqSlack,
}

/// Flat positions of the decision variables.
///
/// Λ̂ (k = 0..N) then Ω̂ (k = 0..N), both step-major, then Û and B̂ over
/// I_u slots (k = 0..N−1), then Γ̂ over I_ω slots (k = 1..N).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub m: usize,
    pub n: usize,
    pub nu: usize,
    pub nw: usize,
    pub steps: usize,
}

impl Layout {
    fn omega_off(&self) -> usize {
        self.m * (self.steps + 1)
    }

    fn input_off(&self) -> usize {
        self.omega_off() + self.n * (self.steps + 1)
    }

    fn beta_off(&self) -> usize {
        self.input_off() + self.nu * self.steps
    }

    fn gamma_off(&self) -> usize {
        self.beta_off() + self.nu * self.steps
    }

    pub fn len(&self) -> usize {
        self.gamma_off() + self.nw * self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lambda(&self, edge: usize, k: usize) -> usize {
        k * self.m + edge
    }

    pub fn omega(&self, bus: usize, k: usize) -> usize {
        self.omega_off() + k * self.n + bus
    }

    pub fn input(&self, slot: usize, k: usize) -> usize {
        self.input_off() + k * self.nu + slot
    }

    pub fn beta(&self, slot: usize, k: usize) -> usize {
        self.beta_off() + k * self.nu + slot
    }

    /// γ at step k ∈ [1, N].
    pub fn gamma(&self, slot: usize, k: usize) -> usize {
        debug_assert!(k >= 1);
        self.gamma_off() + (k - 1) * self.nw + slot
    }

    /// Inverse map: (kind, bus/edge/slot, step).
    pub fn locate(&self, idx: usize) -> Option<(VarKind, usize, usize)> {
        let split = |off: usize, width: usize| ((idx - off) % width, (idx - off) / width);
        if idx < self.omega_off() {
            let (e, k) = split(0, self.m);
            Some((VarKind::Lambda, e, k))
        } else if idx < self.input_off() {
            let (i, k) = split(self.omega_off(), self.n);
            Some((VarKind::Omega, i, k))
        } else if idx < self.beta_off() {
            let (s, k) = split(self.input_off(), self.nu);
            Some((VarKind::Input, s, k))
        } else if idx < self.gamma_off() {
            let (s, k) = split(self.beta_off(), self.nu);
            Some((VarKind::InputSlack, s, k))
        } else if idx < self.len() {
            let (s, k) = split(self.gamma_off(), self.nw);
            Some((VarKind::FreqSlack, s, k + 1))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexifiedProblem {
    pub qp: QpProblem,
    pub layout: Layout,
    pub branch_plan: BranchPlan,
    pub kappa: Vec<bool>,
}

impl ConvexifiedProblem {
    /// Largest constraint violation of a stacked point.
    pub fn residual(&self, point: &[f64]) -> f64 {
        self.qp.max_violation(point)
    }

    /// Splits a stacked point into (Λ̂, Ω̂, Û) with Û over all n buses.
    pub fn unpack(&self, x: &[f64], case: &NetworkCase) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let l = &self.layout;
        let lam = DMatrix::from_fn(l.m, l.steps + 1, |e, k| x[l.lambda(e, k)]);
        let om = DMatrix::from_fn(l.n, l.steps + 1, |i, k| x[l.omega(i, k)]);
        let mut u = DMatrix::zeros(l.n, l.steps);
        for (s, &i) in case.config().controlled.iter().enumerate() {
            for k in 0..l.steps {
                u[(i, k)] = x[l.input(s, k)];
            }
        }
        (lam, om, u)
    }
}

struct Rows {
    trip: Vec<(usize, usize, f64)>,
    l: Vec<f64>,
    u: Vec<f64>,
}

impl Rows {
    fn push(&mut self, entries: &[(usize, f64)], lo: f64, hi: f64) {
        let r = self.l.len();
        self.trip.extend(entries.iter().map(|&(c, v)| (r, c, v)));
        self.l.push(lo);
        self.u.push(hi);
    }
}

const INF: f64 = f64::INFINITY;

/// Builds Q_cvx for the measured state (λ0, ω0) and forecast (n × N),
/// anchored at a feasible reference.
pub fn build_qcvx(
    case: &NetworkCase,
    lambda0: &[f64],
    omega0: &[f64],
    forecast: &DMatrix<f64>,
    reference: &ReferenceTrajectory,
) -> Result<ConvexifiedProblem, MpcError> {
    if !reference.feasible {
        return Err(RefgenError::Infeasible(reference.violation.clone().unwrap_or_default()).into());
    }
    let cfg = case.config();
    let (n, m) = (case.n(), case.m());
    let steps = cfg.horizon.steps;
    let period = cfg.horizon.period;
    if forecast.ncols() != steps || forecast.nrows() != n || lambda0.len() != m || omega0.len() != n {
        return Err(MpcError::Dimension("state or forecast".into()));
    }
    let layout = Layout { m, n, nu: cfg.controlled.len(), nw: cfg.freq_constrained.len(), steps };
    let plan = classify_branches(case, &reference.omega);
    let kap: Vec<bool> = cfg
        .freq_constrained
        .iter()
        .zip(&cfg.bounds)
        .map(|(&i, b)| kappa(omega0[i], cfg.params_of(i).unwrap().soft_input, b))
        .collect();

    let mut rows = Rows { trip: Vec::new(), l: Vec::new(), u: Vec::new() };
    // initial conditions
    for e in 0..m {
        let v = lambda0[e].sin();
        rows.push(&[(layout.lambda(e, 0), 1.0)], v, v);
    }
    for &i in case.inertial_buses() {
        rows.push(&[(layout.omega(i, 0), 1.0)], omega0[i], omega0[i]);
    }
    // dynamics
    for k in 0..steps {
        for (e, line) in case.lines().iter().enumerate() {
            rows.push(
                &[
                    (layout.lambda(e, k + 1), 1.0),
                    (layout.lambda(e, k), -1.0),
                    (layout.omega(line.from, k), -period),
                    (layout.omega(line.to, k), period),
                ],
                0.0,
                0.0,
            );
        }
        for (i, bus) in case.buses().iter().enumerate() {
            let input = cfg.controlled_slot(i).map(|s| layout.input(s, k));
            let p = forecast[(i, k)];
            let mut entries = Vec::new();
            if bus.inertia > 0.0 {
                // ω̂(k+1) − ω̂(k) + (T/M)(Eω̂(k) + DᵀYλ̂(k) − û(k)) = (T/M) p̂(k)
                let a = period / bus.inertia;
                entries.push((layout.omega(i, k + 1), 1.0));
                entries.push((layout.omega(i, k), -1.0 + a * bus.damping));
                for &(e, sgn) in case.incident_lines(i) {
                    entries.push((layout.lambda(e, k), a * sgn * case.lines()[e].susceptance));
                }
                if let Some(c) = input {
                    entries.push((c, -a));
                }
                rows.push(&entries, a * p, a * p);
            } else {
                // −Eω̂(k) − DᵀYλ̂(k) + û(k) = −p̂(k)
                entries.push((layout.omega(i, k), -bus.damping));
                for &(e, sgn) in case.incident_lines(i) {
                    entries.push((layout.lambda(e, k), -sgn * case.lines()[e].susceptance));
                }
                if let Some(c) = input {
                    entries.push((c, 1.0));
                }
                rows.push(&entries, -p, -p);
            }
        }
    }
    // input magnitude and its slack
    for (s, par) in cfg.params.iter().enumerate() {
        for k in 0..steps {
            let (u, b) = (layout.input(s, k), layout.beta(s, k));
            let lo = par.input_min.unwrap_or(-INF);
            let hi = par.input_max.unwrap_or(INF);
            if par.soft_input {
                if lo.is_finite() {
                    rows.push(&[(u, 1.0), (b, 1.0)], lo, INF);
                }
                if hi.is_finite() {
                    rows.push(&[(u, 1.0), (b, -1.0)], -INF, hi);
                }
            } else if lo.is_finite() || hi.is_finite() {
                rows.push(&[(u, 1.0)], lo, hi);
            }
            rows.push(&[(b, 1.0)], 0.0, INF);
        }
    }
    // frequency bounds for k ∈ [1, N]
    for (s, (&i, fb)) in cfg.freq_constrained.iter().zip(&cfg.bounds).enumerate() {
        for k in 1..=steps {
            let (w, g) = (layout.omega(i, k), layout.gamma(s, k));
            if kap[s] {
                rows.push(&[(w, 1.0), (g, 1.0)], fb.lower + fb.margin, INF);
                rows.push(&[(w, 1.0), (g, -1.0)], -INF, fb.upper - fb.margin);
            } else {
                rows.push(&[(w, 1.0)], fb.lower, fb.upper);
            }
            rows.push(&[(g, 1.0)], 0.0, INF);
        }
    }
    // convexified stability set
    for (s, (&i, par)) in cfg.controlled.iter().zip(&cfg.params).enumerate() {
        for k in 0..steps {
            let (w, u) = (layout.omega(i, k), layout.input(s, k));
            match plan.get(s, k) {
                Branch::Upper => {
                    rows.push(&[(w, 1.0)], par.threshold_upper, INF);
                    rows.push(&[(u, 1.0)], -INF, 0.0);
                }
                Branch::Lower => {
                    rows.push(&[(w, 1.0)], -INF, par.threshold_lower);
                    rows.push(&[(u, 1.0)], 0.0, INF);
                }
                Branch::Inactive => rows.push(&[(u, 1.0)], 0.0, 0.0),
            }
        }
    }

    let nz = layout.len();
    let mut p_diag = vec![0.0; nz];
    for (s, par) in cfg.params.iter().enumerate() {
        for k in 0..steps {
            p_diag[layout.input(s, k)] = 2.0 * par.input_weight;
            p_diag[layout.beta(s, k)] = 2.0 * par.slack_weight;
        }
    }
    for (s, &i) in cfg.freq_constrained.iter().enumerate() {
        let e = cfg.params_of(i).unwrap().freq_slack_weight;
        for k in 1..=steps {
            p_diag[layout.gamma(s, k)] = 2.0 * e;
        }
    }
    let nrows = rows.l.len();
    let qp = QpProblem {
        p_diag,
        q: vec![0.0; nz],
        a: CscMatrix::from_triplets(nrows, nz, &rows.trip),
        l: rows.l,
        u: rows.u,
    };
    Ok(ConvexifiedProblem { qp, layout, branch_plan: plan, kappa: kap })
}

/// Stacks the reference (Λ̂ref, Ω̂ref, Ûref, B̂, Γ̂) into a point of Q_cvx.
pub fn qualification_point(case: &NetworkCase, layout: &Layout, reference: &ReferenceTrajectory) -> Vec<f64> {
    let cfg = case.config();
    let mut x = vec![0.0; layout.len()];
    for k in 0..=layout.steps {
        for e in 0..layout.m {
            x[layout.lambda(e, k)] = reference.lambda[(e, k)];
        }
        for i in 0..layout.n {
            x[layout.omega(i, k)] = reference.omega[(i, k)];
        }
    }
    for (s, &i) in cfg.controlled.iter().enumerate() {
        for k in 0..layout.steps {
            x[layout.input(s, k)] = reference.input[(i, k)];
            x[layout.beta(s, k)] = reference.beta[(s, k)];
        }
    }
    for s in 0..layout.nw {
        for k in 1..=layout.steps {
            x[layout.gamma(s, k)] = reference.gamma[(s, k - 1)];
        }
    }
    x
}
