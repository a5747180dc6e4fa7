//! Network case: topology, physical parameters and controller configuration.
//!
//! A [`NetworkCase`] is immutable once constructed and every constructor path
//! runs the full validation, so downstream modules can rely on the invariants
//! (connected graph, positive damping, at least one inertial bus, consistent
//! controller sets) without re-checking them.

mod format;

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use format::{parse_case, write_case};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid case: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CaseError> {
    Err(CaseError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    /// M_i, zero for load buses.
    pub inertia: f64,
    /// E_i, strictly positive.
    pub damping: f64,
    /// p_i(0) in per-unit.
    pub base_injection: f64,
}

/// Transmission line. `from` and `to` are bus *positions* in
/// [`NetworkCase::buses`]; `from` is the positive end of the edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
}

/// Per controlled bus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    /// c_i, weight on u².
    pub input_weight: f64,
    /// d_i, weight on the magnitude slack β².
    pub slack_weight: f64,
    /// e_i, weight on the frequency slack γ².
    pub freq_slack_weight: f64,
    /// ξ_i: `true` makes the magnitude bounds soft.
    pub soft_input: bool,
    pub input_min: Option<f64>,
    pub input_max: Option<f64>,
    /// γ̄_i of the reference controller.
    pub gain_upper: f64,
    /// γ̲_i of the reference controller.
    pub gain_lower: f64,
    pub threshold_lower: f64,
    pub threshold_upper: f64,
}

impl ControlParams {
    /// Saturation `sat(a; ξ, u_min, u_max)`; only hard limits clip.
    pub fn saturate(&self, a: f64) -> f64 {
        if self.soft_input {
            return a;
        }
        let mut v = a;
        if let Some(lo) = self.input_min {
            if v <= lo {
                v = lo;
            }
        }
        if let Some(hi) = self.input_max {
            if v >= hi {
                v = hi;
            }
        }
        v
    }

    pub fn in_band(&self, omega: f64) -> bool {
        self.threshold_lower < omega && omega < self.threshold_upper
    }
}

/// Safe frequency interval and attraction margin for a bus in I_ω.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBounds {
    pub lower: f64,
    pub upper: f64,
    /// δ_i, 0 < δ_i < upper − lower.
    pub margin: f64,
}

impl FrequencyBounds {
    pub fn contains(&self, omega: f64) -> bool {
        self.lower <= omega && omega <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub steps: usize,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    /// I_u as sorted bus positions.
    pub controlled: Vec<usize>,
    /// Aligned with `controlled`.
    pub params: Vec<ControlParams>,
    /// I_ω as sorted bus positions.
    pub freq_constrained: Vec<usize>,
    /// Aligned with `freq_constrained`.
    pub bounds: Vec<FrequencyBounds>,
    pub horizon: Horizon,
}

impl ControlConfig {
    pub fn controlled_slot(&self, bus: usize) -> Option<usize> {
        self.controlled.binary_search(&bus).ok()
    }

    pub fn freq_slot(&self, bus: usize) -> Option<usize> {
        self.freq_constrained.binary_search(&bus).ok()
    }

    pub fn params_of(&self, bus: usize) -> Option<&ControlParams> {
        self.controlled_slot(bus).map(|s| &self.params[s])
    }

    pub fn bounds_of(&self, bus: usize) -> Option<&FrequencyBounds> {
        self.freq_slot(bus).map(|s| &self.bounds[s])
    }

    /// Sets ω̄ = −ω̲ = `bound` and thresholds ±`threshold` on every bus of I_ω.
    pub fn with_symmetric_bounds(mut self, bound: f64, threshold: f64) -> Self {
        for (slot, &bus) in self.freq_constrained.iter().enumerate() {
            let b = &mut self.bounds[slot];
            b.lower = -bound;
            b.upper = bound;
            if b.margin >= 2.0 * bound {
                b.margin = 0.1 * bound;
            }
            if let Some(c) = self.controlled_slot(bus) {
                self.params[c].threshold_lower = -threshold;
                self.params[c].threshold_upper = threshold;
            }
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct NetworkCase {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    config: ControlConfig,
    inertial: Vec<usize>,
    algebraic: Vec<usize>,
    /// Per bus: (line, +1 if the bus is the positive end else -1).
    incident: Vec<Vec<(usize, f64)>>,
}

impl NetworkCase {
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>, config: ControlConfig) -> Result<Self, CaseError> {
        validate(&buses, &lines, &config)?;
        let inertial: Vec<usize> = (0..buses.len()).filter(|&i| buses[i].inertia > 0.0).collect();
        let algebraic: Vec<usize> = (0..buses.len()).filter(|&i| buses[i].inertia == 0.0).collect();
        let mut incident = vec![Vec::new(); buses.len()];
        for (k, l) in lines.iter().enumerate() {
            incident[l.from].push((k, 1.0));
            incident[l.to].push((k, -1.0));
        }
        Ok(Self { buses, lines, config, inertial, algebraic, incident })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CaseError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| CaseError::Io { path: path.display().to_string(), source })?;
        parse_case(&text)
    }

    pub fn n(&self) -> usize {
        self.buses.len()
    }

    pub fn m(&self) -> usize {
        self.lines.len()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn config(&self) -> &ControlConfig {
        &self.config
    }

    pub fn horizon(&self) -> Horizon {
        self.config.horizon
    }

    /// Buses with M_i > 0 (the set 𝔊), ascending.
    pub fn inertial_buses(&self) -> &[usize] {
        &self.inertial
    }

    /// Buses with M_i = 0, ascending.
    pub fn algebraic_buses(&self) -> &[usize] {
        &self.algebraic
    }

    pub fn incident_lines(&self, bus: usize) -> &[(usize, f64)] {
        &self.incident[bus]
    }

    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus_ids(&self) -> Vec<usize> {
        self.buses.iter().map(|b| b.id).collect()
    }

    pub fn base_injections(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.buses.iter().map(|b| b.base_injection))
    }

    pub fn damping(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.buses.iter().map(|b| b.damping))
    }

    /// Replace the controller configuration, re-running validation.
    pub fn with_config(&self, config: ControlConfig) -> Result<Self, CaseError> {
        Self::new(self.buses.clone(), self.lines.clone(), config)
    }

    /// D: row k has +1 at the positive end of line k and −1 at the negative end.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.m(), self.n());
        for (k, l) in self.lines.iter().enumerate() {
            d[(k, l.from)] = 1.0;
            d[(k, l.to)] = -1.0;
        }
        d
    }

    /// L = Dᵀ Y_b D.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut lap = DMatrix::zeros(self.n(), self.n());
        for l in &self.lines {
            let b = l.susceptance;
            lap[(l.from, l.from)] += b;
            lap[(l.to, l.to)] += b;
            lap[(l.from, l.to)] -= b;
            lap[(l.to, l.from)] -= b;
        }
        lap
    }

    /// D x for a bus vector `x` (edge differences).
    pub fn edge_differences(&self, x: &[f64], out: &mut [f64]) {
        for (k, l) in self.lines.iter().enumerate() {
            out[k] = x[l.from] - x[l.to];
        }
    }

    /// Dᵀ Y_b x for a line vector `x` (net flow leaving each bus).
    pub fn nodal_outflow(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, l) in self.lines.iter().enumerate() {
            let f = l.susceptance * x[k];
            out[l.from] += f;
            out[l.to] -= f;
        }
    }

    /// Dᵀ Y_b sin λ.
    pub fn nonlinear_outflow(&self, lambda: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, l) in self.lines.iter().enumerate() {
            let f = l.susceptance * lambda[k].sin();
            out[l.from] += f;
            out[l.to] -= f;
        }
    }
}

pub(crate) fn is_connected(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> bool {
    if n == 0 {
        return false;
    }
    // union-find
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components == 1
}

fn validate(buses: &[Bus], lines: &[Line], config: &ControlConfig) -> Result<(), CaseError> {
    let n = buses.len();
    if n == 0 {
        return invalid("case has no buses");
    }
    let mut ids = BTreeSet::new();
    for b in buses {
        if !ids.insert(b.id) {
            return invalid(format!("duplicate bus id {}", b.id));
        }
        if !(b.damping > 0.0) {
            return invalid(format!("damping must be positive (bus {})", b.id));
        }
        if !(b.inertia >= 0.0) {
            return invalid(format!("inertia must be non-negative (bus {})", b.id));
        }
        if !b.base_injection.is_finite() {
            return invalid(format!("injection must be finite (bus {})", b.id));
        }
    }
    if !buses.iter().any(|b| b.inertia > 0.0) {
        return invalid("at least one bus must have positive inertia");
    }
    let mut pairs = BTreeSet::new();
    for l in lines {
        if l.from >= n || l.to >= n {
            return invalid(format!("line {} references an unknown bus", l.id));
        }
        if l.from == l.to {
            return invalid(format!("line {} is a self-loop", l.id));
        }
        if !(l.susceptance > 0.0) {
            return invalid(format!("susceptance must be positive (line {})", l.id));
        }
        if !pairs.insert((l.from.min(l.to), l.from.max(l.to))) {
            return invalid(format!("line {} duplicates an existing bus pair", l.id));
        }
    }
    if !is_connected(n, lines.iter().map(|l| (l.from, l.to))) {
        return invalid("network graph is not connected");
    }

    let id = |i: usize| buses[i].id;
    let sorted_unique = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
    if !sorted_unique(&config.controlled) || !sorted_unique(&config.freq_constrained) {
        return invalid("controller sets must be sorted and duplicate-free");
    }
    if config.controlled.iter().any(|&i| i >= n) || config.freq_constrained.iter().any(|&i| i >= n) {
        return invalid("controller set references an unknown bus");
    }
    if config.params.len() != config.controlled.len() {
        return invalid("every controlled bus needs a parameter row");
    }
    if config.bounds.len() != config.freq_constrained.len() {
        return invalid("every frequency-constrained bus needs a bound row");
    }
    for &i in &config.freq_constrained {
        if config.controlled_slot(i).is_none() {
            return invalid(format!("frequency-constrained bus {} is not controlled", id(i)));
        }
    }
    for (&i, p) in config.controlled.iter().zip(&config.params) {
        if !(p.input_weight > 0.0) || !(p.freq_slack_weight > 0.0) || !(p.slack_weight >= 0.0) {
            return invalid(format!("weights must satisfy c > 0, d >= 0, e > 0 (bus {})", id(i)));
        }
        if !(p.gain_upper > 0.0 && p.gain_lower > 0.0) {
            return invalid(format!("reference gains must be positive (bus {})", id(i)));
        }
        if !(p.threshold_lower < 0.0 && 0.0 < p.threshold_upper) {
            return invalid(format!("thresholds must bracket zero (bus {})", id(i)));
        }
        if (!p.soft_input || p.slack_weight > 0.0) && (p.input_min.is_none() || p.input_max.is_none()) {
            return invalid(format!("input bounds are required when xi = 0 or d > 0 (bus {})", id(i)));
        }
        if let (Some(lo), Some(hi)) = (p.input_min, p.input_max) {
            if !(lo < hi) {
                return invalid(format!("input bounds must satisfy u_min < u_max (bus {})", id(i)));
            }
        }
    }
    for (&i, b) in config.freq_constrained.iter().zip(&config.bounds) {
        let p = config.params_of(i).expect("checked above");
        if !(b.lower < p.threshold_lower && p.threshold_upper < b.upper) {
            return invalid(format!(
                "bounds must satisfy lower < threshold_lower < 0 < threshold_upper < upper (bus {})",
                id(i)
            ));
        }
        if !(b.margin > 0.0 && b.margin < b.upper - b.lower) {
            return invalid(format!("margin must lie in (0, upper - lower) (bus {})", id(i)));
        }
    }
    if config.horizon.steps == 0 || !(config.horizon.period > 0.0) {
        return invalid("horizon needs steps >= 1 and period > 0");
    }
    Ok(())
}
