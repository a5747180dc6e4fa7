//! Scenario files, disturbance signals and injection forecasts.
//!
//! ```toml
//! case = "ieee39.case"              # relative to the scenario file
//! partition = "ieee39.partition"    # required for `distributed`
//! controller = "distributed"        # none | centralized | distributed | reference_baseline
//! duration = 40.0
//! enable_time = 0.0
//! seed = 0
//! forecast = "linear_growth"        # exact | linear_growth
//!
//! [disturbance]
//! kind = "sinusoidal"               # constant | sinusoidal
//! amplitude = 0.25
//! period = 40.0
//! cutoff = 20.0
//! buses = [1, 2, 3]
//!
//! [overrides]                       # optional
//! bound = 0.1
//! threshold = 0.05
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::netcase::NetworkCase;
use crate::partition::{validate_partition, RegionPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    None,
    Centralized,
    Distributed,
    ReferenceBaseline,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::None => "none",
            ControllerKind::Centralized => "centralized",
            ControllerKind::Distributed => "distributed",
            ControllerKind::ReferenceBaseline => "reference_baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastModel {
    #[default]
    Exact,
    LinearGrowth,
}

/// Multiplicative factor δ(t) applied as p_i(t) = (1 + δ(t)) p_i(0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    #[default]
    Constant,
    /// δ(t) = a sin(2πt/P) for t < t_c, zero afterwards.
    Sinusoidal { amplitude: f64, period: f64, cutoff: f64 },
}

impl Signal {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Signal::Constant => 0.0,
            Signal::Sinusoidal { amplitude, period, cutoff } => {
                if t < cutoff {
                    amplitude * (2.0 * std::f64::consts::PI * t / period).sin()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Per-bus injection signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    pub signal: Signal,
    /// Bus positions carrying the factor; the rest stay at p_i(0).
    pub buses: Vec<usize>,
    pub base: DVector<f64>,
}

impl Disturbance {
    pub fn constant(case: &NetworkCase) -> Self {
        Self { signal: Signal::Constant, buses: Vec::new(), base: case.base_injections() }
    }

    pub fn injection(&self, t: f64) -> DVector<f64> {
        let mut p = self.base.clone();
        let f = self.signal.factor(t);
        for &i in &self.buses {
            p[i] *= 1.0 + f;
        }
        p
    }
}

/// Forecast P̂ ∈ R^{n×N} issued at time `t`.
pub fn forecast(model: ForecastModel, p: &Disturbance, t: f64, steps: usize, period: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(p.base.len(), steps);
    for k in 0..steps {
        let tau = k as f64 * period;
        let scale = match model {
            ForecastModel::Exact => 1.0,
            ForecastModel::LinearGrowth => 1.0 + tau,
        };
        out.column_mut(k).copy_from(&(p.injection(t + tau) * scale));
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Symmetric frequency bound on I_ω.
    pub bound: Option<f64>,
    /// Symmetric threshold; defaults to half the bound when only `bound` is set.
    pub threshold: Option<f64>,
    pub period: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    #[serde(flatten)]
    pub signal: Signal,
    /// Bus ids; empty means every bus.
    #[serde(default)]
    pub buses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub case: PathBuf,
    pub partition: Option<PathBuf>,
    pub controller: ControllerKind,
    pub duration: f64,
    #[serde(default)]
    pub enable_time: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub forecast: ForecastModel,
    pub disturbance: Option<DisturbanceSpec>,
    #[serde(default)]
    pub overrides: Overrides,
    /// Half-width of a seeded uniform perturbation of the initial inertial frequencies.
    #[serde(default)]
    pub initial_perturbation: f64,
}

/// Fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub case: NetworkCase,
    pub partition: Option<RegionPartition>,
    pub controller: ControllerKind,
    pub duration: f64,
    pub enable_time: f64,
    pub seed: u64,
    pub forecast: ForecastModel,
    pub disturbance: Disturbance,
    pub initial_perturbation: f64,
}

impl Scenario {
    /// Builds a scenario around an in-memory case with no disturbance.
    pub fn new(label: impl Into<String>, case: NetworkCase, controller: ControllerKind, duration: f64) -> Self {
        let disturbance = Disturbance::constant(&case);
        Self {
            label: label.into(),
            case,
            partition: None,
            controller,
            duration,
            enable_time: 0.0,
            seed: 0,
            forecast: ForecastModel::Exact,
            disturbance,
            initial_perturbation: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Scenario(m.to_string()));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if !(self.enable_time >= 0.0 && self.enable_time.is_finite()) {
            return bad("enable_time must be non-negative");
        }
        if !(self.initial_perturbation >= 0.0) {
            return bad("initial_perturbation must be non-negative");
        }
        if let Signal::Sinusoidal { amplitude, period, cutoff } = self.disturbance.signal {
            if !(amplitude.is_finite() && period > 0.0 && cutoff >= 0.0) {
                return bad("sinusoidal disturbance needs a finite amplitude, positive period and non-negative cutoff");
            }
        }
        match (&self.partition, self.controller) {
            (None, ControllerKind::Distributed) => bad("the distributed controller requires a partition"),
            (Some(p), _) => validate_partition(&self.case, p).map_err(HarnessError::Partition),
            _ => Ok(()),
        }
    }

    pub fn from_file_data(file: ScenarioFile, base_dir: &Path, label: String) -> Result<Self, HarnessError> {
        let mut case = NetworkCase::load(base_dir.join(&file.case))?;
        let ov = &file.overrides;
        if ov.bound.is_some() || ov.threshold.is_some() || ov.period.is_some() || ov.steps.is_some() {
            let mut cfg = case.config().clone();
            if let Some(b) = ov.bound {
                cfg = cfg.with_symmetric_bounds(b, ov.threshold.unwrap_or(0.5 * b));
            } else if ov.threshold.is_some() {
                return Err(HarnessError::Scenario("threshold override requires bound".into()));
            }
            if let Some(p) = ov.period {
                cfg.horizon.period = p;
            }
            if let Some(s) = ov.steps {
                cfg.horizon.steps = s;
            }
            case = case.with_config(cfg)?;
        }
        let partition = match &file.partition {
            Some(p) => Some(RegionPartition::load(base_dir.join(p), &case)?),
            None => None,
        };
        let disturbance = match file.disturbance {
            None => Disturbance::constant(&case),
            Some(spec) => {
                let buses = if spec.buses.is_empty() {
                    (0..case.n()).collect()
                } else {
                    spec.buses
                        .iter()
                        .map(|&id| case.bus_index(id).ok_or_else(|| HarnessError::Scenario(format!("disturbance references unknown bus {id}"))))
                        .collect::<Result<Vec<_>, _>>()?
                };
                Disturbance { signal: spec.signal, buses, base: case.base_injections() }
            }
        };
        let s = Self {
            label,
            case,
            partition,
            controller: file.controller,
            duration: file.duration,
            enable_time: file.enable_time,
            seed: file.seed,
            forecast: file.forecast,
            disturbance,
            initial_perturbation: file.initial_perturbation,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn parse(text: &str, base_dir: &Path, label: impl Into<String>) -> Result<Self, HarnessError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        Self::from_file_data(file, base_dir, label.into())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let label = path.file_stem().map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned());
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")), label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::tests::two_bus;

    fn sinus(case: &NetworkCase) -> Disturbance {
        Disturbance {
            signal: Signal::Sinusoidal { amplitude: 0.25, period: 40.0, cutoff: 20.0 },
            buses: vec![1],
            base: case.base_injections(),
        }
    }

    #[test]
    fn sinusoid_profile() {
        let s = Signal::Sinusoidal { amplitude: 0.25, period: 40.0, cutoff: 20.0 };
        assert!((s.factor(10.0) - 0.25).abs() <= 1e-15);
        assert_eq!(s.factor(20.0), 0.0);
        assert_eq!(s.factor(30.0), 0.0);
        let c = two_bus();
        let d = sinus(&c);
        let p = d.injection(10.0);
        assert_eq!(p[0], c.buses()[0].base_injection);
        assert!((p[1] - 1.25 * c.buses()[1].base_injection).abs() <= 1e-15);
    }

    #[test]
    fn forecast_first_column_is_exact() {
        let c = two_bus();
        let d = sinus(&c);
        for model in [ForecastModel::Exact, ForecastModel::LinearGrowth] {
            let f = forecast(model, &d, 3.7, 20, 0.001);
            assert_eq!(f.column(0).into_owned(), d.injection(3.7));
        }
    }

    #[test]
    fn forecast_models_on_constant_injection() {
        let mut c = Disturbance::constant(&two_bus());
        c.base = DVector::from_vec(vec![1.0, 1.0]);
        let exact = forecast(ForecastModel::Exact, &c, 0.0, 151, 0.001);
        assert!(exact.column_iter().all(|col| col == c.base));
        let lin = forecast(ForecastModel::LinearGrowth, &c, 0.0, 151, 0.001);
        assert!((lin[(0, 150)] - 1.15).abs() <= 1e-12);
    }

    #[test]
    fn scenario_invariants() {
        let c = two_bus();
        let mut s = Scenario::new("t", c, ControllerKind::Distributed, 1.0);
        assert!(s.validate().is_err());
        s.controller = ControllerKind::None;
        assert!(s.validate().is_ok());
        s.duration = 0.0;
        assert!(s.validate().is_err());
        s.duration = 1.0;
        s.enable_time = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn scenario_toml_parses() {
        let dir = std::env::temp_dir().join(format!("freqmpc-scn-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("two.case"), crate::netcase::write_case(&two_bus())).unwrap();
        let text = r#"
            case = "two.case"
            controller = "centralized"
            duration = 2.0
            forecast = "linear_growth"
            [disturbance]
            kind = "sinusoidal"
            amplitude = 0.5
            period = 4.0
            cutoff = 2.0
            buses = [2]
            [overrides]
            bound = 0.1
        "#;
        let s = Scenario::parse(text, &dir, "two").unwrap();
        assert_eq!(s.controller, ControllerKind::Centralized);
        assert_eq!(s.disturbance.buses, vec![1]);
        assert_eq!(s.case.config().bounds[0].upper, 0.1);
        assert_eq!(s.case.config().params[0].threshold_upper, 0.05);
        assert!(Scenario::parse("case = \"two.case\"\ncontroller = \"bogus\"\nduration = 1.0", &dir, "x").is_err());
        assert!(Scenario::parse("case = \"two.case\"\ncontroller = \"none\"\nduration = 1.0\n[disturbance]\nkind = \"constant\"\nbuses = [7]", &dir, "x").is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
