//! Region partitions, regional sub-cases, boundary-flow forecasts and the
//! distributed control law.
//!
//! Partition files list one region per line:
//!
//! ```text
//! # label: bus ids
//! north: 30 2 1 3 25
//! south: 31 6 5 7 11
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mpc::{Controller, MpcError};
use crate::netcase::{is_connected, CaseError, ControlConfig, Line, NetworkCase};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Controlled bus outside every region.
    Uncovered { bus: usize },
    /// Controlled bus in more than one region.
    Shared { bus: usize, regions: Vec<String> },
    /// Region without a positive-inertia bus.
    NoInertia { region: String },
    /// Induced subgraph of the region is not connected.
    Disconnected { region: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Uncovered { bus } => write!(f, "controlled bus {bus} is in no region"),
            Violation::Shared { bus, regions } => write!(f, "controlled bus {bus} is shared by regions {}", regions.join(", ")),
            Violation::NoInertia { region } => write!(f, "region {region} has no bus with positive inertia"),
            Violation::Disconnected { region } => write!(f, "region {region} does not induce a connected subgraph"),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid partition: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("region {region}: {source}")]
    RegionCase { region: String, source: CaseError },
    #[error("region {region}: {source}")]
    Control { region: String, source: MpcError },
}

/// Line crossing the region boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub line: usize,
    /// Global position of the end inside the region.
    pub inside: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub label: String,
    /// Global bus positions, ascending; the local index is the position in this list.
    pub buses: Vec<usize>,
    /// Global indices of the induced lines, ascending.
    pub edges: Vec<usize>,
    pub boundary: Vec<BoundaryEdge>,
}

impl Region {
    pub fn local_index(&self, bus: usize) -> Option<usize> {
        self.buses.binary_search(&bus).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    pub regions: Vec<Region>,
}

impl RegionPartition {
    /// Builds regions from bus ids; induced and boundary edges are derived.
    pub fn from_ids(case: &NetworkCase, regions: &[(String, Vec<usize>)]) -> Result<Self, PartitionError> {
        let mut out = Vec::with_capacity(regions.len());
        for (label, ids) in regions {
            let mut buses = Vec::with_capacity(ids.len());
            for &id in ids {
                let pos = case.bus_index(id).ok_or_else(|| PartitionError::Parse {
                    line: 0,
                    msg: format!("region {label} references unknown bus {id}"),
                })?;
                buses.push(pos);
            }
            buses.sort_unstable();
            buses.dedup();
            let inside = |b: usize| buses.binary_search(&b).is_ok();
            let mut edges = Vec::new();
            let mut boundary = Vec::new();
            for (k, l) in case.lines().iter().enumerate() {
                match (inside(l.from), inside(l.to)) {
                    (true, true) => edges.push(k),
                    (true, false) => boundary.push(BoundaryEdge { line: k, inside: l.from }),
                    (false, true) => boundary.push(BoundaryEdge { line: k, inside: l.to }),
                    (false, false) => {}
                }
            }
            out.push(Region { label: label.clone(), buses, edges, boundary });
        }
        Ok(Self { regions: out })
    }

    /// One region holding every bus.
    pub fn single_region(case: &NetworkCase) -> Self {
        Self::from_ids(case, &[("all".to_string(), case.bus_ids())]).expect("ids come from the case")
    }

    pub fn parse(text: &str, case: &NetworkCase) -> Result<Self, PartitionError> {
        let mut regions = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| PartitionError::Parse { line: no + 1, msg };
            let (label, ids) = line.split_once(':').ok_or_else(|| err("expected `label: ids`".into()))?;
            let label = label.trim();
            if label.is_empty() {
                return Err(err("empty region label".into()));
            }
            let ids = ids
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| err(format!("bad bus id `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if ids.is_empty() {
                return Err(err(format!("region {label} is empty")));
            }
            if ids.iter().any(|&id| case.bus_index(id).is_none()) {
                return Err(err(format!("region {label} references an unknown bus")));
            }
            regions.push((label.to_string(), ids));
        }
        if regions.is_empty() {
            return Err(PartitionError::Parse { line: 0, msg: "no regions".into() });
        }
        Self::from_ids(case, &regions)
    }

    pub fn load(path: impl AsRef<Path>, case: &NetworkCase) -> Result<Self, PartitionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| PartitionError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, case)
    }

    pub fn write(&self, case: &NetworkCase) -> String {
        self.regions
            .iter()
            .map(|r| {
                let ids: Vec<String> = r.buses.iter().map(|&b| case.buses()[b].id.to_string()).collect();
                format!("{}: {}\n", r.label, ids.join(" "))
            })
            .collect()
    }
}

/// Checks coverage and disjointness of the controlled buses plus the
/// requirements for building regional sub-cases.
pub fn validate_partition(case: &NetworkCase, partition: &RegionPartition) -> Result<(), PartitionError> {
    let mut violations = Vec::new();
    let mut owners: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for r in &partition.regions {
        for &b in &r.buses {
            if case.config().controlled_slot(b).is_some() {
                owners.entry(b).or_default().push(r.label.clone());
            }
        }
        if !r.buses.iter().any(|&b| case.buses()[b].inertia > 0.0) {
            violations.push(Violation::NoInertia { region: r.label.clone() });
        }
        let local = |b: usize| r.local_index(b).unwrap();
        let lines = case.lines();
        if !is_connected(r.buses.len(), r.edges.iter().map(|&k| (local(lines[k].from), local(lines[k].to)))) {
            violations.push(Violation::Disconnected { region: r.label.clone() });
        }
    }
    for &b in &case.config().controlled {
        let id = case.buses()[b].id;
        match owners.get(&b) {
            None => violations.push(Violation::Uncovered { bus: id }),
            Some(o) if o.len() > 1 => violations.push(Violation::Shared { bus: id, regions: o.clone() }),
            _ => {}
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(PartitionError::Invalid(violations))
    }
}

/// Sub-case on the induced subgraph of region `beta`, with the controller
/// sets restricted to the region and all per-bus data inherited.
pub fn regional_case(case: &NetworkCase, partition: &RegionPartition, beta: usize) -> Result<NetworkCase, PartitionError> {
    let r = &partition.regions[beta];
    let buses = r.buses.iter().map(|&b| case.buses()[b].clone()).collect();
    let lines = r
        .edges
        .iter()
        .map(|&k| {
            let l = &case.lines()[k];
            Line { id: l.id, from: r.local_index(l.from).unwrap(), to: r.local_index(l.to).unwrap(), susceptance: l.susceptance }
        })
        .collect();
    let cfg = case.config();
    let mut sub = ControlConfig {
        controlled: Vec::new(),
        params: Vec::new(),
        freq_constrained: Vec::new(),
        bounds: Vec::new(),
        horizon: cfg.horizon,
    };
    for (&i, p) in cfg.controlled.iter().zip(&cfg.params) {
        if let Some(li) = r.local_index(i) {
            sub.controlled.push(li);
            sub.params.push(p.clone());
        }
    }
    for (&i, b) in cfg.freq_constrained.iter().zip(&cfg.bounds) {
        if let Some(li) = r.local_index(i) {
            sub.freq_constrained.push(li);
            sub.bounds.push(b.clone());
        }
    }
    NetworkCase::new(buses, lines, sub).map_err(|source| PartitionError::RegionCase { region: r.label.clone(), source })
}

/// Constant injection seen by each regional bus from its boundary lines:
/// the flow b sin λ enters at the `to` end and leaves at the `from` end.
pub fn boundary_flow_forecast(case: &NetworkCase, partition: &RegionPartition, beta: usize, lambda: &[f64]) -> DVector<f64> {
    let r = &partition.regions[beta];
    let mut add = DVector::zeros(r.buses.len());
    for e in &r.boundary {
        let l = &case.lines()[e.line];
        let flow = l.susceptance * lambda[e.line].sin();
        let sign = if e.inside == l.from { -1.0 } else { 1.0 };
        add[r.local_index(e.inside).unwrap()] += sign * flow;
    }
    add
}

/// Regional view of a global state: (λ_β, ω_β).
pub fn restrict_state(region: &Region, lambda: &[f64], omega: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (region.edges.iter().map(|&k| lambda[k]).collect(), region.buses.iter().map(|&b| omega[b]).collect())
}

/// One receding-horizon controller per region, each with its own workspace.
pub struct DistributedController {
    partition: RegionPartition,
    controllers: Vec<Controller>,
}

impl DistributedController {
    pub fn new(case: &NetworkCase, partition: RegionPartition) -> Result<Self, PartitionError> {
        validate_partition(case, &partition)?;
        let controllers = (0..partition.regions.len())
            .map(|b| {
                let sub = regional_case(case, &partition, b)?;
                Controller::new(&sub).map_err(|source| PartitionError::Control { region: partition.regions[b].label.clone(), source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { partition, controllers })
    }

    pub fn partition(&self) -> &RegionPartition {
        &self.partition
    }

    pub fn controllers(&self) -> &[Controller] {
        &self.controllers
    }

    /// Global input from the per-region first steps. `forecast` is the
    /// global n × N injection forecast.
    pub fn control(&mut self, case: &NetworkCase, lambda: &[f64], omega: &[f64], forecast: &DMatrix<f64>) -> Result<DVector<f64>, PartitionError> {
        let order: Vec<usize> = (0..self.controllers.len()).collect();
        self.control_in_order(case, lambda, omega, forecast, &order)
    }

    /// Same as [`Self::control`] with an explicit region processing order.
    pub fn control_in_order(
        &mut self,
        case: &NetworkCase,
        lambda: &[f64],
        omega: &[f64],
        forecast: &DMatrix<f64>,
        order: &[usize],
    ) -> Result<DVector<f64>, PartitionError> {
        let mut u = DVector::zeros(case.n());
        let mut parts = Vec::with_capacity(order.len());
        for &b in order {
            let region = &self.partition.regions[b];
            let (lam, om) = restrict_state(region, lambda, omega);
            let add = boundary_flow_forecast(case, &self.partition, b, lambda);
            let fc = DMatrix::from_fn(region.buses.len(), forecast.ncols(), |li, k| forecast[(region.buses[li], k)] + add[li]);
            let ub = self.controllers[b]
                .control(&lam, &om, &fc)
                .map_err(|source| PartitionError::Control { region: region.label.clone(), source })?;
            parts.push((b, ub));
        }
        // no partial application: assemble only after every region succeeded
        for (b, ub) in parts {
            let region = &self.partition.regions[b];
            for &li in &self.controllers[b].case().config().controlled {
                u[region.buses[li]] = ub[li];
            }
        }
        Ok(u)
    }
}

/// One-shot distributed law.
pub fn distributed_control(
    case: &NetworkCase,
    partition: &RegionPartition,
    lambda: &[f64],
    omega: &[f64],
    forecast: &DMatrix<f64>,
) -> Result<DVector<f64>, PartitionError> {
    DistributedController::new(case, partition.clone())?.control(case, lambda, omega, forecast)
}
