//! Receding-horizon transient frequency control for power networks with
//! zero-inertia buses.

pub mod netcase;
pub mod steady_state;
pub mod dynamics;
pub mod qp;
pub mod refgen;
pub mod mpc;
pub mod partition;
pub mod harness;

pub use netcase::{Bus, CaseError, ControlConfig, ControlParams, FrequencyBounds, Horizon, Line, NetworkCase};
pub use steady_state::{Equilibrium, SteadyStateError};
pub use harness::{run, ControllerKind, RunLog, RunSummary, Scenario};
pub use mpc::{Controller, MpcError};
pub use partition::{DistributedController, PartitionError, RegionPartition};
