//! Reachability-based safety verification for closed-loop systems that pair
//! a continuous-time plant with a periodically scheduled ReLU network
//! controller.
//!
//! The pipeline: guaranteed enclosures of the plant flow over one controller
//! period ([`odesim`]), sound abstract transformers for the controller
//! ([`network`], [`controller`]), and the per-period reachability loop with
//! set-cardinality control and split refinement ([`closedloop`],
//! [`partition`]). Everything rests on the outward-rounded interval kernel
//! in [`interval`].

pub mod closedloop;
pub mod controller;
pub mod interval;
pub mod network;
pub mod odesim;
pub mod partition;

pub use closedloop::{ReachResult, ScenarioSpec, SymbolicState, Verdict};
pub use controller::{CommandSet, ControllerSpec, PrePostKind};
pub use interval::{Interval, IntervalBox};
pub use network::ReluNetwork;
pub use odesim::PlantModel;
pub use partition::{CellRecord, PartitionParams};
