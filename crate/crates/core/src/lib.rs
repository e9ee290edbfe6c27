//! Round-based simulator for hierarchical WSN clustering protocols.
//!
//! LEACH, SEP, TEEN and DEEC elect cluster heads each round; any of them can be
//! combined with away-cluster-head (ACH) confirmation, which demotes heads that
//! sit too close to a stronger one. Runs are fully determined by their config
//! and seed.

pub mod ach;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod plot;
pub mod protocol;
pub mod radio;
pub mod rng;

pub use ach::{ach_filter, pairwise_min_distance, AchOutcome, ChCandidate};
pub use engine::{
    associate, deploy, run_simulation, run_simulation_observed, ClusterAssignment, InvalidConfig, Network,
    NetworkConfig, Node, Role, RoundMetrics, RoundOutcome, RunSummary, SimulationResult,
};
pub use protocol::{EligibilityRule, NodeElectionState, NodeId, ProtocolKind, ProtocolSpec, Round, Variant};
pub use radio::{distance, EnergyModel, Position};
pub use rng::{DrawSource, ScriptedDraws, SeededStream};
