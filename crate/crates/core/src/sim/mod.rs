//! Overlay streaming simulator.

pub mod config;
pub mod engine;
pub mod node;
pub mod topology;

pub use config::{ConfigError, Detector, ScenarioConfig};
pub use engine::{run, run_traced, Sender, Simulation, TraceEvent};
pub use node::{DecodingMap, NodeKind, NodeState};
pub use topology::{build_topology, Overlay, TopologyError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}
