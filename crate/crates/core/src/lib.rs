//! Deterministic simulation of faultless radio protocols over noisy radio
//! networks with independent receiver faults.

pub mod acceptance;
pub mod analysis;
pub mod config;
pub mod error;
pub mod model;
pub mod network;
pub mod protocol;
pub mod protocols;
pub mod rng;
pub mod runner;
pub mod sim_general;
pub mod sim_progress;
pub mod sim_static;
pub mod transcript;

/// Node identifiers are dense indices `0..n`.
pub type NodeId = usize;

pub use config::SimConstants;
pub use error::{Error, Result};
pub use model::{NodeAction, NoiseModel, Payload};
pub use network::{GraphSpec, Network};
pub use protocol::{PrivateInput, Protocol, SharedProtocol};
pub use transcript::{verify_simulation, History, Transcript};
