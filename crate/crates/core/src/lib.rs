//! Discrete-event simulation of co-located LoRa networks.
//!
//! A measured network is surrounded by non-cooperating networks that use the
//! same radio settings. The simulator reports the measured network's Data
//! Extraction Rate (DER) and lets two mitigations be compared: directional
//! node antennas and additional base stations.

pub mod collision;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod propagation;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod sweep;

pub use engine::{run, Fate, RunLog, RunOptions, Simulation, Traffic};
pub use error::{Result, SimError};
pub use metrics::{der, NetworkStats};
pub use radio::{airtime_ms, Framing, SensitivityTable, TransmitterSettings};
pub use scenario::{AntennaSelector, Layout, Scenario};
