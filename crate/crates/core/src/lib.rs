//! Deterministic simulator of 5G mobility management for cellular-connected UAVs.
//!
//! The crate models the radio environment seen by aerial and ground users,
//! the network-side neighbour relation machinery (ANR), 3GPP measurement
//! events and a per-UE handover / radio-link-failure state machine. A fixed
//! timestep engine ties everything together and produces metrics, a handover
//! event log and a per-tick trace that the analysis module can consume.
//!
//! Module map:
//! - [`geo`]: antenna gains, LoS probability, path loss, RSRP and SINR
//! - [`topology`]: cell layout, PCI pools, PCI planning and collision/confusion detection
//! - [`mobility`]: waypoint and random-waypoint motion
//! - [`rrm`]: measurement reports and A1-A6/B1/B2 event evaluation
//! - [`anr`]: neighbour relation tables
//! - [`handover`]: connection state machine
//! - [`sim`]: scenario configuration, the run loop and sweeps
//! - [`analysis`]: trace ingestion and the strongest-cell / handover metrics
//! - [`scenarios`]: packaged scenario files

pub mod analysis;
pub mod anr;
pub mod geo;
pub mod handover;
pub mod ids;
pub mod mobility;
pub mod rrm;
pub mod scenarios;
pub mod sim;
pub mod topology;

pub use ids::{Ecgi, Pci, UeId, UeKind};

/// Tolerance used when comparing simulated timestamps against timers.
pub(crate) const TIME_EPS: f64 = 1e-9;
