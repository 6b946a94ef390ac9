//! Simulation of non-stationary multivariate Hawkes processes and recovery of
//! their dependency graph from quantized pair and triple event counts.
//!
//! The pipeline is
//!
//! ```text
//! HawkesModel --simulate--> EventLog --bin_events--> BinGrid
//!     --accumulate_all--> PairStatistics --detect--> DependencyGraph
//! ```
//!
//! with [`oracle`] providing Monte-Carlo checks of the conditional-expectation
//! formulas the detector relies on, and [`experiments`] wiring everything into
//! seeded recovery trials and sweeps.

pub mod detector;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod simulator;
pub mod statistics;

pub use detector::{
    detect, detect_subset, pair_score, DetectorConfig, ScoreTerms, ThresholdSource,
};
pub use error::{Error, Result};
pub use graph::DependencyGraph;
pub use model::{BaselineSpec, HawkesModel, KernelSpec, ModelConstants};
pub use simulator::{simulate, Event, EventLog, SimulationOptions};
pub use statistics::{accumulate, accumulate_all, bin_events, BinGrid, PairStatistics};
