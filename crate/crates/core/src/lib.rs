//! Spatiotemporal search planning over a discretized city grid.
//!
//! An object was last witnessed at some `(location, moment)` unit and must be
//! found at a later moment by querying an indexed record store one unit at a
//! time. Every query costs one search. This crate provides the pieces needed
//! to plan those queries and measure the cost:
//!
//! * [`grid`]: spatial/temporal discretization and GPS trace repair.
//! * [`corpus`]: trajectory store with a `(location, moment)` inverted index.
//! * [`predictor`]: Markov appearing-probability rows (first/second order).
//! * [`estimator`]: expected search counts and the greedy indicators.
//! * [`oracle`]: metered ground-truth search sessions.
//! * [`strategies`]: the ALT, IPM, IEM, IHMs and IHUs episode runners.
//! * [`harness`]: synthetic data, experiments and report emission.

pub mod corpus;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod harness;
pub mod io;
pub mod oracle;
pub mod predictor;
pub mod strategies;

pub mod toy;

pub use corpus::{Corpus, TrajectoryId};
pub use error::{Error, Result};
pub use grid::{DiscreteTrajectory, GridConfig, RawPoint};
pub use oracle::SearchSession;
pub use predictor::{Evidence, PredictionVector, Predictor, PredictorKind, RankedPrediction, Row};
pub use strategies::{Episode, Strategy, TrackResult};

/// Row-major cell index on the grid.
pub type LocationId = u32;
/// Moment index inside the daily window.
pub type MomentId = u32;

/// A spatiotemporal unit: one location at one moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Unit {
    pub location: LocationId,
    pub moment: MomentId,
}

impl Unit {
    pub const fn new(location: LocationId, moment: MomentId) -> Self {
        Unit { location, moment }
    }
}

impl std::fmt::Display for Unit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(l{}, t{})", self.location, self.moment)
    }
}
