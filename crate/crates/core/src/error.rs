use thiserror::Error;

use crate::{LocationId, MomentId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid configuration: {0}")]
    InvalidGrid(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("no points")]
    NoPoints,
    #[error("points are not sorted by timestamp (index {0})")]
    Unsorted(usize),
    #[error("points mix objects or days: {0}")]
    MixedTrajectory(String),
    #[error("trajectory has {found} moments, expected {expected}")]
    WindowMismatch { expected: usize, found: usize },
    #[error("trajectory {0} has unfilled moments")]
    Gappy(String),
    #[error("location {location} out of range (|L| = {n_locations})")]
    LocationOutOfRange {
        location: LocationId,
        n_locations: usize,
    },
    #[error("moment {moment} out of window (|T| = {n_moments})")]
    MomentOutOfWindow { moment: MomentId, n_moments: usize },
    #[error("moment {moment} lies beyond the search horizon {horizon}")]
    BeyondHorizon { moment: MomentId, horizon: MomentId },
    #[error("moment ordering violated: {0}")]
    MomentOrder(String),
    #[error("evidence is empty")]
    EmptyEvidence,
    #[error("unknown day id {0}")]
    UnknownDay(i64),
    #[error("every location at t{0} was searched without a hit")]
    Exhausted(MomentId),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
