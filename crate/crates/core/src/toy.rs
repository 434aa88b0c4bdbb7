//! The five-trajectory, four-location, three-moment worked example.
//!
//! Locations `l1..l4` map to ids `0..3` and moments `t1..t3` to `0..2`.

use crate::corpus::Corpus;
use crate::grid::DiscreteTrajectory;
use crate::LocationId;

pub const N_LOCATIONS: usize = 4;
pub const N_MOMENTS: usize = 3;

/// `(object, day, [loc@t1, loc@t2, loc@t3])`, with 1-based location labels.
pub const ROWS: [(&str, i64, [LocationId; 3]); 5] = [
    ("c1", 1, [1, 2, 3]),
    ("c1", 2, [2, 2, 3]),
    ("c1", 3, [2, 1, 1]),
    ("c2", 1, [3, 4, 4]),
    ("c2", 2, [2, 4, 3]),
];

pub fn trajectories() -> Vec<DiscreteTrajectory> {
    ROWS.iter()
        .map(|(obj, day, labels)| {
            DiscreteTrajectory::complete(*obj, *day, labels.iter().map(|l| l - 1).collect())
        })
        .collect()
}

pub fn corpus() -> Corpus {
    Corpus::build(N_LOCATIONS, trajectories()).expect("toy corpus is well formed")
}

/// Trajectory of `(object, day)` from the table.
pub fn trajectory(object: &str, day: i64) -> DiscreteTrajectory {
    trajectories()
        .into_iter()
        .find(|t| t.object_id == object && t.day_id == day)
        .expect("row exists")
}
