use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{DiscreteTrajectory, GridConfig};
use crate::LocationId;

/// `(d_row, d_col)` of stay, north, south, east and west.
pub const MOVES: [(i32, i32); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];

/// Momentum random walk parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub grid: GridConfig,
    pub n_objects: usize,
    pub n_days: usize,
    /// Probability of repeating the previous move at each moment.
    pub persistence: f64,
    /// Number of shared home cells; 0 draws every home uniformly.
    pub hubs: usize,
    pub seed: u64,
}

impl SynthParams {
    /// Desk-scale bench: 30x30 grid, 90 moments, 200 objects over 11 days
    /// (10 training days give 2,000 trajectories, the last day 200 tests),
    /// persistence 0.8 and four hubs.
    pub fn desk_bench(seed: u64) -> Self {
        SynthParams {
            grid: GridConfig::desk(),
            n_objects: 200,
            n_days: 11,
            persistence: 0.8,
            hubs: 4,
            seed,
        }
    }
}

/// One trajectory per object-day.
///
/// Every object has a home cell drawn once; each day it starts there with a
/// random initial move. With `hubs > 0` homes are drawn from that many hub
/// cells in the inner two thirds of the grid, which concentrates traffic and
/// makes location busyness uneven. At every later moment it repeats its previous move
/// with probability `persistence`, otherwise it picks one of [`MOVES`]
/// uniformly. Positions are clamped to the grid. Day ids are `0..n_days`,
/// object ids `o0, o1, ...`; output is ordered by day, then object.
pub fn synth(p: &SynthParams) -> Result<Vec<DiscreteTrajectory>> {
    p.grid.validate()?;
    if !(0.0..=1.0).contains(&p.persistence) {
        return Err(crate::Error::InvalidSpec(format!(
            "persistence {} outside [0, 1]",
            p.persistence
        )));
    }
    let g = &p.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let inner = |n: u32| n / 6..n - n / 6;
    let hubs: Vec<(i32, i32)> = (0..p.hubs)
        .map(|_| {
            (
                rng.gen_range(inner(g.n_rows)) as i32,
                rng.gen_range(inner(g.n_cols)) as i32,
            )
        })
        .collect();
    let homes: Vec<(i32, i32)> = (0..p.n_objects)
        .map(|_| match hubs.len() {
            0 => (
                rng.gen_range(0..g.n_rows) as i32,
                rng.gen_range(0..g.n_cols) as i32,
            ),
            n => hubs[rng.gen_range(0..n)],
        })
        .collect();
    let clamp = |(r, c): (i32, i32)| {
        (
            r.clamp(0, g.n_rows as i32 - 1),
            c.clamp(0, g.n_cols as i32 - 1),
        )
    };
    let mut out = Vec::with_capacity(p.n_objects * p.n_days);
    for day in 0..p.n_days {
        for (obj, &home) in homes.iter().enumerate() {
            let mut pos = home;
            let mut mv = MOVES[rng.gen_range(0..MOVES.len())];
            let mut cells: Vec<LocationId> = Vec::with_capacity(g.n_moments());
            cells.push(g.location(pos.0 as u32, pos.1 as u32));
            for _ in 1..g.n_moments() {
                if !rng.gen_bool(p.persistence) {
                    mv = MOVES[rng.gen_range(0..MOVES.len())];
                }
                pos = clamp((pos.0 + mv.0, pos.1 + mv.1));
                cells.push(g.location(pos.0 as u32, pos.1 as u32));
            }
            out.push(DiscreteTrajectory::complete(format!("o{obj}"), day as i64, cells));
        }
    }
    Ok(out)
}
