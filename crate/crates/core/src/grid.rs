//! Spatial and temporal discretization of raw GPS traces.
//!
//! The city is a rectangle of `n_rows × n_cols` square cells anchored at a
//! south-west origin; the day window `[day_start, day_end)` is cut into
//! moments of `moment_seconds`. Cell ids are row-major with row 0 at the
//! origin latitude.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::io::KeyValues;
use crate::{LocationId, MomentId};

/// Kilometres per degree of latitude on a sphere of mean Earth radius.
pub const KM_PER_DEGREE: f64 = 6371.0088 * std::f64::consts::PI / 180.0;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub cell_size_km: f64,
    pub n_rows: u32,
    pub n_cols: u32,
    pub moment_seconds: u32,
    /// Seconds since midnight.
    pub day_start: u32,
    /// Seconds since midnight, exclusive.
    pub day_end: u32,
}

impl Default for GridConfig {
    /// 30 km × 30 km of 1 km cells, one-minute moments, 07:00 to 21:59.
    fn default() -> Self {
        GridConfig {
            origin_lat: 30.52,
            origin_lon: 103.93,
            cell_size_km: 1.0,
            n_rows: 30,
            n_cols: 30,
            moment_seconds: 60,
            day_start: 7 * 3600,
            day_end: 22 * 3600,
        }
    }
}

impl GridConfig {
    /// The default grid with a 90-minute window starting at 07:00.
    pub fn desk() -> Self {
        GridConfig {
            day_end: 7 * 3600 + 90 * 60,
            ..GridConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidGrid(msg.to_string()));
        if self.n_rows == 0 || self.n_cols == 0 {
            return bad("n_rows and n_cols must be at least 1");
        }
        if !self.cell_size_km.is_finite() || self.cell_size_km <= 0.0 {
            return bad("cell_size_km must be positive");
        }
        if self.moment_seconds == 0 {
            return bad("moment_seconds must be positive");
        }
        if self.day_end <= self.day_start {
            return bad("day_end must be after day_start");
        }
        if self.day_end as i64 > SECONDS_PER_DAY {
            return bad("day_end must not exceed 86400");
        }
        if !(-90.0..=90.0).contains(&self.origin_lat) || !(-180.0..=180.0).contains(&self.origin_lon)
        {
            return bad("origin out of range");
        }
        if self.n_moments() == 0 {
            return bad("window shorter than one moment");
        }
        Ok(())
    }

    /// |L|
    pub fn n_locations(&self) -> usize {
        self.n_rows as usize * self.n_cols as usize
    }

    /// |T|
    pub fn n_moments(&self) -> usize {
        ((self.day_end - self.day_start) / self.moment_seconds) as usize
    }

    pub fn location(&self, row: u32, col: u32) -> LocationId {
        row * self.n_cols + col
    }

    pub fn row_col(&self, loc: LocationId) -> (u32, u32) {
        (loc / self.n_cols, loc % self.n_cols)
    }

    /// Equirectangular `(north_km, east_km)` offset of a coordinate from the origin.
    pub fn offset_km(&self, lat: f64, lon: f64) -> (f64, f64) {
        let north = (lat - self.origin_lat) * KM_PER_DEGREE;
        let east = (lon - self.origin_lon) * KM_PER_DEGREE * self.origin_lat.to_radians().cos();
        (north, east)
    }

    /// Inverse of [`GridConfig::offset_km`].
    pub fn coordinate_at(&self, north_km: f64, east_km: f64) -> (f64, f64) {
        let lat = self.origin_lat + north_km / KM_PER_DEGREE;
        let lon =
            self.origin_lon + east_km / (KM_PER_DEGREE * self.origin_lat.to_radians().cos());
        (lat, lon)
    }

    /// Cell containing a kilometre offset, if inside the extent.
    pub fn cell_at_km(&self, north_km: f64, east_km: f64) -> Option<LocationId> {
        if !north_km.is_finite() || !east_km.is_finite() || north_km < 0.0 || east_km < 0.0 {
            return None;
        }
        let row = (north_km / self.cell_size_km).floor();
        let col = (east_km / self.cell_size_km).floor();
        if row >= self.n_rows as f64 || col >= self.n_cols as f64 {
            return None;
        }
        Some(self.location(row as u32, col as u32))
    }

    /// Centre of a cell as a kilometre offset from the origin.
    pub fn center_km(&self, loc: LocationId) -> (f64, f64) {
        let (row, col) = self.row_col(loc);
        (
            (row as f64 + 0.5) * self.cell_size_km,
            (col as f64 + 0.5) * self.cell_size_km,
        )
    }

    pub fn center_distance_km(&self, a: LocationId, b: LocationId) -> f64 {
        let (an, ae) = self.center_km(a);
        let (bn, be) = self.center_km(b);
        (an - bn).hypot(ae - be)
    }

    /// Splits an epoch timestamp into `(day_id, moment)`; the moment is absent
    /// outside the daily window.
    pub fn moment_of(&self, timestamp: i64) -> (i64, Option<MomentId>) {
        let day = timestamp.div_euclid(SECONDS_PER_DAY);
        let sod = timestamp.rem_euclid(SECONDS_PER_DAY);
        let start = self.day_start as i64;
        let moment = if sod >= start {
            let m = (sod - start) / self.moment_seconds as i64;
            (m < self.n_moments() as i64).then_some(m as MomentId)
        } else {
            None
        };
        (day, moment)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let g = GridConfig {
            origin_lat: kv.parse("origin_lat")?,
            origin_lon: kv.parse("origin_lon")?,
            cell_size_km: kv.parse("cell_size_km")?,
            n_rows: kv.parse("n_rows")?,
            n_cols: kv.parse("n_cols")?,
            moment_seconds: kv.parse("moment_seconds")?,
            day_start: kv.parse("day_start")?,
            day_end: kv.parse("day_end")?,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "origin_lat = {}", self.origin_lat);
        let _ = writeln!(s, "origin_lon = {}", self.origin_lon);
        let _ = writeln!(s, "cell_size_km = {}", self.cell_size_km);
        let _ = writeln!(s, "n_rows = {}", self.n_rows);
        let _ = writeln!(s, "n_cols = {}", self.n_cols);
        let _ = writeln!(s, "moment_seconds = {}", self.moment_seconds);
        let _ = writeln!(s, "day_start = {}", self.day_start);
        let _ = writeln!(s, "day_end = {}", self.day_end);
        s
    }
}

/// One GPS fix.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPoint {
    pub object_id: String,
    pub lat: f64,
    pub lon: f64,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
}

impl RawPoint {
    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// One object-day: a location per moment, `None` where unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteTrajectory {
    pub object_id: String,
    pub day_id: i64,
    pub cells: Vec<Option<LocationId>>,
}

impl DiscreteTrajectory {
    pub fn complete(object_id: impl Into<String>, day_id: i64, cells: Vec<LocationId>) -> Self {
        DiscreteTrajectory {
            object_id: object_id.into(),
            day_id,
            cells: cells.into_iter().map(Some).collect(),
        }
    }

    pub fn n_moments(&self) -> usize {
        self.cells.len()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    pub fn location_at(&self, moment: MomentId) -> Option<LocationId> {
        self.cells.get(moment as usize).copied().flatten()
    }

    /// All locations, if the trajectory has no gaps.
    pub fn locations(&self) -> Option<Vec<LocationId>> {
        self.cells.iter().copied().collect()
    }

    pub fn known_moments(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }
}

/// Row-major cell of a point, or `None` outside the grid.
pub fn assign_cell(p: &RawPoint, g: &GridConfig) -> Option<LocationId> {
    if !p.is_valid() {
        return None;
    }
    let (north, east) = g.offset_km(p.lat, p.lon);
    g.cell_at_km(north, east)
}

/// Bins one object-day of timestamp-sorted points into moments, keeping the
/// first in-grid point of every moment.
pub fn discretize(points: &[RawPoint], g: &GridConfig) -> Result<DiscreteTrajectory> {
    let first = points.first().ok_or(Error::NoPoints)?;
    let (day, _) = g.moment_of(first.timestamp);
    let mut cells = vec![None; g.n_moments()];
    for (i, p) in points.iter().enumerate() {
        if i > 0 && p.timestamp < points[i - 1].timestamp {
            return Err(Error::Unsorted(i));
        }
        if p.object_id != first.object_id {
            return Err(Error::MixedTrajectory(format!(
                "objects {} and {}",
                first.object_id, p.object_id
            )));
        }
        let (d, moment) = g.moment_of(p.timestamp);
        if d != day {
            return Err(Error::MixedTrajectory(format!("days {day} and {d}")));
        }
        let Some(m) = moment else { continue };
        let slot = &mut cells[m as usize];
        if slot.is_none() {
            *slot = assign_cell(p, g);
        }
    }
    Ok(DiscreteTrajectory {
        object_id: first.object_id.clone(),
        day_id: day,
        cells,
    })
}

/// Gap thresholds for [`repair`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairLimits {
    /// Longest leading or trailing run of unknown moments that is filled.
    pub max_edge_gap: usize,
    /// Longest interior run of unknown moments that is interpolated.
    pub max_interior_gap: usize,
    /// Largest straight-line distance between the cells flanking an interior gap.
    pub max_interior_km: f64,
}

impl Default for RepairLimits {
    fn default() -> Self {
        RepairLimits {
            max_edge_gap: 5,
            max_interior_gap: 10,
            max_interior_km: 15.0,
        }
    }
}

/// Fills the gaps of a discretized trajectory, or returns `None` when the
/// trajectory must be discarded.
///
/// Edge gaps copy the nearest known cell. Interior gaps move uniformly along
/// the straight line between the flanking cell centres.
pub fn repair(
    t: &DiscreteTrajectory,
    g: &GridConfig,
    limits: &RepairLimits,
) -> Option<DiscreteTrajectory> {
    let known: Vec<(usize, LocationId)> = t
        .cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|l| (i, l)))
        .collect();
    if known.len() < 2 {
        return None;
    }
    let n_locations = g.n_locations() as LocationId;
    if known.iter().any(|&(_, l)| l >= n_locations) {
        return None;
    }
    let (first_idx, first_loc) = known[0];
    let (last_idx, last_loc) = *known.last().unwrap();
    if first_idx > limits.max_edge_gap || t.cells.len() - 1 - last_idx > limits.max_edge_gap {
        return None;
    }

    let mut cells: Vec<Option<LocationId>> = t.cells.clone();
    cells[..first_idx].fill(Some(first_loc));
    cells[last_idx + 1..].fill(Some(last_loc));

    for pair in known.windows(2) {
        let (a_idx, a_loc) = pair[0];
        let (b_idx, b_loc) = pair[1];
        let gap = b_idx - a_idx - 1;
        if gap == 0 {
            continue;
        }
        if gap > limits.max_interior_gap || g.center_distance_km(a_loc, b_loc) > limits.max_interior_km
        {
            return None;
        }
        let (an, ae) = g.center_km(a_loc);
        let (bn, be) = g.center_km(b_loc);
        for step in 1..=gap {
            let frac = step as f64 / (gap + 1) as f64;
            let cell = g.cell_at_km(an + frac * (bn - an), ae + frac * (be - ae))?;
            cells[a_idx + step] = Some(cell);
        }
    }

    Some(DiscreteTrajectory {
        object_id: t.object_id.clone(),
        day_id: t.day_id,
        cells,
    })
}

/// Outcome counts of a batch [`prepare`] run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrepStats {
    pub object_days: usize,
    pub retained: usize,
    /// Retained trajectories that needed at least one filled moment.
    pub repaired: usize,
}

/// Groups raw points by object-day, sorts them, then discretizes and repairs
/// each group. Output order is by `(object_id, day_id)`.
pub fn prepare(
    points: Vec<RawPoint>,
    g: &GridConfig,
    limits: &RepairLimits,
) -> Result<(Vec<DiscreteTrajectory>, PrepStats)> {
    let mut groups: BTreeMap<(String, i64), Vec<RawPoint>> = BTreeMap::new();
    for p in points {
        let (day, _) = g.moment_of(p.timestamp);
        groups.entry((p.object_id.clone(), day)).or_default().push(p);
    }
    let mut stats = PrepStats::default();
    let mut out = Vec::new();
    for (_, mut pts) in groups {
        pts.sort_by_key(|p| p.timestamp);
        stats.object_days += 1;
        let raw = discretize(&pts, g)?;
        if let Some(fixed) = repair(&raw, g, limits) {
            stats.retained += 1;
            if !raw.is_complete() {
                stats.repaired += 1;
            }
            out.push(fixed);
        }
    }
    Ok((out, stats))
}
