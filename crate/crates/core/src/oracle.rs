//! Metered ground truth: the simulated camera-record store.
//!
//! A [`SearchSession`] hides one complete trajectory. The only way to learn
//! about it is [`SearchSession::search`], which answers whether the object
//! occupied a unit and charges one search, repeats included. Detection is
//! perfect.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::DiscreteTrajectory;
use crate::{LocationId, MomentId, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchRecord {
    pub unit: Unit,
    pub hit: bool,
}

#[derive(Debug)]
pub struct SearchSession {
    truth: Vec<LocationId>,
    n_locations: usize,
    horizon: Option<MomentId>,
    log: Vec<SearchRecord>,
}

impl SearchSession {
    /// Opens a session over a gap-free trajectory.
    pub fn open(truth: &DiscreteTrajectory, n_locations: usize) -> Result<Self> {
        let cells = truth
            .locations()
            .ok_or_else(|| Error::Gappy(format!("{}/{}", truth.object_id, truth.day_id)))?;
        if let Some(&bad) = cells.iter().find(|&&l| l as usize >= n_locations) {
            return Err(Error::LocationOutOfRange {
                location: bad,
                n_locations,
            });
        }
        Ok(SearchSession {
            truth: cells,
            n_locations,
            horizon: None,
            log: Vec::new(),
        })
    }

    /// Forbids searches after `t`: records only exist up to the present moment.
    pub fn with_horizon(mut self, t: MomentId) -> Self {
        self.horizon = Some(t);
        self
    }

    pub fn horizon(&self) -> Option<MomentId> {
        self.horizon
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    pub fn n_moments(&self) -> usize {
        self.truth.len()
    }

    /// Whether the object was at `l` at `t`. Costs one search.
    pub fn search(&mut self, l: LocationId, t: MomentId) -> Result<bool> {
        if t as usize >= self.truth.len() {
            return Err(Error::MomentOutOfWindow {
                moment: t,
                n_moments: self.truth.len(),
            });
        }
        if l as usize >= self.n_locations {
            return Err(Error::LocationOutOfRange {
                location: l,
                n_locations: self.n_locations,
            });
        }
        if let Some(h) = self.horizon.filter(|&h| t > h) {
            return Err(Error::BeyondHorizon { moment: t, horizon: h });
        }
        let hit = self.truth[t as usize] == l;
        self.log.push(SearchRecord {
            unit: Unit::new(l, t),
            hit,
        });
        Ok(hit)
    }

    /// Searches spent so far.
    pub fn cost(&self) -> usize {
        self.log.len()
    }

    pub fn log(&self) -> &[SearchRecord] {
        &self.log
    }

    /// Writes `step,location,moment,outcome`, one row per search.
    pub fn write_audit_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["step", "location", "moment", "outcome"])?;
        for (i, r) in self.log.iter().enumerate() {
            wtr.write_record([
                (i + 1).to_string(),
                r.unit.location.to_string(),
                r.unit.moment.to_string(),
                u8::from(r.hit).to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
