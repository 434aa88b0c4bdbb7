//! Trajectory store with a `(location, moment)` inverted index.
//!
//! A [`Corpus`] is an immutable, cheaply clonable handle. Filtering with
//! [`Corpus::remove_through`] yields a new handle that shares the index and
//! carries an exclusion mask instead of copying trajectories.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::DiscreteTrajectory;
use crate::{LocationId, MomentId, Unit};

/// Position of a trajectory in the corpus it was built into.
pub type TrajectoryId = u32;

#[derive(Debug)]
struct Meta {
    object_id: String,
    day_id: i64,
}

#[derive(Debug)]
struct Store {
    n_locations: usize,
    n_moments: usize,
    meta: Vec<Meta>,
    /// `cells[id * n_moments + t]`
    cells: Vec<LocationId>,
    /// `postings[t * n_locations + l]`, ascending ids.
    postings: Vec<Vec<TrajectoryId>>,
}

impl Store {
    fn posting(&self, u: Unit) -> &[TrajectoryId] {
        if (u.location as usize) >= self.n_locations || (u.moment as usize) >= self.n_moments {
            return &[];
        }
        &self.postings[u.moment as usize * self.n_locations + u.location as usize]
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    store: Arc<Store>,
    /// `excluded[id]` marks trajectories filtered out of this view.
    excluded: Option<Arc<Vec<bool>>>,
    active: usize,
}

impl Corpus {
    /// Indexes complete trajectories over `n_locations` locations.
    ///
    /// All trajectories must be gap-free, share one window length and only
    /// use locations below `n_locations`.
    pub fn build(n_locations: usize, ts: Vec<DiscreteTrajectory>) -> Result<Self> {
        let n_moments = ts.first().map_or(0, DiscreteTrajectory::n_moments);
        let mut meta = Vec::with_capacity(ts.len());
        let mut cells = Vec::with_capacity(ts.len() * n_moments);
        let mut postings = vec![Vec::new(); n_locations * n_moments];
        for (id, t) in ts.into_iter().enumerate() {
            if t.n_moments() != n_moments {
                return Err(Error::WindowMismatch {
                    expected: n_moments,
                    found: t.n_moments(),
                });
            }
            for (m, c) in t.cells.iter().enumerate() {
                let loc = c.ok_or_else(|| Error::Gappy(format!("{}/{}", t.object_id, t.day_id)))?;
                if loc as usize >= n_locations {
                    return Err(Error::LocationOutOfRange {
                        location: loc,
                        n_locations,
                    });
                }
                postings[m * n_locations + loc as usize].push(id as TrajectoryId);
                cells.push(loc);
            }
            meta.push(Meta {
                object_id: t.object_id,
                day_id: t.day_id,
            });
        }
        let active = meta.len();
        Ok(Corpus {
            store: Arc::new(Store {
                n_locations,
                n_moments,
                meta,
                cells,
                postings,
            }),
            excluded: None,
            active,
        })
    }

    pub fn n_locations(&self) -> usize {
        self.store.n_locations
    }

    pub fn n_moments(&self) -> usize {
        self.store.n_moments
    }

    /// Number of trajectories visible in this view.
    pub fn len(&self) -> usize {
        self.active
    }

    pub fn is_empty(&self) -> bool {
        self.active == 0
    }

    pub fn is_active(&self, id: TrajectoryId) -> bool {
        (id as usize) < self.store.meta.len()
            && !self.excluded.as_ref().is_some_and(|ex| ex[id as usize])
    }

    /// Ids visible in this view, ascending.
    pub fn ids(&self) -> impl Iterator<Item = TrajectoryId> + '_ {
        (0..self.store.meta.len() as TrajectoryId).filter(move |&id| self.is_active(id))
    }

    /// Location of trajectory `id` at moment `t`.
    pub fn location(&self, id: TrajectoryId, t: MomentId) -> LocationId {
        self.store.cells[id as usize * self.store.n_moments + t as usize]
    }

    pub fn locations(&self, id: TrajectoryId) -> &[LocationId] {
        let n = self.store.n_moments;
        &self.store.cells[id as usize * n..(id as usize + 1) * n]
    }

    pub fn object_id(&self, id: TrajectoryId) -> &str {
        &self.store.meta[id as usize].object_id
    }

    pub fn day_id(&self, id: TrajectoryId) -> i64 {
        self.store.meta[id as usize].day_id
    }

    pub fn trajectory(&self, id: TrajectoryId) -> DiscreteTrajectory {
        DiscreteTrajectory::complete(
            self.object_id(id),
            self.day_id(id),
            self.locations(id).to_vec(),
        )
    }

    /// Visible trajectories in id order.
    pub fn enumerate(&self) -> Vec<DiscreteTrajectory> {
        self.ids().map(|id| self.trajectory(id)).collect()
    }

    pub fn validate_unit(&self, u: Unit) -> Result<()> {
        if u.location as usize >= self.n_locations() {
            return Err(Error::LocationOutOfRange {
                location: u.location,
                n_locations: self.n_locations(),
            });
        }
        if u.moment as usize >= self.n_moments() {
            return Err(Error::MomentOutOfWindow {
                moment: u.moment,
                n_moments: self.n_moments(),
            });
        }
        Ok(())
    }

    /// Visible trajectories satisfying every constraint, ascending.
    ///
    /// An empty constraint list matches every visible trajectory.
    pub fn ids_matching(&self, constraints: &[Unit]) -> Vec<TrajectoryId> {
        let Some(shortest) = constraints
            .iter()
            .min_by_key(|u| self.store.posting(**u).len())
        else {
            return self.ids().collect();
        };
        self.store
            .posting(*shortest)
            .iter()
            .copied()
            .filter(|&id| self.is_active(id))
            .filter(|&id| {
                constraints
                    .iter()
                    .all(|u| self.location(id, u.moment) == u.location)
            })
            .collect()
    }

    /// Number of visible trajectories satisfying every constraint.
    pub fn count_matching(&self, constraints: &[Unit]) -> usize {
        self.ids_matching(constraints).len()
    }

    /// A view without every trajectory that passes through `u`.
    pub fn remove_through(&self, u: Unit) -> Corpus {
        let hits: Vec<TrajectoryId> = self
            .store
            .posting(u)
            .iter()
            .copied()
            .filter(|&id| self.is_active(id))
            .collect();
        if hits.is_empty() {
            return self.clone();
        }
        let mut mask = match &self.excluded {
            Some(ex) => ex.as_ref().clone(),
            None => vec![false; self.store.meta.len()],
        };
        for &id in &hits {
            mask[id as usize] = true;
        }
        Corpus {
            store: Arc::clone(&self.store),
            excluded: Some(Arc::new(mask)),
            active: self.active - hits.len(),
        }
    }

    /// Day ids of visible trajectories.
    pub fn day_ids(&self) -> BTreeSet<i64> {
        self.ids().map(|id| self.day_id(id)).collect()
    }

    /// Partitions visible trajectories into `(train, test)` by day id.
    pub fn split_by_day(&self, train_days: &BTreeSet<i64>) -> Result<(Corpus, Corpus)> {
        let present = self.day_ids();
        if let Some(&d) = train_days.iter().find(|d| !present.contains(d)) {
            return Err(Error::UnknownDay(d));
        }
        let (train, test): (Vec<_>, Vec<_>) = self
            .enumerate()
            .into_iter()
            .partition(|t| train_days.contains(&t.day_id));
        Ok((
            Corpus::build(self.n_locations(), train)?,
            Corpus::build(self.n_locations(), test)?,
        ))
    }

    /// Number of distinct visible trajectories that visit each location.
    pub fn busyness(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_locations()];
        let mut seen = vec![u32::MAX; self.n_locations()];
        for id in self.ids() {
            for &l in self.locations(id) {
                if seen[l as usize] != id {
                    seen[l as usize] = id;
                    counts[l as usize] += 1;
                }
            }
        }
        counts
    }

    /// Splits locations into `k` equal-count groups by ascending busyness
    /// (ties by ascending id). Returns the group of each location; group 0
    /// holds the least busy.
    pub fn busyness_groups(&self, k: usize) -> Vec<usize> {
        let k = k.max(1);
        let busy = self.busyness();
        let mut order: Vec<usize> = (0..busy.len()).collect();
        order.sort_by_key(|&l| (busy[l], l));
        let n = order.len();
        let mut groups = vec![0; n];
        for (rank, &l) in order.iter().enumerate() {
            groups[l] = rank * k / n;
        }
        groups
    }
}
