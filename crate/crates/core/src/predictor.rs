//! Markov appearing-probability rows.
//!
//! A row is the distribution of an object's location at a target moment
//! given one or two known units, estimated by counting training
//! trajectories: `#(conditions ∧ (l_j, target)) / #(conditions)`. No
//! smoothing is applied; a row whose conditioning set is empty falls back to
//! the uniform distribution.
//!
//! Rows are kept sparse ([`Row`]) because conditioning sets are small
//! compared to the grid; [`PredictionVector`] and [`RankedPrediction`] are
//! the dense views.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::corpus::{Corpus, TrajectoryId};
use crate::error::{Error, Result};
use crate::{LocationId, MomentId, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PredictorKind {
    /// Condition on the latest known unit.
    #[default]
    FirstOrder,
    /// Condition on the latest two known units, falling back to
    /// [`PredictorKind::FirstOrder`] on the latest unit, then uniform.
    SecondOrder,
    /// Latest known location only, with counts pooled over every start
    /// moment at the same lag.
    PooledFirstOrder,
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" | "first_order" => Ok(PredictorKind::FirstOrder),
            "second" | "second_order" => Ok(PredictorKind::SecondOrder),
            "pooled" | "pooled_first_order" => Ok(PredictorKind::PooledFirstOrder),
            _ => Err(Error::Parse(format!("unknown predictor `{s}`"))),
        }
    }
}

impl std::fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PredictorKind::FirstOrder => "first",
            PredictorKind::SecondOrder => "second",
            PredictorKind::PooledFirstOrder => "pooled",
        })
    }
}

/// Whether time-specific counting pools across start moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Count only trajectories at the exact start unit.
    #[default]
    Off,
    /// Count every `(from.location, s) → (l_j, s + lag)` pair in the window.
    ByLag,
}

/// Probability of each location at one moment, indexed by location id.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVector {
    pub target_moment: MomentId,
    pub probs: Vec<f64>,
}

/// A prediction sorted by non-increasing probability, ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction {
    pub target_moment: MomentId,
    pub order: Vec<LocationId>,
    pub probs: Vec<f64>,
}

/// Sorts a prediction for sweeping.
pub fn rank(v: &PredictionVector) -> RankedPrediction {
    let mut order: Vec<LocationId> = (0..v.probs.len() as LocationId).collect();
    // stable sort keeps ascending ids among equal probabilities
    order.sort_by(|&a, &b| v.probs[b as usize].total_cmp(&v.probs[a as usize]));
    let probs = order.iter().map(|&l| v.probs[l as usize]).collect();
    RankedPrediction {
        target_moment: v.target_moment,
        order,
        probs,
    }
}

/// Known units of the target's trajectory, strictly increasing in moment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence {
    units: Vec<Unit>,
}

impl Evidence {
    pub fn new(units: Vec<Unit>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::EmptyEvidence);
        }
        if units.windows(2).any(|w| w[0].moment >= w[1].moment) {
            return Err(Error::MomentOrder(
                "evidence moments must strictly increase".into(),
            ));
        }
        Ok(Evidence { units })
    }

    pub fn start(u: Unit) -> Self {
        Evidence { units: vec![u] }
    }

    pub fn push(&mut self, u: Unit) -> Result<()> {
        if u.moment <= self.latest().moment {
            return Err(Error::MomentOrder(format!(
                "{u} does not follow {}",
                self.latest()
            )));
        }
        self.units.push(u);
        Ok(())
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn latest(&self) -> Unit {
        *self.units.last().expect("evidence is never empty")
    }

    /// The unit before the latest one, if any.
    pub fn previous(&self) -> Option<Unit> {
        self.units.len().checked_sub(2).map(|i| self.units[i])
    }
}

/// A sparse prediction row: integer counts over a conditioning set, or the
/// uniform fallback when that set is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    target_moment: MomentId,
    n_locations: usize,
    /// Size of the conditioning set; 0 for the uniform fallback.
    total: u64,
    /// Non-zero counts by descending count, ties by ascending id.
    support: Vec<(LocationId, u64)>,
}

impl Row {
    pub fn uniform(n_locations: usize, target_moment: MomentId) -> Self {
        Row {
            target_moment,
            n_locations,
            total: 0,
            support: Vec::new(),
        }
    }

    /// Builds a row from per-location counts; all-zero counts give the
    /// uniform fallback.
    pub fn from_counts(target_moment: MomentId, counts: &[u64]) -> Self {
        let mut support: Vec<(LocationId, u64)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(l, &c)| (l as LocationId, c))
            .collect();
        support.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Row {
            target_moment,
            n_locations: counts.len(),
            total: support.iter().map(|(_, c)| c).sum(),
            support,
        }
    }

    fn from_sparse(target_moment: MomentId, n_locations: usize, mut support: Vec<(LocationId, u64)>) -> Self {
        support.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Row {
            target_moment,
            n_locations,
            total: support.iter().map(|(_, c)| c).sum(),
            support,
        }
    }

    pub fn target_moment(&self) -> MomentId {
        self.target_moment
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    pub fn is_uniform(&self) -> bool {
        self.total == 0
    }

    /// Size of the conditioning set (0 when uniform).
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Non-zero `(location, count)` pairs in ranked order; empty when uniform.
    pub fn support(&self) -> &[(LocationId, u64)] {
        &self.support
    }

    pub fn count(&self, l: LocationId) -> u64 {
        self.support
            .iter()
            .find(|(loc, _)| *loc == l)
            .map_or(0, |(_, c)| *c)
    }

    pub fn prob(&self, l: LocationId) -> f64 {
        if (l as usize) >= self.n_locations {
            return 0.0;
        }
        if self.is_uniform() {
            1.0 / self.n_locations as f64
        } else {
            self.count(l) as f64 / self.total as f64
        }
    }

    /// `p(l)` as an exact fraction `(numerator, denominator)`.
    pub fn prob_ratio(&self, l: LocationId) -> (u64, u64) {
        if self.is_uniform() {
            (1, self.n_locations as u64)
        } else {
            (self.count(l), self.total)
        }
    }

    pub fn to_vector(&self) -> PredictionVector {
        let probs = (0..self.n_locations as LocationId)
            .map(|l| self.prob(l))
            .collect();
        PredictionVector {
            target_moment: self.target_moment,
            probs,
        }
    }

    /// Locations in sweep order: the support first, then the remaining
    /// locations by ascending id.
    pub fn ranked_locations(&self) -> impl Iterator<Item = LocationId> + '_ {
        let mut in_support = vec![false; if self.is_uniform() { 0 } else { self.n_locations }];
        for &(l, _) in &self.support {
            in_support[l as usize] = true;
        }
        let rest = (0..self.n_locations as LocationId)
            .filter(move |&l| in_support.get(l as usize).is_none_or(|s| !s));
        self.support.iter().map(|(l, _)| *l).chain(rest)
    }

    pub fn ranked(&self) -> RankedPrediction {
        let order: Vec<LocationId> = self.ranked_locations().collect();
        let probs = order.iter().map(|&l| self.prob(l)).collect();
        RankedPrediction {
            target_moment: self.target_moment,
            order,
            probs,
        }
    }

    /// 1-based sweep position of `l`.
    pub fn position_of(&self, l: LocationId) -> usize {
        if self.is_uniform() {
            return l as usize + 1;
        }
        if let Some(i) = self.support.iter().position(|(loc, _)| *loc == l) {
            return i + 1;
        }
        let below = self.support.iter().filter(|(loc, _)| *loc < l).count();
        self.support.len() + (l as usize - below) + 1
    }

    /// Expected searches of a sweep as an exact fraction.
    pub fn expected_searches_ratio(&self) -> (u64, u64) {
        if self.is_uniform() {
            return (self.n_locations as u64 + 1, 2);
        }
        let num = self
            .support
            .iter()
            .enumerate()
            .map(|(i, (_, c))| (i as u64 + 1) * c)
            .sum();
        (num, self.total)
    }

    /// Expected searches of a sweep: `Σ j × p'_j` over ranked positions.
    pub fn expected_searches(&self) -> f64 {
        let (n, d) = self.expected_searches_ratio();
        n as f64 / d as f64
    }
}

fn check_target(c: &Corpus, from: Unit, target: MomentId) -> Result<()> {
    c.validate_unit(from)?;
    c.validate_unit(Unit::new(0, target))?;
    if target <= from.moment {
        return Err(Error::MomentOrder(format!(
            "target t{target} must come after {from}"
        )));
    }
    Ok(())
}

/// Counts destinations at `target` over trajectories matching `conditions`;
/// `None` when nothing matches.
fn count_row(c: &Corpus, conditions: &[Unit], target: MomentId) -> Option<Row> {
    let ids = c.ids_matching(conditions);
    if ids.is_empty() {
        return None;
    }
    let mut counts: HashMap<LocationId, u64> = HashMap::new();
    for id in ids {
        *counts.entry(c.location(id, target)).or_default() += 1;
    }
    Some(Row::from_sparse(
        target,
        c.n_locations(),
        counts.into_iter().collect(),
    ))
}

pub fn first_order_row(c: &Corpus, from: Unit, target: MomentId) -> Result<Row> {
    check_target(c, from, target)?;
    Ok(count_row(c, &[from], target).unwrap_or_else(|| Row::uniform(c.n_locations(), target)))
}

pub fn second_order_row(c: &Corpus, first: Unit, second: Unit, target: MomentId) -> Result<Row> {
    check_target(c, second, target)?;
    c.validate_unit(first)?;
    if first.moment > second.moment {
        return Err(Error::MomentOrder(format!("{first} must not follow {second}")));
    }
    let conditions: &[Unit] = if first == second {
        &[first]
    } else {
        &[first, second]
    };
    match count_row(c, conditions, target) {
        Some(row) => Ok(row),
        None => first_order_row(c, second, target),
    }
}

pub fn pooled_first_order_row(c: &Corpus, from: Unit, target: MomentId) -> Result<Row> {
    pooled_row(c, from, target, &[])
}

/// Lag-pooled counts. A sample window starting at `s` is dropped when its
/// trajectory sits at a missed location at the same offset from `s` as the
/// miss has from `from`.
fn pooled_row(c: &Corpus, from: Unit, target: MomentId, misses: &[Unit]) -> Result<Row> {
    check_target(c, from, target)?;
    let lag = target - from.moment;
    let n_moments = c.n_moments() as i64;
    let mut counts: HashMap<LocationId, u64> = HashMap::new();
    for start in 0..(c.n_moments() as MomentId - lag) {
        let shifted: Vec<(LocationId, MomentId)> = misses
            .iter()
            .filter_map(|m| {
                let t = start as i64 + m.moment as i64 - from.moment as i64;
                (0..n_moments).contains(&t).then_some((m.location, t as MomentId))
            })
            .collect();
        for id in c.ids_matching(&[Unit::new(from.location, start)]) {
            if shifted.iter().any(|&(l, t)| c.location(id, t) == l) {
                continue;
            }
            *counts.entry(c.location(id, start + lag)).or_default() += 1;
        }
    }
    Ok(Row::from_sparse(target, c.n_locations(), counts.into_iter().collect()))
}

/// A lag-pooling sample: trajectory `id` observed from moment `start` on.
type Window = (TrajectoryId, MomentId);

fn pooled_windows(c: &Corpus, from: Unit) -> Vec<Window> {
    let mut out = Vec::new();
    for start in 0..c.n_moments() as MomentId {
        for id in c.ids_matching(&[Unit::new(from.location, start)]) {
            out.push((id, start));
        }
    }
    out
}

/// Drops the windows that pass `miss` at its offset from `from`.
fn drop_windows(c: &Corpus, from: Unit, windows: &[Window], miss: Unit) -> Vec<Window> {
    let offset = miss.moment as i64 - from.moment as i64;
    let n_moments = c.n_moments() as i64;
    windows
        .iter()
        .copied()
        .filter(|&(id, start)| {
            let t = start as i64 + offset;
            !(0..n_moments).contains(&t) || c.location(id, t as MomentId) != miss.location
        })
        .collect()
}

fn row_from_windows(c: &Corpus, windows: &[Window], lag: MomentId, target: MomentId) -> Row {
    let mut counts = vec![0u64; c.n_locations()];
    for &(id, start) in windows {
        let t = start + lag;
        if (t as usize) < c.n_moments() {
            counts[c.location(id, t) as usize] += 1;
        }
    }
    let support = counts
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > 0)
        .map(|(l, n)| (l as LocationId, n))
        .collect();
    Row::from_sparse(target, c.n_locations(), support)
}

/// `p(l_j) = #(from ∧ (l_j, target)) / #(from)`, uniform when `#(from) = 0`.
pub fn first_order(c: &Corpus, from: Unit, target: MomentId) -> Result<PredictionVector> {
    first_order_row(c, from, target).map(|r| r.to_vector())
}

/// Conditions on two units; falls back to [`first_order`] from `second`
/// when no trajectory matches both.
pub fn second_order(
    c: &Corpus,
    first: Unit,
    second: Unit,
    target: MomentId,
) -> Result<PredictionVector> {
    second_order_row(c, first, second, target).map(|r| r.to_vector())
}

pub fn time_specific_first_order(
    c: &Corpus,
    from: Unit,
    target: MomentId,
    pooling: Pooling,
) -> Result<PredictionVector> {
    match pooling {
        Pooling::Off => first_order(c, from, target),
        Pooling::ByLag => pooled_first_order_row(c, from, target).map(|r| r.to_vector()),
    }
}

fn row_for(
    c: &Corpus,
    ev: &Evidence,
    target: MomentId,
    kind: PredictorKind,
    misses: &[Unit],
) -> Result<Row> {
    let latest = ev.latest();
    match (kind, ev.previous()) {
        (PredictorKind::SecondOrder, Some(prev)) => second_order_row(c, prev, latest, target),
        (PredictorKind::PooledFirstOrder, _) => pooled_row(c, latest, target, misses),
        _ => first_order_row(c, latest, target),
    }
}

pub fn predict(
    c: &Corpus,
    ev: &Evidence,
    target: MomentId,
    kind: PredictorKind,
) -> Result<PredictionVector> {
    row_for(c, ev, target, kind, &[]).map(|r| r.to_vector())
}

type CacheKey = (Unit, Option<Unit>, MomentId);

/// Memoizing row source over one corpus view.
///
/// Safe to share between threads; concurrent lookups return the same rows
/// as sequential ones.
#[derive(Debug)]
pub struct Predictor {
    corpus: Corpus,
    kind: PredictorKind,
    /// Units known not to hold the target; only lag pooling reads them, the
    /// other kinds drop the matching trajectories from `corpus` instead.
    misses: Vec<Unit>,
    /// Surviving lag-pooling windows per start unit.
    windows: RwLock<HashMap<Unit, Arc<Vec<Window>>>>,
    cache: RwLock<HashMap<CacheKey, Arc<Row>>>,
}

impl Predictor {
    pub fn new(corpus: Corpus, kind: PredictorKind) -> Self {
        Predictor {
            corpus,
            kind,
            misses: Vec::new(),
            windows: RwLock::new(HashMap::new()),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn kind(&self) -> PredictorKind {
        self.kind
    }

    pub fn n_locations(&self) -> usize {
        self.corpus.n_locations()
    }

    /// The same kind over a different corpus view, with an empty cache.
    pub fn with_corpus(&self, corpus: Corpus) -> Predictor {
        Predictor::new(corpus, self.kind)
    }

    /// Conditions every later row on the target not having been at `miss`.
    ///
    /// Unit-conditioned kinds drop the trajectories through `miss`. Lag
    /// pooling drops the sample windows that pass `miss` at the same offset,
    /// so a miss at the target moment removes exactly that location's mass.
    /// Returns `None` when nothing would change.
    pub fn excluding(&self, miss: Unit) -> Option<Predictor> {
        let mut next = match self.kind {
            PredictorKind::PooledFirstOrder => {
                let next = self.with_corpus(self.corpus.clone());
                // Filter the known windows by the new miss only. An unfiltered
                // predictor is usually shared and caches every start unit
                // ever asked for, so its windows are rebuilt lazily instead.
                if !self.misses.is_empty() {
                    if let (Ok(old), Ok(mut new)) = (self.windows.read(), next.windows.write()) {
                        for (&from, ws) in old.iter() {
                            new.insert(from, Arc::new(drop_windows(&self.corpus, from, ws, miss)));
                        }
                    }
                }
                next
            }
            _ => {
                let view = self.corpus.remove_through(miss);
                if view.len() == self.corpus.len() {
                    return None;
                }
                self.with_corpus(view)
            }
        };
        next.misses = self.misses.clone();
        next.misses.push(miss);
        Some(next)
    }

    pub fn cached_rows(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    pub fn row(&self, ev: &Evidence, target: MomentId) -> Result<Arc<Row>> {
        let prev = match self.kind {
            PredictorKind::SecondOrder => ev.previous(),
            _ => None,
        };
        let key = (ev.latest(), prev, target);
        if let Some(row) = self.cache.read().ok().and_then(|c| c.get(&key).cloned()) {
            return Ok(row);
        }
        let row = Arc::new(match self.kind {
            PredictorKind::PooledFirstOrder => self.pooled(ev.latest(), target)?,
            _ => row_for(&self.corpus, ev, target, self.kind, &self.misses)?,
        });
        if let Ok(mut cache) = self.cache.write() {
            cache.entry(key).or_insert_with(|| Arc::clone(&row));
        }
        Ok(row)
    }

    fn pooled(&self, from: Unit, target: MomentId) -> Result<Row> {
        check_target(&self.corpus, from, target)?;
        let known = self.windows.read().ok().and_then(|w| w.get(&from).cloned());
        let windows = match known {
            Some(ws) => ws,
            None => {
                let mut ws = pooled_windows(&self.corpus, from);
                for &m in &self.misses {
                    ws = drop_windows(&self.corpus, from, &ws, m);
                }
                let ws = Arc::new(ws);
                if let Ok(mut w) = self.windows.write() {
                    w.entry(from).or_insert_with(|| Arc::clone(&ws));
                }
                ws
            }
        };
        Ok(row_from_windows(&self.corpus, &windows, target - from.moment, target))
    }

    /// Row conditioned on a single unit.
    pub fn row_from(&self, from: Unit, target: MomentId) -> Result<Arc<Row>> {
        self.row(&Evidence::start(from), target)
    }
}
