//! Episode runners for the five search strategies.
//!
//! Every runner starts from a witnessed unit `(l_p, t_p)`, may only search
//! moments in `(t_p, t_x]`, and stops once the object is found at `t_x`.
//!
//! * ALT sweeps `t_x` in ranked order.
//! * IPM sweeps a fixed intermediate moment first, then `t_x`.
//! * IEM picks that intermediate moment by minimising estimated cost.
//! * IHMs repeatedly sweeps the moment with the lowest expected searches
//!   per moment of timespan.
//! * IHUs repeatedly searches the single unit with the lowest
//!   `(1/p) / timespan`, discarding training trajectories through every miss.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimator::{estimate_second_stage, Fraction};
use crate::oracle::SearchSession;
use crate::predictor::{Evidence, Predictor, Row};
use crate::{LocationId, MomentId, Unit};

/// The witnessed unit and the moment at which the object must be found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Episode {
    pub start: Unit,
    pub end_moment: MomentId,
}

impl Episode {
    pub fn new(start: Unit, end_moment: MomentId) -> Self {
        Episode { start, end_moment }
    }

    pub fn delta(&self) -> MomentId {
        self.end_moment - self.start.moment
    }

    fn check(&self, predictor: &Predictor, session: &SearchSession) -> Result<()> {
        predictor.corpus().validate_unit(self.start)?;
        if self.end_moment <= self.start.moment {
            return Err(Error::MomentOrder(format!(
                "end t{} must follow start {}",
                self.end_moment, self.start
            )));
        }
        if self.end_moment as usize >= predictor.corpus().n_moments() {
            return Err(Error::MomentOutOfWindow {
                moment: self.end_moment,
                n_moments: predictor.corpus().n_moments(),
            });
        }
        if session.n_moments() != predictor.corpus().n_moments() {
            return Err(Error::WindowMismatch {
                expected: predictor.corpus().n_moments(),
                found: session.n_moments(),
            });
        }
        if session.n_locations() != predictor.n_locations() {
            return Err(Error::InvalidSpec(format!(
                "session has {} locations, corpus {}",
                session.n_locations(),
                predictor.n_locations()
            )));
        }
        if session.horizon().is_some_and(|h| h < self.end_moment) {
            return Err(Error::BeyondHorizon {
                moment: self.end_moment,
                horizon: session.horizon().unwrap_or_default(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Alt,
    /// Intermediate moment; `None` means the midpoint `t_p + Δt/2`.
    Ipm(Option<MomentId>),
    Iem,
    Ihms,
    Ihus,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Alt,
        Strategy::Ipm(None),
        Strategy::Iem,
        Strategy::Ihms,
        Strategy::Ihus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Alt => "alt",
            Strategy::Ipm(_) => "ipm",
            Strategy::Iem => "iem",
            Strategy::Ihms => "ihms",
            Strategy::Ihus => "ihus",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alt" => Ok(Strategy::Alt),
            "ipm" => Ok(Strategy::Ipm(None)),
            "iem" => Ok(Strategy::Iem),
            "ihms" => Ok(Strategy::Ihms),
            "ihus" => Ok(Strategy::Ihus),
            _ => Err(Error::Parse(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Searches spent at one moment; `hit` is where the object was found, if it was.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub moment: MomentId,
    pub spent: usize,
    pub hit: Option<LocationId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackResult {
    pub found_location: LocationId,
    pub total_searches: usize,
    pub steps: Vec<Step>,
}

impl TrackResult {
    fn from_steps(steps: Vec<Step>) -> Self {
        let total_searches = steps.iter().map(|s| s.spent).sum();
        let found_location = steps
            .last()
            .and_then(|s| s.hit)
            .expect("episodes end with a hit");
        TrackResult {
            found_location,
            total_searches,
            steps,
        }
    }

    /// `moment:spent:hit` per step, `;`-separated; a miss prints `-`.
    pub fn steps_string(&self) -> String {
        self.steps
            .iter()
            .map(|s| match s.hit {
                Some(l) => format!("{}:{}:{}", s.moment, s.spent, l),
                None => format!("{}:{}:-", s.moment, s.spent),
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Searches the locations of `t` in ranked order until the object turns up.
fn sweep(session: &mut SearchSession, row: &Row, t: MomentId) -> Result<Step> {
    for (i, l) in row.ranked_locations().enumerate() {
        if session.search(l, t)? {
            return Ok(Step {
                moment: t,
                spent: i + 1,
                hit: Some(l),
            });
        }
    }
    Err(Error::Exhausted(t))
}

fn finish(session: &SearchSession, before: usize, steps: Vec<Step>) -> TrackResult {
    let result = TrackResult::from_steps(steps);
    debug_assert_eq!(result.total_searches, session.cost() - before);
    result
}

pub fn run_alt(
    predictor: &Predictor,
    session: &mut SearchSession,
    ep: &Episode,
) -> Result<TrackResult> {
    ep.check(predictor, session)?;
    let before = session.cost();
    let row = predictor.row_from(ep.start, ep.end_moment)?;
    let step = sweep(session, &row, ep.end_moment)?;
    Ok(finish(session, before, vec![step]))
}

/// The IPM default: halfway between start and end, at least one moment in.
pub fn midpoint(ep: &Episode) -> MomentId {
    ep.start.moment + (ep.delta() / 2).max(1)
}

pub fn run_ipm(
    predictor: &Predictor,
    session: &mut SearchSession,
    ep: &Episode,
    t_mid: MomentId,
) -> Result<TrackResult> {
    ep.check(predictor, session)?;
    if t_mid <= ep.start.moment || t_mid > ep.end_moment {
        return Err(Error::MomentOrder(format!(
            "intermediate moment t{t_mid} outside (t{}, t{}]",
            ep.start.moment, ep.end_moment
        )));
    }
    if t_mid == ep.end_moment {
        return run_alt(predictor, session, ep);
    }
    let before = session.cost();
    let mut ev = Evidence::start(ep.start);
    let first = sweep(session, &*predictor.row(&ev, t_mid)?, t_mid)?;
    ev.push(Unit::new(first.hit.expect("sweep hits"), t_mid))?;
    let second = sweep(session, &*predictor.row(&ev, ep.end_moment)?, ep.end_moment)?;
    Ok(finish(session, before, vec![first, second]))
}

/// Estimated total searches of IPM at every candidate moment in `(t_p, t_x]`.
pub fn iem_scores(predictor: &Predictor, ep: &Episode) -> Result<Vec<(MomentId, f64)>> {
    let mut scores = Vec::with_capacity(ep.delta() as usize);
    for t_k in ep.start.moment + 1..=ep.end_moment {
        let first = predictor.row_from(ep.start, t_k)?.expected_searches();
        let second = if t_k < ep.end_moment {
            estimate_second_stage(predictor, ep.start, t_k, ep.end_moment)?.value()
        } else {
            0.0
        };
        scores.push((t_k, first + second));
    }
    Ok(scores)
}

/// Minimiser of [`iem_scores`], earliest on ties.
pub fn iem_moment(predictor: &Predictor, ep: &Episode) -> Result<MomentId> {
    let scores = iem_scores(predictor, ep)?;
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 < best.1 {
            best = s;
        }
    }
    Ok(best.0)
}

pub fn run_iem(
    predictor: &Predictor,
    session: &mut SearchSession,
    ep: &Episode,
) -> Result<TrackResult> {
    ep.check(predictor, session)?;
    let t_opt = iem_moment(predictor, ep)?;
    run_ipm(predictor, session, ep, t_opt)
}

/// Moment in `(t_cur, t_x]` with the lowest expected searches per moment of
/// timespan, earliest on ties.
pub fn ihms_moment(
    predictor: &Predictor,
    ev: &Evidence,
    end_moment: MomentId,
) -> Result<MomentId> {
    let t_cur = ev.latest().moment;
    let mut best: Option<(Fraction, MomentId)> = None;
    for t_k in t_cur + 1..=end_moment {
        let ind = Fraction::moment_indicator(&*predictor.row(ev, t_k)?, t_k, t_cur)?;
        if best.is_none_or(|(b, _)| ind < b) {
            best = Some((ind, t_k));
        }
    }
    best.map(|(_, t)| t)
        .ok_or_else(|| Error::MomentOrder(format!("no moment after t{t_cur}")))
}

pub fn run_ihms(
    predictor: &Predictor,
    session: &mut SearchSession,
    ep: &Episode,
) -> Result<TrackResult> {
    ep.check(predictor, session)?;
    let before = session.cost();
    let mut ev = Evidence::start(ep.start);
    let mut steps = Vec::new();
    while ev.latest().moment < ep.end_moment {
        let t_opt = ihms_moment(predictor, &ev, ep.end_moment)?;
        let step = sweep(session, &*predictor.row(&ev, t_opt)?, t_opt)?;
        ev.push(Unit::new(step.hit.expect("sweep hits"), t_opt))?;
        steps.push(step);
    }
    Ok(finish(session, before, steps))
}

/// Best not-yet-searched unit of one row: its indicator and location.
fn best_unit_in_row(
    row: &Row,
    t_k: MomentId,
    t_cur: MomentId,
    searched: &HashSet<Unit>,
) -> Result<Option<(Fraction, LocationId)>> {
    let fresh = |l: LocationId| !searched.contains(&Unit::new(l, t_k));
    if row.is_uniform() {
        let n = row.n_locations() as u64;
        return match (0..n as LocationId).find(|&l| fresh(l)) {
            Some(l) => Ok(Some((Fraction::unit_indicator(1, n, t_k, t_cur)?, l))),
            None => Ok(None),
        };
    }
    // support is ordered by descending count, then ascending id
    match row.support().iter().find(|(l, _)| fresh(*l)) {
        Some(&(l, c)) => Ok(Some((Fraction::unit_indicator(c, row.total(), t_k, t_cur)?, l))),
        None => Ok(None),
    }
}

pub fn run_ihus(
    predictor: &Predictor,
    session: &mut SearchSession,
    ep: &Episode,
) -> Result<TrackResult> {
    ep.check(predictor, session)?;
    let before = session.cost();
    let mut ev = Evidence::start(ep.start);
    let mut steps = Vec::new();
    let mut searched: HashSet<Unit> = HashSet::new();
    // None while the training view is unfiltered
    let mut filtered: Option<Predictor> = None;

    while ev.latest().moment < ep.end_moment {
        let t_cur = ev.latest().moment;
        let local = filtered.as_ref().unwrap_or(predictor);
        let mut best: Option<(Fraction, Unit)> = None;
        for t_k in t_cur + 1..=ep.end_moment {
            let row = local.row(&ev, t_k)?;
            if let Some((ind, l)) = best_unit_in_row(&row, t_k, t_cur, &searched)? {
                if best.is_none_or(|(b, _)| ind < b) {
                    best = Some((ind, Unit::new(l, t_k)));
                }
            }
        }
        let unit = match best {
            Some((ind, u)) if !ind.is_infinite() => u,
            // every positive-probability unit is spent: fall back to the
            // lowest unsearched location at the end moment
            _ => (0..predictor.n_locations() as LocationId)
                .map(|l| Unit::new(l, ep.end_moment))
                .find(|u| !searched.contains(u))
                .ok_or(Error::Exhausted(ep.end_moment))?,
        };
        let hit = session.search(unit.location, unit.moment)?;
        searched.insert(unit);
        steps.push(Step {
            moment: unit.moment,
            spent: 1,
            hit: hit.then_some(unit.location),
        });
        if hit {
            ev.push(unit)?;
        } else {
            if let Some(next) = local.excluding(unit) {
                filtered = Some(next);
            }
        }
    }
    Ok(finish(session, before, steps))
}

pub fn run(
    strategy: Strategy,
    predictor: &Predictor,
    session: &mut SearchSession,
    ep: &Episode,
) -> Result<TrackResult> {
    match strategy {
        Strategy::Alt => run_alt(predictor, session, ep),
        Strategy::Ipm(mid) => run_ipm(predictor, session, ep, mid.unwrap_or_else(|| midpoint(ep))),
        Strategy::Iem => run_iem(predictor, session, ep),
        Strategy::Ihms => run_ihms(predictor, session, ep),
        Strategy::Ihus => run_ihus(predictor, session, ep),
    }
}
