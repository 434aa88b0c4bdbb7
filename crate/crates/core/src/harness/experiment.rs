use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::metrics::mean_std;
use crate::corpus::{Corpus, TrajectoryId};
use crate::error::{Error, Result};
use crate::io::KeyValues;
use crate::oracle::SearchSession;
use crate::predictor::{Predictor, PredictorKind};
use crate::strategies::{self, Episode, Strategy, TrackResult};
use crate::{LocationId, MomentId, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// Fixed `delta_t`, one cell per start moment.
    FixedDelta,
    /// Fixed start moment (the first of `start_moments`), one cell per end moment.
    FixedStart,
    /// Fixed `delta_t`; cells are busyness groups of the start location.
    Busyness,
}

impl Setting {
    pub fn name(&self) -> &'static str {
        match self {
            Setting::FixedDelta => "fixed_delta",
            Setting::FixedStart => "fixed_start",
            Setting::Busyness => "busyness",
        }
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_delta" | "fixed-delta" => Ok(Setting::FixedDelta),
            "fixed_start" | "fixed-start" => Ok(Setting::FixedStart),
            "busyness" | "busyness_groups" => Ok(Setting::Busyness),
            _ => Err(Error::Parse(format!("unknown setting `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub setting: Setting,
    pub delta_t: MomentId,
    pub start_moments: Vec<MomentId>,
    pub end_moments: Vec<MomentId>,
    pub strategies: Vec<Strategy>,
    pub predictor: PredictorKind,
    /// Number of busyness groups.
    pub groups: usize,
    /// Evaluate at most this many test trajectories, drawn with the run seed.
    pub test_sample: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            setting: Setting::FixedDelta,
            delta_t: 30,
            start_moments: vec![0],
            end_moments: Vec::new(),
            strategies: Strategy::ALL.to_vec(),
            predictor: PredictorKind::FirstOrder,
            groups: 4,
            test_sample: None,
        }
    }
}

impl ExperimentSpec {
    /// Reads `setting`, `delta_t`, `start_moments`, `end_moments`,
    /// `strategies`, `predictor`, `groups` and `test_sample`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        const KNOWN: [&str; 8] = [
            "setting",
            "delta_t",
            "start_moments",
            "end_moments",
            "strategies",
            "predictor",
            "groups",
            "test_sample",
        ];
        if let Some(k) = kv.keys().find(|k| !KNOWN.contains(k)) {
            return Err(Error::InvalidSpec(format!("unknown key `{k}`")));
        }
        let d = ExperimentSpec::default();
        let spec = ExperimentSpec {
            setting: kv.parse_or("setting", d.setting)?,
            delta_t: kv.parse_or("delta_t", d.delta_t)?,
            start_moments: kv.list("start_moments")?.unwrap_or(d.start_moments),
            end_moments: kv.list("end_moments")?.unwrap_or(d.end_moments),
            strategies: kv.list("strategies")?.unwrap_or(d.strategies),
            predictor: kv.parse_or("predictor", d.predictor)?,
            groups: kv.parse_or("groups", d.groups)?,
            test_sample: match kv.get("test_sample") {
                Some(_) => Some(kv.parse("test_sample")?),
                None => None,
            },
        };
        spec.validate(None)?;
        Ok(spec)
    }

    /// Checks the spec, and its moments against a window of `n_moments` if given.
    pub fn validate(&self, n_moments: Option<usize>) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.strategies.is_empty() {
            return bad("no strategies".into());
        }
        if self.start_moments.is_empty() {
            return bad("no start moments".into());
        }
        if self.groups == 0 {
            return bad("groups must be at least 1".into());
        }
        match self.setting {
            Setting::FixedStart => {
                if self.end_moments.is_empty() {
                    return bad("fixed_start needs end_moments".into());
                }
                if let Some(&t) = self.end_moments.iter().find(|&&t| t <= self.start_moments[0]) {
                    return bad(format!("end moment {t} is not after the start"));
                }
            }
            _ => {
                if self.delta_t == 0 {
                    return bad("delta_t must be at least 1".into());
                }
            }
        }
        if let Some(n) = n_moments {
            let last = self
                .episode_moments()
                .into_iter()
                .map(|(_, _, end)| end)
                .max()
                .unwrap_or(0);
            if last as usize >= n {
                return bad(format!("moment {last} outside a {n}-moment window"));
            }
        }
        Ok(())
    }

    /// `(key, start, end)` for every cell family; busyness keys are filled in later.
    fn episode_moments(&self) -> Vec<(u32, MomentId, MomentId)> {
        match self.setting {
            Setting::FixedDelta => self
                .start_moments
                .iter()
                .map(|&s| (s, s, s + self.delta_t))
                .collect(),
            Setting::FixedStart => {
                let s = self.start_moments[0];
                self.end_moments.iter().map(|&e| (e, s, e)).collect()
            }
            Setting::Busyness => self
                .start_moments
                .iter()
                .map(|&s| (0, s, s + self.delta_t))
                .collect(),
        }
    }
}

/// Aggregated searches of one `(key, strategy)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub setting: Setting,
    /// Start moment, end moment, busyness group or IPM offset, by setting.
    pub key: u32,
    pub strategy: String,
    pub mean_searches: f64,
    pub std_searches: f64,
    pub episodes: usize,
    /// Episodes whose start unit never occurs in the training data.
    pub cold_starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub key: u32,
    pub strategy: String,
    pub object_id: String,
    pub day_id: i64,
    pub t_p: MomentId,
    pub t_x: MomentId,
    pub start_loc: LocationId,
    pub found_loc: LocationId,
    pub total_searches: usize,
    pub steps: String,
    pub cold_start: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub episodes: Vec<EpisodeRecord>,
}

impl Report {
    pub fn write_rows<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "setting",
            "key",
            "strategy",
            "mean_searches",
            "std_searches",
            "episodes",
            "cold_starts",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.setting.name().to_string(),
                r.key.to_string(),
                r.strategy.clone(),
                format!("{:.6}", r.mean_searches),
                format!("{:.6}", r.std_searches),
                r.episodes.to_string(),
                r.cold_starts.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_episodes<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "strategy",
            "object_id",
            "day_id",
            "t_p",
            "t_x",
            "start_loc",
            "found_loc",
            "total_searches",
            "steps",
        ])?;
        for e in &self.episodes {
            wtr.write_record([
                e.strategy.clone(),
                e.object_id.clone(),
                e.day_id.to_string(),
                e.t_p.to_string(),
                e.t_x.to_string(),
                e.start_loc.to_string(),
                e.found_loc.to_string(),
                e.total_searches.to_string(),
                e.steps.clone(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn row(&self, key: u32, strategy: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.key == key && r.strategy == strategy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 uses rayon's default.
    pub threads: usize,
    /// Seeds the test-set sample.
    pub seed: u64,
    /// Replace the strategy list by IPM at every offset `1..=delta_t`.
    pub param_sweep: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: 1,
            seed: 0,
            param_sweep: false,
        }
    }
}

struct Job {
    key: u32,
    strategy: Strategy,
    test_id: TrajectoryId,
    episode: Episode,
}

fn sample_tests(test: &Corpus, n: Option<usize>, seed: u64) -> Vec<TrajectoryId> {
    let ids: Vec<TrajectoryId> = test.ids().collect();
    match n {
        Some(n) if n < ids.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<TrajectoryId> = rand::seq::index::sample(&mut rng, ids.len(), n)
                .into_iter()
                .map(|i| ids[i])
                .collect();
            picked.sort_unstable();
            picked
        }
        _ => ids,
    }
}

fn run_job(predictor: &Predictor, test: &Corpus, job: &Job) -> Result<TrackResult> {
    let truth = test.trajectory(job.test_id);
    let mut session =
        SearchSession::open(&truth, predictor.n_locations())?.with_horizon(job.episode.end_moment);
    let result = strategies::run(job.strategy, predictor, &mut session, &job.episode)?;
    let expected = test.location(job.test_id, job.episode.end_moment);
    if result.found_location != expected || result.total_searches != session.cost() {
        return Err(Error::InvalidSpec(format!(
            "{} returned l{} after {} searches, truth l{expected} after {}",
            job.strategy,
            result.found_location,
            result.total_searches,
            session.cost()
        )));
    }
    Ok(result)
}

/// Runs every `(cell, strategy, test trajectory)` episode and aggregates
/// total searches per cell.
///
/// Episodes are evaluated in parallel but collected in a fixed order, so the
/// report does not depend on the thread count.
pub fn run_experiment(
    spec: &ExperimentSpec,
    train: &Corpus,
    test: &Corpus,
    opts: &RunOptions,
) -> Result<Report> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    if train.n_moments() != test.n_moments() && !train.is_empty() {
        return Err(Error::WindowMismatch {
            expected: train.n_moments(),
            found: test.n_moments(),
        });
    }
    if train.n_locations() != test.n_locations() {
        return Err(Error::InvalidSpec(format!(
            "train has {} locations, test {}",
            train.n_locations(),
            test.n_locations()
        )));
    }
    spec.validate(Some(test.n_moments()))?;

    let tests = sample_tests(test, spec.test_sample, opts.seed);
    let groups = match spec.setting {
        Setting::Busyness => Some(train.busyness_groups(spec.groups)),
        _ => None,
    };

    let mut jobs = Vec::new();
    for (key, start, end) in spec.episode_moments() {
        for &id in &tests {
            let start_loc = test.location(id, start);
            let key = match &groups {
                Some(g) => g[start_loc as usize] as u32,
                None => key,
            };
            let episode = Episode::new(Unit::new(start_loc, start), end);
            if opts.param_sweep {
                for offset in 1..=episode.delta() {
                    jobs.push(Job {
                        key: offset,
                        strategy: Strategy::Ipm(Some(start + offset)),
                        test_id: id,
                        episode,
                    });
                }
            } else {
                for &strategy in &spec.strategies {
                    jobs.push(Job {
                        key,
                        strategy,
                        test_id: id,
                        episode,
                    });
                }
            }
        }
    }

    let predictor = Predictor::new(train.clone(), spec.predictor);
    let run_all = || -> Result<Vec<TrackResult>> {
        jobs.par_iter()
            .map(|job| run_job(&predictor, test, job))
            .collect()
    };
    let results = if opts.threads == 0 {
        run_all()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::InvalidSpec(e.to_string()))?
            .install(run_all)?
    };

    let mut episodes = Vec::with_capacity(jobs.len());
    let mut cells: BTreeMap<(u32, usize), (Vec<f64>, usize)> = BTreeMap::new();
    let strategy_order = |s: &Strategy| {
        Strategy::ALL
            .iter()
            .position(|a| a.name() == s.name())
            .unwrap_or(0)
    };
    for (job, result) in jobs.iter().zip(results) {
        let start = job.episode.start;
        let cold = train.count_matching(&[start]) == 0;
        let cell = cells
            .entry((job.key, strategy_order(&job.strategy)))
            .or_default();
        cell.0.push(result.total_searches as f64);
        cell.1 += usize::from(cold);
        episodes.push(EpisodeRecord {
            key: job.key,
            strategy: job.strategy.name().to_string(),
            object_id: test.object_id(job.test_id).to_string(),
            day_id: test.day_id(job.test_id),
            t_p: start.moment,
            t_x: job.episode.end_moment,
            start_loc: start.location,
            found_loc: result.found_location,
            total_searches: result.total_searches,
            steps: result.steps_string(),
            cold_start: cold,
        });
    }
    let rows = cells
        .into_iter()
        .map(|((key, s), (values, cold_starts))| {
            let (mean, std) = mean_std(&values);
            ReportRow {
                setting: spec.setting,
                key,
                strategy: Strategy::ALL[s].name().to_string(),
                mean_searches: mean,
                std_searches: std,
                episodes: values.len(),
                cold_starts,
            }
        })
        .collect();
    Ok(Report { rows, episodes })
}
