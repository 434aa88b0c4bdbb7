//! Acceptance suite. Runs without the libtest harness and prints one
//! `PASS`/`FAIL` line per criterion; exits non-zero if any fails.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stsearch::estimator::{estimate_second_stage, expected_searches};
use stsearch::harness::{
    realized_alt_cost, run_experiment, synth, top_n_accuracy, ExperimentSpec, RunOptions,
    SynthParams,
};
use stsearch::predictor::{first_order, rank, second_order, PredictionVector};
use stsearch::strategies::{self, Episode, Strategy};
use stsearch::{toy, Corpus, DiscreteTrajectory, GridConfig, Predictor, PredictorKind, SearchSession, Unit};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- criterion 1

fn toy_fixture() -> Outcome {
    let start = Instant::now();
    let c = toy::corpus();
    // 1-based (l, t) labels to 0-based units
    let u = |l: u32, t: u32| Unit::new(l - 1, t - 1);
    let vec_eq = |got: &PredictionVector, want: &[f64]| {
        got.probs.len() == want.len() && got.probs.iter().zip(want).all(|(a, b)| close(*a, *b, 1e-12))
    };

    let a = first_order(&c, u(2, 1), 2).map_err(|e| e.to_string())?;
    check(vec_eq(&a, &[1.0 / 3.0, 0.0, 2.0 / 3.0, 0.0]), || format!("(l2,t1)->t3 = {:?}", a.probs))?;
    let b = first_order(&c, u(4, 1), 2).map_err(|e| e.to_string())?;
    check(vec_eq(&b, &[0.25; 4]), || format!("(l4,t1)->t3 = {:?}", b.probs))?;
    let s = second_order(&c, u(2, 1), u(4, 2), 2).map_err(|e| e.to_string())?;
    check(vec_eq(&s, &[0.0, 0.0, 1.0, 0.0]), || format!("second order = {:?}", s.probs))?;
    let en = expected_searches(&rank(&a)).0;
    check(close(en, 4.0 / 3.0, 1e-12), || format!("en = {en}"))?;
    let p = Predictor::new(c, PredictorKind::SecondOrder);
    let n = estimate_second_stage(&p, u(2, 1), 1, 2).map_err(|e| e.to_string())?.0;
    check(close(n, 1.0, 1e-12), || format!("second stage = {n}"))?;

    within(Duration::from_secs(1), start.elapsed())?;
    Ok(format!("all five values exact, {:.1?}", start.elapsed()))
}

// ---------------------------------------------------------------- criterion 2

/// Trajectories as plain rows; every quantity below is computed by scanning
/// them directly, without the corpus index or the predictor.
struct Enum {
    rows: Vec<Vec<u32>>,
    n_locations: usize,
}

impl Enum {
    fn through<'a>(&'a self, units: &'a [Unit]) -> impl Iterator<Item = &'a Vec<u32>> + 'a {
        self.rows
            .iter()
            .filter(move |r| units.iter().all(|u| r[u.moment as usize] == u.location))
    }

    /// Location counts at `target` among trajectories through all of `units`.
    fn counts(&self, units: &[Unit], target: u32) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_locations];
        for r in self.through(units) {
            counts[r[target as usize] as usize] += 1;
        }
        counts
    }

    /// 1-based sweep position of `l`: higher counts first, ties by id.
    fn position(counts: &[u64], l: usize) -> usize {
        1 + counts
            .iter()
            .enumerate()
            .filter(|&(j, &c)| c > counts[l] || (c == counts[l] && j < l))
            .count()
    }

    /// Expected searches: each matching trajectory weighs equally and costs
    /// the position of its own outcome. No match means a uniform row.
    fn en(&self, units: &[Unit], target: u32) -> Option<f64> {
        let counts = self.counts(units, target);
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return None;
        }
        let sum: usize = self
            .through(units)
            .map(|r| Self::position(&counts, r[target as usize] as usize))
            .sum();
        Some(sum as f64 / total as f64)
    }

    fn uniform_en(&self) -> f64 {
        (self.n_locations as f64 + 1.0) / 2.0
    }

    fn en_end(&self, start: Unit, mid: Unit, end: u32, kind: PredictorKind) -> f64 {
        match kind {
            PredictorKind::SecondOrder => self
                .en(&[start, mid], end)
                .or_else(|| self.en(&[mid], end))
                .unwrap_or_else(|| self.uniform_en()),
            _ => self.en(&[mid], end).unwrap_or_else(|| self.uniform_en()),
        }
    }

    /// Second-stage estimate: average the end cost over every training
    /// outcome at the mid moment; with no outcome, over all locations.
    fn second_stage(&self, start: Unit, mid: u32, end: u32, kind: PredictorKind) -> f64 {
        let matches: Vec<&Vec<u32>> = self.through(std::slice::from_ref(&start)).collect();
        if matches.is_empty() {
            let sum: f64 = (0..self.n_locations as u32)
                .map(|l| self.en_end(start, Unit::new(l, mid), end, kind))
                .sum();
            return sum / self.n_locations as f64;
        }
        let sum: f64 = matches
            .iter()
            .map(|r| self.en_end(start, Unit::new(r[mid as usize], mid), end, kind))
            .sum();
        sum / matches.len() as f64
    }
}

fn random_corpus(rng: &mut ChaCha8Rng) -> (Corpus, Enum) {
    let nl = rng.gen_range(1..=6);
    let nt = rng.gen_range(3..=5);
    let n = rng.gen_range(1..=50);
    // skewed choice so that rows are not all flat
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            (0..nt)
                .map(|_| {
                    let a = rng.gen_range(0..nl as u32);
                    let b = rng.gen_range(0..nl as u32);
                    a.min(b)
                })
                .collect()
        })
        .collect();
    let ts = rows
        .iter()
        .enumerate()
        .map(|(i, r)| DiscreteTrajectory::complete(format!("o{i}"), 0, r.clone()))
        .collect();
    (Corpus::build(nl, ts).unwrap(), Enum { rows, n_locations: nl })
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut en_checks, mut stage_checks, mut alt_checks) = (0, 0, 0);
    for case in 0..150 {
        let (c, e) = random_corpus(&mut rng);
        let nl = c.n_locations() as u32;
        let nt = c.n_moments() as u32;

        for kind in [PredictorKind::FirstOrder, PredictorKind::SecondOrder] {
            let p = Predictor::new(c.clone(), kind);
            for t0 in 0..nt {
                for l in 0..nl {
                    let start = Unit::new(l, t0);
                    for target in t0 + 1..nt {
                        let got = p.row_from(start, target).unwrap().expected_searches();
                        let want = e.en(&[start], target).unwrap_or_else(|| e.uniform_en());
                        check(close(got, want, 1e-9), || {
                            format!("case {case}: en {start}->t{target} = {got}, oracle {want}")
                        })?;
                        en_checks += 1;
                        for mid in t0 + 1..target {
                            let got = estimate_second_stage(&p, start, mid, target).unwrap().0;
                            let want = e.second_stage(start, mid, target, kind);
                            check(close(got, want, 1e-9), || {
                                format!("case {case} {kind}: n {start} t{mid} t{target} = {got}, oracle {want}")
                            })?;
                            stage_checks += 1;
                        }
                    }
                }
            }
        }

        // ALT with test = train: mean realized cost is the mean truth rank,
        // and the enumeration weights make it the count-weighted mean of en.
        let p = Predictor::new(c.clone(), PredictorKind::FirstOrder);
        let t_p = rng.gen_range(0..nt - 1);
        let t_x = rng.gen_range(t_p + 1..nt);
        let (mut cost, mut rank_sum, mut en_sum) = (0usize, 0usize, 0.0);
        for id in c.ids() {
            let truth = c.trajectory(id);
            let mut s = SearchSession::open(&truth, c.n_locations()).unwrap().with_horizon(t_x);
            let start = Unit::new(c.location(id, t_p), t_p);
            let r = strategies::run_alt(&p, &mut s, &Episode::new(start, t_x)).unwrap();
            cost += r.total_searches;
            let counts = e.counts(&[start], t_x);
            rank_sum += Enum::position(&counts, c.location(id, t_x) as usize);
            en_sum += e.en(&[start], t_x).unwrap();
        }
        check(cost == rank_sum, || format!("case {case}: ALT total {cost}, rank total {rank_sum}"))?;
        check(close(cost as f64, en_sum, 1e-9), || format!("case {case}: ALT total {cost}, en total {en_sum}"))?;
        alt_checks += 1;
    }
    within(Duration::from_secs(30), started.elapsed())?;
    Ok(format!(
        "150 corpora: {en_checks} en, {stage_checks} second-stage, {alt_checks} ALT-rank checks, {:.1?}",
        started.elapsed()
    ))
}

// ---------------------------------------------------------------- criterion 3

fn strategy_invariants() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let kinds = [PredictorKind::FirstOrder, PredictorKind::SecondOrder, PredictorKind::PooledFirstOrder];
    let mut episodes = 0usize;
    let mut one_step = 0usize;
    while episodes < 1200 {
        let rows = rng.gen_range(2..=5);
        let cols = rng.gen_range(2..=5);
        let nt = rng.gen_range(2..=12u32);
        let grid = GridConfig {
            n_rows: rows,
            n_cols: cols,
            day_end: GridConfig::default().day_start + nt * 60,
            ..GridConfig::default()
        };
        let n_objects = rng.gen_range(1..=15);
        let ts = synth(&SynthParams {
            grid: grid.clone(),
            n_objects,
            n_days: rng.gen_range(2..=6),
            persistence: rng.gen_range(0.0..=1.0),
            hubs: rng.gen_range(0..3),
            seed: rng.gen(),
        })
        .unwrap();
        let nl = grid.n_locations();
        let all = Corpus::build(nl, ts).unwrap();
        let last = *all.day_ids().iter().last().unwrap();
        let (train, test) = all.split_by_day(&(0..last).collect()).unwrap();
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let p = Predictor::new(train, kind);

        for id in test.ids() {
            let truth = test.trajectory(id);
            let t_p = rng.gen_range(0..nt - 1);
            let t_x = if rng.gen_bool(0.25) { t_p + 1 } else { rng.gen_range(t_p + 1..nt) };
            let ep = Episode::new(Unit::new(test.location(id, t_p), t_p), t_x);
            let want = test.location(id, t_x);
            let mut costs = BTreeMap::new();
            let mut strats: Vec<Strategy> = Strategy::ALL.to_vec();
            if t_x - t_p > 1 {
                strats.push(Strategy::Ipm(Some(rng.gen_range(t_p + 1..=t_x))));
            }
            for strategy in strats {
                let mut s = SearchSession::open(&truth, nl).unwrap().with_horizon(t_x);
                let r = strategies::run(strategy, &p, &mut s, &ep)
                    .map_err(|e| format!("{strategy} failed: {e}"))?;
                let ctx = || format!("{strategy} {kind} {} -> t{t_x}", ep.start);
                check(r.found_location == want, || format!("{}: found l{} not l{want}", ctx(), r.found_location))?;
                check(r.total_searches == s.cost(), || format!("{}: reported cost differs from meter", ctx()))?;
                let mut seen = HashSet::new();
                for rec in s.log() {
                    check(seen.insert(rec.unit), || format!("{}: {} searched twice", ctx(), rec.unit))?;
                    check(rec.unit.moment <= t_x, || format!("{}: searched {} beyond t_x", ctx(), rec.unit))?;
                }
                let bound = nl * (t_x - t_p) as usize;
                check(r.total_searches <= bound, || format!("{}: {} searches over bound {bound}", ctx(), r.total_searches))?;
                costs.insert(strategy.to_string(), r.total_searches);
            }
            let rank = p.row_from(ep.start, t_x).unwrap().position_of(want);
            check(costs["alt"] == rank, || format!("ALT cost {} != rank {rank}", costs["alt"]))?;
            if t_x == t_p + 1 {
                one_step += 1;
                for (name, &c) in &costs {
                    check(c == costs["alt"], || format!("{name} cost {c} != ALT {} at delta 1", costs["alt"]))?;
                }
            }
            episodes += 1;
        }
    }
    within(Duration::from_secs(120), started.elapsed())?;
    Ok(format!(
        "{episodes} episodes ({one_step} with delta 1), every strategy, {:.1?}",
        started.elapsed()
    ))
}

// ---------------------------------------------------------------- criterion 4

fn desk_bench() -> Outcome {
    let started = Instant::now();
    let params = SynthParams::desk_bench(1);
    let n_days = params.n_days as i64;
    let all = Corpus::build(params.grid.n_locations(), synth(&params).unwrap()).unwrap();
    let (train, test) = all.split_by_day(&(0..n_days - 1).collect()).unwrap();
    let mut lines = Vec::new();
    let mut ihms_best = 0;
    let mut ihms_beats_alt = true;
    for dt in [10u32, 20, 30] {
        let spec = ExperimentSpec {
            delta_t: dt,
            start_moments: vec![0, 20, 40],
            predictor: PredictorKind::PooledFirstOrder,
            ..Default::default()
        };
        let report = run_experiment(&spec, &train, &test, &RunOptions { threads: 0, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for row in &report.rows {
            check(row.episodes >= 200, || format!("cell with {} episodes", row.episodes))?;
            let e = sums.entry(row.strategy.as_str()).or_default();
            e.0 += row.mean_searches * row.episodes as f64;
            e.1 += row.episodes;
        }
        let means: BTreeMap<&str, f64> = sums.iter().map(|(k, (s, n))| (*k, s / *n as f64)).collect();
        let best = means.iter().min_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| *k).unwrap();
        ihms_best += usize::from(best == "ihms");
        ihms_beats_alt &= means["ihms"] <= means["alt"];
        lines.push(format!(
            "dt={dt}: {}",
            means.iter().map(|(k, v)| format!("{k}={v:.1}")).collect::<Vec<_>>().join(" ")
        ));
    }
    let summary = lines.join("; ");
    check(ihms_beats_alt, || format!("IHMs above ALT: {summary}"))?;
    check(ihms_best >= 2, || format!("IHMs lowest for {ihms_best}/3: {summary}"))?;
    within(Duration::from_secs(600), started.elapsed())?;
    Ok(format!("IHMs lowest for {ihms_best}/3 and never above ALT; {summary}; {:.1?}", started.elapsed()))
}

// ---------------------------------------------------------------- criterion 5

fn metric_decoupling() -> Outcome {
    let a = rank(&PredictionVector { target_moment: 0, probs: vec![0.5, 0.3, 0.2] });
    let b = rank(&PredictionVector { target_moment: 0, probs: vec![0.5, 0.1, 0.4] });
    check(!top_n_accuracy(&a, 2, 1) && !top_n_accuracy(&b, 2, 1), || "top-1 should be 0 for both".into())?;
    check(realized_alt_cost(&a, 2) == Some(3), || format!("cost a = {:?}", realized_alt_cost(&a, 2)))?;
    check(realized_alt_cost(&b, 2) == Some(2), || format!("cost b = {:?}", realized_alt_cost(&b, 2)))?;
    Ok("top-1 0 and 0, ALT costs 3 and 2".into())
}

// ---------------------------------------------------------------- criterion 6

fn stsearch(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_stsearch"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("stsearch {args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn read(p: &Path) -> Result<String, String> {
    std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let grid = GridConfig { n_rows: 12, n_cols: 12, ..GridConfig::desk() };
    std::fs::write(path("grid.cfg"), grid.to_key_values()).map_err(|e| e.to_string())?;
    std::fs::write(
        path("spec.cfg"),
        "setting = fixed_delta\ndelta_t = 12\nstart_moments = 0..60:10\npredictor = pooled\ntest_sample = 40\n",
    )
    .map_err(|e| e.to_string())?;
    stsearch(&[
        "synth", "--grid", &path("grid.cfg"), "--objects", "60", "--days", "5", "--persistence", "0.8",
        "--hubs", "3", "--seed", "9", "--out", &path("train.csv"), "--test-out", &path("test.csv"),
        "--test-days", "1",
    ])?;
    let bench = |threads: &str, tag: &str| {
        stsearch(&[
            "bench", "--spec", &path("spec.cfg"), "--train", &path("train.csv"), "--test", &path("test.csv"),
            "--grid", &path("grid.cfg"), "--seed", "3", "--threads", threads,
            "--out", &path(&format!("report_{tag}.csv")), "--episodes", &path(&format!("episodes_{tag}.csv")),
        ])
    };
    bench("1", "a")?;
    bench("1", "b")?;
    bench("4", "c")?;
    let (ra, rb, rc) = (
        read(Path::new(&path("report_a.csv")))?,
        read(Path::new(&path("report_b.csv")))?,
        read(Path::new(&path("report_c.csv")))?,
    );
    check(ra == rb, || "single-thread reports differ".into())?;
    let sorted = |s: String| {
        let mut v: Vec<String> = s.lines().map(str::to_owned).collect();
        v.sort();
        v
    };
    check(
        sorted(read(Path::new(&path("episodes_a.csv")))?) == sorted(read(Path::new(&path("episodes_c.csv")))?),
        || "episode logs differ between 1 and 4 threads".into(),
    )?;
    let means = |s: &str| -> Vec<(String, f64)> {
        s.lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (format!("{},{},{}", f[0], f[1], f[2]), f[3].parse().unwrap())
            })
            .collect()
    };
    let (ma, mc) = (means(&ra), means(&rc));
    check(ma.len() == mc.len(), || "row counts differ".into())?;
    for ((ka, a), (kc, c)) in ma.iter().zip(&mc) {
        check(ka == kc && close(*a, *c, 1e-9), || format!("{ka}: {a} vs {kc}: {c}"))?;
    }
    Ok(format!("{} report rows byte-identical at 1 thread, matching at 4", ma.len()))
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("toy fixture exactness", toy_fixture),
        ("brute-force oracle equivalence", oracle_equivalence),
        ("strategy invariants", strategy_invariants),
        ("desk-scale strategy ranking", desk_bench),
        ("metric decoupling", metric_decoupling),
        ("determinism", determinism),
    ];
    // optional criterion numbers select a subset
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        match f() {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
