use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use stsearch::grid::{prepare, RepairLimits};
use stsearch::harness::{run_experiment, synth, ExperimentSpec, RunOptions, SynthParams};
use stsearch::io::{read_discrete_file, read_raw_points, write_discrete_file, KeyValues};
use stsearch::strategies::{self, Episode, Strategy};
use stsearch::{Corpus, DiscreteTrajectory, GridConfig, Predictor, PredictorKind, SearchSession, Unit};

#[derive(Parser)]
#[command(name = "stsearch", version, about = "Spatiotemporal search planning on a city grid")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate momentum random-walk trajectories.
    Synth(SynthArgs),
    /// Discretize and repair raw GPS points.
    Prep(PrepArgs),
    /// Track one object with one strategy.
    Track(TrackArgs),
    /// Run an experiment spec over train/test corpora.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Grid config; the built-in 30x30 default when omitted.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    objects: usize,
    #[arg(long)]
    days: usize,
    #[arg(long)]
    persistence: f64,
    /// Shared home cells; 0 gives every object its own random home.
    #[arg(long, default_value_t = 0)]
    hubs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Hold out the last `test_days` days into this file.
    #[arg(long, requires = "test_days")]
    test_out: Option<PathBuf>,
    #[arg(long, requires = "test_out")]
    test_days: Option<usize>,
}

#[derive(Args)]
struct PrepArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    train: PathBuf,
    /// Trajectory file holding the hidden ground truth.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long)]
    start_loc: u32,
    #[arg(long)]
    start_moment: u32,
    #[arg(long)]
    end_moment: u32,
    /// Intermediate moment for IPM; the midpoint when omitted.
    #[arg(long)]
    ipm_mid: Option<u32>,
    #[arg(long, default_value = "first")]
    predictor: PredictorKind,
    /// Grid config fixing the location count; otherwise inferred from the data.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Pick the truth trajectory by object id when the file holds several.
    #[arg(long)]
    object: Option<String>,
    #[arg(long)]
    day: Option<i64>,
    /// Write the search log as CSV.
    #[arg(long)]
    audit: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Report CSV, one row per cell and strategy.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sweep the IPM intermediate moment over every offset instead.
    #[arg(long)]
    param_sweep: bool,
    /// Per-episode log CSV.
    #[arg(long)]
    episodes: Option<PathBuf>,
    #[arg(long)]
    grid: Option<PathBuf>,
}

fn load_grid(path: Option<&Path>) -> anyhow::Result<GridConfig> {
    match path {
        Some(p) => {
            let kv = KeyValues::read(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(GridConfig::from_key_values(&kv)?)
        }
        None => Ok(GridConfig::default()),
    }
}

fn load(path: &Path) -> anyhow::Result<Vec<DiscreteTrajectory>> {
    read_discrete_file(path).with_context(|| format!("reading {}", path.display()))
}

/// Location count from a grid file, or one past the largest cell seen.
fn n_locations(grid: Option<&Path>, sets: &[&[DiscreteTrajectory]]) -> anyhow::Result<usize> {
    if grid.is_some() {
        return Ok(load_grid(grid)?.n_locations());
    }
    let max = sets
        .iter()
        .flat_map(|s| s.iter())
        .flat_map(|t| t.cells.iter().flatten())
        .max()
        .copied();
    Ok(max.map_or(1, |m| m as usize + 1))
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let grid = load_grid(a.grid.as_deref())?;
    let ts = synth(&SynthParams {
        grid,
        n_objects: a.objects,
        n_days: a.days,
        persistence: a.persistence,
        hubs: a.hubs,
        seed: a.seed,
    })?;
    if let (Some(path), Some(k)) = (&a.test_out, a.test_days) {
        if k > a.days {
            bail!("--test-days {k} exceeds --days {}", a.days);
        }
        let cut = (a.days - k) as i64;
        let (train, test): (Vec<_>, Vec<_>) = ts.into_iter().partition(|t| t.day_id < cut);
        write_discrete_file(&a.out, &train)?;
        write_discrete_file(path, &test)?;
        eprintln!(
            "wrote {} train / {} test trajectories",
            train.len(),
            test.len()
        );
    } else {
        write_discrete_file(&a.out, &ts)?;
        eprintln!("wrote {} trajectories to {}", ts.len(), a.out.display());
    }
    Ok(())
}

fn cmd_prep(a: PrepArgs) -> anyhow::Result<()> {
    let grid = load_grid(Some(&a.grid))?;
    let file = File::open(&a.raw).with_context(|| format!("opening {}", a.raw.display()))?;
    let points = read_raw_points(file)?;
    let (ts, stats) = prepare(points, &grid, &RepairLimits::default())?;
    write_discrete_file(&a.out, &ts)?;
    eprintln!(
        "object-days {}, retained {}, repaired {}",
        stats.object_days, stats.retained, stats.repaired
    );
    Ok(())
}

fn cmd_track(a: TrackArgs) -> anyhow::Result<()> {
    let train = load(&a.train)?;
    let truths: Vec<DiscreteTrajectory> = load(&a.truth)?
        .into_iter()
        .filter(|t| a.object.as_ref().is_none_or(|o| &t.object_id == o))
        .filter(|t| a.day.is_none_or(|d| t.day_id == d))
        .collect();
    let truth = match truths.as_slice() {
        [t] => t.clone(),
        [] => bail!("no truth trajectory matches"),
        _ => bail!("{} truth trajectories match; use --object/--day", truths.len()),
    };
    let n = n_locations(a.grid.as_deref(), &[&train, std::slice::from_ref(&truth)])?;
    let corpus = Corpus::build(n, train)?;
    let predictor = Predictor::new(corpus, a.predictor);
    let strategy = match (a.strategy, a.ipm_mid) {
        (Strategy::Ipm(_), mid) => Strategy::Ipm(mid),
        (_, Some(_)) => bail!("--ipm-mid only applies to ipm"),
        (s, None) => s,
    };
    if truth.location_at(a.start_moment) != Some(a.start_loc) {
        eprintln!(
            "warning: truth is not at l{} at t{}",
            a.start_loc, a.start_moment
        );
    }
    let episode = Episode::new(Unit::new(a.start_loc, a.start_moment), a.end_moment);
    let mut session = SearchSession::open(&truth, n)?.with_horizon(a.end_moment);
    let result = strategies::run(strategy, &predictor, &mut session, &episode)?;
    println!("strategy={}", strategy.name());
    println!("found_location={}", result.found_location);
    println!("total_searches={}", result.total_searches);
    println!("steps={}", result.steps_string());
    if let Some(path) = a.audit {
        session.write_audit_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<()> {
    let kv = KeyValues::read(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let spec = ExperimentSpec::from_key_values(&kv)?;
    let train = load(&a.train)?;
    let test = load(&a.test)?;
    let n = n_locations(a.grid.as_deref(), &[&train, &test])?;
    let train = Corpus::build(n, train)?;
    let test = Corpus::build(n, test)?;
    let opts = RunOptions {
        threads: a.threads,
        seed: a.seed,
        param_sweep: a.param_sweep,
    };
    let report = run_experiment(&spec, &train, &test, &opts)?;
    report.write_rows(BufWriter::new(File::create(&a.out)?))?;
    if let Some(path) = a.episodes {
        report.write_episodes(BufWriter::new(File::create(path)?))?;
    }
    eprintln!(
        "{} episodes, {} report rows written to {}",
        report.episodes.len(),
        report.rows.len(),
        a.out.display()
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Prep(a) => cmd_prep(a),
        Command::Track(a) => cmd_track(a),
        Command::Bench(a) => cmd_bench(a),
    }
}
