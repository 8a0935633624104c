use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use antnas_core::binding::connect_evaluator;
use antnas_core::engine::{Engine, EvaluatorBinding, RunConfig, SearchState};
use antnas_core::output::{latest_checkpoint, BestReport, RunDirectory, SWEEP_FILE};
use antnas_core::space::{default_space, SearchSpace};
use antnas_core::sweep::{run_sweep, write_sweep_csv, SweepAxis, DEFAULT_TRIALS};
use clap::{Args, Parser, Subcommand};

/// Ant Colony System search over layered CNN architectures.
#[derive(Parser)]
#[command(name = "antnas", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a search to completion, checkpointing every round.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "antnas-out")]
        out_dir: PathBuf,
    },
    /// Continue a search from a checkpoint file or run directory.
    Resume {
        checkpoint: PathBuf,
        /// Where to keep writing; defaults to the checkpoint's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Repeat the search over a grid of ant counts or greediness values.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// ant_count or greediness.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated grid; defaults to the axis' standard grid.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value = "antnas-out")]
        out_dir: PathBuf,
    },
    /// Print (or write) the best architecture of a checkpoint or run directory.
    ExportBest {
        source: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// A JSON config file plus per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ants: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    greediness: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau0: Option<f64>,
    /// synthetic, exec:<command> or tcp:<host:port>.
    #[arg(long)]
    evaluator: Option<EvaluatorBinding>,
    #[arg(long)]
    landscape_seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self, space: &SearchSpace) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { config.$field = v; })*
            };
        }
        set!(
            seed => seed,
            ants => ant_count,
            max_depth => max_depth,
            greediness => greediness,
            beta => beta,
            rho => rho,
            alpha => alpha,
            tau0 => tau0,
            evaluator => evaluator,
            landscape_seed => landscape_seed
        );
        config
            .validate(space)
            .context("invalid configuration")?;
        Ok(config)
    }
}

fn run(config: RunConfig, space: &SearchSpace, out_dir: &Path) -> Result<()> {
    let engine = Engine::new(config.clone(), space)?;
    let mut evaluator = connect_evaluator(&config, space)?;
    let mut dir = RunDirectory::open(out_dir)
        .with_context(|| format!("opening {}", out_dir.display()))?;
    finish(engine, &mut *evaluator, &mut dir, space)
}

fn finish(
    mut engine: Engine,
    evaluator: &mut dyn antnas_core::Evaluator,
    dir: &mut RunDirectory,
    space: &SearchSpace,
) -> Result<()> {
    while !engine.is_finished() {
        engine.run_round(evaluator, dir)?;
        let s = engine.state();
        log::info!(
            "round {}/{}: best {:.4} after {} evaluations",
            s.round,
            s.config.max_depth,
            s.best_history.last().copied().unwrap_or(0.0),
            s.evaluations
        );
    }
    let report = BestReport::from_state(engine.state(), space).context("run produced no incumbent")?;
    report.write(dir.dir())?;
    writeln!(std::io::stdout(), "{:.6}\t{}", report.score, report.architecture)?;
    Ok(())
}

fn load_checkpoint(source: &Path) -> Result<(PathBuf, SearchState)> {
    let path = if source.is_dir() {
        latest_checkpoint(source)?
            .with_context(|| format!("no checkpoint in {}", source.display()))?
    } else {
        source.to_path_buf()
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let state = SearchState::from_json(&text)
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok((path, state))
}

fn resume(checkpoint: &Path, out_dir: Option<&Path>, space: &SearchSpace) -> Result<()> {
    let (path, state) = load_checkpoint(checkpoint)?;
    if state.is_finished() {
        log::info!("{} is already complete; nothing to do", path.display());
        return Ok(());
    }
    state.config.validate(space).context("invalid configuration")?;
    let dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut evaluator = connect_evaluator(&state.config, space)?;
    let mut dir = RunDirectory::open(&dir)?;
    finish(Engine::resume(state, space), &mut *evaluator, &mut dir, space)
}

fn sweep(
    config: RunConfig,
    space: &SearchSpace,
    axis: SweepAxis,
    values: Vec<f64>,
    trials: usize,
    out_dir: &Path,
) -> Result<()> {
    let values = if values.is_empty() {
        axis.default_values()
    } else {
        values
    };
    if trials == 0 {
        bail!("trials = 0 must be >= 1");
    }
    for &v in &values {
        let c = axis.apply(&config, v).map_err(anyhow::Error::msg)?;
        c.validate(space)
            .with_context(|| format!("invalid sweep value {v}"))?;
    }
    let rows = run_sweep(&config, space, axis, &values, trials, |c| {
        connect_evaluator(c, space).map_err(|e| e.to_string())
    });
    for row in rows.iter().filter(|r| r.error.is_some()) {
        log::warn!("value {} trial {} failed: {}", row.value, row.trial, row.error.as_deref().unwrap_or(""));
    }
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(SWEEP_FILE);
    write_sweep_csv(&rows, fs::File::create(&path)?)?;
    let mut out = std::io::stdout().lock();
    for &v in &values {
        let scores: Vec<f64> = rows
            .iter()
            .filter(|r| r.value == v)
            .filter_map(|r| r.best_score)
            .collect();
        let mean = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
        writeln!(out, "{v}\tmean best {mean:.4} over {} runs", scores.len())?;
    }
    Ok(())
}

fn export_best(source: &Path, output: Option<&Path>, space: &SearchSpace) -> Result<()> {
    let (_, state) = load_checkpoint(source)?;
    let report = BestReport::from_state(&state, space).context("checkpoint has no incumbent yet")?;
    let text = serde_json::to_string_pretty(&report)?;
    match output {
        Some(path) => fs::write(path, text + "\n")?,
        None => writeln!(std::io::stdout(), "{text}")?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let space = default_space();
    let result = match cli.command {
        Command::Run { config, out_dir } => {
            config.load(&space).and_then(|c| run(c, &space, &out_dir))
        }
        Command::Resume { checkpoint, out_dir } => resume(&checkpoint, out_dir.as_deref(), &space),
        Command::Sweep {
            config,
            axis,
            values,
            trials,
            out_dir,
        } => config
            .load(&space)
            .and_then(|c| sweep(c, &space, axis, values, trials, &out_dir)),
        Command::ExportBest { source, output } => export_best(&source, output.as_deref(), &space),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
