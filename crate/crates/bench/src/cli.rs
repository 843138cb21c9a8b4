//! The `fekan` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::preset::{load_presets, Experiment, ProblemName, RunConfig};
use crate::report::{compare_table, emit_summary, read_summary, write_outputs, SummaryRow};
use crate::run::{allen_cahn_reference, reference_file, run_config};
use crate::BenchError;

#[derive(Debug, Parser)]
#[command(name = "fekan", about = "Feature-enriched KAN experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Regression on the high-frequency discontinuous target.
    FitFunction(RunArgs),
    /// One-step Lorenz map learned from trajectories.
    LorenzMap(RunArgs),
    /// Physics-informed solve of a PDE problem.
    SolvePde(RunArgs),
    /// Separable physics-informed solve on tensor grids.
    SolveSeparable(RunArgs),
    /// Window-by-window physics-informed Lorenz solve.
    LorenzPi(RunArgs),
    /// Phase-wise boundary introduction with per-face retention.
    Forgetting(RunArgs),
    /// Function fit with NTK spectra at checkpoints.
    Ntk(RunArgs),
    /// Writes a numerical reference solution.
    MakeReference(RefArgs),
    /// Joins summary files into one table.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Built-in preset name.
    #[arg(long)]
    preset: Option<String>,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seeds 0..N.
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// Explicit comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    n_res: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    log_every: Option<usize>,
    /// Output root (default: $FEKAN_OUT, then the config, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RefProblem {
    AllenCahn,
}

#[derive(Debug, Args)]
struct RefArgs {
    #[arg(long, value_enum)]
    problem: RefProblem,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Output root: flag, then `FEKAN_OUT`, then the config, then `runs`.
pub fn output_root(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(v) = std::env::var_os("FEKAN_OUT") {
        return PathBuf::from(v);
    }
    config.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("runs"))
}

fn resolve(experiment: Experiment, a: &RunArgs) -> Result<(RunConfig, RunConfig), BenchError> {
    let base = match (&a.config, &a.preset) {
        (Some(path), _) => serde_json::from_str::<RunConfig>(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => {
            let mut presets = load_presets();
            let alias = name.replacen("helmholtz2d-", "helm2d-", 1);
            presets
                .remove(name)
                .or_else(|| presets.remove(&alias))
                .ok_or_else(|| BenchError::UnknownPreset(name.clone()))?
        }
        (None, None) => return Err(BenchError::Config("give --preset or --config".into())),
    };
    if base.experiment != experiment {
        return Err(BenchError::Config(format!(
            "{} is a {} configuration",
            base.name,
            base.experiment.command()
        )));
    }
    let mut cfg = base.with_overrides(a.epochs, a.n_res);
    if let Some(n) = a.seeds {
        cfg.seeds = (0..n).collect();
    }
    if let Some(list) = &a.seed_list {
        cfg.seeds = list.clone();
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    if let Some(l) = a.log_every {
        cfg.train.log_every = l.max(1);
    }
    cfg.validate()?;
    Ok((base, cfg))
}

/// Runs `cfg` and writes its outputs under `root/<name>`.
pub fn execute(preset: &RunConfig, cfg: &RunConfig, root: &Path) -> Result<(SummaryRow, PathBuf), BenchError> {
    let result = run_config(cfg, root)?;
    let row = emit_summary(preset, &result);
    let dir = root.join(&cfg.name);
    write_outputs(&dir, &row, &result)?;
    Ok((row, dir))
}

fn dispatch(cli: Cli) -> Result<(), BenchError> {
    let (experiment, args) = match cli.cmd {
        Command::FitFunction(a) => (Experiment::FitFunction, a),
        Command::LorenzMap(a) => (Experiment::LorenzMap, a),
        Command::SolvePde(a) => (Experiment::SolvePde, a),
        Command::SolveSeparable(a) => (Experiment::SolveSeparable, a),
        Command::LorenzPi(a) => (Experiment::LorenzPi, a),
        Command::Forgetting(a) => (Experiment::Forgetting, a),
        Command::Ntk(a) => (Experiment::Ntk, a),
        Command::MakeReference(r) => {
            let root = output_root(r.out.as_deref(), None);
            std::fs::create_dir_all(&root)?;
            let RefProblem::AllenCahn = r.problem;
            let path = root.join(reference_file(ProblemName::AllenCahn));
            allen_cahn_reference()?.write_csv(&path)?;
            println!("wrote {}", path.display());
            return Ok(());
        }
        Command::Compare { files } => {
            let rows = files.iter().map(|f| read_summary(f)).collect::<Result<Vec<_>, _>>()?;
            print!("{}", compare_table(&rows));
            return Ok(());
        }
    };
    let (preset, cfg) = resolve(experiment, &args)?;
    let root = output_root(args.out.as_deref(), cfg.out_dir.as_deref());
    let (row, dir) = execute(&preset, &cfg, &root)?;
    print!("{}", compare_table(std::slice::from_ref(&row)));
    println!("outputs in {}", dir.display());
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
