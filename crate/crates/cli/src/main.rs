use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use arisdro::harness::{
    emit_results, load_config, run_experiment, run_selftest, Experiment, ExperimentSpec, Format, RunManifest,
    RunOptions,
};
use arisdro::{Error, Result, SystemConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arisdro", version, about = "Aerial RIS robust secure beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare deployment rules under the robust beamformer.
    Deploy(RunArgs),
    /// Compare beamformers at the robust deployment.
    Robust(RunArgs),
    /// Robust vs. nominal beamforming across impairment severities.
    Sweep(RunArgs),
    /// Run the invariant suite.
    Selftest {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Result file; a `.manifest.json` is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    trials: Option<usize>,
    /// Evaluation slots per trial.
    #[arg(long)]
    slots: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    parallel: Option<usize>,
    /// Write per-slot solver records as JSON lines to this path.
    #[arg(long)]
    slot_log: Option<PathBuf>,
}

fn load(config: Option<&Path>) -> Result<(SystemConfig, ExperimentSpec)> {
    match config {
        Some(p) => load_config(p),
        None => Ok((SystemConfig::default(), ExperimentSpec::default())),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn run(experiment: Experiment, args: RunArgs) -> Result<()> {
    let (cfg, mut spec) = load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(n) = args.slots {
        match experiment {
            Experiment::Deploy => spec.deploy_eval_slots = n,
            Experiment::Robust => spec.robust_slots = n,
            Experiment::Sweep => spec.sweep_slots = n,
        }
    }
    let options = RunOptions {
        parallel: args.parallel,
        slot_log: args.slot_log.is_some(),
    };
    let start = Instant::now();
    let output = run_experiment(experiment, &cfg, &spec, options)?;
    let wall = start.elapsed().as_secs_f64();

    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{}.{}", experiment.as_str(), args.format.extension())));
    emit_results(&output.table, args.format, &out)?;
    let mut manifest_path = out.clone().into_os_string();
    manifest_path.push(".manifest.json");
    let manifest_path = PathBuf::from(manifest_path);
    RunManifest::new(experiment.as_str(), &cfg, &spec, wall, &out, output.deployments)?.write(&manifest_path)?;

    if let Some(path) = &args.slot_log {
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        for entry in &output.slot_log {
            let line = serde_json::to_string(entry).map_err(|e| Error::Serialization(e.to_string()))?;
            writeln!(w, "{line}").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))?;
    }
    eprintln!(
        "{}: {} rows to {} in {:.1} s",
        experiment.as_str(),
        output.table.rows.len(),
        out.display(),
        wall
    );
    Ok(())
}

fn selftest(config: Option<PathBuf>, seed: Option<u64>) -> Result<bool> {
    let (cfg, spec) = load(config.as_deref())?;
    let checks = run_selftest(&cfg, seed.unwrap_or(spec.seed))?;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Deploy(a) => run(Experiment::Deploy, a).map(|_| true),
        Command::Robust(a) => run(Experiment::Robust, a).map(|_| true),
        Command::Sweep(a) => run(Experiment::Sweep, a).map(|_| true),
        Command::Selftest { config, seed } => selftest(config, seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
