//! Command-line front end.
//!
//! Config overrides are written `--key=value` (or `--key value`) using the
//! config file's key names, for example `--perturb.method=pgd`. They are
//! separated from the fixed flags before clap sees the rest.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sempriv_core::config::{ExperimentConfig, KEYS};
use sempriv_core::models::TrainingMode;

use crate::commands::{ensure_eve, eval_run, gap_sweep_runs, perturb_eval_run, publish, train_run, Workspace};
use crate::config_io::{apply_overrides, load_config};
use crate::datasets::default_data_root;
use crate::error::{Error, Result};
use crate::plot::plot_report;
use crate::report::import_report;

#[derive(Debug, Parser)]
#[command(name = "sempriv", version, about = "Semantic communication privacy experiments")]
#[command(after_help = "Any config key can be overridden with --KEY=VALUE, e.g. --w_p=10 or --perturb.steps=10.")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Clone, Args)]
pub struct Dirs {
    /// Directory holding run directories.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Dataset root; defaults to $SEMPRIV_DATA_DIR, then ./data.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    /// Config file; unspecified keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    /// Run directory, or a run id under --out.
    #[arg(long)]
    pub run: String,
    /// CSV destination; plots go to a sibling `<stem>_plots/` directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub dirs: Dirs,
    /// Runs to compare, usually one per privacy weight.
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Report CSV to plot.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the SVG files.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Verb {
    /// Train encoder, decoder and legitimate classifier without privacy.
    TrainBaseline(TrainArgs),
    /// Alternating min-max training against an in-loop eavesdropper.
    TrainMinmax(TrainArgs),
    /// Train a best-response eavesdropper against a finished run.
    TrainEve(RunArgs),
    /// Accuracy, PSNR and SSIM of one run across the evaluation SNRs.
    Eval(RunArgs),
    /// Bob-Eve gap against eavesdropper SNR for several runs, merged into one CSV.
    GapSweep(SweepArgs),
    /// Gap with a cooperative jammer (FGSM/PGD) for one run.
    PerturbEval(RunArgs),
    /// Render SVG plots from a report CSV.
    Plot(PlotArgs),
}

const FIXED_FLAGS: &[&str] = &["out", "data-dir", "config", "seed", "run", "runs", "output", "input", "help", "version"];

/// `(key, value)` pairs taken from `--key=value` arguments.
pub type Overrides = Vec<(String, String)>;

/// Splits `--key=value` config overrides from the remaining arguments.
pub fn split_overrides(args: &[OsString]) -> Result<(Vec<OsString>, Overrides)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        i += 1;
        let Some(flag) = arg.to_str().and_then(|s| s.strip_prefix("--")) else {
            rest.push(arg.clone());
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        if FIXED_FLAGS.contains(&name) || !KEYS.contains(&name) {
            rest.push(arg.clone());
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => {
                let v = args.get(i).and_then(|v| v.to_str()).ok_or_else(|| Error::Usage(format!("--{name} needs a value")))?;
                i += 1;
                v.to_string()
            }
        };
        overrides.push((name.to_string(), value));
    }
    Ok((rest, overrides))
}

fn workspace(dirs: &Dirs) -> Workspace {
    Workspace::new(&dirs.out, dirs.data_dir.clone().unwrap_or_else(default_data_root))
}

fn resolve_train_config(args: &TrainArgs, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let base = match &args.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    let mut all = overrides.to_vec();
    if let Some(seed) = args.seed {
        all.push(("seed".into(), seed.to_string()));
    }
    apply_overrides(&base, &all)
}

fn no_overrides(verb: &str, overrides: &[(String, String)]) -> Result<()> {
    match overrides.first() {
        Some((key, _)) => Err(Error::Usage(format!("{verb} does not take config overrides (got --{key})"))),
        None => Ok(()),
    }
}

fn train(args: &TrainArgs, mode: TrainingMode, overrides: &[(String, String)], log: &mut dyn Write) -> Result<()> {
    let cfg = resolve_train_config(args, overrides)?;
    let (run, record) = train_run(&workspace(&args.dirs), mode, &cfg)?;
    let _ = writeln!(log, "run {} complete: {}", record.run_id, run.root.display());
    Ok(())
}

/// Executes one parsed command, writing progress lines to `log`.
pub fn execute(cli: Cli, overrides: &[(String, String)], log: &mut dyn Write) -> Result<()> {
    let say = |log: &mut dyn Write, line: String| {
        let _ = writeln!(log, "{line}");
    };
    match cli.verb {
        Verb::TrainBaseline(args) => train(&args, TrainingMode::Baseline, overrides, log)?,
        Verb::TrainMinmax(args) => train(&args, TrainingMode::Minmax, overrides, log)?,
        Verb::TrainEve(args) => {
            no_overrides("train-eve", overrides)?;
            let ws = workspace(&args.dirs);
            let run = ws.resolve_run(&args.run);
            let (_, curve) = ensure_eve(&ws, &run)?;
            let status = if curve.is_some() { "trained" } else { "already present" };
            say(log, format!("best-response eavesdropper {status}: {}", run.root.display()));
        }
        Verb::Eval(args) => {
            let ws = workspace(&args.dirs);
            let run = ws.resolve_run(&args.run);
            let report = eval_run(&ws, &run, overrides)?;
            let csv = args.output.unwrap_or_else(|| run.root.join("eval.csv"));
            publish(&report, &csv)?;
            say(log, format!("wrote {}", csv.display()));
        }
        Verb::GapSweep(args) => {
            let ws = workspace(&args.dirs);
            let runs: Vec<_> = args.runs.iter().map(|r| ws.resolve_run(r)).collect();
            let report = gap_sweep_runs(&ws, &runs, overrides)?;
            let csv = args.output.unwrap_or_else(|| ws.out.join("gap_sweep.csv"));
            publish(&report, &csv)?;
            say(log, format!("wrote {}", csv.display()));
        }
        Verb::PerturbEval(args) => {
            let ws = workspace(&args.dirs);
            let run = ws.resolve_run(&args.run);
            let report = perturb_eval_run(&ws, &run, overrides)?;
            let csv = args.output.unwrap_or_else(|| run.root.join("perturb_eval.csv"));
            publish(&report, &csv)?;
            say(log, format!("wrote {}", csv.display()));
        }
        Verb::Plot(args) => {
            no_overrides("plot", overrides)?;
            let report = import_report(&args.input)?;
            for path in plot_report(&report, &args.output)? {
                say(log, format!("wrote {}", path.display()));
            }
        }
    }
    Ok(())
}

/// Full entry point: parses `argv` (program name first), runs the command,
/// and returns the process exit code.
pub fn main_with_args(argv: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (rest, overrides) = match split_overrides(argv.get(1..).unwrap_or_default()) {
        Ok(parts) => parts,
        Err(e) => {
            let _ = writeln!(err, "usage error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv.first().cloned().into_iter().chain(rest)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(cli, &overrides, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{} error: {e}", e.category().as_str());
            e.exit_code()
        }
    }
}
