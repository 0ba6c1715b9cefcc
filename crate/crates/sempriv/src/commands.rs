//! The experiment workflows behind each CLI verb, usable as library calls.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use sempriv_core::config::ExperimentConfig;
use sempriv_core::data::{LabeledImageSet, Split};
use sempriv_core::evaluation::{evaluate, evaluate_with_jammer, gap_sweep, EvalReport, RowContext};
use sempriv_core::models::{Architecture, ModelBundle, TrainingMode};
use sempriv_core::perturbation::PerturbationSpec;
use sempriv_core::rng::RandomStreams;
use sempriv_core::training::{train_baseline, train_eve, train_minmax, TrainingCurve};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config_io::apply_overrides;
use crate::datasets::load_split;
use crate::error::{Error, Result};
use crate::plot::plot_report;
use crate::report::{export_report, write_curve};
use crate::run::{RunDir, RunRecord, BUNDLE_CHECKPOINT, EVE_CHECKPOINT};

/// Stream family of the best-response eavesdropper trained after the fact,
/// kept apart from the one used during min-max training.
pub const BEST_RESPONSE_SALT: u64 = 0xbe57;
/// Stream family shared by all evaluation commands, so bundles compared in
/// one report see the same channel draws.
pub const EVAL_SALT: u64 = 0xe7a1;

/// Config keys an evaluation command may change without invalidating the
/// trained networks.
pub const EVAL_KEYS: &[&str] = &["eval_snr_list_db", "bob_eval_snr_db", "n_real", "test_subset_size", "synthetic.test"];
const EVAL_KEY_PREFIXES: &[&str] = &["perturb.", "jammer."];

/// Output and dataset directories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    pub out: PathBuf,
    pub data_root: PathBuf,
}

impl Workspace {
    pub fn new(out: impl Into<PathBuf>, data_root: impl Into<PathBuf>) -> Self {
        Self { out: out.into(), data_root: data_root.into() }
    }

    /// A run given either as a directory path or as a run id under `out`.
    pub fn resolve_run(&self, reference: &str) -> RunDir {
        let direct = PathBuf::from(reference);
        if direct.join(crate::run::CONFIG_FILE).is_file() {
            RunDir::new(direct)
        } else {
            RunDir::new(self.out.join(reference))
        }
    }

    fn split(&self, cfg: &ExperimentConfig, split: Split) -> Result<LabeledImageSet> {
        load_split(cfg, split, &self.data_root, &RandomStreams::new(cfg.seed))
    }
}

/// Trains the legitimate networks (with the in-training eavesdropper when
/// `mode` is min-max) and records the run. A completed run with the same
/// config is returned as is.
pub fn train_run(ws: &Workspace, mode: TrainingMode, cfg: &ExperimentConfig) -> Result<(RunDir, RunRecord)> {
    if mode == TrainingMode::EveOnly {
        return Err(Error::Usage("use train-eve to train an eavesdropper on an existing run".into()));
    }
    cfg.validate()?;
    let run = RunDir::for_config(&ws.out, mode, cfg);
    if run.is_complete() {
        let record = run.read_record()?;
        return Ok((run, record));
    }
    run.prepare(cfg)?;
    let train = ws.split(cfg, Split::Train)?;
    let test = ws.split(cfg, Split::Test)?;
    let streams = RandomStreams::new(cfg.seed);
    let (bundle, curve) = match mode {
        TrainingMode::Minmax => train_minmax::<f32>(cfg, &train, Some(&test), &streams)?,
        _ => train_baseline::<f32>(cfg, &train, Some(&test), &streams)?,
    };
    let ckpt = run.checkpoint(BUNDLE_CHECKPOINT);
    save_checkpoint(&bundle, &ckpt)?;
    write_curve(&curve, &run.metrics_path())?;
    let record = RunRecord {
        run_id: run.id(),
        config: cfg.clone(),
        checkpoint_paths: vec![ckpt],
        metrics_log_path: run.metrics_path(),
        created_at: SystemTime::now(),
    };
    run.write_record(&record)?;
    Ok((run, record))
}

/// Trains a best-response eavesdropper against a completed run's frozen
/// encoder, unless one already exists, and returns the resulting bundle.
pub fn ensure_eve(ws: &Workspace, run: &RunDir) -> Result<(ModelBundle<f32>, Option<TrainingCurve>)> {
    let mut record = run.read_record()?;
    let cfg = record.config.clone();
    let eve_ckpt = run.checkpoint(EVE_CHECKPOINT);
    if eve_ckpt.is_file() {
        return Ok((load_checkpoint(&eve_ckpt, &cfg)?, None));
    }
    let bundle = load_checkpoint(&run.checkpoint(BUNDLE_CHECKPOINT), &cfg)?;
    let train = ws.split(&cfg, Split::Train)?;
    let test = ws.split(&cfg, Split::Test)?;
    let streams = RandomStreams::new(cfg.seed).derive(BEST_RESPONSE_SALT);
    let (bundle, curve) = train_eve(bundle, &cfg, &train, Some(&test), &streams)?;
    write_curve(&curve, &run.eve_metrics_path())?;
    save_checkpoint(&bundle, &eve_ckpt)?;
    record.checkpoint_paths.push(eve_ckpt);
    run.write_record(&record)?;
    Ok((bundle, Some(curve)))
}

/// The bundle with the strongest available eavesdropper: the best-response
/// checkpoint when present, otherwise the training checkpoint.
pub fn load_run_bundle(run: &RunDir) -> Result<(RunRecord, ModelBundle<f32>)> {
    let record = run.read_record()?;
    let eve = run.checkpoint(EVE_CHECKPOINT);
    let path = if eve.is_file() { eve } else { run.checkpoint(BUNDLE_CHECKPOINT) };
    let bundle = load_checkpoint(&path, &record.config)?;
    Ok((record, bundle))
}

/// Applies evaluation-only overrides to a trained run's config. Keys that
/// would change the trained networks are refused.
pub fn eval_config(base: &ExperimentConfig, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    if let Some((key, _)) = overrides
        .iter()
        .find(|(k, _)| !EVAL_KEYS.contains(&k.as_str()) && !EVAL_KEY_PREFIXES.iter().any(|p| k.starts_with(p)))
    {
        return Err(Error::Usage(format!(
            "`{key}` changes the trained networks and cannot be overridden at evaluation time; train a new run instead"
        )));
    }
    let cfg = apply_overrides(base, overrides)?;
    debug_assert_eq!(Architecture::from_config(&cfg), Architecture::from_config(base));
    Ok(cfg)
}

fn eval_streams(cfg: &ExperimentConfig) -> RandomStreams {
    RandomStreams::new(cfg.seed).derive(EVAL_SALT)
}

/// Writes `report` to `csv` and its plots next to it, in `<stem>_plots/`.
pub fn publish(report: &EvalReport, csv: &Path) -> Result<Vec<PathBuf>> {
    export_report(report, csv)?;
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    plot_report(report, &csv.with_file_name(format!("{stem}_plots")))
}

/// Accuracy and fidelity of one run at every evaluation SNR, both receivers
/// at the same SNR.
pub fn eval_run(ws: &Workspace, run: &RunDir, overrides: &[(String, String)]) -> Result<EvalReport> {
    let (record, mut bundle) = load_run_bundle(run)?;
    let cfg = eval_config(&record.config, overrides)?;
    let test = ws.split(&cfg, Split::Test)?;
    Ok(evaluate(&mut bundle, &test, &cfg.eval_snr_list_db, cfg.n_real, &RowContext::from_config(&cfg), &eval_streams(&cfg))?)
}

/// Gap against eavesdropper SNR for several runs (typically differing only
/// in the privacy weight). Each run gets a best-response eavesdropper first.
/// The test set and evaluation settings come from the first run.
pub fn gap_sweep_runs(ws: &Workspace, runs: &[RunDir], overrides: &[(String, String)]) -> Result<EvalReport> {
    let first = runs.first().ok_or_else(|| Error::Usage("gap-sweep needs at least one run".into()))?;
    let cfg = eval_config(&first.read_record()?.config, overrides)?;
    let mut bundles = Vec::with_capacity(runs.len());
    for run in runs {
        let run_cfg = run.read_record()?.config;
        if run_cfg.dataset != cfg.dataset {
            return Err(Error::Usage(format!("{} uses dataset {}, expected {}", run.root.display(), run_cfg.dataset, cfg.dataset)));
        }
        let (bundle, _) = ensure_eve(ws, run)?;
        bundles.push((run_cfg.weights.w_p, bundle));
    }
    let test = ws.split(&cfg, Split::Test)?;
    let mut refs: Vec<(f64, &mut ModelBundle<f32>)> = bundles.iter_mut().map(|(w, b)| (*w, b)).collect();
    Ok(gap_sweep(
        &mut refs,
        &test,
        &cfg.eval_snr_list_db,
        cfg.bob_eval_snr_db,
        cfg.n_real,
        &RowContext::from_config(&cfg),
        &eval_streams(&cfg),
    )?)
}

/// Perturbations compared by `perturb-eval`: the configured one, or FGSM,
/// PGD(4) and PGD(10) at the default budget when none is configured. The
/// unprotected link is always included first.
pub fn perturbation_set(cfg: &ExperimentConfig) -> Vec<Option<PerturbationSpec>> {
    let mut set = vec![None];
    match cfg.perturbation {
        Some(p) => set.push(Some(p)),
        None => {
            let eps = PerturbationSpec::DEFAULT_EPSILON;
            set.extend([PerturbationSpec::fgsm(eps), PerturbationSpec::pgd(eps, 4), PerturbationSpec::pgd(eps, 10)].map(Some));
        }
    }
    set
}

/// Gap against eavesdropper SNR with a cooperative jammer crafting
/// perturbations against the run's best-response eavesdropper.
pub fn perturb_eval_run(ws: &Workspace, run: &RunDir, overrides: &[(String, String)]) -> Result<EvalReport> {
    let cfg = eval_config(&run.read_record()?.config, overrides)?;
    let (mut bundle, _) = ensure_eve(ws, run)?;
    let test = ws.split(&cfg, Split::Test)?;
    let ctx = RowContext::from_config(&cfg);
    let streams = eval_streams(&cfg);
    let mut report = EvalReport::default();
    for spec in perturbation_set(&cfg) {
        let (part, _) = evaluate_with_jammer(
            &mut bundle,
            &test,
            spec.as_ref(),
            &cfg.eval_snr_list_db,
            cfg.bob_eval_snr_db,
            &cfg.jammer,
            cfg.n_real,
            &ctx,
            &streams,
        )?;
        report.merge(part);
    }
    Ok(report)
}
