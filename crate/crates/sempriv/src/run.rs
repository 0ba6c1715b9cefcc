//! Run directories: `<out>/<run_id>/{config, checkpoints/, metrics.csv, run.txt}`.
//!
//! `run.txt` is written last, so its presence marks a completed run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use sempriv_core::config::ExperimentConfig;
use sempriv_core::models::TrainingMode;

use crate::config_io::{load_config, save_config, write_atomic};
use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config";
pub const RECORD_FILE: &str = "run.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
/// Networks as left by legitimate training.
pub const BUNDLE_CHECKPOINT: &str = "bundle.ckpt";
/// The same networks with a best-response eavesdropper trained afterwards.
pub const EVE_CHECKPOINT: &str = "eve.ckpt";
pub const EVE_METRICS_FILE: &str = "eve_metrics.csv";

/// Completed run as recorded on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub config: ExperimentConfig,
    pub checkpoint_paths: Vec<PathBuf>,
    pub metrics_log_path: PathBuf,
    pub created_at: SystemTime,
}

/// Deterministic id: the training mode plus a prefix of the config hash.
/// Equal configs map to the same directory, which is what makes training
/// commands resumable.
pub fn run_id(mode: TrainingMode, cfg: &ExperimentConfig) -> String {
    format!("{mode}-{}", &cfg.hash()[..12])
}

/// Paths inside one run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn for_config(out: &Path, mode: TrainingMode, cfg: &ExperimentConfig) -> Self {
        Self::new(out.join(run_id(mode, cfg)))
    }

    pub fn id(&self) -> String {
        self.root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join(CONFIG_FILE)
    }

    pub fn record_path(&self) -> PathBuf {
        self.root.join(RECORD_FILE)
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.root.join(METRICS_FILE)
    }

    pub fn eve_metrics_path(&self) -> PathBuf {
        self.root.join(EVE_METRICS_FILE)
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join(CHECKPOINT_DIR).join(name)
    }

    /// Creates the directory tree and persists the resolved config before any
    /// compute starts.
    pub fn prepare(&self, cfg: &ExperimentConfig) -> Result<()> {
        let checkpoints = self.root.join(CHECKPOINT_DIR);
        fs::create_dir_all(&checkpoints).map_err(|e| Error::io(&checkpoints, e))?;
        save_config(cfg, &self.config_path())
    }

    pub fn is_complete(&self) -> bool {
        self.record_path().is_file()
    }

    /// Writes `run.txt` for a finished run.
    pub fn write_record(&self, record: &RunRecord) -> Result<()> {
        let secs = record.created_at.duration_since(UNIX_EPOCH).unwrap_or_default().as_secs();
        let mut text = format!("run_id={}\ncreated_at={secs}\nmetrics={}\n", record.run_id, rel(&self.root, &record.metrics_log_path));
        for p in &record.checkpoint_paths {
            text.push_str(&format!("checkpoint={}\n", rel(&self.root, p)));
        }
        write_atomic(&self.record_path(), text.as_bytes())
    }

    /// Reads back a completed run, checking that its listed checkpoints exist.
    pub fn read_record(&self) -> Result<RunRecord> {
        let path = self.record_path();
        if !path.is_file() {
            return Err(Error::Usage(format!("{} is not a completed run (no {RECORD_FILE})", self.root.display())));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let config = load_config(&self.config_path())?;
        let bad = |message: String| Error::Format { path: path.clone(), message };
        let mut record = RunRecord {
            run_id: String::new(),
            config,
            checkpoint_paths: Vec::new(),
            metrics_log_path: PathBuf::new(),
            created_at: UNIX_EPOCH,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("expected key=value, got `{line}`")))?;
            match key {
                "run_id" => record.run_id = value.to_string(),
                "created_at" => {
                    let secs: u64 = value.parse().map_err(|_| bad(format!("bad timestamp `{value}`")))?;
                    record.created_at = UNIX_EPOCH + Duration::from_secs(secs);
                }
                "metrics" => record.metrics_log_path = self.root.join(value),
                "checkpoint" => record.checkpoint_paths.push(self.root.join(value)),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        if let Some(missing) = record.checkpoint_paths.iter().find(|p| !p.is_file()) {
            return Err(bad(format!("listed checkpoint {} does not exist", missing.display())));
        }
        Ok(record)
    }
}

fn rel(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().into_owned()
}
