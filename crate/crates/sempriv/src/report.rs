//! CSV files: evaluation reports and per-epoch training curves.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! importing an exported report reproduces it exactly.

use std::path::Path;

use sempriv_core::evaluation::{EvalReport, EvalRow};
use sempriv_core::training::TrainingCurve;
use sempriv_core::Error as CoreError;

use crate::config_io::write_atomic;
use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 14] = [
    "dataset",
    "latent_dim",
    "w_P",
    "perturb",
    "eve_snr_db",
    "bob_snr_db",
    "bob_acc",
    "eve_acc",
    "gap",
    "psnr_db",
    "ssim",
    "n_samples",
    "n_real",
    "seed",
];

pub const CURVE_HEADER: [&str; 9] = ["epoch", "phase", "snr_db", "bob_acc", "eve_acc", "bob_loss", "eve_cce", "psnr", "ssim"];

fn csv_error(path: &Path, source: csv::Error) -> Error {
    Error::Csv { path: path.to_path_buf(), source }
}

fn row_fields(r: &EvalRow) -> [String; 14] {
    [
        r.dataset.to_string(),
        r.latent_dim.to_string(),
        r.w_p.to_string(),
        r.perturb.clone(),
        r.eve_snr_db.to_string(),
        r.bob_snr_db.to_string(),
        r.bob_acc.to_string(),
        r.eve_acc.to_string(),
        r.gap.to_string(),
        r.psnr_db.to_string(),
        r.ssim.to_string(),
        r.n_samples.to_string(),
        r.n_real.to_string(),
        r.seed.to_string(),
    ]
}

/// Renders `report` as CSV text. Empty reports are rejected.
pub fn report_to_csv(report: &EvalReport) -> Result<Vec<u8>> {
    if report.is_empty() {
        return Err(CoreError::Empty("report").into());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let into = |e| csv_error(Path::new("<memory>"), e);
    w.write_record(REPORT_HEADER).map_err(into)?;
    for row in &report.rows {
        w.write_record(row_fields(row)).map_err(into)?;
    }
    w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))
}

/// Writes the report as one CSV file. The file appears complete or not at all.
pub fn export_report(report: &EvalReport, path: &Path) -> Result<()> {
    write_atomic(path, &report_to_csv(report)?)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, column: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Format {
        path: path.to_path_buf(),
        message: format!("line {line}: cannot parse {column} value `{value}`"),
    })
}

/// Reads a report written by [`export_report`].
pub fn import_report(path: &Path) -> Result<EvalReport> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(REPORT_HEADER) {
        return Err(Error::Format { path: path.to_path_buf(), message: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let f = |col: usize| &record[col];
        let p = |col: usize| parse_field::<f64>(path, line, REPORT_HEADER[col], f(col));
        let dataset = f(0).parse().map_err(|message| Error::Format { path: path.to_path_buf(), message })?;
        rows.push(EvalRow {
            dataset,
            latent_dim: parse_field(path, line, "latent_dim", f(1))?,
            w_p: p(2)?,
            perturb: f(3).to_string(),
            eve_snr_db: p(4)?,
            bob_snr_db: p(5)?,
            bob_acc: p(6)?,
            eve_acc: p(7)?,
            gap: p(8)?,
            psnr_db: p(9)?,
            ssim: p(10)?,
            n_samples: parse_field(path, line, "n_samples", f(11))?,
            n_real: parse_field(path, line, "n_real", f(12))?,
            seed: parse_field(path, line, "seed", f(13))?,
        });
    }
    Ok(EvalReport { rows, config_hash: String::new() })
}

/// Writes the training curve as `metrics.csv` content.
pub fn write_curve(curve: &TrainingCurve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let into = |e| csv_error(path, e);
    w.write_record(CURVE_HEADER).map_err(into)?;
    for c in &curve.records {
        w.write_record([
            c.epoch.to_string(),
            c.phase.to_string(),
            c.snr_db.to_string(),
            c.bob_acc.to_string(),
            c.eve_acc.to_string(),
            c.bob_loss.to_string(),
            c.eve_cce.to_string(),
            c.psnr.to_string(),
            c.ssim.to_string(),
        ])
        .map_err(into)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}
