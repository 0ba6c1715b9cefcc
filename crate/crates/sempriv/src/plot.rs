//! SVG line plots of report metrics against eavesdropper SNR, one line per
//! condition (dataset, latent size, privacy weight, perturbation).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use sempriv_core::evaluation::{EvalReport, EvalRow};
use sempriv_core::Error as CoreError;

use crate::error::{Error, Result};

type Metric = (&'static str, &'static str, fn(&EvalRow) -> f64);

const METRICS: [Metric; 5] = [
    ("bob_acc", "Bob accuracy", |r| r.bob_acc),
    ("eve_acc", "Eve accuracy", |r| r.eve_acc),
    ("gap", "Bob - Eve accuracy gap", |r| r.gap),
    ("psnr_db", "PSNR (dB)", |r| r.psnr_db),
    ("ssim", "SSIM", |r| r.ssim),
];

fn condition(r: &EvalRow) -> String {
    format!("{} d={} w_P={} {}", r.dataset, r.latent_dim, r.w_p, r.perturb)
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

/// Series of `(snr, value)` points per condition, sorted by SNR, NaNs dropped.
fn series(report: &EvalReport, value: fn(&EvalRow) -> f64) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &report.rows {
        let v = value(r);
        if v.is_finite() {
            out.entry(condition(r)).or_default().push((r.eve_snr_db, v));
        }
    }
    for points in out.values_mut() {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

fn draw_metric(report: &EvalReport, metric: &Metric, path: &Path) -> Result<()> {
    let (_, label, value) = *metric;
    let data = series(report, value);
    let (x0, x1) = padded_range(report.rows.iter().map(|r| r.eve_snr_db));
    let (y0, y1) = padded_range(data.values().flatten().map(|p| p.1));
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(label, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("Eve SNR (dB)").y_desc(label).draw().map_err(plot_err)?;
    for (i, (name, points)) in data.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        chart.draw_series(points.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(plot_err)?;
    }
    if !data.is_empty() {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}

/// Writes one SVG per metric into `dir` and returns their paths.
pub fn plot_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.is_empty() {
        return Err(CoreError::Empty("report").into());
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(METRICS.len());
    for metric in &METRICS {
        let path = dir.join(format!("{}.svg", metric.0));
        draw_metric(report, metric, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
