//! Evaluation sweeps: accuracy, PSNR and SSIM against SNR, the
//! legitimate-versus-eavesdropper accuracy gap, fidelity penalties and
//! jammer scenarios.
//!
//! Every measurement draws channels from fixed evaluation streams, so two
//! measurements with the same streams see the same fading and the same
//! (scaled) noise samples. Comparisons across SNRs, bundles and attack
//! methods are therefore paired.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use rand::{Rng, RngCore};

use crate::channel::{noise_variance, transmit, transmit_superposed, ChannelRealization, LatentSignal};
use crate::config::ExperimentConfig;
use crate::data::{DatasetName, LabeledImageSet};
use crate::metrics::{cce_per_row, predictions, psnr_per_image, ssim_per_image};
use crate::models::ModelBundle;
use crate::nn::{Mode, Sequential};
use crate::perturbation::{craft, JammerConfig, PerturbationSpec};
use crate::rng::{RandomStreams, Stream};
use crate::tensor::{Real, Tensor};
use crate::{Error, Result};

/// Images per forward pass during evaluation.
pub const EVAL_BATCH: usize = 64;

const EVE_SALT: u64 = 0xe7e;
const JAMMER_SALT: u64 = 0x1a3;

/// Fading model used by a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fading {
    #[default]
    Rayleigh,
    /// Unit gain on every block.
    Identity,
}

/// What to measure at one operating point.
#[derive(Debug, Clone, Copy)]
pub struct PointSpec<'a> {
    /// Legitimate-link SNR; `None` skips the legitimate receiver.
    pub bob_snr_db: Option<f64>,
    /// Eavesdropper SNR; `None` skips the eavesdropper.
    pub eve_snr_db: Option<f64>,
    pub n_real: usize,
    pub fading: Fading,
    pub jammer: Option<(&'a PerturbationSpec, &'a JammerConfig)>,
}

impl<'a> PointSpec<'a> {
    pub fn new(bob_snr_db: Option<f64>, eve_snr_db: Option<f64>, n_real: usize) -> Self {
        Self { bob_snr_db, eve_snr_db, n_real, fading: Fading::Rayleigh, jammer: None }
    }
}

/// Per-sample outcomes at one operating point, one entry per
/// (image, channel realization) pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointMetrics {
    pub bob_correct: Vec<f64>,
    pub bob_cce: Vec<f64>,
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    pub eve_correct: Vec<f64>,
    pub eve_cce: Vec<f64>,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

impl PointMetrics {
    pub fn bob_acc(&self) -> f64 {
        mean(&self.bob_correct)
    }

    pub fn eve_acc(&self) -> f64 {
        mean(&self.eve_correct)
    }

    pub fn psnr_db(&self) -> f64 {
        mean(&self.psnr)
    }

    pub fn ssim(&self) -> f64 {
        mean(&self.ssim)
    }

    pub fn mean_bob_cce(&self) -> f64 {
        mean(&self.bob_cce)
    }

    pub fn mean_eve_cce(&self) -> f64 {
        mean(&self.eve_cce)
    }
}

fn draw_channel<T: Real>(batch: usize, snr_db: f64, fading: Fading, rng: &mut dyn RngCore) -> Result<ChannelRealization<T>> {
    match fading {
        Fading::Rayleigh => ChannelRealization::rayleigh(batch, snr_db, rng),
        Fading::Identity => Ok(ChannelRealization::identity(batch).with_noise_variance(noise_variance(snr_db))),
    }
}

/// Received signal, with the jammer's contribution when a perturbation is given.
fn receive<T: Real>(
    x: &LatentSignal<T>,
    ch: &ChannelRealization<T>,
    delta: Option<(&LatentSignal<T>, &JammerConfig, f64)>,
    jam_rng: &mut dyn RngCore,
    noise_rng: &mut dyn RngCore,
) -> Result<LatentSignal<T>> {
    match delta {
        None => transmit(x, ch, noise_rng),
        Some((d, jammer, gain)) => {
            let ch_jam = jammer.jammer_channel(ch, gain, jam_rng)?;
            transmit_superposed(x, d, ch, &ch_jam, noise_rng)
        }
    }
}

fn classify<T: Real>(cls: &mut Sequential<T>, y: &LatentSignal<T>, labels: &[usize], rng: &mut dyn RngCore) -> Result<(Vec<f64>, Vec<f64>)> {
    let logits = cls.forward(y.to_tensor(), Mode::Eval, rng);
    let correct = predictions(&logits).iter().zip(labels).map(|(p, l)| f64::from(u8::from(p == l))).collect();
    Ok((correct, cce_per_row(&logits, labels)?))
}

/// Evaluates `data` at one operating point with every network in
/// evaluation mode.
pub fn measure_point<T: Real>(
    bundle: &mut ModelBundle<T>,
    data: &LabeledImageSet,
    spec: &PointSpec<'_>,
    streams: &RandomStreams,
) -> Result<PointMetrics> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    if spec.n_real == 0 {
        return Err(Error::Validation("n_real must be at least 1".into()));
    }
    if spec.jammer.is_some() && spec.eve_snr_db.is_none() {
        return Err(Error::Validation("a jammer scenario needs an eavesdropper SNR".into()));
    }
    let eve_streams = streams.derive(EVE_SALT);
    let jam_streams = streams.derive(JAMMER_SALT);
    let mut bob_fading = streams.stream(Stream::EvalFading);
    let mut bob_noise = streams.stream(Stream::EvalNoise);
    let mut eve_fading = eve_streams.stream(Stream::EvalFading);
    let mut eve_noise = eve_streams.stream(Stream::EvalNoise);
    let mut craft_rng = jam_streams.stream(Stream::Perturbation);
    let mut jam_bob_fading = jam_streams.stream(Stream::EvalFading);
    let mut jam_eve_fading = jam_streams.stream(Stream::EvalNoise);
    // Evaluation-mode passes never consume this generator.
    let mut idle = streams.stream(Stream::Dropout);

    let mut out = PointMetrics::default();
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_BATCH) {
        let (images, labels): (Tensor<T>, Vec<usize>) = data.batch(chunk);
        let (_, x) = bundle.encode(&images, Mode::Eval, &mut idle)?;
        for _ in 0..spec.n_real {
            let delta = match spec.jammer {
                Some((p, j)) => {
                    let snr = spec.eve_snr_db.expect("checked above");
                    Some((craft(&mut bundle.eve_cls, &x, &labels, p, snr, j, &mut craft_rng)?, j))
                }
                None => None,
            };
            if let Some(snr) = spec.bob_snr_db {
                let ch = draw_channel(x.batch(), snr, spec.fading, &mut bob_fading)?;
                let jam = delta.as_ref().map(|(d, j)| (d, *j, j.bob_gain));
                let y = receive(&x, &ch, jam, &mut jam_bob_fading, &mut bob_noise)?;
                let (correct, ce) = classify(&mut bundle.bob_cls, &y, &labels, &mut idle)?;
                out.bob_correct.extend(correct);
                out.bob_cce.extend(ce);
                let recon = bundle.recon.forward(y.to_tensor(), Mode::Eval, &mut idle);
                out.psnr.extend(psnr_per_image(&recon, &images)?);
                out.ssim.extend(ssim_per_image(&recon, &images)?);
            }
            if let Some(snr) = spec.eve_snr_db {
                let ch = draw_channel(x.batch(), snr, spec.fading, &mut eve_fading)?;
                let jam = delta.as_ref().map(|(d, j)| (d, *j, j.eve_gain));
                let y = receive(&x, &ch, jam, &mut jam_eve_fading, &mut eve_noise)?;
                let (correct, ce) = classify(&mut bundle.eve_cls, &y, &labels, &mut idle)?;
                out.eve_correct.extend(correct);
                out.eve_cce.extend(ce);
            }
        }
    }
    Ok(out)
}

/// One report line.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub dataset: DatasetName,
    pub latent_dim: usize,
    pub w_p: f64,
    /// `none`, `fgsm`, `pgd<steps>`, ...
    pub perturb: String,
    pub eve_snr_db: f64,
    pub bob_snr_db: f64,
    pub bob_acc: f64,
    pub eve_acc: f64,
    pub gap: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub n_samples: usize,
    pub n_real: usize,
    pub seed: u64,
}

/// Labels shared by every row of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct RowContext {
    pub dataset: DatasetName,
    pub w_p: f64,
    pub seed: u64,
}

impl RowContext {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self { dataset: cfg.dataset, w_p: cfg.weights.w_p, seed: cfg.seed }
    }
}

impl EvalRow {
    #[allow(clippy::too_many_arguments)]
    fn build(
        ctx: &RowContext,
        latent_dim: usize,
        perturb: &str,
        eve_snr_db: f64,
        bob_snr_db: f64,
        bob: &PointMetrics,
        eve_acc: f64,
        n_samples: usize,
        n_real: usize,
    ) -> Self {
        let bob_acc = bob.bob_acc();
        Self {
            dataset: ctx.dataset,
            latent_dim,
            w_p: ctx.w_p,
            perturb: perturb.to_string(),
            eve_snr_db,
            bob_snr_db,
            bob_acc,
            eve_acc,
            gap: bob_acc - eve_acc,
            psnr_db: bob.psnr_db(),
            ssim: bob.ssim(),
            n_samples,
            n_real,
            seed: ctx.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub config_hash: String,
}

impl EvalReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends the rows of `other` (single-writer merge).
    pub fn merge(&mut self, other: EvalReport) {
        if self.config_hash.is_empty() {
            self.config_hash = other.config_hash;
        }
        self.rows.extend(other.rows);
    }

    /// Rows matching a predicate, in order.
    pub fn select(&self, pred: impl Fn(&EvalRow) -> bool) -> Vec<&EvalRow> {
        self.rows.iter().filter(|r| pred(r)).collect()
    }
}

/// Accuracy, PSNR and SSIM at each SNR in `snr_list`. Both receivers see
/// the same SNR; the eavesdropper columns are NaN when its classifier has
/// not been trained.
pub fn evaluate<T: Real>(
    bundle: &mut ModelBundle<T>,
    data: &LabeledImageSet,
    snr_list: &[f64],
    n_real: usize,
    ctx: &RowContext,
    streams: &RandomStreams,
) -> Result<EvalReport> {
    if snr_list.is_empty() {
        return Err(Error::Empty("SNR list"));
    }
    let mut report = EvalReport { rows: Vec::new(), config_hash: bundle.config_hash.clone() };
    for &snr in snr_list {
        let eve_snr = bundle.eve_trained.then_some(snr);
        let m = measure_point(bundle, data, &PointSpec::new(Some(snr), eve_snr, n_real), streams)?;
        let eve_acc = if bundle.eve_trained { m.eve_acc() } else { f64::NAN };
        report.rows.push(EvalRow::build(ctx, bundle.latent_dim(), "none", snr, snr, &m, eve_acc, data.len(), n_real));
    }
    Ok(report)
}

/// Gap against eavesdropper SNR for several bundles keyed by privacy weight.
/// The legitimate receiver is evaluated at `bob_snr_db` throughout.
pub fn gap_sweep<T: Real>(
    bundles: &mut [(f64, &mut ModelBundle<T>)],
    data: &LabeledImageSet,
    eve_snr_list: &[f64],
    bob_snr_db: f64,
    n_real: usize,
    ctx: &RowContext,
    streams: &RandomStreams,
) -> Result<EvalReport> {
    if eve_snr_list.is_empty() {
        return Err(Error::Empty("eavesdropper SNR list"));
    }
    let mut report = EvalReport::default();
    for (w_p, bundle) in bundles.iter_mut() {
        if !bundle.eve_trained {
            return Err(Error::UntrainedEve);
        }
        if report.config_hash.is_empty() {
            report.config_hash = bundle.config_hash.clone();
        }
        let bob = measure_point(bundle, data, &PointSpec::new(Some(bob_snr_db), None, n_real), streams)?;
        let row_ctx = RowContext { w_p: *w_p, ..ctx.clone() };
        for &eve_snr in eve_snr_list {
            let eve = measure_point(bundle, data, &PointSpec::new(None, Some(eve_snr), n_real), streams)?;
            report.rows.push(EvalRow::build(
                &row_ctx,
                bundle.latent_dim(),
                "none",
                eve_snr,
                bob_snr_db,
                &bob,
                eve.eve_acc(),
                data.len(),
                n_real,
            ));
        }
    }
    Ok(report)
}

/// Legitimate and eavesdropper metrics with a cooperative jammer active.
/// `perturbation = None` evaluates the unprotected link on the same draws.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_with_jammer<T: Real>(
    bundle: &mut ModelBundle<T>,
    data: &LabeledImageSet,
    perturbation: Option<&PerturbationSpec>,
    eve_snr_list: &[f64],
    bob_snr_db: f64,
    jammer: &JammerConfig,
    n_real: usize,
    ctx: &RowContext,
    streams: &RandomStreams,
) -> Result<(EvalReport, Vec<PointMetrics>)> {
    if !bundle.eve_trained {
        return Err(Error::UntrainedEve);
    }
    if eve_snr_list.is_empty() {
        return Err(Error::Empty("eavesdropper SNR list"));
    }
    if let Some(p) = perturbation.filter(|p| !(p.epsilon >= 0.0 && p.step_size > 0.0 && p.grad_realizations > 0 && p.steps > 0)) {
        return Err(Error::Validation(format!("unusable perturbation settings {p:?}")));
    }
    let tag = perturbation.map_or_else(|| "none".to_string(), PerturbationSpec::tag);
    let mut report = EvalReport { rows: Vec::new(), config_hash: bundle.config_hash.clone() };
    let mut points = Vec::with_capacity(eve_snr_list.len());
    for &eve_snr in eve_snr_list {
        let spec = PointSpec {
            bob_snr_db: Some(bob_snr_db),
            eve_snr_db: Some(eve_snr),
            n_real,
            fading: Fading::Rayleigh,
            jammer: perturbation.map(|p| (p, jammer)),
        };
        let m = measure_point(bundle, data, &spec, streams)?;
        report.rows.push(EvalRow::build(ctx, bundle.latent_dim(), &tag, eve_snr, bob_snr_db, &m, m.eve_acc(), data.len(), n_real));
        points.push(m);
    }
    Ok((report, points))
}

/// Fidelity lost by protection at one SNR. Positive values mean the
/// protected bundle reconstructs worse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityPenalty {
    pub delta_psnr_db: f64,
    pub delta_ssim: f64,
}

pub fn fidelity_penalty<T: Real>(
    protected: &mut ModelBundle<T>,
    baseline: &mut ModelBundle<T>,
    data: &LabeledImageSet,
    snr_db: f64,
    n_real: usize,
    streams: &RandomStreams,
) -> Result<FidelityPenalty> {
    if protected.utility_hash != baseline.utility_hash || protected.arch != baseline.arch {
        return Err(Error::Mismatch(format!(
            "bundles come from configs that differ beyond the privacy weight ({} vs {})",
            protected.utility_hash, baseline.utility_hash
        )));
    }
    let spec = PointSpec::new(Some(snr_db), None, n_real);
    let p = measure_point(protected, data, &spec, streams)?;
    let b = measure_point(baseline, data, &spec, streams)?;
    Ok(FidelityPenalty { delta_psnr_db: b.psnr_db() - p.psnr_db(), delta_ssim: b.ssim() - p.ssim() })
}

/// Percentile bootstrap confidence interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, rng: &mut dyn RngCore) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("bootstrap sample"));
    }
    if !(0.0..1.0).contains(&level) || resamples == 0 {
        return Err(Error::Validation(format!("bootstrap needs level in (0, 1) and resamples > 0, got {level}, {resamples}")));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok((at(tail), at(1.0 - tail)))
}
