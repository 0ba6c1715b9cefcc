//! Training procedures: baseline multi-task training, alternating min-max
//! training against an adaptive eavesdropper, and eavesdropper-only
//! training against a frozen encoder.
//!
//! The legitimate pair and the eavesdropper draw from disjoint random
//! streams and the eavesdropper only ever sees the encoder in evaluation
//! mode, so eavesdropper work never perturbs the legitimate trajectory.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore};

use crate::channel::{gain_backward, power_normalize_backward, transmit, ChannelRealization};
use crate::config::{ExperimentConfig, Optimizer};
use crate::data::{epoch_order, LabeledImageSet};
use crate::evaluation::{measure_point, PointSpec};
use crate::metrics::{bob_loss, cce_with_grad, correct, LossWeights};
use crate::models::{build_semantic_classifier, ModelBundle, TrainingMode};
use crate::nn::{Adam, Mode};
use crate::rng::{RandomStreams, Stream, StreamRng};
use crate::tensor::{Real, Tensor};
use crate::{Error, Result};

const MONITOR_SALT: u64 = 0x5e7;

/// Step counts and optimizer settings of a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub eve_steps_per_round: usize,
    pub legit_steps_per_round: usize,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub lr_eve: f64,
    pub log_every: usize,
}

impl TrainSchedule {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            epochs: cfg.epochs,
            eve_steps_per_round: cfg.eve_steps_per_round,
            legit_steps_per_round: cfg.legit_steps_per_round,
            optimizer: cfg.optimizer,
            learning_rate: cfg.learning_rate,
            lr_eve: cfg.lr_eve,
            log_every: cfg.log_every,
        }
    }

    fn optimizer<T: Real>(&self, lr: f64) -> Adam<T> {
        match self.optimizer {
            Optimizer::Adam => Adam::new(lr),
        }
    }

    fn logs(&self, epoch: usize, epochs: usize) -> bool {
        (epoch + 1).is_multiple_of(self.log_every.max(1)) || epoch + 1 == epochs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Baseline,
    Minmax,
    Eve,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Baseline => "baseline",
            Phase::Minmax => "minmax",
            Phase::Eve => "eve",
        })
    }
}

/// One logged evaluation during training.
///
/// In baseline rows `snr_db` is the legitimate-link SNR. In min-max and
/// eavesdropper rows it is the eavesdropper SNR, with the legitimate link
/// held at the configured evaluation SNR. Quantities a phase does not
/// produce are NaN. Losses are training averages over the epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub snr_db: f64,
    pub bob_acc: f64,
    pub eve_acc: f64,
    pub bob_loss: f64,
    pub eve_cce: f64,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingCurve {
    pub records: Vec<CurveRecord>,
}

impl TrainingCurve {
    /// Records of the last logged epoch.
    pub fn last_epoch(&self) -> Vec<&CurveRecord> {
        let last = self.records.iter().map(|r| r.epoch).max();
        self.records.iter().filter(|r| Some(r.epoch) == last).collect()
    }
}

/// Generators driving the legitimate link during training.
#[derive(Debug, Clone)]
pub struct LegitStreams {
    pub snr: StreamRng,
    pub fading: StreamRng,
    pub noise: StreamRng,
    pub dropout: StreamRng,
}

impl LegitStreams {
    pub fn new(streams: &RandomStreams) -> Self {
        Self {
            snr: streams.stream(Stream::Snr),
            fading: streams.stream(Stream::Fading),
            noise: streams.stream(Stream::Noise),
            dropout: streams.stream(Stream::Dropout),
        }
    }
}

/// Generators driving the eavesdropper link during training.
#[derive(Debug, Clone)]
pub struct EveStreams {
    pub snr: StreamRng,
    pub fading: StreamRng,
    pub noise: StreamRng,
    pub dropout: StreamRng,
}

impl EveStreams {
    pub fn new(streams: &RandomStreams) -> Self {
        Self {
            snr: streams.stream(Stream::EveSnr),
            fading: streams.stream(Stream::EveFading),
            noise: streams.stream(Stream::EveNoise),
            dropout: streams.stream(Stream::EveDropout),
        }
    }
}

/// Eavesdropper observation used by the privacy term of one legitimate pass.
pub struct EveTap<'a, T> {
    pub channel: &'a ChannelRealization<T>,
    pub noise: &'a mut dyn RngCore,
    pub w_p: f64,
}

/// Outcome of one forward/backward pass of the legitimate pipeline.
#[derive(Debug, Clone)]
pub struct LegitPass<T> {
    /// Utility loss minus the weighted eavesdropper cross entropy.
    pub objective: f64,
    pub bob_loss: f64,
    pub cce: f64,
    pub mse: f64,
    pub ssim: f64,
    pub eve_cce: Option<f64>,
    pub bob_correct: usize,
    /// Gradient of the objective w.r.t. the input images along the encoder
    /// path. The images' direct role as reconstruction targets is excluded.
    pub input_grad: Tensor<T>,
}

/// Runs encoder, channel and both legitimate receivers on one batch,
/// optionally adds the privacy term from an eavesdropper tap, and
/// backpropagates the objective. Parameter gradients accumulate in the
/// encoder and both legitimate receivers only; the eavesdropper is run in
/// evaluation mode and its parameters are left untouched.
#[allow(clippy::too_many_arguments)]
pub fn legit_pass<T: Real>(
    bundle: &mut ModelBundle<T>,
    images: &Tensor<T>,
    labels: &[usize],
    weights: &LossWeights,
    mode: Mode,
    channel: &ChannelRealization<T>,
    noise: &mut dyn RngCore,
    dropout: &mut dyn RngCore,
    eve: Option<EveTap<'_, T>>,
) -> Result<LegitPass<T>> {
    let dim = bundle.latent_dim();
    let (raw, x) = bundle.encode(images, mode, dropout)?;
    let y = transmit(&x, channel, noise)?.to_tensor();
    let logits = bundle.bob_cls.forward(y.clone(), mode, dropout);
    let recon = bundle.recon.forward(y, mode, dropout);
    let loss = bob_loss(&logits, labels, &recon, images, weights)?;
    let g_cls = bundle.bob_cls.backward(loss.grad_logits, true);
    let g_rec = bundle.recon.backward(loss.grad_recon, true);
    let g_y: Vec<T> = g_cls.data().iter().zip(g_rec.data()).map(|(a, b)| *a + *b).collect();
    let mut g_x = gain_backward(&channel.h, dim, &g_y);

    let mut objective = loss.total;
    let mut eve_cce = None;
    if let Some(tap) = eve {
        let y_eve = transmit(&x, tap.channel, tap.noise)?.to_tensor();
        let eve_logits = bundle.eve_cls.forward(y_eve, Mode::Eval, dropout);
        let (ce, mut g_logits) = cce_with_grad(&eve_logits, labels)?;
        objective -= tap.w_p * ce;
        eve_cce = Some(ce);
        if tap.w_p != 0.0 {
            let scale = T::lit(-tap.w_p);
            g_logits.data_mut().iter_mut().for_each(|g| *g *= scale);
            let g_eve = bundle.eve_cls.backward(g_logits, false);
            for (gx, g) in g_x.iter_mut().zip(gain_backward(&tap.channel.h, dim, g_eve.data())) {
                *gx += g;
            }
        }
    }
    let g_z = power_normalize_backward(&raw, &x, &g_x);
    let input_grad = bundle.encoder.backward(Tensor::from_vec(&[labels.len(), 2 * dim], g_z), true);
    Ok(LegitPass {
        objective,
        bob_loss: loss.total,
        cce: loss.cce,
        mse: loss.mse,
        ssim: loss.ssim,
        eve_cce,
        bob_correct: correct(&logits, labels),
        input_grad,
    })
}

fn draw_snr(range: (f64, f64), rng: &mut dyn RngCore) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..=range.1)
    }
}

fn zero_legit_grads<T: Real>(bundle: &mut ModelBundle<T>) {
    bundle.encoder.zero_grad();
    bundle.recon.zero_grad();
    bundle.bob_cls.zero_grad();
}

/// One legitimate update: draws the training SNR and channels, runs
/// [`legit_pass`] in training mode and, when an optimizer is given, updates
/// the encoder and both legitimate receivers. With `eve` present the
/// privacy term uses a fresh eavesdropper channel at an SNR drawn from the
/// eavesdropper range.
pub fn legit_step<T: Real>(
    bundle: &mut ModelBundle<T>,
    optimizer: Option<&mut Adam<T>>,
    images: &Tensor<T>,
    labels: &[usize],
    cfg: &ExperimentConfig,
    legit: &mut LegitStreams,
    eve: Option<&mut EveStreams>,
) -> Result<LegitPass<T>> {
    zero_legit_grads(bundle);
    let batch = labels.len();
    let snr = draw_snr(cfg.train_snr_range_db, &mut legit.snr);
    let channel = ChannelRealization::rayleigh(batch, snr, &mut legit.fading)?;
    let pass = match eve {
        Some(e) => {
            let eve_snr = draw_snr(cfg.eve_train_snr_range_db, &mut e.snr);
            let eve_channel = ChannelRealization::rayleigh(batch, eve_snr, &mut e.fading)?;
            let tap = EveTap { channel: &eve_channel, noise: &mut e.noise, w_p: cfg.weights.w_p };
            legit_pass(bundle, images, labels, &cfg.weights, Mode::Train, &channel, &mut legit.noise, &mut legit.dropout, Some(tap))?
        }
        None => legit_pass(bundle, images, labels, &cfg.weights, Mode::Train, &channel, &mut legit.noise, &mut legit.dropout, None)?,
    };
    if let Some(opt) = optimizer {
        if pass.objective.is_finite() {
            opt.step(&mut [&mut bundle.encoder, &mut bundle.recon, &mut bundle.bob_cls]);
        }
    }
    Ok(pass)
}

/// Outcome of one eavesdropper update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveStepStats {
    pub cce: f64,
    pub correct: usize,
}

/// One eavesdropper update against the frozen encoder (evaluation mode).
pub fn eve_step<T: Real>(
    bundle: &mut ModelBundle<T>,
    optimizer: &mut Adam<T>,
    images: &Tensor<T>,
    labels: &[usize],
    snr_range: (f64, f64),
    eve: &mut EveStreams,
) -> Result<EveStepStats> {
    bundle.eve_cls.zero_grad();
    let (_, x) = bundle.encode(images, Mode::Eval, &mut eve.dropout)?;
    let snr = draw_snr(snr_range, &mut eve.snr);
    let channel = ChannelRealization::rayleigh(labels.len(), snr, &mut eve.fading)?;
    let y = transmit(&x, &channel, &mut eve.noise)?.to_tensor();
    let logits = bundle.eve_cls.forward(y, Mode::Train, &mut eve.dropout);
    let (cce, grad) = cce_with_grad(&logits, labels)?;
    if cce.is_finite() {
        bundle.eve_cls.backward(grad, true);
        optimizer.step(&mut [&mut bundle.eve_cls]);
    }
    Ok(EveStepStats { cce, correct: correct(&logits, labels) })
}

fn diverged(epoch: usize, batch: usize, what: &'static str) -> Error {
    Error::Divergence { epoch, batch, what }
}

/// Cycles through the training set in per-epoch shuffled orders drawn from
/// one shuffle stream.
struct BatchCursor {
    streams: RandomStreams,
    stream: Stream,
    n: usize,
    batch: usize,
    epoch: usize,
    order: Vec<usize>,
    pos: usize,
}

impl BatchCursor {
    fn new(streams: &RandomStreams, stream: Stream, n: usize, batch: usize) -> Self {
        Self { streams: *streams, stream, n, batch, epoch: 0, order: epoch_order(streams, stream, 0, n), pos: 0 }
    }

    fn next(&mut self) -> Vec<usize> {
        if self.pos >= self.n {
            self.epoch += 1;
            self.order = epoch_order(&self.streams, self.stream, self.epoch, self.n);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.n);
        let chunk = self.order[self.pos..end].to_vec();
        self.pos = end;
        chunk
    }
}

#[derive(Default)]
struct Averages {
    bob: f64,
    bob_n: usize,
    eve: f64,
    eve_n: usize,
}

impl Averages {
    fn bob(&self) -> f64 {
        if self.bob_n == 0 { f64::NAN } else { self.bob / self.bob_n as f64 }
    }

    fn eve(&self) -> f64 {
        if self.eve_n == 0 { f64::NAN } else { self.eve / self.eve_n as f64 }
    }
}

fn monitor<T: Real>(
    bundle: &mut ModelBundle<T>,
    data: &LabeledImageSet,
    cfg: &ExperimentConfig,
    phase: Phase,
    epoch: usize,
    avg: &Averages,
    streams: &RandomStreams,
) -> Result<Vec<CurveRecord>> {
    let streams = streams.derive(MONITOR_SALT);
    let mut records = Vec::with_capacity(cfg.eval_snr_list_db.len());
    let record = |snr_db, bob_acc, eve_acc, psnr, ssim| CurveRecord {
        epoch,
        phase,
        snr_db,
        bob_acc,
        eve_acc,
        bob_loss: avg.bob(),
        eve_cce: avg.eve(),
        psnr,
        ssim,
    };
    match phase {
        Phase::Baseline => {
            for &snr in &cfg.eval_snr_list_db {
                let m = measure_point(bundle, data, &PointSpec::new(Some(snr), None, 1), &streams)?;
                records.push(record(snr, m.bob_acc(), f64::NAN, m.psnr_db(), m.ssim()));
            }
        }
        Phase::Minmax | Phase::Eve => {
            let bob = if phase == Phase::Minmax {
                Some(measure_point(bundle, data, &PointSpec::new(Some(cfg.bob_eval_snr_db), None, 1), &streams)?)
            } else {
                None
            };
            for &snr in &cfg.eval_snr_list_db {
                let eve = measure_point(bundle, data, &PointSpec::new(None, Some(snr), 1), &streams)?;
                let (acc, psnr, ssim) = bob.as_ref().map_or((f64::NAN, f64::NAN, f64::NAN), |b| (b.bob_acc(), b.psnr_db(), b.ssim()));
                records.push(record(snr, acc, eve.eve_acc(), psnr, ssim));
            }
        }
    }
    Ok(records)
}

fn check_training_data(cfg: &ExperimentConfig, data: &LabeledImageSet) -> Result<()> {
    // Zero-epoch runs are allowed here; they return untrained networks.
    let mut checked = cfg.clone();
    checked.epochs = checked.epochs.max(1);
    checked.eve_epochs = checked.eve_epochs.max(1);
    checked.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if data.shape() != cfg.image_shape() || data.num_classes() != cfg.num_classes() {
        return Err(Error::Mismatch(alloc::format!(
            "data is {} with {} classes, config expects {} with {}",
            data.shape(),
            data.num_classes(),
            cfg.image_shape(),
            cfg.num_classes()
        )));
    }
    Ok(())
}

/// Trains encoder and legitimate receivers on the multi-task loss; the
/// privacy weight is ignored. `monitor_data`, when given, is evaluated at
/// each logged epoch.
pub fn train_baseline<T: Real>(
    cfg: &ExperimentConfig,
    data: &LabeledImageSet,
    monitor_data: Option<&LabeledImageSet>,
    streams: &RandomStreams,
) -> Result<(ModelBundle<T>, TrainingCurve)> {
    train_legit(cfg, data, monitor_data, streams, false)
}

/// Alternating min-max training. Each round runs `k_eve` eavesdropper
/// updates against the frozen encoder, then `k_legit` legitimate updates
/// that minimize the utility loss minus `w_p` times the eavesdropper's cross
/// entropy with the eavesdropper frozen. An epoch is one pass of legitimate
/// updates over the training set.
pub fn train_minmax<T: Real>(
    cfg: &ExperimentConfig,
    data: &LabeledImageSet,
    monitor_data: Option<&LabeledImageSet>,
    streams: &RandomStreams,
) -> Result<(ModelBundle<T>, TrainingCurve)> {
    train_legit(cfg, data, monitor_data, streams, true)
}

fn train_legit<T: Real>(
    cfg: &ExperimentConfig,
    data: &LabeledImageSet,
    monitor_data: Option<&LabeledImageSet>,
    streams: &RandomStreams,
    adversarial: bool,
) -> Result<(ModelBundle<T>, TrainingCurve)> {
    check_training_data(cfg, data)?;
    let schedule = TrainSchedule::from_config(cfg);
    let phase = if adversarial { Phase::Minmax } else { Phase::Baseline };
    let mut bundle = ModelBundle::<T>::new(cfg, streams)?;
    bundle.training_mode = if adversarial { TrainingMode::Minmax } else { TrainingMode::Baseline };
    let mut opt = schedule.optimizer::<T>(schedule.learning_rate);
    let mut eve_opt = schedule.optimizer::<T>(schedule.lr_eve);
    let mut legit = LegitStreams::new(streams);
    let mut eve = EveStreams::new(streams);
    let mut eve_batches = BatchCursor::new(streams, Stream::EveShuffle, data.len(), cfg.batch_size);
    let mut curve = TrainingCurve::default();

    for epoch in 0..schedule.epochs {
        let order = epoch_order(streams, Stream::Shuffle, epoch, data.len());
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        let mut avg = Averages::default();
        let mut next = 0;
        while next < batches.len() {
            if adversarial {
                for _ in 0..schedule.eve_steps_per_round {
                    let (images, labels) = data.batch::<T>(&eve_batches.next());
                    let stats = eve_step(&mut bundle, &mut eve_opt, &images, &labels, cfg.eve_train_snr_range_db, &mut eve)?;
                    if !stats.cce.is_finite() {
                        return Err(diverged(epoch, next, "eavesdropper cross entropy"));
                    }
                    avg.eve += stats.cce;
                    avg.eve_n += 1;
                }
            }
            for _ in 0..schedule.legit_steps_per_round {
                let Some(chunk) = batches.get(next) else { break };
                let (images, labels) = data.batch::<T>(chunk);
                let eve_streams = if adversarial { Some(&mut eve) } else { None };
                let pass = legit_step(&mut bundle, Some(&mut opt), &images, &labels, cfg, &mut legit, eve_streams)?;
                if !pass.objective.is_finite() {
                    return Err(diverged(epoch, next, "legitimate objective"));
                }
                avg.bob += pass.bob_loss;
                avg.bob_n += 1;
                next += 1;
            }
        }
        if let Some(m) = monitor_data.filter(|_| schedule.logs(epoch, schedule.epochs)) {
            curve.records.extend(monitor(&mut bundle, m, cfg, phase, epoch, &avg, streams)?);
        }
    }
    bundle.eve_trained = adversarial && schedule.epochs > 0;
    Ok((bundle, curve))
}

/// Trains a fresh eavesdropper classifier, initialized from the `EveInit`
/// stream of `streams`, against the bundle's frozen encoder for
/// `cfg.eve_epochs` epochs. Only the eavesdropper's parameters change.
pub fn train_eve<T: Real>(
    mut bundle: ModelBundle<T>,
    cfg: &ExperimentConfig,
    data: &LabeledImageSet,
    monitor_data: Option<&LabeledImageSet>,
    streams: &RandomStreams,
) -> Result<(ModelBundle<T>, TrainingCurve)> {
    check_training_data(cfg, data)?;
    if bundle.arch.shape != data.shape() || bundle.arch.num_classes != data.num_classes() {
        return Err(Error::Mismatch("bundle architecture does not match the data".into()));
    }
    let schedule = TrainSchedule::from_config(cfg);
    let arch = bundle.arch;
    bundle.eve_cls = build_semantic_classifier(
        arch.latent_dim,
        arch.num_classes,
        arch.model.cls_hidden,
        arch.model.cls_dropout,
        &mut streams.stream(Stream::EveInit),
    );
    let mut opt = schedule.optimizer::<T>(schedule.lr_eve);
    let mut eve = EveStreams::new(streams);
    let mut curve = TrainingCurve::default();
    for epoch in 0..cfg.eve_epochs {
        let order = epoch_order(streams, Stream::EveShuffle, epoch, data.len());
        let mut avg = Averages::default();
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (images, labels) = data.batch::<T>(chunk);
            let stats = eve_step(&mut bundle, &mut opt, &images, &labels, cfg.eve_train_snr_range_db, &mut eve)?;
            if !stats.cce.is_finite() {
                return Err(diverged(epoch, b, "eavesdropper cross entropy"));
            }
            avg.eve += stats.cce;
            avg.eve_n += 1;
        }
        if let Some(m) = monitor_data.filter(|_| schedule.logs(epoch, cfg.eve_epochs)) {
            curve.records.extend(monitor(&mut bundle, m, cfg, Phase::Eve, epoch, &avg, streams)?);
        }
    }
    bundle.eve_trained = true;
    Ok((bundle, curve))
}
