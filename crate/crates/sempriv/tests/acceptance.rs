//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Environment:
//! - `SEMPRIV_ACCEPTANCE_ONLY=1,3,9` runs a subset of the criteria.
//! - `SEMPRIV_ACCEPTANCE_STRICT=1` makes any FAIL line a non-zero exit.
//! - `SEMPRIV_DATA_DIR` points at the dataset root (default: `<workspace>/data`).
//!
//! A criterion that cannot be evaluated (for example, missing MNIST files)
//! is reported as FAIL with the reason.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sempriv::core::channel::{power_normalize, sample_fading, transmit, ChannelRealization, LatentSignal};
use sempriv::core::config::ExperimentConfig;
use sempriv::core::data::{make_synthetic, DatasetName, ImageShape, LabeledImageSet, Split};
use sempriv::core::evaluation::{
    evaluate, evaluate_with_jammer, fidelity_penalty, gap_sweep, EvalRow, RowContext,
};
use sempriv::core::metrics::{cce, gaussian_window, psnr_from_mse, ssim, LossWeights, SSIM_C1, SSIM_C2, SSIM_WINDOW};
use sempriv::core::models::ModelBundle;
use sempriv::core::nn::{Adam, Mode};
use sempriv::core::perturbation::{fgsm_perturb, pgd_iterates, JammerConfig, PerturbationSpec};
use sempriv::core::rng::{seed_all, RandomStreams, Stream};
use sempriv::core::training::{eve_step, legit_pass, legit_step, train_baseline, train_eve, train_minmax, EveStreams, EveTap, LegitStreams};
use sempriv::core::Tensor;
use sempriv::datasets::{load_split, DATA_DIR_ENV};

const SNRS: [f64; 4] = [-5.0, 0.0, 5.0, 10.0];
const BOB_SNR: f64 = 10.0;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

type Outcome = Result<Verdict, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

type Criterion<'a> = (u32, &'a str, &'a dyn Fn(&mut Smoke) -> Outcome);

fn main() {
    let only: Option<Vec<u32>> = std::env::var("SEMPRIV_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let strict = std::env::var("SEMPRIV_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut smoke = Smoke::default();
    let criteria: [Criterion; 10] = [
        (1, "channel conventions", &|_| channel_conventions()),
        (2, "power normalization", &|_| normalization()),
        (3, "metric oracles", &|_| metric_oracles()),
        (4, "end-to-end differentiability", &|_| differentiability()),
        (5, "baseline utility trend on MNIST", &|_| baseline_utility()),
        (6, "leakage without protection", &|s| leakage_without_protection(s)),
        (7, "min-max protection trend", &|s| minmax_trend(s)),
        (8, "fidelity penalty bound", &|s| fidelity_bound(s)),
        (9, "perturbation ordering", &|s| perturbation_ordering(s)),
        (10, "structural invariants", &|s| structural_invariants(s)),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut smoke)))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(v) if v.pass => ("PASS", v.detail),
            Ok(v) => ("FAIL", v.detail),
            Err(e) => ("FAIL", format!("could not evaluate: {e}")),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} criterion {id}: {name} [{secs:.1}s] {detail}");
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if strict && failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// 1-4: closed-form checks

fn channel_conventions() -> Outcome {
    let start = Instant::now();
    let (batch, dim) = (1000, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let raw: Vec<f64> = (0..batch * 2 * dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let x = power_normalize(&LatentSignal::new(batch, dim, raw).map_err(err)?).map_err(err)?;
    let mut powers = Vec::new();
    for snr in [0.0, 10.0] {
        let y = transmit(&x, &ChannelRealization::<f64>::identity(batch).with_noise_variance(10f64.powf(-snr / 10.0)), &mut rng)
            .map_err(err)?;
        let total: f64 = y.data().iter().zip(x.data()).map(|(a, b)| (a - b).powi(2)).sum();
        powers.push(total / (batch * dim) as f64);
    }
    let mut mags: Vec<f64> = sample_fading::<f64>(1_000_000, &mut rng).map_err(err)?.iter().map(|h| h.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let n = mags.len() as f64;
    let ks = mags
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let cdf = 1.0 - (-r * r).exp();
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let pass = (powers[0] - 1.0).abs() <= 0.01 && (powers[1] - 0.1).abs() <= 0.001 && ks < 0.01 && elapsed < Duration::from_secs(10);
    Ok(Verdict::new(
        pass,
        format!("noise power {:.4} @0dB, {:.5} @10dB; Rayleigh KS {ks:.5}; {:.2}s", powers[0], powers[1], elapsed.as_secs_f64()),
    ))
}

fn normalization() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.synthetic.shape = ImageShape::new(12, 12, 1);
    let streams = seed_all(21);
    let mut bundle = ModelBundle::<f64>::new(&cfg, &streams).map_err(err)?;
    let data = make_synthetic(10_000, cfg.synthetic.shape, 10, 0.3, &mut streams.stream(Stream::Data)).map_err(err)?;
    let mut worst_power: f64 = 0.0;
    let mut worst_idem: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(500) {
        let (images, _) = data.batch::<f64>(chunk);
        let (_, x) = bundle.encode(&images, Mode::Eval, &mut rng).map_err(err)?;
        for b in 0..x.batch() {
            worst_power = worst_power.max((x.power(b) - 1.0).abs());
        }
        let again = power_normalize(&x).map_err(err)?;
        worst_idem = again.data().iter().zip(x.data()).map(|(a, b)| (a - b).abs()).fold(worst_idem, f64::max);
    }
    Ok(Verdict::new(
        worst_power <= 1e-6 && worst_idem <= 1e-9,
        format!("10000 encoder outputs: max |power - 1| = {worst_power:.2e}, max idempotence error = {worst_idem:.2e}"),
    ))
}

/// Direct SSIM: explicit 2-D Gaussian window at every valid position.
fn naive_ssim(a: &[f64], b: &[f64], side: usize) -> f64 {
    let taps = gaussian_window();
    let mut total = 0.0;
    let out = side + 1 - SSIM_WINDOW;
    for r in 0..out {
        for c in 0..out {
            let (mut ma, mut mb, mut eaa, mut ebb, mut eab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let w = taps[i] * taps[j];
                    let (x, y) = (a[(r + i) * side + c + j], b[(r + i) * side + c + j]);
                    ma += w * x;
                    mb += w * y;
                    eaa += w * x * x;
                    ebb += w * y * y;
                    eab += w * x * y;
                }
            }
            let (va, vb, cov) = (eaa - ma * ma, ebb - mb * mb, eab - ma * mb);
            total += (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
        }
    }
    total / (out * out) as f64
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let side = 24;
    let mut worst: f64 = 0.0;
    let mut self_ok = true;
    for _ in 0..20 {
        let a: Vec<f64> = (0..side * side).map(|_| rng.random()).collect();
        let b: Vec<f64> = a.iter().map(|v| (v + 0.3 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0)).collect();
        let ta = Tensor::from_vec(&[1, 1, side, side], a.clone());
        let tb = Tensor::from_vec(&[1, 1, side, side], b.clone());
        worst = worst.max((ssim(&ta, &tb).map_err(err)? - naive_ssim(&a, &b, side)).abs());
        self_ok &= ssim(&ta, &ta).map_err(err)? == 1.0;
    }
    let psnr = psnr_from_mse(0.01);
    let uniform = cce(&Tensor::from_vec(&[1, 10], vec![0.0f64; 10]), &[4]).map_err(err)?;
    let pass = self_ok && worst <= 1e-5 && psnr == 20.0 && (uniform - 10f64.ln()).abs() <= 1e-6;
    Ok(Verdict::new(
        pass,
        format!("SSIM(x,x)=1: {self_ok}; max |SSIM - naive| = {worst:.2e}; PSNR(0.01) = {psnr}; CCE(uniform) - ln10 = {:.1e}", uniform - 10f64.ln()),
    ))
}

fn differentiability() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.synthetic.shape = ImageShape::new(12, 12, 1);
    cfg.latent_dim = 8;
    cfg.model.cls_hidden = [32, 16];
    let streams = seed_all(5);
    let mut bundle = ModelBundle::<f64>::new(&cfg, &streams).map_err(err)?;
    let data = make_synthetic(6, cfg.synthetic.shape, 10, 0.2, &mut streams.stream(Stream::Data)).map_err(err)?;
    let (images, labels) = data.batch::<f64>(&(0..6).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bob_ch = ChannelRealization::<f64>::rayleigh(6, 5.0, &mut rng).map_err(err)?;
    let eve_ch = ChannelRealization::<f64>::rayleigh(6, 0.0, &mut rng).map_err(err)?;
    // Reconstruction terms also depend on the images as targets, which is not
    // a path through the encoder, so the probe uses the semantic and privacy
    // terms only. Fixed seeds freeze every noise draw between calls.
    let weights = LossWeights { w_sem: 1.0, w_mse: 0.0, w_ssim: 0.0, w_p: 1.0 };
    let objective = |bundle: &mut ModelBundle<f64>, x: &Tensor<f64>| {
        let tap = EveTap { channel: &eve_ch, noise: &mut ChaCha8Rng::seed_from_u64(1), w_p: weights.w_p };
        legit_pass(bundle, x, &labels, &weights, Mode::Eval, &bob_ch, &mut ChaCha8Rng::seed_from_u64(2), &mut ChaCha8Rng::seed_from_u64(3), Some(tap))
    };
    let base = objective(&mut bundle, &images).map_err(err)?;
    let mut worst: f64 = 0.0;
    let mut report = Vec::new();
    for probe in 0..5 {
        let dir: Vec<f64> = (0..images.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let analytic: f64 = base.input_grad.data().iter().zip(&dir).map(|(g, d)| g * d).sum();
        // Flat image regions create max-pool ties, so wider steps cross
        // kinks. In f64 a 1e-7 step keeps round-off far below 1e-2.
        let h = 1e-7;
        let shifted = |s: f64| Tensor::from_vec(images.shape(), images.data().iter().zip(&dir).map(|(x, d)| x + s * d).collect());
        let plus = objective(&mut bundle, &shifted(h)).map_err(err)?.objective;
        let minus = objective(&mut bundle, &shifted(-h)).map_err(err)?.objective;
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max(rel);
        report.push(format!("p{probe}: {analytic:.5e} vs {numeric:.5e}"));
    }
    Ok(Verdict::new(worst < 1e-2, format!("max relative error {worst:.2e} ({})", report.join(", "))))
}

// ---------------------------------------------------------------------------
// 5: MNIST baseline

fn data_root() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data")))
}

/// MNIST baseline configuration used by criterion 5.
fn mnist_config(latent_dim: usize) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetName::Mnist,
        latent_dim,
        subset_size: Some(2000),
        test_subset_size: Some(1000),
        epochs: 15,
        batch_size: 16,
        log_every: 100,
        seed: 1,
        ..Default::default()
    }
}

fn baseline_utility() -> Outcome {
    let root = data_root();
    let mut rows: BTreeMap<usize, Vec<EvalRow>> = BTreeMap::new();
    let mut timings = Vec::new();
    for latent in [32, 256] {
        let cfg = mnist_config(latent);
        let streams = RandomStreams::new(cfg.seed);
        let train = load_split(&cfg, Split::Train, &root, &streams).map_err(err)?;
        let test = load_split(&cfg, Split::Test, &root, &streams).map_err(err)?;
        let start = Instant::now();
        let (mut bundle, _) = train_baseline::<f32>(&cfg, &train, None, &streams).map_err(err)?;
        timings.push(start.elapsed());
        let report = evaluate(&mut bundle, &test, &SNRS, 4, &RowContext::from_config(&cfg), &streams.derive(0xe7a1)).map_err(err)?;
        rows.insert(latent, report.rows);
    }
    let at = |latent: usize, snr: f64| rows[&latent].iter().find(|r| r.bob_snr_db == snr).expect("evaluated SNR");
    let small: Vec<f64> = SNRS.iter().map(|&s| at(32, s).bob_acc).collect();
    let monotone = small.windows(2).all(|w| w[1] >= w[0] - 0.02);
    let acc_ok = at(32, BOB_SNR).bob_acc >= 0.80;
    let latent_acc = at(256, BOB_SNR).bob_acc >= at(32, BOB_SNR).bob_acc - 0.02;
    let latent_psnr = at(256, BOB_SNR).psnr_db >= at(32, BOB_SNR).psnr_db - 0.5;
    let time_ok = timings.iter().all(|t| *t < Duration::from_secs(15 * 60));
    Ok(Verdict::new(
        acc_ok && monotone && latent_acc && latent_psnr && time_ok,
        format!(
            "latent 32 acc by SNR {small:.3?}; @10dB latent 32: acc {:.3} PSNR {:.2}, latent 256: acc {:.3} PSNR {:.2}; train time {:.0?}s",
            at(32, BOB_SNR).bob_acc,
            at(32, BOB_SNR).psnr_db,
            at(256, BOB_SNR).bob_acc,
            at(256, BOB_SNR).psnr_db,
            timings.iter().map(|t| t.as_secs()).collect::<Vec<_>>(),
        ),
    ))
}

// ---------------------------------------------------------------------------
// 6-10: synthetic smoke setup, trained once and shared

/// Synthetic smoke setup: 16x16 images, 640/160 split, latent 32.
fn smoke_config(w_p: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { epochs: 30, eve_epochs: 30, log_every: 100, ..Default::default() };
    cfg.synthetic.shape = ImageShape::new(16, 16, 1);
    cfg.weights.w_p = w_p;
    cfg
}

const BEST_RESPONSE_SALT: u64 = sempriv::commands::BEST_RESPONSE_SALT;
const EVAL_SALT: u64 = sempriv::commands::EVAL_SALT;

#[derive(Default)]
struct Smoke {
    data: Option<(LabeledImageSet, LabeledImageSet)>,
    baseline: Option<ModelBundle<f32>>,
    protected: Option<(ModelBundle<f32>, Duration)>,
}

impl Smoke {
    fn data(&mut self) -> Result<(LabeledImageSet, LabeledImageSet), String> {
        if self.data.is_none() {
            let cfg = smoke_config(0.0);
            let streams = RandomStreams::new(cfg.seed);
            let root = data_root();
            self.data = Some((
                load_split(&cfg, Split::Train, &root, &streams).map_err(err)?,
                load_split(&cfg, Split::Test, &root, &streams).map_err(err)?,
            ));
        }
        Ok(self.data.clone().expect("loaded"))
    }

    /// Utility-only bundle with a best-response eavesdropper.
    fn baseline(&mut self) -> Result<ModelBundle<f32>, String> {
        if self.baseline.is_none() {
            let (train, _) = self.data()?;
            let cfg = smoke_config(0.0);
            let streams = RandomStreams::new(cfg.seed);
            let (bundle, _) = train_baseline::<f32>(&cfg, &train, None, &streams).map_err(err)?;
            let (bundle, _) = train_eve(bundle, &cfg, &train, None, &streams.derive(BEST_RESPONSE_SALT)).map_err(err)?;
            self.baseline = Some(bundle);
        }
        Ok(self.baseline.clone().expect("trained"))
    }

    /// w_P = 10 min-max bundle with a best-response eavesdropper, plus the
    /// wall time of min-max training.
    fn protected(&mut self) -> Result<(ModelBundle<f32>, Duration), String> {
        if self.protected.is_none() {
            let (train, _) = self.data()?;
            let cfg = smoke_config(10.0);
            let streams = RandomStreams::new(cfg.seed);
            let start = Instant::now();
            let (bundle, _) = train_minmax::<f32>(&cfg, &train, None, &streams).map_err(err)?;
            let elapsed = start.elapsed();
            let (bundle, _) = train_eve(bundle, &cfg, &train, None, &streams.derive(BEST_RESPONSE_SALT)).map_err(err)?;
            self.protected = Some((bundle, elapsed));
        }
        Ok(self.protected.clone().expect("trained"))
    }
}

fn eval_streams() -> RandomStreams {
    RandomStreams::new(0).derive(EVAL_SALT)
}

fn smoke_ctx() -> RowContext {
    RowContext::from_config(&smoke_config(0.0))
}

fn leakage_without_protection(smoke: &mut Smoke) -> Outcome {
    let (_, test) = smoke.data()?;
    let mut bundle = smoke.baseline()?;
    let report = gap_sweep(&mut [(0.0, &mut bundle)], &test, &[10.0], BOB_SNR, 8, &smoke_ctx(), &eval_streams()).map_err(err)?;
    let r = &report.rows[0];
    Ok(Verdict::new(
        (r.bob_acc - r.eve_acc).abs() <= 0.10,
        format!("Bob {:.3} vs best-response Eve {:.3} at 10 dB", r.bob_acc, r.eve_acc),
    ))
}

fn minmax_trend(smoke: &mut Smoke) -> Outcome {
    let (_, test) = smoke.data()?;
    let mut base = smoke.baseline()?;
    let (mut prot, elapsed) = smoke.protected()?;
    let report = gap_sweep(&mut [(0.0, &mut base), (10.0, &mut prot)], &test, &SNRS, BOB_SNR, 8, &smoke_ctx(), &eval_streams())
        .map_err(err)?;
    let gap = |w: f64, s: f64| report.rows.iter().find(|r| r.w_p == w && r.eve_snr_db == s).expect("row").gap;
    let bob = |w: f64| report.rows.iter().find(|r| r.w_p == w).expect("row").bob_acc;
    let g10: Vec<f64> = SNRS.iter().map(|&s| gap(10.0, s)).collect();
    let g0: Vec<f64> = SNRS.iter().map(|&s| gap(0.0, s)).collect();
    let checks = [
        gap(10.0, 0.0) >= 0.25,
        SNRS.iter().all(|&s| gap(10.0, s) >= gap(0.0, s)),
        gap(10.0, -5.0) >= gap(10.0, 10.0),
        (bob(10.0) - bob(0.0)).abs() <= 0.05,
        elapsed < Duration::from_secs(20 * 60),
    ];
    Ok(Verdict::new(
        checks.iter().all(|&c| c),
        format!(
            "gap w_P=10 {g10:.3?}, w_P=0 {g0:.3?} (Eve SNR {SNRS:?}); Bob @10dB {:.3} vs baseline {:.3}; min-max training {:.0}s; checks {checks:?}",
            bob(10.0),
            bob(0.0),
            elapsed.as_secs_f64()
        ),
    ))
}

fn fidelity_bound(smoke: &mut Smoke) -> Outcome {
    let (_, test) = smoke.data()?;
    let mut base = smoke.baseline()?;
    let (mut prot, _) = smoke.protected()?;
    let p = fidelity_penalty(&mut prot, &mut base, &test, BOB_SNR, 8, &eval_streams()).map_err(err)?;
    Ok(Verdict::new(
        p.delta_psnr_db <= 3.0,
        format!("delta PSNR {:.2} dB, delta SSIM {:.4} at 10 dB", p.delta_psnr_db, p.delta_ssim),
    ))
}

fn perturbation_ordering(smoke: &mut Smoke) -> Outcome {
    let (_, test) = smoke.data()?;
    let mut bundle = smoke.baseline()?;
    let eps = PerturbationSpec::DEFAULT_EPSILON;
    let methods = [None, Some(PerturbationSpec::fgsm(eps)), Some(PerturbationSpec::pgd(eps, 4)), Some(PerturbationSpec::pgd(eps, 10))];
    let mut gaps = Vec::new();
    let mut bobs = Vec::new();
    for spec in &methods {
        let (report, _) = evaluate_with_jammer(
            &mut bundle,
            &test,
            spec.as_ref(),
            &SNRS,
            BOB_SNR,
            &JammerConfig::default(),
            8,
            &smoke_ctx(),
            &eval_streams(),
        )
        .map_err(err)?;
        gaps.push(report.rows.iter().map(|r| r.gap).collect::<Vec<_>>());
        bobs.push(report.rows.iter().map(|r| r.bob_acc).collect::<Vec<_>>());
    }
    let mut inversions = Vec::new();
    for (s, snr) in SNRS.iter().enumerate() {
        for m in 1..methods.len() {
            let shortfall = gaps[m - 1][s] - gaps[m][s];
            if shortfall > 0.0 {
                inversions.push((*snr, m, shortfall));
            }
        }
    }
    let ordering_ok = inversions.len() <= 1 && inversions.iter().all(|i| i.2 <= 0.02);
    let worst_bob_drop = (1..methods.len())
        .flat_map(|m| (0..SNRS.len()).map(move |s| (m, s)))
        .map(|(m, s)| bobs[0][s] - bobs[m][s])
        .fold(f64::NEG_INFINITY, f64::max);
    let names = ["none", "fgsm", "pgd4", "pgd10"];
    let table: Vec<String> = names.iter().zip(&gaps).map(|(n, g)| format!("{n} {g:.3?}")).collect();
    Ok(Verdict::new(
        ordering_ok && worst_bob_drop <= 0.05,
        format!(
            "gap by Eve SNR {SNRS:?}: {}; inversions {:?}; max Bob drop {worst_bob_drop:.3}",
            table.join("; "),
            inversions.iter().map(|(s, m, d)| format!("{}<{} @{s}dB by {d:.3}", names[*m], names[m - 1])).collect::<Vec<_>>()
        ),
    ))
}

fn legit_state(b: &ModelBundle<f32>) -> Vec<(String, Vec<f32>)> {
    [&b.encoder, &b.recon, &b.bob_cls].iter().flat_map(|m| m.state()).collect()
}

fn structural_invariants(smoke: &mut Smoke) -> Outcome {
    let (train, test) = smoke.data()?;
    let mut bundle = smoke.baseline()?;
    let mut notes = Vec::new();

    // Perturbation budget and sign structure against the trained eavesdropper.
    let idx: Vec<usize> = (0..64).collect();
    let (images, labels) = test.batch::<f32>(&idx);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (_, x) = bundle.encode(&images, Mode::Eval, &mut rng).map_err(err)?;
    let eps = PerturbationSpec::DEFAULT_EPSILON;
    let fgsm = fgsm_perturb(&mut bundle.eve_cls, &x, &labels, &PerturbationSpec::fgsm(eps), 0.0, &mut rng).map_err(err)?;
    let eps32 = eps as f32;
    let fgsm_ok = fgsm.data().iter().all(|&v| v == eps32 || v == -eps32 || v == 0.0);
    let iterates = pgd_iterates(&mut bundle.eve_cls, &x, &labels, &PerturbationSpec::pgd(eps, 10), 0.0, &JammerConfig::default(), &mut rng)
        .map_err(err)?;
    let box_ok = iterates.iter().all(|d| d.max_abs() <= eps32 as f64) && fgsm.max_abs() <= eps32 as f64;
    notes.push(format!("fgsm three-valued {fgsm_ok}, all 10 PGD iterates in box {box_ok}"));

    // Phase isolation: an eavesdropper step leaves the legitimate networks
    // untouched, a legitimate step leaves the eavesdropper untouched.
    let cfg = smoke_config(10.0);
    let streams = RandomStreams::new(99);
    let (batch_images, batch_labels) = train.batch::<f32>(&(0..32).collect::<Vec<_>>());
    let before_legit = legit_state(&bundle);
    let before_eve = bundle.eve_cls.state();
    let mut eve_opt = Adam::new(cfg.lr_eve);
    let mut eve_streams = EveStreams::new(&streams);
    eve_step(&mut bundle, &mut eve_opt, &batch_images, &batch_labels, cfg.eve_train_snr_range_db, &mut eve_streams).map_err(err)?;
    let eve_phase_ok = legit_state(&bundle) == before_legit && bundle.eve_cls.state() != before_eve;
    let before_legit = legit_state(&bundle);
    let before_eve = bundle.eve_cls.state();
    let mut opt = Adam::new(cfg.learning_rate);
    let mut legit_streams = LegitStreams::new(&streams);
    legit_step(&mut bundle, Some(&mut opt), &batch_images, &batch_labels, &cfg, &mut legit_streams, Some(&mut eve_streams))
        .map_err(err)?;
    let legit_phase_ok = bundle.eve_cls.state() == before_eve && legit_state(&bundle) != before_legit;
    notes.push(format!("eve phase isolates legit nets {eve_phase_ok}, legit phase isolates eve {legit_phase_ok}"));

    // w_P = 0 min-max against the baseline under shared seeds.
    let mut short = smoke_config(0.0);
    short.epochs = 2;
    let sub = train.subset(&(0..128).collect::<Vec<_>>());
    let seeds = RandomStreams::new(7);
    let (a, _) = train_baseline::<f32>(&short, &sub, None, &seeds).map_err(err)?;
    let (b, _) = train_minmax::<f32>(&short, &sub, None, &seeds).map_err(err)?;
    let trajectory_ok = legit_state(&a) == legit_state(&b);
    notes.push(format!("w_P=0 min-max equals baseline bitwise {trajectory_ok}"));

    Ok(Verdict::new(fgsm_ok && box_ok && eve_phase_ok && legit_phase_ok && trajectory_ok, notes.join("; ")))
}
