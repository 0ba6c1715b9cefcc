//! Experiment configuration: defaults, validation, a flat `key=value` text
//! form and a content hash.
//!
//! The text form holds one `key=value` per line (spaces around `=` and `#`
//! comments are accepted, and several pairs may share a line). Lists are
//! comma separated. Jammer settings live under the `perturb.` and `jammer.`
//! prefixes. [`ExperimentConfig::to_kv_string`] writes every key in a fixed
//! order, so parsing it back yields an identical config.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::str::FromStr;

use sha2::{Digest, Sha256};

use crate::data::{DatasetName, ImageShape};
use crate::metrics::LossWeights;
use crate::perturbation::{JammerConfig, PerturbMethod, PerturbationSpec};
use crate::{Error, Result};

/// First-order optimizer used by every training loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
}

/// Layer sizes and dropout rates of the networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub conv_dropout: f64,
    pub cls_dropout: f64,
    pub cls_hidden: [usize; 2],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { conv_dropout: 0.25, cls_dropout: 0.5, cls_hidden: [512, 256] }
    }
}

/// Size and geometry of the procedural dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub shape: ImageShape,
    pub classes: usize,
    pub train: usize,
    pub test: usize,
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { shape: ImageShape::MNIST, classes: 10, train: 640, test: 160, noise: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetName,
    pub latent_dim: usize,
    /// Objective weights, including the privacy weight `w_p`.
    pub weights: LossWeights,
    pub train_snr_range_db: (f64, f64),
    pub eve_train_snr_range_db: (f64, f64),
    pub eval_snr_list_db: Vec<f64>,
    /// Fixed legitimate-link SNR used when sweeping the eavesdropper SNR.
    pub bob_eval_snr_db: f64,
    pub epochs: usize,
    /// Epoch budget for best-response eavesdropper training.
    pub eve_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub lr_eve: f64,
    pub eve_steps_per_round: usize,
    pub legit_steps_per_round: usize,
    pub log_every: usize,
    pub perturbation: Option<PerturbationSpec>,
    pub jammer: JammerConfig,
    pub n_real: usize,
    pub subset_size: Option<usize>,
    pub test_subset_size: Option<usize>,
    pub model: ModelConfig,
    pub synthetic: SyntheticConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetName::Synthetic,
            latent_dim: 32,
            weights: LossWeights::default(),
            train_snr_range_db: (-5.0, 15.0),
            eve_train_snr_range_db: (-5.0, 10.0),
            eval_snr_list_db: vec![-5.0, 0.0, 5.0, 10.0],
            bob_eval_snr_db: 10.0,
            epochs: 30,
            eve_epochs: 30,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            lr_eve: 1e-3,
            eve_steps_per_round: 1,
            legit_steps_per_round: 1,
            log_every: 1,
            perturbation: None,
            jammer: JammerConfig::default(),
            n_real: 4,
            subset_size: None,
            test_subset_size: None,
            model: ModelConfig::default(),
            synthetic: SyntheticConfig::default(),
        }
    }
}

/// Every recognised key, in canonical order.
pub const KEYS: &[&str] = &[
    "dataset",
    "latent_dim",
    "w_sem",
    "w_mse",
    "w_ssim",
    "w_p",
    "train_snr_range_db",
    "eve_train_snr_range_db",
    "eval_snr_list_db",
    "bob_eval_snr_db",
    "epochs",
    "eve_epochs",
    "batch_size",
    "seed",
    "optimizer",
    "lr",
    "lr_eve",
    "k_eve",
    "k_legit",
    "log_every",
    "n_real",
    "subset_size",
    "test_subset_size",
    "conv_dropout",
    "cls_dropout",
    "cls_hidden",
    "synthetic.shape",
    "synthetic.classes",
    "synthetic.train",
    "synthetic.test",
    "synthetic.noise",
    "jammer.fading",
    "jammer.bob_gain",
    "jammer.eve_gain",
    "perturb.method",
    "perturb.epsilon",
    "perturb.steps",
    "perturb.alpha",
    "perturb.m",
    "perturb.random_start",
];

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), message: message.into() }
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value.parse().map_err(|_| config_err(key, format!("cannot parse `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn parse_range(key: &str, value: &str) -> Result<(f64, f64)> {
    match parse_list(key, value)?[..] {
        [lo, hi] => Ok((lo, hi)),
        _ => Err(config_err(key, format!("expected `low,high`, got `{value}`"))),
    }
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>> {
    match value {
        "none" | "" => Ok(None),
        v => parse_value(key, v).map(Some),
    }
}

fn join(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    parts.join(",")
}

fn optional(value: Option<usize>) -> String {
    value.map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// Splits a document into `(key, value)` pairs in order of appearance.
pub fn tokenize(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        let mut pending = String::new();
        for token in line.split_whitespace() {
            if !pending.is_empty() && !pending.contains('=') && !token.starts_with('=') {
                return Err(config_err(&pending, "expected `key=value`"));
            }
            pending.push_str(token);
            if let Some(eq) = pending.find('=') {
                if eq == 0 {
                    return Err(config_err(&pending, "missing key before `=`"));
                }
                if eq + 1 < pending.len() {
                    pairs.push((pending[..eq].to_string(), pending[eq + 1..].to_string()));
                    pending.clear();
                }
            }
        }
        if !pending.is_empty() {
            let key = pending.trim_end_matches('=');
            return Err(config_err(key, "missing value"));
        }
    }
    Ok(pairs)
}

#[derive(Default)]
struct PerturbDraft {
    method: Option<PerturbMethod>,
    disabled: bool,
    epsilon: Option<f64>,
    steps: Option<usize>,
    alpha: Option<f64>,
    m: Option<usize>,
    random_start: Option<bool>,
}

impl ExperimentConfig {
    /// Parses a document, filling unspecified keys with defaults, then validates.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&tokenize(text)?)
    }

    /// Builds a config from `(key, value)` pairs; later pairs override
    /// earlier ones. Unknown keys are rejected.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        let mut latest: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in pairs {
            let key = k.as_ref();
            if !KEYS.contains(&key) {
                return Err(config_err(key, "unknown key"));
            }
            latest.insert(key, v.as_ref().trim());
        }
        let mut cfg = ExperimentConfig::default();
        let mut draft = PerturbDraft::default();
        for (key, value) in latest {
            cfg.set(key, value, &mut draft)?;
        }
        cfg.perturbation = draft.finish(cfg.perturbation.take())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, draft: &mut PerturbDraft) -> Result<()> {
        match key {
            "dataset" => self.dataset = value.parse().map_err(|e: String| config_err(key, e))?,
            "latent_dim" => self.latent_dim = parse_value(key, value)?,
            "w_sem" => self.weights.w_sem = parse_value(key, value)?,
            "w_mse" => self.weights.w_mse = parse_value(key, value)?,
            "w_ssim" => self.weights.w_ssim = parse_value(key, value)?,
            "w_p" => self.weights.w_p = parse_value(key, value)?,
            "train_snr_range_db" => self.train_snr_range_db = parse_range(key, value)?,
            "eve_train_snr_range_db" => self.eve_train_snr_range_db = parse_range(key, value)?,
            "eval_snr_list_db" => self.eval_snr_list_db = parse_list(key, value)?,
            "bob_eval_snr_db" => self.bob_eval_snr_db = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "eve_epochs" => self.eve_epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "optimizer" => {
                self.optimizer = match value {
                    "adam" => Optimizer::Adam,
                    _ => return Err(config_err(key, format!("unknown optimizer `{value}` (expected adam)"))),
                }
            }
            "lr" => self.learning_rate = parse_value(key, value)?,
            "lr_eve" => self.lr_eve = parse_value(key, value)?,
            "k_eve" => self.eve_steps_per_round = parse_value(key, value)?,
            "k_legit" => self.legit_steps_per_round = parse_value(key, value)?,
            "log_every" => self.log_every = parse_value(key, value)?,
            "n_real" => self.n_real = parse_value(key, value)?,
            "subset_size" => self.subset_size = parse_optional(key, value)?,
            "test_subset_size" => self.test_subset_size = parse_optional(key, value)?,
            "conv_dropout" => self.model.conv_dropout = parse_value(key, value)?,
            "cls_dropout" => self.model.cls_dropout = parse_value(key, value)?,
            "cls_hidden" => {
                let widths: Vec<usize> =
                    value.split(',').map(|v| parse_value(key, v.trim())).collect::<Result<_>>()?;
                self.model.cls_hidden = match widths[..] {
                    [a, b] => [a, b],
                    _ => return Err(config_err(key, "expected two hidden widths")),
                };
            }
            "synthetic.shape" => {
                self.synthetic.shape = value.parse().map_err(|e: String| config_err(key, e))?
            }
            "synthetic.classes" => self.synthetic.classes = parse_value(key, value)?,
            "synthetic.train" => self.synthetic.train = parse_value(key, value)?,
            "synthetic.test" => self.synthetic.test = parse_value(key, value)?,
            "synthetic.noise" => self.synthetic.noise = parse_value(key, value)?,
            "jammer.fading" => {
                self.jammer.fading = value.parse().map_err(|e: String| config_err(key, e))?
            }
            "jammer.bob_gain" => self.jammer.bob_gain = parse_value(key, value)?,
            "jammer.eve_gain" => self.jammer.eve_gain = parse_value(key, value)?,
            "perturb.method" => match value {
                "none" => draft.disabled = true,
                v => draft.method = Some(v.parse().map_err(|e: String| config_err(key, e))?),
            },
            "perturb.epsilon" => draft.epsilon = Some(parse_value(key, value)?),
            "perturb.steps" => draft.steps = Some(parse_value(key, value)?),
            "perturb.alpha" => draft.alpha = Some(parse_value(key, value)?),
            "perturb.m" => draft.m = Some(parse_value(key, value)?),
            "perturb.random_start" => draft.random_start = Some(parse_value(key, value)?),
            _ => return Err(config_err(key, "unknown key")),
        }
        Ok(())
    }

    /// Canonical text form: every key, one per line, in [`KEYS`] order.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.entries() {
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }

    /// `(key, value)` pairs of the canonical form.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let w = &self.weights;
        let mut e = vec![
            ("dataset", self.dataset.to_string()),
            ("latent_dim", self.latent_dim.to_string()),
            ("w_sem", w.w_sem.to_string()),
            ("w_mse", w.w_mse.to_string()),
            ("w_ssim", w.w_ssim.to_string()),
            ("w_p", w.w_p.to_string()),
            ("train_snr_range_db", join(&[self.train_snr_range_db.0, self.train_snr_range_db.1])),
            ("eve_train_snr_range_db", join(&[self.eve_train_snr_range_db.0, self.eve_train_snr_range_db.1])),
            ("eval_snr_list_db", join(&self.eval_snr_list_db)),
            ("bob_eval_snr_db", self.bob_eval_snr_db.to_string()),
            ("epochs", self.epochs.to_string()),
            ("eve_epochs", self.eve_epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("optimizer", "adam".to_string()),
            ("lr", self.learning_rate.to_string()),
            ("lr_eve", self.lr_eve.to_string()),
            ("k_eve", self.eve_steps_per_round.to_string()),
            ("k_legit", self.legit_steps_per_round.to_string()),
            ("log_every", self.log_every.to_string()),
            ("n_real", self.n_real.to_string()),
            ("subset_size", optional(self.subset_size)),
            ("test_subset_size", optional(self.test_subset_size)),
            ("conv_dropout", self.model.conv_dropout.to_string()),
            ("cls_dropout", self.model.cls_dropout.to_string()),
            ("cls_hidden", format!("{},{}", self.model.cls_hidden[0], self.model.cls_hidden[1])),
            ("synthetic.shape", self.synthetic.shape.to_string()),
            ("synthetic.classes", self.synthetic.classes.to_string()),
            ("synthetic.train", self.synthetic.train.to_string()),
            ("synthetic.test", self.synthetic.test.to_string()),
            ("synthetic.noise", self.synthetic.noise.to_string()),
            ("jammer.fading", self.jammer.fading.to_string()),
            ("jammer.bob_gain", self.jammer.bob_gain.to_string()),
            ("jammer.eve_gain", self.jammer.eve_gain.to_string()),
        ];
        match &self.perturbation {
            None => e.push(("perturb.method", "none".to_string())),
            Some(p) => {
                e.push(("perturb.method", p.method.to_string()));
                e.push(("perturb.epsilon", p.epsilon.to_string()));
                e.push(("perturb.steps", p.steps.to_string()));
                e.push(("perturb.alpha", p.step_size.to_string()));
                e.push(("perturb.m", p.grad_realizations.to_string()));
                e.push(("perturb.random_start", p.random_start.to_string()));
            }
        }
        e
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_kv_string().as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest.iter() {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }

    /// Hash of the config with the privacy weight cleared: two runs that
    /// differ only in `w_p` share it.
    pub fn utility_hash(&self) -> String {
        let mut base = self.clone();
        base.weights.w_p = 0.0;
        base.hash()
    }

    /// Image geometry implied by the dataset choice.
    pub fn image_shape(&self) -> ImageShape {
        match self.dataset {
            DatasetName::Mnist => ImageShape::MNIST,
            DatasetName::Cifar10 => ImageShape::CIFAR10,
            DatasetName::Synthetic => self.synthetic.shape,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self.dataset {
            DatasetName::Synthetic => self.synthetic.classes,
            _ => 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, message: String| Err(config_err(key, message).into_validation());
        if self.latent_dim < 1 {
            return fail("latent_dim", "must be at least 1".into());
        }
        self.weights.validate()?;
        for (key, (lo, hi)) in
            [("train_snr_range_db", self.train_snr_range_db), ("eve_train_snr_range_db", self.eve_train_snr_range_db)]
        {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return fail(key, format!("need finite low <= high, got [{lo}, {hi}]"));
            }
        }
        if self.eval_snr_list_db.is_empty() || self.eval_snr_list_db.iter().any(|s| !s.is_finite()) {
            return fail("eval_snr_list_db", "need a non-empty list of finite SNRs".into());
        }
        if !self.bob_eval_snr_db.is_finite() {
            return fail("bob_eval_snr_db", "must be finite".into());
        }
        for (key, v) in [
            ("epochs", self.epochs),
            ("eve_epochs", self.eve_epochs),
            ("batch_size", self.batch_size),
            ("k_eve", self.eve_steps_per_round),
            ("k_legit", self.legit_steps_per_round),
            ("log_every", self.log_every),
            ("n_real", self.n_real),
            ("cls_hidden", self.model.cls_hidden[0].min(self.model.cls_hidden[1])),
            ("synthetic.train", self.synthetic.train),
            ("synthetic.test", self.synthetic.test),
        ] {
            if v < 1 {
                return fail(key, "must be at least 1".into());
            }
        }
        for (key, v) in [("subset_size", self.subset_size), ("test_subset_size", self.test_subset_size)] {
            if v == Some(0) {
                return fail(key, "must be at least 1 when given".into());
            }
        }
        for (key, lr) in [("lr", self.learning_rate), ("lr_eve", self.lr_eve)] {
            if !(lr.is_finite() && lr > 0.0) {
                return fail(key, format!("learning rate must be positive, got {lr}"));
            }
        }
        for (key, rate) in [("conv_dropout", self.model.conv_dropout), ("cls_dropout", self.model.cls_dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return fail(key, format!("dropout rate {rate} outside [0, 1)"));
            }
        }
        let shape = self.synthetic.shape;
        if !shape.height.is_multiple_of(4) || !shape.width.is_multiple_of(4) {
            return fail("synthetic.shape", format!("{shape} needs height and width divisible by 4"));
        }
        if !(2..=10).contains(&self.synthetic.classes) {
            return fail("synthetic.classes", "must be between 2 and 10".into());
        }
        if !(0.0..=1.0).contains(&self.synthetic.noise) {
            return fail("synthetic.noise", "must lie in [0, 1]".into());
        }
        self.jammer.validate()?;
        if let Some(p) = &self.perturbation {
            p.validate()?;
        }
        Ok(())
    }
}

impl Error {
    fn into_validation(self) -> Error {
        match self {
            Error::Config { key, message } => Error::Validation(format!("{key}: {message}")),
            other => other,
        }
    }
}

impl PerturbDraft {
    fn finish(self, current: Option<PerturbationSpec>) -> Result<Option<PerturbationSpec>> {
        let touched = self.epsilon.is_some()
            || self.steps.is_some()
            || self.alpha.is_some()
            || self.m.is_some()
            || self.random_start.is_some();
        if self.disabled && self.method.is_none() {
            return Ok(None);
        }
        let Some(method) = self.method.or(current.map(|p| p.method)) else {
            if touched {
                return Err(config_err("perturb.method", "perturbation keys given without a method"));
            }
            return Ok(None);
        };
        let epsilon = self.epsilon.unwrap_or(PerturbationSpec::DEFAULT_EPSILON);
        let mut spec = match method {
            PerturbMethod::Fgsm => PerturbationSpec::fgsm(epsilon),
            PerturbMethod::Pgd => PerturbationSpec::pgd(epsilon, self.steps.unwrap_or(10)),
        };
        if let Some(steps) = self.steps {
            spec.steps = steps;
        }
        if let Some(alpha) = self.alpha {
            spec.step_size = alpha;
        }
        if let Some(m) = self.m {
            spec.grad_realizations = m;
        }
        if let Some(rs) = self.random_start {
            spec.random_start = rs;
        }
        Ok(Some(spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_default_weights() {
        let cfg = ExperimentConfig::parse("dataset=mnist latent_dim=32").unwrap();
        assert_eq!(cfg.dataset, DatasetName::Mnist);
        assert_eq!(cfg.latent_dim, 32);
        assert_eq!((cfg.weights.w_sem, cfg.weights.w_mse, cfg.weights.w_ssim, cfg.weights.w_p), (1.0, 5.0, 1.0, 0.0));
        assert_eq!(cfg.train_snr_range_db, (-5.0, 15.0));
        assert_eq!(cfg.eve_train_snr_range_db, (-5.0, 10.0));
        assert_eq!(cfg.eval_snr_list_db, vec![-5.0, 0.0, 5.0, 10.0]);
    }

    #[test]
    fn zero_latent_dim_is_a_validation_error() {
        assert!(matches!(ExperimentConfig::parse("latent_dim=0"), Err(Error::Validation(_))));
    }

    #[test]
    fn parse_errors_name_the_key() {
        match ExperimentConfig::parse("epochs=ten") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "epochs"),
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::parse("colour=blue") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "colour"),
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::parse("seed") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "seed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tokenizer_accepts_spacing_and_comments() {
        let pairs = tokenize("a=1 b = 2\n# note\nc= 3  d =4 # trailing\n").unwrap();
        let flat: Vec<(&str, &str)> = pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        assert_eq!(flat, vec![("a", "1"), ("b", "2"), ("c", "3"), ("d", "4")]);
        assert!(tokenize("a b=2").is_err());
    }

    #[test]
    fn canonical_form_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.weights.w_p = 10.0;
        cfg.learning_rate = 3e-4;
        cfg.subset_size = Some(2000);
        cfg.eval_snr_list_db = vec![-5.0, 0.5, 12.25];
        cfg.perturbation = Some(PerturbationSpec::pgd(0.05, 7));
        let text = cfg.to_kv_string();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_kv_string(), text);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn later_pairs_override_earlier_ones() {
        let cfg = ExperimentConfig::parse("seed=1\nseed=7").unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn perturbation_keys_are_order_independent() {
        let a = ExperimentConfig::parse("perturb.steps=4 perturb.method=pgd perturb.epsilon=0.2").unwrap();
        let p = a.perturbation.unwrap();
        assert_eq!(p.method, PerturbMethod::Pgd);
        assert_eq!(p.steps, 4);
        assert_eq!(p.step_size, 0.05);
        let f = ExperimentConfig::parse("perturb.method=fgsm").unwrap().perturbation.unwrap();
        assert_eq!((f.steps, f.step_size, f.epsilon), (1, 0.1, 0.1));
        assert!(ExperimentConfig::parse("perturb.method=fgsm perturb.steps=3").is_err());
        assert!(ExperimentConfig::parse("perturb.epsilon=0.1").is_err());
        assert!(ExperimentConfig::parse("perturb.method=none").unwrap().perturbation.is_none());
    }

    #[test]
    fn validation_rejects_out_of_domain_fields() {
        for bad in [
            "w_mse=-1",
            "w_p=-0.5",
            "train_snr_range_db=10,0",
            "batch_size=0",
            "epochs=0",
            "n_real=0",
            "eval_snr_list_db=",
            "lr=0",
            "conv_dropout=1",
            "subset_size=0",
            "synthetic.shape=30x30x1",
            "synthetic.classes=11",
            "perturb.method=pgd perturb.epsilon=0",
            "perturb.method=pgd perturb.m=0",
        ] {
            assert!(ExperimentConfig::parse(bad).is_err(), "{bad} accepted");
        }
    }

    #[test]
    fn utility_hash_ignores_privacy_weight_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.weights.w_p = 10.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.utility_hash(), b.utility_hash());
        b.latent_dim = 64;
        assert_ne!(a.utility_hash(), b.utility_hash());
        assert_eq!(a.hash().len(), 64);
    }
}
