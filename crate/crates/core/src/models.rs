//! The four networks: image encoder, reconstruction decoder and the two
//! semantic classifiers (legitimate receiver and eavesdropper).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::RngCore;

use crate::channel::{power_normalize, LatentSignal};
use crate::config::{ExperimentConfig, ModelConfig};
use crate::data::ImageShape;
use crate::nn::{BatchNorm, Conv2d, ConvTranspose2d, Dropout, Layer, Linear, MaxPool2, Mode, Relu, Reshape, Sequential, Sigmoid};
use crate::rng::{RandomStreams, Stream};
use crate::tensor::{Real, Tensor};
use crate::{Error, Result};

/// Width of the dense layer in the encoder head and the decoder stem.
pub const DENSE_WIDTH: usize = 1024;
/// Channel count of the decoder's quarter-resolution feature map.
pub const DECODER_CHANNELS: usize = 256;

fn check_shape(shape: ImageShape, latent_dim: usize) -> Result<()> {
    if !shape.height.is_multiple_of(4) || !shape.width.is_multiple_of(4) || shape.height == 0 || shape.width == 0 {
        return Err(Error::Shape(format!("image {shape} needs height and width divisible by 4")));
    }
    if shape.channels == 0 {
        return Err(Error::Shape("images need at least one channel".into()));
    }
    if latent_dim == 0 {
        return Err(Error::Shape("latent dimension must be at least 1".into()));
    }
    Ok(())
}

fn conv_block<T: Real>(layers: &mut Vec<Layer<T>>, input: usize, output: usize, rng: &mut dyn RngCore) {
    layers.push(Layer::Conv(Conv2d::new(input, output, rng)));
    layers.push(Layer::BatchNorm(BatchNorm::new(output)));
    layers.push(Layer::Relu(Relu::default()));
}

/// Image `[B, C, H, W]` to unnormalized latent `[B, 2 * latent_dim]`
/// (in-phase half, then quadrature half).
pub fn build_encoder<T: Real>(
    shape: ImageShape,
    latent_dim: usize,
    dropout: f64,
    rng: &mut dyn RngCore,
) -> Result<Sequential<T>> {
    check_shape(shape, latent_dim)?;
    let mut layers = Vec::new();
    conv_block(&mut layers, shape.channels, 64, rng);
    conv_block(&mut layers, 64, 64, rng);
    layers.push(Layer::MaxPool(MaxPool2::default()));
    layers.push(Layer::Dropout(Dropout::new(dropout)));
    conv_block(&mut layers, 64, 128, rng);
    conv_block(&mut layers, 128, 128, rng);
    layers.push(Layer::MaxPool(MaxPool2::default()));
    layers.push(Layer::Dropout(Dropout::new(dropout)));
    let flat = 128 * (shape.height / 4) * (shape.width / 4);
    layers.push(Layer::Reshape(Reshape::new(&[flat])));
    layers.push(Layer::Linear(Linear::new(flat, DENSE_WIDTH, rng)));
    layers.push(Layer::Relu(Relu::default()));
    layers.push(Layer::Linear(Linear::new(DENSE_WIDTH, 2 * latent_dim, rng)));
    Ok(Sequential::new(layers))
}

/// Received latent `[B, 2 * latent_dim]` to an image `[B, C, H, W]` in `(0, 1)`.
pub fn build_recon_decoder<T: Real>(latent_dim: usize, shape: ImageShape, rng: &mut dyn RngCore) -> Result<Sequential<T>> {
    check_shape(shape, latent_dim)?;
    let (h, w) = (shape.height / 4, shape.width / 4);
    let mut layers = vec![
        Layer::Linear(Linear::new(2 * latent_dim, DENSE_WIDTH, rng)),
        Layer::Relu(Relu::default()),
        Layer::Linear(Linear::new(DENSE_WIDTH, DECODER_CHANNELS * h * w, rng)),
        Layer::Reshape(Reshape::new(&[DECODER_CHANNELS, h, w])),
    ];
    for (input, output) in [(DECODER_CHANNELS, 128), (128, 64)] {
        layers.push(Layer::ConvTranspose(ConvTranspose2d::new(input, output, rng)));
        layers.push(Layer::BatchNorm(BatchNorm::new(output)));
        layers.push(Layer::Relu(Relu::default()));
    }
    layers.push(Layer::Conv(Conv2d::new(64, shape.channels, rng)));
    layers.push(Layer::Sigmoid(Sigmoid::default()));
    Ok(Sequential::new(layers))
}

/// Received latent `[B, 2 * latent_dim]` to class logits `[B, num_classes]`.
pub fn build_semantic_classifier<T: Real>(
    latent_dim: usize,
    num_classes: usize,
    hidden: [usize; 2],
    dropout: f64,
    rng: &mut dyn RngCore,
) -> Sequential<T> {
    Sequential::new(vec![
        Layer::Linear(Linear::new(2 * latent_dim, hidden[0], rng)),
        Layer::Relu(Relu::default()),
        Layer::Dropout(Dropout::new(dropout)),
        Layer::Linear(Linear::new(hidden[0], hidden[1], rng)),
        Layer::Relu(Relu::default()),
        Layer::Dropout(Dropout::new(dropout)),
        Layer::Linear(Linear::new(hidden[1], num_classes, rng)),
    ])
}

/// Which procedure produced a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    Baseline,
    Minmax,
    EveOnly,
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingMode::Baseline => "baseline",
            TrainingMode::Minmax => "minmax",
            TrainingMode::EveOnly => "eve_only",
        })
    }
}

impl FromStr for TrainingMode {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(TrainingMode::Baseline),
            "minmax" => Ok(TrainingMode::Minmax),
            "eve_only" => Ok(TrainingMode::EveOnly),
            other => Err(format!("unknown training mode `{other}`")),
        }
    }
}

/// Architecture description needed to rebuild a bundle before loading weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub shape: ImageShape,
    pub latent_dim: usize,
    pub num_classes: usize,
    pub model: ModelConfig,
}

impl Architecture {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self { shape: cfg.image_shape(), latent_dim: cfg.latent_dim, num_classes: cfg.num_classes(), model: cfg.model }
    }
}

/// Names of the four modules in a bundle, in storage order.
pub const MODULE_NAMES: [&str; 4] = ["encoder", "recon", "bob_cls", "eve_cls"];

/// All four networks plus where they came from.
#[derive(Debug, Clone)]
pub struct ModelBundle<T = f32> {
    pub encoder: Sequential<T>,
    pub recon: Sequential<T>,
    pub bob_cls: Sequential<T>,
    pub eve_cls: Sequential<T>,
    pub arch: Architecture,
    pub config_hash: String,
    /// Config hash with the privacy weight cleared; equal for runs that
    /// differ only in that weight.
    pub utility_hash: String,
    pub training_mode: TrainingMode,
    /// Whether the eavesdropper classifier has been trained.
    pub eve_trained: bool,
}

impl<T: Real> ModelBundle<T> {
    /// Freshly initialized networks. Legitimate weights come from the
    /// `Init` stream and eavesdropper weights from `EveInit`.
    pub fn new(cfg: &ExperimentConfig, streams: &RandomStreams) -> Result<Self> {
        let arch = Architecture::from_config(cfg);
        let mut bundle = Self::with_architecture(arch, streams)?;
        bundle.config_hash = cfg.hash();
        bundle.utility_hash = cfg.utility_hash();
        Ok(bundle)
    }

    pub fn with_architecture(arch: Architecture, streams: &RandomStreams) -> Result<Self> {
        let mut init = streams.stream(Stream::Init);
        let mut eve_init = streams.stream(Stream::EveInit);
        let Architecture { shape, latent_dim, num_classes, model } = arch;
        Ok(Self {
            encoder: build_encoder(shape, latent_dim, model.conv_dropout, &mut init)?,
            recon: build_recon_decoder(latent_dim, shape, &mut init)?,
            bob_cls: build_semantic_classifier(latent_dim, num_classes, model.cls_hidden, model.cls_dropout, &mut init),
            eve_cls: build_semantic_classifier(latent_dim, num_classes, model.cls_hidden, model.cls_dropout, &mut eve_init),
            arch,
            config_hash: String::new(),
            utility_hash: String::new(),
            training_mode: TrainingMode::Baseline,
            eve_trained: false,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn modules(&self) -> [(&'static str, &Sequential<T>); 4] {
        [
            (MODULE_NAMES[0], &self.encoder),
            (MODULE_NAMES[1], &self.recon),
            (MODULE_NAMES[2], &self.bob_cls),
            (MODULE_NAMES[3], &self.eve_cls),
        ]
    }

    pub fn module_mut(&mut self, name: &str) -> Option<&mut Sequential<T>> {
        match name {
            "encoder" => Some(&mut self.encoder),
            "recon" => Some(&mut self.recon),
            "bob_cls" => Some(&mut self.bob_cls),
            "eve_cls" => Some(&mut self.eve_cls),
            _ => None,
        }
    }

    /// Encodes and power-normalizes a batch of images. Returns the raw
    /// encoder output (needed for the normalization backward pass) and the
    /// transmitted signal.
    pub fn encode(
        &mut self,
        images: &Tensor<T>,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<(LatentSignal<T>, LatentSignal<T>)> {
        let raw = LatentSignal::from_tensor(self.encoder.forward(images.clone(), mode, rng))?;
        let x = power_normalize(&raw)?;
        Ok((raw, x))
    }
}
