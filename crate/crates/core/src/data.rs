//! Labeled image sets, class-balanced subsets and a procedural dataset.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::rng::{RandomStreams, Stream};
use crate::tensor::{Real, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetName {
    Mnist,
    Cifar10,
    Synthetic,
}

impl DatasetName {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::Cifar10 => "cifar10",
            DatasetName::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "mnist" => Ok(DatasetName::Mnist),
            "cifar10" => Ok(DatasetName::Cifar10),
            "synthetic" => Ok(DatasetName::Synthetic),
            other => Err(format!("unknown dataset `{other}` (expected mnist, cifar10 or synthetic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Height, width, channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub const MNIST: ImageShape = ImageShape { height: 28, width: 28, channels: 1 };
    pub const CIFAR10: ImageShape = ImageShape { height: 32, width: 32, channels: 3 };

    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width * self.channels
    }
}

impl fmt::Display for ImageShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

impl FromStr for ImageShape {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('x').collect();
        let dims: Vec<usize> = parts.iter().filter_map(|p| p.trim().parse().ok()).collect();
        match dims[..] {
            [h, w, c] if parts.len() == 3 && h > 0 && w > 0 && c > 0 => Ok(ImageShape::new(h, w, c)),
            _ => Err(format!("expected HxWxC with positive sizes, got `{s}`")),
        }
    }
}

/// Images stored `[N, H, W, C]` with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    images: Vec<f32>,
    labels: Vec<usize>,
    num_classes: usize,
    shape: ImageShape,
}

impl LabeledImageSet {
    pub fn new(images: Vec<f32>, labels: Vec<usize>, num_classes: usize, shape: ImageShape) -> Result<Self> {
        if images.len() != labels.len() * shape.pixels() {
            return Err(Error::Data(format!(
                "{} pixel values for {} images of shape {shape}",
                images.len(),
                labels.len()
            )));
        }
        if let Some(p) = images.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Data(format!("pixel value {p} outside [0, 1]")));
        }
        if let Some(l) = labels.iter().find(|l| **l >= num_classes) {
            return Err(Error::Data(format!("label {l} out of range for {num_classes} classes")));
        }
        Ok(Self { images, labels, num_classes, shape })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn images(&self) -> &[f32] {
        &self.images
    }

    /// Pixels of image `i` in HWC order.
    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.shape.pixels();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        self.labels.iter().for_each(|l| counts[*l] += 1);
        counts
    }

    /// Gathers `indices` into an `[B, C, H, W]` tensor plus labels.
    pub fn batch<T: Real>(&self, indices: &[usize]) -> (Tensor<T>, Vec<usize>) {
        let ImageShape { height: h, width: w, channels: c } = self.shape;
        let mut out = Tensor::zeros(&[indices.len(), c, h, w]);
        for (b, &i) in indices.iter().enumerate() {
            let src = self.image(i);
            let dst = out.row_mut(b);
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..c {
                        dst[(ch * h + y) * w + x] = T::lit(src[(y * w + x) * c + ch] as f64);
                    }
                }
            }
        }
        (out, indices.iter().map(|i| self.labels[*i]).collect())
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledImageSet {
        let mut images = Vec::with_capacity(indices.len() * self.shape.pixels());
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        LabeledImageSet {
            images,
            labels: indices.iter().map(|i| self.labels[*i]).collect(),
            num_classes: self.num_classes,
            shape: self.shape,
        }
    }

    /// Random subset of `size` images whose per-class counts differ by at most one.
    pub fn balanced_subset(&self, size: usize, rng: &mut dyn RngCore) -> Result<LabeledImageSet> {
        if size > self.len() {
            return Err(Error::Data(format!("subset of {size} requested from {} images", self.len())));
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.num_classes];
        for (i, l) in self.labels.iter().enumerate() {
            by_class[*l].push(i);
        }
        let present: Vec<usize> = (0..self.num_classes).filter(|c| !by_class[*c].is_empty()).collect();
        if present.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        let base = size / present.len();
        let mut extra = size % present.len();
        let mut order = present.clone();
        order.shuffle(rng);
        let mut chosen = Vec::with_capacity(size);
        for c in order {
            let want = base + usize::from(extra > 0);
            extra = extra.saturating_sub(1);
            let pool = &mut by_class[c];
            if pool.len() < want {
                return Err(Error::Data(format!(
                    "class {c} has {} images, {want} needed for a balanced subset of {size}",
                    pool.len()
                )));
            }
            pool.shuffle(rng);
            chosen.extend_from_slice(&pool[..want]);
        }
        chosen.sort_unstable();
        Ok(self.subset(&chosen))
    }
}

/// Visiting order of `n` samples for one epoch; a pure function of the
/// stream family, the stream and the epoch index.
pub fn epoch_order(streams: &RandomStreams, stream: Stream, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = streams.derive(epoch as u64).stream(stream);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Noise-free rendering of the template for `class` (HWC order).
///
/// Ten distinct shapes: horizontal and vertical bars, discs, a plus, an X
/// and a frame, each at a class-dependent position.
pub fn class_template(class: usize, shape: ImageShape) -> Vec<f32> {
    let ImageShape { height: h, width: w, channels: c } = shape;
    let (hf, wf) = (h as f64, w as f64);
    let thick = (hf.min(wf) / 8.0).max(1.0);
    let inside = |y: f64, x: f64| -> bool {
        let (cy, cx) = (hf / 2.0, wf / 2.0);
        match class % 10 {
            0 => (y - hf * 0.25).abs() < thick,
            1 => (x - wf * 0.25).abs() < thick,
            2 => (y - cy).powi(2) + (x - cx).powi(2) < (hf.min(wf) * 0.28).powi(2),
            3 => (y - cy).abs() < thick * 0.75 || (x - cx).abs() < thick * 0.75,
            4 => (y - hf * 0.75).abs() < thick,
            5 => (x - wf * 0.75).abs() < thick,
            6 => (y - hf * 0.3).powi(2) + (x - wf * 0.3).powi(2) < (hf.min(wf) * 0.18).powi(2),
            7 => (y - hf * 0.7).powi(2) + (x - wf * 0.7).powi(2) < (hf.min(wf) * 0.18).powi(2),
            8 => ((y / hf) - (x / wf)).abs() * hf.min(wf) < thick * 0.8 || ((y / hf) + (x / wf) - 1.0).abs() * hf.min(wf) < thick * 0.8,
            _ => {
                let m = hf.min(wf) * 0.15;
                let on_outer = y > m && y < hf - m && x > m && x < wf - m;
                let on_inner = y > m + thick && y < hf - m - thick && x > m + thick && x < wf - m - thick;
                on_outer && !on_inner
            }
        }
    };
    let mut out = vec![0.0f32; shape.pixels()];
    for y in 0..h {
        for x in 0..w {
            if inside(y as f64 + 0.5, x as f64 + 0.5) {
                out[(y * w + x) * c..(y * w + x + 1) * c].fill(1.0);
            }
        }
    }
    out
}

/// Procedural dataset: each class renders its template plus uniform pixel
/// noise in `[-noise, noise]`, clamped to `[0, 1]`. Labels are drawn uniformly.
pub fn make_synthetic(
    num_samples: usize,
    shape: ImageShape,
    num_classes: usize,
    noise: f64,
    rng: &mut dyn RngCore,
) -> Result<LabeledImageSet> {
    if !(1..=10).contains(&num_classes) {
        return Err(Error::Validation(format!("synthetic data supports 1..=10 classes, got {num_classes}")));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Validation(format!("noise amplitude {noise} outside [0, 1]")));
    }
    let templates: Vec<Vec<f32>> = (0..num_classes).map(|c| class_template(c, shape)).collect();
    let mut images = Vec::with_capacity(num_samples * shape.pixels());
    let mut labels = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let label = rng.random_range(0..num_classes);
        labels.push(label);
        for &p in &templates[label] {
            let n = if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 };
            images.push((p as f64 + n).clamp(0.0, 1.0) as f32);
        }
    }
    LabeledImageSet::new(images, labels, num_classes, shape)
}
