//! Complex baseband signal plane.
//!
//! A latent batch holds `d` complex channel uses per image in the canonical
//! `[B, 2, d]` layout: the in-phase plane of a row followed by its quadrature
//! plane. Complex multiplication by a fading gain is applied as the 2x2
//! rotation-scaling of each (I, Q) pair, and every transform exposes the
//! adjoint used for backpropagation.
//!
//! Conventions: transmit power is normalized to 1 per complex use, fading is
//! one unit-variance circularly-symmetric Gaussian gain per image (block
//! fading), and the total complex noise variance is `10^(-snr_db / 10)`,
//! split equally between the I and Q components. Receivers never see the
//! fading gain.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use num_complex::Complex;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::tensor::{Real, Tensor};
use crate::{Error, Result};

/// Batch of complex baseband blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSignal<T> {
    batch: usize,
    dim: usize,
    data: Vec<T>,
    normalized: bool,
}

impl<T: Real> LatentSignal<T> {
    /// `data` must hold `batch * 2 * dim` values in `[B, 2, d]` order.
    pub fn new(batch: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("latent dimension must be at least 1".into()));
        }
        if data.len() != batch * 2 * dim {
            return Err(Error::Shape(format!(
                "latent data has {} values, expected {} for [{batch}, 2, {dim}]",
                data.len(),
                batch * 2 * dim
            )));
        }
        Ok(Self { batch, dim, data, normalized: false })
    }

    pub fn zeros(batch: usize, dim: usize) -> Self {
        Self { batch, dim, data: vec![T::zero(); batch * 2 * dim], normalized: false }
    }

    /// From a `[B, 2d]` or `[B, 2, d]` tensor.
    pub fn from_tensor(t: Tensor<T>) -> Result<Self> {
        let batch = t.batch();
        let width = t.row_len();
        if width == 0 || !width.is_multiple_of(2) {
            return Err(Error::Shape(format!("latent width {width} is not an even positive number")));
        }
        Self::new(batch, width / 2, t.into_vec())
    }

    /// `[B, 2d]` view for the dense layers of the receivers.
    pub fn to_tensor(&self) -> Tensor<T> {
        Tensor::from_vec(&[self.batch, 2 * self.dim], self.data.clone())
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, b: usize) -> &[T] {
        &self.data[b * 2 * self.dim..(b + 1) * 2 * self.dim]
    }

    pub fn i_part(&self, b: usize) -> &[T] {
        &self.row(b)[..self.dim]
    }

    pub fn q_part(&self, b: usize) -> &[T] {
        &self.row(b)[self.dim..]
    }

    /// Mean complex power of row `b`, `(1/d) sum_k (i_k^2 + q_k^2)`.
    pub fn power(&self, b: usize) -> f64 {
        self.row(b).iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / self.dim as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.as_f64().abs()))
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.batch == other.batch && self.dim == other.dim
    }
}

/// Scales each row by `sqrt(d) / ||row||` so its mean complex power is 1.
pub fn power_normalize<T: Real>(z: &LatentSignal<T>) -> Result<LatentSignal<T>> {
    let mut out = z.clone();
    let root_d = (z.dim as f64).sqrt();
    for b in 0..z.batch {
        let norm = z.row(b).iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateSignal { row: b });
        }
        let s = T::lit(root_d / norm);
        let d2 = 2 * z.dim;
        out.data[b * d2..(b + 1) * d2].iter_mut().for_each(|v| *v *= s);
    }
    out.normalized = true;
    Ok(out)
}

/// Gradient w.r.t. `z` of a loss whose gradient w.r.t. `x = power_normalize(z)` is `grad`.
pub fn power_normalize_backward<T: Real>(z: &LatentSignal<T>, x: &LatentSignal<T>, grad: &[T]) -> Vec<T> {
    let d2 = 2 * z.dim;
    let d = T::lit(z.dim as f64);
    let mut dz = vec![T::zero(); grad.len()];
    for b in 0..z.batch {
        let zr = z.row(b);
        let xr = x.row(b);
        let g = &grad[b * d2..(b + 1) * d2];
        let norm = zr.iter().map(|v| *v * *v).sum::<T>().sqrt();
        let s = d.sqrt() / norm;
        let proj = xr.iter().zip(g).map(|(a, b)| *a * *b).sum::<T>() / d;
        for ((o, gi), xi) in dz[b * d2..(b + 1) * d2].iter_mut().zip(g).zip(xr) {
            *o = s * (*gi - *xi * proj);
        }
    }
    dz
}

/// Draws one unit-variance circularly-symmetric complex Gaussian gain per
/// block: real and imaginary parts each `Normal(0, 1/2)`.
pub fn sample_fading<T: Real>(batch: usize, rng: &mut dyn RngCore) -> Result<Vec<Complex<T>>> {
    if batch == 0 {
        return Err(Error::Empty("fading batch"));
    }
    let scale = core::f64::consts::FRAC_1_SQRT_2;
    Ok((0..batch)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(T::lit(re * scale), T::lit(im * scale))
        })
        .collect())
}

/// Total complex noise variance for an SNR in dB against unit transmit power.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Per-block fading gains plus the noise level of one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    pub h: Vec<Complex<T>>,
    pub snr_db: f64,
    pub noise_sigma2: f64,
}

impl<T: Real> ChannelRealization<T> {
    pub fn new(h: Vec<Complex<T>>, snr_db: f64) -> Self {
        Self { h, snr_db, noise_sigma2: noise_variance(snr_db) }
    }

    pub fn rayleigh(batch: usize, snr_db: f64, rng: &mut dyn RngCore) -> Result<Self> {
        Ok(Self::new(sample_fading(batch, rng)?, snr_db))
    }

    /// Unit gain, no noise.
    pub fn identity(batch: usize) -> Self {
        Self { h: vec![Complex::new(T::one(), T::zero()); batch], snr_db: f64::INFINITY, noise_sigma2: 0.0 }
    }

    pub fn with_noise_variance(mut self, noise_sigma2: f64) -> Self {
        self.noise_sigma2 = noise_sigma2;
        self
    }

    /// Same draws with every gain multiplied by `factor` (jammer power control).
    pub fn scaled(&self, factor: f64) -> Self {
        let f = T::lit(factor);
        Self { h: self.h.iter().map(|g| g * f).collect(), ..self.clone() }
    }

    pub fn batch(&self) -> usize {
        self.h.len()
    }
}

/// `out += g * s` per complex use, one gain per row.
fn accumulate_gain<T: Real>(out: &mut [T], s: &LatentSignal<T>, gains: &[Complex<T>]) {
    let d = s.dim;
    for (b, g) in gains.iter().enumerate() {
        let src = s.row(b);
        let dst = &mut out[b * 2 * d..(b + 1) * 2 * d];
        let (si, sq) = src.split_at(d);
        let (di, dq) = dst.split_at_mut(d);
        for k in 0..d {
            di[k] += g.re * si[k] - g.im * sq[k];
            dq[k] += g.im * si[k] + g.re * sq[k];
        }
    }
}

/// Adjoint of multiplying each row by its gain: multiplies by the conjugate.
pub fn gain_backward<T: Real>(gains: &[Complex<T>], dim: usize, grad: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); grad.len()];
    for (b, g) in gains.iter().enumerate() {
        let src = &grad[b * 2 * dim..(b + 1) * 2 * dim];
        let dst = &mut out[b * 2 * dim..(b + 1) * 2 * dim];
        let (gi, gq) = src.split_at(dim);
        let (oi, oq) = dst.split_at_mut(dim);
        for k in 0..dim {
            oi[k] = g.re * gi[k] + g.im * gq[k];
            oq[k] = g.re * gq[k] - g.im * gi[k];
        }
    }
    out
}

fn add_noise<T: Real>(out: &mut [T], noise_sigma2: f64, rng: &mut dyn RngCore) {
    if noise_sigma2 == 0.0 {
        return;
    }
    let sigma = (noise_sigma2 / 2.0).sqrt();
    for v in out.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *v += T::lit(sigma * n);
    }
}

/// `y = h x + n` for a power-normalized `x`.
pub fn transmit<T: Real>(
    x: &LatentSignal<T>,
    ch: &ChannelRealization<T>,
    rng: &mut dyn RngCore,
) -> Result<LatentSignal<T>> {
    if !x.normalized {
        return Err(Error::Contract("transmit requires a power-normalized signal".into()));
    }
    if ch.batch() != x.batch {
        return Err(Error::Shape(format!("{} fading gains for a batch of {}", ch.batch(), x.batch)));
    }
    let mut y = LatentSignal::zeros(x.batch, x.dim);
    accumulate_gain(&mut y.data, x, &ch.h);
    add_noise(&mut y.data, ch.noise_sigma2, rng);
    Ok(y)
}

/// `y = h x + g delta + n`: the source and a cooperative jammer received
/// together. `delta` is not power-normalized; its budget is the caller's.
/// Noise follows `ch_src`.
pub fn transmit_superposed<T: Real>(
    x: &LatentSignal<T>,
    delta: &LatentSignal<T>,
    ch_src: &ChannelRealization<T>,
    ch_jam: &ChannelRealization<T>,
    rng: &mut dyn RngCore,
) -> Result<LatentSignal<T>> {
    if !x.same_shape(delta) {
        return Err(Error::Shape(format!(
            "perturbation [{}, 2, {}] does not match signal [{}, 2, {}]",
            delta.batch, delta.dim, x.batch, x.dim
        )));
    }
    if ch_jam.batch() != x.batch {
        return Err(Error::Shape(format!("{} jammer gains for a batch of {}", ch_jam.batch(), x.batch)));
    }
    if !x.normalized {
        return Err(Error::Contract("transmit requires a power-normalized signal".into()));
    }
    if ch_src.batch() != x.batch {
        return Err(Error::Shape(format!("{} fading gains for a batch of {}", ch_src.batch(), x.batch)));
    }
    let mut y = LatentSignal::zeros(x.batch, x.dim);
    accumulate_gain(&mut y.data, x, &ch_src.h);
    accumulate_gain(&mut y.data, delta, &ch_jam.h);
    add_noise(&mut y.data, ch_src.noise_sigma2, rng);
    Ok(y)
}
