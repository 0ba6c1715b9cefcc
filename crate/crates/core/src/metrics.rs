//! Losses and quality metrics, with gradients where training needs them.
//!
//! Image batches are `[B, C, H, W]` tensors with values in `[0, 1]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use crate::tensor::{Real, Tensor};
use crate::{Error, Result};

/// Relative weights of the legitimate objective terms and the privacy term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub w_sem: f64,
    pub w_mse: f64,
    pub w_ssim: f64,
    pub w_p: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w_sem: 1.0, w_mse: 5.0, w_ssim: 1.0, w_p: 0.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_sem, self.w_mse, self.w_ssim, self.w_p];
        if all.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("loss weights must be finite".into()));
        }
        if all.iter().any(|w| *w < 0.0) {
            return Err(Error::Validation("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

fn check_labels(batch: usize, classes: usize, labels: &[usize]) -> Result<()> {
    if classes < 2 {
        return Err(Error::Shape(format!("need at least 2 classes, got {classes}")));
    }
    if labels.len() != batch {
        return Err(Error::Shape(format!("{} labels for {batch} rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|l| **l >= classes) {
        return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
    }
    Ok(())
}

/// Row-wise softmax, computed in a numerically stable way.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let mut out = logits.clone();
    for b in 0..logits.batch() {
        let row = out.row_mut(b);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

fn log_softmax_at<T: Real>(row: &[T], label: usize) -> f64 {
    let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v.as_f64() - max).exp()).sum::<f64>().ln();
    row[label].as_f64() - lse
}

/// Mean categorical cross entropy of `logits` (`[B, K]`) against integer labels.
pub fn cce<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    check_labels(logits.batch(), logits.row_len(), labels)?;
    let total: f64 = labels.iter().enumerate().map(|(b, &l)| -log_softmax_at(logits.row(b), l)).sum();
    Ok(total / labels.len() as f64)
}

/// Cross entropy of every row.
pub fn cce_per_row<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(logits.batch(), logits.row_len(), labels)?;
    Ok(labels.iter().enumerate().map(|(b, &l)| -log_softmax_at(logits.row(b), l)).collect())
}

/// Cross entropy and its gradient `(softmax - onehot) / B`.
pub fn cce_with_grad<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let loss = cce(logits, labels)?;
    let mut grad = softmax(logits);
    let inv_b = T::lit(1.0 / labels.len() as f64);
    for (b, &l) in labels.iter().enumerate() {
        let row = grad.row_mut(b);
        row[l] -= T::one();
        row.iter_mut().for_each(|v| *v *= inv_b);
    }
    Ok((loss, grad))
}

/// Per-row argmax.
pub fn predictions<T: Real>(logits: &Tensor<T>) -> Vec<usize> {
    (0..logits.batch())
        .map(|b| {
            let row = logits.row(b);
            (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best })
        })
        .collect()
}

/// Number of rows whose argmax equals the label.
pub fn correct<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> usize {
    predictions(logits).iter().zip(labels).filter(|(p, l)| p == l).count()
}

pub fn accuracy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    correct(logits, labels) as f64 / labels.len() as f64
}

fn check_same_shape<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn mse<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    check_same_shape(a, b)?;
    if a.is_empty() {
        return Err(Error::Empty("image batch"));
    }
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2)).sum();
    Ok(sum / a.len() as f64)
}

/// Mean squared error and its gradient w.r.t. `a`.
pub fn mse_with_grad<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    let loss = mse(a, b)?;
    let scale = T::lit(2.0 / a.len() as f64);
    let grad = a.data().iter().zip(b.data()).map(|(x, y)| scale * (*x - *y)).collect();
    Ok((loss, Tensor::from_vec(a.shape(), grad)))
}

pub const PSNR_CAP_DB: f64 = 100.0;

/// `10 log10(1 / mse)` for unit dynamic range, capped at 100 dB.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < 1e-10 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

pub fn psnr<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// PSNR of every image in the batch.
pub fn psnr_per_image<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Vec<f64>> {
    check_same_shape(a, b)?;
    Ok((0..a.batch())
        .map(|i| {
            let n = a.row_len() as f64;
            let m = a.row(i).iter().zip(b.row(i)).map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2)).sum::<f64>() / n;
            psnr_from_mse(m)
        })
        .collect())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable "valid" Gaussian filtering of one `h x w` plane.
struct Filter {
    taps: [f64; SSIM_WINDOW],
    h: usize,
    w: usize,
}

impl Filter {
    fn out_dims(&self) -> (usize, usize) {
        (self.h + 1 - SSIM_WINDOW, self.w + 1 - SSIM_WINDOW)
    }

    fn apply(&self, plane: &[f64], out: &mut [f64]) {
        let (oh, ow) = self.out_dims();
        let mut tmp = vec![0.0; self.h * ow];
        for r in 0..self.h {
            let row = &plane[r * self.w..(r + 1) * self.w];
            for c in 0..ow {
                tmp[r * ow + c] = self.taps.iter().zip(&row[c..c + SSIM_WINDOW]).map(|(t, v)| t * v).sum();
            }
        }
        for r in 0..oh {
            for c in 0..ow {
                out[r * ow + c] = (0..SSIM_WINDOW).map(|k| self.taps[k] * tmp[(r + k) * ow + c]).sum();
            }
        }
    }

    /// Adjoint of [`Filter::apply`].
    fn adjoint(&self, grad: &[f64], plane: &mut [f64]) {
        let (oh, ow) = self.out_dims();
        let mut tmp = vec![0.0; self.h * ow];
        for r in 0..oh {
            for c in 0..ow {
                let g = grad[r * ow + c];
                for k in 0..SSIM_WINDOW {
                    tmp[(r + k) * ow + c] += self.taps[k] * g;
                }
            }
        }
        for r in 0..self.h {
            for c in 0..ow {
                let g = tmp[r * ow + c];
                for k in 0..SSIM_WINDOW {
                    plane[r * self.w + c + k] += self.taps[k] * g;
                }
            }
        }
    }
}

fn ssim_dims<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    check_same_shape(a, b)?;
    let &[batch, channels, h, w] = a.shape() else {
        return Err(Error::Shape(format!("SSIM expects [B, C, H, W], got {:?}", a.shape())));
    };
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Shape(format!("images of {h}x{w} are smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")));
    }
    Ok((batch, channels, h, w))
}

/// Per-image SSIM (averaged over positions and channels), optionally with
/// the gradient of the batch-mean SSIM w.r.t. `a`.
#[allow(clippy::needless_range_loop)]
fn ssim_impl<T: Real>(a: &Tensor<T>, b: &Tensor<T>, want_grad: bool) -> Result<(Vec<f64>, Option<Tensor<T>>)> {
    let (batch, channels, h, w) = ssim_dims(a, b)?;
    let filter = Filter { taps: gaussian_window(), h, w };
    let (oh, ow) = filter.out_dims();
    let n_out = oh * ow;
    let plane_len = h * w;
    let per_image_count = (channels * n_out) as f64;
    let batch_count = per_image_count * batch as f64;
    let mut scores = vec![0.0; batch];
    let mut grad = want_grad.then(|| vec![0.0f64; a.len()]);

    let mut bufs = [(); 5].map(|_| vec![0.0; n_out]);
    let mut sq = vec![0.0; plane_len];
    for img in 0..batch {
        for c in 0..channels {
            let off = img * channels * plane_len + c * plane_len;
            let pa: Vec<f64> = a.data()[off..off + plane_len].iter().map(|v| v.as_f64()).collect();
            let pb: Vec<f64> = b.data()[off..off + plane_len].iter().map(|v| v.as_f64()).collect();
            let [mu_a, mu_b, e_aa, e_bb, e_ab] = &mut bufs;
            filter.apply(&pa, mu_a);
            filter.apply(&pb, mu_b);
            sq.iter_mut().zip(&pa).for_each(|(s, x)| *s = x * x);
            filter.apply(&sq, e_aa);
            sq.iter_mut().zip(&pb).for_each(|(s, x)| *s = x * x);
            filter.apply(&sq, e_bb);
            sq.iter_mut().zip(pa.iter().zip(&pb)).for_each(|(s, (x, y))| *s = x * y);
            filter.apply(&sq, e_ab);

            let mut d_mu = vec![0.0; n_out];
            let mut d_eaa = vec![0.0; n_out];
            let mut d_eab = vec![0.0; n_out];
            let mut sum = 0.0;
            for p in 0..n_out {
                let (ma, mb) = (mu_a[p], mu_b[p]);
                let var_a = e_aa[p] - ma * ma;
                let var_b = e_bb[p] - mb * mb;
                let cov = e_ab[p] - ma * mb;
                let a1 = 2.0 * ma * mb + SSIM_C1;
                let a2 = 2.0 * cov + SSIM_C2;
                let b1 = ma * ma + mb * mb + SSIM_C1;
                let b2 = var_a + var_b + SSIM_C2;
                let s = a1 * a2 / (b1 * b2);
                sum += s;
                if want_grad {
                    let den = b1 * b2;
                    d_mu[p] = (2.0 * mb * a2 - 2.0 * mb * a1) / den - s * (2.0 * ma / b1 - 2.0 * ma / b2);
                    d_eaa[p] = -s / b2;
                    d_eab[p] = 2.0 * a1 / den;
                }
            }
            scores[img] += sum / per_image_count;
            if let Some(g) = grad.as_mut() {
                let scale = 1.0 / batch_count;
                let mut g_mu = vec![0.0; plane_len];
                let mut g_aa = vec![0.0; plane_len];
                let mut g_ab = vec![0.0; plane_len];
                filter.adjoint(&d_mu, &mut g_mu);
                filter.adjoint(&d_eaa, &mut g_aa);
                filter.adjoint(&d_eab, &mut g_ab);
                for k in 0..plane_len {
                    g[off + k] = scale * (g_mu[k] + 2.0 * pa[k] * g_aa[k] + pb[k] * g_ab[k]);
                }
            }
        }
    }
    let grad = grad.map(|g| Tensor::from_vec(a.shape(), g.into_iter().map(T::lit).collect()));
    Ok((scores, grad))
}

/// Mean SSIM over the batch: 11x11 Gaussian window (sigma 1.5), valid
/// positions only, `C1 = 0.01^2`, `C2 = 0.03^2`, channels averaged.
pub fn ssim<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    let (scores, _) = ssim_impl(a, b, false)?;
    Ok(scores.iter().sum::<f64>() / scores.len().max(1) as f64)
}

pub fn ssim_per_image<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Vec<f64>> {
    Ok(ssim_impl(a, b, false)?.0)
}

/// Mean SSIM and its gradient w.r.t. `a`.
pub fn ssim_with_grad<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    let (scores, grad) = ssim_impl(a, b, true)?;
    let mean = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
    Ok((mean, grad.expect("gradient requested")))
}

/// Components and gradients of the legitimate receiver's multi-task loss
/// `w_sem * CCE + w_mse * MSE + w_ssim * (1 - SSIM)`.
#[derive(Debug, Clone)]
pub struct BobLoss<T> {
    pub total: f64,
    pub cce: f64,
    pub mse: f64,
    pub ssim: f64,
    pub grad_logits: Tensor<T>,
    pub grad_recon: Tensor<T>,
}

pub fn bob_loss<T: Real>(
    logits: &Tensor<T>,
    labels: &[usize],
    recon: &Tensor<T>,
    target: &Tensor<T>,
    w: &LossWeights,
) -> Result<BobLoss<T>> {
    let (cce, mut grad_logits) = cce_with_grad(logits, labels)?;
    let (mse, g_mse) = mse_with_grad(recon, target)?;
    let (ssim, g_ssim) = ssim_with_grad(recon, target)?;
    let total = compose_bob_loss(cce, mse, ssim, w);
    let w_sem = T::lit(w.w_sem);
    grad_logits.data_mut().iter_mut().for_each(|g| *g *= w_sem);
    let (w_mse, w_ssim) = (T::lit(w.w_mse), T::lit(w.w_ssim));
    let grad = g_mse.data().iter().zip(g_ssim.data()).map(|(m, s)| w_mse * *m - w_ssim * *s).collect();
    Ok(BobLoss { total, cce, mse, ssim, grad_logits, grad_recon: Tensor::from_vec(recon.shape(), grad) })
}

/// `w_sem * cce + w_mse * mse + w_ssim * (1 - ssim)`.
pub fn compose_bob_loss(cce: f64, mse: f64, ssim: f64, w: &LossWeights) -> f64 {
    w.w_sem * cce + w.w_mse * mse + w.w_ssim * (1.0 - ssim)
}

/// The quantity minimized by the legitimate update: utility loss minus the
/// weighted eavesdropper cross entropy.
pub fn legitimate_objective(bob: f64, eve_cce: f64, w_p: f64) -> f64 {
    bob - w_p * eve_cce
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_images(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random::<f64>()).collect())
    }

    /// Direct window-by-window SSIM with the full 2-D kernel.
    fn naive_ssim(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
        let &[batch, ch, h, w] = a.shape() else { unreachable!() };
        let g = gaussian_window();
        let mut total = 0.0;
        let mut count = 0usize;
        for img in 0..batch {
            for c in 0..ch {
                let px = |t: &Tensor<f64>, y: usize, x: usize| t.data()[((img * ch + c) * h + y) * w + x];
                for oy in 0..=h - SSIM_WINDOW {
                    for ox in 0..=w - SSIM_WINDOW {
                        let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                        for ky in 0..SSIM_WINDOW {
                            for kx in 0..SSIM_WINDOW {
                                let wt = g[ky] * g[kx];
                                let (va, vb) = (px(a, oy + ky, ox + kx), px(b, oy + ky, ox + kx));
                                ma += wt * va;
                                mb += wt * vb;
                                saa += wt * va * va;
                                sbb += wt * vb * vb;
                                sab += wt * va * vb;
                            }
                        }
                        let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                        count += 1;
                    }
                }
            }
        }
        total / count as f64
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::<f64>::zeros(&[4, 10]);
        let loss = cce(&logits, &[0, 3, 7, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_drive_cce_to_zero() {
        let mut logits = Tensor::<f64>::zeros(&[2, 3]);
        logits.data_mut()[1] = 200.0;
        logits.data_mut()[5] = 200.0;
        assert!(cce(&logits, &[1, 2]).unwrap() < 1e-12);
    }

    #[test]
    fn cce_matches_naive_log_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits = Tensor::from_vec(&[5, 4], (0..20).map(|_| rng.random_range(-3.0..3.0)).collect());
        let labels = [0, 1, 3, 2, 3];
        let naive: f64 = labels
            .iter()
            .enumerate()
            .map(|(b, &l)| {
                let row = logits.row(b);
                let z: f64 = row.iter().map(|v: &f64| v.exp()).sum();
                -(row[l].exp() / z).ln()
            })
            .sum::<f64>()
            / 5.0;
        assert!((cce(&logits, &labels).unwrap() - naive).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let logits = Tensor::<f32>::zeros(&[1, 3]);
        assert!(matches!(cce(&logits, &[3]), Err(Error::Data(_))));
    }

    #[test]
    fn cce_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let logits = Tensor::from_vec(&[3, 5], (0..15).map(|_| rng.random_range(-2.0..2.0)).collect());
        let labels = [4, 0, 2];
        let (_, grad) = cce_with_grad(&logits, &labels).unwrap();
        for k in 0..15 {
            let bump = |e: f64| {
                let mut t = logits.clone();
                t.data_mut()[k] += e;
                cce(&t, &labels).unwrap()
            };
            let fd = (bump(1e-6) - bump(-1e-6)) / 2e-6;
            assert!((fd - grad.data()[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn cce_uniform_point_exceeds_label_concentrated_point() {
        let labels = [2, 0];
        let uniform = cce(&Tensor::<f64>::zeros(&[2, 4]), &labels).unwrap();
        let mut peaked = Tensor::<f64>::zeros(&[2, 4]);
        peaked.data_mut()[2] = 3.0;
        peaked.data_mut()[4] = 3.0;
        assert!(uniform >= cce(&peaked, &labels).unwrap());
    }

    #[test]
    fn ssim_of_identical_images_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_images(&mut rng, &[2, 3, 16, 16]);
        assert_eq!(ssim(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn ssim_constant_images_follow_closed_form() {
        let half = Tensor::from_vec(&[1, 1, 12, 12], vec![0.5f64; 144]);
        let zero = Tensor::<f64>::zeros(&[1, 1, 12, 12]);
        assert!((ssim(&half, &half).unwrap() - 1.0).abs() < 1e-12);
        let expected = SSIM_C1 / (0.25 + SSIM_C1);
        assert!((ssim(&half, &zero).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_windowed_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let a = random_images(&mut rng, &[2, 2, 14, 13]);
            let b = random_images(&mut rng, &[2, 2, 14, 13]);
            assert!((ssim(&a, &b).unwrap() - naive_ssim(&a, &b)).abs() < 1e-5);
        }
    }

    #[test]
    fn ssim_rejects_mismatched_or_tiny_images() {
        let a = Tensor::<f64>::zeros(&[1, 1, 12, 12]);
        assert!(matches!(ssim(&a, &Tensor::zeros(&[1, 1, 12, 13])), Err(Error::Shape(_))));
        let tiny = Tensor::<f64>::zeros(&[1, 1, 8, 8]);
        assert!(matches!(ssim(&tiny, &tiny), Err(Error::Shape(_))));
    }

    #[test]
    fn ssim_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_images(&mut rng, &[2, 1, 12, 13]);
        let b = random_images(&mut rng, &[2, 1, 12, 13]);
        let (_, grad) = ssim_with_grad(&a, &b).unwrap();
        for k in [0, 7, 40, 100, 155, 200, 311] {
            let bump = |e: f64| {
                let mut t = a.clone();
                t.data_mut()[k] += e;
                ssim(&t, &b).unwrap()
            };
            let fd = (bump(1e-6) - bump(-1e-6)) / 2e-6;
            assert!((fd - grad.data()[k]).abs() < 1e-7 * (1.0 + fd.abs()), "k={k}: {fd} vs {}", grad.data()[k]);
        }
    }

    #[test]
    fn psnr_analytic_values() {
        assert_eq!(psnr_from_mse(0.01), 20.0);
        assert_eq!(psnr_from_mse(0.1), 10.0);
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![0.3f32; 4]);
        assert_eq!(psnr(&x, &x).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn bob_loss_composes_weighted_terms() {
        let w = LossWeights::default();
        assert!((compose_bob_loss(2.3026, 0.04, 0.9, &w) - 2.6026).abs() < 1e-12);
        assert_eq!(compose_bob_loss(0.0, 0.0, 1.0, &w), 0.0);
    }

    #[test]
    fn bob_loss_is_linear_in_mse_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let recon = random_images(&mut rng, &[2, 1, 12, 12]);
        let target = random_images(&mut rng, &[2, 1, 12, 12]);
        let logits = Tensor::from_vec(&[2, 3], (0..6).map(|_| rng.random::<f64>()).collect());
        let base = LossWeights::default();
        let doubled = LossWeights { w_mse: 2.0 * base.w_mse, ..base };
        let zeroed = LossWeights { w_mse: 0.0, ..base };
        let l1 = bob_loss(&logits, &[0, 2], &recon, &target, &base).unwrap();
        let l2 = bob_loss(&logits, &[0, 2], &recon, &target, &doubled).unwrap();
        let l0 = bob_loss(&logits, &[0, 2], &recon, &target, &zeroed).unwrap();
        assert!(((l2.total - l0.total) - 2.0 * (l1.total - l0.total)).abs() < 1e-12);
    }

    #[test]
    fn bob_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let recon = random_images(&mut rng, &[1, 1, 12, 12]);
        let target = random_images(&mut rng, &[1, 1, 12, 12]);
        let logits = Tensor::from_vec(&[1, 4], (0..4).map(|_| rng.random::<f64>()).collect());
        let w = LossWeights::default();
        let l = bob_loss(&logits, &[3], &recon, &target, &w).unwrap();
        assert!(l.grad_recon.data().iter().any(|g| *g != 0.0));
        for k in [0, 50, 143] {
            let bump = |e: f64| {
                let mut t = recon.clone();
                t.data_mut()[k] += e;
                bob_loss(&logits, &[3], &t, &target, &w).unwrap().total
            };
            let fd = (bump(1e-6) - bump(-1e-6)) / 2e-6;
            assert!((fd - l.grad_recon.data()[k]).abs() < 1e-7 * (1.0 + fd.abs()));
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn legitimate_objective_cases() {
        assert_eq!(legitimate_objective(1.7, 2.3, 0.0), 1.7);
        assert!((legitimate_objective(2.0, 2.3026, 10.0) + 21.026).abs() < 1e-12);
        assert!(legitimate_objective(2.0, 2.5, 1.0) < legitimate_objective(2.0, 2.4, 1.0));
    }

    proptest! {
        #[test]
        fn ssim_is_symmetric_and_bounded(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_images(&mut rng, &[1, 1, 12, 12]);
            let b = random_images(&mut rng, &[1, 1, 12, 12]);
            let ab = ssim(&a, &b).unwrap();
            let ba = ssim(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-7);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn psnr_is_consistent_with_mse(m in 1e-10f64..1.0) {
            prop_assert!((psnr_from_mse(m) - 10.0 * (1.0 / m).log10()).abs() < 1e-9);
        }
    }
}
