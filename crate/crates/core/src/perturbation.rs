//! Cooperative-jammer perturbations: untargeted FGSM and PGD against the
//! eavesdropper classifier under an element-wise budget.
//!
//! The jammer knows the transmitted signal and its labels. It estimates the
//! gradient of the eavesdropper's cross entropy through sampled eavesdropper
//! channels, averaging over `grad_realizations` draws per step.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, RngCore};

use crate::channel::{gain_backward, transmit, transmit_superposed, ChannelRealization, LatentSignal};
use crate::metrics::cce_with_grad;
use crate::nn::{Mode, Sequential};
use crate::tensor::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbMethod {
    Fgsm,
    Pgd,
}

impl fmt::Display for PerturbMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbMethod::Fgsm => "fgsm",
            PerturbMethod::Pgd => "pgd",
        })
    }
}

impl FromStr for PerturbMethod {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "fgsm" => Ok(PerturbMethod::Fgsm),
            "pgd" => Ok(PerturbMethod::Pgd),
            other => Err(format!("unknown perturbation method `{other}` (expected none, fgsm or pgd)")),
        }
    }
}

/// Attack parameters. The budget is an L-infinity box of radius `epsilon`
/// on the I/Q values, so the L2 norm of a row is at most `epsilon * sqrt(2d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub method: PerturbMethod,
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub grad_realizations: usize,
    /// Start PGD from a uniform draw inside the box instead of zero.
    pub random_start: bool,
}

impl PerturbationSpec {
    pub const DEFAULT_EPSILON: f64 = 0.1;
    pub const DEFAULT_REALIZATIONS: usize = 4;

    pub fn fgsm(epsilon: f64) -> Self {
        Self {
            method: PerturbMethod::Fgsm,
            epsilon,
            steps: 1,
            step_size: epsilon,
            grad_realizations: Self::DEFAULT_REALIZATIONS,
            random_start: false,
        }
    }

    /// PGD with the default step size `epsilon / 4`.
    pub fn pgd(epsilon: f64, steps: usize) -> Self {
        Self {
            method: PerturbMethod::Pgd,
            epsilon,
            steps,
            step_size: epsilon / 4.0,
            grad_realizations: Self::DEFAULT_REALIZATIONS,
            random_start: false,
        }
    }

    pub fn with_realizations(mut self, m: usize) -> Self {
        self.grad_realizations = m;
        self
    }

    /// Short label used in reports, e.g. `fgsm` or `pgd10`.
    pub fn tag(&self) -> String {
        match self.method {
            PerturbMethod::Fgsm => "fgsm".to_string(),
            PerturbMethod::Pgd => format!("pgd{}", self.steps),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("perturb.epsilon must be positive, got {}", self.epsilon));
        }
        if self.steps < 1 {
            return bad("perturb.steps must be at least 1".into());
        }
        if self.method == PerturbMethod::Fgsm && self.steps != 1 {
            return bad(format!("fgsm takes exactly one step, got {}", self.steps));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad(format!("perturb.alpha must be positive, got {}", self.step_size));
        }
        if self.grad_realizations < 1 {
            return bad("perturb.m must be at least 1".into());
        }
        Ok(())
    }
}

/// How the jammer's signal reaches each receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JammerFading {
    /// The jammer sits with the transmitter, so its signal fades with the
    /// source: `y = h (x + a delta) + n`.
    #[default]
    CoLocated,
    /// The jammer's links fade independently of the source links.
    Independent,
}

impl fmt::Display for JammerFading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JammerFading::CoLocated => "colocated",
            JammerFading::Independent => "independent",
        })
    }
}

impl FromStr for JammerFading {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "colocated" => Ok(JammerFading::CoLocated),
            "independent" => Ok(JammerFading::Independent),
            other => Err(format!("unknown jammer fading `{other}` (expected colocated or independent)")),
        }
    }
}

/// Jammer propagation model and per-receiver amplitude gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JammerConfig {
    pub fading: JammerFading,
    pub bob_gain: f64,
    pub eve_gain: f64,
}

impl Default for JammerConfig {
    fn default() -> Self {
        Self { fading: JammerFading::CoLocated, bob_gain: 1.0, eve_gain: 1.0 }
    }
}

impl JammerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("jammer.bob_gain", self.bob_gain), ("jammer.eve_gain", self.eve_gain)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Validation(format!("{name} must be a non-negative number, got {g}")));
            }
        }
        Ok(())
    }

    /// Jammer-to-receiver channel given the source-to-receiver channel.
    /// Draws fresh fading from `rng` only in the independent mode.
    pub fn jammer_channel<T: Real>(
        &self,
        source: &ChannelRealization<T>,
        gain: f64,
        rng: &mut dyn RngCore,
    ) -> Result<ChannelRealization<T>> {
        match self.fading {
            JammerFading::CoLocated => Ok(source.scaled(gain)),
            JammerFading::Independent => {
                Ok(ChannelRealization::rayleigh(source.batch(), source.snr_db, rng)?.scaled(gain))
            }
        }
    }
}

fn sign<T: Real>(g: T) -> T {
    if g > T::zero() {
        T::one()
    } else if g < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Gradient of the eavesdropper's cross entropy w.r.t. its received signal.
fn eve_grad<T: Real>(eve: &mut Sequential<T>, y: &LatentSignal<T>, labels: &[usize], rng: &mut dyn RngCore) -> Result<Vec<T>> {
    let logits = eve.forward(y.to_tensor(), Mode::Eval, rng);
    let (_, grad) = cce_with_grad(&logits, labels)?;
    Ok(eve.backward(grad, false).into_vec())
}

/// Single-step perturbation `epsilon * sign(g)`, where `g` averages the
/// gradient of the eavesdropper's cross entropy w.r.t. the transmitted
/// signal over `grad_realizations` channel draws at `eve_snr_db`.
pub fn fgsm_perturb<T: Real>(
    eve: &mut Sequential<T>,
    x: &LatentSignal<T>,
    labels: &[usize],
    spec: &PerturbationSpec,
    eve_snr_db: f64,
    rng: &mut dyn RngCore,
) -> Result<LatentSignal<T>> {
    if spec.method != PerturbMethod::Fgsm {
        return Err(Error::Validation(format!("fgsm_perturb called with method {}", spec.method)));
    }
    let mut total = alloc::vec![T::zero(); x.data().len()];
    for _ in 0..spec.grad_realizations {
        let ch = ChannelRealization::rayleigh(x.batch(), eve_snr_db, rng)?;
        let y = transmit(x, &ch, rng)?;
        let g_y = eve_grad(eve, &y, labels, rng)?;
        for (t, g) in total.iter_mut().zip(gain_backward(&ch.h, x.dim(), &g_y)) {
            *t += g;
        }
    }
    let eps = T::lit(spec.epsilon);
    LatentSignal::new(x.batch(), x.dim(), total.into_iter().map(|g| eps * sign(g)).collect())
}

/// Every PGD iterate `delta_1 ..= delta_steps` (the start point excluded).
///
/// Each step averages the gradient w.r.t. the perturbation over
/// `grad_realizations` draws of the eavesdropper channel (and, for
/// independent jammer fading, of the jammer channel), takes a signed step of
/// size `step_size` and clips back into the box.
pub fn pgd_iterates<T: Real>(
    eve: &mut Sequential<T>,
    x: &LatentSignal<T>,
    labels: &[usize],
    spec: &PerturbationSpec,
    eve_snr_db: f64,
    jammer: &JammerConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<LatentSignal<T>>> {
    if spec.method != PerturbMethod::Pgd {
        return Err(Error::Validation(format!("pgd_perturb called with method {}", spec.method)));
    }
    let eps = T::lit(spec.epsilon);
    let alpha = T::lit(spec.step_size);
    let mut delta = LatentSignal::zeros(x.batch(), x.dim());
    if spec.random_start {
        for v in delta.data_mut() {
            *v = T::lit(rng.random_range(-spec.epsilon..=spec.epsilon));
        }
    }
    let mut iterates = Vec::with_capacity(spec.steps);
    for _ in 0..spec.steps {
        let mut total = alloc::vec![T::zero(); x.data().len()];
        for _ in 0..spec.grad_realizations {
            let ch = ChannelRealization::rayleigh(x.batch(), eve_snr_db, rng)?;
            let ch_jam = jammer.jammer_channel(&ch, jammer.eve_gain, rng)?;
            let y = transmit_superposed(x, &delta, &ch, &ch_jam, rng)?;
            let g_y = eve_grad(eve, &y, labels, rng)?;
            for (t, g) in total.iter_mut().zip(gain_backward(&ch_jam.h, x.dim(), &g_y)) {
                *t += g;
            }
        }
        for (d, g) in delta.data_mut().iter_mut().zip(total) {
            *d = (*d + alpha * sign(g)).max(-eps).min(eps);
        }
        iterates.push(delta.clone());
    }
    Ok(iterates)
}

/// Final PGD iterate.
pub fn pgd_perturb<T: Real>(
    eve: &mut Sequential<T>,
    x: &LatentSignal<T>,
    labels: &[usize],
    spec: &PerturbationSpec,
    eve_snr_db: f64,
    jammer: &JammerConfig,
    rng: &mut dyn RngCore,
) -> Result<LatentSignal<T>> {
    let mut iterates = pgd_iterates(eve, x, labels, spec, eve_snr_db, jammer, rng)?;
    Ok(iterates.pop().expect("at least one PGD step"))
}

/// Crafts a perturbation with whichever method `spec` names.
pub fn craft<T: Real>(
    eve: &mut Sequential<T>,
    x: &LatentSignal<T>,
    labels: &[usize],
    spec: &PerturbationSpec,
    eve_snr_db: f64,
    jammer: &JammerConfig,
    rng: &mut dyn RngCore,
) -> Result<LatentSignal<T>> {
    match spec.method {
        PerturbMethod::Fgsm => fgsm_perturb(eve, x, labels, spec, eve_snr_db, rng),
        PerturbMethod::Pgd => pgd_perturb(eve, x, labels, spec, eve_snr_db, jammer, rng),
    }
}

/// Largest absolute element of a perturbation.
pub fn linf_norm<T: Real>(delta: &LatentSignal<T>) -> f64 {
    delta.max_abs()
}
