//! 3x3 convolutions with padding 1, lowered to GEMM through im2col.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use rand::{Rng, RngCore};

use crate::tensor::{Real, Tensor};

/// Geometry of a 3x3, padding-1 convolution between a "large" grid and a
/// "small" grid sampled with `stride` (equal grids when `stride == 1`).
#[derive(Debug, Clone, Copy)]
struct Grid {
    channels: usize,
    big: (usize, usize),
    small: (usize, usize),
    stride: usize,
}

impl Grid {
    fn cols_len(&self) -> usize {
        self.channels * 9 * self.small.0 * self.small.1
    }

    /// Output columns `ox` whose source column `ox * stride + kj - 1` lies
    /// inside the big grid, as a half-open range.
    fn valid_cols(&self, kj: usize) -> (usize, usize) {
        let (_, bw) = self.big;
        let lo = usize::from(kj == 0);
        let hi = if bw < kj { 0 } else { ((bw - kj) / self.stride + 1).min(self.small.1) };
        (lo, hi.max(lo))
    }

    /// One contiguous span per kernel tap for a stride-1 convolution. See
    /// [`TapSpan`].
    fn tap_spans(&self) -> Vec<TapSpan> {
        debug_assert_eq!(self.stride, 1);
        let (h, w) = self.big;
        let mut spans = Vec::with_capacity(9);
        for ki in 0..3 {
            // Output rows whose source row ki - 1 away is inside the grid.
            let (oy0, oy1) = (usize::from(ki == 0), (h + 1 - ki).min(h));
            if oy1 <= oy0 {
                continue;
            }
            for kj in 0..3 {
                let (lo, hi) = self.valid_cols(kj);
                if hi == lo {
                    continue;
                }
                let out = oy0 * w + lo..(oy1 - 1) * w + hi;
                let excluded = (oy0..oy1)
                    .flat_map(|oy| (0..lo).chain(hi..w).map(move |col| oy * w + col))
                    .filter(|p| out.contains(p))
                    .collect();
                let in_start = out.start + (ki * w + kj) - (w + 1);
                spans.push(TapSpan { tap: ki * 3 + kj, out, in_start, excluded });
            }
        }
        spans
    }

    /// Gathers every 3x3 patch of `img` (`[C, big]`) into `cols` (`[C*9, small]`).
    fn im2col<T: Real>(&self, img: &[T], cols: &mut [T]) {
        let (bh, bw) = self.big;
        let (sh, sw) = self.small;
        let n = sh * sw;
        for ch in 0..self.channels {
            let plane = &img[ch * bh * bw..(ch + 1) * bh * bw];
            for ki in 0..3 {
                for kj in 0..3 {
                    let row = (ch * 9 + ki * 3 + kj) * n;
                    let (lo, hi) = self.valid_cols(kj);
                    for oy in 0..sh {
                        let dst = &mut cols[row + oy * sw..row + (oy + 1) * sw];
                        let iy = oy * self.stride + ki;
                        if iy == 0 || iy > bh {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &plane[(iy - 1) * bw..iy * bw];
                        dst[..lo].fill(T::zero());
                        dst[hi..].fill(T::zero());
                        let first = lo * self.stride + kj - 1;
                        if self.stride == 1 {
                            dst[lo..hi].copy_from_slice(&src[first..first + hi - lo]);
                        } else {
                            for (d, s) in dst[lo..hi].iter_mut().zip(src[first..].iter().step_by(self.stride)) {
                                *d = *s;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Grid::im2col`]: scatters-and-adds `cols` back onto `img`.
    fn col2im<T: Real>(&self, cols: &[T], img: &mut [T]) {
        let (bh, bw) = self.big;
        let (sh, sw) = self.small;
        let n = sh * sw;
        for ch in 0..self.channels {
            let plane = &mut img[ch * bh * bw..(ch + 1) * bh * bw];
            for ki in 0..3 {
                for kj in 0..3 {
                    let row = (ch * 9 + ki * 3 + kj) * n;
                    let (lo, hi) = self.valid_cols(kj);
                    for oy in 0..sh {
                        let iy = oy * self.stride + ki;
                        if iy == 0 || iy > bh {
                            continue;
                        }
                        let src = &cols[row + oy * sw + lo..row + oy * sw + hi];
                        let dst = &mut plane[(iy - 1) * bw..iy * bw];
                        let first = lo * self.stride + kj - 1;
                        if self.stride == 1 {
                            for (d, s) in dst[first..first + hi - lo].iter_mut().zip(src) {
                                *d += *s;
                            }
                        } else {
                            for (d, s) in dst[first..].iter_mut().step_by(self.stride).zip(src) {
                                *d += *s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Kernel tap `tap` maps output positions `out` to the input positions
/// starting at `in_start`, read contiguously across row boundaries. The
/// `excluded` outputs are the wrapped row-edge entries inside `out` whose
/// contribution must be taken back out.
struct TapSpan {
    tap: usize,
    out: core::ops::Range<usize>,
    in_start: usize,
    excluded: Vec<usize>,
}

/// Output-channel count at or below which [`Conv2d`] skips im2col.
const NARROW_OUTPUTS: usize = 4;

/// Dot product with eight independent partial sums so the loop vectorizes.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| *x * *y).sum();
    for (xa, xb) in ca.zip(cb) {
        for i in 0..8 {
            lanes[i] += xa[i] * xb[i];
        }
    }
    lanes.iter().copied().sum::<T>() + tail
}

fn init_uniform<T: Real>(len: usize, fan_in: usize, rng: &mut dyn RngCore) -> Vec<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| T::lit(rng.random_range(-bound..bound))).collect()
}

/// Same-size 3x3 convolution, weight stored `[out, in*9]`.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub(crate) in_channels: usize,
    pub(crate) out_channels: usize,
    pub(crate) weight: Vec<T>,
    pub(crate) bias: Vec<T>,
    pub(crate) grad_weight: Vec<T>,
    pub(crate) grad_bias: Vec<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut dyn RngCore) -> Self {
        let k = in_channels * 9;
        Self {
            in_channels,
            out_channels,
            weight: init_uniform(out_channels * k, k, rng),
            bias: init_uniform(out_channels, k, rng),
            grad_weight: vec![T::zero(); out_channels * k],
            grad_bias: vec![T::zero(); out_channels],
            input: None,
        }
    }

    fn grid(&self, h: usize, w: usize) -> Grid {
        Grid { channels: self.in_channels, big: (h, w), small: (h, w), stride: 1 }
    }

    /// With very few output channels the GEMM degenerates to a
    /// matrix-vector product, and shifted row updates beat im2col.
    fn is_narrow(&self) -> bool {
        self.out_channels <= NARROW_OUTPUTS
    }

    pub fn forward(&mut self, x: Tensor<T>) -> Tensor<T> {
        let &[batch, c, h, w] = x.shape() else { panic!("conv2d expects [B, C, H, W]") };
        assert_eq!(c, self.in_channels, "conv2d: channel mismatch");
        let grid = self.grid(h, w);
        if self.is_narrow() {
            let y = self.narrow_forward(&x, grid);
            self.input = Some(x);
            return y;
        }
        let hw = h * w;
        let k = self.in_channels * 9;
        let mut cols = vec![T::zero(); grid.cols_len()];
        let mut y = Tensor::zeros(&[batch, self.out_channels, h, w]);
        for b in 0..batch {
            grid.im2col(x.row(b), &mut cols);
            let out = y.row_mut(b);
            for (o, bias) in self.bias.iter().enumerate() {
                out[o * hw..(o + 1) * hw].fill(*bias);
            }
            T::gemm(
                self.out_channels,
                k,
                hw,
                T::one(),
                &self.weight,
                (k as isize, 1),
                &cols,
                (hw as isize, 1),
                T::one(),
                out,
                (hw as isize, 1),
            );
        }
        self.input = Some(x);
        y
    }

    pub fn backward(&mut self, grad: Tensor<T>, param_grads: bool) -> Tensor<T> {
        if self.is_narrow() {
            let x = self.input.take().expect("conv2d: backward before forward");
            let grid = self.grid(x.shape()[2], x.shape()[3]);
            let dx = self.narrow_backward(&x, &grad, grid, param_grads);
            self.input = Some(x);
            return dx;
        }
        let x = self.input.as_ref().expect("conv2d: backward before forward");
        let &[batch, _, h, w] = x.shape() else { unreachable!() };
        let grid = self.grid(h, w);
        let hw = h * w;
        let k = self.in_channels * 9;
        let mut cols = vec![T::zero(); grid.cols_len()];
        let mut dcols = vec![T::zero(); grid.cols_len()];
        let mut dx = Tensor::zeros(x.shape());
        for b in 0..batch {
            let dy = grad.row(b);
            if param_grads {
                grid.im2col(x.row(b), &mut cols);
                T::gemm(
                    self.out_channels,
                    hw,
                    k,
                    T::one(),
                    dy,
                    (hw as isize, 1),
                    &cols,
                    (1, hw as isize),
                    T::one(),
                    &mut self.grad_weight,
                    (k as isize, 1),
                );
                for (o, gb) in self.grad_bias.iter_mut().enumerate() {
                    *gb += dy[o * hw..(o + 1) * hw].iter().copied().sum::<T>();
                }
            }
            T::gemm(
                k,
                self.out_channels,
                hw,
                T::one(),
                &self.weight,
                (1, k as isize),
                dy,
                (hw as isize, 1),
                T::zero(),
                &mut dcols,
                (hw as isize, 1),
            );
            grid.col2im(&dcols, dx.row_mut(b));
        }
        dx
    }

    fn narrow_forward(&self, x: &Tensor<T>, grid: Grid) -> Tensor<T> {
        let &[batch, _, h, w] = x.shape() else { unreachable!() };
        let hw = h * w;
        let k = self.in_channels * 9;
        let spans = grid.tap_spans();
        let mut y = Tensor::zeros(&[batch, self.out_channels, h, w]);
        for b in 0..batch {
            let input = x.row(b);
            let out = y.row_mut(b);
            for o in 0..self.out_channels {
                let plane = &mut out[o * hw..(o + 1) * hw];
                plane.fill(self.bias[o]);
                for c in 0..self.in_channels {
                    let src = &input[c * hw..(c + 1) * hw];
                    let taps = &self.weight[o * k + c * 9..o * k + c * 9 + 9];
                    for span in &spans {
                        let wt = taps[span.tap];
                        let shifted = &src[span.in_start..span.in_start + span.out.len()];
                        for (d, s) in plane[span.out.clone()].iter_mut().zip(shifted) {
                            *d += wt * *s;
                        }
                        for &p in &span.excluded {
                            plane[p] -= wt * src[p - span.out.start + span.in_start];
                        }
                    }
                }
            }
        }
        y
    }

    fn narrow_backward(&mut self, x: &Tensor<T>, grad: &Tensor<T>, grid: Grid, param_grads: bool) -> Tensor<T> {
        let &[batch, _, h, w] = x.shape() else { unreachable!() };
        let hw = h * w;
        let k = self.in_channels * 9;
        let spans = grid.tap_spans();
        let mut dx = Tensor::zeros(x.shape());
        for b in 0..batch {
            let input = x.row(b);
            let dy = grad.row(b);
            let dxb = dx.row_mut(b);
            for o in 0..self.out_channels {
                let g = &dy[o * hw..(o + 1) * hw];
                if param_grads {
                    self.grad_bias[o] += g.iter().copied().sum::<T>();
                }
                for c in 0..self.in_channels {
                    let base = o * k + c * 9;
                    let src = &input[c * hw..(c + 1) * hw];
                    let dst = &mut dxb[c * hw..(c + 1) * hw];
                    for span in &spans {
                        let wt = self.weight[base + span.tap];
                        let gs = &g[span.out.clone()];
                        let len = gs.len();
                        for (d, gv) in dst[span.in_start..span.in_start + len].iter_mut().zip(gs) {
                            *d += wt * *gv;
                        }
                        for &p in &span.excluded {
                            dst[p - span.out.start + span.in_start] -= wt * g[p];
                        }
                        if param_grads {
                            let mut acc = dot(gs, &src[span.in_start..span.in_start + len]);
                            for &p in &span.excluded {
                                acc -= g[p] * src[p - span.out.start + span.in_start];
                            }
                            self.grad_weight[base + span.tap] += acc;
                        }
                    }
                }
            }
        }
        dx
    }
}

/// 3x3 transposed convolution with stride 2, padding 1 and output padding 1:
/// doubles both spatial dimensions. Weight stored `[in, out*9]`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<T> {
    pub(crate) in_channels: usize,
    pub(crate) out_channels: usize,
    pub(crate) weight: Vec<T>,
    pub(crate) bias: Vec<T>,
    pub(crate) grad_weight: Vec<T>,
    pub(crate) grad_bias: Vec<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> ConvTranspose2d<T> {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut dyn RngCore) -> Self {
        let fan_in = in_channels * 9;
        Self {
            in_channels,
            out_channels,
            weight: init_uniform(in_channels * out_channels * 9, fan_in, rng),
            bias: init_uniform(out_channels, fan_in, rng),
            grad_weight: vec![T::zero(); in_channels * out_channels * 9],
            grad_bias: vec![T::zero(); out_channels],
            input: None,
        }
    }

    fn grid(&self, h: usize, w: usize) -> Grid {
        Grid { channels: self.out_channels, big: (2 * h, 2 * w), small: (h, w), stride: 2 }
    }

    pub fn forward(&mut self, x: Tensor<T>) -> Tensor<T> {
        let &[batch, c, h, w] = x.shape() else { panic!("conv_transpose2d expects [B, C, H, W]") };
        assert_eq!(c, self.in_channels, "conv_transpose2d: channel mismatch");
        let grid = self.grid(h, w);
        let hw = h * w;
        let k = self.out_channels * 9;
        let big = 4 * hw;
        let mut cols = vec![T::zero(); grid.cols_len()];
        let mut y = Tensor::zeros(&[batch, self.out_channels, 2 * h, 2 * w]);
        for b in 0..batch {
            T::gemm(
                k,
                self.in_channels,
                hw,
                T::one(),
                &self.weight,
                (1, k as isize),
                x.row(b),
                (hw as isize, 1),
                T::zero(),
                &mut cols,
                (hw as isize, 1),
            );
            let out = y.row_mut(b);
            for (o, bias) in self.bias.iter().enumerate() {
                out[o * big..(o + 1) * big].fill(*bias);
            }
            grid.col2im(&cols, out);
        }
        self.input = Some(x);
        y
    }

    pub fn backward(&mut self, grad: Tensor<T>, param_grads: bool) -> Tensor<T> {
        let x = self.input.as_ref().expect("conv_transpose2d: backward before forward");
        let &[batch, _, h, w] = x.shape() else { unreachable!() };
        let grid = self.grid(h, w);
        let hw = h * w;
        let k = self.out_channels * 9;
        let big = 4 * hw;
        let mut dcols = vec![T::zero(); grid.cols_len()];
        let mut dx = Tensor::zeros(x.shape());
        for b in 0..batch {
            let dy = grad.row(b);
            grid.im2col(dy, &mut dcols);
            T::gemm(
                self.in_channels,
                k,
                hw,
                T::one(),
                &self.weight,
                (k as isize, 1),
                &dcols,
                (hw as isize, 1),
                T::zero(),
                dx.row_mut(b),
                (hw as isize, 1),
            );
            if param_grads {
                T::gemm(
                    self.in_channels,
                    hw,
                    k,
                    T::one(),
                    x.row(b),
                    (hw as isize, 1),
                    &dcols,
                    (1, hw as isize),
                    T::one(),
                    &mut self.grad_weight,
                    (k as isize, 1),
                );
                for (o, gb) in self.grad_bias.iter_mut().enumerate() {
                    *gb += dy[o * big..(o + 1) * big].iter().copied().sum::<T>();
                }
            }
        }
        dx
    }
}
