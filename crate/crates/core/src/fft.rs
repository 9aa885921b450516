//! Centered discrete Fourier transforms.
//!
//! Sample `k` of an `n`-point axis sits at offset `k - n/2` from the axis
//! center, so the transforms here compute
//!
//! ```text
//! X[m] = sum_k x[k] exp(-2 pi i (k - c)(m - c) / n),   c = n / 2
//! ```
//!
//! without explicit shifting: the centering phases are folded into pre- and
//! post-multiplication vectors around a plain FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis as NdAxis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// `exp(2 pi i * num / n)` with the numerator reduced modulo `n` first.
fn unit_phase(num: usize, n: usize) -> Complex64 {
    let r = (num % n) as f64 / n as f64;
    Complex64::from_polar(1.0, 2.0 * PI * r)
}

pub(crate) struct CenteredDft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
}

impl CenteredDft {
    pub(crate) fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        let c = n / 2;
        let pre = (0..n).map(|k| unit_phase(k * c, n)).collect();
        // exp(2 pi i m c / n) * exp(-2 pi i c^2 / n)
        let shift = unit_phase(c * c, n).conj();
        let post = (0..n).map(|m| unit_phase(m * c, n) * shift).collect();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            pre,
            post,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    /// Unnormalized centered transform with kernel `exp(-i ...)`.
    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        for (x, p) in buf.iter_mut().zip(&self.pre) {
            *x *= p;
        }
        self.forward.process(buf);
        for (x, p) in buf.iter_mut().zip(&self.post) {
            *x *= p;
        }
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.forward.get_inplace_scratch_len()
    }

    /// As [`Self::forward`] with caller-owned FFT scratch of at least
    /// [`Self::scratch_len`] elements.
    pub(crate) fn forward_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        for (x, p) in buf.iter_mut().zip(&self.pre) {
            *x *= p;
        }
        self.forward.process_with_scratch(buf, scratch);
        for (x, p) in buf.iter_mut().zip(&self.post) {
            *x *= p;
        }
    }

    /// Unnormalized centered transform with kernel `exp(+i ...)`.
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        for (x, p) in buf.iter_mut().zip(&self.pre) {
            *x *= p.conj();
        }
        self.inverse.process(buf);
        for (x, p) in buf.iter_mut().zip(&self.post) {
            *x *= p.conj();
        }
    }

    /// Transforms every lane of `values` along `axis` and multiplies by `scale`.
    pub(crate) fn apply_along(
        &self,
        values: &mut Array2<Complex64>,
        axis: usize,
        inverse: bool,
        scale: f64,
        scratch: &mut Vec<Complex64>,
    ) {
        scratch.resize(self.n, Complex64::new(0.0, 0.0));
        for mut lane in values.lanes_mut(NdAxis(axis)) {
            for (s, v) in scratch.iter_mut().zip(lane.iter()) {
                *s = *v;
            }
            if inverse {
                self.inverse(scratch);
            } else {
                self.forward(scratch);
            }
            for (v, s) in lane.iter_mut().zip(scratch.iter()) {
                *v = *s * scale;
            }
        }
    }
}
