//! Weighted least-squares polynomial fit of the spectral phase.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::IntensityGrid2D;

/// Coefficient of `x^p y^q`, `x = omega_s - omega_s0`, `y = omega_i - omega_i0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub p: u32,
    pub q: u32,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub order: u32,
    /// In the order 1, x, y, x², xy, y², x³, x²y, xy², y³ (truncated to `order`).
    pub coefficients: Vec<PolyTerm>,
    /// fs².
    pub chirp_s: f64,
    /// fs².
    pub chirp_i: f64,
    /// Coefficient of `x y`, fs².
    pub cross_term: f64,
    /// Unweighted RMS residual over the mask, rad.
    pub residual_rms: f64,
    pub mask_pixel_count: usize,
    pub condition_number: f64,
}

impl PhaseFit {
    pub fn coefficient(&self, p: u32, q: u32) -> Option<f64> {
        self.coefficients.iter().find(|t| t.p == p && t.q == q).map(|t| t.value)
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        self.coefficients
            .iter()
            .map(|t| t.value * x.powi(t.p as i32) * y.powi(t.q as i32))
            .sum()
    }
}

/// Smallest number of masked pixels accepted for a fit.
pub const MIN_FIT_PIXELS: usize = 10;

/// Design matrices with condition number above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

pub fn monomials(order: u32) -> Vec<(u32, u32)> {
    (0..=order).flat_map(|d| (0..=d).map(move |q| (d - q, q))).collect()
}

/// Fits all monomials of total degree `<= order` (2 or 3) to the masked
/// unwrapped phase, weighting each pixel by the intensity.
pub fn fit_phase_poly(
    phase_unwrapped: &Array2<f64>,
    weights: &IntensityGrid2D,
    mask: &Array2<bool>,
    centers: (f64, f64),
    order: u32,
) -> Result<PhaseFit> {
    if !(2..=3).contains(&order) {
        return Err(Error::Parameter(format!("fit order must be 2 or 3, got {order}")));
    }
    if phase_unwrapped.dim() != weights.values.dim() || mask.dim() != weights.values.dim() {
        return Err(Error::Input(
            "phase, weight and mask grids must have equal shapes".into(),
        ));
    }
    let terms = monomials(order);
    let xs: Vec<f64> = weights.axis_s.coordinates().iter().map(|w| w - centers.0).collect();
    let ys: Vec<f64> = weights.axis_i.coordinates().iter().map(|w| w - centers.1).collect();
    let pixels: Vec<(usize, usize)> = mask
        .indexed_iter()
        .filter(|(p, &m)| m && weights.values[*p] > 0.0)
        .map(|(p, _)| p)
        .collect();
    let count = pixels.len();
    if count < MIN_FIT_PIXELS.max(terms.len()) {
        return Err(Error::Input(format!(
            "phase fit needs at least {} weighted mask pixels, got {count}",
            MIN_FIT_PIXELS.max(terms.len())
        )));
    }
    // scale coordinates to O(1) so the design matrix is well conditioned
    let sx = pixels
        .iter()
        .map(|p| xs[p.0].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let sy = pixels
        .iter()
        .map(|p| ys[p.1].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let w_peak = pixels.iter().map(|p| weights.values[*p]).fold(0.0, f64::max);
    let mut a = DMatrix::<f64>::zeros(count, terms.len());
    let mut b = DVector::<f64>::zeros(count);
    for (r, p) in pixels.iter().enumerate() {
        let sw = (weights.values[*p] / w_peak).sqrt();
        let (u, v) = (xs[p.0] / sx, ys[p.1] / sy);
        for (c, &(pp, qq)) in terms.iter().enumerate() {
            a[(r, c)] = sw * u.powi(pp as i32) * v.powi(qq as i32);
        }
        b[r] = sw * phase_unwrapped[*p];
    }
    let svd = a.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    let sol = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Input(format!("least-squares solve failed: {e}")))?;
    let coefficients: Vec<PolyTerm> = terms
        .iter()
        .zip(sol.iter())
        .map(|(&(p, q), &c)| PolyTerm {
            p,
            q,
            value: c / (sx.powi(p as i32) * sy.powi(q as i32)),
        })
        .collect();
    let mut fit = PhaseFit {
        order,
        coefficients,
        chirp_s: 0.0,
        chirp_i: 0.0,
        cross_term: 0.0,
        residual_rms: 0.0,
        mask_pixel_count: count,
        condition_number: condition,
    };
    fit.chirp_s = fit.coefficient(2, 0).unwrap_or(0.0);
    fit.chirp_i = fit.coefficient(0, 2).unwrap_or(0.0);
    fit.cross_term = fit.coefficient(1, 1).unwrap_or(0.0);
    let sq: f64 = pixels
        .iter()
        .map(|p| (phase_unwrapped[*p] - fit.evaluate(xs[p.0], ys[p.1])).powi(2))
        .sum();
    fit.residual_rms = (sq / count as f64).sqrt();
    Ok(fit)
}
