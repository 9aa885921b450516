//! Model two-photon states: correlated Gaussian joint spectral amplitudes
//! with quadratic spectral phase, plus their closed-form diagnostics.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, ComplexGrid2D, Domain, Photon};
use crate::units::wavelength_nm_to_omega;

/// Parameters of the correlated Gaussian state.
///
/// `sigma_s`/`sigma_i` are the marginal standard deviations of the joint
/// spectral *intensity* `|F|^2` (rad/fs), `rho` its correlation coefficient,
/// `chirp_*` the quadratic spectral phase coefficients in fs².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianStateParams {
    pub sigma_s: f64,
    pub sigma_i: f64,
    pub rho: f64,
    pub center_s: f64,
    pub center_i: f64,
    #[serde(default)]
    pub chirp_s: f64,
    #[serde(default)]
    pub chirp_i: f64,
}

impl Default for GaussianStateParams {
    fn default() -> Self {
        Self {
            sigma_s: 0.01,
            sigma_i: 0.01,
            rho: -0.95,
            center_s: wavelength_nm_to_omega(823.0),
            center_i: wavelength_nm_to_omega(732.0),
            chirp_s: 0.0,
            chirp_i: 0.0,
        }
    }
}

impl GaussianStateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_s > 0.0 && self.sigma_i > 0.0) {
            return Err(Error::Parameter("marginal bandwidths must be positive".into()));
        }
        check_rho(self.rho)?;
        for v in [self.center_s, self.center_i, self.chirp_s, self.chirp_i] {
            if !v.is_finite() {
                return Err(Error::Parameter("state parameters must be finite".into()));
            }
        }
        Ok(())
    }
}

/// The `state.json` block: parameters plus grid size and span.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateConfig {
    #[serde(flatten)]
    pub params: GaussianStateParams,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_span")]
    pub span_sigmas: f64,
}

fn default_n() -> usize {
    64
}

fn default_span() -> f64 {
    8.0
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            params: GaussianStateParams::default(),
            n: default_n(),
            span_sigmas: default_span(),
        }
    }
}

impl StateConfig {
    /// The chirped state on its frequency grid.
    pub fn generate(&self) -> Result<ComplexGrid2D> {
        let g = gaussian_jsa(&self.params, self.n, self.span_sigmas)?;
        apply_chirp(&g, self.params.chirp_s, self.params.chirp_i)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "correlation rho = {rho} must satisfy |rho| < 1"
        )))
    }
}

/// Evaluates the normalized correlated Gaussian JSA on an `n x n` grid.
///
/// Each axis covers a total width of `span_sigmas` marginal standard
/// deviations around its center. The amplitude is real and positive.
pub fn gaussian_jsa(p: &GaussianStateParams, n: usize, span_sigmas: f64) -> Result<ComplexGrid2D> {
    p.validate()?;
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::Parameter(format!("grid size {n} must be a power of two >= 16")));
    }
    if !(span_sigmas >= 6.0) {
        return Err(Error::Parameter(format!("span_sigmas {span_sigmas} must be >= 6")));
    }
    let axis_s = Axis::new(
        Domain::Frequency,
        Photon::Signal,
        p.center_s,
        span_sigmas * p.sigma_s / n as f64,
        n,
    )?;
    let axis_i = Axis::new(
        Domain::Frequency,
        Photon::Idler,
        p.center_i,
        span_sigmas * p.sigma_i / n as f64,
        n,
    )?;
    let one_minus = 1.0 - p.rho * p.rho;
    let prefactor = 1.0 / ((2.0 * PI * p.sigma_s * p.sigma_i).sqrt() * one_minus.powf(0.25));
    let values = Array2::from_shape_fn((n, n), |(s, i)| {
        let x = axis_s.offset(s);
        let y = axis_i.offset(i);
        let q = x * x / (2.0 * p.sigma_s * p.sigma_s) + y * y / (2.0 * p.sigma_i * p.sigma_i)
            - p.rho * x * y / (p.sigma_s * p.sigma_i);
        Complex64::new(prefactor * (-q / (2.0 * one_minus)).exp(), 0.0)
    });
    ComplexGrid2D::new(axis_s, axis_i, values)
}

/// Multiplies by `exp(i A_s (w_s - w_s0)^2 + i A_i (w_i - w_i0)^2)`, with
/// the axis centers as `w_s0`, `w_i0`.
pub fn apply_chirp(g: &ComplexGrid2D, chirp_s: f64, chirp_i: f64) -> Result<ComplexGrid2D> {
    if g.axis_s.domain != Domain::Frequency || g.axis_i.domain != Domain::Frequency {
        return Err(Error::DomainMismatch("apply_chirp needs both axes in frequency".into()));
    }
    let phase_s: Vec<Complex64> = g
        .axis_s
        .offsets()
        .into_iter()
        .map(|d| Complex64::from_polar(1.0, chirp_s * d * d))
        .collect();
    let phase_i: Vec<Complex64> = g
        .axis_i
        .offsets()
        .into_iter()
        .map(|d| Complex64::from_polar(1.0, chirp_i * d * d))
        .collect();
    let mut out = g.clone();
    for ((s, i), v) in out.values.indexed_iter_mut() {
        *v = *v * phase_s[s] * phase_i[i];
    }
    Ok(out)
}

/// Purity `sqrt(1 - rho^2)` of either photon's reduced state.
pub fn schmidt_purity(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok((1.0 - rho * rho).sqrt())
}

/// `Delta(w_s + w_i) * Delta(t_s - t_i)` of the chirpless Gaussian state with
/// equal marginal bandwidths.
pub fn tbp_gaussian(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(((1.0 + rho) / (1.0 - rho)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::total_power;
    use approx::assert_relative_eq;

    fn params(rho: f64) -> GaussianStateParams {
        GaussianStateParams {
            rho,
            ..GaussianStateParams::default()
        }
    }

    /// Intensity-weighted (var_s, var_i, cov) in offset coordinates.
    fn moments(g: &ComplexGrid2D) -> (f64, f64, f64) {
        let xs = g.axis_s.offsets();
        let ys = g.axis_i.offsets();
        let (mut w, mut mx, mut my) = (0.0, 0.0, 0.0);
        for ((s, i), v) in g.values.indexed_iter() {
            let p = v.norm_sqr();
            w += p;
            mx += p * xs[s];
            my += p * ys[i];
        }
        mx /= w;
        my /= w;
        let (mut vx, mut vy, mut c) = (0.0, 0.0, 0.0);
        for ((s, i), v) in g.values.indexed_iter() {
            let p = v.norm_sqr() / w;
            vx += p * (xs[s] - mx).powi(2);
            vy += p * (ys[i] - my).powi(2);
            c += p * (xs[s] - mx) * (ys[i] - my);
        }
        (vx, vy, c)
    }

    #[test]
    fn center_value_of_separable_state() {
        let sigma = 0.01;
        let p = GaussianStateParams {
            rho: 0.0,
            sigma_s: sigma,
            sigma_i: sigma,
            ..GaussianStateParams::default()
        };
        let g = gaussian_jsa(&p, 64, 8.0).unwrap();
        let v = g.values[[32, 32]];
        assert_relative_eq!(v.re, 1.0 / (2.0 * PI * sigma * sigma).sqrt(), max_relative = 1e-14);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn normalized_for_any_correlation() {
        for rho in [-0.95, -0.9, -0.5, 0.0, 0.3, 0.8] {
            for (ss, si) in [(0.01, 0.01), (0.004, 0.012)] {
                let p = GaussianStateParams {
                    rho,
                    sigma_s: ss,
                    sigma_i: si,
                    ..GaussianStateParams::default()
                };
                let g = gaussian_jsa(&p, 64, 8.0).unwrap();
                assert!((total_power(&g) - 1.0).abs() < 1e-3, "rho={rho}");
            }
        }
    }

    #[test]
    fn intensity_correlation_matches_rho() {
        let g = gaussian_jsa(&params(-0.9), 64, 10.0).unwrap();
        let (vx, vy, c) = moments(&g);
        assert!((c / (vx * vy).sqrt() + 0.9).abs() < 0.01);
    }

    #[test]
    fn positive_real_before_chirp() {
        let g = gaussian_jsa(&params(-0.5), 32, 8.0).unwrap();
        assert!(g.values.iter().all(|v| v.re > 0.0 && v.im == 0.0));
    }

    #[test]
    fn anti_diagonal_width() {
        let sigma = 0.01;
        for rho in [-0.9, -0.5, -0.2] {
            let g = gaussian_jsa(&params(rho), 64, 10.0).unwrap();
            let (vx, vy, c) = moments(&g);
            let sd_sum = (vx + vy + 2.0 * c).sqrt();
            let expected = sigma * (2.0 * (1.0 + rho)).sqrt();
            assert!((sd_sum / expected - 1.0).abs() < 0.02, "rho={rho}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gaussian_jsa(&params(1.0), 64, 8.0).is_err());
        assert!(gaussian_jsa(&params(-1.2), 64, 8.0).is_err());
        assert!(gaussian_jsa(&params(0.0), 48, 8.0).is_err());
        assert!(gaussian_jsa(&params(0.0), 8, 8.0).is_err());
        assert!(gaussian_jsa(&params(0.0), 64, 5.0).is_err());
        assert!(schmidt_purity(1.0).is_err());
        assert!(tbp_gaussian(-1.0).is_err());
    }

    #[test]
    fn chirp_is_pure_phase() {
        let g = gaussian_jsa(&params(-0.9), 32, 8.0).unwrap();
        let same = apply_chirp(&g, 0.0, 0.0).unwrap();
        assert_eq!(same, g);
        let c = apply_chirp(&g, -36000.0, 43000.0).unwrap();
        for (a, b) in c.values.iter().zip(g.values.iter()) {
            assert_relative_eq!(a.norm(), b.norm(), max_relative = 1e-14);
        }
    }

    #[test]
    fn chirp_phase_at_offset() {
        // A_s = 26000 fs², delta = 0.005 rad/fs -> 0.65 rad
        let sigma = 0.005;
        let p = GaussianStateParams {
            sigma_s: sigma,
            sigma_i: sigma,
            rho: 0.0,
            ..GaussianStateParams::default()
        };
        // step = 8 sigma / 16 = 0.0025, so delta = 0.005 is two samples off center.
        let g = gaussian_jsa(&p, 16, 8.0).unwrap();
        let c = apply_chirp(&g, 26000.0, 0.0).unwrap();
        let dphi = c.values[[10, 8]].arg() - c.values[[8, 8]].arg();
        assert_relative_eq!(dphi, 0.65, max_relative = 1e-12);
    }

    #[test]
    fn chirp_order_irrelevant() {
        let g = gaussian_jsa(&params(-0.7), 32, 8.0).unwrap();
        let a = apply_chirp(&apply_chirp(&g, 12000.0, 0.0).unwrap(), 0.0, -7000.0).unwrap();
        let b = apply_chirp(&apply_chirp(&g, 0.0, -7000.0).unwrap(), 12000.0, 0.0).unwrap();
        // identical up to the last bit of the complex products
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((x - y).norm() <= 4.0 * f64::EPSILON * x.norm());
        }
    }

    #[test]
    fn chirp_needs_frequency_axes() {
        let g = gaussian_jsa(&params(0.0), 16, 8.0).unwrap();
        let t = crate::grid::transform_photon(&g, Photon::Idler, crate::grid::Direction::ToTime).unwrap();
        assert!(matches!(apply_chirp(&t, 1.0, 1.0), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn closed_form_diagnostics() {
        assert_relative_eq!(schmidt_purity(0.0).unwrap(), 1.0);
        assert_relative_eq!(schmidt_purity(-0.8).unwrap(), 0.6, max_relative = 1e-15);
        assert_relative_eq!(schmidt_purity(0.6).unwrap(), 0.8, max_relative = 1e-15);
        assert_relative_eq!(tbp_gaussian(0.0).unwrap(), 1.0);
        assert_relative_eq!(tbp_gaussian(-0.8).unwrap(), (0.2f64 / 1.8).sqrt(), max_relative = 1e-15);
        assert!((tbp_gaussian(-0.8).unwrap() - 0.3333).abs() < 1e-4);
    }
}
