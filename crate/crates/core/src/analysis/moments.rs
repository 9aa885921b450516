//! Intensity moments and the time-bandwidth entanglement witness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, IntensityGrid2D};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// s.d. of `omega_s + omega_i`, rad/fs.
    pub sigma_sum_freq: f64,
    /// s.d. of `t_s - t_i`, fs.
    pub sigma_diff_time: f64,
    pub product: f64,
    /// `product < 1 - WITNESS_TOLERANCE`.
    pub entangled: bool,
}

/// Weighted mean and covariance of the two grid coordinates (axis offsets).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments2D {
    pub mean: [f64; 2],
    /// `[[var_s, cov], [cov, var_i]]`.
    pub cov: [[f64; 2]; 2],
}

pub fn moments(g: &IntensityGrid2D) -> Result<Moments2D> {
    if g.values.iter().any(|&v| v < 0.0) {
        return Err(Error::Input("moments need a nonnegative intensity".into()));
    }
    let total = g.values.sum();
    if !(total > 0.0) {
        return Err(Error::Input("moments of an all-zero intensity are undefined".into()));
    }
    let xs = g.axis_s.offsets();
    let ys = g.axis_i.offsets();
    let (mut mx, mut my) = (0.0, 0.0);
    for ((a, b), &v) in g.values.indexed_iter() {
        mx += v * xs[a];
        my += v * ys[b];
    }
    mx /= total;
    my /= total;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for ((a, b), &v) in g.values.indexed_iter() {
        let (dx, dy) = (xs[a] - mx, ys[b] - my);
        sxx += v * dx * dx;
        sxy += v * dx * dy;
        syy += v * dy * dy;
    }
    Ok(Moments2D {
        mean: [mx, my],
        cov: [[sxx / total, sxy / total], [sxy / total, syy / total]],
    })
}

/// Products within this distance below 1 are not counted as entangled, so
/// a separable state sampled on a finite grid does not trip the witness.
pub const WITNESS_TOLERANCE: f64 = 1e-6;

/// Witness from the spectral and temporal joint intensities.
pub fn tbp_numeric(i_ww: &IntensityGrid2D, i_tt: &IntensityGrid2D) -> Result<WitnessReport> {
    if i_ww.domains() != (Domain::Frequency, Domain::Frequency) || i_tt.domains() != (Domain::Time, Domain::Time) {
        return Err(Error::DomainMismatch(
            "witness needs a (frequency, frequency) and a (time, time) grid".into(),
        ));
    }
    let w = moments(i_ww)?;
    let t = moments(i_tt)?;
    // var(x + y) and var(x - y)
    let sum_var = w.cov[0][0] + w.cov[1][1] + 2.0 * w.cov[0][1];
    let diff_var = t.cov[0][0] + t.cov[1][1] - 2.0 * t.cov[0][1];
    let sigma_sum_freq = sum_var.max(0.0).sqrt();
    let sigma_diff_time = diff_var.max(0.0).sqrt();
    let product = sigma_sum_freq * sigma_diff_time;
    Ok(WitnessReport {
        sigma_sum_freq,
        sigma_diff_time,
        product,
        entangled: product < 1.0 - WITNESS_TOLERANCE,
    })
}
