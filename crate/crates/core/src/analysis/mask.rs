//! Elliptical intensity masks from second moments.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::moments::moments;
use crate::error::{Error, Result};
use crate::grid::IntensityGrid2D;

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaMask {
    pub mask: Array2<bool>,
    pub info: MaskInfo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskInfo {
    pub n_sigma: f64,
    pub pixel_count: usize,
    /// The covariance was singular and a per-axis ellipse was used instead.
    pub degenerate: bool,
}

impl SigmaMask {
    pub fn count(&self) -> usize {
        self.info.pixel_count
    }
}

/// Pixels whose Mahalanobis distance from the intensity centroid is at
/// most `n_sigma`.
pub fn sigma_mask(i: &IntensityGrid2D, n_sigma: f64) -> Result<SigmaMask> {
    if !(n_sigma > 0.0) {
        return Err(Error::Parameter("n_sigma must be > 0".into()));
    }
    let m = moments(i)?;
    let [[sxx, sxy], [_, syy]] = m.cov;
    let det = sxx * syy - sxy * sxy;
    let degenerate = !(det > 1e-10 * sxx * syy) || !(sxx > 0.0 && syy > 0.0);
    // per-axis fallback with variances floored at a quarter pixel
    let (a, b, c) = if degenerate {
        let vx = sxx.max(0.25 * i.axis_s.step * i.axis_s.step);
        let vy = syy.max(0.25 * i.axis_i.step * i.axis_i.step);
        (1.0 / vx, 0.0, 1.0 / vy)
    } else {
        (syy / det, -sxy / det, sxx / det)
    };
    let xs = i.axis_s.offsets();
    let ys = i.axis_i.offsets();
    let limit = n_sigma * n_sigma;
    let mask = Array2::from_shape_fn(i.values.dim(), |(p, q)| {
        let (dx, dy) = (xs[p] - m.mean[0], ys[q] - m.mean[1]);
        a * dx * dx + 2.0 * b * dx * dy + c * dy * dy <= limit
    });
    let pixel_count = mask.iter().filter(|&&v| v).count();
    Ok(SigmaMask {
        mask,
        info: MaskInfo {
            n_sigma,
            pixel_count,
            degenerate,
        },
    })
}
