//! Turns raw correlation histograms into retrieval constraints: resampling
//! onto a common square grid, corner background subtraction and Wiener
//! deconvolution with a top-hat low-pass.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::CenteredDft;
use crate::grid::{conjugate_axis, Axis, Domain, IntensityGrid2D, Photon};
use crate::retrieve::{MeasurementSet, Plane};
use crate::units::wavelength_width_to_omega;

/// Gaussian intensity response s.d. per photon: `[signal, idler]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstrumentResponse {
    /// Spectrometer response, rad/fs.
    pub frequency_sigma: [f64; 2],
    /// Gate response, fs.
    pub time_sigma: [f64; 2],
}

impl Default for InstrumentResponse {
    /// 0.1 nm spectral resolution at 823/732 nm and a 130 fs gate, both
    /// read as standard deviations.
    fn default() -> Self {
        Self {
            frequency_sigma: [
                wavelength_width_to_omega(0.1, 823.0),
                wavelength_width_to_omega(0.1, 732.0),
            ],
            time_sigma: [130.0, 130.0],
        }
    }
}

impl InstrumentResponse {
    pub const NONE: InstrumentResponse = InstrumentResponse {
        frequency_sigma: [0.0, 0.0],
        time_sigma: [0.0, 0.0],
    };

    pub fn sigma(&self, domain: Domain, photon: Photon) -> f64 {
        let k = match photon {
            Photon::Signal => 0,
            Photon::Idler => 1,
        };
        match domain {
            Domain::Frequency => self.frequency_sigma[k],
            Domain::Time => self.time_sigma[k],
        }
    }

    /// Response s.d. in pixels of `axis`.
    pub fn sigma_px(&self, axis: &Axis) -> f64 {
        self.sigma(axis.domain, axis.photon) / axis.step
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub grid_n: usize,
    pub alpha: f64,
    pub rho_lp: f64,
    pub response: InstrumentResponse,
    pub corner_fraction: f64,
    pub corner_suppression: bool,
    /// Permits `alpha` outside [0.05, 0.2] and `rho_lp` outside [0.8, 1].
    pub allow_out_of_range: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            grid_n: 64,
            alpha: 0.1,
            rho_lp: 0.9,
            response: InstrumentResponse::default(),
            corner_fraction: 0.0625,
            corner_suppression: true,
            allow_out_of_range: false,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 16 {
            return Err(Error::Parameter("grid_n must be >= 16".into()));
        }
        if !(self.alpha >= 0.0) || !(self.rho_lp > 0.0) {
            return Err(Error::Parameter("alpha must be >= 0 and rho_lp > 0".into()));
        }
        if !self.allow_out_of_range {
            if !(0.05..=0.2).contains(&self.alpha) {
                return Err(Error::Parameter(format!(
                    "alpha = {} outside [0.05, 0.2]; set allow_out_of_range to override",
                    self.alpha
                )));
            }
            if !(0.8..=1.0).contains(&self.rho_lp) {
                return Err(Error::Parameter(format!(
                    "rho_lp = {} outside [0.8, 1]; set allow_out_of_range to override",
                    self.rho_lp
                )));
            }
        }
        if !(self.corner_fraction > 0.0 && self.corner_fraction <= 0.25) {
            return Err(Error::Parameter("corner_fraction must be in (0, 0.25]".into()));
        }
        let r = self.response;
        if r.frequency_sigma.iter().chain(&r.time_sigma).any(|s| !(*s >= 0.0)) {
            return Err(Error::Parameter("instrument response widths must be >= 0".into()));
        }
        Ok(())
    }
}

/// One axis of a raw histogram: arbitrary strictly monotone sample positions.
#[derive(Clone, Debug, PartialEq)]
pub struct RawAxis {
    pub domain: Domain,
    pub photon: Photon,
    pub coords: Vec<f64>,
    pub conjugate_center: f64,
}

impl RawAxis {
    pub fn from_axis(a: &Axis) -> Self {
        Self {
            domain: a.domain,
            photon: a.photon,
            coords: a.coordinates(),
            conjugate_center: a.conjugate_center,
        }
    }
}

/// A raw rectangular histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct RawGrid {
    pub axis_s: RawAxis,
    pub axis_i: RawAxis,
    pub values: Array2<f64>,
}

impl From<&IntensityGrid2D> for RawGrid {
    fn from(g: &IntensityGrid2D) -> Self {
        Self {
            axis_s: RawAxis::from_axis(&g.axis_s),
            axis_i: RawAxis::from_axis(&g.axis_i),
            values: g.values.clone(),
        }
    }
}

/// Sample positions as `(coordinate, index)` in increasing order.
fn sorted_coords(c: &[f64]) -> Result<Vec<f64>> {
    if c.len() < 2 {
        return Err(Error::Input("raw axis needs at least two samples".into()));
    }
    let inc = c.windows(2).all(|w| w[1] > w[0]);
    let dec = c.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("raw axis is not strictly monotone".into()));
    }
    Ok(c.to_vec())
}

/// Fractional index of `x` in monotone `c`, or `None` outside its range.
fn locate(c: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = c.len();
    let increasing = c[1] > c[0];
    let (lo, hi) = if increasing { (c[0], c[n - 1]) } else { (c[n - 1], c[0]) };
    let tol = 1e-12 * (hi - lo);
    if x < lo - tol || x > hi + tol {
        return None;
    }
    // first index whose coordinate passes x
    let k = if increasing {
        c.partition_point(|&v| v <= x)
    } else {
        c.partition_point(|&v| v >= x)
    };
    let k = k.clamp(1, n - 1);
    let (a, b) = (c[k - 1], c[k]);
    let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
    Some((k - 1, t))
}

fn bilinear(values: &Array2<f64>, cs: &[f64], ci: &[f64], targets_s: &[f64], targets_i: &[f64]) -> Array2<f64> {
    let ls: Vec<_> = targets_s.iter().map(|&x| locate(cs, x)).collect();
    let li: Vec<_> = targets_i.iter().map(|&y| locate(ci, y)).collect();
    let mut out = Array2::zeros((targets_s.len(), targets_i.len()));
    for (a, la) in ls.iter().enumerate() {
        let Some((ks, ts)) = *la else { continue };
        for (b, lb) in li.iter().enumerate() {
            let Some((ki, ti)) = *lb else { continue };
            let v00 = values[[ks, ki]];
            let v01 = values[[ks, ki + 1]];
            let v10 = values[[ks + 1, ki]];
            let v11 = values[[ks + 1, ki + 1]];
            // exact at nodes: skip weights that are zero
            let mut v = (1.0 - ts) * (1.0 - ti) * v00;
            if ti > 0.0 {
                v += (1.0 - ts) * ti * v01;
            }
            if ts > 0.0 {
                v += ts * (1.0 - ti) * v10;
                if ti > 0.0 {
                    v += ts * ti * v11;
                }
            }
            out[[a, b]] = v;
        }
    }
    out
}

fn bbox_axis(raw: &RawAxis, n: usize) -> Result<Axis> {
    let c = sorted_coords(&raw.coords)?;
    let (lo, hi) = (c[0].min(c[c.len() - 1]), c[0].max(c[c.len() - 1]));
    let step = (hi - lo) / (n - 1) as f64;
    let center = lo + (n / 2) as f64 * step;
    Ok(Axis::new(raw.domain, raw.photon, center, step, n)?.with_conjugate_center(raw.conjugate_center))
}

/// Bilinear interpolation onto an `n x n` grid spanning the input's
/// bounding box.
pub fn interpolate_to_grid(raw: &RawGrid, n: usize) -> Result<IntensityGrid2D> {
    if n < 16 {
        return Err(Error::Parameter("interpolation grid must be at least 16 points".into()));
    }
    if raw.values.dim() != (raw.axis_s.coords.len(), raw.axis_i.coords.len()) {
        return Err(Error::Input("raw values do not match their axes".into()));
    }
    let axis_s = bbox_axis(&raw.axis_s, n)?;
    let axis_i = bbox_axis(&raw.axis_i, n)?;
    resample_raw(raw, &axis_s, &axis_i)
}

fn resample_raw(raw: &RawGrid, axis_s: &Axis, axis_i: &Axis) -> Result<IntensityGrid2D> {
    let cs = sorted_coords(&raw.axis_s.coords)?;
    let ci = sorted_coords(&raw.axis_i.coords)?;
    let values = bilinear(&raw.values, &cs, &ci, &axis_s.coordinates(), &axis_i.coordinates());
    IntensityGrid2D::new(*axis_s, *axis_i, values)
}

/// Bilinear resampling of a grid onto given axes; zero outside the input.
pub fn resample_onto(g: &IntensityGrid2D, axis_s: &Axis, axis_i: &Axis) -> Result<IntensityGrid2D> {
    if g.axis_s.domain != axis_s.domain || g.axis_i.domain != axis_i.domain {
        return Err(Error::DomainMismatch("resampling cannot change an axis domain".into()));
    }
    if g.axis_s.approx_eq(axis_s, 1e-12) && g.axis_i.approx_eq(axis_i, 1e-12) {
        return IntensityGrid2D::new(*axis_s, *axis_i, g.values.clone());
    }
    resample_raw(&RawGrid::from(g), axis_s, axis_i)
}

/// Subtracts the mean of the four corner patches and clamps at zero.
pub fn corner_suppress(h: &IntensityGrid2D, corner_fraction: f64) -> Result<IntensityGrid2D> {
    if !(corner_fraction > 0.0 && corner_fraction <= 0.25) {
        return Err(Error::Parameter("corner_fraction must be in (0, 0.25]".into()));
    }
    let (n_s, n_i) = h.values.dim();
    let c_s = ((corner_fraction * n_s as f64).round() as usize).max(1);
    let c_i = ((corner_fraction * n_i as f64).round() as usize).max(1);
    let mut sum = 0.0;
    for a in (0..c_s).chain(n_s - c_s..n_s) {
        for b in (0..c_i).chain(n_i - c_i..n_i) {
            sum += h.values[[a, b]];
        }
    }
    let background = sum / (4 * c_s * c_i) as f64;
    Ok(h.with_values(h.values.mapv(|v| (v - background).max(0.0))))
}

/// Centered frequency index of row `m` of an `n`-point transform.
fn centered_k(m: usize, n: usize) -> f64 {
    m as f64 - (n / 2) as f64
}

fn gaussian_otf(k: f64, n: usize, sigma_px: f64) -> f64 {
    let f = k / n as f64;
    (-2.0 * std::f64::consts::PI.powi(2) * sigma_px * sigma_px * f * f).exp()
}

/// Filtered grid before clamping and renormalization: real part of
/// `IFT[ H W T ]`. Linear in `h`.
pub fn wiener_filter_linear(h: &IntensityGrid2D, cfg: &PreprocessConfig) -> Array2<f64> {
    let (n_s, n_i) = h.values.dim();
    let sig_s = cfg.response.sigma_px(&h.axis_s);
    let sig_i = cfg.response.sigma_px(&h.axis_i);
    let mut planner = FftPlanner::new();
    let dft_s = CenteredDft::new(&mut planner, n_s);
    let dft_i = CenteredDft::new(&mut planner, n_i);
    let mut scratch = Vec::new();
    let mut spectrum = h.values.mapv(|v| Complex64::new(v, 0.0));
    dft_s.apply_along(&mut spectrum, 0, false, 1.0, &mut scratch);
    dft_i.apply_along(&mut spectrum, 1, false, 1.0, &mut scratch);

    let r_s = cfg.rho_lp * n_s as f64 / 2.0;
    let r_i = cfg.rho_lp * n_i as f64 / 2.0;
    for ((a, b), v) in spectrum.indexed_iter_mut() {
        let (ks, ki) = (centered_k(a, n_s), centered_k(b, n_i));
        if (ks / r_s).powi(2) + (ki / r_i).powi(2) > 1.0 {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        let g = gaussian_otf(ks, n_s, sig_s) * gaussian_otf(ki, n_i, sig_i);
        let denom = g * g + cfg.alpha;
        let w = if denom > 0.0 { g / denom } else { 0.0 };
        *v *= w;
    }

    dft_s.apply_along(&mut spectrum, 0, true, 1.0 / n_s as f64, &mut scratch);
    dft_i.apply_along(&mut spectrum, 1, true, 1.0 / n_i as f64, &mut scratch);
    spectrum.mapv(|v| v.re)
}

/// Wiener deconvolution with the per-axis Gaussian response, top-hat
/// low-pass, clamping at zero and unit-peak normalization.
pub fn wiener_deconvolve(h: &IntensityGrid2D, cfg: &PreprocessConfig) -> Result<IntensityGrid2D> {
    let mut values = wiener_filter_linear(h, cfg);
    values.mapv_inplace(|v| v.max(0.0));
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Input("deconvolved intensity is identically zero".into()));
    }
    values.mapv_inplace(|v| v / peak);
    IntensityGrid2D::new(h.axis_s, h.axis_i, values)
}

/// Unchecked raw counterpart of [`MeasurementSet`]: four planes with the
/// right domains but arbitrary sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMeasurements {
    pub i_ww: IntensityGrid2D,
    pub i_wt: IntensityGrid2D,
    pub i_tw: IntensityGrid2D,
    pub i_tt: IntensityGrid2D,
}

impl RawMeasurements {
    pub fn new(
        i_ww: IntensityGrid2D,
        i_wt: IntensityGrid2D,
        i_tw: IntensityGrid2D,
        i_tt: IntensityGrid2D,
    ) -> Result<Self> {
        let raw = Self { i_ww, i_wt, i_tw, i_tt };
        for p in Plane::ALL {
            let g = raw.get(p);
            if g.domains() != p.domains() {
                return Err(Error::DomainMismatch(format!(
                    "plane {p} has domains {:?}",
                    g.domains()
                )));
            }
            if g.axis_s.photon != Photon::Signal || g.axis_i.photon != Photon::Idler {
                return Err(Error::Input(format!("plane {p} has its photon axes swapped")));
            }
        }
        Ok(raw)
    }

    pub fn get(&self, plane: Plane) -> &IntensityGrid2D {
        match plane {
            Plane::Ww => &self.i_ww,
            Plane::Wt => &self.i_wt,
            Plane::Tw => &self.i_tw,
            Plane::Tt => &self.i_tt,
        }
    }

    pub fn try_map<F>(&self, mut f: F) -> Result<RawMeasurements>
    where
        F: FnMut(Plane, &IntensityGrid2D) -> Result<IntensityGrid2D>,
    {
        RawMeasurements::new(
            f(Plane::Ww, &self.i_ww)?,
            f(Plane::Wt, &self.i_wt)?,
            f(Plane::Tw, &self.i_tw)?,
            f(Plane::Tt, &self.i_tt)?,
        )
    }
}

impl From<MeasurementSet> for RawMeasurements {
    fn from(m: MeasurementSet) -> Self {
        Self {
            i_ww: m.i_ww,
            i_wt: m.i_wt,
            i_tw: m.i_tw,
            i_tt: m.i_tt,
        }
    }
}

/// Frequency axes with `n` points spanning the spectral plane's bounding box.
pub fn target_frequency_axes(raw: &RawMeasurements, n: usize) -> Result<(Axis, Axis)> {
    let r = RawGrid::from(&raw.i_ww);
    Ok((bbox_axis(&r.axis_s, n)?, bbox_axis(&r.axis_i, n)?))
}

/// Full preprocessing of the four planes onto mutually conjugate axes.
pub fn preprocess_measurements(raw: &RawMeasurements, cfg: &PreprocessConfig) -> Result<MeasurementSet> {
    cfg.validate()?;
    let (w_s, w_i) = target_frequency_axes(raw, cfg.grid_n)?;
    let (t_s, t_i) = (conjugate_axis(&w_s), conjugate_axis(&w_i));
    let out = raw.try_map(|plane, g| {
        let (ds, di) = plane.domains();
        let a_s = if ds == Domain::Frequency { w_s } else { t_s };
        let a_i = if di == Domain::Frequency { w_i } else { t_i };
        let mut h = resample_onto(g, &a_s, &a_i)?;
        if cfg.corner_suppression {
            h = corner_suppress(&h, cfg.corner_fraction)?;
        }
        wiener_deconvolve(&h, cfg)
    })?;
    MeasurementSet::new(out.i_ww, out.i_wt, out.i_tw, out.i_tt)
}
