//! Forward model of the four correlation measurements.
//!
//! Frequency axes are measured by a spectrometer (Gaussian intensity
//! blur). Time axes are measured by sum-frequency gating with a delayed
//! Gaussian gate in a crystal of finite length, then integrating the
//! upconverted spectrum. For one gated photon
//!
//! ```text
//! H(tau, .) = integral d omega_u | integral d omega G(omega_u - omega, tau) Phi(omega, omega_u) F(omega, .) |^2
//! ```
//!
//! The delay enters `G` only as the phase `exp(i tau (omega_u - omega - omega_g0))`,
//! so on the conjugate delay grid the inner integral is a centered DFT of
//! `K[u, .] * F` with `K[u, s] = g(omega_u - omega_s) Phi(...) d omega_s`.

pub mod oracle;
pub mod refractive;

use std::f64::consts::PI;
use std::path::PathBuf;

use ndarray::{Array2, Axis as NdAxis, Zip};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::CenteredDft;
use crate::grid::{
    conjugate_axis, to_domains, Axis, ComplexGrid2D, Direction, Domain, GridTransformer, IntensityGrid2D, Photon,
};
use crate::retrieve::{MeasurementSet, Plane};
use crate::units::wavelength_nm_to_omega;

pub use refractive::{delta_k, Polarization, RefractiveEntry, RefractiveModel, Sellmeier};

/// Gaussian gate pulse; `sigma` is the spectral s.d. of the amplitude, so
/// the temporal intensity s.d. is `1 / (2 sigma)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatePulse {
    pub center: f64,
    pub sigma: f64,
}

impl Default for GatePulse {
    fn default() -> Self {
        Self {
            center: wavelength_nm_to_omega(775.0),
            sigma: GatePulse::sigma_for_duration(130.0),
        }
    }
}

impl GatePulse {
    /// Spectral amplitude s.d. for a temporal intensity s.d. in fs.
    pub fn sigma_for_duration(intensity_sd_fs: f64) -> f64 {
        1.0 / (2.0 * intensity_sd_fs)
    }

    pub fn duration(&self) -> f64 {
        1.0 / (2.0 * self.sigma)
    }

    fn amplitude(&self, detuning: f64) -> f64 {
        (2.0 * PI * self.sigma * self.sigma).powf(-0.25)
            * (-detuning * detuning / (4.0 * self.sigma * self.sigma)).exp()
    }
}

/// Gate field at frequency `omega_g` for delay `tau`.
pub fn gate_spectrum(g: &GatePulse, omega_g: f64, tau: f64) -> Complex64 {
    let d = omega_g - g.center;
    Complex64::from_polar(g.amplitude(d), tau * d)
}

/// `exp(-i dk L / 2) sinc(dk L / 2)`.
pub fn phase_match(dk: f64, length_um: f64) -> Complex64 {
    let x = 0.5 * dk * length_um;
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    Complex64::from_polar(1.0, -x) * sinc
}

/// The `gating.json` block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatingConfig {
    pub gate: GatePulse,
    pub crystal_length_um: f64,
    pub spectrometer_sigma: f64,
    pub refractive_table_path: Option<PathBuf>,
    pub upconverted_grid_count: usize,
}

impl Default for GatingConfig {
    fn default() -> Self {
        Self {
            gate: GatePulse::default(),
            crystal_length_um: 1000.0,
            spectrometer_sigma: 0.0,
            refractive_table_path: None,
            upconverted_grid_count: 256,
        }
    }
}

impl GatingConfig {
    pub fn model(&self) -> Result<GatingModel> {
        let refractive = match &self.refractive_table_path {
            Some(p) => RefractiveModel::from_table_file(p)?,
            None => RefractiveModel::bibo(),
        };
        let gm = GatingModel {
            gate: self.gate,
            crystal_length_um: self.crystal_length_um,
            refractive,
            spectrometer_sigma: self.spectrometer_sigma,
            upconverted_grid_count: self.upconverted_grid_count,
        };
        gm.validate()?;
        Ok(gm)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatingModel {
    pub gate: GatePulse,
    pub crystal_length_um: f64,
    pub refractive: RefractiveModel,
    /// Spectrometer intensity response s.d., rad/fs.
    pub spectrometer_sigma: f64,
    pub upconverted_grid_count: usize,
}

impl Default for GatingModel {
    fn default() -> Self {
        GatingConfig::default().model().expect("default gating model is valid")
    }
}

impl GatingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.gate.sigma > 0.0) || !self.gate.center.is_finite() {
            return Err(Error::Parameter("gate sigma must be > 0".into()));
        }
        if !(self.crystal_length_um >= 0.0) || !self.crystal_length_um.is_finite() {
            return Err(Error::Parameter("crystal length must be >= 0".into()));
        }
        if !(self.spectrometer_sigma >= 0.0) || !self.spectrometer_sigma.is_finite() {
            return Err(Error::Parameter("spectrometer sigma must be >= 0".into()));
        }
        if self.upconverted_grid_count < 8 {
            return Err(Error::Parameter("upconverted_grid_count must be >= 8".into()));
        }
        Ok(())
    }

    /// Refractive model cut for the photon centered at `omega0`.
    fn side_model(&self, omega0: f64) -> Result<Option<RefractiveModel>> {
        if self.crystal_length_um == 0.0 {
            return Ok(None);
        }
        self.refractive.tuned(omega0, self.gate.center).map(Some)
    }

    /// `Phi` for input frequency `omega` and upconverted `omega_up`.
    fn phi(&self, model: Option<&RefractiveModel>, omega: f64, omega_up: f64) -> Result<Complex64> {
        match model {
            None => Ok(Complex64::new(1.0, 0.0)),
            Some(m) => {
                let dk = delta_k(m, omega, omega_up - omega, omega_up)?;
                Ok(phase_match(dk, self.crystal_length_um))
            }
        }
    }

    /// Crystal angles (rad) used for the signal and idler sides.
    pub fn crystal_angles(&self, center_s: f64, center_i: f64) -> Result<(f64, f64)> {
        let s = self.side_model(center_s)?.map_or(0.0, |m| m.theta);
        let i = self.side_model(center_i)?.map_or(0.0, |m| m.theta);
        Ok((s, i))
    }
}

/// Frequency axes of the measurement; delay axes are their conjugates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementAxes {
    pub freq_s: Axis,
    pub freq_i: Axis,
}

impl MeasurementAxes {
    pub fn for_state(state: &ComplexGrid2D) -> Self {
        Self {
            freq_s: state.axis_s,
            freq_i: state.axis_i,
        }
    }

    pub fn delay_s(&self) -> Axis {
        conjugate_axis(&self.freq_s)
    }

    pub fn delay_i(&self) -> Axis {
        conjugate_axis(&self.freq_i)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedMeasurements {
    pub set: MeasurementSet,
    /// Largest edge value of any gated delay axis relative to its plane peak.
    pub edge_fraction: f64,
    /// Set when `edge_fraction` exceeds 1 %.
    pub coverage_warning: bool,
    pub crystal_angles: (f64, f64),
}

/// Edge fraction above which the delay grid is considered too short.
pub const COVERAGE_LIMIT: f64 = 0.01;

/// Intensity threshold defining the support of integrands.
const SUPPORT_THRESHOLD: f64 = 1e-6;

fn check_state(state: &ComplexGrid2D) -> Result<()> {
    if state.domains() != (Domain::Frequency, Domain::Frequency) {
        return Err(Error::DomainMismatch(
            "simulation needs a state on frequency axes".into(),
        ));
    }
    Ok(())
}

fn unit_peak(axis_s: Axis, axis_i: Axis, mut values: Array2<f64>) -> Result<IntensityGrid2D> {
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Input("simulated intensity is identically zero".into()));
    }
    values.mapv_inplace(|v| (v / peak).max(0.0));
    IntensityGrid2D::new(axis_s, axis_i, values)
}

/// Ideal measurements: `|F|^2` in each domain pair, unit peak, no blur.
pub fn simulate_ideal(state: &ComplexGrid2D) -> Result<MeasurementSet> {
    check_state(state)?;
    let plane = |p: Plane| -> Result<IntensityGrid2D> {
        let (ds, di) = p.domains();
        let g = to_domains(state, ds, di)?;
        unit_peak(g.axis_s, g.axis_i, g.values.mapv(|v| v.norm_sqr()))
    };
    MeasurementSet::new(
        plane(Plane::Ww)?,
        plane(Plane::Wt)?,
        plane(Plane::Tw)?,
        plane(Plane::Tt)?,
    )
}

/// Indices where `marginal` exceeds the support threshold of its maximum.
fn support_range(marginal: &[f64]) -> (usize, usize) {
    let peak = marginal.iter().cloned().fold(0.0, f64::max);
    let lo = marginal.iter().position(|&v| v > SUPPORT_THRESHOLD * peak).unwrap_or(0);
    let hi = marginal
        .iter()
        .rposition(|&v| v > SUPPORT_THRESHOLD * peak)
        .unwrap_or(marginal.len() - 1);
    (lo, hi)
}

/// Upconverted-frequency offsets (relative to photon + gate centers)
/// covering the photon support widened by the gate's intensity support.
pub(crate) fn upconverted_offsets(axis: &Axis, marginal: &[f64], gate: &GatePulse, count: usize) -> Vec<f64> {
    let (lo, hi) = support_range(marginal);
    let gate_reach = gate.sigma * (2.0 * (1.0 / SUPPORT_THRESHOLD).ln()).sqrt();
    let a = axis.offset(lo) - gate_reach;
    let b = axis.offset(hi) + gate_reach;
    let du = (b - a) / (count - 1) as f64;
    (0..count).map(|k| a + k as f64 * du).collect()
}

/// `K[u, k] = g(u - offset_k) Phi(omega_k, omega_up) step`, plus the `u` spacing.
struct SideKernel {
    k: Array2<Complex64>,
    du: f64,
    theta: f64,
}

fn side_kernel(gm: &GatingModel, axis: &Axis, marginal: &[f64]) -> Result<SideKernel> {
    let model = gm.side_model(axis.center)?;
    let us = upconverted_offsets(axis, marginal, &gm.gate, gm.upconverted_grid_count);
    let du = us[1] - us[0];
    let mut k = Array2::zeros((us.len(), axis.count));
    for (a, &u) in us.iter().enumerate() {
        let omega_up = axis.center + gm.gate.center + u;
        for j in 0..axis.count {
            let d = u - axis.offset(j);
            let amp = gm.gate.amplitude(d);
            if amp == 0.0 {
                continue;
            }
            let phi = gm.phi(model.as_ref(), axis.coordinate(j), omega_up)?;
            k[[a, j]] = phi * (amp * axis.step);
        }
    }
    Ok(SideKernel {
        k,
        du,
        theta: model.map_or(0.0, |m| m.theta),
    })
}

/// Gaussian intensity blur of s.d. `sigma_px` along one array axis, zero
/// outside the grid.
pub(crate) fn blur_axis(values: &Array2<f64>, axis: usize, sigma_px: f64) -> Array2<f64> {
    if sigma_px < 1e-6 {
        return values.clone();
    }
    let reach = (5.0 * sigma_px).ceil() as isize;
    let w: Vec<f64> = (-reach..=reach)
        .map(|j| (-(j * j) as f64 / (2.0 * sigma_px * sigma_px)).exp())
        .collect();
    let norm: f64 = w.iter().sum();
    let mut out = values.clone();
    for (src, mut dst) in values.lanes(NdAxis(axis)).into_iter().zip(out.lanes_mut(NdAxis(axis))) {
        let n = src.len() as isize;
        for m in 0..n {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let j = m + k as isize - reach;
                if (0..n).contains(&j) {
                    acc += wk * src[j as usize];
                }
            }
            dst[m as usize] = acc / norm;
        }
    }
    out
}

fn edge_fraction(values: &Array2<f64>, time_rows: bool, time_cols: bool) -> f64 {
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return 0.0;
    }
    let (n_r, n_c) = values.dim();
    let mut edge: f64 = 0.0;
    if time_rows {
        for c in 0..n_c {
            edge = edge.max(values[[0, c]]).max(values[[n_r - 1, c]]);
        }
    }
    if time_cols {
        for r in 0..n_r {
            edge = edge.max(values[[r, 0]]).max(values[[r, n_c - 1]]);
        }
    }
    edge / peak
}

/// Gated-signal transforms `Z[u] = DFT_s(K_s[u] * F)`, one per `u` sample.
fn gate_signal(f: &Array2<Complex64>, ks: &SideKernel, step_s: f64) -> Vec<Array2<Complex64>> {
    let (n_s, n_i) = f.dim();
    (0..ks.k.nrows())
        .into_par_iter()
        .map(|a| {
            let mut tr = GridTransformer::new(n_s, n_i);
            let mut z = f.clone();
            let krow = ks.k.row(a);
            for (mut row, &kv) in z.outer_iter_mut().zip(krow.iter()) {
                row.mapv_inplace(|v| v * kv);
            }
            tr.apply(&mut z, Photon::Signal, Direction::ToTime, step_s);
            z
        })
        .collect()
}

/// Sum over `u` of `|z|^2` in fixed order.
fn accumulate(zs: &[Array2<Complex64>], du: f64) -> Array2<f64> {
    let mut acc = Array2::<f64>::zeros(zs[0].dim());
    for z in zs {
        Zip::from(&mut acc).and(z).for_each(|a, v| *a += v.norm_sqr());
    }
    acc.mapv_inplace(|v| v * du);
    acc
}

/// Gated-idler counterpart of [`gate_signal`]: transforms along the idler axis.
fn gate_idler(f: &Array2<Complex64>, ki: &SideKernel, step_i: f64) -> Vec<Array2<Complex64>> {
    let (n_s, n_i) = f.dim();
    (0..ki.k.nrows())
        .into_par_iter()
        .map(|a| {
            let mut tr = GridTransformer::new(n_s, n_i);
            let mut z = f.clone();
            let krow = ki.k.row(a);
            for mut row in z.outer_iter_mut() {
                Zip::from(&mut row).and(&krow).for_each(|v, &kv| *v *= kv);
            }
            tr.apply(&mut z, Photon::Idler, Direction::ToTime, step_i);
            z
        })
        .collect()
}

/// Doubly gated plane from the signal-gated transforms.
///
/// For every signal delay row and every pair `(u_s, u_i)` the idler inner
/// integral is one DFT of length `n_i`. Rows are independent and run in
/// parallel; within a row the summation order is fixed.
fn gate_both(zt: &[Array2<Complex64>], ks_du: f64, ki: &SideKernel, step_i: f64) -> Array2<f64> {
    let (n_s, n_i) = zt[0].dim();
    let mut planner = FftPlanner::new();
    let dft = CenteredDft::new(&mut planner, n_i);
    let scale = step_i / (2.0 * PI).sqrt();
    let rows: Vec<Vec<f64>> = (0..n_s)
        .into_par_iter()
        .map(|ts| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n_i];
            let mut scratch = vec![Complex64::new(0.0, 0.0); dft.scratch_len()];
            let mut acc = vec![0.0; n_i];
            for z in zt {
                let zrow = z.row(ts);
                let row_peak = zrow.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
                if row_peak == 0.0 {
                    continue;
                }
                for krow in ki.k.outer_iter() {
                    for ((b, zv), kv) in buf.iter_mut().zip(zrow.iter()).zip(krow.iter()) {
                        *b = zv * kv;
                    }
                    dft.forward_with_scratch(&mut buf, &mut scratch);
                    for (a, b) in acc.iter_mut().zip(&buf) {
                        *a += b.norm_sqr();
                    }
                }
            }
            let w = ks_du * ki.du * scale * scale;
            acc.iter().map(|v| v * w).collect()
        })
        .collect();
    let mut out = Array2::zeros((n_s, n_i));
    for (ts, row) in rows.into_iter().enumerate() {
        for (ti, v) in row.into_iter().enumerate() {
            out[[ts, ti]] = v;
        }
    }
    out
}

/// Simulates the four measured correlation maps, each normalized to unit peak.
pub fn simulate_measurements(
    state: &ComplexGrid2D,
    gm: &GatingModel,
    axes: &MeasurementAxes,
) -> Result<SimulatedMeasurements> {
    check_state(state)?;
    gm.validate()?;
    if !state.axis_s.approx_eq(&axes.freq_s, 1e-9) || !state.axis_i.approx_eq(&axes.freq_i, 1e-9) {
        return Err(Error::DomainMismatch(
            "measurement axes differ from the state grid".into(),
        ));
    }
    let (w_s, w_i) = (axes.freq_s, axes.freq_i);
    let (t_s, t_i) = (axes.delay_s(), axes.delay_i());
    let f = &state.values;
    let intensity = f.mapv(|v| v.norm_sqr());
    let marg_s: Vec<f64> = intensity.sum_axis(NdAxis(1)).to_vec();
    let marg_i: Vec<f64> = intensity.sum_axis(NdAxis(0)).to_vec();
    let ks = side_kernel(gm, &w_s, &marg_s)?;
    let ki = side_kernel(gm, &w_i, &marg_i)?;
    let spec_s = gm.spectrometer_sigma / w_s.step;
    let spec_i = gm.spectrometer_sigma / w_i.step;

    let h_ww = blur_axis(&blur_axis(&intensity, 0, spec_s), 1, spec_i);

    let zt = gate_signal(f, &ks, w_s.step);
    let h_tw = blur_axis(&accumulate(&zt, ks.du), 1, spec_i);

    let zi = gate_idler(f, &ki, w_i.step);
    let h_wt = blur_axis(&accumulate(&zi, ki.du), 0, spec_s);
    drop(zi);

    let h_tt = gate_both(&zt, ks.du, &ki, w_i.step);

    let edge = edge_fraction(&h_tw, true, false)
        .max(edge_fraction(&h_wt, false, true))
        .max(edge_fraction(&h_tt, true, true));

    let set = MeasurementSet::new(
        unit_peak(w_s, w_i, h_ww)?,
        unit_peak(w_s, t_i, h_wt)?,
        unit_peak(t_s, w_i, h_tw)?,
        unit_peak(t_s, t_i, h_tt)?,
    )?;
    Ok(SimulatedMeasurements {
        set,
        edge_fraction: edge,
        coverage_warning: edge > COVERAGE_LIMIT,
        crystal_angles: (ks.theta, ki.theta),
    })
}

/// Scales `h` to `peak_counts` and replaces each bin by a Poisson draw.
/// Negative bins are treated as zero mean.
pub fn poissonize(h: &IntensityGrid2D, peak_counts: f64, seed: u64) -> Result<IntensityGrid2D> {
    if !(peak_counts > 0.0) || !peak_counts.is_finite() {
        return Err(Error::Parameter("peak_counts must be > 0".into()));
    }
    let peak = h.peak();
    if !(peak > 0.0) {
        return Err(Error::Input("cannot add counting noise to an all-zero grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = peak_counts / peak;
    let values = h.values.mapv(|v| {
        let mean = v * scale;
        if mean > 0.0 {
            Poisson::new(mean).map(|p| p.sample(&mut rng)).unwrap_or(mean)
        } else {
            0.0
        }
    });
    IntensityGrid2D::new(h.axis_s, h.axis_i, values)
}
