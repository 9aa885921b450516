//! Axes, two-photon grids and the per-photon Fourier transform.
//!
//! Units are fixed throughout the crate: angular frequency in rad/fs, time in
//! fs. Frequency axes carry the absolute carrier in `center`; the transforms
//! act on envelope coordinates `omega - center`, so optical carriers never
//! need to be resolved by the grid.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::CenteredDft;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Frequency,
    Time,
}

impl Domain {
    pub fn flipped(self) -> Self {
        match self {
            Domain::Frequency => Domain::Time,
            Domain::Time => Domain::Frequency,
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            Domain::Frequency => "rad/fs",
            Domain::Time => "fs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Photon {
    Signal,
    Idler,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ToTime,
    ToFrequency,
}

/// A regular one-dimensional sampling of one photon coordinate.
///
/// Sample `k` lies at `center + (k - count/2) * step` (integer division).
/// `conjugate_center` is the center the conjugate axis takes, which makes
/// [`conjugate_axis`] an involution: time axes built from a frequency axis
/// are centered on zero delay and remember the carrier they came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub domain: Domain,
    pub photon: Photon,
    pub center: f64,
    pub step: f64,
    pub count: usize,
    pub conjugate_center: f64,
}

impl Axis {
    pub fn new(domain: Domain, photon: Photon, center: f64, step: f64, count: usize) -> Result<Self> {
        let axis = Self {
            domain,
            photon,
            center,
            step,
            count,
            conjugate_center: 0.0,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn with_conjugate_center(mut self, conjugate_center: f64) -> Self {
        self.conjugate_center = conjugate_center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::Parameter(format!("axis count {} < 2", self.count)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Parameter(format!("axis step {} must be positive", self.step)));
        }
        if !self.center.is_finite() || !self.conjugate_center.is_finite() {
            return Err(Error::Parameter("axis center must be finite".into()));
        }
        Ok(())
    }

    pub fn mid_index(&self) -> usize {
        self.count / 2
    }

    /// Offset of sample `k` from the axis center.
    pub fn offset(&self, k: usize) -> f64 {
        (k as f64 - self.mid_index() as f64) * self.step
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        self.center + self.offset(k)
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.coordinate(k)).collect()
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.offset(k)).collect()
    }

    pub fn units(&self) -> &'static str {
        self.domain.units()
    }

    /// Equality up to a relative tolerance on the real-valued fields.
    pub fn approx_eq(&self, other: &Axis, rel: f64) -> bool {
        let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= rel * scale.max(f64::MIN_POSITIVE);
        self.domain == other.domain
            && self.photon == other.photon
            && self.count == other.count
            && close(self.step, other.step, self.step.abs())
            && close(
                self.center,
                other.center,
                self.center.abs().max(self.step * self.count as f64),
            )
    }
}

/// The conjugate-domain axis: same count, step `2 pi / (count * step)`.
pub fn conjugate_axis(a: &Axis) -> Axis {
    Axis {
        domain: a.domain.flipped(),
        photon: a.photon,
        center: a.conjugate_center,
        step: 2.0 * PI / (a.count as f64 * a.step),
        count: a.count,
        conjugate_center: a.center,
    }
}

fn check_axes(axis_s: &Axis, axis_i: &Axis, shape: (usize, usize)) -> Result<()> {
    axis_s.validate()?;
    axis_i.validate()?;
    if axis_s.photon != Photon::Signal || axis_i.photon != Photon::Idler {
        return Err(Error::Input(
            "grid rows must be the signal axis and columns the idler axis".into(),
        ));
    }
    if shape != (axis_s.count, axis_i.count) {
        return Err(Error::Input(format!(
            "values shape {:?} does not match axes ({}, {})",
            shape, axis_s.count, axis_i.count
        )));
    }
    Ok(())
}

/// Complex amplitude over (signal, idler); rows follow `axis_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid2D {
    pub axis_s: Axis,
    pub axis_i: Axis,
    pub values: Array2<Complex64>,
}

impl ComplexGrid2D {
    pub fn new(axis_s: Axis, axis_i: Axis, values: Array2<Complex64>) -> Result<Self> {
        check_axes(&axis_s, &axis_i, values.dim())?;
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Input("complex grid contains non-finite values".into()));
        }
        Ok(Self { axis_s, axis_i, values })
    }

    pub fn axis(&self, photon: Photon) -> &Axis {
        match photon {
            Photon::Signal => &self.axis_s,
            Photon::Idler => &self.axis_i,
        }
    }

    pub fn domains(&self) -> (Domain, Domain) {
        (self.axis_s.domain, self.axis_i.domain)
    }

    /// `|values|^2` on the same axes.
    pub fn intensity(&self) -> IntensityGrid2D {
        IntensityGrid2D {
            axis_s: self.axis_s,
            axis_i: self.axis_i,
            values: self.values.mapv(|v| v.norm_sqr()),
        }
    }

    pub fn phase(&self) -> Array2<f64> {
        self.values.mapv(|v| v.arg())
    }

    pub fn conj(&self) -> ComplexGrid2D {
        ComplexGrid2D {
            axis_s: self.axis_s,
            axis_i: self.axis_i,
            values: self.values.mapv(|v| v.conj()),
        }
    }
}

/// Real-valued map over (signal, idler): measured or simulated intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityGrid2D {
    pub axis_s: Axis,
    pub axis_i: Axis,
    pub values: Array2<f64>,
}

impl IntensityGrid2D {
    /// Accepts any finite values; raw histograms may dip below zero after
    /// background handling, clamping happens in preprocessing.
    pub fn new(axis_s: Axis, axis_i: Axis, values: Array2<f64>) -> Result<Self> {
        check_axes(&axis_s, &axis_i, values.dim())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("intensity grid contains non-finite values".into()));
        }
        Ok(Self { axis_s, axis_i, values })
    }

    pub fn domains(&self) -> (Domain, Domain) {
        (self.axis_s.domain, self.axis_i.domain)
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Copy rescaled to unit peak. All-zero grids are returned unchanged.
    pub fn normalized_peak(&self) -> IntensityGrid2D {
        let peak = self.peak();
        let mut out = self.clone();
        if peak > 0.0 {
            out.values.mapv_inplace(|v| v / peak);
        }
        out
    }

    pub fn with_values(&self, values: Array2<f64>) -> IntensityGrid2D {
        assert_eq!(values.dim(), self.values.dim());
        IntensityGrid2D {
            axis_s: self.axis_s,
            axis_i: self.axis_i,
            values,
        }
    }
}

/// Anything whose total power can be taken.
pub trait Power {
    fn total_power(&self) -> f64;
}

impl Power for ComplexGrid2D {
    fn total_power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.axis_s.step * self.axis_i.step
    }
}

impl Power for IntensityGrid2D {
    fn total_power(&self) -> f64 {
        self.values.sum() * self.axis_s.step * self.axis_i.step
    }
}

/// Riemann sum of `|F|^2` (complex) or `I` (intensity) times the step product.
pub fn total_power<G: Power>(g: &G) -> f64 {
    g.total_power()
}

/// Reusable transform plans for one grid shape.
///
/// Both directions are scaled so the continuous-limit transform
/// `(2 pi)^{-1/2} * integral F(omega) exp(-i omega t) d omega` is unitary on
/// the grid: power `sum |F|^2 * step` is preserved exactly in exact arithmetic.
pub(crate) struct GridTransformer {
    signal: CenteredDft,
    idler: CenteredDft,
    scratch: Vec<Complex64>,
}

impl GridTransformer {
    pub(crate) fn new(n_s: usize, n_i: usize) -> Self {
        let mut planner = FftPlanner::new();
        let signal = CenteredDft::new(&mut planner, n_s);
        let idler = CenteredDft::new(&mut planner, n_i);
        Self {
            signal,
            idler,
            scratch: Vec::new(),
        }
    }

    /// Transforms `values` in place along the photon's axis, where the
    /// source-domain step along that axis is `step`.
    pub(crate) fn apply(&mut self, values: &mut Array2<Complex64>, photon: Photon, direction: Direction, step: f64) {
        let (dft, axis) = match photon {
            Photon::Signal => (&self.signal, 0),
            Photon::Idler => (&self.idler, 1),
        };
        debug_assert_eq!(values.len_of(ndarray::Axis(axis)), dft.len());
        let scale = step / (2.0 * PI).sqrt();
        dft.apply_along(
            values,
            axis,
            direction == Direction::ToFrequency,
            scale,
            &mut self.scratch,
        );
    }
}

/// Unitary transform of one photon's coordinate; `ToTime` uses `exp(-i omega t)`.
pub fn transform_photon(g: &ComplexGrid2D, photon: Photon, direction: Direction) -> Result<ComplexGrid2D> {
    let axis = *g.axis(photon);
    let expected = match direction {
        Direction::ToTime => Domain::Frequency,
        Direction::ToFrequency => Domain::Time,
    };
    if axis.domain != expected {
        return Err(Error::DomainMismatch(format!(
            "{photon:?} axis is in the {:?} domain, {direction:?} needs {expected:?}",
            axis.domain
        )));
    }
    let mut values = g.values.clone();
    let mut tr = GridTransformer::new(g.axis_s.count, g.axis_i.count);
    tr.apply(&mut values, photon, direction, axis.step);
    let new_axis = conjugate_axis(&axis);
    let (axis_s, axis_i) = match photon {
        Photon::Signal => (new_axis, g.axis_i),
        Photon::Idler => (g.axis_s, new_axis),
    };
    Ok(ComplexGrid2D { axis_s, axis_i, values })
}

/// Transforms both photons into the requested domain pair, skipping axes
/// that are already there.
pub fn to_domains(g: &ComplexGrid2D, signal: Domain, idler: Domain) -> Result<ComplexGrid2D> {
    let mut out = g.clone();
    for (photon, target) in [(Photon::Signal, signal), (Photon::Idler, idler)] {
        if out.axis(photon).domain != target {
            let dir = match target {
                Domain::Time => Direction::ToTime,
                Domain::Frequency => Direction::ToFrequency,
            };
            out = transform_photon(&out, photon, dir)?;
        }
    }
    Ok(out)
}
