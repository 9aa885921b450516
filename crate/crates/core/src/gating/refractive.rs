//! Refractive-index tables and the type-I sum-frequency phase mismatch.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{omega_to_wavelength_nm, SPEED_OF_LIGHT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

/// `n^2 = A + B / (lambda^2 - C) - D lambda^2`, lambda in µm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sellmeier(pub [f64; 4]);

impl Sellmeier {
    pub fn constant(n: f64) -> Self {
        Sellmeier([n * n, 0.0, 0.0, 0.0])
    }

    pub fn index_at_um(&self, lambda_um: f64) -> f64 {
        let [a, b, c, d] = self.0;
        let l2 = lambda_um * lambda_um;
        let b_term = if b == 0.0 { 0.0 } else { b / (l2 - c) };
        (a + b_term - d * l2).sqrt()
    }
}

/// One row of a refractive table file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefractiveEntry {
    pub polarization: Polarization,
    pub sellmeier_coefficients: [f64; 4],
    pub valid_nm: [f64; 2],
}

/// Ordinary and extraordinary dispersion of a uniaxial crystal cut at
/// `theta`. The two gating inputs travel with the angle-dependent index,
/// the upconverted output with the ordinary index.
#[derive(Clone, Debug, PartialEq)]
pub struct RefractiveModel {
    pub name: String,
    pub ordinary: Sellmeier,
    pub extraordinary: Sellmeier,
    pub valid_nm: [f64; 2],
    /// Angle between optic axis and propagation, rad.
    pub theta: f64,
}

const DEFAULT_TABLE: &str = include_str!("../../data/bibo_type1.json");

impl RefractiveModel {
    pub fn new(name: &str, ordinary: Sellmeier, extraordinary: Sellmeier, valid_nm: [f64; 2]) -> Result<Self> {
        let m = Self {
            name: name.to_string(),
            ordinary,
            extraordinary,
            valid_nm,
            theta: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    /// The built-in BiBO-like table.
    pub fn bibo() -> Self {
        Self::from_table_json("bibo_type1", DEFAULT_TABLE).expect("bundled refractive table is valid")
    }

    /// A dispersionless medium of index `n`: every process is phase matched.
    pub fn constant(n: f64) -> Result<Self> {
        Self::new(
            "constant",
            Sellmeier::constant(n),
            Sellmeier::constant(n),
            [100.0, 10000.0],
        )
    }

    pub fn from_table_json(name: &str, text: &str) -> Result<Self> {
        let entries: Vec<RefractiveEntry> = serde_json::from_str(text)?;
        let find = |p: Polarization| {
            let mut it = entries.iter().filter(|e| e.polarization == p);
            match (it.next(), it.next()) {
                (Some(e), None) => Ok(*e),
                (None, _) => Err(Error::Input(format!("refractive table {name:?} has no {p:?} entry"))),
                _ => Err(Error::Input(format!(
                    "refractive table {name:?} has several {p:?} entries"
                ))),
            }
        };
        let o = find(Polarization::Ordinary)?;
        let e = find(Polarization::Extraordinary)?;
        let valid_nm = [o.valid_nm[0].max(e.valid_nm[0]), o.valid_nm[1].min(e.valid_nm[1])];
        Self::new(
            name,
            Sellmeier(o.sellmeier_coefficients),
            Sellmeier(e.sellmeier_coefficients),
            valid_nm,
        )
    }

    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
        Self::from_table_json(name, &text)
    }

    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.valid_nm;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Parameter(format!(
                "invalid refractive validity range [{lo}, {hi}] nm"
            )));
        }
        for k in 0..=200 {
            let nm = lo + (hi - lo) * k as f64 / 200.0;
            for s in [self.ordinary, self.extraordinary] {
                let n = s.index_at_um(nm * 1e-3);
                if !(n > 1.0) {
                    return Err(Error::Parameter(format!(
                        "refractive index {n} at {nm:.1} nm is not > 1 in model {:?}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    fn wavelength_um(&self, omega: f64) -> Result<f64> {
        let nm = omega_to_wavelength_nm(omega);
        let [lo, hi] = self.valid_nm;
        if !(omega > 0.0) || !(lo..=hi).contains(&nm) {
            return Err(Error::ModelRange {
                omega,
                wavelength_nm: nm,
                lo_nm: lo,
                hi_nm: hi,
            });
        }
        Ok(nm * 1e-3)
    }

    /// Index for the given polarization; extraordinary means the effective
    /// index at the model angle.
    pub fn index(&self, polarization: Polarization, omega: f64) -> Result<f64> {
        let l = self.wavelength_um(omega)?;
        let n_o = self.ordinary.index_at_um(l);
        Ok(match polarization {
            Polarization::Ordinary => n_o,
            Polarization::Extraordinary => {
                let n_e = self.extraordinary.index_at_um(l);
                let (s, c) = self.theta.sin_cos();
                1.0 / (c * c / (n_o * n_o) + s * s / (n_e * n_e)).sqrt()
            }
        })
    }

    /// `k = n omega / c` in 1/µm.
    pub fn wavenumber(&self, polarization: Polarization, omega: f64) -> Result<f64> {
        Ok(self.index(polarization, omega)? * omega / SPEED_OF_LIGHT)
    }

    /// Returns the model cut at the angle that phase matches `omega_in +
    /// omega_gate`, found by bisection on `[0, pi/2]`. Dispersionless models
    /// are returned unchanged.
    pub fn tuned(&self, omega_in: f64, omega_gate: f64) -> Result<Self> {
        let mismatch = |theta: f64| {
            delta_k(
                &self.clone().with_theta(theta),
                omega_in,
                omega_gate,
                omega_in + omega_gate,
            )
        };
        let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2);
        let (f_lo, f_hi) = (mismatch(lo)?, mismatch(hi)?);
        if f_lo.abs() < 1e-12 && f_hi.abs() < 1e-12 {
            return Ok(self.clone());
        }
        if f_lo * f_hi > 0.0 {
            return Err(Error::Parameter(format!(
                "model {:?} cannot phase match {:.1} nm + {:.1} nm at any angle",
                self.name,
                omega_to_wavelength_nm(omega_in),
                omega_to_wavelength_nm(omega_gate)
            )));
        }
        let mut f_lo = f_lo;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let f_mid = mismatch(mid)?;
            if f_lo * f_mid <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                f_lo = f_mid;
            }
        }
        Ok(self.clone().with_theta(0.5 * (lo + hi)))
    }
}

/// Type-I phase mismatch `k_o(omega_up) - k_e(omega_in) - k_e(omega_gate)`
/// in 1/µm, where `k_e` uses the angle-dependent index.
pub fn delta_k(m: &RefractiveModel, omega_in: f64, omega_gate: f64, omega_up: f64) -> Result<f64> {
    let sum = omega_in + omega_gate;
    if (omega_up - sum).abs() > 1e-9 * sum.abs().max(1.0) {
        return Err(Error::Parameter(format!(
            "energy conservation violated: omega_up = {omega_up} but omega_in + omega_gate = {sum}"
        )));
    }
    let k_up = m.wavenumber(Polarization::Ordinary, omega_up)?;
    let k_in = m.wavenumber(Polarization::Extraordinary, omega_in)?;
    let k_g = m.wavenumber(Polarization::Extraordinary, omega_gate)?;
    Ok(k_up - k_in - k_g)
}
