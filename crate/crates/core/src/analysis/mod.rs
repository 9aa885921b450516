//! Physics extraction from intensity grids and reconstructed amplitudes.

pub mod fit;
pub mod mask;
pub mod moments;
pub mod montecarlo;
pub mod unwrap;

use serde::{Deserialize, Serialize};

pub use fit::{fit_phase_poly, monomials, PhaseFit, PolyTerm};
pub use mask::{sigma_mask, MaskInfo, SigmaMask};
pub use moments::{moments, tbp_numeric, Moments2D, WitnessReport};
pub use montecarlo::{monte_carlo_uncertainty, MonteCarloReport};
pub use unwrap::{unwrap_phase_2d, wrap};

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid2D, Domain, IntensityGrid2D};
use crate::retrieve::gauge_fix;

/// Which intensity weights the phase fit and defines the mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWeights {
    /// The measured (deconvolved) spectral intensity, when one is supplied.
    #[default]
    Measured,
    /// `|F|²` of the reconstruction.
    Reconstructed,
    /// Equal weights inside the mask.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub fit_order: u32,
    pub mask_sigma: f64,
    pub weights: FitWeights,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fit_order: 3,
            mask_sigma: 2.0,
            weights: FitWeights::Measured,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.fit_order) {
            return Err(Error::Parameter(format!(
                "fit_order must be 2 or 3, got {}",
                self.fit_order
            )));
        }
        if !(self.mask_sigma > 0.0) || !self.mask_sigma.is_finite() {
            return Err(Error::Parameter("mask_sigma must be finite and > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAnalysis {
    pub fit: PhaseFit,
    pub mask: MaskInfo,
    /// Expansion point `(omega_s0, omega_i0)`, rad/fs: the weight centroid.
    pub centers: (f64, f64),
}

/// Masked, unwrapped, polynomial fit of the spectral phase of `jsa`.
///
/// `measured` is the spectral intensity used when `cfg.weights` is
/// `Measured`; without it the reconstruction's own intensity is used.
pub fn analyze_jsa(
    jsa: &ComplexGrid2D,
    measured: Option<&IntensityGrid2D>,
    cfg: &AnalysisConfig,
) -> Result<PhaseAnalysis> {
    cfg.validate()?;
    if jsa.domains() != (Domain::Frequency, Domain::Frequency) {
        return Err(Error::DomainMismatch(
            "phase analysis needs a spectral amplitude".into(),
        ));
    }
    let f = gauge_fix(jsa);
    let own = f.intensity();
    let weights = match (cfg.weights, measured) {
        (FitWeights::Measured, Some(m)) => {
            if !m.axis_s.approx_eq(&f.axis_s, 1e-9) || !m.axis_i.approx_eq(&f.axis_i, 1e-9) {
                return Err(Error::Input("measured intensity is not on the amplitude's axes".into()));
            }
            m.with_values(m.values.mapv(|v| v.max(0.0)))
        }
        _ => own.clone(),
    };
    let mask = sigma_mask(&weights, cfg.mask_sigma)?;
    let m = moments(&weights)?;
    let centers = (f.axis_s.center + m.mean[0], f.axis_i.center + m.mean[1]);
    let unwrapped = unwrap_phase_2d(&f.phase(), &mask.mask, &own.values)?;
    let fit_weights = match cfg.weights {
        FitWeights::Uniform => weights.with_values(weights.values.mapv(|_| 1.0)),
        _ => weights,
    };
    let fit = fit_phase_poly(&unwrapped, &fit_weights, &mask.mask, centers, cfg.fit_order)?;
    Ok(PhaseAnalysis {
        fit,
        mask: mask.info,
        centers,
    })
}
