//! Counting-noise uncertainty of the fitted phase coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gating::poissonize;
use crate::pipeline::{reconstruct, ReconstructionConfig};
use crate::preprocess::RawMeasurements;
use crate::retrieve::Plane;
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1).
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialValues {
    pub trial: usize,
    pub seed: u64,
    /// Fitted coefficients in monomial order.
    pub coefficients: Vec<f64>,
    pub chirp_s: f64,
    pub chirp_i: f64,
    pub cross_term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub peak_counts: f64,
    pub seed: u64,
    pub failed: usize,
    pub chirp_s: CoefficientStats,
    pub chirp_i: CoefficientStats,
    pub cross_term: CoefficientStats,
    /// `(p, q)` exponents and statistics of every fitted coefficient.
    pub coefficients: Vec<((u32, u32), CoefficientStats)>,
    pub values: Vec<TrialValues>,
}

/// Largest tolerated fraction of failed trials.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

fn stats(xs: impl Iterator<Item = f64> + Clone) -> CoefficientStats {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    CoefficientStats { mean, sd: var.sqrt() }
}

/// Poissonizes all four planes per trial, reconstructs, and aggregates
/// the fitted coefficients. The retrieval seed is the one in `cfg`, so the
/// spread reflects counting noise only.
pub fn monte_carlo_uncertainty(
    raw: &RawMeasurements,
    cfg: &ReconstructionConfig,
    trials: usize,
    peak_counts: f64,
    seed: u64,
) -> Result<MonteCarloReport> {
    if trials < 2 {
        return Err(Error::Parameter("monte carlo needs at least 2 trials".into()));
    }
    if !(peak_counts > 0.0) || !peak_counts.is_finite() {
        return Err(Error::Parameter("peak_counts must be finite and > 0".into()));
    }
    cfg.validate()?;
    let outcomes: Vec<Result<TrialValues>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(seed, trial as u64);
            let noisy = raw.try_map(|plane, g| {
                let k = Plane::ALL.iter().position(|&p| p == plane).unwrap_or(0) as u64;
                poissonize(g, peak_counts, derive_seed(trial_seed, k))
            })?;
            let fit = reconstruct(&noisy, cfg)?.analysis.fit;
            Ok(TrialValues {
                trial,
                seed: trial_seed,
                coefficients: fit.coefficients.iter().map(|t| t.value).collect(),
                chirp_s: fit.chirp_s,
                chirp_i: fit.chirp_i,
                cross_term: fit.cross_term,
            })
        })
        .collect();
    let mut values = Vec::with_capacity(trials);
    let mut failed = 0;
    for o in outcomes {
        match o {
            Ok(v) => values.push(v),
            Err(e) => {
                log::warn!("monte carlo trial failed: {e}");
                failed += 1;
            }
        }
    }
    if failed as f64 > MAX_FAILED_FRACTION * trials as f64 || values.len() < 2 {
        return Err(Error::MonteCarlo { failed, trials });
    }
    let terms = super::monomials(cfg.analysis.fit_order);
    let coefficients = terms
        .iter()
        .enumerate()
        .map(|(k, &pq)| (pq, stats(values.iter().map(move |v| v.coefficients[k]))))
        .collect();
    Ok(MonteCarloReport {
        trials,
        peak_counts,
        seed,
        failed,
        chirp_s: stats(values.iter().map(|v| v.chirp_s)),
        chirp_i: stats(values.iter().map(|v| v.chirp_i)),
        cross_term: stats(values.iter().map(|v| v.cross_term)),
        coefficients,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gating::simulate_ideal;
    use crate::retrieve::RetrievalConfig;
    use crate::synth::{GaussianStateParams, StateConfig};

    fn raw() -> RawMeasurements {
        let s = StateConfig {
            params: GaussianStateParams {
                chirp_s: -36000.0,
                chirp_i: -43000.0,
                rho: -0.9,
                ..Default::default()
            },
            n: 32,
            span_sigmas: 8.0,
        }
        .generate()
        .unwrap();
        RawMeasurements::from(simulate_ideal(&s).unwrap())
    }

    fn cfg() -> ReconstructionConfig {
        ReconstructionConfig {
            retrieval: RetrievalConfig {
                iterations: 150,
                seed: 1,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn vanishing_noise_gives_vanishing_spread() {
        let r = monte_carlo_uncertainty(&raw(), &cfg(), 5, 1e12, 7).unwrap();
        assert_eq!(r.failed, 0);
        assert!(r.chirp_s.sd < 1e-3 * r.chirp_s.mean.abs(), "{:?}", r.chirp_s);
        assert!(r.chirp_i.sd < 1e-3 * r.chirp_i.mean.abs(), "{:?}", r.chirp_i);
        assert_eq!(r.coefficients.len(), 10);
    }

    #[test]
    fn deterministic_and_noise_dependent() {
        let a = monte_carlo_uncertainty(&raw(), &cfg(), 3, 1e3, 11).unwrap();
        let b = monte_carlo_uncertainty(&raw(), &cfg(), 3, 1e3, 11).unwrap();
        assert_eq!(a, b);
        let quiet = monte_carlo_uncertainty(&raw(), &cfg(), 3, 1e6, 11).unwrap();
        assert!(quiet.chirp_s.sd < a.chirp_s.sd);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(monte_carlo_uncertainty(&raw(), &cfg(), 1, 1e3, 0).is_err());
        assert!(monte_carlo_uncertainty(&raw(), &cfg(), 3, 0.0, 0).is_err());
    }
}
