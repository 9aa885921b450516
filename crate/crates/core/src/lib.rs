//! Reconstruction of two-photon joint spectral amplitudes from four joint
//! intensity measurements (frequency/frequency, frequency/time, time/frequency,
//! time/time), together with a forward model of those measurements.
//!
//! Library units: angular frequency in rad/fs, time in fs, chirp in fs²,
//! crystal length in µm.

pub mod analysis;
pub mod error;
mod fft;
pub mod gating;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod retrieve;
pub mod seed;
pub mod synth;
pub mod units;

pub use analysis::{
    analyze_jsa, fit_phase_poly, monte_carlo_uncertainty, sigma_mask, tbp_numeric, unwrap_phase_2d, AnalysisConfig,
    FitWeights, MonteCarloReport, PhaseAnalysis, PhaseFit, WitnessReport,
};
pub use error::{Error, Result};
pub use gating::{
    gate_spectrum, phase_match, poissonize, simulate_ideal, simulate_measurements, GatePulse, GatingConfig,
    GatingModel, MeasurementAxes, RefractiveModel, SimulatedMeasurements,
};
pub use grid::{
    conjugate_axis, to_domains, total_power, transform_photon, Axis, ComplexGrid2D, Direction, Domain, IntensityGrid2D,
    Photon,
};
pub use pipeline::{reconstruct, Reconstruction, ReconstructionConfig, StageTimings};
pub use preprocess::{preprocess_measurements, wiener_deconvolve, PreprocessConfig, RawMeasurements};
pub use retrieve::{
    frog_error, project_magnitude, run_retrieval, ConstraintMask, InitialGuess, MeasurementSet, Plane, RetrievalConfig,
    RetrievalResult,
};
pub use synth::{apply_chirp, gaussian_jsa, schmidt_purity, tbp_gaussian, GaussianStateParams, StateConfig};
