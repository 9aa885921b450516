//! Measurements in, fitted phase and witness out.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_jsa, tbp_numeric, AnalysisConfig, PhaseAnalysis, WitnessReport};
use crate::error::Result;
use crate::grid::{to_domains, Domain};
use crate::preprocess::{preprocess_measurements, PreprocessConfig, RawMeasurements};
use crate::retrieve::{run_retrieval, MeasurementSet, RetrievalConfig, RetrievalResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    /// `None` feeds the raw planes to the retrieval unchanged; they must
    /// then already sit on shared/conjugate axes.
    pub preprocess: Option<PreprocessConfig>,
    pub retrieval: RetrievalConfig,
    pub analysis: AnalysisConfig,
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.preprocess {
            p.validate()?;
        }
        self.retrieval.validate()?;
        self.analysis.validate()
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub preprocess_s: f64,
    pub retrieval_s: f64,
    pub analysis_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    /// Constraints actually used by the retrieval.
    pub measurements: MeasurementSet,
    pub retrieval: RetrievalResult,
    pub analysis: PhaseAnalysis,
    pub witness_measured: WitnessReport,
    pub witness_reconstructed: WitnessReport,
    pub timings: StageTimings,
}

pub fn prepare_measurements(raw: &RawMeasurements, preprocess: Option<&PreprocessConfig>) -> Result<MeasurementSet> {
    match preprocess {
        Some(cfg) => preprocess_measurements(raw, cfg),
        None => MeasurementSet::new(raw.i_ww.clone(), raw.i_wt.clone(), raw.i_tw.clone(), raw.i_tt.clone()),
    }
}

/// Witness of a reconstructed amplitude, from its own spectral and temporal intensities.
pub fn witness_of(retrieval: &RetrievalResult) -> Result<WitnessReport> {
    let tt = to_domains(&retrieval.jsa, Domain::Time, Domain::Time)?;
    tbp_numeric(&retrieval.jsa.intensity(), &tt.intensity())
}

pub fn analyze_retrieval(
    m: &MeasurementSet,
    retrieval: &RetrievalResult,
    cfg: &AnalysisConfig,
) -> Result<(PhaseAnalysis, WitnessReport, WitnessReport)> {
    let analysis = analyze_jsa(&retrieval.jsa, Some(&m.i_ww), cfg)?;
    let measured = tbp_numeric(&m.i_ww, &m.i_tt)?;
    Ok((analysis, measured, witness_of(retrieval)?))
}

pub fn reconstruct(raw: &RawMeasurements, cfg: &ReconstructionConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let t0 = Instant::now();
    let measurements = prepare_measurements(raw, cfg.preprocess.as_ref())?;
    let t1 = Instant::now();
    let retrieval = run_retrieval(&measurements, &cfg.retrieval)?;
    let t2 = Instant::now();
    let (analysis, witness_measured, witness_reconstructed) =
        analyze_retrieval(&measurements, &retrieval, &cfg.analysis)?;
    let t3 = Instant::now();
    Ok(Reconstruction {
        measurements,
        retrieval,
        analysis,
        witness_measured,
        witness_reconstructed,
        timings: StageTimings {
            preprocess_s: (t1 - t0).as_secs_f64(),
            retrieval_s: (t2 - t1).as_secs_f64(),
            analysis_s: (t3 - t2).as_secs_f64(),
        },
    })
}
