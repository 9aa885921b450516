//! Pipeline manifest: every stage's configuration plus paths and the seed.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use biphoton::{AnalysisConfig, GatingConfig, InitialGuess, PreprocessConfig, RetrievalConfig, StateConfig};

/// Measured plane files, either a directory holding `i_ww.json`,
/// `i_wt.json`, `i_tw.json`, `i_tt.json` or the four paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasurementSource {
    Dir(PathBuf),
    Files {
        i_ww: PathBuf,
        i_wt: PathBuf,
        i_tw: PathBuf,
        i_tt: PathBuf,
    },
}

impl MeasurementSource {
    pub fn paths(&self) -> [PathBuf; 4] {
        match self {
            MeasurementSource::Dir(d) => PLANE_FILES.map(|f| d.join(f)),
            MeasurementSource::Files { i_ww, i_wt, i_tw, i_tt } => {
                [i_ww.clone(), i_wt.clone(), i_tw.clone(), i_tt.clone()]
            }
        }
    }

    fn rebased(&self, base: &Path) -> Self {
        match self {
            MeasurementSource::Dir(d) => MeasurementSource::Dir(base.join(d)),
            MeasurementSource::Files { i_ww, i_wt, i_tw, i_tt } => MeasurementSource::Files {
                i_ww: base.join(i_ww),
                i_wt: base.join(i_wt),
                i_tw: base.join(i_tw),
                i_tt: base.join(i_tt),
            },
        }
    }
}

/// File names of the four planes, in ww, wt, tw, tt order.
pub const PLANE_FILES: [&str; 4] = ["i_ww.json", "i_wt.json", "i_tw.json", "i_tt.json"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Optical gating forward model.
    #[default]
    Gated,
    /// Exact intensities of the state's four transforms.
    Ideal,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub mode: SimulationMode,
    /// Poisson counts at each plane's peak; `None` keeps the planes noiseless.
    pub peak_counts: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub peak_counts: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineManifest {
    pub state: StateConfig,
    pub gating: GatingConfig,
    pub simulation: SimulationConfig,
    /// Use these files instead of simulating.
    pub measurements: Option<MeasurementSource>,
    /// `None` skips preprocessing.
    pub preprocess: Option<PreprocessConfig>,
    pub retrieval: RetrievalConfig,
    pub analysis: AnalysisConfig,
    pub monte_carlo: Option<MonteCarloConfig>,
    pub output_dir: PathBuf,
    /// Global seed. Every random stream is derived from it.
    pub seed: Option<u64>,
}

impl Default for PipelineManifest {
    fn default() -> Self {
        Self {
            state: StateConfig::default(),
            gating: GatingConfig::default(),
            simulation: SimulationConfig::default(),
            measurements: None,
            preprocess: Some(PreprocessConfig::default()),
            retrieval: RetrievalConfig::default(),
            analysis: AnalysisConfig::default(),
            monte_carlo: None,
            output_dir: PathBuf::from("out"),
            seed: None,
        }
    }
}

impl PipelineManifest {
    /// Reads a manifest and resolves its relative paths against the
    /// manifest's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        let mut m: PipelineManifest =
            serde_json::from_str(&text).with_context(|| format!("cannot parse manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        m.output_dir = base.join(&m.output_dir);
        m.measurements = m.measurements.as_ref().map(|s| s.rebased(base));
        if let Some(p) = &m.gating.refractive_table_path {
            m.gating.refractive_table_path = Some(base.join(p));
        }
        Ok(m)
    }

    pub fn is_stochastic(&self) -> bool {
        let noisy = self.measurements.is_none() && self.simulation.peak_counts.is_some();
        noisy || self.retrieval.init == InitialGuess::RandomPhase || self.monte_carlo.is_some()
    }

    /// Checks every configuration block and that referenced files exist.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.measurements.is_none() {
            self.state.params.validate()?;
            self.state.generate()?;
            if self.simulation.mode == SimulationMode::Gated {
                self.gating.model()?.validate()?;
            }
            if let Some(c) = self.simulation.peak_counts {
                if !(c > 0.0) || !c.is_finite() {
                    bail!("simulation.peak_counts must be finite and > 0");
                }
            }
        }
        if let Some(src) = &self.measurements {
            for p in src.paths() {
                if !p.is_file() {
                    bail!("measurement file {} does not exist", p.display());
                }
            }
        }
        if let Some(p) = &self.gating.refractive_table_path {
            if !p.is_file() {
                bail!("refractive table {} does not exist", p.display());
            }
        }
        if let Some(p) = &self.preprocess {
            p.validate()?;
        }
        self.retrieval.validate()?;
        self.analysis.validate()?;
        if let Some(mc) = &self.monte_carlo {
            if mc.trials < 2 {
                bail!("monte_carlo.trials must be >= 2");
            }
            if !(mc.peak_counts > 0.0) || !mc.peak_counts.is_finite() {
                bail!("monte_carlo.peak_counts must be finite and > 0");
            }
        }
        if self.is_stochastic() && self.seed.is_none() {
            bail!("a seed is required: set \"seed\" in the manifest or pass --seed");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_fields() {
        let m: PipelineManifest = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(m.seed, Some(3));
        assert!(m.preprocess.is_some());
        m.validate().unwrap();
        assert!(serde_json::from_str::<PipelineManifest>(r#"{"sed": 3}"#).is_err());
        let skip: PipelineManifest = serde_json::from_str(r#"{"preprocess": null, "seed": 1}"#).unwrap();
        assert!(skip.preprocess.is_none());
    }

    #[test]
    fn seed_required_for_random_steps() {
        let m = PipelineManifest::default();
        assert!(m.validate().is_err());
        let flat = PipelineManifest {
            retrieval: RetrievalConfig {
                init: InitialGuess::FlatPhase,
                ..Default::default()
            },
            ..Default::default()
        };
        flat.validate().unwrap();
    }

    #[test]
    fn measurement_sources() {
        let d: MeasurementSource = serde_json::from_str(r#""data""#).unwrap();
        assert_eq!(d.paths()[3], PathBuf::from("data/i_tt.json"));
        let f: MeasurementSource = serde_json::from_str(r#"{"i_ww":"a","i_wt":"b","i_tw":"c","i_tt":"d"}"#).unwrap();
        assert_eq!(f.paths()[1], PathBuf::from("b"));
        let m = PipelineManifest {
            measurements: Some(MeasurementSource::Dir(PathBuf::from("/nonexistent/dir"))),
            seed: Some(0),
            ..Default::default()
        };
        assert!(m.validate().unwrap_err().to_string().contains("does not exist"));
    }
}
