use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde_json::{json, Value};

use biphoton::io::{read_complex, read_intensity, write_complex, write_intensity};
use biphoton::pipeline::{prepare_measurements, witness_of};
use biphoton::seed::derive_seed;
use biphoton::{
    analyze_jsa, monte_carlo_uncertainty, poissonize, run_retrieval, simulate_ideal, simulate_measurements,
    tbp_numeric, to_domains, AnalysisConfig, ComplexGrid2D, ConstraintMask, Domain, MeasurementAxes, MeasurementSet,
    Plane, RawMeasurements, ReconstructionConfig, RetrievalConfig, RetrievalResult,
};

use crate::export::{self, AnalysisDocument, ChirpUnits, ReportInputs, ReportedChirps};
use crate::manifest::{MeasurementSource, PipelineManifest, SimulationMode, PLANE_FILES};

/// Seed streams derived from the global seed.
const STREAM_NOISE: u64 = 0;
const STREAM_RETRIEVAL: u64 = 1;
const STREAM_MONTE_CARLO: u64 = 2;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NON_FINITE: u8 = 3;
pub const EXIT_FIT: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

pub trait OrExit<T> {
    fn or_exit(self, code: u8) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> CliResult<T> {
        self.map_err(|e| CliError { code, error: e.into() })
    }
}

fn retrieval_failure(e: biphoton::Error) -> CliError {
    let code = match e {
        biphoton::Error::NonFinite { .. } => EXIT_NON_FINITE,
        biphoton::Error::Parameter(_) | biphoton::Error::Input(_) | biphoton::Error::DomainMismatch(_) => EXIT_CONFIG,
        _ => 1,
    };
    CliError { code, error: e.into() }
}

fn plane_index(p: Plane) -> u64 {
    Plane::ALL.iter().position(|&q| q == p).unwrap_or(0) as u64
}

/// Global options shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Globals {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub units: ChirpUnits,
}

impl Globals {
    /// The manifest with `--seed` and `--out` applied, validated.
    pub fn manifest(&self) -> CliResult<PipelineManifest> {
        let path = self
            .manifest
            .as_ref()
            .ok_or_else(|| anyhow!("--manifest is required"))
            .or_exit(EXIT_CONFIG)?;
        let mut m = PipelineManifest::load(path).or_exit(EXIT_CONFIG)?;
        if let Some(s) = self.seed {
            m.seed = Some(s);
        }
        if let Some(o) = &self.out {
            m.output_dir = o.clone();
        }
        m.validate().or_exit(EXIT_CONFIG)?;
        Ok(m)
    }

    fn optional_manifest(&self) -> CliResult<Option<PipelineManifest>> {
        match &self.manifest {
            Some(_) => self.manifest().map(Some),
            None => Ok(None),
        }
    }
}

fn manifest_value(m: &PipelineManifest) -> Value {
    serde_json::to_value(m).unwrap_or(Value::Null)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .or_exit(1)
}

pub fn load_raw(src: &MeasurementSource) -> CliResult<RawMeasurements> {
    let [ww, wt, tw, tt] = src
        .paths()
        .map(|p| read_intensity(&p).with_context(|| format!("cannot load measurement {}", p.display())));
    RawMeasurements::new(
        ww.or_exit(EXIT_CONFIG)?,
        wt.or_exit(EXIT_CONFIG)?,
        tw.or_exit(EXIT_CONFIG)?,
        tt.or_exit(EXIT_CONFIG)?,
    )
    .or_exit(EXIT_CONFIG)
}

pub struct Simulated {
    pub truth: ComplexGrid2D,
    /// Noiseless planes.
    pub clean: MeasurementSet,
    /// Planes after optional counting noise.
    pub raw: RawMeasurements,
    pub edge_fraction: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn simulate(m: &PipelineManifest) -> CliResult<Simulated> {
    let truth = m.state.generate().or_exit(EXIT_CONFIG)?;
    let mut warnings = Vec::new();
    let (clean, edge_fraction) = match m.simulation.mode {
        SimulationMode::Ideal => (simulate_ideal(&truth).or_exit(EXIT_CONFIG)?, None),
        SimulationMode::Gated => {
            let gm = m.gating.model().or_exit(EXIT_CONFIG)?;
            let sim = simulate_measurements(&truth, &gm, &MeasurementAxes::for_state(&truth)).or_exit(EXIT_CONFIG)?;
            if sim.coverage_warning {
                let w = format!(
                    "gated delay axes truncate the signal: edge fraction {:.3e} of peak",
                    sim.edge_fraction
                );
                log::warn!("{w}");
                warnings.push(w);
            }
            (sim.set, Some(sim.edge_fraction))
        }
    };
    let raw = match m.simulation.peak_counts {
        None => RawMeasurements::from(clean.clone()),
        Some(peak) => {
            let noise_seed = derive_seed(m.seed.unwrap_or(0), STREAM_NOISE);
            RawMeasurements::from(clean.clone())
                .try_map(|p, g| poissonize(g, peak, derive_seed(noise_seed, plane_index(p))))
                .or_exit(EXIT_CONFIG)?
        }
    };
    Ok(Simulated {
        truth,
        clean,
        raw,
        edge_fraction,
        warnings,
    })
}

fn write_planes(dir: &Path, raw: &RawMeasurements, header: impl Fn(Plane) -> Value) -> CliResult<()> {
    for (p, name) in Plane::ALL.iter().zip(PLANE_FILES) {
        write_intensity(&dir.join(name), raw.get(*p), Some(&header(*p))).or_exit(1)?;
    }
    Ok(())
}

pub fn cmd_simulate(g: &Globals) -> CliResult<()> {
    let m = g.manifest()?;
    if m.measurements.is_some() {
        return Err(anyhow!("manifest names measurement files; nothing to simulate")).or_exit(EXIT_CONFIG);
    }
    let sim = simulate(&m)?;
    create_dir(&m.output_dir)?;
    let echo = manifest_value(&m);
    write_planes(&m.output_dir, &sim.raw, |p| {
        json!({
            "manifest": echo,
            "plane": p.code(),
            "mode": m.simulation.mode,
            "peak_counts": m.simulation.peak_counts,
            "edge_fraction": sim.edge_fraction,
        })
    })?;
    write_complex(
        &m.output_dir.join("truth.json"),
        &sim.truth,
        Some(&json!({ "manifest": echo, "kind": "truth" })),
    )
    .or_exit(1)?;
    log::info!("wrote 5 files to {}", m.output_dir.display());
    Ok(())
}

/// Measurements named on the command line: four files, a directory, or a
/// manifest (whose files or simulation output directory are used, with its
/// preprocessing applied).
pub struct ResolvedMeasurements {
    pub raw: RawMeasurements,
    pub manifest: Option<PipelineManifest>,
}

pub fn resolve_measurements(paths: &[PathBuf], g: &Globals) -> CliResult<ResolvedMeasurements> {
    match paths {
        [ww, wt, tw, tt] => {
            let src = MeasurementSource::Files {
                i_ww: ww.clone(),
                i_wt: wt.clone(),
                i_tw: tw.clone(),
                i_tt: tt.clone(),
            };
            check_exists(&src)?;
            Ok(ResolvedMeasurements {
                raw: load_raw(&src)?,
                manifest: None,
            })
        }
        [one] if one.is_dir() => {
            let src = MeasurementSource::Dir(one.clone());
            check_exists(&src)?;
            Ok(ResolvedMeasurements {
                raw: load_raw(&src)?,
                manifest: None,
            })
        }
        [one] => {
            let mg = Globals {
                manifest: Some(one.clone()),
                out: None,
                ..g.clone()
            };
            let m = mg.manifest()?;
            let src = m
                .measurements
                .clone()
                .unwrap_or(MeasurementSource::Dir(m.output_dir.clone()));
            check_exists(&src)?;
            Ok(ResolvedMeasurements {
                raw: load_raw(&src)?,
                manifest: Some(m),
            })
        }
        _ => Err(anyhow!(
            "--measurements takes one directory or manifest, or four plane files"
        ))
        .or_exit(EXIT_CONFIG),
    }
}

fn check_exists(src: &MeasurementSource) -> CliResult<()> {
    for p in src.paths() {
        if !p.is_file() {
            return Err(anyhow!("measurement file {} does not exist", p.display())).or_exit(EXIT_CONFIG);
        }
    }
    Ok(())
}

pub fn cmd_preprocess(g: &Globals, measurements: &[PathBuf]) -> CliResult<()> {
    let out = g
        .out
        .clone()
        .ok_or_else(|| anyhow!("--out <dir> is required"))
        .or_exit(EXIT_CONFIG)?;
    let base = g.optional_manifest()?;
    let resolved = resolve_measurements(measurements, g)?;
    let cfg = base
        .as_ref()
        .or(resolved.manifest.as_ref())
        .and_then(|m| m.preprocess)
        .unwrap_or_default();
    cfg.validate().or_exit(EXIT_CONFIG)?;
    let set = prepare_measurements(&resolved.raw, Some(&cfg)).or_exit(EXIT_CONFIG)?;
    create_dir(&out)?;
    let header = serde_json::to_value(cfg).unwrap_or(Value::Null);
    write_planes(
        &out,
        &RawMeasurements::from(set),
        |p| json!({ "preprocess": header, "plane": p.code() }),
    )
}

/// Constraints for retrieval: preprocessed when a manifest asks for it.
fn constraints(resolved: &ResolvedMeasurements) -> CliResult<MeasurementSet> {
    let pre = resolved.manifest.as_ref().and_then(|m| m.preprocess);
    prepare_measurements(&resolved.raw, pre.as_ref()).or_exit(EXIT_CONFIG)
}

fn result_header(r: &RetrievalResult, mask: ConstraintMask, manifest: Option<&PipelineManifest>) -> Value {
    let mut h = json!({
        "error_history": r.error_history_ww,
        "error_final_ww": r.error_final_ww(),
        "error_final_tt": r.error_final_tt,
        "seed": r.seed,
        "iterations": r.iterations_run,
        "constraint_mask": mask,
    });
    if let Some(m) = manifest {
        h["manifest"] = manifest_value(m);
    }
    h
}

pub fn retrieval_seed(global: Option<u64>, fallback: u64) -> u64 {
    global.map(|s| derive_seed(s, STREAM_RETRIEVAL)).unwrap_or(fallback)
}

pub struct RetrieveArgs {
    pub measurements: Vec<PathBuf>,
    pub iterations: Option<usize>,
    pub mask: Option<ConstraintMask>,
    pub restarts: Option<usize>,
}

pub fn cmd_retrieve(g: &Globals, a: &RetrieveArgs) -> CliResult<()> {
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("result.json"));
    let resolved = resolve_measurements(&a.measurements, g)?;
    let manifest = match g.optional_manifest()? {
        Some(m) => Some(m),
        None => resolved.manifest.clone(),
    };
    let mut cfg = manifest.as_ref().map(|m| m.retrieval).unwrap_or_default();
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    if let Some(mask) = a.mask {
        cfg.constraint_mask = mask;
    }
    if let Some(r) = a.restarts {
        cfg.restarts = r;
    }
    cfg.seed = retrieval_seed(g.seed.or(manifest.as_ref().and_then(|m| m.seed)), cfg.seed);
    cfg.validate().or_exit(EXIT_CONFIG)?;
    let set = constraints(&resolved)?;
    let r = run_retrieval(&set, &cfg).map_err(retrieval_failure)?;
    log::info!(
        "final ww error {:.3e}, tt error {:.3e}",
        r.error_final_ww(),
        r.error_final_tt
    );
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_complex(
        &out,
        &r.jsa,
        Some(&result_header(&r, cfg.constraint_mask, manifest.as_ref())),
    )
    .or_exit(1)
}

pub struct AnalyzeArgs {
    pub result: PathBuf,
    pub measurements: Vec<PathBuf>,
    pub fit_order: Option<u32>,
    pub mask_sigma: Option<f64>,
}

/// Reconstruction summary rebuilt from a result file.
fn retrieval_from_file(path: &Path) -> CliResult<RetrievalResult> {
    let jsa = read_complex(path).or_exit(EXIT_CONFIG)?;
    let header = match biphoton::io::read_grid(path).or_exit(EXIT_CONFIG)? {
        biphoton::io::GridFile::Complex(_, h) => h.unwrap_or(Value::Null),
        biphoton::io::GridFile::Intensity(..) => Value::Null,
    };
    let history: Vec<f64> = serde_json::from_value(header["error_history"].clone()).unwrap_or_default();
    Ok(RetrievalResult {
        jsa,
        iterations_run: history.len(),
        error_history_ww: history,
        error_final_tt: header["error_final_tt"].as_f64().unwrap_or(f64::NAN),
        seed: header["seed"].as_u64().unwrap_or(0),
    })
}

pub fn cmd_analyze(g: &Globals, a: &AnalyzeArgs) -> CliResult<()> {
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("analysis.json"));
    if !a.result.is_file() {
        return Err(anyhow!("result file {} does not exist", a.result.display())).or_exit(EXIT_CONFIG);
    }
    let resolved = if a.measurements.is_empty() {
        None
    } else {
        Some(resolve_measurements(&a.measurements, g)?)
    };
    let manifest = resolved.as_ref().and_then(|r| r.manifest.clone());
    let mut cfg = manifest.as_ref().map(|m| m.analysis.clone()).unwrap_or_default();
    if let Some(o) = a.fit_order {
        cfg.fit_order = o;
    }
    if let Some(s) = a.mask_sigma {
        cfg.mask_sigma = s;
    }
    cfg.validate().or_exit(EXIT_CONFIG)?;
    let r = retrieval_from_file(&a.result)?;
    let set = resolved.as_ref().map(constraints).transpose()?;
    let measured_ww = set
        .as_ref()
        .map(|s| &s.i_ww)
        .filter(|w| w.axis_s.approx_eq(&r.jsa.axis_s, 1e-9));
    let analysis = analyze_jsa(&r.jsa, measured_ww, &cfg).or_exit(EXIT_FIT)?;
    let witness_measured = set
        .as_ref()
        .map(|s| tbp_numeric(&s.i_ww, &s.i_tt))
        .transpose()
        .or_exit(EXIT_FIT)?;
    let witness_reconstructed = witness_of(&r).or_exit(EXIT_FIT)?;
    let mc = match (&manifest, &resolved) {
        (Some(m), Some(res)) => run_monte_carlo(m, &res.raw, &cfg)?,
        _ => None,
    };
    let doc = AnalysisDocument {
        fit: &analysis.fit,
        mask: &analysis.mask,
        centers: analysis.centers,
        reported: ReportedChirps::new(&analysis, mc.as_ref(), g.units),
        witness_measured,
        witness_reconstructed,
        monte_carlo: mc.as_ref(),
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    export::write(&out, &to_json(&doc)?).or_exit(1)
}

fn to_json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").or_exit(1)
}

fn reconstruction_config(m: &PipelineManifest, analysis: &AnalysisConfig) -> ReconstructionConfig {
    ReconstructionConfig {
        preprocess: m.preprocess,
        retrieval: RetrievalConfig {
            seed: retrieval_seed(m.seed, m.retrieval.seed),
            ..m.retrieval
        },
        analysis: analysis.clone(),
    }
}

fn run_monte_carlo(
    m: &PipelineManifest,
    raw: &RawMeasurements,
    analysis: &AnalysisConfig,
) -> CliResult<Option<biphoton::MonteCarloReport>> {
    let Some(mc) = &m.monte_carlo else {
        return Ok(None);
    };
    let seed = derive_seed(m.seed.unwrap_or(0), STREAM_MONTE_CARLO);
    monte_carlo_uncertainty(
        raw,
        &reconstruction_config(m, analysis),
        mc.trials,
        mc.peak_counts,
        seed,
    )
    .map(Some)
    .or_exit(EXIT_FIT)
}

fn plot_exports(dir: &Path, set: &MeasurementSet, r: &RetrievalResult) -> CliResult<()> {
    create_dir(dir)?;
    for p in Plane::ALL {
        export::write(
            &dir.join(format!("measured_{}.csv", p.code())),
            &export::grid_csv(set.get(p), "intensity"),
        )
        .or_exit(1)?;
    }
    let jsa = biphoton::retrieve::gauge_fix(&r.jsa);
    let intensity = jsa.intensity();
    let phase = intensity.with_values(jsa.phase());
    let tt = to_domains(&jsa, Domain::Time, Domain::Time).or_exit(1)?.intensity();
    let files = [
        (
            "reconstructed_ww_intensity.csv",
            export::grid_csv(&intensity, "intensity"),
        ),
        ("reconstructed_ww_phase.csv", export::grid_csv(&phase, "phase_rad")),
        ("reconstructed_tt_intensity.csv", export::grid_csv(&tt, "intensity")),
        ("error_history.csv", export::history_csv(&r.error_history_ww)),
    ];
    for (name, text) in files {
        export::write(&dir.join(name), &text).or_exit(1)?;
    }
    Ok(())
}

pub fn cmd_pipeline(g: &Globals) -> CliResult<()> {
    let m = g.manifest()?;
    let mut timings: Vec<(&'static str, f64)> = Vec::new();
    let mut warnings = Vec::new();

    let t = Instant::now();
    let (raw, clean, applied) = match &m.measurements {
        Some(src) => (load_raw(src)?, None, None),
        None => {
            let sim = simulate(&m)?;
            warnings.extend(sim.warnings);
            timings.push(("simulate", t.elapsed().as_secs_f64()));
            let applied = (m.state.params.chirp_s, m.state.params.chirp_i);
            (sim.raw, Some(RawMeasurements::from(sim.clean)), Some(applied))
        }
    };

    let t = Instant::now();
    let set = prepare_measurements(&raw, m.preprocess.as_ref()).or_exit(EXIT_CONFIG)?;
    timings.push(("preprocess", t.elapsed().as_secs_f64()));

    let cfg = reconstruction_config(&m, &m.analysis);
    let t = Instant::now();
    let r = run_retrieval(&set, &cfg.retrieval).map_err(retrieval_failure)?;
    timings.push(("retrieval", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let analysis = analyze_jsa(&r.jsa, Some(&set.i_ww), &cfg.analysis).or_exit(EXIT_FIT)?;
    let witness_measured = tbp_numeric(&set.i_ww, &set.i_tt).or_exit(EXIT_FIT)?;
    let witness_reconstructed = witness_of(&r).or_exit(EXIT_FIT)?;
    timings.push(("analysis", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let mc = run_monte_carlo(&m, clean.as_ref().unwrap_or(&raw), &cfg.analysis)?;
    if mc.is_some() {
        timings.push(("monte carlo", t.elapsed().as_secs_f64()));
    }

    create_dir(&m.output_dir)?;
    let out = &m.output_dir;
    write_complex(
        &out.join("result.json"),
        &r.jsa,
        Some(&result_header(&r, cfg.retrieval.constraint_mask, Some(&m))),
    )
    .or_exit(1)?;
    let doc = AnalysisDocument {
        fit: &analysis.fit,
        mask: &analysis.mask,
        centers: analysis.centers,
        reported: ReportedChirps::new(&analysis, mc.as_ref(), g.units),
        witness_measured: Some(witness_measured),
        witness_reconstructed,
        monte_carlo: mc.as_ref(),
    };
    export::write(&out.join("analysis.json"), &to_json(&doc)?).or_exit(1)?;
    plot_exports(&out.join("plots"), &set, &r)?;
    let report = export::report_text(&ReportInputs {
        seed: m.seed,
        retrieval: &r,
        analysis: &analysis,
        applied,
        witness_measured: Some(&witness_measured),
        witness_reconstructed: &witness_reconstructed,
        monte_carlo: mc.as_ref(),
        units: g.units,
        timings: &timings,
        warnings: &warnings,
    });
    export::write(&out.join("report.txt"), &report).or_exit(1)?;
    log::info!("wrote results to {}", out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_streams_differ() {
        assert_ne!(retrieval_seed(Some(1), 0), derive_seed(1, STREAM_NOISE));
        assert_eq!(retrieval_seed(None, 17), 17);
    }

    #[test]
    fn exit_codes_from_core_errors() {
        assert_eq!(
            retrieval_failure(biphoton::Error::NonFinite { iteration: 3 }).code,
            EXIT_NON_FINITE
        );
        assert_eq!(retrieval_failure(biphoton::Error::Input("x".into())).code, EXIT_CONFIG);
    }
}
