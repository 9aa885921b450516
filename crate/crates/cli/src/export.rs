//! Text report and CSV plot data.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use serde::Serialize;

use biphoton::analysis::MonteCarloReport;
use biphoton::units::FS2_PER_PS2;
use biphoton::{IntensityGrid2D, PhaseAnalysis, RetrievalResult, WitnessReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChirpUnits {
    #[default]
    Fs2,
    Ps2,
}

impl ChirpUnits {
    pub fn label(self) -> &'static str {
        match self {
            ChirpUnits::Fs2 => "fs^2",
            ChirpUnits::Ps2 => "ps^2",
        }
    }

    pub fn convert_fs2(self, v: f64) -> f64 {
        match self {
            ChirpUnits::Fs2 => v,
            ChirpUnits::Ps2 => v / FS2_PER_PS2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportedChirps {
    pub units: ChirpUnits,
    pub chirp_s: f64,
    pub chirp_i: f64,
    pub cross_term: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chirp_s_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chirp_i_sd: Option<f64>,
}

impl ReportedChirps {
    pub fn new(a: &PhaseAnalysis, mc: Option<&MonteCarloReport>, units: ChirpUnits) -> Self {
        Self {
            units,
            chirp_s: units.convert_fs2(a.fit.chirp_s),
            chirp_i: units.convert_fs2(a.fit.chirp_i),
            cross_term: units.convert_fs2(a.fit.cross_term),
            chirp_s_sd: mc.map(|m| units.convert_fs2(m.chirp_s.sd)),
            chirp_i_sd: mc.map(|m| units.convert_fs2(m.chirp_i.sd)),
        }
    }
}

/// The analysis.json document. The fit itself is always in fs².
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisDocument<'a> {
    pub fit: &'a biphoton::PhaseFit,
    pub mask: &'a biphoton::analysis::MaskInfo,
    pub centers: (f64, f64),
    pub reported: ReportedChirps,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_measured: Option<WitnessReport>,
    pub witness_reconstructed: WitnessReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<&'a MonteCarloReport>,
}

pub struct ReportInputs<'a> {
    pub seed: Option<u64>,
    pub retrieval: &'a RetrievalResult,
    pub analysis: &'a PhaseAnalysis,
    pub applied: Option<(f64, f64)>,
    pub witness_measured: Option<&'a WitnessReport>,
    pub witness_reconstructed: &'a WitnessReport,
    pub monte_carlo: Option<&'a MonteCarloReport>,
    pub units: ChirpUnits,
    pub timings: &'a [(&'static str, f64)],
    pub warnings: &'a [String],
}

fn witness_line(label: &str, w: &WitnessReport) -> String {
    format!(
        "witness ({label}): d(ws+wi) = {:.6e} rad/fs, d(ts-ti) = {:.4} fs, product = {:.4} ({})\n",
        w.sigma_sum_freq,
        w.sigma_diff_time,
        w.product,
        if w.entangled { "entangled" } else { "not certified" }
    )
}

pub fn report_text(r: &ReportInputs) -> String {
    let u = r.units;
    let mut s = String::from("biphoton pipeline report\n\n");
    if let Some(seed) = r.seed {
        let _ = writeln!(s, "seed: {seed} (retrieval seed {})", r.retrieval.seed);
    }
    let n = r.retrieval.jsa.values.dim();
    let _ = writeln!(s, "grid: {} x {}, iterations: {}", n.0, n.1, r.retrieval.iterations_run);
    let _ = writeln!(s, "final ww trace error: {:.6e}", r.retrieval.error_final_ww());
    let _ = writeln!(s, "final tt trace error: {:.6e}", r.retrieval.error_final_tt);
    s.push('\n');
    let f = &r.analysis.fit;
    let _ = writeln!(s, "fitted chirp_s: {:.6} {}", u.convert_fs2(f.chirp_s), u.label());
    let _ = writeln!(s, "fitted chirp_i: {:.6} {}", u.convert_fs2(f.chirp_i), u.label());
    let _ = writeln!(s, "fitted cross term: {:.6} {}", u.convert_fs2(f.cross_term), u.label());
    if let Some((a_s, a_i)) = r.applied {
        let _ = writeln!(
            s,
            "applied chirps: {:.6} / {:.6} {}",
            u.convert_fs2(a_s),
            u.convert_fs2(a_i),
            u.label()
        );
    }
    let _ = writeln!(
        s,
        "fit: order {}, residual rms {:.3e} rad over {} pixels, condition {:.2e}",
        f.order, f.residual_rms, f.mask_pixel_count, f.condition_number
    );
    if let Some(mc) = r.monte_carlo {
        let _ = writeln!(
            s,
            "monte carlo ({} trials, {} failed, peak {:.3e} counts): sd chirp_s {:.6} {u2}, sd chirp_i {:.6} {u2}",
            mc.trials,
            mc.failed,
            mc.peak_counts,
            u.convert_fs2(mc.chirp_s.sd),
            u.convert_fs2(mc.chirp_i.sd),
            u2 = u.label()
        );
    }
    s.push('\n');
    if let Some(w) = r.witness_measured {
        s.push_str(&witness_line("measured", w));
    }
    s.push_str(&witness_line("reconstructed", r.witness_reconstructed));
    s.push_str("\nwall clock:\n");
    for (stage, secs) in r.timings {
        let _ = writeln!(s, "  {stage:<12} {secs:.3} s");
    }
    for w in r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Long-format CSV: signal coordinate, idler coordinate, value.
pub fn grid_csv(g: &IntensityGrid2D, value_label: &str) -> String {
    let xs = g.axis_s.coordinates();
    let ys = g.axis_i.coordinates();
    let mut s = format!(
        "{}_s_{},{}_i_{},{value_label}\n",
        domain_name(g, true),
        g.axis_s.units(),
        domain_name(g, false),
        g.axis_i.units()
    );
    for ((a, b), v) in g.values.indexed_iter() {
        let _ = writeln!(s, "{},{},{}", xs[a], ys[b], v);
    }
    s
}

fn domain_name(g: &IntensityGrid2D, signal: bool) -> &'static str {
    let a = if signal { &g.axis_s } else { &g.axis_i };
    match a.domain {
        biphoton::Domain::Frequency => "omega",
        biphoton::Domain::Time => "t",
    }
}

pub fn history_csv(errors: &[f64]) -> String {
    let mut s = String::from("iteration,error_ww\n");
    for (k, e) in errors.iter().enumerate() {
        let _ = writeln!(s, "{},{}", k + 1, e);
    }
    s
}

pub fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
