//! Direct quadrature of the doubly gated time plane, for checking the fast
//! path on small grids. Cost is `n^4 u^2`; keep `n <= 16`.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{gate_spectrum, GatingModel};
use crate::error::{Error, Result};
use crate::grid::{conjugate_axis, Axis, ComplexGrid2D, Domain, IntensityGrid2D};

/// Upconverted frequencies spanning the whole axis plus six gate widths,
/// independent of the integrand support used by the fast path.
fn u_grid(axis: &Axis, gm: &GatingModel, count: usize) -> (Vec<f64>, f64) {
    let reach = 6.0 * gm.gate.sigma;
    let a = axis.offset(0) - reach;
    let b = axis.offset(axis.count - 1) + reach;
    let du = (b - a) / (count - 1) as f64;
    (
        (0..count)
            .map(|k| axis.center + gm.gate.center + a + k as f64 * du)
            .collect(),
        du,
    )
}

/// Per side: `gate(omega_u - omega, tau) Phi(omega, omega_u)` for every
/// (delay, u, omega) triple, delays from the conjugate axis.
fn side_factors(axis: &Axis, gm: &GatingModel, count: usize) -> Result<(Vec<Array2<Complex64>>, f64)> {
    let model = gm.side_model(axis.center)?;
    let delays = conjugate_axis(axis);
    let (us, du) = u_grid(axis, gm, count);
    let mut out = Vec::with_capacity(axis.count);
    for t in 0..delays.count {
        let tau = delays.coordinate(t);
        let mut m = Array2::zeros((us.len(), axis.count));
        for (a, &u) in us.iter().enumerate() {
            for j in 0..axis.count {
                let w = axis.coordinate(j);
                m[[a, j]] = gate_spectrum(&gm.gate, u - w, tau) * gm.phi(model.as_ref(), w, u)?;
            }
        }
        out.push(m);
    }
    Ok((out, du))
}

/// `H_tt(tau_s, tau_i)` by explicit summation over both upconverted
/// frequencies and both photon frequencies, normalized to unit peak.
pub fn h_tt_direct(state: &ComplexGrid2D, gm: &GatingModel, u_count: usize) -> Result<IntensityGrid2D> {
    if state.domains() != (Domain::Frequency, Domain::Frequency) {
        return Err(Error::DomainMismatch("oracle needs a state on frequency axes".into()));
    }
    if u_count < 2 {
        return Err(Error::Parameter("u_count must be >= 2".into()));
    }
    let (fs, _) = side_factors(&state.axis_s, gm, u_count)?;
    let (fi, _) = side_factors(&state.axis_i, gm, u_count)?;
    let f = &state.values;
    let (n_s, n_i) = f.dim();
    let rows: Vec<Vec<f64>> = (0..n_s)
        .into_par_iter()
        .map(|ts| {
            let gs = &fs[ts];
            let mut row = vec![0.0; n_i];
            for (ti, out) in row.iter_mut().enumerate() {
                let gi = &fi[ti];
                let mut total = 0.0;
                for us in 0..u_count {
                    for ui in 0..u_count {
                        let mut inner = Complex64::new(0.0, 0.0);
                        for s in 0..n_s {
                            let a = gs[[us, s]];
                            let mut partial = Complex64::new(0.0, 0.0);
                            for i in 0..n_i {
                                partial += gi[[ui, i]] * f[[s, i]];
                            }
                            inner += a * partial;
                        }
                        total += inner.norm_sqr();
                    }
                }
                *out = total;
            }
            row
        })
        .collect();
    let mut values = Array2::zeros((n_s, n_i));
    for (a, row) in rows.into_iter().enumerate() {
        for (b, v) in row.into_iter().enumerate() {
            values[[a, b]] = v;
        }
    }
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Input("oracle intensity is identically zero".into()));
    }
    values.mapv_inplace(|v| v / peak);
    IntensityGrid2D::new(conjugate_axis(&state.axis_s), conjugate_axis(&state.axis_i), values)
}
