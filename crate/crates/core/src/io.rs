//! Grid JSON files.
//!
//! ```json
//! { "kind": "complex" | "intensity",
//!   "axis_s": {"domain", "photon", "center", "step", "count", "units", "conjugate_center"},
//!   "axis_i": { ... },
//!   "values_re": [...], "values_im": [...],
//!   "header": { ... } }
//! ```
//!
//! Values are row-major (signal index outer). `values_im` is omitted for
//! intensity grids; `header` is free-form provenance and optional.
//! Floats are written in shortest round-trip form, so write -> read -> write
//! reproduces the same bytes.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{Axis, ComplexGrid2D, Domain, IntensityGrid2D, Photon};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Complex,
    Intensity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AxisRecord {
    domain: Domain,
    photon: Photon,
    center: f64,
    step: f64,
    count: usize,
    units: String,
    #[serde(default)]
    conjugate_center: f64,
}

impl From<&Axis> for AxisRecord {
    fn from(a: &Axis) -> Self {
        Self {
            domain: a.domain,
            photon: a.photon,
            center: a.center,
            step: a.step,
            count: a.count,
            units: a.units().to_string(),
            conjugate_center: a.conjugate_center,
        }
    }
}

impl AxisRecord {
    fn into_axis(self) -> Result<Axis> {
        if self.units != self.domain.units() {
            return Err(Error::Input(format!(
                "axis units {:?} do not match {:?} domain (expected {:?})",
                self.units,
                self.domain,
                self.domain.units()
            )));
        }
        let axis = Axis::new(self.domain, self.photon, self.center, self.step, self.count)?
            .with_conjugate_center(self.conjugate_center);
        axis.validate()?;
        Ok(axis)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GridRecord {
    kind: GridKind,
    axis_s: AxisRecord,
    axis_i: AxisRecord,
    values_re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values_im: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    header: Option<Value>,
}

/// Either grid type as read from disk, with its header.
#[derive(Clone, Debug, PartialEq)]
pub enum GridFile {
    Complex(ComplexGrid2D, Option<Value>),
    Intensity(IntensityGrid2D, Option<Value>),
}

fn shape_values<T: Clone>(flat: Vec<T>, rows: usize, cols: usize) -> Result<Array2<T>> {
    if flat.len() != rows * cols {
        return Err(Error::Input(format!(
            "grid has {} values, axes need {}",
            flat.len(),
            rows * cols
        )));
    }
    Array2::from_shape_vec((rows, cols), flat).map_err(|e| Error::Input(e.to_string()))
}

pub fn complex_to_json(g: &ComplexGrid2D, header: Option<&Value>) -> Result<String> {
    let rec = GridRecord {
        kind: GridKind::Complex,
        axis_s: (&g.axis_s).into(),
        axis_i: (&g.axis_i).into(),
        values_re: g.values.iter().map(|v| v.re).collect(),
        values_im: Some(g.values.iter().map(|v| v.im).collect()),
        header: header.cloned(),
    };
    Ok(serde_json::to_string(&rec)? + "\n")
}

pub fn intensity_to_json(g: &IntensityGrid2D, header: Option<&Value>) -> Result<String> {
    let rec = GridRecord {
        kind: GridKind::Intensity,
        axis_s: (&g.axis_s).into(),
        axis_i: (&g.axis_i).into(),
        values_re: g.values.iter().cloned().collect(),
        values_im: None,
        header: header.cloned(),
    };
    Ok(serde_json::to_string(&rec)? + "\n")
}

pub fn grid_from_json(text: &str) -> Result<GridFile> {
    let rec: GridRecord = serde_json::from_str(text)?;
    grid_from_value_record(rec)
}

pub fn grid_from_value(v: Value) -> Result<GridFile> {
    let rec: GridRecord = serde_json::from_value(v)?;
    grid_from_value_record(rec)
}

fn grid_from_value_record(rec: GridRecord) -> Result<GridFile> {
    let axis_s = rec.axis_s.into_axis()?;
    let axis_i = rec.axis_i.into_axis()?;
    let (rows, cols) = (axis_s.count, axis_i.count);
    match rec.kind {
        GridKind::Complex => {
            let im = rec
                .values_im
                .ok_or_else(|| Error::Input("complex grid without values_im".into()))?;
            if im.len() != rec.values_re.len() {
                return Err(Error::Input("values_re and values_im lengths differ".into()));
            }
            let flat = rec
                .values_re
                .into_iter()
                .zip(im)
                .map(|(re, im)| Complex64::new(re, im))
                .collect();
            let values = shape_values(flat, rows, cols)?;
            Ok(GridFile::Complex(
                ComplexGrid2D::new(axis_s, axis_i, values)?,
                rec.header,
            ))
        }
        GridKind::Intensity => {
            if rec.values_im.is_some() {
                return Err(Error::Input("intensity grid must not carry values_im".into()));
            }
            let values = shape_values(rec.values_re, rows, cols)?;
            Ok(GridFile::Intensity(
                IntensityGrid2D::new(axis_s, axis_i, values)?,
                rec.header,
            ))
        }
    }
}

pub fn write_complex(path: &Path, g: &ComplexGrid2D, header: Option<&Value>) -> Result<()> {
    fs::write(path, complex_to_json(g, header)?)?;
    Ok(())
}

pub fn write_intensity(path: &Path, g: &IntensityGrid2D, header: Option<&Value>) -> Result<()> {
    fs::write(path, intensity_to_json(g, header)?)?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<GridFile> {
    let text = fs::read_to_string(path)?;
    grid_from_json(&text)
}

pub fn read_intensity(path: &Path) -> Result<IntensityGrid2D> {
    match read_grid(path)? {
        GridFile::Intensity(g, _) => Ok(g),
        GridFile::Complex(..) => Err(Error::Input(format!("{} holds a complex grid", path.display()))),
    }
}

pub fn read_complex(path: &Path) -> Result<ComplexGrid2D> {
    match read_grid(path)? {
        GridFile::Complex(g, _) => Ok(g),
        GridFile::Intensity(..) => Err(Error::Input(format!("{} holds an intensity grid", path.display()))),
    }
}

/// Serializes a complex grid as a JSON value (for embedding in other files).
pub fn complex_to_value(g: &ComplexGrid2D, header: Option<&Value>) -> Result<Value> {
    Ok(serde_json::from_str(&complex_to_json(g, header)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn axes(n_s: usize, n_i: usize) -> (Axis, Axis) {
        (
            Axis::new(Domain::Frequency, Photon::Signal, 2.288, 0.00125, n_s).unwrap(),
            Axis::new(Domain::Time, Photon::Idler, 0.0, 78.5398, n_i)
                .unwrap()
                .with_conjugate_center(2.573),
        )
    }

    #[test]
    fn intensity_omits_imaginary_part() {
        let (a, b) = axes(2, 2);
        let g = IntensityGrid2D::new(a, b, Array2::from_elem((2, 2), 0.5)).unwrap();
        let text = intensity_to_json(&g, None).unwrap();
        assert!(!text.contains("values_im"));
        assert!(text.contains("\"kind\":\"intensity\""));
        assert!(text.contains("\"units\":\"fs\""));
    }

    #[test]
    fn bad_length_and_units_rejected() {
        let bad = r#"{"kind":"intensity","axis_s":{"domain":"frequency","photon":"signal","center":0,"step":1,"count":2,"units":"rad/fs"},
            "axis_i":{"domain":"time","photon":"idler","center":0,"step":1,"count":2,"units":"fs"},"values_re":[1,2,3]}"#;
        assert!(grid_from_json(bad).is_err());
        let units = bad
            .replace("\"units\":\"fs\"", "\"units\":\"ps\"")
            .replace("[1,2,3]", "[1,2,3,4]");
        assert!(grid_from_json(&units).is_err());
        let ok = bad.replace("[1,2,3]", "[1,2,3,4]");
        assert!(grid_from_json(&ok).is_ok());
    }

    proptest! {
        #[test]
        fn complex_write_read_write_is_byte_identical(
            vals in proptest::collection::vec((-1e6f64..1e6, -1e-9f64..1e-9), 12)
        ) {
            let (a, b) = axes(3, 4);
            let values = Array2::from_shape_vec((3, 4), vals.iter().map(|&(r, i)| Complex64::new(r, i)).collect()).unwrap();
            let g = ComplexGrid2D::new(a, b, values).unwrap();
            let header = serde_json::json!({"seed": 7});
            let first = complex_to_json(&g, Some(&header)).unwrap();
            let back = match grid_from_json(&first).unwrap() {
                GridFile::Complex(g2, h) => { prop_assert_eq!(h, Some(header.clone())); g2 }
                _ => unreachable!(),
            };
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(complex_to_json(&back, Some(&header)).unwrap(), first);
        }
    }
}
