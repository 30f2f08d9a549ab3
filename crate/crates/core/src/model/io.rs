//! JSON parameter files.
//!
//! Numbers are written in scientific notation with 17 significant digits so
//! that every `f64` survives a save/load cycle bit for bit.

use std::io::{self, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use super::{validate_params, HimmParams, ModelShape, CHANNEL_STATES, LOAD_VARIANCE_FLOOR};
use crate::error::{HimmError, Result};

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ShapeRecord {
    L: usize,
    M: usize,
    base: u32,
    L0: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ParamRecord {
    shape: ShapeRecord,
    pi_E: Vec<f64>,
    pi_C: Vec<Vec<f64>>,
    A: Vec<Vec<f64>>,
    B: Vec<Vec<Vec<f64>>>,
    D: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
    sigma2: Vec<Vec<f64>>,
}

struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix(name: &str, rows: Vec<Vec<f64>>, shape: (usize, usize)) -> Result<Array2<f64>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        let found = format!("{}x{:?}", rows.len(), rows.iter().map(Vec::len).collect::<Vec<_>>());
        return Err(HimmError::dim(name, format!("{}x{}", shape.0, shape.1), found));
    }
    Ok(Array2::from_shape_vec(shape, rows.into_iter().flatten().collect()).expect("checked shape"))
}

pub fn save_params(params: &HimmParams) -> Result<Vec<u8>> {
    let shape = &params.shape;
    let record = ParamRecord {
        shape: ShapeRecord { L: shape.levels, M: CHANNEL_STATES, base: shape.base, L0: shape.insufficient_values() },
        pi_E: params.pi_e.to_vec(),
        pi_C: rows(&params.pi_c),
        A: rows(&params.a),
        B: params.b.outer_iter().map(|m| rows(&m.to_owned())).collect(),
        D: rows(&params.d),
        mu: rows(&params.mu),
        sigma2: rows(&params.sigma2),
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision(PrettyFormatter::new()));
    record.serialize(&mut ser).map_err(|e| HimmError::Parse(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Parses and validates a parameter file. Variances are floored at
/// [`LOAD_VARIANCE_FLOOR`].
pub fn load_params(bytes: &[u8]) -> Result<HimmParams> {
    let rec: ParamRecord = serde_json::from_slice(bytes).map_err(|e| HimmError::Parse(e.to_string()))?;
    if rec.shape.M != CHANNEL_STATES {
        return Err(HimmError::dim("shape.M", CHANNEL_STATES, rec.shape.M));
    }
    let l = rec.shape.L;
    let base = rec.shape.base;
    let mut l0 = rec.shape.L0.clone();
    l0.sort_unstable();
    let prefix: Vec<u32> = (0..l0.len() as u32).map(|k| base + k).collect();
    if l0 != prefix {
        return Err(HimmError::Config(format!(
            "L0 = {:?} is not the lowest levels of the alphabet starting at {base}",
            rec.shape.L0
        )));
    }
    let shape = ModelShape::new(l, base, l0.len())?;

    if rec.pi_E.len() != l {
        return Err(HimmError::dim("pi_E", l, rec.pi_E.len()));
    }
    if rec.B.len() != l {
        return Err(HimmError::dim("B", l, rec.B.len()));
    }
    let mut b = Array3::zeros((l, CHANNEL_STATES, CHANNEL_STATES));
    for (q, m) in rec.B.into_iter().enumerate() {
        let m = matrix(&format!("B({q})"), m, (CHANNEL_STATES, CHANNEL_STATES))?;
        b.slice_mut(ndarray::s![q, .., ..]).assign(&m);
    }
    let mut sigma2 = matrix("sigma2", rec.sigma2, (CHANNEL_STATES, l))?;
    sigma2.mapv_inplace(|v| if v.is_finite() { v.max(LOAD_VARIANCE_FLOOR) } else { v });

    let params = HimmParams {
        shape,
        pi_e: Array1::from(rec.pi_E),
        pi_c: matrix("pi_C", rec.pi_C, (l, CHANNEL_STATES))?,
        a: matrix("A", rec.A, (l, l))?,
        b,
        d: matrix("D", rec.D, (l, l))?,
        mu: matrix("mu", rec.mu, (CHANNEL_STATES, l))?,
        sigma2,
    };
    validate_params(&params, &shape)?;
    Ok(params)
}

pub fn save_params_file(params: &HimmParams, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, save_params(params)?)?;
    Ok(())
}

pub fn load_params_file(path: impl AsRef<Path>) -> Result<HimmParams> {
    load_params(&std::fs::read(path)?)
}
