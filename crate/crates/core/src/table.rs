//! Comma-delimited output tables and observation files.
//!
//! Every table has a header row, LF line endings and floats printed with 12
//! significant digits. Energy levels are written as level values (with the
//! alphabet base), not indices.

use std::io::{Read, Write};

use crate::error::{HimmError, Result};
use crate::filter::SenseDecision;
use crate::model::ModelShape;
use crate::simgen::{HiddenTrajectory, ObservationSequence};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` with [`SIGNIFICANT_DIGITS`] significant digits, in fixed
/// notation for moderate magnitudes and scientific notation otherwise.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return format!("{:.*}", SIGNIFICANT_DIGITS - 1, 0.0);
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Writes a table from a header and string rows.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, E, C, U, Y`; `E` and `C` are left empty when the hidden
/// trajectory is unknown.
pub fn write_trajectory<W: Write>(
    out: W,
    shape: &ModelShape,
    hidden: Option<&HiddenTrajectory>,
    obs: &ObservationSequence,
) -> Result<()> {
    let rows = (0..obs.len()).map(|t| {
        let (e, c) = match hidden {
            Some(h) => (shape.level_value(h.energy[t]).to_string(), h.channel[t].to_string()),
            None => (String::new(), String::new()),
        };
        vec![(t + 1).to_string(), e, c, shape.level_value(obs.u[t]).to_string(), fmt_num(obs.y[t])]
    });
    write_table(out, &["t", "E", "C", "U", "Y"], rows)
}

/// Reads a `t, E, C, U, Y` table. Returns the hidden trajectory too when
/// every row has `E` and `C` filled in.
pub fn read_trajectory<R: Read>(
    input: R,
    shape: &ModelShape,
) -> Result<(ObservationSequence, Option<HiddenTrajectory>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ui), Some(yi)) = (col("U"), col("Y")) else {
        return Err(HimmError::Parse("observation table needs U and Y columns".into()));
    };
    let (ei, ci) = (col("E"), col("C"));

    let mut u = Vec::new();
    let mut y = Vec::new();
    let mut energy = Vec::new();
    let mut channel = Vec::new();
    let mut complete = ei.is_some() && ci.is_some();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parse_level = |s: &str, name: &str| -> Result<usize> {
            let v: u32 = s.parse().map_err(|_| HimmError::Parse(format!("row {}: bad {name} value {s:?}", row + 1)))?;
            shape.level_index(v).ok_or_else(|| {
                HimmError::dim(
                    format!("{name}[{}]", row + 1),
                    format!("level in {}..{}", shape.base, shape.base as usize + shape.levels),
                    v,
                )
            })
        };
        u.push(parse_level(field(ui), "U")?);
        y.push(field(yi).parse::<f64>().map_err(|_| HimmError::Parse(format!("row {}: bad Y value", row + 1)))?);
        if complete {
            let (es, cs) = (field(ei.unwrap()), field(ci.unwrap()));
            if es.is_empty() || cs.is_empty() {
                complete = false;
            } else {
                energy.push(parse_level(es, "E")?);
                channel
                    .push(cs.parse::<usize>().map_err(|_| HimmError::Parse(format!("row {}: bad C value", row + 1)))?);
            }
        }
    }
    let obs = ObservationSequence::new(u, y)?;
    let hidden = complete.then_some(HiddenTrajectory { energy, channel });
    Ok((obs, hidden))
}

/// Columns `t, c_hat, e_hat, busy_posterior, log_evidence_increment`, plus
/// `busy_at_tau` (0/1) when threshold detections are given.
pub fn write_decisions<W: Write>(
    out: W,
    shape: &ModelShape,
    decisions: &[SenseDecision],
    detections: Option<&[bool]>,
) -> Result<()> {
    if let Some(det) = detections {
        if det.len() != decisions.len() {
            return Err(HimmError::dim("detections", decisions.len(), det.len()));
        }
    }
    let rows = decisions.iter().enumerate().map(|(t, d)| {
        let mut row = vec![
            (t + 1).to_string(),
            d.channel.to_string(),
            shape.level_value(d.level).to_string(),
            fmt_num(d.busy_posterior),
            fmt_num(d.grid.log_evidence_increment),
        ];
        if let Some(det) = detections {
            row.push(u8::from(det[t]).to_string());
        }
        row
    });
    let mut header = vec!["t", "c_hat", "e_hat", "busy_posterior", "log_evidence_increment"];
    if detections.is_some() {
        header.push("busy_at_tau");
    }
    write_table(out, &header, rows)
}

/// Columns `iteration, loglik`; iteration 0 is the initial parameter set.
pub fn write_loglik<W: Write>(out: W, history: &[f64]) -> Result<()> {
    let rows = history.iter().enumerate().map(|(k, ll)| vec![k.to_string(), fmt_num(*ll)]);
    write_table(out, &["iteration", "loglik"], rows)
}
