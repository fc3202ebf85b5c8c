//! CSV and JSON emission of report rows.
//!
//! Floats are written with 17 significant digits in scientific notation,
//! lists are `;`-separated and absent values are empty fields.

use std::io::Write;

use crate::error::{Error, Result};
use crate::verify::experiment::{Report, ReportRow};

pub const CSV_HEADER: [&str; 19] = [
    "trial",
    "check",
    "resolution",
    "m",
    "p",
    "p0",
    "gamma",
    "weight_params",
    "seed",
    "lhs",
    "rhs",
    "ratio",
    "threshold",
    "a_inf_w",
    "a_inf_sigma",
    "a_vec_p",
    "regime",
    "pass",
    "note",
];

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(";")
}

fn record(r: &ReportRow) -> [String; 19] {
    [
        r.trial.to_string(),
        r.check.clone(),
        r.resolution.to_string(),
        r.m.to_string(),
        fmt_list(&r.p),
        fmt_f64(r.p0),
        fmt_f64(r.gamma),
        r.weight_params.clone(),
        r.seed.to_string(),
        fmt_f64(r.lhs),
        fmt_f64(r.rhs),
        fmt_f64(r.ratio),
        fmt_f64(r.threshold),
        r.a_inf_w.map(fmt_f64).unwrap_or_default(),
        fmt_list(&r.a_inf_sigma),
        r.a_vec_p.map(fmt_f64).unwrap_or_default(),
        r.regime.clone().unwrap_or_default(),
        r.pass.to_string(),
        r.note.clone(),
    ]
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("writing report: {e}"))
}

pub fn write_csv<W: Write>(report: &Report, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in &report.rows {
        w.write_record(record(r)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn to_csv(report: &Report) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(report, &mut buf)?;
    String::from_utf8(buf).map_err(io)
}

/// Rows as JSON objects; non-finite numbers become `null`.
pub fn to_json(report: &Report) -> Result<String> {
    serde_json::to_string_pretty(&report.rows).map_err(io)
}
