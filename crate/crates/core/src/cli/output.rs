use std::io::Write;

use serde::Serialize;

use super::config::{FrameKind, OutputFormat};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One solved level. Numbers that carry the configured precision are
/// decimal strings.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub omega: String,
    pub n: usize,
    pub frame: String,
    pub variant: String,
    pub branch: String,
    #[serde(rename = "E")]
    pub energy: String,
    #[serde(rename = "Im_E")]
    pub im_energy: String,
    pub lambda: String,
    pub lambda_im: String,
    pub residual: String,
    pub basis_blocks: usize,
    pub digits: u32,
    pub sigma: f64,
    pub y_or_theta: f64,
    pub wall_time_s: String,
    pub error: String,
}

/// Rows ordered by `(omega, n, frame)`.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        let wa: f64 = a.omega.parse().unwrap_or(f64::NAN);
        let wb: f64 = b.omega.parse().unwrap_or(f64::NAN);
        wa.total_cmp(&wb)
            .then_with(|| a.omega.cmp(&b.omega))
            .then(a.n.cmp(&b.n))
            .then_with(|| frame_rank(&a.frame).cmp(&frame_rank(&b.frame)))
    });
}

fn frame_rank(tag: &str) -> Option<FrameKind> {
    FrameKind::parse(tag).ok()
}

/// Serializes any row type as CSV (header plus records) or a JSON array.
pub fn write_table<T: Serialize, W: Write>(rows: &[T], format: OutputFormat, out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidParameter(format!("write failed: {e}"));
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r).map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
            }
            w.flush().map_err(io)?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)
                .map_err(|e| Error::InvalidParameter(format!("json: {e}")))?;
            writeln!(out).map_err(io)?;
        }
    }
    Ok(())
}

pub const CSV_HEADER: [&str; 17] = [
    "schema_version",
    "omega",
    "n",
    "frame",
    "variant",
    "branch",
    "E",
    "Im_E",
    "lambda",
    "lambda_im",
    "residual",
    "basis_blocks",
    "digits",
    "sigma",
    "y_or_theta",
    "wall_time_s",
    "error",
];

/// Like [`write_table`], but an empty CSV table still carries the header.
pub fn write_rows<W: Write>(rows: &[ResultRow], format: OutputFormat, out: W) -> Result<()> {
    if rows.is_empty() && format == OutputFormat::Csv {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)
            .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("write failed: {e}")))?;
        return Ok(());
    }
    write_table(rows, format, out)
}
