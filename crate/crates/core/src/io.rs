//! Wire formats: measurement and curve CSV files, JSON reports.
//!
//! Frequencies are Hz on the wire. CSV files may begin with `#` comment
//! lines, which carry provenance and are skipped on read.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{Measurement, MeasurementSeries};
use crate::solver::ResponseCurve;

pub const TOOL_NAME: &str = "pulling";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CURVE_HEADER: [&str; 4] = ["delta_f_e_hz", "delta_f_d_hz", "pf", "branch_id"];

/// Tool identity plus the fully resolved configuration of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config,
        }
    }

    fn write_comment<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# {} {} {}", self.tool, self.version, self.command)?;
        writeln!(w, "# config {}", serde_json::to_string(&self.config)?)?;
        Ok(())
    }
}

/// JSON envelope for every report file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document<T> {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_json<T: Serialize, P: AsRef<Path>>(path: P, provenance: &Provenance, body: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &Document { provenance: provenance.clone(), body })?;
    writeln!(w)?;
    Ok(())
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("column {column}: cannot parse {field:?} as a number"),
    })
}

/// Reads `delta_f_e_hz,delta_f_d_hz[,weight]`; other columns are kept verbatim.
pub fn read_measurements<R: Read>(reader: R, source: &str) -> Result<MeasurementSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ie), Some(id)) = (find("delta_f_e_hz"), find("delta_f_d_hz")) else {
        return Err(Error::Parse {
            line: 1,
            message: "header must contain delta_f_e_hz and delta_f_d_hz".into(),
        });
    };
    let iw = find("weight");
    let extra_idx: Vec<usize> = (0..headers.len())
        .filter(|i| *i != ie && *i != id && Some(*i) != iw)
        .collect();

    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let e = parse_f64(&rec[ie], line, "delta_f_e_hz")?;
        let d = parse_f64(&rec[id], line, "delta_f_d_hz")?;
        let w = match iw {
            Some(i) if !rec[i].is_empty() => parse_f64(&rec[i], line, "weight")?,
            _ => 1.0,
        };
        if !(e.is_finite() && d.is_finite() && w.is_finite() && w >= 0.0) {
            return Err(Error::Parse {
                line,
                message: "values must be finite and weight >= 0".into(),
            });
        }
        points.push(Measurement {
            delta_f_e_hz: e,
            delta_f_d_hz: d,
            weight: w,
            extra: extra_idx.iter().map(|i| rec[*i].to_string()).collect(),
        });
    }
    let mut series = MeasurementSeries::new(points, source)?;
    series.extra_columns = extra_idx.iter().map(|i| headers[*i].to_string()).collect();
    Ok(series)
}

pub fn read_measurements_path<P: AsRef<Path>>(path: P) -> Result<MeasurementSeries> {
    let p = path.as_ref();
    read_measurements(BufReader::new(File::open(p)?), &p.display().to_string())
}

/// Writes a series at full precision (shortest round-trip decimal form).
pub fn write_measurements<W: Write>(
    mut w: W,
    series: &MeasurementSeries,
    provenance: Option<&Provenance>,
    include_weight: bool,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_comment(&mut w)?;
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["delta_f_e_hz".to_string(), "delta_f_d_hz".to_string()];
    if include_weight {
        header.push("weight".into());
    }
    header.extend(series.extra_columns.iter().cloned());
    out.write_record(&header)?;
    for p in series.points() {
        let mut row = vec![p.delta_f_e_hz.to_string(), p.delta_f_d_hz.to_string()];
        if include_weight {
            row.push(p.weight.to_string());
        }
        row.extend(p.extra.iter().cloned());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_curve<W: Write>(mut w: W, curve: &ResponseCurve, provenance: Option<&Provenance>) -> Result<()> {
    if let Some(p) = provenance {
        p.write_comment(&mut w)?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CURVE_HEADER)?;
    for s in &curve.samples {
        out.write_record(&[
            s.delta_f_e_hz.to_string(),
            s.delta_f_d_hz.to_string(),
            s.pf.to_string(),
            s.branch_id.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row of a curve file.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct CurveRow {
    pub delta_f_e_hz: f64,
    pub delta_f_d_hz: f64,
    pub pf: f64,
    pub branch_id: u32,
}

pub fn read_curve<R: Read>(reader: R) -> Result<Vec<CurveRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}
