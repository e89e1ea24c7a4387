//! Trace persistence: `# key=value` metadata lines, then a fixed CSV header.

use std::fs;
use std::path::Path;

use splitaccel::{IterRecord, Trace};

use crate::BenchError;

pub const TRACE_HEADER: &str = "k,norm_v,cos_theta,dist_z,dist_x,objective,extrapolated,ms";

/// Shortest text that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    let plain = format!("{x}");
    let exp = format!("{x:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}

fn cell(x: Option<f64>) -> String {
    x.filter(|v| !v.is_nan()).map(format_float).unwrap_or_default()
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<(), BenchError> {
    let io = |e: std::io::Error| BenchError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut text = String::new();
    for (key, value) in &trace.meta {
        if key.contains(['=', '\n']) || value.contains('\n') {
            return Err(BenchError::Format {
                path: path.to_path_buf(),
                reason: format!("metadata '{key}' cannot be stored on one line"),
            });
        }
        text.push_str(&format!("# {key}={value}\n"));
    }
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| BenchError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    writer.write_record(TRACE_HEADER.split(',')).map_err(csv_err)?;
    for r in &trace.records {
        if !r.norm_v.is_finite() || r.ms.is_nan() {
            return Err(BenchError::Format {
                path: path.to_path_buf(),
                reason: format!("non-finite value at k = {}", r.k),
            });
        }
        writer
            .write_record([
                r.k.to_string(),
                format_float(r.norm_v),
                cell(r.cos_theta),
                cell(r.dist_z),
                cell(r.dist_x),
                cell(r.objective),
                r.extrapolated.to_string(),
                format_float(r.ms),
            ])
            .map_err(csv_err)?;
    }
    let body = writer.into_inner().map_err(|e| BenchError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    text.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    fs::write(path, text).map_err(io)
}

pub fn read_trace_csv(path: &Path) -> Result<Trace, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_trace_csv(&text).map_err(|reason| BenchError::Format {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn parse_trace_csv(text: &str) -> Result<Trace, String> {
    let mut trace = Trace::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let Some(meta) = line.strip_prefix("# ") else { break };
        let (key, value) = meta
            .trim_end_matches(['\n', '\r'])
            .split_once('=')
            .ok_or_else(|| format!("metadata line without '=': {}", line.trim_end()))?;
        trace.set_meta(key, value);
        body_start += line.len();
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(&text.as_bytes()[body_start..]);
    let header = reader.headers().map_err(|e| e.to_string())?.iter().collect::<Vec<_>>().join(",");
    if header != TRACE_HEADER {
        return Err(format!("header is '{header}', expected '{TRACE_HEADER}'"));
    }
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let at = |j: usize| row.get(j).unwrap_or("");
        let float = |j: usize| -> Result<f64, String> {
            at(j).parse::<f64>().map_err(|_| format!("row {}: bad number '{}'", i + 1, at(j)))
        };
        let optional = |j: usize| -> Result<Option<f64>, String> {
            if at(j).is_empty() {
                Ok(None)
            } else {
                float(j).map(Some)
            }
        };
        let k = at(0).parse::<usize>().map_err(|_| format!("row {}: bad k '{}'", i + 1, at(0)))?;
        if let Some(prev) = trace.records.last() {
            if k <= prev.k {
                return Err(format!("row {}: k = {k} does not increase", i + 1));
            }
        }
        let extrapolated = match at(6) {
            "true" => true,
            "false" => false,
            other => return Err(format!("row {}: bad flag '{other}'", i + 1)),
        };
        trace.records.push(IterRecord {
            k,
            norm_v: float(1)?,
            cos_theta: optional(2)?,
            dist_z: optional(3)?,
            dist_x: optional(4)?,
            objective: optional(5)?,
            extrapolated,
            ms: float(7)?,
        });
    }
    Ok(trace)
}
