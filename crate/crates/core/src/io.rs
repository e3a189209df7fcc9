//! CSV and file helpers for traces, weather and envelopes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::FlexibilityEnvelope;
use crate::sim::{Trace, WeatherSeries};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File { path: path.display().to_string(), source }
}

fn csv_err(path: &Path, source: csv::Error) -> IoError {
    IoError::Csv { path: path.display().to_string(), source }
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
    }
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| file_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| file_err(&tmp, e))?;
    f.sync_all().map_err(|e| file_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| file_err(path, e))
}

pub const TRACE_HEADER: [&str; 10] =
    ["timestamp", "t_out", "irradiance", "t_in", "state", "u", "u_baseline", "request", "delta_under", "delta_over"];

#[derive(Serialize, Deserialize)]
struct TraceRow {
    timestamp: u64,
    t_out: f64,
    irradiance: f64,
    t_in: f64,
    state: f64,
    u: f64,
    u_baseline: f64,
    request: f64,
    delta_under: f64,
    delta_over: f64,
}

#[derive(Serialize, Deserialize)]
struct WeatherRow {
    timestamp: u64,
    t_out: f64,
    irradiance: f64,
}

fn to_csv<R: Serialize>(rows: impl Iterator<Item = R>, path: &Path) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.into_inner().map_err(|e| IoError::Format { path: path.display().to_string(), message: e.to_string() })
}

fn from_csv<R: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<R>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let found = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(IoError::Format {
            path: path.display().to_string(),
            message: format!("expected header `{}`", header.join(",")),
        });
    }
    r.deserialize().collect::<Result<Vec<R>, _>>().map_err(|e| csv_err(path, e))
}

pub fn trace_to_csv(trace: &Trace, path: &Path) -> Result<Vec<u8>, IoError> {
    to_csv(
        (0..trace.len()).map(|t| TraceRow {
            timestamp: trace.timestamps[t],
            t_out: trace.t_out[t],
            irradiance: trace.irradiance[t],
            t_in: trace.indoor_temp[t],
            state: trace.state[t],
            u: trace.power_fraction[t],
            u_baseline: trace.baseline_fraction[t],
            request: trace.request[t],
            delta_under: trace.delta_under[t],
            delta_over: trace.delta_over[t],
        }),
        path,
    )
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &trace_to_csv(trace, path)?)
}

pub fn read_trace(path: &Path) -> Result<Trace, IoError> {
    let rows: Vec<TraceRow> = from_csv(path, &TRACE_HEADER)?;
    let mut t = Trace::default();
    for r in rows {
        t.timestamps.push(r.timestamp);
        t.t_out.push(r.t_out);
        t.irradiance.push(r.irradiance);
        t.indoor_temp.push(r.t_in);
        t.state.push(r.state);
        t.power_fraction.push(r.u);
        t.baseline_fraction.push(r.u_baseline);
        t.request.push(r.request);
        t.delta_under.push(r.delta_under);
        t.delta_over.push(r.delta_over);
    }
    Ok(t)
}

pub fn write_weather(weather: &WeatherSeries, path: &Path) -> Result<(), IoError> {
    let rows = (0..weather.len()).map(|t| WeatherRow {
        timestamp: weather.timestamps[t],
        t_out: weather.outdoor_temp[t],
        irradiance: weather.irradiance[t],
    });
    write_atomic(path, &to_csv(rows, path)?)
}

pub fn read_weather(path: &Path) -> Result<WeatherSeries, IoError> {
    let rows: Vec<WeatherRow> = from_csv(path, &["timestamp", "t_out", "irradiance"])?;
    Ok(WeatherSeries {
        timestamps: rows.iter().map(|r| r.timestamp).collect(),
        outdoor_temp: rows.iter().map(|r| r.t_out).collect(),
        irradiance: rows.iter().map(|r| r.irradiance).collect(),
    })
}

/// Envelope matrix as CSV: header `power,<start step>...`, one row per power level.
pub fn envelope_to_csv(env: &FlexibilityEnvelope) -> Vec<u8> {
    let mut out = String::from("power");
    for t in &env.time_grid {
        out.push_str(&format!(",{t}"));
    }
    out.push('\n');
    for (p, row) in env.power_grid.iter().zip(&env.durations) {
        out.push_str(&p.to_string());
        for d in row {
            out.push_str(&format!(",{d}"));
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Durations matrix read back from [`envelope_to_csv`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeTable {
    pub power_grid: Vec<f64>,
    pub time_grid: Vec<usize>,
    pub durations: Vec<Vec<usize>>,
}

pub fn read_envelope_csv(path: &Path) -> Result<EnvelopeTable, IoError> {
    let fmt = |message: String| IoError::Format { path: path.display().to_string(), message };
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.get(0) != Some("power") {
        return Err(fmt("first column must be `power`".into()));
    }
    let time_grid = header
        .iter()
        .skip(1)
        .map(|s| s.parse::<usize>().map_err(|_| fmt(format!("bad start step `{s}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut power_grid = Vec::new();
    let mut durations = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let p = rec.get(0).unwrap_or_default();
        power_grid.push(p.parse::<f64>().map_err(|_| fmt(format!("bad power `{p}`")))?);
        let row = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<usize>().map_err(|_| fmt(format!("bad duration `{s}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != time_grid.len() {
            return Err(fmt("ragged row".into()));
        }
        durations.push(row);
    }
    Ok(EnvelopeTable { power_grid, time_grid, durations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::EnvelopeGrid;
    use crate::sim::{generate_weather, simulate, RequestSchedule, WeatherParams};

    #[test]
    fn trace_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = crate::sim::SimConfig::default();
        let w = generate_weather(1, 1, 5, &WeatherParams::default());
        let trace = simulate(&cfg, &w, &RequestSchedule::empty(), 0).unwrap();
        let path = dir.path().join("t.csv");
        write_trace(&trace, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("timestamp,t_out,irradiance,t_in,state,u,u_baseline,request,delta_under,delta_over\n"));
        assert_eq!(read_trace(&path).unwrap(), trace);

        let wp = dir.path().join("w.csv");
        write_weather(&w, &wp).unwrap();
        assert_eq!(read_weather(&wp).unwrap(), w);
        assert!(read_weather(&path).is_err());
    }

    #[test]
    fn envelope_csv_round_trip() {
        let grid = EnvelopeGrid::uniform(3, -1.0, 1.0, vec![0, 12], 288);
        let env = FlexibilityEnvelope::from_cells(&grid, 288, Some(0.5), vec![1, 2, 288, 288, 0, 7]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_atomic(&path, &envelope_to_csv(&env)).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "power,0,12\n-1,1,2\n0,288,288\n1,0,7\n");
        let t = read_envelope_csv(&path).unwrap();
        assert_eq!((t.power_grid, t.time_grid, t.durations), (env.power_grid, env.time_grid, env.durations));
    }
}
