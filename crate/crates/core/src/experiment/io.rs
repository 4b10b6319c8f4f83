//! Run output on disk: `series.csv`, `snapshot_<t>.csv`, `summary.txt` and a
//! copy of the config. Numbers are written with 17 significant digits so
//! that reading a file back reproduces the in-memory values bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::solver::{RunRecord, SeriesRow, Snapshot};

pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
const SERIES_HEADER: [&str; 5] = ["t", "g", "h", "umax", "mass"];
const SNAPSHOT_HEADER: [&str; 2] = ["x", "u"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.display().to_string(), source }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format { path: path.display().to_string(), message: message.into() }
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl Iterator<Item = [f64; N]>,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.map(fmt_num)).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_rows<const N: usize>(path: &Path, header: [&str; N]) -> Result<Vec<[f64; N]>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found = r.headers().map_err(csv_err(path))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(format_err(path, format!("expected header `{}`", header.join(","))));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(csv_err(path))?;
            if rec.len() != N {
                return Err(format_err(path, format!("row {} has {} fields, expected {N}", i + 2, rec.len())));
            }
            let mut out = [0.0; N];
            for (slot, field) in out.iter_mut().zip(rec.iter()) {
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|_| format_err(path, format!("row {}: `{field}` is not a number", i + 2)))?;
            }
            Ok(out)
        })
        .collect()
}

pub fn write_series(path: &Path, series: &[SeriesRow<f64>]) -> Result<(), IoError> {
    write_rows(path, SERIES_HEADER, series.iter().map(|r| [r.t, r.g, r.h, r.umax, r.mass]))
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow<f64>>, IoError> {
    Ok(read_rows(path, SERIES_HEADER)?
        .into_iter()
        .map(|[t, g, h, umax, mass]| SeriesRow { t, g, h, umax, mass })
        .collect())
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_{t:.4}.csv")
}

pub fn write_snapshot(dir: &Path, snap: &Snapshot<f64>) -> Result<PathBuf, IoError> {
    let path = dir.join(snapshot_file_name(snap.t));
    write_rows(&path, SNAPSHOT_HEADER, snap.x.iter().zip(&snap.u).map(|(&x, &u)| [x, u]))?;
    Ok(path)
}

/// All `snapshot_<t>.csv` files in `dir`, ordered by time. The time is taken
/// from the file name.
pub fn read_snapshots(dir: &Path) -> Result<Vec<Snapshot<f64>>, IoError> {
    let mut snaps = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(t) = name.strip_prefix("snapshot_").and_then(|s| s.strip_suffix(".csv")) else { continue };
        let t: f64 = t.parse().map_err(|_| format_err(&path, "cannot read time from file name"))?;
        let (x, u) = read_rows(&path, SNAPSHOT_HEADER)?.into_iter().map(|[x, u]| (x, u)).unzip();
        snaps.push(Snapshot { t, x, u });
    }
    snaps.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(snaps)
}

/// Key-value block with the final state, termination reason and timing.
pub fn summary(record: &RunRecord<f64>) -> String {
    let last = record.final_row();
    format!(
        "termination = {}\nt_final = {}\ng_final = {}\nh_final = {}\nwidth_final = {}\numax_final = {}\nmass_final = {}\nsteps = {}\ndt_used = {}\nseries_rows = {}\nsnapshots = {}\nkernel = {}\nwall_time_secs = {:.3}\n",
        record.termination,
        fmt_num(last.t),
        fmt_num(last.g),
        fmt_num(last.h),
        fmt_num(last.h - last.g),
        fmt_num(last.umax),
        fmt_num(last.mass),
        record.steps,
        fmt_num(record.dt_used),
        record.series.len(),
        record.snapshots.len(),
        record.config.kernel.describe(),
        record.wall_time_secs,
    )
}

/// Writes every output of a run into `dir` (created if needed).
pub fn write_record(dir: &Path, record: &RunRecord<f64>, config_text: Option<&str>) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_series(&dir.join(SERIES_FILE), &record.series)?;
    for snap in &record.snapshots {
        write_snapshot(dir, snap)?;
    }
    let summary_path = dir.join(SUMMARY_FILE);
    fs::write(&summary_path, summary(record)).map_err(io_err(&summary_path))?;
    if let Some(text) = config_text {
        let echo = dir.join(CONFIG_ECHO_FILE);
        fs::write(&echo, text).map_err(io_err(&echo))?;
    }
    Ok(())
}
