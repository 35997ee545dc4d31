//! Output files: result tables, gain matrices, optimizer and episode traces, run manifest.

use std::fs;
use std::path::Path;

use semagg_core::gain_design::IterationRecord;
use semagg_core::Matrix;
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};
use crate::harness::{EpisodeTrace, ResultRow};

/// Seventeen significant digits, enough to recover every `f64` exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> SimError + '_ {
    move |source| SimError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Result table with columns `scheme, <x_name>, metric, mean, std_err, n_runs, seed`.
pub fn write_results(path: &Path, x_name: &str, rows: &[ResultRow]) -> Result<()> {
    write_csv(
        path,
        &["scheme", x_name, "metric", "mean", "std_err", "n_runs", "seed"],
        rows.iter().map(|r| {
            vec![
                r.scheme.clone(),
                r.x.to_string(),
                r.metric.clone(),
                fmt_f64(r.mean),
                fmt_f64(r.std_err),
                r.n_runs.to_string(),
                r.seed.to_string(),
            ]
        }),
    )
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let bad = |message: String| SimError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != 7 {
            return Err(bad(format!("expected 7 columns, found {}", rec.len())));
        }
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("column {i}: {e}")));
        let int = |i: usize| rec[i].parse::<u64>().map_err(|e| bad(format!("column {i}: {e}")));
        rows.push(ResultRow {
            scheme: rec[0].to_string(),
            x: int(1)? as usize,
            metric: rec[2].to_string(),
            mean: num(3)?,
            std_err: num(4)?,
            n_runs: int(5)? as usize,
            seed: int(6)?,
        });
    }
    Ok(rows)
}

/// Gain text format: a `rows cols` line, then one whitespace-separated line per row.
pub fn write_gain(path: &Path, k: &Matrix) -> Result<()> {
    let mut out = format!("{} {}\n", k.rows(), k.cols());
    for i in 0..k.rows() {
        let line: Vec<String> = k.row(i).iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_gain(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_gain(&text).map_err(|message| SimError::Format {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_gain(text: &str) -> std::result::Result<Matrix, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty file")?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad dimension '{t}'")))
        .collect::<std::result::Result<_, _>>()?;
    let [rows, cols] = dims[..] else {
        return Err("first line must be 'rows cols'".into());
    };
    let mut entries = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format!("bad entry '{t}' in row {}", i + 1)))
            .collect::<std::result::Result<_, _>>()?;
        if vals.len() != cols {
            return Err(format!("row {} has {} entries, expected {cols}", i + 1, vals.len()));
        }
        entries.extend(vals);
    }
    if entries.len() != rows * cols {
        return Err(format!("expected {rows} rows, found {}", entries.len() / cols.max(1)));
    }
    Matrix::from_row_slice(rows, cols, &entries).map_err(|e| e.to_string())
}

/// Optimizer trace: `r, f0_hat, f1_hat, step_norm, feasibility_flag`.
pub fn write_optimizer_trace(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    write_csv(
        path,
        &["r", "f0_hat", "f1_hat", "step_norm", "feasibility_flag"],
        trace.iter().map(|rec| {
            vec![
                rec.iteration.to_string(),
                fmt_f64(rec.f0_hat),
                fmt_f64(rec.f1_hat),
                fmt_f64(rec.step_norm),
                rec.feasible.to_string(),
            ]
        }),
    )
}

/// One row per slot of a single episode.
pub fn write_episode_trace(path: &Path, trace: &EpisodeTrace) -> Result<()> {
    write_csv(
        path,
        &[
            "t",
            "error_sq",
            "state_sq",
            "power",
            "pilot_energy",
            "active",
            "transmitters",
            "collision",
        ],
        trace.slots.iter().map(|s| {
            let err = s.x.try_sub(&s.x_est).map(|d| d.sum_of_squares()).unwrap_or(f64::NAN);
            vec![
                s.t.to_string(),
                fmt_f64(err),
                fmt_f64(s.x.sum_of_squares()),
                fmt_f64(s.power),
                fmt_f64(s.pilot_energy),
                s.activations.iter().filter(|a| **a).count().to_string(),
                s.transmitters.len().to_string(),
                s.collision.to_string(),
            ]
        }),
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `manifest.txt`: config hash, effective seed, tool version and the command that ran.
pub fn write_manifest(path: &Path, config_bytes: &[u8], seed: u64, command: &str) -> Result<()> {
    let text = format!(
        "config_sha256 = {}\nseed = {seed}\nversion = {} {}\ncore_version = {}\ncommand = {command}\n",
        sha256_hex(config_bytes),
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        semagg_core::VERSION,
    );
    fs::write(path, text).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, 5e-324, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
        assert_eq!(fmt_f64(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn gain_text_parses() {
        let k = parse_gain("2 1\n0.5\n-1e-3\n").unwrap();
        assert_eq!(k, Matrix::column(&[0.5, -1e-3]).unwrap());
        assert!(parse_gain("2 2\n1 2\n3\n").is_err());
        assert!(parse_gain("2 2\n1 2\n").is_err());
        assert!(parse_gain("").is_err());
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
