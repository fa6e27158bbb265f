//! CSV export of convergence histories and results, and a binary dump of the
//! converged vectors.
//!
//! Floats are written with 17 significant digits so a read-back is exact. The
//! vector dump is little-endian: a `u64` triplet count, then per triplet the `f64`
//! value, a `u64` length and the left vector, a `u64` length and the right vector.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::driver::{ApproxTriplet, ConvergenceHistory, HistoryRecord};
use crate::error::{JdsvdError, Result};

pub const HISTORY_HEADER: [&str; 10] = [
    "outer", "triplet", "m", "theta", "resnorm", "inner_iters", "eta", "r_in", "hit_cap", "secs",
];
pub const RESULTS_HEADER: [&str; 3] = ["index", "theta", "resnorm"];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> JdsvdError + '_ {
    move |source| JdsvdError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> JdsvdError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => JdsvdError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => JdsvdError::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| JdsvdError::Parse {
        line,
        msg: format!("missing column {i}"),
    })?;
    raw.trim().parse().map_err(|_| JdsvdError::Parse {
        line,
        msg: format!("malformed value {raw:?} in column {i}"),
    })
}

fn check_header(rec: &csv::StringRecord, want: &[&str]) -> Result<()> {
    if rec.iter().map(str::trim).ne(want.iter().copied()) {
        return Err(JdsvdError::Parse {
            line: 1,
            msg: format!("expected header {}", want.join(",")),
        });
    }
    Ok(())
}

pub fn write_history_csv(history: &ConvergenceHistory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(HISTORY_HEADER).map_err(|e| csv_err(path, e))?;
    for r in &history.records {
        w.write_record([
            r.outer.to_string(),
            r.triplet.to_string(),
            r.m.to_string(),
            f(r.theta),
            f(r.resnorm),
            r.inner_iters.to_string(),
            f(r.eta),
            f(r.r_in),
            u8::from(r.hit_cap).to_string(),
            f(r.secs),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<ConvergenceHistory> {
    let path = path.as_ref();
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    check_header(rd.headers().map_err(|e| csv_err(path, e))?, &HISTORY_HEADER)?;
    let mut records = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        let hit: u8 = field(&rec, 8, line)?;
        records.push(HistoryRecord {
            outer: field(&rec, 0, line)?,
            triplet: field(&rec, 1, line)?,
            m: field(&rec, 2, line)?,
            theta: field(&rec, 3, line)?,
            resnorm: field(&rec, 4, line)?,
            inner_iters: field(&rec, 5, line)?,
            eta: field(&rec, 6, line)?,
            r_in: field(&rec, 7, line)?,
            hit_cap: hit != 0,
            secs: field(&rec, 9, line)?,
        });
    }
    Ok(ConvergenceHistory { records })
}

pub fn write_results_csv(triplets: &[ApproxTriplet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(RESULTS_HEADER).map_err(|e| csv_err(path, e))?;
    for (i, t) in triplets.iter().enumerate() {
        w.write_record([(i + 1).to_string(), f(t.theta), f(t.resnorm)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// `(index, theta, resnorm)` rows.
pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<(usize, f64, f64)>> {
    let path = path.as_ref();
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    check_header(rd.headers().map_err(|e| csv_err(path, e))?, &RESULTS_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        out.push((field(&rec, 0, i + 2)?, field(&rec, 1, i + 2)?, field(&rec, 2, i + 2)?));
    }
    Ok(out)
}

pub fn write_vectors(triplets: &[ApproxTriplet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    (|| -> std::io::Result<()> {
        w.write_all(&(triplets.len() as u64).to_le_bytes())?;
        for t in triplets {
            w.write_all(&t.theta.to_le_bytes())?;
            for side in [&t.u, &t.v] {
                w.write_all(&(side.len() as u64).to_le_bytes())?;
                for x in side.iter() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        w.flush()
    })()
    .map_err(io_err(path))
}

/// `(theta, u, v)` per stored triplet.
pub fn read_vectors(path: impl AsRef<Path>) -> Result<Vec<(f64, Vec<f64>, Vec<f64>)>> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut buf = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut buf).map_err(io_err(path))?;
        Ok(buf)
    };
    let count = u64::from_le_bytes(next(&mut r)?) as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let theta = f64::from_le_bytes(next(&mut r)?);
        let mut sides = Vec::with_capacity(2);
        for _ in 0..2 {
            let len = u64::from_le_bytes(next(&mut r)?) as usize;
            let mut x = Vec::with_capacity(len.min(1 << 24));
            for _ in 0..len {
                x.push(f64::from_le_bytes(next(&mut r)?));
            }
            sides.push(x);
        }
        let v = sides.pop().unwrap();
        let u = sides.pop().unwrap();
        out.push((theta, u, v));
    }
    Ok(out)
}
