//! Trajectory CSV, CSV tables and JSON documents.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value reads back bit-for-bit.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use reachtube::{Trajectory, TrajectoryBatch};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `contents` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(CliError::io(p))?;
            let mut w = BufWriter::new(file);
            w.write_all(contents.as_bytes())
                .and_then(|_| w.flush())
                .map_err(CliError::io(p))
        }
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(CliError::io("<stdout>")),
    }
}

pub fn trajectories_to_csv(batch: &TrajectoryBatch) -> String {
    let mut out = String::from("sample_id,k");
    for j in 1..=batch.dim() {
        write!(out, ",x{j}").unwrap();
    }
    out.push('\n');
    for (i, x) in batch.iter().enumerate() {
        for (k, state) in x.states().enumerate() {
            write!(out, "{i},{k}").unwrap();
            for v in state {
                write!(out, ",{}", fmt_f64(*v)).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_trajectories(path: &Path) -> Result<TrajectoryBatch> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let parse_err = |line: u64, msg: String| CliError::Parse {
        path: path.into(),
        line,
        msg,
    };
    let dim = header.len().saturating_sub(2);
    let expected: Vec<String> = ["sample_id".to_string(), "k".to_string()]
        .into_iter()
        .chain((1..=dim).map(|j| format!("x{j}")))
        .collect();
    if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(1, format!("header must be sample_id,k,x1,...,xn; found {:?}", header.as_slice())));
    }

    let mut trajectories = Vec::new();
    let mut current: Option<(u64, Vec<f64>)> = None;
    let mut next_k = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != dim + 2 {
            return Err(parse_err(line, format!("expected {} fields, found {}", dim + 2, record.len())));
        }
        let id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad sample_id {:?}", &record[0])))?;
        let k: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad step {:?}", &record[1])))?;
        let values = (2..dim + 2)
            .map(|j| {
                let v: f64 = record[j]
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad value {:?}", &record[j])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(line, format!("non-finite value {v}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;

        match &mut current {
            Some((cur, data)) if *cur == id => {
                if k != next_k {
                    return Err(parse_err(line, format!("sample {id}: expected step {next_k}, found {k}")));
                }
                data.extend(values);
            }
            _ => {
                if let Some((prev, data)) = current.take() {
                    if id < prev {
                        return Err(parse_err(line, format!("rows must be sorted by sample_id; {id} after {prev}")));
                    }
                    trajectories.push(Trajectory::from_flat(dim, data)?);
                }
                if k != 0 {
                    return Err(parse_err(line, format!("sample {id} must start at step 0, found {k}")));
                }
                current = Some((id, values));
            }
        }
        next_k = k + 1;
    }
    if let Some((_, data)) = current {
        trajectories.push(Trajectory::from_flat(dim, data)?);
    }
    if trajectories.is_empty() {
        return Err(parse_err(2, "no trajectory rows".into()));
    }
    TrajectoryBatch::new(trajectories).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.into(),
            source,
        },
        other => CliError::Parse {
            path: path.into(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

/// A CSV table with a fixed header.
pub struct Table {
    out: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            out: header.join(",") + "\n",
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.width, "table row width");
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn into_string(self) -> String {
        self.out
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable document");
    s.push('\n');
    s
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.into(),
        line: e.line() as u64,
        msg: e.to_string(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(sha256_hex(&bytes))
}
