use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Simulated {
        seed: u64,
        params_hash: String,
        burn_in: usize,
        msar: bool,
    },
    File {
        path: PathBuf,
    },
    Constructed,
}

/// One dataset of observed `(y, w, z)` paths.
///
/// Regime labels in `s` are 0-based in memory and 1-based on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Option<Vec<f64>>,
    pub s: Option<Vec<usize>>,
    pub origin: Origin,
}

impl Sample {
    /// Sample from in-memory vectors with no Z path or regime labels.
    pub fn from_yw(y: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let sample = Self {
            y,
            w,
            z: None,
            s: None,
            origin: Origin::Constructed,
        };
        sample.check()?;
        Ok(sample)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 {
            return Err(Error::Domain("sample must contain at least one observation".into()));
        }
        let mut bad = Vec::new();
        if self.w.len() != n {
            bad.push(format!("w has length {} but y has {n}", self.w.len()));
        }
        if let Some(z) = &self.z {
            if z.len() != n {
                bad.push(format!("z has length {} but y has {n}", z.len()));
            }
        }
        if let Some(s) = &self.s {
            if s.len() != n {
                bad.push(format!("s has length {} but y has {n}", s.len()));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}

/// Writes `y,w[,z][,s]` with shortest round-trip decimal rendering.
pub fn save_sample(sample: &Sample, path: &Path) -> Result<()> {
    sample.check()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut header = String::from("y,w");
    if sample.z.is_some() {
        header.push_str(",z");
    }
    if sample.s.is_some() {
        header.push_str(",s");
    }
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    for t in 0..sample.len() {
        write!(out, "{},{}", sample.y[t], sample.w[t]).map_err(io)?;
        if let Some(z) = &sample.z {
            write!(out, ",{}", z[t]).map_err(io)?;
        }
        if let Some(s) = &sample.s {
            write!(out, ",{}", s[t] + 1).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}

/// Reads a CSV sample. Columns `y` and `w` are required, `z` and `s` optional;
/// column order is free. Every cell must be a finite number.
pub fn load_sample(path: &Path) -> Result<Sample> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(iy), Some(iw)) = (col("y"), col("w")) else {
        return Err(parse_err(1, format!("header must contain columns y and w, got {:?}", headers)));
    };
    let (iz, is) = (col("z"), col("s"));

    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut z = iz.map(|_| Vec::new());
    let mut s = is.map(|_| Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |idx: usize, name: &str| -> Result<f64> {
            let cell = &record[idx];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(parse_err(line, format!("non-finite value {cell:?} in column {name}"))),
                Err(_) => Err(parse_err(line, format!("non-numeric value {cell:?} in column {name}"))),
            }
        };
        y.push(num(iy, "y")?);
        w.push(num(iw, "w")?);
        if let (Some(idx), Some(zs)) = (iz, z.as_mut()) {
            zs.push(num(idx, "z")?);
        }
        if let (Some(idx), Some(ss)) = (is, s.as_mut()) {
            let cell = &record[idx];
            match cell.parse::<usize>() {
                Ok(v) if v >= 1 => ss.push(v - 1),
                _ => {
                    return Err(parse_err(
                        line,
                        format!("regime label {cell:?} is not a positive integer"),
                    ))
                }
            }
        }
    }
    if y.is_empty() {
        return Err(parse_err(1, "file contains no observations".into()));
    }
    Ok(Sample {
        y,
        w,
        z,
        s,
        origin: Origin::File {
            path: path.to_path_buf(),
        },
    })
}
