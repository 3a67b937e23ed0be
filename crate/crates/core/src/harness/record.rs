use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of one replication. Estimates and standard errors are on the
/// natural scale, aligned to the true labelling, in `param_names` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub seed: u64,
    pub failed: bool,
    pub converged: bool,
    pub degenerate: bool,
    pub loglik: f64,
    pub max_abs_score: f64,
    pub em_iterations: usize,
    pub qn_iterations: usize,
    pub em_max_decrease: f64,
    /// `permutation[k]` is the fitted component placed in slot `k`.
    pub permutation: Vec<usize>,
    pub align_before: f64,
    pub align_after: f64,
    pub bandwidth: f64,
    pub psd_floored: bool,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub error: String,
}

impl ReplicationRecord {
    /// Counted in summaries: fitted, converged, not degenerate, with finite SEs.
    pub fn usable(&self) -> bool {
        !self.failed && self.converged && !self.degenerate && self.std_errors.iter().all(|s| s.is_finite())
    }
}

const FIXED: [&str; 15] = [
    "rep",
    "seed",
    "failed",
    "converged",
    "degenerate",
    "loglik",
    "max_abs_score",
    "em_iterations",
    "qn_iterations",
    "em_max_decrease",
    "permutation",
    "align_before",
    "align_after",
    "bandwidth",
    "psd_floored",
];

fn header(names: &[String]) -> Vec<String> {
    let mut h: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    h.extend(names.iter().map(|n| format!("est_{n}")));
    h.extend(names.iter().map(|n| format!("se_{n}")));
    h.push("error".into());
    h
}

pub fn write_replications(path: &Path, names: &[String], records: &[ReplicationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    w.write_record(header(names)).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.rep.to_string(),
            r.seed.to_string(),
            r.failed.to_string(),
            r.converged.to_string(),
            r.degenerate.to_string(),
            r.loglik.to_string(),
            r.max_abs_score.to_string(),
            r.em_iterations.to_string(),
            r.qn_iterations.to_string(),
            r.em_max_decrease.to_string(),
            r.permutation.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" "),
            r.align_before.to_string(),
            r.align_after.to_string(),
            r.bandwidth.to_string(),
            r.psd_floored.to_string(),
        ];
        row.extend(r.estimates.iter().map(f64::to_string));
        row.extend(r.std_errors.iter().map(f64::to_string));
        row.push(r.error.clone());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_replications`]; returns the parameter
/// names and the records.
pub fn read_replications(path: &Path) -> Result<(Vec<String>, Vec<ReplicationRecord>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let head: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let bad_header = || Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "not a replications file".into(),
    };
    if head.len() < FIXED.len() + 1 || head[..FIXED.len()] != FIXED {
        return Err(bad_header());
    }
    let names: Vec<String> = head[FIXED.len()..head.len() - 1]
        .iter()
        .filter_map(|h| h.strip_prefix("est_").map(String::from))
        .collect();
    let q = names.len();
    if head.len() != FIXED.len() + 2 * q + 1 {
        return Err(bad_header());
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let fail = |col: usize| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("bad value {:?} in column {}", &row[col], head[col]),
        };
        let f = |col: usize| row[col].parse::<f64>().map_err(|_| fail(col));
        let u = |col: usize| row[col].parse::<u64>().map_err(|_| fail(col));
        let b = |col: usize| row[col].parse::<bool>().map_err(|_| fail(col));
        let permutation = row[10]
            .split_whitespace()
            .map(|p| p.parse::<usize>().map_err(|_| fail(10)))
            .collect::<Result<Vec<_>>>()?;
        let off = FIXED.len();
        records.push(ReplicationRecord {
            rep: u(0)? as usize,
            seed: u(1)?,
            failed: b(2)?,
            converged: b(3)?,
            degenerate: b(4)?,
            loglik: f(5)?,
            max_abs_score: f(6)?,
            em_iterations: u(7)? as usize,
            qn_iterations: u(8)? as usize,
            em_max_decrease: f(9)?,
            permutation,
            align_before: f(11)?,
            align_after: f(12)?,
            bandwidth: f(13)?,
            psd_floored: b(14)?,
            estimates: (off..off + q).map(f).collect::<Result<_>>()?,
            std_errors: (off + q..off + 2 * q).map(f).collect::<Result<_>>()?,
            error: row[off + 2 * q].to_string(),
        });
    }
    Ok((names, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(rep: usize) -> ReplicationRecord {
        ReplicationRecord {
            rep,
            seed: 12345678901234567890,
            failed: rep == 1,
            converged: true,
            degenerate: false,
            loglik: -1.234_567_890_123_456_7,
            max_abs_score: 3.3e-9,
            em_iterations: 41,
            qn_iterations: 7,
            em_max_decrease: 0.0,
            permutation: vec![1, 0],
            align_before: 2.5,
            align_after: 0.1,
            bandwidth: 4.123,
            psd_floored: false,
            estimates: vec![0.1 + 0.2, f64::NAN],
            std_errors: vec![1e-300, f64::INFINITY],
            error: if rep == 1 { "failed, with \"quotes\"".into() } else { String::new() },
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let names = vec!["a".to_string(), "b".to_string()];
        let recs = vec![record(0), record(1)];
        write_replications(&path, &names, &recs).unwrap();
        let (n2, back) = read_replications(&path).unwrap();
        assert_eq!(n2, names);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.estimates[0].to_bits(), b.estimates[0].to_bits());
            assert!(b.estimates[1].is_nan());
            assert_eq!(a.std_errors, b.std_errors);
            assert_eq!(a.loglik.to_bits(), b.loglik.to_bits());
            assert_eq!(a.error, b.error);
            assert_eq!(a.permutation, b.permutation);
        }
        assert!(!back[1].usable());
    }

    #[test]
    fn foreign_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "y,w\n1,2\n").unwrap();
        assert!(matches!(read_replications(&path), Err(Error::Parse { .. })));
    }
}
