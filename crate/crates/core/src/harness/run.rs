use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::record::{read_replications, write_replications, ReplicationRecord};
use super::summary::{summarize, McSummary};
use crate::dgp::{simulate, SimOptions};
use crate::error::{Error, Result};
use crate::estimator::{align_permutation, qml_estimate};
use crate::inference::sandwich_cov;
use crate::mixture::{Component, MixtureParams, OutcomeForm};
use crate::oracle::pseudo_true_weights;
use crate::streams::{child_seed, Stream};

/// Reference point for alignment and bias: the process's outcome
/// coefficients with the pseudo-true mixing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub params: MixtureParams,
    pub natural: Vec<f64>,
    pub weights_mc_error: Vec<f64>,
}

pub fn compute_truth(cfg: &ExperimentConfig) -> Result<Truth> {
    let oracle = pseudo_true_weights(
        &cfg.dgp,
        cfg.oracle_n_sim,
        cfg.burn_in,
        child_seed(cfg.master_seed, Stream::Oracle, 0),
    )?;
    let components = cfg
        .dgp
        .outcomes
        .iter()
        .map(|o| {
            let mut c = Component::from(*o);
            if cfg.spec.form == OutcomeForm::Msar {
                c.gamma = cfg.dgp.ar_coefficient.unwrap_or(0.0);
            }
            c
        })
        .collect();
    let params = MixtureParams::new(components, oracle.weights_star)?;
    Ok(Truth {
        natural: cfg.spec.natural(&params),
        params,
        weights_mc_error: oracle.mc_error,
    })
}

fn failed_record(rep: usize, seed: u64, q: usize, d: usize, error: String) -> ReplicationRecord {
    ReplicationRecord {
        rep,
        seed,
        failed: true,
        converged: false,
        degenerate: false,
        loglik: f64::NAN,
        max_abs_score: f64::NAN,
        em_iterations: 0,
        qn_iterations: 0,
        em_max_decrease: 0.0,
        permutation: (0..d).collect(),
        align_before: f64::NAN,
        align_after: f64::NAN,
        bandwidth: f64::NAN,
        psd_floored: false,
        estimates: vec![f64::NAN; q],
        std_errors: vec![f64::NAN; q],
        error,
    }
}

fn replicate_timed(cfg: &ExperimentConfig, truth: &Truth, rep: usize) -> (ReplicationRecord, Duration) {
    let start = Instant::now();
    let seed = child_seed(cfg.master_seed, Stream::Replication, rep as u64);
    let spec = &cfg.spec;
    let attempt = || -> Result<ReplicationRecord> {
        let sample = simulate(&cfg.dgp, cfg.kind(), cfg.t, cfg.burn_in, seed, SimOptions::default())?.sample;
        let mut est = cfg.estimator.clone();
        est.seed = seed;
        let fit = qml_estimate(&sample, spec, &est)?;
        let aligned = align_permutation(&fit.theta_hat, &truth.params)?;
        let free = spec.encode(&aligned.params)?;
        let (std_errors, bandwidth, psd_floored, error) = match sandwich_cov(&free, &sample, spec, &cfg.hac) {
            Ok(s) => (s.std_errors, s.bandwidth, s.psd_floored, String::new()),
            Err(e) => (vec![f64::NAN; spec.dim()], f64::NAN, false, e.to_string()),
        };
        Ok(ReplicationRecord {
            rep,
            seed,
            failed: false,
            converged: fit.converged,
            degenerate: fit.degenerate,
            loglik: fit.loglik,
            max_abs_score: fit.max_abs_score,
            em_iterations: fit.em_iterations,
            qn_iterations: fit.qn_iterations,
            em_max_decrease: fit.em_max_decrease(),
            permutation: aligned.permutation,
            align_before: aligned.distance_before,
            align_after: aligned.distance_after,
            bandwidth,
            psd_floored,
            estimates: spec.natural(&aligned.params),
            std_errors,
            error,
        })
    };
    let record = attempt().unwrap_or_else(|e| failed_record(rep, seed, spec.dim(), spec.d, e.to_string()));
    (record, start.elapsed())
}

/// One replication against a precomputed truth. Failures are recorded, not raised.
pub fn replicate(cfg: &ExperimentConfig, truth: &Truth, rep: usize) -> ReplicationRecord {
    replicate_timed(cfg, truth, rep).0
}

pub fn run_replication(cfg: &ExperimentConfig, rep: usize) -> Result<ReplicationRecord> {
    cfg.validate()?;
    if rep >= cfg.n_reps {
        return Err(Error::Domain(format!("replication {rep} out of range 0..{}", cfg.n_reps)));
    }
    Ok(replicate(cfg, &compute_truth(cfg)?, rep))
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: McSummary,
    pub records: Vec<ReplicationRecord>,
    pub truth: Truth,
    pub timings: Vec<Duration>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Runs every replication and writes `config.toml`, `truth.json`,
/// `replications.csv`, `timings.csv` and `summary.json` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    if dir.as_os_str().is_empty() {
        return Err(Error::Config("out_dir is not set".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;

    let truth = compute_truth(cfg)?;
    write_json(&dir.join("truth.json"), &truth)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(ReplicationRecord, Duration)> =
        pool.install(|| (0..cfg.n_reps).into_par_iter().map(|r| replicate_timed(cfg, &truth, r)).collect());
    let (records, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let names = cfg.spec.param_names();
    write_replications(&dir.join("replications.csv"), &names, &records)?;
    let timing_path = dir.join("timings.csv");
    let timing_text: String = std::iter::once("rep,elapsed_ms\n".to_string())
        .chain(timings.iter().enumerate().map(|(i, d)| format!("{i},{:.3}\n", d.as_secs_f64() * 1e3)))
        .collect();
    std::fs::write(&timing_path, timing_text).map_err(|e| Error::io(&timing_path, e))?;

    let summary = summary_from_dir(dir)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(ExperimentOutput {
        summary,
        records,
        truth,
        timings,
    })
}

/// Recomputes the summary of a finished experiment from its output files.
pub fn summary_from_dir(dir: &Path) -> Result<McSummary> {
    let cfg = ExperimentConfig::load(&dir.join("config.toml"))?;
    let truth_path = dir.join("truth.json");
    let text = std::fs::read_to_string(&truth_path).map_err(|e| Error::io(&truth_path, e))?;
    let truth: Truth = serde_json::from_str(&text)?;
    let (names, records) = read_replications(&dir.join("replications.csv"))?;
    Ok(summarize(&cfg.label, cfg.t, &names, &truth.natural, &records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::HmmDgpParams;
    use crate::estimator::EstimatorConfig;
    use crate::inference::HacConfig;
    use crate::mixture::ModelSpec;

    fn cfg(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            label: "test".into(),
            t: 300,
            n_reps: 4,
            master_seed: 9,
            burn_in: 100,
            oracle_n_sim: 20_000,
            out_dir: dir.to_path_buf(),
            dgp: HmmDgpParams::paper_hmm(0.0, 0.0),
            spec: ModelSpec::hmm(2),
            estimator: EstimatorConfig {
                n_starts: 3,
                ..Default::default()
            },
            hac: HacConfig::default(),
        }
    }

    #[test]
    fn replications_are_reproducible_and_bounded() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path());
        let a = run_replication(&c, 2).unwrap();
        let b = run_replication(&c, 2).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(a.estimates.len(), 7);
        assert!(a.estimates.iter().all(|v| v.is_finite()));
        assert!(a.align_after <= a.align_before);
        assert!(matches!(run_replication(&c, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn experiment_outputs_are_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path());
        let out = run_experiment(&c, Some(2)).unwrap();
        assert_eq!(out.records.len(), 4);
        let again = summary_from_dir(dir.path()).unwrap();
        let direct = summarize(&c.label, c.t, &c.spec.param_names(), &out.truth.natural, &out.records);
        assert_eq!(serde_json::to_string(&direct).unwrap(), serde_json::to_string(&again).unwrap());
        assert_eq!(
            serde_json::to_string(&again).unwrap(),
            serde_json::to_string(&out.summary).unwrap()
        );
        let csv1 = std::fs::read(dir.path().join("replications.csv")).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        run_experiment(&cfg(dir2.path()), Some(1)).unwrap();
        let csv2 = std::fs::read(dir2.path().join("replications.csv")).unwrap();
        assert_eq!(csv1, csv2);
    }

    #[test]
    fn unwritable_out_dir_fails_early() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let mut c = cfg(&blocker.join("sub"));
        c.n_reps = 1000;
        let t0 = Instant::now();
        assert!(matches!(run_experiment(&c, Some(1)), Err(Error::Io { .. })));
        assert!(t0.elapsed().as_secs() < 5);
    }
}
