use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use regime_qml::dgp::{save_sample, simulate, HmmDgpParams, OutcomeKind, SimOptions, DEFAULT_BURN_IN};
use regime_qml::estimator::{qml_estimate, EstimatorConfig};
use regime_qml::harness::{render_table, run_experiment, ExperimentConfig, Layout, McSummary};
use regime_qml::inference::{attach_standard_errors, Bandwidth, HacConfig};
use regime_qml::mixture::ModelSpec;
use regime_qml::oracle::{cf_ratio_check, default_tau_grid, pseudo_true_weights, CfFamily};
use regime_qml::{Error, Result};

#[derive(Parser)]
#[command(name = "regime-qml", version, about = "Regime-switching simulation, mixture QML and Monte Carlo tables")]
struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Hmm,
    Msar,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one sample and write it as CSV.
    Simulate {
        /// Process parameters (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "hmm")]
        model: Model,
        #[arg(short = 'T', long = "T")]
        t: usize,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the i.i.d.-regime mixture to a CSV sample and report sandwich SEs.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "hmm")]
        model: Model,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Estimator settings (TOML); flags below override it.
        #[arg(long)]
        estimator: Option<PathBuf>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// "auto" or a non-negative bandwidth.
        #[arg(long, default_value = "auto")]
        bandwidth: Bandwidth,
    },
    /// Run a Monte Carlo experiment described by a TOML file.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        n_reps: Option<usize>,
    },
    /// Pseudo-true mixing weights by long-run simulation.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        n_sim: usize,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Characteristic-function ratio check for identifiability.
    CheckId {
        /// gaussian or student-t:<nu>
        #[arg(long)]
        family: CfFamily,
        #[arg(long)]
        a1: f64,
        #[arg(long)]
        a2: f64,
        /// Comma-separated increasing frequencies (default 1,2,...,20).
        #[arg(long, value_delimiter = ',')]
        tau: Option<Vec<f64>>,
    },
    /// Render summaries (summary.json files or experiment directories) as a table.
    Render {
        #[arg(long, value_enum)]
        layout: LayoutArg,
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Hmm,
    Msar,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    write_stdout(&(serde_json::to_string_pretty(value)? + "\n"))
}

/// A closed pipe (e.g. output piped into `head`) is not an error.
fn write_stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io { path: "<stdout>".into(), source: e }),
        _ => Ok(()),
    }
}

fn load_summary(path: &Path) -> Result<McSummary> {
    let file = if path.is_dir() { path.join("summary.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|source| Error::Io { path: file.clone(), source })?;
    Ok(serde_json::from_str(&text)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            model,
            t,
            burn_in,
            seed,
            out,
        } => {
            let params: HmmDgpParams = read_toml(&config)?;
            let kind = match model {
                Model::Hmm => OutcomeKind::Hmm,
                Model::Msar => OutcomeKind::Msar,
            };
            let sim = simulate(&params, kind, t, burn_in, seed, SimOptions::default())?;
            save_sample(&sim.sample, &out)?;
            print_json(&serde_json::json!({
                "path": out,
                "T": sim.sample.len(),
                "origin": sim.sample.origin,
            }))
        }
        Command::Fit {
            data,
            model,
            d,
            estimator,
            starts,
            seed,
            bandwidth,
        } => {
            let sample = regime_qml::dgp::load_sample(&data)?;
            let spec = match model {
                Model::Hmm => ModelSpec::hmm(d),
                Model::Msar => ModelSpec::msar(d),
            };
            let mut cfg: EstimatorConfig = match estimator {
                Some(p) => read_toml(&p)?,
                None => EstimatorConfig::default(),
            };
            if let Some(n) = starts {
                cfg.n_starts = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let mut fit = qml_estimate(&sample, &spec, &cfg)?;
            let hac = HacConfig {
                bandwidth,
                ..Default::default()
            };
            let sandwich = attach_standard_errors(&mut fit, &sample, &hac);
            fit.notes
                .push("standard errors are on the natural scale (delta method for sigma and weights)".into());
            print_json(&serde_json::json!({
                "fit": fit,
                "bandwidth": sandwich.as_ref().map(|s| s.bandwidth),
                "psd_floored": sandwich.as_ref().map(|s| s.psd_floored),
            }))
        }
        Command::Mc {
            config,
            out_dir,
            n_reps,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out_dir {
                cfg.out_dir = dir;
            }
            if let Some(n) = n_reps {
                cfg.n_reps = n;
            }
            let out = run_experiment(&cfg, cli.threads)?;
            print_json(&out.summary)
        }
        Command::Oracle {
            config,
            n_sim,
            burn_in,
            seed,
        } => {
            let params: HmmDgpParams = read_toml(&config)?;
            print_json(&pseudo_true_weights(&params, n_sim, burn_in, seed)?)
        }
        Command::CheckId { family, a1, a2, tau } => {
            let grid = tau.unwrap_or_else(default_tau_grid);
            print_json(&cf_ratio_check(family, a1, a2, &grid)?)
        }
        Command::Render { layout, inputs, out } => {
            let summaries = inputs.iter().map(|p| load_summary(p)).collect::<Result<Vec<_>>>()?;
            let layout = match layout {
                LayoutArg::Hmm => Layout::Hmm,
                LayoutArg::Msar => Layout::Msar,
            };
            let table = render_table(&summaries, layout)?;
            match out {
                Some(p) => std::fs::write(&p, table).map_err(|source| Error::Io { path: p, source }),
                None => write_stdout(&table),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
