//! Seeded Monte Carlo experiments: simulate, fit, align to the truth,
//! attach sandwich standard errors, aggregate and render.

mod config;
mod record;
mod run;
mod summary;
mod table;

pub use config::{ExperimentConfig, DEFAULT_ORACLE_N_SIM};
pub use record::{read_replications, write_replications, ReplicationRecord};
pub use run::{
    compute_truth, replicate, run_experiment, run_replication, summary_from_dir, ExperimentOutput, Truth,
};
pub use summary::{summarize, McSummary};
pub use table::{render_table, Layout};
