use serde::{Deserialize, Serialize};

use super::record::ReplicationRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub label: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub n_reps: usize,
    pub n_used: usize,
    pub n_converged: usize,
    pub n_degenerate: usize,
    pub n_failed: usize,
    pub param_names: Vec<String>,
    #[serde(deserialize_with = "nan_as_null")]
    pub truth: Vec<f64>,
    #[serde(deserialize_with = "nan_as_null")]
    pub mean: Vec<f64>,
    #[serde(deserialize_with = "nan_as_null")]
    pub bias: Vec<f64>,
    /// Monte Carlo standard error of each bias entry.
    #[serde(deserialize_with = "nan_as_null")]
    pub bias_se: Vec<f64>,
    #[serde(deserialize_with = "nan_as_null")]
    pub sd: Vec<f64>,
    #[serde(deserialize_with = "nan_as_null")]
    pub mean_se: Vec<f64>,
    #[serde(deserialize_with = "nan_as_null")]
    pub sd_se_ratio: Vec<f64>,
}

/// JSON has no NaN; serde_json writes it as `null`.
fn nan_as_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let v: Vec<Option<f64>> = Deserialize::deserialize(d)?;
    Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
}

/// Aggregates usable records, taken in `rep` order.
pub fn summarize(label: &str, t: usize, names: &[String], truth: &[f64], records: &[ReplicationRecord]) -> McSummary {
    let mut sorted: Vec<&ReplicationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.rep);
    let used: Vec<&ReplicationRecord> = sorted.iter().copied().filter(|r| r.usable()).collect();
    let n = used.len() as f64;
    let q = names.len();
    let col_mean = |f: &dyn Fn(&ReplicationRecord) -> f64| used.iter().map(|r| f(r)).sum::<f64>() / n;
    let mut mean = vec![f64::NAN; q];
    let mut sd = vec![f64::NAN; q];
    let mut mean_se = vec![f64::NAN; q];
    for k in 0..q {
        if used.is_empty() {
            break;
        }
        mean[k] = col_mean(&|r| r.estimates[k]);
        mean_se[k] = col_mean(&|r| r.std_errors[k]);
        if used.len() > 1 {
            let ss: f64 = used.iter().map(|r| (r.estimates[k] - mean[k]).powi(2)).sum();
            sd[k] = (ss / (n - 1.0)).sqrt();
        }
    }
    let bias: Vec<f64> = mean.iter().zip(truth).map(|(m, t)| m - t).collect();
    McSummary {
        label: label.to_string(),
        t,
        n_reps: records.len(),
        n_used: used.len(),
        n_converged: records.iter().filter(|r| !r.failed && r.converged).count(),
        n_degenerate: records.iter().filter(|r| r.degenerate).count(),
        n_failed: records.iter().filter(|r| r.failed).count(),
        param_names: names.to_vec(),
        truth: truth.to_vec(),
        bias_se: sd.iter().map(|s| s / n.sqrt()).collect(),
        sd_se_ratio: sd.iter().zip(&mean_se).map(|(s, m)| s / m).collect(),
        mean,
        bias,
        sd,
        mean_se,
    }
}
