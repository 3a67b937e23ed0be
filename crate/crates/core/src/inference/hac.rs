use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Parzen lag window.
pub fn parzen_weight(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.5 {
        1.0 - 6.0 * a * a + 6.0 * a * a * a
    } else if a <= 1.0 {
        2.0 * (1.0 - a).powi(3)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Parzen,
}

impl Kernel {
    pub fn weight(&self, x: f64) -> f64 {
        match self {
            Kernel::Parzen => parzen_weight(x),
        }
    }

    /// Constant of the AR(1) plug-in rule `S_T = c (alpha(2) T)^(1/5)`.
    fn plug_in_constant(&self) -> f64 {
        match self {
            Kernel::Parzen => 2.6614,
        }
    }
}

/// Kernel bandwidth: Andrews' plug-in or a fixed value. Written as `"auto"`
/// or a number in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Auto => f.write_str("auto"),
            Bandwidth::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bandwidth::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(Bandwidth::Fixed(v)),
            _ => Err(Error::Config(format!("bandwidth must be \"auto\" or a non-negative number, got {s:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthRepr {
    Text(String),
    Number(f64),
}

impl Serialize for Bandwidth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bandwidth::Auto => BandwidthRepr::Text("auto".into()).serialize(s),
            Bandwidth::Fixed(v) => BandwidthRepr::Number(*v).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match BandwidthRepr::deserialize(d)? {
            BandwidthRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
            BandwidthRepr::Number(v) => v.to_string().parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HacConfig {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
    pub demean_scores: bool,
}

impl Default for HacConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Parzen,
            bandwidth: Bandwidth::Auto,
            demean_scores: true,
        }
    }
}

/// Least-squares AR(1) fit `(rho, innovation variance)` of a demeaned series.
/// `None` when the series has no variation.
pub fn ar1_fit(series: &[f64]) -> Option<(f64, f64)> {
    let n = series.len();
    if n < 3 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let scale = series.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let ss: f64 = c.iter().map(|v| v * v).sum::<f64>();
    if scale == 0.0 || ss <= (f64::EPSILON * scale).powi(2) * n as f64 {
        return None;
    }
    let lagged: f64 = c[..n - 1].iter().map(|v| v * v).sum();
    if lagged == 0.0 {
        return None;
    }
    let cross: f64 = c[1..].iter().zip(&c[..n - 1]).map(|(a, b)| a * b).sum();
    let rho = cross / lagged;
    let sigma2 = c[1..]
        .iter()
        .zip(&c[..n - 1])
        .map(|(a, b)| (a - rho * b).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    Some((rho, sigma2))
}

/// `alpha(2)` of the AR(1) plug-in rule with unit weights. Each `rho` is
/// clamped to `[-0.97, 0.97]`.
pub fn andrews_alpha2(fits: &[(f64, f64)]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(rho, s2) in fits {
        let rho = rho.clamp(-0.97, 0.97);
        let s4 = s2 * s2;
        num += 4.0 * rho * rho * s4 / (1.0 - rho).powi(8);
        den += s4 / (1.0 - rho).powi(4);
    }
    (den > 0.0).then(|| num / den)
}

pub fn bandwidth_from_alpha(alpha2: f64, t: usize) -> f64 {
    Kernel::Parzen.plug_in_constant() * (alpha2 * t as f64).powf(0.2)
}

/// Andrews' data-driven Parzen bandwidth from AR(1) fits to every score
/// column. Columns without variation are skipped.
pub fn andrews_bandwidth(scores: &DMatrix<f64>) -> Result<f64> {
    let t = scores.nrows();
    if t < 10 {
        return Err(Error::Domain(format!("plug-in bandwidth needs T >= 10, got {t}")));
    }
    let fits: Vec<(f64, f64)> = scores
        .column_iter()
        .filter_map(|col| ar1_fit(col.as_slice()))
        .collect();
    let alpha = andrews_alpha2(&fits)
        .ok_or_else(|| Error::Domain("every score column is constant".into()))?;
    Ok(bandwidth_from_alpha(alpha, t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HacEstimate {
    pub matrix: DMatrix<f64>,
    pub bandwidth: f64,
    /// Number of autocovariance lags with non-zero weight that were summed.
    pub lags: usize,
    pub truncated: bool,
    pub psd_floored: bool,
    pub warnings: Vec<String>,
}

/// Long-run covariance of the score rows.
pub fn hac_middle(scores: &DMatrix<f64>, cfg: &HacConfig) -> Result<HacEstimate> {
    let (t, q) = scores.shape();
    if t < 2 {
        return Err(Error::Domain(format!("HAC estimation needs T >= 2, got {t}")));
    }
    let mut g = scores.clone();
    if cfg.demean_scores {
        for mut col in g.column_iter_mut() {
            let mean = col.iter().sum::<f64>() / t as f64;
            col.iter_mut().for_each(|v| *v -= mean);
        }
    }
    let bandwidth = match cfg.bandwidth {
        Bandwidth::Auto => andrews_bandwidth(&g)?,
        Bandwidth::Fixed(b) if b >= 0.0 && b.is_finite() => b,
        Bandwidth::Fixed(b) => {
            return Err(Error::Config(format!("fixed bandwidth must be non-negative, got {b}")))
        }
    };
    let mut warnings = Vec::new();
    let mut lags = bandwidth.floor() as usize;
    let mut truncated = false;
    if lags >= t {
        warnings.push(format!("bandwidth {bandwidth:.3} exceeds the sample; lags truncated to {}", t - 1));
        lags = t - 1;
        truncated = true;
    }

    let rows: Vec<Vec<f64>> = (0..t).map(|i| g.row(i).iter().copied().collect()).collect();
    let autocov = |j: usize| {
        let mut m = DMatrix::<f64>::zeros(q, q);
        for tt in j..t {
            let (a, b) = (&rows[tt], &rows[tt - j]);
            for r in 0..q {
                for c in 0..q {
                    m[(r, c)] += a[r] * b[c];
                }
            }
        }
        m / t as f64
    };
    let mut b = autocov(0);
    for j in 1..=lags {
        let w = cfg.kernel.weight(j as f64 / bandwidth);
        if w == 0.0 {
            continue;
        }
        let gj = autocov(j);
        b += (&gj + gj.transpose()) * w;
    }
    linalg::symmetrize(&mut b);

    let mut psd_floored = false;
    if lags > 0 {
        let eig = linalg::eigenvalues(&b);
        let top = eig.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
        if eig.min() < -1e-12 * top {
            let (fixed, _) = linalg::floor_psd(&b);
            b = fixed;
            psd_floored = true;
            warnings.push("negative eigenvalues of the HAC matrix were floored at zero".into());
        }
    }
    Ok(HacEstimate {
        matrix: b,
        bandwidth,
        lags,
        truncated,
        psd_floored,
        warnings,
    })
}
