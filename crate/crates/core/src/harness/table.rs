use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::summary::McSummary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Hmm,
    Msar,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmm" => Ok(Layout::Hmm),
            "msar" => Ok(Layout::Msar),
            _ => Err(Error::Config(format!("unknown layout {s:?}; use hmm or msar"))),
        }
    }
}

impl Layout {
    fn columns(&self) -> &'static [(&'static str, &'static str)] {
        match self {
            Layout::Hmm => &[
                ("mu(1)", "mu1"),
                ("mu(2)", "mu2"),
                ("gamma(1)", "gamma1"),
                ("gamma(2)", "gamma2"),
                ("sigma(1)", "sigma1"),
                ("sigma(2)", "sigma2"),
            ],
            Layout::Msar => &[
                ("mu(1)", "mu1"),
                ("mu(2)", "mu2"),
                ("sigma(1)", "sigma1"),
                ("sigma(2)", "sigma2"),
                ("phi", "phi"),
            ],
        }
    }
}

const CELL: usize = 10;
const LEAD: usize = 6;
const GAP: &str = "   ";

type Stat = fn(&McSummary, usize) -> f64;

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{:>CELL$.3}", if x == 0.0 { 0.0 } else { x }),
        _ => format!("{:>CELL$}", "-"),
    }
}

/// Bias and SD/SE blocks with sample sizes as rows and designs as column
/// panels, two panels side by side.
pub fn render_table(summaries: &[McSummary], layout: Layout) -> Result<String> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::Domain("no summaries to render".into()))?;
    for s in summaries {
        if s.param_names != first.param_names {
            return Err(Error::Domain(format!(
                "summary {:?} (T = {}) has parameters {:?}, expected {:?}",
                s.label, s.t, s.param_names, first.param_names
            )));
        }
    }
    let cols = layout.columns();
    let idx: Vec<usize> = cols
        .iter()
        .map(|(_, name)| {
            first
                .param_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Domain(format!("layout needs parameter {name}")))
        })
        .collect::<Result<_>>()?;

    let mut designs: Vec<&str> = Vec::new();
    for s in summaries {
        if !designs.contains(&s.label.as_str()) {
            designs.push(&s.label);
        }
    }
    let panel_width = CELL * cols.len();
    let mut out = String::new();
    let rule = "=".repeat(LEAD + 2 * panel_width + GAP.len());
    for block in designs.chunks(2) {
        let panels: Vec<Vec<&McSummary>> = block
            .iter()
            .map(|d| summaries.iter().filter(|s| s.label == *d).collect())
            .collect();
        let mut ts: Vec<usize> = panels.iter().flatten().map(|s| s.t).collect();
        ts.sort_unstable();
        ts.dedup();

        writeln!(out, "{rule}").unwrap();
        let mut line = format!("{:<LEAD$}", "");
        for (i, d) in block.iter().enumerate() {
            if i > 0 {
                line.push_str(GAP);
            }
            line.push_str(&format!("{:^panel_width$}", d));
        }
        writeln!(out, "{}", line.trim_end()).unwrap();
        let mut line = format!("{:<LEAD$}", "T");
        for i in 0..block.len() {
            if i > 0 {
                line.push_str(GAP);
            }
            for (label, _) in cols {
                line.push_str(&format!("{label:>CELL$}"));
            }
        }
        writeln!(out, "{line}").unwrap();
        let stats: [(&str, Stat); 2] = [
            ("Bias", |s, k| s.bias[k]),
            ("Standard Deviation / Standard Error", |s, k| s.sd_se_ratio[k]),
        ];
        for (title, stat) in stats {
            writeln!(out, "{:<LEAD$}{title}", "").unwrap();
            for &t in &ts {
                let mut line = format!("{t:<LEAD$}");
                for (i, panel) in panels.iter().enumerate() {
                    if i > 0 {
                        line.push_str(GAP);
                    }
                    let s = panel.iter().find(|s| s.t == t);
                    for &k in &idx {
                        line.push_str(&cell(s.map(|s| stat(s, k))));
                    }
                }
                writeln!(out, "{line}").unwrap();
            }
        }
    }
    writeln!(out, "{rule}").unwrap();
    Ok(out)
}
