//! Plot data files for experiment reports.
//!
//! | file                         | columns                                            |
//! |------------------------------|----------------------------------------------------|
//! | `gap_vs_iteration.csv`       | trial, label, iter, nu, delta_used, delta_required |
//! | `kappa_vs_iteration.csv`     | trial, label, iter, kappa                          |
//! | `kappa_vs_size.csv`          | trial, n, kappa_max                                |
//! | `inv_delta_sq_vs_size.csv`   | trial, n, inv_delta_sq                             |
//! | `complexity_vs_size.csv`     | trial, n, cost                                     |
//! | `summary.json`               | see [`PlotSummary`]                                |
//!
//! Size-indexed files contain one row per successful trial.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::powerlaw::{fit_power_law, trim_largest, PowerLawFit};
use crate::experiment::suite::{LabelledRun, TrialRow};

/// Fraction of the most expensive trials excluded from the complexity fit.
pub const COMPLEXITY_OUTLIER_FRACTION: f64 = 0.01;

pub const ZETA_NOTABLE: f64 = 5.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self { min: v[0], q25: q(0.25), median: q(0.5), q75: q(0.75), max: v[v.len() - 1] })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotSummary {
    pub trials: usize,
    pub successful_trials: usize,
    pub max_zeta: Option<f64>,
    /// Trials with `zeta > 5`.
    pub zeta_notable: usize,
    pub kappa_quantiles: Option<Quantiles>,
    /// Fit of `1 / delta^2` against `n`.
    pub inv_delta_sq_fit: Option<PowerLawFit>,
    /// Fit of the cost estimate against `n`, largest 1% removed.
    pub complexity_fit: Option<PowerLawFit>,
}

pub fn summarize(rows: &[TrialRow]) -> PlotSummary {
    let ok: Vec<&TrialRow> = rows.iter().filter(|r| r.succeeded()).collect();
    let zetas: Vec<f64> = rows.iter().map(|r| r.zeta_max).filter(|z| z.is_finite()).collect();
    let kappas: Vec<f64> = ok.iter().map(|r| r.kappa_max).collect();
    let delta_pts: Vec<(f64, f64)> = ok
        .iter()
        .filter_map(|r| r.delta_min.map(|d| (r.n as f64, 1.0 / (d * d))))
        .collect();
    let cost_pts: Vec<(f64, f64)> = ok
        .iter()
        .filter_map(|r| r.cost_estimate.map(|c| (r.n as f64, c)))
        .filter(|p| p.1 > 0.0)
        .collect();
    PlotSummary {
        trials: rows.len(),
        successful_trials: ok.len(),
        max_zeta: zetas.iter().copied().reduce(f64::max),
        zeta_notable: zetas.iter().filter(|&&z| z > ZETA_NOTABLE).count(),
        kappa_quantiles: Quantiles::of(&kappas),
        inv_delta_sq_fit: fit_power_law(&delta_pts).ok(),
        complexity_fit: fit_power_law(&trim_largest(&cost_pts, COMPLEXITY_OUTLIER_FRACTION)).ok(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes every plot file into `outdir` (created if missing) and returns the
/// paths written.
pub fn emit_plots(rows: &[TrialRow], traces: &[LabelledRun], outdir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = outdir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut open = |name: &str| -> Result<csv::Writer<fs::File>> {
        let p = dir.join(name);
        written.push(p.clone());
        Ok(csv::Writer::from_path(p)?)
    };

    let mut gap = open("gap_vs_iteration.csv")?;
    gap.write_record(["trial", "label", "iter", "nu", "delta_used", "delta_required"])?;
    let mut kap = open("kappa_vs_iteration.csv")?;
    kap.write_record(["trial", "label", "iter", "kappa"])?;
    for run in traces {
        for r in &run.report.rows {
            gap.write_record([
                run.trial.to_string(),
                run.label.clone(),
                r.iter.to_string(),
                r.nu.to_string(),
                opt(r.delta_used),
                opt(r.delta_required),
            ])?;
            kap.write_record([run.trial.to_string(), run.label.clone(), r.iter.to_string(), r.kappa.to_string()])?;
        }
    }
    gap.flush()?;
    kap.flush()?;

    let ok: Vec<&TrialRow> = rows.iter().filter(|r| r.succeeded()).collect();
    let mut ks = open("kappa_vs_size.csv")?;
    ks.write_record(["trial", "n", "kappa_max"])?;
    let mut ds = open("inv_delta_sq_vs_size.csv")?;
    ds.write_record(["trial", "n", "inv_delta_sq"])?;
    let mut cs = open("complexity_vs_size.csv")?;
    cs.write_record(["trial", "n", "cost"])?;
    for r in &ok {
        ks.write_record([r.trial.to_string(), r.n.to_string(), r.kappa_max.to_string()])?;
        if let Some(d) = r.delta_min {
            ds.write_record([r.trial.to_string(), r.n.to_string(), (1.0 / (d * d)).to_string()])?;
        }
        if let Some(c) = r.cost_estimate {
            cs.write_record([r.trial.to_string(), r.n.to_string(), c.to_string()])?;
        }
    }
    ks.flush()?;
    ds.flush()?;
    cs.flush()?;

    let summary = dir.join("summary.json");
    fs::write(&summary, serde_json::to_string_pretty(&summarize(rows))?)?;
    written.push(summary);
    Ok(written)
}
