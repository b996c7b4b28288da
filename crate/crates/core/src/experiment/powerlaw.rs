//! Least-squares power-law fits `y = a x^b` in log-log space.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    /// 95% confidence interval on `b` from the slope's t-interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
    /// Standard deviation of the log-space residuals.
    pub residual_std: f64,
    pub r_squared: f64,
}

/// Ordinary least squares on `(ln x, ln y)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::InvalidArgument(format!("non-positive or non-finite point {p:?}")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 1e-14 * n * (1.0 + mx * mx)) {
        return Err(Error::InvalidArgument("all x values are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let b = sxy / sxx;
    let ln_a = my - b * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - ln_a - b * x).powi(2)).sum();
    let dof = n - 2.0;
    let residual_var = ssr / dof;
    let se = (residual_var / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .expect("dof >= 1")
        .inverse_cdf(0.975);
    Ok(PowerLawFit {
        a: ln_a.exp(),
        b,
        ci_low: b - t * se,
        ci_high: b + t * se,
        points: points.len(),
        residual_std: residual_var.sqrt(),
        r_squared: if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 },
    })
}

/// Drops the largest `floor(fraction * len)` points by `y`.
pub fn trim_largest(points: &[(f64, f64)], fraction: f64) -> Vec<(f64, f64)> {
    let drop = (fraction * points.len() as f64).floor() as usize;
    let mut sorted = points.to_vec();
    sorted.sort_by(|p, q| p.1.total_cmp(&q.1));
    sorted.truncate(points.len() - drop);
    sorted
}

/// Decay constant `alpha` of a gap trajectory `nu_t ~ nu_0 (1 - alpha /
/// sqrt(r))^t`, from a least-squares line through `ln nu_t`. The first
/// `skip` entries are ignored.
pub fn decay_constant(gaps: &[f64], rank: usize, skip: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .enumerate()
        .skip(skip)
        .filter(|(_, g)| **g > 0.0)
        .map(|(t, g)| (t as f64, g.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let slope = stl / stt;
    Some((rank as f64).sqrt() * (1.0 - slope.exp()))
}
