//! Classical simulation of the quantum short-step method.
//!
//! The quantum linear-system solver is not simulated at the amplitude level.
//! Its output is modelled by the guarantee of vector-state tomography combined
//! with norm estimation: the reconstructed Newton step `v_hat` satisfies
//! `||v_hat - v|| <= 2 delta ||v||`. The direction is perturbed by a Gaussian
//! error of size at most `delta` and the norm by a uniform relative error of
//! at most `norm_delta`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ipm::{self, IpmConfig, IterationDiagnostics, RunReport};
use crate::jordan::BlockVector;
use crate::socp::{IpmState, SocpInstance};

/// Clamp range for the adaptive relative precision.
pub const ADAPTIVE_DELTA_RANGE: (f64, f64) = (1e-12, 0.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Every step is reconstructed with relative precision `delta`.
    Fixed,
    /// Relative precision chosen each iteration so the absolute step errors
    /// stay below the bound `xi * lambda_min` for both `x` and `s`, capped
    /// at `delta`.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Tomography precision; `0` gives the exact method.
    pub delta: f64,
    /// Norm-estimation precision, defaults to the precision in use.
    pub norm_delta: Option<f64>,
    pub seed: u64,
    pub mode: NoiseMode,
    /// Perturb `dx`, `dy`, `ds` separately instead of the stacked vector.
    pub per_block: bool,
    /// Precision constant of the step-correctness bound.
    pub xi: f64,
    /// Neighbourhood constant, used only for reporting.
    pub eta: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            delta: 0.0,
            norm_delta: None,
            seed: 0,
            mode: NoiseMode::Fixed,
            per_block: false,
            xi: 0.001,
            eta: 0.01,
        }
    }
}

impl NoiseModel {
    pub fn fixed(delta: f64, seed: u64) -> Self {
        Self { delta, seed, ..Default::default() }
    }

    /// Adaptive precision capped at `cap`.
    pub fn adaptive(cap: f64, seed: u64) -> Self {
        Self { delta: cap, seed, mode: NoiseMode::Adaptive, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if let Some(nd) = self.norm_delta {
            if !(0.0..1.0).contains(&nd) {
                return Err(Error::InvalidArgument(format!("norm_delta must lie in [0, 1), got {nd}")));
            }
        }
        if !(self.xi > 0.0) {
            return Err(Error::InvalidArgument(format!("xi must be positive, got {}", self.xi)));
        }
        Ok(())
    }
}

/// Reconstructs `v` with relative direction error at most `delta` and
/// relative norm error at most `norm_delta`; the result always satisfies
/// `||v_hat - v|| <= 2 delta ||v||`.
pub fn simulate_tomography<R: Rng + ?Sized>(
    v: &DVector<f64>,
    delta: f64,
    norm_delta: f64,
    rng: &mut R,
) -> DVector<f64> {
    let norm = v.norm();
    if norm == 0.0 || (delta == 0.0 && norm_delta == 0.0) {
        return v.clone();
    }
    let d = v.len();
    let unit = v / norm;
    let mut g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    g *= delta / (d as f64).sqrt();
    let gn = g.norm();
    if gn > delta {
        g *= delta / gn;
    }
    let mut dir = unit + g;
    let dn = dir.norm();
    if dn > 0.0 {
        dir /= dn;
    }
    let u = if norm_delta > 0.0 { rng.random_range(-norm_delta..=norm_delta) } else { 0.0 };
    let estimate = dir * (norm * (1.0 + u));
    let mut err = &estimate - v;
    let bound = 2.0 * delta * norm;
    let en = err.norm();
    if en > bound {
        err *= bound * (1.0 - 1e-12) / en;
    }
    v + err
}

/// Absolute precisions `(delta_x, delta_s)` with
/// `delta_x = xi / ||Q_x^{-1/2}|| = xi * lambda_min(x)` and likewise for `s`.
pub fn required_precision(x: &BlockVector, s: &BlockVector, xi: f64) -> Result<(f64, f64)> {
    if let Some((block, lambda_min)) = x.first_non_interior_block() {
        return Err(Error::NotInterior { which: "x", block, lambda_min });
    }
    if let Some((block, lambda_min)) = s.first_non_interior_block() {
        return Err(Error::NotInterior { which: "s", block, lambda_min });
    }
    Ok((xi * x.min_eigenvalue(), xi * s.min_eigenvalue()))
}

/// Per-iteration summand of the running time, `n kappa zeta / delta^2 *
/// log(kappa zeta / delta)`.
pub fn iteration_cost(n: usize, kappa: f64, zeta: f64, delta: f64) -> f64 {
    let kz = kappa * zeta;
    n as f64 * kz / (delta * delta) * (kz / delta).ln()
}

/// One iteration of the simulated quantum method. `rng` is the run's noise
/// stream.
pub fn quantum_step<R: Rng + ?Sized>(
    inst: &SocpInstance,
    state: &IpmState,
    config: &IpmConfig,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<(IpmState, IterationDiagnostics)> {
    if model.delta == 0.0 {
        return ipm::step(inst, state, config);
    }
    let sigma = config.sigma(inst.rank());
    let (sys, dir) = ipm::newton_direction(inst, state, sigma)?;
    let (dx_req, ds_req) = required_precision(state.x(), state.s(), model.xi)?;
    let delta_required = dx_req.min(ds_req);

    let stacked = dir.stacked();
    let delta_used = match model.mode {
        NoiseMode::Fixed => model.delta,
        NoiseMode::Adaptive => {
            let norm = stacked.norm();
            let rel = if norm > 0.0 { delta_required / (2.0 * norm) } else { model.delta };
            rel.min(model.delta)
                .clamp(ADAPTIVE_DELTA_RANGE.0, ADAPTIVE_DELTA_RANGE.1)
        }
    };
    let norm_delta = model.norm_delta.unwrap_or(delta_used);

    let measured = if model.per_block {
        let layout = &sys.layout;
        let mut out = stacked.clone();
        for range in [layout.dx(), layout.dy(), layout.ds()] {
            let part = DVector::from_column_slice(&stacked.as_slice()[range.clone()]);
            let noisy = simulate_tomography(&part, delta_used, norm_delta, rng);
            out.rows_mut(range.start, range.len()).copy_from(&noisy);
        }
        out
    } else {
        simulate_tomography(&stacked, delta_used, norm_delta, rng)
    };
    let noisy = sys.layout.split(&measured)?;
    // The step length can only use the direction the method actually sees.
    let alpha = ipm::step_length(state, &noisy, config.step_rule)?;
    let next = ipm::apply_step(state, &noisy.dx, &noisy.dy, &noisy.ds, alpha).map_err(|e| {
        Error::NoisyStepNotInterior { delta: delta_used, source: Box::new(e) }
    })?;
    let mut diag = ipm::measure(inst, &sys, &next, alpha, config)?;
    diag.delta_used = Some(delta_used);
    diag.delta_required = Some(delta_required);
    if diag.kappa.is_finite() && diag.zeta.is_finite() {
        diag.cost_term = Some(iteration_cost(sys.layout.dim(), diag.kappa, diag.zeta, delta_used));
    }
    Ok((next, diag))
}

/// Runs the simulated quantum method. Identical seed and configuration give
/// an identical report; `delta = 0` reproduces [`ipm::run`] exactly.
pub fn run_quantum(inst: &SocpInstance, config: &IpmConfig, model: &NoiseModel) -> Result<RunReport> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    ipm::drive(inst, config, |state| quantum_step(inst, state, config, model, &mut rng))
}

/// Number of iterations whose centrality exceeds `eta * nu`.
pub fn neighbourhood_violations(report: &RunReport, eta: f64) -> usize {
    report.rows.iter().filter(|r| r.centrality > eta * r.nu).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    /// `sqrt(r) log(n/eps) * n kappa zeta / delta^2 * log(kappa zeta / delta)`.
    pub quantum: f64,
    /// `(omega, sqrt(r) n^omega log(n/eps))` for each requested exponent.
    pub classical: Vec<(f64, f64)>,
    pub kappa: f64,
    pub zeta: f64,
    pub delta: f64,
    /// One of the logarithms is non-positive, so the asymptotic formula is
    /// outside its meaningful range.
    pub degenerate: bool,
}

pub const DEFAULT_OMEGAS: [f64; 2] = [2.373, 3.0];

/// Running-time formula evaluated at explicit parameter values.
pub fn cost_formula(
    r: usize,
    n: usize,
    epsilon: f64,
    kappa: f64,
    zeta: f64,
    delta: f64,
    omegas: &[f64],
) -> Result<CostEstimate> {
    if !(delta > 0.0) {
        return Err(Error::UndefinedCost("tomography precision is zero"));
    }
    if !(kappa.is_finite() && zeta.is_finite()) {
        return Err(Error::UndefinedCost("kappa or zeta is not finite"));
    }
    if !(epsilon > 0.0) || n == 0 {
        return Err(Error::InvalidArgument("epsilon and n must be positive".into()));
    }
    let nf = n as f64;
    let iters = (r as f64).sqrt() * (nf / epsilon).ln();
    let inner = (kappa * zeta / delta).ln();
    let quantum = iters * nf * kappa * zeta / (delta * delta) * inner;
    let classical = omegas.iter().map(|&w| (w, iters * nf.powf(w))).collect();
    Ok(CostEstimate {
        quantum,
        classical,
        kappa,
        zeta,
        delta,
        degenerate: !(iters > 0.0 && inner > 0.0),
    })
}

/// Cost of a finished run with `kappa, zeta` maximised and `delta` minimised
/// over its iterations.
pub fn cost_estimate(report: &RunReport, epsilon: f64, r: usize, n: usize, omegas: &[f64]) -> Result<CostEstimate> {
    let delta = report
        .delta_min()
        .ok_or(Error::UndefinedCost("exact run has no tomography precision"))?;
    if report.rows.is_empty() {
        return Err(Error::UndefinedCost("report has no iterations"));
    }
    cost_formula(r, n, epsilon, report.kappa_max(), report.zeta_max(), delta, omegas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jordan::ConeStructure;
    use nalgebra::{DMatrix, SymmetricEigen};
    use std::sync::Arc;

    #[test]
    fn zero_delta_and_zero_vector_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_eq!(simulate_tomography(&v, 0.0, 0.0, &mut rng), v);
        let z = DVector::zeros(4);
        assert_eq!(simulate_tomography(&z, 0.1, 0.1, &mut rng), z);
    }

    #[test]
    fn tomography_error_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let delta = 0.05;
        let mut max = 0.0f64;
        let mut sum = 0.0;
        let trials = 10_000;
        for _ in 0..trials {
            let v = DVector::from_fn(12, |_, _| rng.random_range(-3.0..3.0));
            let e = (simulate_tomography(&v, delta, delta, &mut rng) - &v).norm() / v.norm();
            max = max.max(e);
            sum += e;
        }
        let mean = sum / trials as f64;
        assert!(max <= 2.0 * delta);
        assert!(mean >= delta / 4.0 && mean <= 2.0 * delta, "mean {mean}");
    }

    #[test]
    fn required_precision_examples() {
        let st = Arc::new(ConeStructure::new(vec![3, 0, 1]).unwrap());
        let e = BlockVector::identity(st.clone());
        let (dx, ds) = required_precision(&e, &e.scale(2.0), 0.001).unwrap();
        assert!((dx - 0.001).abs() < 1e-18);
        assert!((ds - 0.002).abs() < 1e-18);
        let bad = BlockVector::from_slice(st, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(required_precision(&bad, &e, 0.001).is_err());
    }

    #[test]
    fn required_precision_matches_dense_inverse_square_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [1usize, 2, 4] {
            for _ in 0..20 {
                let mut b: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nb = b[1..].iter().map(|t| t * t).sum::<f64>().sqrt();
                b[0] = nb + rng.random_range(0.05..1.0);
                let st = Arc::new(ConeStructure::new(vec![k - 1]).unwrap());
                let x = BlockVector::from_slice(st, &b).unwrap();
                let xi = 0.001;
                let (dx, _) = required_precision(&x, &x, xi).unwrap();
                let q = crate::jordan::quadratic_rep(&b);
                let eig = SymmetricEigen::new(q);
                // ||Q^{-1/2}||_2 from the dense eigendecomposition
                let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
                let qm = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
                let norm = qm.svd(false, false).singular_values.max();
                assert!((dx - xi / norm).abs() < 1e-8 * xi, "{dx} vs {}", xi / norm);
            }
        }
    }

    #[test]
    fn cost_formula_examples() {
        // n = 1 and eps = 1/e make log(n / eps) = 1.
        let eps = 1.0 / std::f64::consts::E;
        let c = cost_formula(1, 1, eps, 1.0, 1.0, 1.0, &DEFAULT_OMEGAS).unwrap();
        assert_eq!(c.quantum, 0.0);
        assert!(c.degenerate);
        let c = cost_formula(1, 1, eps, 1.0, 1.0, 0.1, &DEFAULT_OMEGAS).unwrap();
        assert!((c.quantum - 100.0 * 10f64.ln()).abs() < 1e-9);
        assert!(!c.degenerate);
        assert!((c.classical[1].1 - 1.0).abs() < 1e-12);

        let base = cost_formula(4, 50, 0.1, 10.0, 2.0, 0.01, &[3.0]).unwrap();
        let dbl = cost_formula(4, 50, 0.1, 20.0, 2.0, 0.01, &[3.0]).unwrap();
        let inner = (10.0 * 2.0 / 0.01f64).ln();
        let expect = base.quantum * 2.0 * (inner + 2f64.ln()) / inner;
        assert!((dbl.quantum - expect).abs() < 1e-9 * expect);
        assert!(cost_formula(1, 1, 0.1, 1.0, 1.0, 0.0, &[3.0]).is_err());
    }

    #[test]
    fn zero_delta_cost_is_undefined() {
        let inst = SocpInstance::new(
            ConeStructure::new(vec![0]).unwrap(),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let rep = run_quantum(&inst, &IpmConfig::default(), &NoiseModel::default()).unwrap();
        assert!(matches!(
            cost_estimate(&rep, 1e-6, 1, 3, &DEFAULT_OMEGAS),
            Err(Error::UndefinedCost(_))
        ));
    }
}
