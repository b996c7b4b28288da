//! Exact short-step interior-point method.
//!
//! Every iteration solves the Newton system with centring parameter
//! `sigma = 1 - chi / sqrt(r)` and takes the full step. Starting from the
//! infeasible point `x = s = tau e, y = 0`, the first iterations may need a
//! shorter step to stay interior; [`StepRule::FractionToBoundary`] damps only
//! those steps and leaves every full step untouched.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jordan::BlockVector;
use crate::newton::{self, NewtonStep, NewtonSystem};
use crate::socp::{self, IpmState, SocpInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StepRule {
    /// Always take the full Newton step; leaving the interior is an error.
    Full,
    /// Full step whenever `x + dx` and `s + ds` stay interior with the given
    /// margin, otherwise `gamma` times the distance to the boundary.
    FractionToBoundary { gamma: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::FractionToBoundary { gamma: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IpmConfig {
    /// Target duality gap.
    pub epsilon: f64,
    /// Step constant in `sigma = 1 - chi / sqrt(r)`.
    pub chi: f64,
    pub max_iters: usize,
    /// Initial scale `tau`; `None` means `max(1, ||b||_inf, ||c||_inf)`.
    pub initial_scale: Option<f64>,
    pub step_rule: StepRule,
    /// Compute `kappa` and `zeta` of every Newton matrix (one SVD each).
    pub track_conditioning: bool,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            chi: 0.1,
            max_iters: 10_000,
            initial_scale: None,
            step_rule: StepRule::default(),
            track_conditioning: true,
        }
    }
}

impl IpmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(Error::InvalidArgument(format!("chi must lie in (0, 1), got {}", self.chi)));
        }
        if let Some(t) = self.initial_scale {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!("initial scale must be positive, got {t}")));
            }
        }
        if let StepRule::FractionToBoundary { gamma } = self.step_rule {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {gamma}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self, rank: usize) -> f64 {
        1.0 - self.chi / (rank as f64).sqrt()
    }

    pub fn tau(&self, inst: &SocpInstance) -> f64 {
        self.initial_scale
            .unwrap_or_else(|| 1f64.max(inst.b().amax()).max(inst.c().amax()))
    }
}

/// One row of a run report. Quantum-only fields are omitted from JSON for
/// exact runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iter: usize,
    pub nu: f64,
    pub centrality: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub step_length: f64,
    /// Smallest spectral value over both iterates after the step.
    pub min_eigenvalue: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_used: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_required: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_term: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum RunStatus {
    Converged,
    MaxIterations,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub iterations: usize,
    pub rank: usize,
    pub sigma: f64,
    pub nu0: f64,
    pub final_nu: f64,
    pub final_primal_residual: f64,
    pub final_dual_residual: f64,
    pub objective: f64,
    pub rows: Vec<IterationDiagnostics>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

impl RunReport {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    /// `kappa = max_t kappa_t`.
    pub fn kappa_max(&self) -> f64 {
        self.rows.iter().map(|r| r.kappa).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn zeta_max(&self) -> f64 {
        self.rows.iter().map(|r| r.zeta).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest tomography precision used, `None` for exact runs.
    pub fn delta_min(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.delta_used)
            .reduce(f64::min)
    }

    pub fn last_delta_used(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.delta_used)
    }

    /// Gap trajectory `nu_0, nu_1, ..., nu_T`.
    pub fn gaps(&self) -> Vec<f64> {
        std::iter::once(self.nu0)
            .chain(self.rows.iter().map(|r| r.nu))
            .collect()
    }

    /// Number of leading gap entries to skip before the steady phase: every
    /// damped step plus the first full step, which still absorbs the
    /// infeasibility of the starting point.
    pub fn burn_in(&self) -> usize {
        let damped = self.rows.iter().rposition(|r| r.step_length < 1.0).map_or(0, |i| i + 1);
        (damped + 1).min(self.rows.len())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `x = s = tau e`, `y = 0`, so `nu = tau^2`.
pub fn initial_point(inst: &SocpInstance, tau: f64) -> Result<IpmState> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("initial scale must be positive, got {tau}")));
    }
    let e = BlockVector::identity(inst.structure().clone());
    let x = e.scale(tau);
    IpmState::new(x.clone(), DVector::zeros(inst.rows()), x)
}

pub(crate) fn newton_direction(
    inst: &SocpInstance,
    state: &IpmState,
    sigma: f64,
) -> Result<(NewtonSystem, NewtonStep)> {
    let sys = newton::assemble(inst, state, sigma)?;
    let step = newton::solve(&sys)?;
    Ok((sys, step))
}

/// Step length chosen by `rule` for direction `step`.
pub(crate) fn step_length(state: &IpmState, step: &NewtonStep, rule: StepRule) -> Result<f64> {
    match rule {
        StepRule::Full => Ok(1.0),
        StepRule::FractionToBoundary { gamma } => {
            let amax = state.x().max_step(&step.dx)?.min(state.s().max_step(&step.ds)?);
            Ok((gamma * amax).min(1.0))
        }
    }
}

pub(crate) fn apply_step(
    state: &IpmState,
    dx: &BlockVector,
    dy: &DVector<f64>,
    ds: &BlockVector,
    alpha: f64,
) -> Result<IpmState> {
    let x = state.x().axpy(alpha, dx)?;
    let s = state.s().axpy(alpha, ds)?;
    if let Some((block, lambda_min)) = x.first_non_interior_block() {
        return Err(Error::NotInterior { which: "x", block, lambda_min });
    }
    if let Some((block, lambda_min)) = s.first_non_interior_block() {
        return Err(Error::NotInterior { which: "s", block, lambda_min });
    }
    IpmState::new(x, state.y() + dy * alpha, s)
}

pub(crate) fn measure(
    inst: &SocpInstance,
    sys: &NewtonSystem,
    next: &IpmState,
    alpha: f64,
    config: &IpmConfig,
) -> Result<IterationDiagnostics> {
    let (primal, dual) = socp::residuals(inst, next)?;
    let (kappa, zeta) = if config.track_conditioning {
        let d = newton::diagnostics(&sys.matrix)?;
        (d.kappa, d.zeta)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(IterationDiagnostics {
        iter: 0,
        nu: next.nu(),
        centrality: socp::centrality(next.x(), next.s(), next.nu())?,
        kappa,
        zeta,
        primal_res: primal.norm(),
        dual_res: dual.norm(),
        step_length: alpha,
        min_eigenvalue: next.x().min_eigenvalue().min(next.s().min_eigenvalue()),
        delta_used: None,
        delta_required: None,
        cost_term: None,
    })
}

/// One exact short-step iteration.
pub fn step(
    inst: &SocpInstance,
    state: &IpmState,
    config: &IpmConfig,
) -> Result<(IpmState, IterationDiagnostics)> {
    let sigma = config.sigma(inst.rank());
    let (sys, dir) = newton_direction(inst, state, sigma)?;
    let alpha = step_length(state, &dir, config.step_rule)?;
    let next = apply_step(state, &dir.dx, &dir.dy, &dir.ds, alpha)?;
    let diag = measure(inst, &sys, &next, alpha, config)?;
    Ok((next, diag))
}

/// Runs the exact method until `nu <= epsilon` or `max_iters`.
pub fn run(inst: &SocpInstance, config: &IpmConfig) -> Result<RunReport> {
    drive(inst, config, |state| step(inst, state, config))
}

pub(crate) fn drive<F>(inst: &SocpInstance, config: &IpmConfig, mut advance: F) -> Result<RunReport>
where
    F: FnMut(&IpmState) -> Result<(IpmState, IterationDiagnostics)>,
{
    config.validate()?;
    let mut state = initial_point(inst, config.tau(inst))?;
    let nu0 = state.nu();
    let mut rows = Vec::new();
    let mut status = RunStatus::MaxIterations;
    if nu0 <= config.epsilon {
        status = RunStatus::Converged;
    } else {
        for t in 1..=config.max_iters {
            match advance(&state) {
                Ok((next, mut diag)) => {
                    diag.iter = t;
                    rows.push(diag);
                    state = next;
                    if state.nu() <= config.epsilon {
                        status = RunStatus::Converged;
                        break;
                    }
                }
                Err(e) => {
                    log::debug!("iteration {t} failed: {e}");
                    status = RunStatus::Failed(e.to_string());
                    break;
                }
            }
        }
    }
    let (primal, dual) = socp::residuals(inst, &state)?;
    Ok(RunReport {
        status,
        iterations: rows.len(),
        rank: inst.rank(),
        sigma: config.sigma(inst.rank()),
        nu0,
        final_nu: state.nu(),
        final_primal_residual: primal.norm(),
        final_dual_residual: dual.norm(),
        objective: inst.objective(state.x()),
        rows,
        x: state.x().as_slice().to_vec(),
        y: state.y().as_slice().to_vec(),
        s: state.s().as_slice().to_vec(),
    })
}
