//! Seeded experiment suites over random portfolio sub-instances.

use std::path::PathBuf;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::powerlaw::decay_constant;
use crate::ipm::{self, IpmConfig, RunReport, StepRule};
use crate::portfolio::{self, PortfolioProblem, ReturnKind, ReturnsDataset, SyntheticMarket};
use crate::quantum::{self, NoiseModel, DEFAULT_OMEGAS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Csv { path: PathBuf },
    Synthetic(SyntheticMarket),
}

impl DataSource {
    pub fn load(&self) -> Result<ReturnsDataset> {
        let table = match self {
            DataSource::Csv { path } => portfolio::PriceTable::read_csv(path)?,
            DataSource::Synthetic(m) => m.generate()?,
        };
        Ok(ReturnsDataset::from_prices(&table, ReturnKind::Simple)?.0)
    }
}

/// One experiment suite. Each trial samples `n_assets` assets and a window of
/// `lo..=hi` consecutive epochs, builds the portfolio SOCP and solves it with
/// the simulated quantum method (and optionally the exact one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub dataset: DataSource,
    pub n_assets: usize,
    /// Uniform window length range `[lo, hi]` in epochs.
    pub window: (usize, usize),
    pub epsilon: f64,
    pub chi: f64,
    pub noise: NoiseModel,
    pub trials: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Target return at this fraction of the way from the lowest attainable
    /// level to the largest mean. The lowest level is the smallest mean with
    /// a budget row and zero without one.
    pub target_quantile: f64,
    /// Add `sum(x) = 1`. Off by default: the plain problem has only the
    /// return row and `x >= 0`.
    pub budget: bool,
    pub compare_classical: bool,
    /// Keep full iteration traces for the first this-many trials.
    pub trace_trials: usize,
    pub step_rule: StepRule,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            dataset: DataSource::Synthetic(SyntheticMarket { assets: 50, days: 300, ..Default::default() }),
            n_assets: 10,
            window: (10, 100),
            epsilon: 0.1,
            chi: 0.1,
            noise: NoiseModel::adaptive(0.1, 0),
            trials: 20,
            seed: 0,
            max_iters: 5_000,
            target_quantile: 0.5,
            budget: false,
            compare_classical: false,
            trace_trials: 1,
            step_rule: StepRule::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.window.0 < 2 || self.window.0 > self.window.1 {
            return Err(Error::InvalidArgument(format!("invalid epoch window {:?}", self.window)));
        }
        if self.n_assets < 1 {
            return Err(Error::InvalidArgument("n_assets must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.target_quantile) {
            return Err(Error::InvalidArgument("target_quantile must lie in [0, 1]".into()));
        }
        self.noise.validate()?;
        self.ipm_config().validate()
    }

    pub fn ipm_config(&self) -> IpmConfig {
        IpmConfig {
            epsilon: self.epsilon,
            chi: self.chi,
            max_iters: self.max_iters,
            step_rule: self.step_rule,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub n_assets: usize,
    pub epochs: usize,
    /// Side of the Newton system, the size parameter of the cost model.
    pub n: usize,
    pub r: usize,
    pub converged: bool,
    pub iterations: usize,
    pub kappa_max: f64,
    pub zeta_max: f64,
    pub delta_min: Option<f64>,
    pub cost_estimate: Option<f64>,
    pub classical_cost: Option<f64>,
    pub alpha: Option<f64>,
    pub final_primal_residual: f64,
    /// `delta_last * ||A||_2`, the bound on the final primal residual.
    pub infeasibility_bound: Option<f64>,
    pub objective: f64,
    pub classical_iterations: Option<usize>,
    pub classical_alpha: Option<f64>,
    pub error: Option<String>,
}

impl TrialRow {
    pub fn succeeded(&self) -> bool {
        self.converged && self.error.is_none() && self.cost_estimate.is_some_and(f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledRun {
    pub trial: usize,
    pub label: String,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<TrialRow>,
    pub traces: Vec<LabelledRun>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.succeeded()).count()
    }
}

/// Independent stream for trial `k`.
fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

struct TrialOutput {
    row: TrialRow,
    traces: Vec<LabelledRun>,
}

fn run_trial(spec: &ExperimentSpec, data: &ReturnsDataset, trial: usize) -> TrialOutput {
    let mut row = TrialRow {
        trial,
        n_assets: 0,
        epochs: 0,
        n: 0,
        r: 0,
        converged: false,
        iterations: 0,
        kappa_max: f64::NAN,
        zeta_max: f64::NAN,
        delta_min: None,
        cost_estimate: None,
        classical_cost: None,
        alpha: None,
        final_primal_residual: f64::NAN,
        infeasibility_bound: None,
        objective: f64::NAN,
        classical_iterations: None,
        classical_alpha: None,
        error: None,
    };
    let mut traces = Vec::new();
    if let Err(e) = trial_body(spec, data, trial, &mut row, &mut traces) {
        row.error = Some(e.to_string());
    }
    TrialOutput { row, traces }
}

fn trial_body(
    spec: &ExperimentSpec,
    data: &ReturnsDataset,
    trial: usize,
    row: &mut TrialRow,
    traces: &mut Vec<LabelledRun>,
) -> Result<()> {
    let mut rng = trial_rng(spec.seed, trial);
    let k = spec.n_assets.min(data.assets());
    let mut assets = index::sample(&mut rng, data.assets(), k).into_vec();
    assets.sort_unstable();
    let hi = spec.window.1.min(data.epochs());
    let lo = spec.window.0.min(hi);
    let len = rng.random_range(lo..=hi);
    let start = rng.random_range(0..=data.epochs() - len);
    let noise_seed = rng.random::<u64>();

    let sub = data.subset(&assets, start..start + len)?;
    let est = portfolio::estimate(&sub)?;
    let hi_mu = est.mu.max();
    let lo_mu = if spec.budget { est.mu.min() } else { 0.0 };
    if !spec.budget && hi_mu <= 0.0 {
        return Err(Error::Data("no asset has a positive mean return in this window".into()));
    }
    let target = lo_mu + spec.target_quantile * (hi_mu - lo_mu);
    let mut prob = PortfolioProblem::new(&est, target);
    if spec.budget {
        prob = prob.with_budget();
    }
    let red = portfolio::to_socp(&prob)?;
    let inst = &red.instance;
    let config = spec.ipm_config();
    let model = NoiseModel { seed: noise_seed, ..spec.noise.clone() };

    row.n_assets = k;
    row.epochs = len;
    row.r = inst.rank();
    row.n = inst.rows() + 2 * inst.structure().len();

    let rep = quantum::run_quantum(inst, &config, &model)?;
    row.converged = rep.converged();
    row.iterations = rep.iterations;
    row.kappa_max = rep.kappa_max();
    row.zeta_max = rep.zeta_max();
    row.delta_min = rep.delta_min();
    row.alpha = decay_constant(&rep.gaps(), rep.rank, rep.burn_in());
    row.final_primal_residual = rep.final_primal_residual;
    row.objective = rep.objective;
    row.infeasibility_bound = rep.last_delta_used().map(|d| d * inst.a_norm2());
    if let Ok(c) = quantum::cost_estimate(&rep, spec.epsilon, row.r, row.n, &DEFAULT_OMEGAS) {
        row.cost_estimate = Some(c.quantum);
        row.classical_cost = c.classical.last().map(|p| p.1);
    }
    if let ipm::RunStatus::Failed(msg) = &rep.status {
        row.error = Some(msg.clone());
    }
    let keep = trial < spec.trace_trials;
    if spec.compare_classical {
        let cl = ipm::run(inst, &config)?;
        row.classical_iterations = Some(cl.iterations);
        row.classical_alpha = decay_constant(&cl.gaps(), cl.rank, cl.burn_in());
        if keep {
            traces.push(LabelledRun { trial, label: "classical".into(), report: cl });
        }
    }
    if keep {
        traces.push(LabelledRun { trial, label: "quantum".into(), report: rep });
    }
    Ok(())
}

fn assemble(spec: &ExperimentSpec, outputs: Vec<TrialOutput>) -> SuiteReport {
    let mut rows = Vec::with_capacity(outputs.len());
    let mut traces = Vec::new();
    for out in outputs {
        rows.push(out.row);
        traces.extend(out.traces);
    }
    rows.sort_by_key(|r| r.trial);
    for r in &rows {
        if r.zeta_max > 5.0 {
            log::info!("trial {} has notable zeta = {}", r.trial, r.zeta_max);
        }
    }
    SuiteReport { spec: spec.clone(), rows, traces }
}

pub fn run_suite_sequential(spec: &ExperimentSpec) -> Result<SuiteReport> {
    spec.validate()?;
    let data = spec.dataset.load()?;
    let outputs = (0..spec.trials).map(|t| run_trial(spec, &data, t)).collect();
    Ok(assemble(spec, outputs))
}

#[cfg(feature = "parallel")]
pub fn run_suite_parallel(spec: &ExperimentSpec) -> Result<SuiteReport> {
    use rayon::prelude::*;
    spec.validate()?;
    let data = spec.dataset.load()?;
    let outputs = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &data, t))
        .collect();
    Ok(assemble(spec, outputs))
}

/// Runs every trial, in parallel when the `parallel` feature is enabled.
/// Failed trials are recorded in their row and do not stop the suite.
pub fn run_suite(spec: &ExperimentSpec) -> Result<SuiteReport> {
    #[cfg(feature = "parallel")]
    {
        run_suite_parallel(spec)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_suite_sequential(spec)
    }
}
