#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints its PASS/FAIL line even when everything passes.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qsocp::experiment::{fit_power_law, run_suite, summarize, DataSource, ExperimentSpec, SuiteReport};
use qsocp::ipm::{self, IpmConfig};
use qsocp::jordan::{arw, jordan_frame, jordan_product_block, quadratic_rep, spectral};
use qsocp::portfolio::{self, Estimate, PortfolioProblem, ReturnKind, ReturnsDataset, SyntheticMarket};
use qsocp::quantum::{self, simulate_tomography, NoiseModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn market(assets: usize, days: usize, seed: u64) -> ReturnsDataset {
    let table = SyntheticMarket { assets, days, seed, ..Default::default() }.generate().unwrap();
    ReturnsDataset::from_prices(&table, ReturnKind::Simple).unwrap().0
}

fn budget_problem(est: &Estimate) -> PortfolioProblem {
    let r = 0.5 * (est.mu.min() + est.mu.max());
    PortfolioProblem::new(est, r).with_budget()
}

fn relative(err: f64, scale: f64) -> f64 {
    err / scale.max(1.0)
}

fn c1_jordan_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let k = rng.random_range(1..=12);
        let x: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let xv = DVector::from_column_slice(&x);
        let scale = xv.norm();
        let mut e = DVector::zeros(k);
        e[0] = 1.0;

        let arw_e = arw(&x) * &e;
        worst = worst.max(relative((arw_e - &xv).norm(), scale));

        let mut sq = vec![0.0; k];
        jordan_product_block(&x, &x, &mut sq);
        let q_e = quadratic_rep(&x) * &e;
        worst = worst.max(relative((q_e - DVector::from_vec(sq)).norm(), scale * scale));

        let (l1, l2) = spectral(&x);
        let (c1, c2) = jordan_frame(&x);
        let rebuilt = DVector::from_vec(c1) * l1 + DVector::from_vec(c2) * l2;
        worst = worst.max(relative((rebuilt - &xv).norm(), scale));
    }
    let t = start.elapsed();
    outcome(worst <= 1e-10 && within(t, 5.0), format!("max relative error {worst:.2e} over 10^4 blocks in {t:.2?}"))
}

fn c2_classical_decay() -> Outcome {
    let start = Instant::now();
    let data = market(20, 61, 2);
    let est = portfolio::estimate(&data).unwrap();
    let red = portfolio::to_socp(&budget_problem(&est)).unwrap();
    let config = IpmConfig { epsilon: 1e-6, track_conditioning: false, ..Default::default() };
    let rep = ipm::run(&red.instance, &config).unwrap();
    let sigma = rep.sigma;
    let bound = ((rep.nu0 / config.epsilon).ln() / -sigma.ln()).ceil() as usize + 5;
    let gaps = rep.gaps();
    let burn = rep.burn_in();
    let worst = gaps[burn..]
        .windows(2)
        .map(|w| (w[1] / w[0] - sigma).abs())
        .fold(0.0, f64::max);
    let t = start.elapsed();
    outcome(
        rep.converged() && worst <= 0.05 && rep.iterations <= bound && within(t, 30.0),
        format!(
            "r = {}, sigma = {sigma:.6}, {} iterations (bound {bound}), burn-in {burn}, max |ratio - sigma| = {worst:.2e}, {t:.2?}",
            rep.rank, rep.iterations
        ),
    )
}

/// Minimum of `x^T Sigma x` over `mu^T x = R`, optional `sum x = 1`, `x >= 0`,
/// by enumerating supports and solving each face's KKT system.
fn qp_oracle(sigma: &DMatrix<f64>, mu: &DVector<f64>, r: f64, budget: bool) -> Option<f64> {
    let m = mu.len();
    let rows = 1 + usize::from(budget);
    let mut best: Option<f64> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = support.len();
        let mut kkt = DMatrix::zeros(k + rows, k + rows);
        let mut rhs = DVector::zeros(k + rows);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                kkt[(a, b)] = 2.0 * sigma[(i, j)];
            }
            kkt[(k, a)] = mu[i];
            kkt[(a, k)] = mu[i];
            if budget {
                kkt[(k + 1, a)] = 1.0;
                kkt[(a, k + 1)] = 1.0;
            }
        }
        rhs[k] = r;
        if budget {
            rhs[k + 1] = 1.0;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, k);
        if x.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
            continue;
        }
        let mut full = DVector::zeros(m);
        for (a, &i) in support.iter().enumerate() {
            full[i] = x[a].max(0.0);
        }
        if (mu.dot(&full) - r).abs() > 1e-9 || (budget && (full.sum() - 1.0).abs() > 1e-9) {
            continue;
        }
        let value = full.dot(&(sigma * &full));
        best = Some(best.map_or(value, |b: f64| b.min(value)));
    }
    best
}

fn c3_solution_correctness() -> Outcome {
    let start = Instant::now();
    let epsilon = 1e-6;
    let mut worst_ratio = 0.0f64;
    let mut cases = 0;
    let mut failures = Vec::new();
    for m in 2..=4 {
        for seed in 0..4u64 {
            for budget in [false, true] {
                let est = portfolio::estimate(&market(m, 40, 100 + seed)).unwrap();
                let hi = est.mu.max();
                if !budget && hi <= 0.0 {
                    continue;
                }
                let prob = if budget { budget_problem(&est) } else { PortfolioProblem::new(&est, 0.5 * hi) };
                let red = portfolio::to_socp(&prob).unwrap();
                let config = IpmConfig { epsilon, track_conditioning: false, ..Default::default() };
                let rep = ipm::run(&red.instance, &config).unwrap();
                let oracle = qp_oracle(&est.sigma, &est.mu, prob.target_return, budget).map(f64::sqrt);
                cases += 1;
                let tol = 10.0 * epsilon * rep.rank as f64;
                match oracle {
                    Some(o) if rep.converged() => {
                        let gap = (rep.objective - o).abs();
                        worst_ratio = worst_ratio.max(gap / tol);
                        if gap > tol {
                            failures.push(format!("m={m} seed={seed} budget={budget}: gap {gap:.2e} > {tol:.2e}"));
                        }
                    }
                    _ => failures.push(format!("m={m} seed={seed} budget={budget}: {:?}, oracle {oracle:?}", rep.status)),
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        failures.is_empty() && within(t, 60.0),
        format!("{cases} instances, worst gap / (10 eps r) = {worst_ratio:.3}, {t:.2?} {failures:?}"),
    )
}

fn c4_infeasibility_bound() -> Outcome {
    let start = Instant::now();
    let data = market(12, 80, 4);
    let config = IpmConfig { epsilon: 1e-4, max_iters: 3_000, track_conditioning: false, ..Default::default() };
    let mut lines = Vec::new();
    let mut pass = true;
    for delta in [1e-2, 1e-3] {
        for adaptive in [false, true] {
            let (mut converged, mut violations, mut worst) = (0, 0, 0.0f64);
            for seed in 0..50u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut assets = rand::seq::index::sample(&mut rng, 12, 5).into_vec();
                assets.sort_unstable();
                let start = rng.random_range(0..40);
                let est = portfolio::estimate(&data.subset(&assets, start..start + 40).unwrap()).unwrap();
                let red = portfolio::to_socp(&budget_problem(&est)).unwrap();
                let inst = &red.instance;
                let model = if adaptive { NoiseModel::adaptive(delta, seed) } else { NoiseModel::fixed(delta, seed) };
                let rep = quantum::run_quantum(inst, &config, &model).unwrap();
                if !rep.converged() {
                    continue;
                }
                converged += 1;
                let bound = rep.last_delta_used().unwrap() * inst.a_norm2();
                worst = worst.max(rep.final_primal_residual / bound);
                if rep.final_primal_residual > bound {
                    violations += 1;
                }
            }
            pass &= converged > 0 && violations == 0;
            let mode = if adaptive { "adaptive" } else { "fixed" };
            lines.push(format!(
                "delta={delta:.0e} {mode}: {converged}/50 converged, {violations} violations, max residual/bound {worst:.2e}"
            ));
        }
    }
    let t = start.elapsed();
    outcome(pass && within(t, 300.0), format!("{}; {t:.2?}", lines.join("; ")))
}

fn c5_noise_model() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut violations = 0;
    let normal = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..100_000 {
        let d = rng.random_range(1..=16);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let v = DVector::from_fn(d, |_, _| normal.sample(&mut rng) * scale);
        let delta = rng.random_range(0.0..0.5);
        let nd = rng.random_range(0.0..0.5);
        let hat = simulate_tomography(&v, delta, nd, &mut rng);
        let err = (&hat - &v).norm();
        let bound = 2.0 * delta * v.norm();
        if err > bound {
            violations += 1;
        }
        if bound > 0.0 {
            worst = worst.max(err / bound);
        }
    }

    let est = portfolio::estimate(&market(5, 40, 6)).unwrap();
    let red = portfolio::to_socp(&budget_problem(&est)).unwrap();
    let config = IpmConfig { epsilon: 1e-6, ..Default::default() };
    let classical = ipm::run(&red.instance, &config).unwrap();
    let zero = quantum::run_quantum(&red.instance, &config, &NoiseModel::fixed(0.0, 99)).unwrap();
    let identical = classical == zero && classical.to_json().unwrap() == zero.to_json().unwrap();
    let t = start.elapsed();
    outcome(
        violations == 0 && identical && within(t, 30.0),
        format!(
            "10^5 samples, {violations} violations, max err/(2 delta |v|) = {worst:.6}; delta = 0 report identical: {identical} ({} iterations); {t:.2?}",
            classical.iterations
        ),
    )
}

fn decay_suite() -> SuiteReport {
    let spec = ExperimentSpec {
        dataset: DataSource::Synthetic(SyntheticMarket { assets: 30, days: 120, seed: 7, ..Default::default() }),
        n_assets: 20,
        window: (40, 60),
        epsilon: 1e-6,
        noise: NoiseModel::adaptive(1e-2, 0),
        trials: 4,
        seed: 2024,
        budget: true,
        compare_classical: true,
        trace_trials: 4,
        ..Default::default()
    };
    run_suite(&spec).unwrap()
}

fn size_suite() -> SuiteReport {
    let spec = ExperimentSpec {
        dataset: DataSource::Synthetic(SyntheticMarket { assets: 40, days: 400, seed: 8, ..Default::default() }),
        n_assets: 10,
        window: (10, 200),
        epsilon: 0.1,
        noise: NoiseModel::adaptive(0.1, 0),
        trials: 40,
        seed: 2025,
        trace_trials: 40,
        ..Default::default()
    };
    run_suite(&spec).unwrap()
}

fn c6_quantum_decay(suite: &SuiteReport) -> Outcome {
    let chi = suite.spec.chi;
    let mut pass = !suite.rows.is_empty();
    let mut parts = Vec::new();
    for row in &suite.rows {
        let alpha = row.alpha.unwrap_or(f64::NAN);
        let classical = row.classical_iterations.unwrap_or(0);
        let ok = row.succeeded() && alpha > 0.0 && alpha <= chi && row.iterations <= 3 * classical;
        pass &= ok;
        parts.push(format!(
            "trial {}: alpha = {alpha:.9} (alpha - chi = {:+.2e}), iterations {} vs classical {classical}",
            row.trial,
            alpha - chi,
            row.iterations
        ));
    }
    outcome(pass, parts.join("; "))
}

fn all_rows<'a>(suites: &'a [&'a SuiteReport]) -> impl Iterator<Item = &'a ipm::IterationDiagnostics> + 'a {
    suites.iter().flat_map(|s| s.traces.iter()).flat_map(|t| t.report.rows.iter())
}

fn c7_zeta(suites: &[&SuiteReport]) -> Outcome {
    let (mut count, mut below, mut max) = (0, 0, 0.0f64);
    for row in all_rows(suites) {
        count += 1;
        if !(row.zeta >= 1.0) {
            below += 1;
        }
        max = max.max(row.zeta);
    }
    let complete = suites.iter().all(|s| s.traces.iter().filter(|t| t.label == "quantum").count() == s.rows.len());
    outcome(
        count > 0 && below == 0 && complete,
        format!("{count} Newton matrices, {below} with zeta < 1, max zeta = {max:.4}"),
    )
}

fn c8_power_law(size: &SuiteReport) -> Outcome {
    let exact: Vec<(f64, f64)> = (1..=12).map(|i| (i as f64 * 3.3, 0.7 * (i as f64 * 3.3).powf(2.4))).collect();
    let exact_err = (fit_power_law(&exact).unwrap().b - 2.4).abs();

    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut noisy_worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = (0..50)
            .map(|_| {
                let x: f64 = rng.random_range(10.0..1000.0);
                (x, 3.0 * x.powf(2.4) * f64::exp(noise.sample(&mut rng)))
            })
            .collect();
        noisy_worst = noisy_worst.max((fit_power_law(&pts).unwrap().b - 2.4).abs());
    }

    let summary = summarize(&size.rows);
    let cost = summary.complexity_fit.as_ref();
    let b = cost.map_or(f64::NAN, |f| f.b);
    let suite_ok = size.rows.len() >= 30 && b.is_finite() && b > 1.5 && b < 3.5;
    let delta_b = summary.inv_delta_sq_fit.as_ref().map_or(f64::NAN, |f| f.b);
    outcome(
        exact_err <= 1e-8 && noisy_worst <= 0.2 && suite_ok,
        format!(
            "exact exponent error {exact_err:.1e}, noisy worst error {noisy_worst:.3}; suite of {} trials ({} successful): cost exponent {b:.3} [{:.3}, {:.3}], 1/delta^2 exponent {delta_b:.3}",
            size.rows.len(),
            summary.successful_trials,
            cost.map_or(f64::NAN, |f| f.ci_low),
            cost.map_or(f64::NAN, |f| f.ci_high),
        ),
    )
}

fn c9_interior(suites: &[&SuiteReport]) -> Outcome {
    let (mut count, mut bad, mut min) = (0, 0, f64::INFINITY);
    for row in all_rows(suites) {
        count += 1;
        if !(row.min_eigenvalue > 0.0) {
            bad += 1;
        }
        min = min.min(row.min_eigenvalue);
    }
    let errors: Vec<&String> = suites.iter().flat_map(|s| s.rows.iter()).filter_map(|r| r.error.as_ref()).collect();
    outcome(
        count > 0 && bad == 0 && errors.is_empty(),
        format!("{count} iterates, {bad} not interior, smallest eigenvalue {min:.3e}, trial errors {errors:?}"),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {name}: {tag} ({})", o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report(1, "jordan identities", c1_jordan_identities());
    report(2, "classical gap decay", c2_classical_decay());
    report(3, "solution correctness", c3_solution_correctness());
    report(4, "infeasibility bound", c4_infeasibility_bound());
    report(5, "noise model soundness", c5_noise_model());

    let start = Instant::now();
    let decay = decay_suite();
    let size = size_suite();
    println!("(portfolio suites ran in {:.2?})", start.elapsed());
    report(6, "quantum gap decay", c6_quantum_decay(&decay));
    report(7, "zeta at least one", c7_zeta(&[&decay, &size]));
    report(8, "power-law machinery", c8_power_law(&size));
    report(9, "adaptive iterates interior", c9_interior(&[&decay, &size]));

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
