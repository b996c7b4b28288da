//! Mean-variance portfolio data and its reduction to a standard-form SOCP.
//!
//! Returns are arranged as a `T x m` matrix (rows are epochs). The risk
//! factor `M` has rows `(R(t) - mu)^T / sqrt(T - 1)`, so `Sigma = M^T M` and
//! the portfolio risk is `||M x||`. The problem
//!
//! ```text
//! min ||M x||  s.t.  mu^T x = R,  A x = b,  C x >= d,  x >= 0
//! ```
//!
//! becomes an SOCP over `(t; x; slack)` with `t in L^T`, every `x_i` and
//! every slack in `L^0`, and `tbar = M x` enforced as equality rows.

use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jordan::ConeStructure;
use crate::socp::SocpInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnKind {
    /// `p_t / p_{t-1} - 1`
    #[default]
    Simple,
    /// `ln(p_t / p_{t-1})`
    Log,
}

/// Raw price table; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub assets: Vec<String>,
    pub dates: Vec<String>,
    pub prices: Vec<Vec<Option<f64>>>,
}

impl PriceTable {
    /// Reads `date,asset1,asset2,...` with one row of prices per date. Empty
    /// cells count as missing; any other unparsable cell is an error.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::Data("price file needs a date column and at least one asset".into()));
        }
        let assets: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut seen = HashSet::new();
        for a in &assets {
            if !seen.insert(a.as_str()) {
                return Err(Error::Data(format!("duplicate asset name {a:?}")));
            }
        }
        let mut dates = Vec::new();
        let mut prices = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(Error::Data(format!(
                    "row {} has {} cells, expected {}",
                    line + 2,
                    rec.len(),
                    headers.len()
                )));
            }
            dates.push(rec[0].to_owned());
            let row = rec
                .iter()
                .skip(1)
                .enumerate()
                .map(|(j, cell)| {
                    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| {
                            Error::Data(format!("non-numeric cell {cell:?} at row {}, asset {:?}", line + 2, assets[j]))
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            prices.push(row);
        }
        Ok(Self { assets, dates, prices })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["date".to_owned()];
        header.extend(self.assets.iter().cloned());
        w.write_record(&header)?;
        for (date, row) in self.dates.iter().zip(&self.prices) {
            let mut rec = vec![date.clone()];
            rec.extend(row.iter().map(|p| p.map(|v| format!("{v}")).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsDataset {
    pub assets: Vec<String>,
    /// Label of the later price row of each return.
    pub epochs: Vec<String>,
    /// `T x m`, row `t` is `R(t)^T`.
    pub returns: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestReport {
    /// Price rows dropped for missing cells.
    pub dropped_rows: usize,
}

impl ReturnsDataset {
    pub fn from_prices(table: &PriceTable, kind: ReturnKind) -> Result<(Self, IngestReport)> {
        let m = table.assets.len();
        let mut kept: Vec<(&str, Vec<f64>)> = Vec::with_capacity(table.prices.len());
        let mut dropped = 0;
        for (date, row) in table.dates.iter().zip(&table.prices) {
            if row.len() != m {
                return Err(Error::Data(format!("row {date} has {} prices, expected {m}", row.len())));
            }
            match row.iter().copied().collect::<Option<Vec<f64>>>() {
                Some(p) => {
                    if let Some(bad) = p.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                        return Err(Error::Data(format!("price {bad} on {date} is not a positive number")));
                    }
                    kept.push((date.as_str(), p));
                }
                None => dropped += 1,
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} price rows with missing values");
        }
        if kept.len() < 3 {
            return Err(Error::Data(format!(
                "need at least 3 complete price rows, found {}",
                kept.len()
            )));
        }
        let t = kept.len() - 1;
        let returns = DMatrix::from_fn(t, m, |i, j| {
            let ratio = kept[i + 1].1[j] / kept[i].1[j];
            match kind {
                ReturnKind::Simple => ratio - 1.0,
                ReturnKind::Log => ratio.ln(),
            }
        });
        let epochs = kept[1..].iter().map(|(d, _)| (*d).to_owned()).collect();
        Ok((
            Self { assets: table.assets.clone(), epochs, returns },
            IngestReport { dropped_rows: dropped },
        ))
    }

    pub fn epochs(&self) -> usize {
        self.returns.nrows()
    }

    pub fn assets(&self) -> usize {
        self.returns.ncols()
    }

    /// Restriction to the given asset columns and epoch rows.
    pub fn subset(&self, assets: &[usize], window: Range<usize>) -> Result<Self> {
        if window.end > self.epochs() || window.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "epoch window {window:?} invalid for {} epochs",
                self.epochs()
            )));
        }
        if let Some(&bad) = assets.iter().find(|&&a| a >= self.assets()) {
            return Err(Error::InvalidArgument(format!("asset index {bad} out of range")));
        }
        let returns = DMatrix::from_fn(window.len(), assets.len(), |i, j| {
            self.returns[(window.start + i, assets[j])]
        });
        Ok(Self {
            assets: assets.iter().map(|&a| self.assets[a].clone()).collect(),
            epochs: self.epochs[window].to_vec(),
            returns,
        })
    }
}

/// Reads a price CSV and converts it to simple returns.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<(ReturnsDataset, IngestReport)> {
    ReturnsDataset::from_prices(&PriceTable::read_csv(path)?, ReturnKind::Simple)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mu: DVector<f64>,
    /// `T x m` risk factor.
    pub m: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

/// Sample mean, risk factor and covariance of the returns.
pub fn estimate(data: &ReturnsDataset) -> Result<Estimate> {
    let t = data.epochs();
    if t < 2 {
        return Err(Error::Data(format!("need at least 2 return epochs, found {t}")));
    }
    let mu = data.returns.row_mean().transpose();
    let scale = 1.0 / ((t - 1) as f64).sqrt();
    let m = DMatrix::from_fn(t, data.assets(), |i, j| (data.returns[(i, j)] - mu[j]) * scale);
    let sigma = m.tr_mul(&m);
    Ok(Estimate { mu, m, sigma })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraints {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioProblem {
    pub mu: DVector<f64>,
    /// `T x m` risk factor.
    pub m: DMatrix<f64>,
    pub target_return: f64,
    /// `A x = b`.
    pub extra_eq: Option<LinearConstraints>,
    /// `C x >= d`.
    pub extra_ineq: Option<LinearConstraints>,
}

impl PortfolioProblem {
    pub fn new(estimate: &Estimate, target_return: f64) -> Self {
        Self {
            mu: estimate.mu.clone(),
            m: estimate.m.clone(),
            target_return,
            extra_eq: None,
            extra_ineq: None,
        }
    }

    /// Adds the budget row `sum(x) = 1` to the equality constraints.
    pub fn with_budget(mut self) -> Self {
        let n = self.mu.len();
        let row = DMatrix::from_element(1, n, 1.0);
        self.extra_eq = Some(match self.extra_eq.take() {
            None => LinearConstraints { a: row, b: DVector::from_element(1, 1.0) },
            Some(c) => {
                let rows = c.a.nrows();
                let a = c.a.insert_row(rows, 1.0);
                let b = c.b.push(1.0);
                LinearConstraints { a, b }
            }
        });
        self
    }

    pub fn with_inequalities(mut self, c: DMatrix<f64>, d: DVector<f64>) -> Self {
        self.extra_ineq = Some(LinearConstraints { a: c, b: d });
        self
    }

    pub fn assets(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.assets();
        if self.m.ncols() != n {
            return Err(Error::DimensionMismatch { what: "risk factor columns", expected: n, found: self.m.ncols() });
        }
        if self.m.nrows() == 0 {
            return Err(Error::InvalidArgument("risk factor has no rows".into()));
        }
        for (what, c) in [("A_extra", &self.extra_eq), ("C", &self.extra_ineq)] {
            if let Some(c) = c {
                if c.a.ncols() != n {
                    return Err(Error::DimensionMismatch { what, expected: n, found: c.a.ncols() });
                }
                if c.b.len() != c.a.nrows() {
                    return Err(Error::DimensionMismatch { what, expected: c.a.nrows(), found: c.b.len() });
                }
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> PortfolioDocument {
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        let lc = |c: &LinearConstraints| LinearConstraintsDocument { a: rows(&c.a), b: c.b.iter().copied().collect() };
        PortfolioDocument {
            mu: self.mu.iter().copied().collect(),
            m: rows(&self.m),
            target_return: self.target_return,
            extra_eq: self.extra_eq.as_ref().map(lc),
            extra_ineq: self.extra_ineq.as_ref().map(lc),
        }
    }

    pub fn from_document(doc: &PortfolioDocument) -> Result<Self> {
        let n = doc.mu.len();
        let p = Self {
            mu: DVector::from_vec(doc.mu.clone()),
            m: dense(&doc.m, n, "M")?,
            target_return: doc.target_return,
            extra_eq: doc.extra_eq.as_ref().map(|c| lc_from_doc(c, n, "A_extra")).transpose()?,
            extra_ineq: doc.extra_ineq.as_ref().map(|c| lc_from_doc(c, n, "C")).transpose()?,
        };
        p.validate()?;
        Ok(p)
    }
}

fn dense(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<DMatrix<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * cols);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::Data(format!("row {i} of {what} has {} entries, expected {cols}", r.len())));
        }
        flat.extend_from_slice(r);
    }
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

fn lc_from_doc(c: &LinearConstraintsDocument, n: usize, what: &str) -> Result<LinearConstraints> {
    Ok(LinearConstraints { a: dense(&c.a, n, what)?, b: DVector::from_vec(c.b.clone()) })
}

/// JSON form of [`PortfolioProblem`]; matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioDocument {
    pub mu: Vec<f64>,
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    pub target_return: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_eq: Option<LinearConstraintsDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_ineq: Option<LinearConstraintsDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraintsDocument {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Where each portfolio quantity lives in the SOCP variable vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionMap {
    pub t: Range<usize>,
    pub x: Range<usize>,
    pub slack: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub instance: SocpInstance,
    pub map: ExtractionMap,
    pub warnings: Vec<String>,
}

pub fn to_socp(prob: &PortfolioProblem) -> Result<Reduction> {
    prob.validate()?;
    let n = prob.assets();
    let t = prob.m.nrows();
    let (eq_rows, ineq_rows) = (
        prob.extra_eq.as_ref().map_or(0, |c| c.a.nrows()),
        prob.extra_ineq.as_ref().map_or(0, |c| c.a.nrows()),
    );
    let mut dims = vec![t];
    dims.extend(std::iter::repeat_n(0, n + ineq_rows));
    let structure = ConeStructure::new(dims)?;
    let cols = structure.len();
    let map = ExtractionMap {
        t: 0..t + 1,
        x: t + 1..t + 1 + n,
        slack: t + 1 + n..cols,
    };
    let rows = t + 1 + eq_rows + ineq_rows;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);

    // -tbar + M x = 0
    for i in 0..t {
        a[(i, 1 + i)] = -1.0;
    }
    a.view_mut((0, map.x.start), (t, n)).copy_from(&prob.m);
    // mu^T x = R
    a.view_mut((t, map.x.start), (1, n)).copy_from(&prob.mu.transpose());
    b[t] = prob.target_return;
    let mut row = t + 1;
    if let Some(c) = &prob.extra_eq {
        a.view_mut((row, map.x.start), (eq_rows, n)).copy_from(&c.a);
        b.rows_mut(row, eq_rows).copy_from(&c.b);
        row += eq_rows;
    }
    // C x - slack = d
    if let Some(c) = &prob.extra_ineq {
        a.view_mut((row, map.x.start), (ineq_rows, n)).copy_from(&c.a);
        for k in 0..ineq_rows {
            a[(row + k, map.slack.start + k)] = -1.0;
        }
        b.rows_mut(row, ineq_rows).copy_from(&c.b);
    }
    let mut c = DVector::zeros(cols);
    c[0] = 1.0;

    let mut warnings = Vec::new();
    let (lo, hi) = (prob.mu.min(), prob.mu.max());
    if prob.target_return < lo || prob.target_return > hi {
        let msg = format!(
            "target return {} lies outside [{lo}, {hi}]; the problem is likely infeasible",
            prob.target_return
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(Reduction { instance: SocpInstance::new(structure, a, b, c)?, map, warnings })
}

/// Lifts a portfolio to the SOCP variables: `t = (||Mx||; Mx)`, slacks `Cx - d`.
pub fn lift(prob: &PortfolioProblem, map: &ExtractionMap, x: &DVector<f64>) -> DVector<f64> {
    let mx = &prob.m * x;
    let mut v = DVector::zeros(map.slack.end);
    v[0] = mx.norm();
    v.rows_mut(1, mx.len()).copy_from(&mx);
    v.rows_mut(map.x.start, x.len()).copy_from(x);
    if let Some(c) = &prob.extra_ineq {
        let s = &c.a * x - &c.b;
        v.rows_mut(map.slack.start, s.len()).copy_from(&s);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSolution {
    pub weights: Vec<f64>,
    /// `||M x||`
    pub risk: f64,
    /// `mu^T x`
    pub expected_return: f64,
    pub t0: f64,
    /// `t0 - ||M x||`
    pub boundary_gap: f64,
    /// Largest `|C x - d - slack|` over inequality rows.
    pub slack_residual: f64,
    /// Boundary gap exceeded the tolerance.
    pub flagged: bool,
}

/// Reads the portfolio back out of an SOCP solution. The optimum sits on the
/// boundary of the `t` cone, so `t0 ~ ||M x||`; a gap above `tolerance` is
/// flagged.
pub fn extract_solution(
    prob: &PortfolioProblem,
    map: &ExtractionMap,
    socp_x: &[f64],
    tolerance: f64,
) -> Result<PortfolioSolution> {
    if socp_x.len() != map.slack.end {
        return Err(Error::DimensionMismatch { what: "SOCP solution", expected: map.slack.end, found: socp_x.len() });
    }
    let x = DVector::from_column_slice(&socp_x[map.x.clone()]);
    let risk = (&prob.m * &x).norm();
    let t0 = socp_x[map.t.start];
    let boundary_gap = t0 - risk;
    let slack_residual = match &prob.extra_ineq {
        Some(c) => {
            let slack = DVector::from_column_slice(&socp_x[map.slack.clone()]);
            (&c.a * &x - &c.b - slack).amax()
        }
        None => 0.0,
    };
    Ok(PortfolioSolution {
        weights: x.iter().copied().collect(),
        risk,
        expected_return: prob.mu.dot(&x),
        t0,
        boundary_gap,
        slack_residual,
        flagged: boundary_gap.abs() > tolerance,
    })
}

/// Parameters of the correlated geometric-Brownian price generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticMarket {
    pub assets: usize,
    /// Number of price rows.
    pub days: usize,
    /// Pairwise correlation of the daily shocks through a common factor.
    pub correlation: f64,
    /// Daily drift is drawn uniformly from this range.
    pub drift: (f64, f64),
    /// Daily volatility is drawn uniformly from this range.
    pub volatility: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticMarket {
    fn default() -> Self {
        Self {
            assets: 20,
            days: 250,
            correlation: 0.3,
            drift: (-2e-4, 1e-3),
            volatility: (0.01, 0.03),
            seed: 0,
        }
    }
}

impl SyntheticMarket {
    pub fn generate(&self) -> Result<PriceTable> {
        if self.assets == 0 || self.days < 3 {
            return Err(Error::InvalidArgument("synthetic market needs assets >= 1 and days >= 3".into()));
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return Err(Error::InvalidArgument(format!("correlation must lie in [0, 1), got {}", self.correlation)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let drift: Vec<f64> = (0..self.assets).map(|_| rng.random_range(self.drift.0..=self.drift.1)).collect();
        let vol: Vec<f64> = (0..self.assets)
            .map(|_| rng.random_range(self.volatility.0..=self.volatility.1))
            .collect();
        let mut price: Vec<f64> = (0..self.assets).map(|_| rng.random_range(20.0..200.0)).collect();
        let (wc, wi) = (self.correlation.sqrt(), (1.0 - self.correlation).sqrt());
        let mut prices = Vec::with_capacity(self.days);
        prices.push(price.iter().map(|&p| Some(p)).collect());
        for _ in 1..self.days {
            let common: f64 = rng.sample(StandardNormal);
            for j in 0..self.assets {
                let own: f64 = rng.sample(StandardNormal);
                let shock = wc * common + wi * own;
                price[j] *= (drift[j] - 0.5 * vol[j] * vol[j] + vol[j] * shock).exp();
            }
            prices.push(price.iter().map(|&p| Some(p)).collect());
        }
        Ok(PriceTable {
            assets: (0..self.assets).map(|j| format!("A{j:03}")).collect(),
            dates: (0..self.days).map(|d| format!("d{d:04}")).collect(),
            prices,
        })
    }
}
