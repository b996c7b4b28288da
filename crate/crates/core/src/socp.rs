//! SOCP instances in standard form and measurements on iterates.
//!
//! Primal: `min c^T x  s.t.  A x = b, x in L`.
//! Dual:   `max b^T y  s.t.  A^T y + s = c, s in L`.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jordan::{BlockVector, ConeStructure};

/// Relative tolerance on residual norms used by [`strict_feasibility_check`].
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SocpInstance {
    structure: Arc<ConeStructure>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl SocpInstance {
    pub fn new(
        structure: ConeStructure,
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
    ) -> Result<Self> {
        let n = structure.len();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "constraint matrix columns",
                expected: n,
                found: a.ncols(),
            });
        }
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                what: "right-hand side b",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                what: "objective c",
                expected: n,
                found: c.len(),
            });
        }
        Ok(Self {
            structure: Arc::new(structure),
            a,
            b,
            c,
        })
    }

    pub fn structure(&self) -> &Arc<ConeStructure> {
        &self.structure
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// Number of equality constraints.
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn rank(&self) -> usize {
        self.structure.rank()
    }

    /// Spectral norm `||A||_2`.
    pub fn a_norm2(&self) -> f64 {
        if self.a.is_empty() {
            return 0.0;
        }
        self.a.clone().svd(false, false).singular_values.max()
    }

    pub fn objective(&self, x: &BlockVector) -> f64 {
        self.c.dot(x.values())
    }

    pub fn to_document(&self) -> SocpDocument {
        SocpDocument {
            dims: self.structure.dims().to_vec(),
            a: self
                .a
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            b: self.b.iter().copied().collect(),
            c: self.c.iter().copied().collect(),
        }
    }

    pub fn from_document(doc: &SocpDocument) -> Result<Self> {
        let structure = ConeStructure::new(doc.dims.clone())?;
        let cols = structure.len();
        let rows = doc.a.len();
        let mut flat = Vec::with_capacity(rows * cols);
        for (i, row) in doc.a.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Data(format!(
                    "row {i} of A has {} entries, expected {cols}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        Self::new(
            structure,
            DMatrix::from_row_slice(rows, cols, &flat),
            DVector::from_vec(doc.b.clone()),
            DVector::from_vec(doc.c.clone()),
        )
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: SocpDocument = serde_json::from_str(&text)?;
        Self::from_document(&doc)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_document())?)?;
        Ok(())
    }
}

/// On-disk form of an instance. `A` is dense and row-major: one inner array
/// per constraint row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocpDocument {
    pub dims: Vec<usize>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Current primal-dual iterate. `nu` is always `x^T s / r`.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmState {
    x: BlockVector,
    y: DVector<f64>,
    s: BlockVector,
    nu: f64,
}

impl IpmState {
    pub fn new(x: BlockVector, y: DVector<f64>, s: BlockVector) -> Result<Self> {
        let nu = duality_gap(&x, &s)?;
        Ok(Self { x, y, s, nu })
    }

    pub fn x(&self) -> &BlockVector {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn s(&self) -> &BlockVector {
        &self.s
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn into_parts(self) -> (BlockVector, DVector<f64>, BlockVector) {
        (self.x, self.y, self.s)
    }
}

/// `x^T s / r`.
pub fn duality_gap(x: &BlockVector, s: &BlockVector) -> Result<f64> {
    Ok(x.dot(s)? / x.structure().rank() as f64)
}

/// `(b - A x, c - s - A^T y)`.
pub fn residuals(inst: &SocpInstance, state: &IpmState) -> Result<(DVector<f64>, DVector<f64>)> {
    if state.x.structure().as_ref() != inst.structure.as_ref()
        || state.s.structure().as_ref() != inst.structure.as_ref()
    {
        return Err(Error::StructureMismatch);
    }
    if state.y.len() != inst.rows() {
        return Err(Error::DimensionMismatch {
            what: "dual vector y",
            expected: inst.rows(),
            found: state.y.len(),
        });
    }
    let primal = &inst.b - &inst.a * state.x.values();
    let dual = &inst.c - state.s.values() - inst.a.tr_mul(&state.y);
    Ok((primal, dual))
}

/// `|| Q_{x^{1/2}} s - nu e ||`, zero exactly on the central path.
pub fn centrality(x: &BlockVector, s: &BlockVector, nu: f64) -> Result<f64> {
    if let Some((block, lambda_min)) = x.first_non_interior_block() {
        return Err(Error::NotInterior {
            which: "x",
            block,
            lambda_min,
        });
    }
    let w = x.sqrt()?;
    let mut v = w.quadratic_apply(s)?;
    for r in x.structure().block_ranges() {
        v.values_mut()[r.start] -= nu;
    }
    Ok(v.norm())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub min_eig_x: f64,
    pub min_eig_s: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Human-readable list of violated conditions; empty when feasible.
    pub violations: Vec<String>,
}

/// Strict feasibility: `x, s` in the cone interior and both residual norms
/// within `FEASIBILITY_TOL * (1 + ||b||)` and `FEASIBILITY_TOL * (1 + ||c||)`.
pub fn strict_feasibility_check(inst: &SocpInstance, state: &IpmState) -> FeasibilityReport {
    let min_eig_x = state.x.min_eigenvalue();
    let min_eig_s = state.s.min_eigenvalue();
    let mut violations = Vec::new();
    if !(min_eig_x > 0.0) {
        violations.push(format!("x is not in the cone interior (lambda_min = {min_eig_x:e})"));
    }
    if !(min_eig_s > 0.0) {
        violations.push(format!("s is not in the cone interior (lambda_min = {min_eig_s:e})"));
    }
    let (primal_residual, dual_residual) = match residuals(inst, state) {
        Ok((p, d)) => (p.norm(), d.norm()),
        Err(e) => {
            violations.push(format!("dimension error: {e}"));
            (f64::INFINITY, f64::INFINITY)
        }
    };
    let ptol = FEASIBILITY_TOL * (1.0 + inst.b.norm());
    let dtol = FEASIBILITY_TOL * (1.0 + inst.c.norm());
    if !(primal_residual <= ptol) {
        violations.push(format!("primal residual ||b - Ax|| = {primal_residual:e} exceeds {ptol:e}"));
    }
    if !(dual_residual <= dtol) {
        violations.push(format!("dual residual ||c - s - A^T y|| = {dual_residual:e} exceeds {dtol:e}"));
    }
    FeasibilityReport {
        feasible: violations.is_empty(),
        min_eig_x,
        min_eig_s,
        primal_residual,
        dual_residual,
        violations,
    }
}
