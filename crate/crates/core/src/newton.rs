//! The unreduced Newton system of the short-step method
//!
//! ```text
//! [ A       0    0      ] [dx]   [ b - A x              ]
//! [ 0       A^T  I      ] [dy] = [ c - s - A^T y        ]
//! [ Arw(s)  0    Arw(x) ] [ds]   [ sigma nu e - Arw(x) s ]
//! ```
//!
//! solved densely with partial-pivoting LU, plus the conditioning
//! diagnostics (`kappa`, `zeta`) that enter the quantum cost model.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jordan::{self, BlockVector, ConeStructure};
use crate::socp::{IpmState, SocpInstance};

/// Position of the three unknown blocks inside the stacked Newton vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewtonLayout {
    structure: Arc<ConeStructure>,
    rows: usize,
}

impl NewtonLayout {
    pub fn new(structure: Arc<ConeStructure>, rows: usize) -> Self {
        Self { structure, rows }
    }

    pub fn dim(&self) -> usize {
        self.rows + 2 * self.structure.len()
    }

    pub fn dx(&self) -> Range<usize> {
        0..self.structure.len()
    }

    pub fn dy(&self) -> Range<usize> {
        let n = self.structure.len();
        n..n + self.rows
    }

    pub fn ds(&self) -> Range<usize> {
        let n = self.structure.len();
        n + self.rows..2 * n + self.rows
    }

    pub fn structure(&self) -> &Arc<ConeStructure> {
        &self.structure
    }

    /// Splits a stacked `(dx; dy; ds)` vector.
    pub fn split(&self, v: &DVector<f64>) -> Result<NewtonStep> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "Newton solution",
                expected: self.dim(),
                found: v.len(),
            });
        }
        let dx = BlockVector::from_slice(self.structure.clone(), &v.as_slice()[self.dx()])?;
        let dy = DVector::from_column_slice(&v.as_slice()[self.dy()]);
        let ds = BlockVector::from_slice(self.structure.clone(), &v.as_slice()[self.ds()])?;
        Ok(NewtonStep { dx, dy, ds })
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub layout: NewtonLayout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub dx: BlockVector,
    pub dy: DVector<f64>,
    pub ds: BlockVector,
}

impl NewtonStep {
    /// Concatenation `(dx; dy; ds)`.
    pub fn stacked(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(2 * self.dx.as_slice().len() + self.dy.len());
        v.extend_from_slice(self.dx.as_slice());
        v.extend_from_slice(self.dy.as_slice());
        v.extend_from_slice(self.ds.as_slice());
        DVector::from_vec(v)
    }
}

pub fn assemble(inst: &SocpInstance, state: &IpmState, sigma: f64) -> Result<NewtonSystem> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidArgument(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    let structure = inst.structure();
    if state.x().structure().as_ref() != structure.as_ref()
        || state.s().structure().as_ref() != structure.as_ref()
    {
        return Err(Error::StructureMismatch);
    }
    let m = inst.rows();
    if state.y().len() != m {
        return Err(Error::DimensionMismatch {
            what: "dual vector y",
            expected: m,
            found: state.y().len(),
        });
    }
    let n = structure.len();
    let layout = NewtonLayout::new(structure.clone(), m);
    let dim = layout.dim();
    let a = inst.a();

    let mut matrix = DMatrix::zeros(dim, dim);
    matrix.view_mut((0, 0), (m, n)).copy_from(a);
    matrix.view_mut((m, n), (n, m)).copy_from(&a.transpose());
    for i in 0..n {
        matrix[(m + i, n + m + i)] = 1.0;
    }
    for r in structure.block_ranges() {
        let k = r.len();
        let row = m + n + r.start;
        matrix
            .view_mut((row, r.start), (k, k))
            .copy_from(&jordan::arw(&state.s().as_slice()[r.clone()]));
        matrix
            .view_mut((row, n + m + r.start), (k, k))
            .copy_from(&jordan::arw(&state.x().as_slice()[r.clone()]));
    }

    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, m).copy_from(&(inst.b() - a * state.x().values()));
    rhs.rows_mut(m, n)
        .copy_from(&(inst.c() - state.s().values() - a.tr_mul(state.y())));
    let xs = state.x().jordan_product(state.s())?;
    let target = sigma * state.nu();
    let mut comp = -xs.into_values();
    for r in structure.block_ranges() {
        comp[r.start] += target;
    }
    rhs.rows_mut(m + n, n).copy_from(&comp);

    Ok(NewtonSystem { matrix, rhs, layout })
}

/// Solves the system by LU with partial pivoting and one step of iterative
/// refinement.
pub fn solve(sys: &NewtonSystem) -> Result<NewtonStep> {
    let dim = sys.matrix.nrows();
    if sys.matrix.ncols() != dim || sys.rhs.len() != dim {
        return Err(Error::DimensionMismatch {
            what: "Newton system",
            expected: dim,
            found: sys.rhs.len(),
        });
    }
    let sol = lu_solve(&sys.matrix, &sys.rhs)?;
    sys.layout.split(&sol)
}

pub(crate) fn lu_solve(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = matrix.nrows();
    let lu = matrix.clone().lu();
    let u = lu.u();
    let scale = matrix.amax();
    let pivot = u.diagonal().iter().fold(f64::INFINITY, |acc, p| acc.min(p.abs()));
    if dim > 0 && !(pivot > f64::EPSILON * scale * dim as f64) {
        return Err(Error::Singular { pivot });
    }
    let mut sol = lu.solve(rhs).ok_or(Error::Singular { pivot })?;
    let resid = rhs - matrix * &sol;
    if let Some(corr) = lu.solve(&resid) {
        sol += corr;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { pivot });
    }
    Ok(sol)
}

/// `kappa = s_max / s_min` from a full SVD; `+inf` when singular.
pub fn condition_number(matrix: &DMatrix<f64>) -> f64 {
    let sv = matrix.clone().svd(false, false).singular_values;
    ratio(sv.max(), sv.min())
}

fn ratio(max: f64, min: f64) -> f64 {
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Block-encoding normalisation `min(||A||_F, s1(A)) / ||A||_2` with
/// `s1(A) = max_i sum_j |A_ij|`, evaluated on the matrix as given.
pub fn zeta_raw(matrix: &DMatrix<f64>) -> Result<f64> {
    let spectral = matrix.clone().svd(false, false).singular_values.max();
    if !(spectral > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    Ok(matrix.norm().min(max_row_abs_sum(matrix)) / spectral)
}

/// `zeta` of the symmetrisation `[[0, M], [M^T, 0]]`, computed without
/// forming it: its spectral norm is `||M||_2`, its Frobenius norm is
/// `sqrt(2) ||M||_F` and its largest absolute row sum is the larger of the
/// row and column sums of `M`.
pub fn zeta(matrix: &DMatrix<f64>) -> Result<f64> {
    let spectral = matrix.clone().svd(false, false).singular_values.max();
    zeta_with_norm(matrix, spectral)
}

fn zeta_with_norm(matrix: &DMatrix<f64>, spectral: f64) -> Result<f64> {
    if !(spectral > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let frob = std::f64::consts::SQRT_2 * matrix.norm();
    let s1 = max_row_abs_sum(matrix).max(max_row_abs_sum(&matrix.transpose()));
    Ok(frob.min(s1) / spectral)
}

fn max_row_abs_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `kappa` and symmetrised `zeta` from one SVD. The symmetrisation has the
/// same singular values as `M` (each doubled), so `kappa` is shared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixDiagnostics {
    pub kappa: f64,
    pub zeta: f64,
}

pub fn diagnostics(matrix: &DMatrix<f64>) -> Result<MatrixDiagnostics> {
    let sv = matrix.clone().svd(false, false).singular_values;
    let (max, min) = (sv.max(), sv.min());
    Ok(MatrixDiagnostics {
        kappa: ratio(max, min),
        zeta: zeta_with_norm(matrix, max)?,
    })
}
