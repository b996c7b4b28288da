//! Euclidean Jordan algebra of a product of Lorentz cones.
//!
//! A vector `x` in the product cone `L^{n_1} x ... x L^{n_r}` is stored as one
//! contiguous coordinate vector of length `N = sum(n_i + 1)`. Block `i` is
//! `x_i = (x_{i,0}; xbar_i)`. All operations here work block by block and never
//! build the full `N x N` block-diagonal matrices.
//!
//! Block-level helpers take plain slices so the Newton kernel can reuse them
//! on raw buffers.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension parameters `(n_1, ..., n_r)` of a product of Lorentz cones.
///
/// Block `i` has `n_i + 1` coordinates; `n_i = 0` is a scalar non-negativity
/// constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ConeStructure {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl ConeStructure {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidStructure("at least one cone is required".into()));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for &d in &dims {
            acc += d + 1;
            offsets.push(acc);
        }
        Ok(Self { dims, offsets })
    }

    /// Number of cones `r`.
    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// `n = sum(n_i)`.
    pub fn n(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Total coordinate count `N = n + r`.
    pub fn len(&self) -> usize {
        *self.offsets.last().expect("offsets are never empty")
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn block_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets.windows(2).map(|w| w[0]..w[1])
    }
}

impl TryFrom<Vec<usize>> for ConeStructure {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<ConeStructure> for Vec<usize> {
    fn from(c: ConeStructure) -> Self {
        c.dims
    }
}

/// A vector living in the coordinate space of a [`ConeStructure`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    structure: Arc<ConeStructure>,
    values: DVector<f64>,
}

impl BlockVector {
    pub fn new(structure: Arc<ConeStructure>, values: DVector<f64>) -> Result<Self> {
        if values.len() != structure.len() {
            return Err(Error::DimensionMismatch {
                what: "block vector",
                expected: structure.len(),
                found: values.len(),
            });
        }
        Ok(Self { structure, values })
    }

    pub fn from_slice(structure: Arc<ConeStructure>, values: &[f64]) -> Result<Self> {
        Self::new(structure, DVector::from_column_slice(values))
    }

    pub fn zeros(structure: Arc<ConeStructure>) -> Self {
        let n = structure.len();
        Self {
            structure,
            values: DVector::zeros(n),
        }
    }

    /// The Jordan identity `e`: every block is `(1; 0, ..., 0)`.
    pub fn identity(structure: Arc<ConeStructure>) -> Self {
        let mut v = Self::zeros(structure);
        for i in 0..v.structure.rank() {
            let start = v.structure.block_range(i).start;
            v.values[start] = 1.0;
        }
        v
    }

    pub fn structure(&self) -> &Arc<ConeStructure> {
        &self.structure
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.values.as_slice()[self.structure.block_range(i)]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let data = self.values.as_slice();
        self.structure.block_ranges().map(move |r| &data[r])
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.structure, &other.structure) || self.structure == other.structure {
            Ok(())
        } else {
            Err(Error::StructureMismatch)
        }
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.values.dot(&other.values))
    }

    /// Euclidean norm of the concatenated coordinates.
    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            structure: self.structure.clone(),
            values: &self.values * alpha,
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            structure: self.structure.clone(),
            values: &self.values + &other.values * alpha,
        })
    }

    /// Blockwise Jordan product `x o s`.
    pub fn jordan_product(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = DVector::zeros(self.values.len());
        for r in self.structure.block_ranges() {
            jordan_product_block(
                &self.values.as_slice()[r.clone()],
                &other.values.as_slice()[r.clone()],
                &mut out.as_mut_slice()[r],
            );
        }
        Ok(Self {
            structure: self.structure.clone(),
            values: out,
        })
    }

    /// Smallest spectral value over all blocks; positive iff `self` is in the
    /// interior of the product cone.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks()
            .map(|b| spectral(b).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// First block whose smallest spectral value is `<= 0`, with that value.
    pub fn first_non_interior_block(&self) -> Option<(usize, f64)> {
        self.blocks()
            .map(|b| spectral(b).0)
            .enumerate()
            .find(|&(_, l)| !(l > 0.0))
    }

    pub fn is_interior(&self) -> bool {
        self.first_non_interior_block().is_none()
    }

    /// Jordan square root, defined for vectors in the cone.
    pub fn sqrt(&self) -> Result<Self> {
        let mut out = DVector::zeros(self.values.len());
        for (i, r) in self.structure.block_ranges().enumerate() {
            let b = &self.values.as_slice()[r.clone()];
            let (lmin, _) = spectral(b);
            if lmin < 0.0 {
                return Err(Error::NotInterior {
                    which: "sqrt argument",
                    block: i,
                    lambda_min: lmin,
                });
            }
            sqrt_block(b, &mut out.as_mut_slice()[r]);
        }
        Ok(Self {
            structure: self.structure.clone(),
            values: out,
        })
    }

    /// Largest `alpha` such that `self + alpha * dir` stays in the cone
    /// (`+inf` when the ray never leaves it). `self` must be interior.
    pub fn max_step(&self, dir: &Self) -> Result<f64> {
        self.check_same(dir)?;
        Ok(self
            .structure
            .block_ranges()
            .map(|r| {
                max_step_block(&self.values.as_slice()[r.clone()], &dir.values.as_slice()[r])
            })
            .fold(f64::INFINITY, f64::min))
    }

    /// Applies the quadratic representation: `Q_self * other`, blockwise.
    pub fn quadratic_apply(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = DVector::zeros(self.values.len());
        for r in self.structure.block_ranges() {
            quadratic_apply_block(
                &self.values.as_slice()[r.clone()],
                &other.values.as_slice()[r.clone()],
                &mut out.as_mut_slice()[r],
            );
        }
        Ok(Self {
            structure: self.structure.clone(),
            values: out,
        })
    }
}

fn bar_norm(block: &[f64]) -> f64 {
    block[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Arrowhead matrix `[[x0, xbar^T], [xbar, x0 I]]` of one block.
pub fn arw(block: &[f64]) -> DMatrix<f64> {
    let k = block.len();
    let mut m = DMatrix::zeros(k, k);
    let x0 = block[0];
    for i in 0..k {
        m[(i, i)] = x0;
    }
    for i in 1..k {
        m[(0, i)] = block[i];
        m[(i, 0)] = block[i];
    }
    m
}

/// `out = x o s = (x^T s; x0 sbar + s0 xbar)` for one block.
pub fn jordan_product_block(x: &[f64], s: &[f64], out: &mut [f64]) {
    out[0] = x.iter().zip(s).map(|(a, b)| a * b).sum();
    for i in 1..x.len() {
        out[i] = x[0] * s[i] + s[0] * x[i];
    }
}

/// `(lambda_min, lambda_max) = (x0 - |xbar|, x0 + |xbar|)`.
pub fn spectral(block: &[f64]) -> (f64, f64) {
    let nb = bar_norm(block);
    (block[0] - nb, block[0] + nb)
}

/// Jordan frame `(c1, c2)` paired with `spectral`. When `xbar = 0` any unit
/// direction works; the first bar coordinate is used.
pub fn jordan_frame(block: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = block.len();
    let nb = bar_norm(block);
    let mut c1 = vec![0.5; 1];
    let mut c2 = vec![0.5; 1];
    c1.resize(k, 0.0);
    c2.resize(k, 0.0);
    if k == 1 {
        // L^0: the algebra is R and the frame collapses to the unit.
        c1[0] = 0.0;
        c2[0] = 1.0;
        return (c1, c2);
    }
    for i in 1..k {
        let u = if nb > 0.0 {
            block[i] / nb
        } else if i == 1 {
            1.0
        } else {
            0.0
        };
        c1[i] = -0.5 * u;
        c2[i] = 0.5 * u;
    }
    (c1, c2)
}

/// Determinant `x0^2 - |xbar|^2 = lambda_min * lambda_max`.
pub fn det(block: &[f64]) -> f64 {
    let bar2: f64 = block[1..].iter().map(|v| v * v).sum();
    block[0] * block[0] - bar2
}

/// `out = sqrt(lambda_min) c1 + sqrt(lambda_max) c2`. Caller guarantees the
/// block is in the cone.
pub fn sqrt_block(block: &[f64], out: &mut [f64]) {
    let nb = bar_norm(block);
    let (lmin, lmax) = (block[0] - nb, block[0] + nb);
    let (a, b) = (lmin.max(0.0).sqrt(), lmax.max(0.0).sqrt());
    out[0] = 0.5 * (a + b);
    if nb > 0.0 {
        let f = 0.5 * (b - a) / nb;
        for i in 1..block.len() {
            out[i] = f * block[i];
        }
    } else {
        out[1..].iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Smallest positive `alpha` at which `x + alpha d` reaches the boundary of
/// the block's cone, `+inf` if none. Uses `det(x + alpha d) = 0` together with
/// the sign change of the leading coordinate.
pub fn max_step_block(x: &[f64], d: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    if d[0] < 0.0 {
        best = -x[0] / d[0];
    }
    if x.len() == 1 {
        return best.max(0.0);
    }
    let dot_bar: f64 = x[1..].iter().zip(&d[1..]).map(|(a, b)| a * b).sum();
    let a = det(d);
    let b = 2.0 * (x[0] * d[0] - dot_bar);
    let c = det(x);
    for root in positive_roots(a, b, c) {
        best = best.min(root);
    }
    best.max(0.0)
}

fn positive_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-15 * scale {
        return if b != 0.0 && -c / b > 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(c / q);
        roots.push(q / a);
    } else {
        roots.push(0.0);
    }
    roots.retain(|r| *r > 0.0);
    roots
}

/// Quadratic representation `Q_x = 2 Arw(x)^2 - Arw(x o x)` of one block.
pub fn quadratic_rep(block: &[f64]) -> DMatrix<f64> {
    let a = arw(block);
    let mut sq = vec![0.0; block.len()];
    jordan_product_block(block, block, &mut sq);
    &a * &a * 2.0 - arw(&sq)
}

/// `out = Q_x s` using `Q_x = 2 x x^T - det(x) R`, `R = diag(1, -I)`.
pub fn quadratic_apply_block(x: &[f64], s: &[f64], out: &mut [f64]) {
    let xs: f64 = x.iter().zip(s).map(|(a, b)| a * b).sum();
    let d = det(x);
    out[0] = 2.0 * xs * x[0] - d * s[0];
    for i in 1..x.len() {
        out[i] = 2.0 * xs * x[i] + d * s[i];
    }
}
