//! Small dense linear algebra for Gram systems of dimension ~10.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("empty input")]
    EmptyInput,
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch(format!(
                    "ragged rows: {} vs {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok(self.rows().map(|r| dot(r, v)).collect())
    }

    /// Rows restricted to the given mask.
    pub fn select_rows(&self, keep: &[bool]) -> Matrix {
        let mut data = Vec::new();
        let mut rows = 0;
        for (r, &k) in self.rows().zip(keep) {
            if k {
                data.extend_from_slice(r);
                rows += 1;
            }
        }
        Matrix {
            rows,
            cols: self.cols,
            data,
        }
    }

    /// `Σ wᵢ xᵢ xᵢᵀ` over rows.
    pub fn weighted_gram(&self, weights: &[f64]) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for (r, &w) in self.rows().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for a in 0..p {
                let wa = w * r[a];
                for b in a..p {
                    g.data[a * p + b] += wa * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g.data[a * p + b] = g.data[b * p + a];
            }
        }
        g
    }

    /// `Σ wᵢ yᵢ xᵢ` over rows.
    pub fn weighted_cross(&self, weights: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for ((r, &w), &yi) in self.rows().zip(weights).zip(y) {
            let s = w * yi;
            if s == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(r) {
                *o += s * x;
            }
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Which path produced a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Fallback {
    /// Direct factorization of the system as given.
    None,
    /// Direct factorization after adding a small ridge.
    Ridge,
    /// Minimum-norm least-squares solution.
    MinimumNorm,
}

impl Fallback {
    pub fn engaged(self) -> bool {
        self != Fallback::None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub fallback: Fallback,
}

fn check_system(a: &Matrix, b: &[f64]) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} system matrix is not square",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "right-hand side of length {} for dimension {}",
            b.len(),
            a.nrows()
        )));
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite("system matrix"));
    }
    if !b.iter().all(|v| v.is_finite()) {
        return Err(LinalgError::NonFinite("right-hand side"));
    }
    Ok(())
}

// Relative pivot floor for the equilibrated Cholesky factorization.
const PIVOT_FLOOR: f64 = 1e-13;

/// Cholesky solve after symmetric diagonal equilibration. `None` when a
/// pivot falls below the floor.
fn cholesky_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let p = a.nrows();
    let mut scale = vec![0.0; p];
    for i in 0..p {
        let d = a[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        scale[i] = 1.0 / d.sqrt();
    }
    let mut l = Matrix::zeros(p, p);
    for j in 0..p {
        let mut diag = a[(j, j)] * scale[j] * scale[j];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > PIVOT_FLOOR) {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..p {
            let mut s = a[(i, j)] * scale[i] * scale[j];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    let mut y: Vec<f64> = b.iter().zip(&scale).map(|(v, s)| v * s).collect();
    for i in 0..p {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in i + 1..p {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    Some(y.iter().zip(&scale).map(|(v, s)| v * s).collect())
}

fn with_ridge(a: &Matrix, ridge: f64) -> Matrix {
    let mut out = a.clone();
    if ridge != 0.0 {
        for i in 0..out.nrows() {
            out[(i, i)] += ridge;
        }
    }
    out
}

fn fallback_ridge(a: &Matrix) -> f64 {
    let dim = a.nrows().max(1) as f64;
    let r = 1e-8 * a.trace().abs() / dim;
    if r > 0.0 {
        r
    } else {
        1e-8
    }
}

/// Solves `(A + ridge·I) x = b` for symmetric `A`.
///
/// Tries a Cholesky factorization first; if that fails, retries with an
/// extra ridge of `1e-8·trace(A)/dim`; if that fails too, returns the
/// minimum-norm least-squares solution from a symmetric eigendecomposition.
/// The returned [`Fallback`] records which path was taken.
pub fn solve_spd(a: &Matrix, b: &[f64], ridge: f64) -> Result<Solution, LinalgError> {
    check_system(a, b)?;
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(LinalgError::NonFinite("ridge"));
    }
    let scale = a.max_abs();
    let mut asym = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..i {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(LinalgError::NotSymmetric(asym));
    }
    if a.nrows() == 0 {
        return Ok(Solution {
            x: Vec::new(),
            fallback: Fallback::None,
        });
    }

    let system = with_ridge(a, ridge);
    if let Some(x) = cholesky_solve(&system, b) {
        return Ok(Solution {
            x,
            fallback: Fallback::None,
        });
    }
    let retry = with_ridge(&system, fallback_ridge(a));
    if let Some(x) = cholesky_solve(&retry, b) {
        return Ok(Solution {
            x,
            fallback: Fallback::Ridge,
        });
    }
    let eig = system.to_nalgebra().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = 1e-12 * top;
    let bv = DVector::from_column_slice(b);
    let mut x = DVector::zeros(a.nrows());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cutoff {
            let v = eig.eigenvectors.column(k);
            x += v * (v.dot(&bv) / lambda);
        }
    }
    Ok(Solution {
        x: x.iter().copied().collect(),
        fallback: Fallback::MinimumNorm,
    })
}

fn lu_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let lu = a.to_nalgebra().lu();
    let u = lu.u();
    let diag: Vec<f64> = u.diagonal().iter().map(|v| v.abs()).collect();
    let top = diag.iter().fold(0.0_f64, |m, v| m.max(*v));
    let bottom = diag.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(top > 0.0) || bottom <= PIVOT_FLOOR * top {
        return None;
    }
    let x = lu.solve(&DVector::from_column_slice(b))?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Solves a general square system `A x = b` (used where the cross-moment
/// matrix is not symmetric). Same fallback ladder as [`solve_spd`], with an
/// SVD pseudo-inverse as the last resort.
pub fn solve_general(a: &Matrix, b: &[f64]) -> Result<Solution, LinalgError> {
    check_system(a, b)?;
    if a.nrows() == 0 {
        return Ok(Solution {
            x: Vec::new(),
            fallback: Fallback::None,
        });
    }
    if let Some(x) = lu_solve(a, b) {
        return Ok(Solution {
            x,
            fallback: Fallback::None,
        });
    }
    let retry = with_ridge(a, fallback_ridge(a));
    if let Some(x) = lu_solve(&retry, b) {
        return Ok(Solution {
            x,
            fallback: Fallback::Ridge,
        });
    }
    let svd = a.to_nalgebra().svd(true, true);
    let top = svd.singular_values.iter().fold(0.0_f64, |m, v| m.max(*v));
    let x = svd
        .solve(&DVector::from_column_slice(b), 1e-12 * top)
        .map_err(|_| LinalgError::NonFinite("pseudo-inverse"))?;
    Ok(Solution {
        x: x.iter().copied().collect(),
        fallback: Fallback::MinimumNorm,
    })
}

/// Residual norm `‖(A + ridge·I)x − b‖`.
pub fn residual_norm(a: &Matrix, x: &[f64], b: &[f64], ridge: f64) -> f64 {
    let ax = with_ridge(a, ridge).matvec(x).expect("dimensions checked by caller");
    let r: Vec<f64> = ax.iter().zip(b).map(|(u, v)| u - v).collect();
    norm2(&r)
}

/// Componentwise mean of equal-length vectors.
pub fn sample_average<V: AsRef<[f64]>>(values: &[V]) -> Result<Vec<f64>, LinalgError> {
    let first = values.first().ok_or(LinalgError::EmptyInput)?.as_ref();
    let dim = first.len();
    let mut out = vec![0.0; dim];
    for v in values {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector of length {} among length {dim}",
                v.len()
            )));
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    let n = values.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Pairwise (tree-order) summation; the association order depends only on
/// the slice length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
