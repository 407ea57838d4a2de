//! Small dense linear-algebra helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::dual::Scalar;

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting
/// on the real parts; `a` is row-major `n × n`. Returns `None` on an exact
/// zero pivot.
pub fn solve_generic<S: Scalar>(a: &mut [S], b: &mut [S], n: usize) -> Option<()> {
    for col in 0..n {
        let mut piv = col;
        let mut best = libm::fabs(a[col * n + col].re());
        for r in col + 1..n {
            let cand = libm::fabs(a[r * n + col].re());
            if cand > best {
                best = cand;
                piv = r;
            }
        }
        if best == 0.0 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f.re() == 0.0 && f.coeff_is_constant() {
                continue;
            }
            for c in col..n {
                let t = a[col * n + c];
                a[r * n + c] -= f * t;
            }
            let t = b[col];
            b[r] -= f * t;
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col * n + c] * b[c];
        }
        b[col] = s / a[col * n + col];
    }
    Some(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)))
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Columns of a matrix as owned vectors.
pub fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols()).map(|j| m.column(j).iter().copied().collect()).collect()
}

pub fn from_columns(n: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            m[(i, j)] = c[i];
        }
    }
    m
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    s
}

/// Number of singular values above `rel · scale` (scale defaults to σ_max).
pub fn numerical_rank(m: &DMatrix<f64>, rel: f64, scale: Option<f64>) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    let reference = scale.unwrap_or(top).max(top);
    if reference == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel * reference).count()
}

/// Cholesky factor `L` with `g = L Lᵀ` for a symmetric positive-definite `g`.
pub fn cholesky(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(g.clone()).map(|c| c.l())
}

/// Orthonormal basis (Euclidean) of the null space of `m`: right singular
/// vectors with singular value at most `rel · σ_max`.
pub fn null_space(m: &DMatrix<f64>, rel: f64) -> Vec<Vec<f64>> {
    let n = m.ncols();
    // Pad to square so the SVD carries a full set of right singular vectors.
    let rows = m.nrows().max(n);
    let mut sq = DMatrix::zeros(rows, n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = match svd.v_t {
        Some(vt) => vt,
        None => return Vec::new(),
    };
    let top = svd.singular_values.iter().fold(0.0f64, |a, b| a.max(*b));
    let mut out = Vec::new();
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] <= rel * top.max(1e-300) {
            out.push(vt.row(i).iter().copied().collect());
        }
    }
    out
}

/// `(AᵀGA)⁻¹AᵀG`: coordinates in the column basis `a` of the `g`-orthogonal
/// projection.
pub fn g_coordinates(g: &DMatrix<f64>, a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let gram = a.transpose() * g * a;
    let inv = gram.try_inverse()?;
    Some(inv * a.transpose() * g)
}

/// `g`-orthogonal projector onto the column span of `a`.
pub fn g_projector(g: &DMatrix<f64>, a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.ncols() == 0 {
        return Some(DMatrix::zeros(g.nrows(), g.nrows()));
    }
    Some(a * g_coordinates(g, a)?)
}
