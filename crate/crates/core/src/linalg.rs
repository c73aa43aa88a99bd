//! Small dense helpers shared by the solvers: a Cholesky factorization with an
//! explicit relative pivot tolerance, triangular solves, and symmetric
//! eigenvalues.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative pivot tolerance: a pivot `<= RANK_TOL * max diagonal` is treated
/// as rank deficiency.
pub const RANK_TOL: f64 = 1e-12;

/// Failure of [`cholesky`]: the offending index and pivot value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    pub index: usize,
    pub pivot: f64,
}

/// Lower-triangular Cholesky factor `L` with `a = L L'`.
///
/// Only the lower triangle of `a` is read.
pub fn cholesky(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>, PivotFailure> {
    let d = a.nrows();
    debug_assert_eq!(d, a.ncols());
    let max_diag = (0..d).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    let tol = rel_tol * max_diag;
    let mut l = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > tol && pivot > 0.0) {
            return Err(PivotFailure { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..d {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L z = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let d = l.nrows();
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L' z = b` in place for lower-triangular `L`.
pub fn backward_substitute(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let d = l.nrows();
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in (i + 1)..d {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `(L L') z = b`.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut z = b.clone();
    forward_substitute(l, &mut z);
    backward_substitute(l, &mut z);
    z
}

/// `L^{-1} B L^{-T}` for lower-triangular `L`, symmetrized.
pub fn whiten(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let d = l.nrows();
    // M = L^{-1} B, column by column
    let mut m = b.clone();
    for j in 0..d {
        let mut col = m.column(j).into_owned();
        forward_substitute(l, &mut col);
        m.set_column(j, &col);
    }
    // W = L^{-1} M' = L^{-1} B' L^{-T} = L^{-1} B L^{-T}
    let mut w = m.transpose();
    for j in 0..d {
        let mut col = w.column(j).into_owned();
        forward_substitute(l, &mut col);
        w.set_column(j, &col);
    }
    symmetrize(&mut w);
    w
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 {
        return DVector::zeros(0);
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    DVector::from_vec(vals)
}

/// `M^{-1/2}` for a symmetric positive definite matrix.
pub fn inverse_sqrt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Some(&eig.eigenvectors * scale * eig.eigenvectors.transpose())
}

/// `X' diag(w) X`, exactly symmetric.
pub fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let d = x.ncols();
    let mut scaled = x.clone();
    for j in 0..d {
        scaled.column_mut(j).component_mul_assign(w);
    }
    let mut g = x.transpose() * scaled;
    symmetrize(&mut g);
    g
}

/// Columns of `x` selected by `idx`, in order.
pub fn select_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), idx.len(), |i, j| x[(i, idx[j])])
}
