//! Small dense helpers shared by the solvers: stage-block assembly and
//! factorizations that report singularity instead of producing garbage.

use nalgebra::{DMatrix, DVector};

/// Relative pivot size below which an LU factorization is treated as singular.
const PIVOT_TOL: f64 = 1e-13;

/// Solves `mat * x = rhs` by LU with partial pivoting.
///
/// Returns `None` when the smallest pivot is negligible relative to the largest.
pub fn lu_solve(mat: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let lu = mat.clone().lu();
    let diag = lu.u().diagonal();
    let max = diag.amax();
    let min = diag.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if !(max > 0.0) || min <= PIVOT_TOL * max {
        return None;
    }
    lu.solve(rhs)
}

pub fn lu_solve_vec(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let sol = lu_solve(mat, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
    Some(sol.column(0).into_owned())
}

/// Cholesky solve; `None` if `mat` is not (numerically) positive definite.
pub fn chol_solve(mat: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = symmetrized(mat).cholesky()?;
    Some(chol.solve(rhs))
}

pub fn chol_solve_vec(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = symmetrized(mat).cholesky()?;
    Some(chol.solve(rhs))
}

pub fn symmetrized(mat: &DMatrix<f64>) -> DMatrix<f64> {
    (mat + mat.transpose()) * 0.5
}

pub fn is_symmetric(mat: &DMatrix<f64>, tol: f64) -> bool {
    mat.is_square() && (mat - mat.transpose()).amax() <= tol * (1.0 + mat.amax())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(mat: &DMatrix<f64>) -> f64 {
    if mat.nrows() == 0 {
        return 0.0;
    }
    symmetrized(mat)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v))
}

/// `Z = [I_n; ...; I_n]` with `stages` copies.
pub fn stacked_identity(stages: usize, n: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(stages * n, n);
    for i in 0..stages {
        z.view_mut((i * n, 0), (n, n)).fill_with_identity();
    }
    z
}

/// Block matrix whose `(i, j)` block is `scale * coeffs[(i, j)] * blocks[j]`.
pub fn coupled_blocks(coeffs: &DMatrix<f64>, blocks: &[DMatrix<f64>], scale: f64) -> DMatrix<f64> {
    let s = coeffs.nrows();
    let (r, c) = blocks[0].shape();
    let mut out = DMatrix::zeros(s * r, coeffs.ncols() * c);
    for i in 0..s {
        for j in 0..coeffs.ncols() {
            let w = scale * coeffs[(i, j)];
            if w != 0.0 {
                out.view_mut((i * r, j * c), (r, c)).copy_from(&(&blocks[j] * w));
            }
        }
    }
    out
}

/// Row of blocks `[scale * w_1 blocks_1, ..., scale * w_s blocks_s]`.
pub fn weighted_row(weights: &[f64], blocks: &[DMatrix<f64>], scale: f64) -> DMatrix<f64> {
    let (r, c) = blocks[0].shape();
    let mut out = DMatrix::zeros(r, weights.len() * c);
    for (j, (w, b)) in weights.iter().zip(blocks).enumerate() {
        out.view_mut((0, j * c), (r, c)).copy_from(&(b * (scale * w)));
    }
    out
}

/// Block diagonal `diag(scale * w_1 * block, ..., scale * w_s * block)`.
pub fn weighted_block_diag(weights: &[f64], block: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(weights.len() * r, weights.len() * c);
    for (i, w) in weights.iter().enumerate() {
        out.view_mut((i * r, i * c), (r, c)).copy_from(&(block * (scale * w)));
    }
    out
}

pub fn flatten(parts: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        parts.iter().map(|p| p.len()).sum(),
        parts.iter().flat_map(|p| p.iter().copied()),
    )
}

/// Splits a stacked vector into consecutive chunks of `chunk` entries.
pub fn unflatten(flat: &DVector<f64>, chunk: usize) -> Vec<DVector<f64>> {
    assert!(chunk > 0 && flat.len().is_multiple_of(chunk), "length {} not a multiple of {chunk}", flat.len());
    flat.as_slice()
        .chunks(chunk)
        .map(DVector::from_column_slice)
        .collect()
}

/// Row-major slice into an `rows x cols` matrix.
pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}
