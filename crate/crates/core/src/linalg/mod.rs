//! Dense real linear algebra at desk scale.
//!
//! Matrices are `nalgebra::DMatrix<f64>` (column-major storage). The
//! factorizations here are written out by hand so that pivot selection and
//! tie-breaking are fixed: every choice between equal candidates goes to the
//! lowest index, which keeps runs bit-reproducible.

mod eigen;
mod lu;
mod qr;
mod subspace;

pub use eigen::{eigenvalues, spectral_radius};
pub use lu::{inverse, lu_decompose, lu_decompose_with_tol, schur_block_inverse, solve, LuFactors};
pub use qr::{nullspace, rank, PivotedQr};
pub(crate) use qr::nullspace_with_scale;
pub use subspace::{image, preimage, subspace_intersect, Subspace};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real dense matrix, column-major.
pub type Matrix = DMatrix<f64>;
/// Complex dense matrix, used only for transfer-function evaluation.
pub type CMatrix = DMatrix<Complex64>;

/// Default relative threshold for rank decisions.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest absolute entry, 0 for an empty matrix.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_1(m: &Matrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number; `f64::INFINITY` when the matrix is judged singular.
pub fn condition_1(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    match inverse(m) {
        Ok(inv) => norm_1(m) * norm_1(&inv),
        Err(_) => f64::INFINITY,
    }
}

/// Largest singular value (spectral norm).
pub fn sigma_max(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, &b| a.max(b))
}

/// Smallest singular value of a complex matrix (0 for non-square inputs with
/// more columns than rows).
pub fn sigma_min_complex(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if m.ncols() > m.nrows() {
        0.0
    } else {
        min
    }
}

/// Stack matrices vertically. All inputs must share the column count.
pub fn vstack(blocks: &[&Matrix]) -> Result<Matrix> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    if let Some(bad) = blocks.iter().find(|b| b.ncols() != cols) {
        return Err(Error::Shape(format!(
            "vstack: column count {} does not match {}",
            bad.ncols(),
            cols
        )));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    Ok(out)
}

/// Promote a real matrix to complex.
pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `a + b·w` for real `a`, `b` and complex scalar `w`.
pub fn affine_pencil(a: &Matrix, b: &Matrix, w: Complex64) -> CMatrix {
    CMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        Complex64::new(a[(i, j)], 0.0) + w * b[(i, j)]
    })
}

/// Solve a complex square system `a·x = b`.
pub fn solve_complex(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "solve_complex: {}x{} system with {} right-hand rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if a.nrows() == 0 {
        return Ok(b.clone());
    }
    let sv_min = sigma_min_complex(a);
    let sv_max = a.clone().svd(false, false).singular_values.max();
    if sv_min <= 1e-14 * sv_max {
        return Err(Error::Singular("complex boundary matrix".into()));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("complex boundary matrix".into()))
}

/// Determinant of a complex square matrix (1 for the empty matrix).
pub fn det_complex(a: &CMatrix) -> Complex64 {
    if a.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    a.clone().lu().determinant()
}
