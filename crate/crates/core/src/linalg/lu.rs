use super::{max_abs, Matrix, DEFAULT_TOL};
use crate::error::{Error, Result};

/// Row-echelon LU factorization `P·M = L·U`.
///
/// `perm[i]` is the row of the input that ends up in row `i`. `lower` is
/// unit lower-triangular (rows × rows) and `upper` is in row-echelon form
/// (rows × cols). A column whose remaining entries are all below the zero
/// threshold is skipped without consuming a row, so a rank-deficient input
/// ends with exactly `rows - rank` zero rows at the bottom of `upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors {
    pub perm: Vec<usize>,
    pub lower: Matrix,
    pub upper: Matrix,
    /// Columns in which a pivot was found, in order.
    pub pivot_cols: Vec<usize>,
}

impl LuFactors {
    pub fn rank(&self) -> usize {
        self.pivot_cols.len()
    }

    pub fn permutation_matrix(&self) -> Matrix {
        let n = self.perm.len();
        let mut p = Matrix::zeros(n, n);
        for (i, &src) in self.perm.iter().enumerate() {
            p[(i, src)] = 1.0;
        }
        p
    }

    /// Apply the row permutation to `m` (same row count as the factored input).
    pub fn permute_rows(&self, m: &Matrix) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(self.perm[i], j)])
    }

    /// Columns without a pivot, ascending.
    pub fn free_cols(&self) -> Vec<usize> {
        (0..self.upper.ncols())
            .filter(|c| !self.pivot_cols.contains(c))
            .collect()
    }
}

/// LU with partial pivoting at the default relative threshold.
pub fn lu_decompose(m: &Matrix) -> LuFactors {
    lu_decompose_with_tol(m, DEFAULT_TOL)
}

/// LU with partial pivoting. The largest-magnitude candidate is chosen as
/// pivot, ties to the lowest row index. Entries at or below
/// `tol · max|M|` count as zero.
pub fn lu_decompose_with_tol(m: &Matrix, tol: f64) -> LuFactors {
    let rows = m.nrows();
    let cols = m.ncols();
    let thresh = tol * max_abs(m);
    let mut u = m.clone();
    let mut l = Matrix::identity(rows, rows);
    let mut perm: Vec<usize> = (0..rows).collect();
    let mut pivot_cols = Vec::new();
    let mut row = 0;

    for col in 0..cols {
        if row == rows {
            break;
        }
        let mut best = row;
        let mut best_val = u[(row, col)].abs();
        for i in row + 1..rows {
            let v = u[(i, col)].abs();
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        if best_val <= thresh {
            for i in row..rows {
                u[(i, col)] = 0.0;
            }
            continue;
        }
        if best != row {
            u.swap_rows(row, best);
            perm.swap(row, best);
            for j in 0..row {
                let tmp = l[(row, j)];
                l[(row, j)] = l[(best, j)];
                l[(best, j)] = tmp;
            }
        }
        let pivot = u[(row, col)];
        for i in row + 1..rows {
            let f = u[(i, col)] / pivot;
            if f == 0.0 {
                continue;
            }
            l[(i, row)] = f;
            for j in col..cols {
                let delta = f * u[(row, j)];
                u[(i, j)] -= delta;
            }
            u[(i, col)] = 0.0;
        }
        pivot_cols.push(col);
        row += 1;
    }
    for i in row..rows {
        for j in 0..cols {
            u[(i, j)] = 0.0;
        }
    }

    LuFactors {
        perm,
        lower: l,
        upper: u,
        pivot_cols,
    }
}

/// Solve the square system `a·x = b`.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n {
        return Err(Error::Shape(format!(
            "solve: {}x{} system with {} right-hand rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let f = lu_decompose_with_tol(a, 1e-14);
    if f.rank() < n {
        return Err(Error::Singular(format!("{n}x{n} system has rank {}", f.rank())));
    }
    let mut x = f.permute_rows(b);
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= f.lower[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= f.upper[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / f.upper[(i, i)];
        }
    }
    Ok(x)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve(a, &Matrix::identity(a.nrows(), a.nrows()))
}

/// The two left blocks of `T⁻¹` for the split `T = [T₁ T₂; T₃ T₄]` with
/// `T₁` of size `split × split`, via the Schur complement
/// `S = T₄ − T₃T₁⁻¹T₂`:
///
/// `X₁₁ = T₁⁻¹(I + T₂S⁻¹T₃T₁⁻¹)`, `X₂₁ = −S⁻¹T₃T₁⁻¹`.
pub fn schur_block_inverse(t: &Matrix, split: usize) -> Result<(Matrix, Matrix)> {
    let n = t.nrows();
    if !t.is_square() || split > n {
        return Err(Error::Shape(format!(
            "schur_block_inverse: {}x{} matrix split at {split}",
            t.nrows(),
            t.ncols()
        )));
    }
    let rest = n - split;
    let t1 = t.view((0, 0), (split, split)).clone_owned();
    let t2 = t.view((0, split), (split, rest)).clone_owned();
    let t3 = t.view((split, 0), (rest, split)).clone_owned();
    let t4 = t.view((split, split), (rest, rest)).clone_owned();

    // X = T₃T₁⁻¹, from T₁ᵀXᵀ = T₃ᵀ.
    let x = solve(&t1.transpose(), &t3.transpose())
        .map_err(|_| Error::Singular("leading block T1".into()))?
        .transpose();
    let s = &t4 - &x * &t2;
    let s_inv_x = solve(&s, &x).map_err(|_| Error::Singular("Schur complement S".into()))?;
    let x11 = solve(&t1, &(Matrix::identity(split, split) + &t2 * &s_inv_x))
        .map_err(|_| Error::Singular("leading block T1".into()))?;
    let x21 = -s_inv_x;
    Ok((x11, x21))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(m: &Matrix, f: &LuFactors) -> f64 {
        (f.permute_rows(m) - &f.lower * &f.upper).abs().max()
    }

    #[test]
    fn identity_factors_trivially() {
        let id = Matrix::identity(3, 3);
        let f = lu_decompose(&id);
        assert_eq!(f.perm, vec![0, 1, 2]);
        assert_eq!(f.lower, id);
        assert_eq!(f.upper, id);
    }

    #[test]
    fn upper_triangular_input_is_its_own_u() {
        let k = Matrix::from_row_slice(3, 3, &[1., 0., 1., 0., 1., 0., 0., 0., 1.]);
        let f = lu_decompose(&k);
        assert_eq!(f.upper, k);
        assert_eq!(f.lower, Matrix::identity(3, 3));
        assert_eq!(f.perm, vec![0, 1, 2]);
    }

    #[test]
    fn ties_go_to_lowest_row() {
        let m = Matrix::from_row_slice(2, 2, &[1., 2., -1., 3.]);
        let f = lu_decompose(&m);
        assert_eq!(f.perm, vec![0, 1]);
        assert!(residual(&m, &f) < 1e-15);
    }

    #[test]
    fn rank_deficient_input_leaves_zero_tail() {
        // Pivot in column 0, column 1 empty below, next pivot in column 2.
        let m = Matrix::from_row_slice(3, 3, &[0., 0., -1., -1., 0., 0., 0., 0., 0.]);
        let f = lu_decompose(&m);
        assert_eq!(f.pivot_cols, vec![0, 2]);
        assert_eq!(f.free_cols(), vec![1]);
        assert!(f.upper.row(2).iter().all(|&v| v == 0.0));
        assert!(residual(&m, &f) < 1e-15);

        // Without the echelon skip, the last row here would stay nonzero.
        let m = Matrix::from_row_slice(3, 3, &[1., 0., 0., 0., 0., 1., 0., 0., 1.]);
        let f = lu_decompose(&m);
        assert_eq!(f.rank(), 2);
        assert!(f.upper.row(2).iter().all(|&v| v == 0.0));
        assert!(residual(&m, &f) < 1e-15);
    }

    #[test]
    fn wide_matrix() {
        let m = Matrix::from_row_slice(2, 4, &[1., 2., 3., 4., 2., 1., 0., 1.]);
        let f = lu_decompose(&m);
        assert_eq!(f.upper.shape(), (2, 4));
        assert!(residual(&m, &f) < 1e-14);
    }

    #[test]
    fn schur_blocks_identity() {
        let (x11, x21) = schur_block_inverse(&Matrix::identity(4, 4), 3).unwrap();
        assert_eq!(x11, Matrix::identity(3, 3));
        assert_eq!(x21, Matrix::zeros(1, 3));
    }

    #[test]
    fn schur_blocks_two_by_two() {
        // inverse of [[2,1],[1,1]] is [[1,-1],[-1,2]]; S = 1 - 1/2 = 1/2
        let t = Matrix::from_row_slice(2, 2, &[2., 1., 1., 1.]);
        let (x11, x21) = schur_block_inverse(&t, 1).unwrap();
        assert!((x11[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((x21[(0, 0)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn schur_singular_blocks() {
        let t = Matrix::from_row_slice(2, 2, &[0., 1., 1., 1.]);
        assert!(matches!(schur_block_inverse(&t, 1), Err(Error::Singular(_))));
        let t = Matrix::from_row_slice(2, 2, &[1., 1., 1., 1.]);
        assert!(matches!(schur_block_inverse(&t, 1), Err(Error::Singular(_))));
    }

    #[test]
    fn solve_and_inverse() {
        let a = Matrix::from_row_slice(2, 2, &[2., 1., 1., 1.]);
        let inv = inverse(&a).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[1., -1., -1., 2.]);
        assert!((inv - expected).abs().max() < 1e-15);
        let singular = Matrix::from_row_slice(2, 2, &[1., 2., 2., 4.]);
        assert!(matches!(inverse(&singular), Err(Error::Singular(_))));
    }
}
