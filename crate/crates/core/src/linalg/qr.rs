use super::{Matrix, Subspace};

/// Householder QR with column pivoting: `M·P = Q·R`.
///
/// `q` is the full orthogonal factor (rows × rows). At every step the
/// remaining column of largest norm is moved forward, ties to the lowest
/// index.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    pub q: Matrix,
    pub r: Matrix,
    pub col_perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(m: &Matrix) -> Self {
        let rows = m.nrows();
        let cols = m.ncols();
        let mut r = m.clone();
        let mut q = Matrix::identity(rows, rows);
        let mut col_perm: Vec<usize> = (0..cols).collect();

        for k in 0..rows.min(cols) {
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..cols {
                let nrm = r.view((k, j), (rows - k, 1)).norm_squared();
                if nrm > best_norm {
                    best = j;
                    best_norm = nrm;
                }
            }
            if best != k {
                r.swap_columns(k, best);
                col_perm.swap(k, best);
            }

            let x = r.view((k, k), (rows - k, 1)).clone_owned();
            let xnorm = x.norm();
            if xnorm == 0.0 {
                continue;
            }
            let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
            let mut v = x;
            v[0] -= alpha;
            let vnorm = v.norm();
            if vnorm == 0.0 {
                continue;
            }
            v /= vnorm;

            // R <- (I - 2vv^T) R on the trailing block.
            let mut block = r.view_mut((k, k), (rows - k, cols - k));
            let w = v.transpose() * &block;
            block -= 2.0 * &v * w;
            for i in k + 1..rows {
                r[(i, k)] = 0.0;
            }
            r[(k, k)] = alpha;

            // Q <- Q (I - 2vv^T).
            let mut qb = q.view_mut((0, k), (rows, rows - k));
            let qv = &qb * &v;
            qb -= 2.0 * qv * v.transpose();
        }

        PivotedQr { q, r, col_perm }
    }

    /// Number of diagonal entries of `R` above `tol · max(|R₀₀|, scale)`.
    pub fn rank_scaled(&self, tol: f64, scale: f64) -> usize {
        let d = self.r.nrows().min(self.r.ncols());
        if d == 0 {
            return 0;
        }
        let lead = self.r[(0, 0)].abs();
        let thresh = tol * lead.max(scale);
        if lead == 0.0 || lead <= thresh {
            return 0;
        }
        (0..d).take_while(|&i| self.r[(i, i)].abs() > thresh).count()
    }
}

/// Numerical rank: diagonal magnitudes of the pivoted `R` below
/// `tol · |R₀₀|` count as zero.
pub fn rank(m: &Matrix, tol: f64) -> usize {
    PivotedQr::new(m).rank_scaled(tol, 0.0)
}

/// Orthonormal basis of the right nullspace of `m`.
pub fn nullspace(m: &Matrix, tol: f64) -> Subspace {
    nullspace_with_scale(m, tol, 0.0)
}

/// Nullspace with an absolute floor `scale` on the rank threshold, so a
/// matrix that is pure roundoff relative to `scale` is treated as zero.
pub(crate) fn nullspace_with_scale(m: &Matrix, tol: f64, scale: f64) -> Subspace {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Subspace::full(n, tol);
    }
    let qr = PivotedQr::new(&m.transpose());
    let r = qr.rank_scaled(tol, scale);
    let basis = qr.q.columns(r, n - r).clone_owned();
    Subspace::from_orthonormal(basis, tol)
}

/// Orthonormal basis for the column space of `m`.
pub(crate) fn column_space_with_scale(m: &Matrix, tol: f64, scale: f64) -> Subspace {
    let rows = m.nrows();
    if m.ncols() == 0 {
        return Subspace::zero(rows, tol);
    }
    let qr = PivotedQr::new(m);
    let r = qr.rank_scaled(tol, scale);
    Subspace::from_orthonormal(qr.q.columns(0, r).clone_owned(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_with_permutation() {
        let m = Matrix::from_row_slice(3, 4, &[1., 2., 0., 4., 0., 1., 5., 1., 3., 0., 1., 2.]);
        let qr = PivotedQr::new(&m);
        let mp = Matrix::from_fn(3, 4, |i, j| m[(i, qr.col_perm[j])]);
        assert!((&qr.q * &qr.r - mp).abs().max() < 1e-13);
        assert!((qr.q.transpose() * &qr.q - Matrix::identity(3, 3)).abs().max() < 1e-14);
    }

    #[test]
    fn rank_of_row_and_zero_row() {
        let m = Matrix::from_row_slice(2, 3, &[1., 1., 0., 0., 0., 0.]);
        assert_eq!(rank(&m, 1e-10), 1);
        assert_eq!(rank(&Matrix::zeros(3, 3), 1e-10), 0);
    }

    #[test]
    fn nullspace_of_single_constraint() {
        let m = Matrix::from_row_slice(1, 3, &[1., 1., 0.]);
        let ns = nullspace(&m, 1e-10);
        assert_eq!(ns.dim(), 2);
        assert!((&m * ns.basis()).abs().max() < 1e-14);
        let z = nullspace(&Matrix::zeros(2, 2), 1e-10);
        assert_eq!(z.dim(), 2);
    }
}
