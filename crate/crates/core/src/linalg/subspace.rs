use super::qr::{column_space_with_scale, nullspace_with_scale};
use super::Matrix;
use crate::error::{Error, Result};

/// Linear subspace of ℝⁿ held as an orthonormal basis (one column per
/// basis vector) together with the absolute residual tolerance used for
/// membership tests.
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Matrix,
    tol: f64,
}

impl Subspace {
    pub(crate) fn from_orthonormal(basis: Matrix, tol: f64) -> Self {
        Subspace {
            ambient_dim: basis.nrows(),
            basis,
            tol,
        }
    }

    pub fn full(n: usize, tol: f64) -> Self {
        Self::from_orthonormal(Matrix::identity(n, n), tol)
    }

    pub fn zero(n: usize, tol: f64) -> Self {
        Self::from_orthonormal(Matrix::zeros(n, 0), tol)
    }

    /// Span of the columns of `vectors`.
    pub fn span(vectors: &Matrix, tol: f64) -> Self {
        column_space_with_scale(vectors, tol, 0.0)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    /// Euclidean distance from each column of `v` to the subspace, maximized.
    pub fn distance(&self, v: &Matrix) -> f64 {
        let resid = v - &self.basis * (self.basis.transpose() * v);
        (0..resid.ncols())
            .map(|j| resid.column(j).norm())
            .fold(0.0, f64::max)
    }

    /// True if every column of `v` lies in the subspace within
    /// `tol · max(1, ‖column‖)`.
    pub fn contains(&self, v: &Matrix) -> bool {
        let resid = v - &self.basis * (self.basis.transpose() * v);
        (0..v.ncols()).all(|j| resid.column(j).norm() <= self.tol * v.column(j).norm().max(1.0))
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.ambient_dim == self.ambient_dim && self.contains(&other.basis)
    }

    /// Mutual containment.
    pub fn same_as(&self, other: &Subspace) -> bool {
        self.dim() == other.dim() && self.contains_subspace(other) && other.contains_subspace(self)
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Subspace {
        nullspace_with_scale(&self.basis.transpose(), self.tol, 1.0)
    }
}

/// `V ∩ W`, computed as the common nullspace of the two complementary
/// projectors `I − P_V` and `I − P_W`.
pub fn subspace_intersect(v: &Subspace, w: &Subspace) -> Result<Subspace> {
    if v.ambient_dim != w.ambient_dim {
        return Err(Error::Shape(format!(
            "intersection of subspaces of R^{} and R^{}",
            v.ambient_dim, w.ambient_dim
        )));
    }
    let n = v.ambient_dim;
    let tol = v.tol.max(w.tol);
    let id = Matrix::identity(n, n);
    let mut stacked = Matrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&(&id - v.projector()));
    stacked.view_mut((n, 0), (n, n)).copy_from(&(&id - w.projector()));
    Ok(nullspace_with_scale(&stacked, tol, 1.0))
}

/// `{x : F·x ∈ W}`, the nullspace of `(I − P_W)·F`.
pub fn preimage(f: &Matrix, w: &Subspace) -> Result<Subspace> {
    if f.nrows() != w.ambient_dim {
        return Err(Error::Shape(format!(
            "preimage: map has {} rows but subspace lives in R^{}",
            f.nrows(),
            w.ambient_dim
        )));
    }
    let n = w.ambient_dim;
    let resid = (Matrix::identity(n, n) - w.projector()) * f;
    let scale = f.norm();
    Ok(nullspace_with_scale(&resid, w.tol, scale))
}

/// `M·V`, the image of a subspace under a linear map.
pub fn image(m: &Matrix, v: &Subspace) -> Result<Subspace> {
    if m.ncols() != v.ambient_dim {
        return Err(Error::Shape(format!(
            "image: map has {} columns but subspace lives in R^{}",
            m.ncols(),
            v.ambient_dim
        )));
    }
    let mapped = m * &v.basis;
    Ok(column_space_with_scale(&mapped, v.tol, m.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span_of(cols: &[&[f64]]) -> Subspace {
        let n = cols[0].len();
        let m = Matrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        Subspace::span(&m, 1e-10)
    }

    #[test]
    fn intersect_with_itself() {
        let v = span_of(&[&[1., 2., 0.], &[0., 1., 1.]]);
        let i = subspace_intersect(&v, &v).unwrap();
        assert!(i.same_as(&v));
    }

    #[test]
    fn intersect_coordinate_planes() {
        let v = span_of(&[&[1., 0., 0.], &[0., 1., 0.]]);
        let w = span_of(&[&[0., 1., 0.], &[0., 0., 1.]]);
        let i = subspace_intersect(&v, &w).unwrap();
        assert_eq!(i.dim(), 1);
        assert!(i.same_as(&span_of(&[&[0., 1., 0.]])));
    }

    #[test]
    fn intersect_dimension_mismatch() {
        let v = Subspace::full(2, 1e-10);
        let w = Subspace::full(3, 1e-10);
        assert!(matches!(subspace_intersect(&v, &w), Err(Error::Shape(_))));
    }

    #[test]
    fn preimage_identity_and_zero() {
        let w = span_of(&[&[1., 1., 0.]]);
        let p = preimage(&Matrix::identity(3, 3), &w).unwrap();
        assert!(p.same_as(&w));
        let p = preimage(&Matrix::zeros(3, 4), &w).unwrap();
        assert_eq!(p.dim(), 4);
        assert!(matches!(
            preimage(&Matrix::zeros(2, 4), &w),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn complement_dimensions() {
        let v = span_of(&[&[1., 1., 0.]]);
        let c = v.complement();
        assert_eq!(c.dim(), 2);
        assert!((v.basis().transpose() * c.basis()).abs().max() < 1e-14);
    }
}
