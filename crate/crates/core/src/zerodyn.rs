//! Largest output-nulling subspace, nulling feedback, and the iterative
//! reduction to the zero-dynamics boundary system.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_well_posed, discrete_reduce, is_transmission_zero, pencil_roots, w_to_s,
    DiscreteSystem,
};
use crate::error::{Error, Result};
use crate::linalg::{
    condition_1, image, inverse, lu_decompose_with_tol, nullspace, preimage, rank,
    schur_block_inverse, solve, subspace_intersect, Matrix, Subspace, DEFAULT_TOL,
};
use crate::model::{map_json_error, rows, PHSystem};

/// Largest `V` with `F·V ⊆ E·V`, by the descending iteration
/// `V⁰ = ℝⁿ`, `V^{k+1} = V^k ∩ F⁻¹(E·V^k)`.
///
/// For a system with output forced to zero, `E = −[K0; Ky]` and
/// `F = [L0; Ly]`.
pub fn vstar_discrete(e: &Matrix, f: &Matrix) -> Result<Subspace> {
    if e.shape() != f.shape() {
        return Err(Error::Shape(format!(
            "E is {}x{} but F is {}x{}",
            e.nrows(),
            e.ncols(),
            f.nrows(),
            f.ncols()
        )));
    }
    let mut v = Subspace::full(e.ncols(), DEFAULT_TOL);
    for _ in 0..=e.ncols() {
        let next = subspace_intersect(&v, &preimage(f, &image(e, &v)?)?)?;
        if next.dim() == v.dim() {
            return Ok(v);
        }
        v = next;
    }
    Err(Error::NoConvergence {
        iterations: e.ncols() + 1,
    })
}

/// `vstar_discrete` for the output-nulled boundary of `sys`.
pub fn vstar_of_system(sys: &PHSystem) -> Result<Subspace> {
    vstar_discrete(&(-sys.k_nulled()), &sys.l_nulled())
}

/// Largest output-nulling controlled-invariant subspace of a quadruple:
/// all `v ∈ V` admit `u` with `A·v + B·u ∈ V` and `C·v + D·u = 0`.
pub fn vstar_from_quadruple(d: &DiscreteSystem) -> Result<Subspace> {
    let n = d.n();
    let m = d.m();
    let mut big = Matrix::zeros(n + m, n + m);
    big.view_mut((0, 0), (n, n)).copy_from(&d.ad);
    big.view_mut((0, n), (n, m)).copy_from(&d.bd);
    big.view_mut((n, 0), (m, n)).copy_from(&d.cd);
    big.view_mut((n, n), (m, m)).copy_from(&d.dd);
    let mut proj = Matrix::zeros(n, n + m);
    proj.view_mut((0, 0), (n, n)).fill_with_identity();

    let mut v = Subspace::full(n, DEFAULT_TOL);
    for _ in 0..=n {
        let mut padded = Matrix::zeros(n + m, v.dim());
        padded.view_mut((0, 0), (n, v.dim())).copy_from(v.basis());
        let target = Subspace::span(&padded, DEFAULT_TOL);
        let pre = preimage(&big, &target)?;
        let next = subspace_intersect(&v, &image(&proj, &pre)?)?;
        if next.dim() == v.dim() {
            return Ok(v);
        }
        v = next;
    }
    Err(Error::NoConvergence { iterations: n + 1 })
}

/// State feedback `u = Fd·z` that keeps `V` invariant and the output zero.
#[derive(Debug, Clone)]
pub struct NullingFriend {
    pub fd: Matrix,
    pub vbasis: Subspace,
}

impl NullingFriend {
    /// `(‖dist((A + B·Fd)·V, V)‖, ‖(C + D·Fd)·V‖)`.
    pub fn residuals(&self, d: &DiscreteSystem) -> (f64, f64) {
        let b = self.vbasis.basis();
        let moved = (&d.ad + &d.bd * &self.fd) * b;
        let out = (&d.cd + &d.dd * &self.fd) * b;
        (self.vbasis.distance(&moved), out.abs().max())
    }
}

/// Solve `[Bd, −V; Dd, 0]·[uᵢ; xᵢ] = [−Ad·vᵢ; −Cd·vᵢ]` for every basis
/// vector of `V` and set `Fd = U·Vᵀ`.
pub fn nulling_friend(d: &DiscreteSystem, v: &Subspace) -> Result<NullingFriend> {
    let n = d.n();
    let m = d.m();
    let k = v.dim();
    let vb = v.basis();
    if k == 0 {
        return Ok(NullingFriend {
            fd: Matrix::zeros(m, n),
            vbasis: v.clone(),
        });
    }
    let mut sys = Matrix::zeros(n + m, m + k);
    sys.view_mut((0, 0), (n, m)).copy_from(&d.bd);
    sys.view_mut((0, m), (n, k)).copy_from(&(-vb));
    sys.view_mut((n, 0), (m, m)).copy_from(&d.dd);
    let mut rhs = Matrix::zeros(n + m, k);
    rhs.view_mut((0, 0), (n, k)).copy_from(&(-(&d.ad * vb)));
    rhs.view_mut((n, 0), (m, k)).copy_from(&(-(&d.cd * vb)));

    let svd = sys.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let sol = svd
        .solve(&rhs, 1e-12 * smax.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Consistency(format!("least-squares solve failed: {e}")))?;
    let resid = (&sys * &sol - &rhs).abs().max();
    let scale = 1.0_f64.max(rhs.abs().max());
    if resid > 1e-10 * scale {
        return Err(Error::Consistency(format!(
            "subspace is not output-nulling: residual {resid:e}"
        )));
    }
    let u = sol.rows(0, m).clone_owned();
    Ok(NullingFriend {
        fd: u * vb.transpose(),
        vbasis: v.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceOptions {
    /// Upper end of the real `s₀` scan; `50/p` when `None`.
    pub s0_max: Option<f64>,
    /// Relative rank threshold.
    pub tol: f64,
    /// Largest 1-norm condition number accepted for `T₁` and `T`.
    pub cond_limit: f64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            s0_max: None,
            tol: DEFAULT_TOL,
            cond_limit: 1e8,
        }
    }
}

/// Boundary system of the zero dynamics:
/// `Kw·w(0,t) + Lw·w(1,t) = 0` on `k` channels with the same travel time,
/// and the input that keeps `y ≡ 0`: `u = Ku_tilde·w(0,t) + Lu_tilde·w(1,t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroDynamicsResult {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub p: f64,
    #[serde(rename = "Kw", with = "rows")]
    pub kw: Matrix,
    #[serde(rename = "Lw", with = "rows")]
    pub lw: Matrix,
    /// Unit rows in original channel coordinates; the reduced channels live
    /// on their common kernel.
    #[serde(with = "rows")]
    pub constraints: Matrix,
    /// `T·P` of every iteration, sizes `n, n−1, …, k+1`.
    #[serde(with = "chain")]
    pub transform_chain: Vec<Matrix>,
    #[serde(rename = "Ku_tilde", with = "rows")]
    pub ku_tilde: Matrix,
    #[serde(rename = "Lu_tilde", with = "rows")]
    pub lu_tilde: Matrix,
    pub s0_used: Vec<f64>,
    /// `‖Kw + Lw·e^{−s₀p} − I‖max` of every iteration.
    #[serde(default)]
    pub identity_residuals: Vec<f64>,
    pub full_state: bool,
}

mod chain {
    use super::{rows, Matrix};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Matrix], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(rows::to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Matrix>, D::Error> {
        let raw = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        raw.iter()
            .map(|m| rows::from_rows(m, 0).map_err(serde::de::Error::custom))
            .collect()
    }
}

impl ZeroDynamicsResult {
    /// `M`, the `k × n` map from original channels to reduced channels.
    pub fn coordinates(&self) -> Matrix {
        let mut m = Matrix::identity(self.n, self.n);
        for c in &self.transform_chain {
            let cm = c * &m;
            m = cm.rows(0, cm.nrows() - 1).clone_owned();
        }
        m
    }

    /// `N`, the `n × k` embedding of reduced channels into original ones;
    /// `M·N = I`.
    pub fn embedding(&self) -> Result<Matrix> {
        let mut e = Matrix::identity(self.n, self.n);
        for c in &self.transform_chain {
            let inv = inverse(c)?;
            e *= inv.columns(0, inv.ncols() - 1);
        }
        Ok(e)
    }

    /// One-step map `−Kw⁻¹·Lw` of the reduced system.
    pub fn reduced_step(&self) -> Result<Matrix> {
        Ok(-solve(&self.kw, &self.lw)?)
    }

    /// Zeroing input as functionals on the original traces:
    /// `u = Fa·z(0,t) + Fb·z(1,t)` on the zero dynamics.
    pub fn zeroing_functional(&self) -> (Matrix, Matrix) {
        let m = self.coordinates();
        (&self.ku_tilde * &m, &self.lu_tilde * &m)
    }

    /// Feedback `u_d(n) = F·z_d(n)` on outflow traces that realizes the
    /// zeroing input.
    pub fn zeroing_feedback(&self) -> Result<Matrix> {
        let step = self.reduced_step()?;
        Ok((&self.ku_tilde * step + &self.lu_tilde) * self.coordinates())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut r: ZeroDynamicsResult = serde_json::from_str(text).map_err(map_json_error)?;
        // Empty row lists carry no column count.
        if r.constraints.nrows() == 0 {
            r.constraints = Matrix::zeros(0, r.n);
        }
        if r.kw.nrows() == 0 {
            r.kw = Matrix::zeros(0, 0);
            r.lw = Matrix::zeros(0, 0);
        }
        let expect = [
            ("Kw", r.kw.shape(), (r.k, r.k)),
            ("Lw", r.lw.shape(), (r.k, r.k)),
            ("constraints", r.constraints.shape(), (r.n - r.k.min(r.n), r.n)),
            ("Ku_tilde", r.ku_tilde.shape(), (r.m, r.k)),
            ("Lu_tilde", r.lu_tilde.shape(), (r.m, r.k)),
        ];
        for (field, got, want) in expect {
            if got != want {
                return Err(Error::schema(
                    field,
                    format!("is {}x{}, expected {}x{}", got.0, got.1, want.0, want.1),
                ));
            }
        }
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Unit norm, first clearly nonzero entry positive.
fn normalize_row(row: &Matrix) -> Matrix {
    let norm = row.norm();
    if norm == 0.0 {
        return row.clone();
    }
    let mut r = row / norm;
    if let Some(first) = r.iter().copied().find(|v| v.abs() > 1e-12) {
        if first < 0.0 {
            r = -r;
        }
    }
    r
}

struct Step {
    kw: Matrix,
    lw: Matrix,
    chain: Matrix,
    s0: f64,
    residual: f64,
}

fn swap_permutation(dim: usize, col: usize) -> Matrix {
    let mut p = Matrix::identity(dim, dim);
    if col != dim - 1 {
        p.swap_columns(col, dim - 1);
    }
    p
}

/// Leading block of `U·P` with column `col` moved to the end.
fn leading_block(u: &Matrix, col: usize) -> Matrix {
    let dim = u.nrows();
    let up = u * swap_permutation(dim, col);
    up.view((0, 0), (dim - 1, dim - 1)).clone_owned()
}

fn reduction_step(k: &Matrix, l: &Matrix, p: f64, opts: &ReduceOptions) -> Result<Step> {
    let dim = k.nrows();
    let lu = lu_decompose_with_tol(k, opts.tol);
    if lu.rank() + 1 != dim {
        return Err(Error::Consistency(format!(
            "reduction expects rank {} for the stacked boundary matrix, found {}",
            dim - 1,
            lu.rank()
        )));
    }
    // L̃ = Ml⁻¹·P_lu·L.
    let lt = solve(&lu.lower, &lu.permute_rows(l))?;
    let u = &lu.upper;

    // The echelon free column first; then every other column whose removal
    // leaves an invertible leading block, largest |det| first.
    let primary = lu.free_cols()[0];
    let mut fallbacks: Vec<(usize, f64)> = (0..dim)
        .filter(|&c| c != primary)
        .filter_map(|c| {
            let blk = leading_block(u, c);
            (condition_1(&blk) < opts.cond_limit).then(|| (c, blk.determinant().abs()))
        })
        .collect();
    fallbacks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let candidates = std::iter::once(primary).chain(fallbacks.into_iter().map(|(c, _)| c));

    let s0_max = opts.s0_max.unwrap_or(50.0 / p);
    let scans = (s0_max * 2.0 * p).floor().max(0.0) as usize;
    let mut identity_violation = None;
    for col in candidates {
        let perm = swap_permutation(dim, col);
        let up = u * &perm;
        let lp = &lt * &perm;
        let h = dim - 1;
        let k11 = up.view((0, 0), (h, h));
        let k12 = up.view((0, h), (h, 1));
        let l11 = lp.view((0, 0), (h, h));
        let l12 = lp.view((0, h), (h, 1));
        let l21 = lp.view((h, 0), (1, h));
        let l22 = lp.view((h, h), (1, 1));
        for j in 0..=scans {
            let s0 = j as f64 * 0.5 / p;
            let e = (-s0 * p).exp();
            let t1 = k11 + l11 * e;
            if condition_1(&t1) >= opts.cond_limit {
                continue;
            }
            let mut t = Matrix::zeros(dim, dim);
            t.view_mut((0, 0), (h, h)).copy_from(&t1);
            t.view_mut((0, h), (h, 1)).copy_from(&(k12 + l12 * e));
            t.view_mut((h, 0), (1, h)).copy_from(&(l21 * e));
            t.view_mut((h, h), (1, 1)).copy_from(&(l22 * e));
            if condition_1(&t) >= opts.cond_limit {
                continue;
            }
            let (x11, x21) = schur_block_inverse(&t, h)?;
            let kw = k11 * &x11 + k12 * &x21;
            let lw = l11 * &x11 + l12 * &x21;
            let dev = (&kw + &lw * e - Matrix::identity(h, h)).abs().max();
            if dev > 1e-9 {
                identity_violation = Some(dev);
                continue;
            }
            return Ok(Step {
                kw,
                lw,
                chain: t * perm.transpose(),
                s0,
                residual: dev,
            });
        }
    }
    match identity_violation {
        Some(dev) => Err(Error::Consistency(format!(
            "Kw + Lw·e^(-s0 p) deviates from I by {dev:e}"
        ))),
        None => Err(Error::S0Exhausted { s_max: s0_max }),
    }
}

/// Boundary system of the zero dynamics.
///
/// When `[K0; Ky]` is invertible the zero dynamics live on the full state
/// space and the result is read off directly. Otherwise (single input only)
/// one coordinate is eliminated per iteration until the boundary matrix of
/// `z(0,t)` has full rank.
pub fn reduce(sys: &PHSystem, opts: &ReduceOptions) -> Result<ZeroDynamicsResult> {
    if !check_well_posed(sys) {
        return Err(Error::IllPosed);
    }
    let n = sys.n;
    let mut cur_k = sys.k_nulled();
    let mut cur_l = sys.l_nulled();
    if rank(&cur_k, opts.tol) == n {
        return Ok(ZeroDynamicsResult {
            n,
            m: sys.m,
            k: n,
            p: sys.p,
            kw: cur_k,
            lw: cur_l,
            constraints: Matrix::zeros(0, n),
            transform_chain: Vec::new(),
            ku_tilde: sys.ku.clone(),
            lu_tilde: sys.lu.clone(),
            s0_used: Vec::new(),
            identity_residuals: Vec::new(),
            full_state: true,
        });
    }
    if sys.m != 1 {
        return Err(Error::Unsupported(format!(
            "zero dynamics of a {}-input system with singular [K0; Ky]",
            sys.m
        )));
    }

    let mut coords = Matrix::identity(n, n);
    let mut embed = Matrix::identity(n, n);
    let mut chain = Vec::new();
    let mut s0_used = Vec::new();
    let mut identity_residuals = Vec::new();
    let mut constraints: Vec<Matrix> = Vec::new();
    let mut dim = n;
    while dim > 0 && rank(&cur_k, opts.tol) < dim {
        let step = reduction_step(&cur_k, &cur_l, sys.p, opts)?;
        let cm = &step.chain * &coords;
        constraints.push(normalize_row(&cm.rows(dim - 1, 1).clone_owned()));
        coords = cm.rows(0, dim - 1).clone_owned();
        let inv = inverse(&step.chain)?;
        embed *= inv.columns(0, dim - 1);
        chain.push(step.chain);
        s0_used.push(step.s0);
        identity_residuals.push(step.residual);
        cur_k = step.kw;
        cur_l = step.lw;
        dim -= 1;
    }

    let mut cons = Matrix::zeros(constraints.len(), n);
    for (i, r) in constraints.iter().enumerate() {
        cons.set_row(i, &r.row(0));
    }
    Ok(ZeroDynamicsResult {
        n,
        m: sys.m,
        k: dim,
        p: sys.p,
        ku_tilde: &sys.ku * &embed,
        lu_tilde: &sys.lu * &embed,
        kw: cur_k,
        lw: cur_l,
        constraints: cons,
        transform_chain: chain,
        s0_used,
        identity_residuals,
        full_state: false,
    })
}

/// Largest deviation between two trace functionals `u = Fa·z(0) + Fb·z(1)`
/// and `u = Ga·z(0) + Gb·z(1)` over trace pairs compatible with the zero
/// dynamics: `z(0), z(1) ∈ V*` and `[K0; Ky]·z(0) + [L0; Ly]·z(1) = 0`.
/// The maximum is taken over an orthonormal basis of such pairs.
pub fn trace_functional_deviation(
    sys: &PHSystem,
    vstar: &Subspace,
    f: (&Matrix, &Matrix),
    g: (&Matrix, &Matrix),
) -> Result<f64> {
    let vb = vstar.basis();
    let d = vb.ncols();
    if d == 0 {
        return Ok(0.0);
    }
    let mut bnd = Matrix::zeros(sys.n, 2 * d);
    bnd.view_mut((0, 0), (sys.n, d)).copy_from(&(sys.k_nulled() * vb));
    bnd.view_mut((0, d), (sys.n, d)).copy_from(&(sys.l_nulled() * vb));
    let pairs = nullspace(&bnd, DEFAULT_TOL);
    let mut diff = Matrix::zeros(f.0.nrows(), 2 * d);
    diff.view_mut((0, 0), (f.0.nrows(), d)).copy_from(&((f.0 - g.0) * vb));
    diff.view_mut((0, d), (f.0.nrows(), d)).copy_from(&((f.1 - g.1) * vb));
    Ok((diff * pairs.basis()).abs().max())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheckReport {
    pub vstar_dim: usize,
    pub k: usize,
    pub constraint_residual: f64,
    /// Finite roots `w` of `det(Kw + Lw·w)`.
    pub reduced_roots: Vec<num_complex::Complex64>,
    /// Finite roots `w` of the stacked determinant.
    pub scanned_roots: Vec<num_complex::Complex64>,
    pub max_root_mismatch: f64,
}

/// Compare the subspace route with the reduction route.
pub fn cross_check(sys: &PHSystem) -> Result<CrossCheckReport> {
    let zd = reduce(sys, &ReduceOptions::default())?;
    if sys.m != 1 && !zd.full_state {
        return Err(Error::Unsupported("cross check needs a single-input system".into()));
    }
    let v = vstar_of_system(sys)?;
    if v.dim() != zd.k {
        return Err(Error::Consistency(format!(
            "dim V* = {} but reduction leaves k = {}",
            v.dim(),
            zd.k
        )));
    }
    let constraint_residual = (&zd.constraints * v.basis()).abs().max();
    if constraint_residual > 1e-10 {
        return Err(Error::Consistency(format!(
            "constraint rows leave V* by {constraint_residual:e}"
        )));
    }
    let hint = zd.s0_used.last().map(|s0| (-s0 * sys.p).exp());
    let reduced = pencil_roots(&zd.kw, &zd.lw, hint)?;
    let scanned = pencil_roots(&sys.k_nulled(), &sys.l_nulled(), None)?;
    if reduced.identically_zero || scanned.identically_zero {
        return Err(Error::Consistency("determinant vanishes identically".into()));
    }
    if reduced.roots.len() != scanned.roots.len() {
        return Err(Error::Consistency(format!(
            "reduced system has {} zeros, stacked determinant has {}",
            reduced.roots.len(),
            scanned.roots.len()
        )));
    }
    let mut unmatched = scanned.roots.clone();
    let mut max_root_mismatch: f64 = 0.0;
    for r in &reduced.roots {
        let (idx, dist) = unmatched
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (w - r).norm() / r.norm().max(1.0)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("same root count");
        unmatched.remove(idx);
        max_root_mismatch = max_root_mismatch.max(dist);
        let s = w_to_s(*r, sys.p);
        match is_transmission_zero(sys, s, 1e-8) {
            Ok(true) | Err(Error::Singular(_)) => {}
            Ok(false) => {
                return Err(Error::Consistency(format!(
                    "reduced root w = {r} is not a transmission zero"
                )))
            }
            Err(e) => return Err(e),
        }
    }
    if max_root_mismatch > 1e-6 {
        return Err(Error::Consistency(format!(
            "zeros differ between routes by {max_root_mismatch:e}"
        )));
    }
    Ok(CrossCheckReport {
        vstar_dim: v.dim(),
        k: zd.k,
        constraint_residual,
        reduced_roots: reduced.roots,
        scanned_roots: scanned.roots,
        max_root_mismatch,
    })
}

/// `discrete_reduce` followed by the friend for `V*`.
pub fn friend_of_system(sys: &PHSystem) -> Result<(DiscreteSystem, NullingFriend)> {
    let d = discrete_reduce(sys)?;
    let v = vstar_of_system(sys)?;
    let f = nulling_friend(&d, &v)?;
    Ok((d, f))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, d: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, d)
    }

    fn split_example() -> PHSystem {
        PHSystem::new(
            1.0,
            m(2, 3, &[1., 0., 1., 0., 1., 0.]),
            m(2, 3, &[1., 0., 0., 0., 0., -1.]),
            m(1, 3, &[0., 0., 1.]),
            m(1, 3, &[0., 0., 0.]),
            m(1, 3, &[0., 0., 0.]),
            m(1, 3, &[1., 1., 0.]),
        )
        .unwrap()
    }

    fn cyclic_example() -> PHSystem {
        PHSystem::new(
            1.0,
            m(2, 3, &[0., 0., -1., -1., 0., 0.]),
            m(2, 3, &[1., 0., 0., 0., 1., 0.]),
            m(1, 3, &[0., -1., 0.]),
            m(1, 3, &[0., 0., 1.]),
            m(1, 3, &[0., 0., 0.]),
            m(1, 3, &[1., 0., 0.]),
        )
        .unwrap()
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).abs().max() <= tol
    }

    #[test]
    fn vstar_split_example() {
        let v = vstar_of_system(&split_example()).unwrap();
        assert_eq!(v.dim(), 2);
        assert!(v.contains(&m(3, 1, &[1., -1., 0.])));
        assert!(v.contains(&m(3, 1, &[0., 0., 1.])));
        let d = discrete_reduce(&split_example()).unwrap();
        assert!(vstar_from_quadruple(&d).unwrap().same_as(&v));
    }

    #[test]
    fn vstar_cyclic_example() {
        let v = vstar_of_system(&cyclic_example()).unwrap();
        assert_eq!(v.dim(), 1);
        assert!(v.contains(&m(3, 1, &[0., 0., 1.])));
        let d = discrete_reduce(&cyclic_example()).unwrap();
        assert!(vstar_from_quadruple(&d).unwrap().same_as(&v));
    }

    #[test]
    fn vstar_without_constraints_is_full() {
        let e = Matrix::zeros(2, 2);
        assert_eq!(vstar_discrete(&e, &e).unwrap().dim(), 2);
        let d = DiscreteSystem {
            ad: m(2, 2, &[0.3, 1., 0., 0.2]),
            bd: m(2, 1, &[1., 0.]),
            cd: Matrix::zeros(1, 2),
            dd: Matrix::zeros(1, 1),
            p: 1.0,
        };
        assert_eq!(vstar_from_quadruple(&d).unwrap().dim(), 2);
    }

    #[test]
    fn vstar_full_rank_output_is_trivial() {
        let d = DiscreteSystem {
            ad: m(2, 2, &[2., 1., 0., 3.]),
            bd: m(2, 2, &[1., 0., 0., 1.]),
            cd: Matrix::identity(2, 2),
            dd: Matrix::zeros(2, 2),
            p: 1.0,
        };
        assert_eq!(vstar_from_quadruple(&d).unwrap().dim(), 0);
    }

    #[test]
    fn friend_on_examples() {
        let (d, f) = friend_of_system(&split_example()).unwrap();
        let (inv, out) = f.residuals(&d);
        assert!(inv <= 1e-10 && out <= 1e-10);
        // u = v3 − v1 on V.
        let v = m(3, 1, &[1., -1., 0.5]);
        let u = &f.fd * &v;
        assert!((u[(0, 0)] - (0.5 - 1.0)).abs() < 1e-12);

        let (d, f) = friend_of_system(&cyclic_example()).unwrap();
        let (inv, out) = f.residuals(&d);
        assert!(inv <= 1e-10 && out <= 1e-10);
        assert!(close(&f.fd, &m(1, 3, &[0., 0., 1.]), 1e-12));
    }

    #[test]
    fn friend_for_zero_subspace() {
        let d = discrete_reduce(&split_example()).unwrap();
        let f = nulling_friend(&d, &Subspace::zero(3, DEFAULT_TOL)).unwrap();
        assert_eq!(f.fd, Matrix::zeros(1, 3));
    }

    #[test]
    fn friend_rejects_non_nulling_subspace() {
        let d = discrete_reduce(&split_example()).unwrap();
        let v = Subspace::span(&m(3, 1, &[1., 0., 0.]), DEFAULT_TOL);
        // y = v1 + v2 ≠ 0 and Dd = 0: no input helps.
        assert!(matches!(nulling_friend(&d, &v), Err(Error::Consistency(_))));
    }

    #[test]
    fn reduce_split_example() {
        let sys = split_example();
        let zd = reduce(&sys, &ReduceOptions::default()).unwrap();
        assert_eq!(zd.k, 2);
        assert!(!zd.full_state);
        assert_eq!(zd.s0_used, vec![0.0]);
        assert!(close(
            &zd.transform_chain[0],
            &m(3, 3, &[2., 0., 1., 0., 1., -1., 1., 1., 0.]),
            1e-12
        ));
        assert!(close(&zd.kw, &m(2, 2, &[0., -1., -1., -1.]), 1e-12));
        assert!(close(&zd.lw, &m(2, 2, &[1., 1., 1., 2.]), 1e-12));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&zd.constraints, &m(1, 3, &[h, h, 0.]), 1e-12));
        assert!(close(&(zd.coordinates() * zd.embedding().unwrap()), &Matrix::identity(2, 2), 1e-12));

        let v = vstar_of_system(&sys).unwrap();
        let (fa, fb) = zd.zeroing_functional();
        let dev = trace_functional_deviation(&sys, &v, (&fa, &fb), (&sys.ku, &sys.lu)).unwrap();
        assert!(dev < 1e-12);
    }

    #[test]
    fn reduce_cyclic_example() {
        let sys = cyclic_example();
        let zd = reduce(&sys, &ReduceOptions::default()).unwrap();
        assert_eq!(zd.k, 1);
        assert_eq!(zd.transform_chain.len(), 2);
        assert!(close(
            &zd.transform_chain[0],
            &m(3, 3, &[-1., 1., 0., 1., 0., -1., 1., 0., 0.]),
            1e-12
        ));
        assert!(close(&zd.transform_chain[1], &m(2, 2, &[0., 1., 1., 0.]), 1e-12));
        assert!(close(&zd.kw, &m(1, 1, &[1.]), 1e-12));
        assert!(close(&zd.lw, &m(1, 1, &[0.]), 1e-12));
        let span = Subspace::span(&zd.constraints.transpose(), DEFAULT_TOL);
        assert!(span.same_as(&Subspace::span(&m(3, 2, &[1., 0., 0., 1., 0., 0.]), DEFAULT_TOL)));
    }

    #[test]
    fn full_state_path() {
        let sys = PHSystem::new(
            1.0,
            m(1, 2, &[1., 0.]),
            m(1, 2, &[0., 0.5]),
            m(1, 2, &[0., 1.]),
            m(1, 2, &[0., 0.]),
            m(1, 2, &[0., 2.]),
            m(1, 2, &[1., 0.]),
        )
        .unwrap();
        let zd = reduce(&sys, &ReduceOptions::default()).unwrap();
        assert!(zd.full_state);
        assert_eq!(zd.k, 2);
        assert_eq!(zd.kw, sys.k_nulled());
        assert_eq!(zd.ku_tilde, sys.ku);
    }

    #[test]
    fn cross_check_examples() {
        let r = cross_check(&split_example()).unwrap();
        assert_eq!((r.vstar_dim, r.k), (2, 2));
        assert_eq!(r.reduced_roots.len(), 2);
        let r = cross_check(&cyclic_example()).unwrap();
        assert_eq!((r.vstar_dim, r.k), (1, 1));
        assert!(r.reduced_roots.is_empty());
    }

    #[test]
    fn identically_zero_transfer_exhausts_scan() {
        let mut sys = split_example();
        sys.ly = Matrix::zeros(1, 3);
        let opts = ReduceOptions {
            s0_max: Some(3.0),
            ..Default::default()
        };
        assert!(matches!(reduce(&sys, &opts), Err(Error::S0Exhausted { .. })));
    }

    #[test]
    fn result_json_round_trip() {
        for sys in [split_example(), cyclic_example()] {
            let zd = reduce(&sys, &ReduceOptions::default()).unwrap();
            let back = ZeroDynamicsResult::from_json(&zd.to_json()).unwrap();
            assert_eq!(back, zd);
        }
    }
}
