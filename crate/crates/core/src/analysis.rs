//! Well-posedness, the discrete-time quadruple, stability, the transfer
//! function and transmission zeros of a uniform-speed system.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    self, affine_pencil, det_complex, eigenvalues, rank, sigma_max, sigma_min_complex, solve,
    solve_complex, to_complex, CMatrix, Matrix, DEFAULT_TOL,
};
use crate::model::{structural_findings, PHSystem};

/// Threshold separating "stable" from "marginal" on the spectral radius.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// One traversal of the transport network as a discrete-time system:
/// `z_d(n+1) = Ad·z_d(n) + Bd·u_d(n)`, `y_d(n) = Cd·z_d(n) + Dd·u_d(n)`,
/// where `z_d(n)` holds the outflow traces `z(1,·)` over the `n`-th
/// traversal window.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub ad: Matrix,
    pub bd: Matrix,
    pub cd: Matrix,
    pub dd: Matrix,
    pub p: f64,
}

impl DiscreteSystem {
    pub fn n(&self) -> usize {
        self.ad.nrows()
    }

    pub fn m(&self) -> usize {
        self.bd.ncols()
    }

    /// `Dd + Cd·(λI − Ad)⁻¹·Bd` with `λ = e^{sp}`.
    pub fn transfer_resolvent(&self, s: Complex64) -> Result<CMatrix> {
        let n = self.n();
        let lambda = (s * self.p).exp();
        let shifted = affine_pencil(&(-&self.ad), &Matrix::identity(n, n), lambda);
        let x = solve_complex(&shifted, &to_complex(&self.bd))
            .map_err(|_| Error::Singular(format!("λ = {lambda} is an eigenvalue of Ad")))?;
        Ok(to_complex(&self.dd) + to_complex(&self.cd) * x)
    }
}

/// True iff `[K0; Ku]` has full rank at the default tolerance.
pub fn check_well_posed(sys: &PHSystem) -> bool {
    structural_findings(sys).is_empty() && rank(&sys.k(), DEFAULT_TOL) == sys.n
}

fn require_well_posed(sys: &PHSystem) -> Result<()> {
    if let Some(f) = structural_findings(sys).into_iter().next() {
        return Err(Error::Shape(f.message));
    }
    if !check_well_posed(sys) {
        return Err(Error::IllPosed);
    }
    Ok(())
}

/// `K⁻¹·[0; I_m]`, the map from inputs to inflow traces.
fn input_map(sys: &PHSystem) -> Result<Matrix> {
    let mut rhs = Matrix::zeros(sys.n, sys.m);
    for i in 0..sys.m {
        rhs[(sys.n - sys.m + i, i)] = 1.0;
    }
    solve(&sys.k(), &rhs).map_err(|_| Error::IllPosed)
}

/// High-frequency limit `E = Ky·K⁻¹·[0; I]` of the transfer function.
pub fn feedthrough(sys: &PHSystem) -> Result<Matrix> {
    require_well_posed(sys)?;
    Ok(&sys.ky * input_map(sys)?)
}

/// The discrete-time quadruple `Ad = −K⁻¹L`, `Bd = K⁻¹[0; I]`,
/// `Cd = Ky·Ad + Ly`, `Dd = Ky·Bd`.
pub fn discrete_reduce(sys: &PHSystem) -> Result<DiscreteSystem> {
    require_well_posed(sys)?;
    let k = sys.k();
    let ad = -solve(&k, &sys.l()).map_err(|_| Error::IllPosed)?;
    let bd = input_map(sys)?;
    let cd = &sys.ky * &ad + &sys.ly;
    let dd = &sys.ky * &bd;
    Ok(DiscreteSystem {
        ad,
        bd,
        cd,
        dd,
        p: sys.p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub spectral_radius: f64,
    pub sigma_max: f64,
}

/// Spectral radius verdict for a quadruple; `σ_max(Ad)` is reported alongside
/// and a disagreement between the two tests is logged.
pub fn stability_report(d: &DiscreteSystem) -> Result<StabilityReport> {
    let r = linalg::spectral_radius(&d.ad)?;
    let smax = sigma_max(&d.ad);
    let stable = r < 1.0 - STABILITY_MARGIN;
    if stable != (smax < 1.0 - STABILITY_MARGIN) {
        log::info!(
            "spectral radius {r:.6} and largest singular value {smax:.6} of Ad disagree on contractivity"
        );
    }
    Ok(StabilityReport {
        stable,
        spectral_radius: r,
        sigma_max: smax,
    })
}

/// `(stable, r(Ad))`.
pub fn is_exponentially_stable(sys: &PHSystem) -> Result<(bool, f64)> {
    let rep = stability_report(&discrete_reduce(sys)?)?;
    Ok((rep.stable, rep.spectral_radius))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferSample {
    pub s: Complex64,
    pub value: CMatrix,
}

/// `G(s)` by the boundary solve `(K + L·e^{−sp})·V = [0; I]`,
/// `G(s) = (Ky + Ly·e^{−sp})·V`.
pub fn transfer_eval(sys: &PHSystem, s: Complex64) -> Result<TransferSample> {
    require_well_posed(sys)?;
    let w = (-s * sys.p).exp();
    let pencil = affine_pencil(&sys.k(), &sys.l(), w);
    let mut rhs = CMatrix::zeros(sys.n, sys.m);
    for i in 0..sys.m {
        rhs[(sys.n - sys.m + i, i)] = Complex64::new(1.0, 0.0);
    }
    let v = solve_complex(&pencil, &rhs)
        .map_err(|_| Error::Singular(format!("K + L·e^(-sp) is singular at s = {s}")))?;
    let value = affine_pencil(&sys.ky, &sys.ly, w) * v;
    Ok(TransferSample { s, value })
}

/// `[K0 + L0·w; Ky + Ly·w]` at `w = e^{−sp}`.
fn nulled_pencil(sys: &PHSystem, w: Complex64) -> CMatrix {
    affine_pencil(&sys.k_nulled(), &sys.l_nulled(), w)
}

/// True iff the stacked constraint/output matrix `M(w)` at `w = e^{−sp}` is
/// singular: `σ_min(M(w)) ≤ tol·(‖[K0; Ky]‖ + |w|·‖[L0; Ly]‖)`.
/// Requires `K + L·e^{−sp}` to be invertible.
pub fn is_transmission_zero(sys: &PHSystem, s: Complex64, tol: f64) -> Result<bool> {
    require_well_posed(sys)?;
    let w = (-s * sys.p).exp();
    let boundary = affine_pencil(&sys.k(), &sys.l(), w);
    let bmax = boundary.clone().svd(false, false).singular_values.max();
    if sigma_min_complex(&boundary) <= 1e-14 * bmax {
        return Err(Error::Singular(format!("K + L·e^(-sp) is singular at s = {s}")));
    }
    let m = nulled_pencil(sys, w);
    let scale = sigma_max(&sys.k_nulled()) + w.norm() * sigma_max(&sys.l_nulled());
    Ok(sigma_min_complex(&m) <= tol * scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroScanOptions {
    /// Sample points on the unit circle `|w| = 1` (the imaginary axis in
    /// `s`) for the winding-number count.
    pub grid: usize,
}

impl Default for ZeroScanOptions {
    fn default() -> Self {
        ZeroScanOptions { grid: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmissionZero {
    /// Root of the determinant in `w = e^{−sp}`.
    pub w: Complex64,
    /// Principal value `−ln(w)/p`; all `s + 2πik/p` are zeros as well.
    pub s: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroScan {
    pub zeros: Vec<TransmissionZero>,
    /// The determinant vanishes for every `w`, i.e. `G ≡ 0`.
    pub identically_zero: bool,
    /// Imaginary period `2π/p` of the zero set in `s`.
    pub period: f64,
    /// Winding number of the determinant around `|w| = 1`: the number of
    /// roots with `|w| < 1` (zeros with `Re s > 0`, plus any root at
    /// `w = 0`). `None` when the grid passes too close to a root.
    pub winding: Option<i64>,
}

/// Roots of `w ↦ det(A + B·w)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PencilRoots {
    pub roots: Vec<Complex64>,
    pub identically_zero: bool,
}

/// Real shift points, distinct, ordered by preference.
fn shift_candidates(count: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut k = 1;
    while out.len() < count {
        let x = k as f64 * 0.5;
        out.push(x);
        out.push(-x);
        k += 1;
    }
    out
}

/// Newton refinement of a root of `det(A + B·w)` using
/// `f'/f = tr((A + B·w)⁻¹·B)`. Stops as soon as `|det|` stops decreasing.
fn polish(a: &Matrix, b: &Matrix, w0: Complex64) -> Complex64 {
    let bc = to_complex(b);
    let mut w = w0;
    let mut fw = det_complex(&affine_pencil(a, b, w)).norm();
    for _ in 0..20 {
        if fw == 0.0 {
            break;
        }
        let Some(x) = affine_pencil(a, b, w).lu().solve(&bc) else {
            break;
        };
        let tr = x.trace();
        if tr.norm() == 0.0 || !tr.is_finite() {
            break;
        }
        let next = w - tr.inv();
        let fnext = det_complex(&affine_pencil(a, b, next)).norm();
        if !(fnext < fw) {
            break;
        }
        let step = (next - w).norm();
        w = next;
        fw = fnext;
        if step <= 1e-16 * w.norm().max(1.0) {
            break;
        }
    }
    w
}

/// Removes the eigenvalues of `m` at `shift` by orthogonal deflation of the
/// kernel of `m − shift·I`, one block at a time. What remains carries the
/// other eigenvalues. A Jordan block would otherwise split into a ring of
/// radius `ε^{1/j}` and pass for distinct eigenvalues.
fn deflate_eigenvalue(m: &Matrix, shift: f64, tol: f64, scale: f64) -> Matrix {
    let mut cur = m.clone();
    while cur.nrows() > 0 {
        let d = cur.nrows();
        let shifted = &cur - Matrix::identity(d, d) * shift;
        let ker = linalg::nullspace_with_scale(&shifted, tol, scale);
        let k = ker.dim();
        if k == 0 {
            break;
        }
        let mut q = Matrix::zeros(d, d);
        q.columns_mut(0, k).copy_from(ker.basis());
        q.columns_mut(k, d - k).copy_from(ker.complement().basis());
        let t = q.transpose() * &cur * &q;
        cur = t.view((k, k), (d - k, d - k)).clone_owned();
    }
    cur
}

/// Finite nonzero roots of `w ↦ det(A + B·w)`.
///
/// With `A + B·w₀` invertible, `det(A + B·w) = det(A + B·w₀)·det(I + (w − w₀)·M)`
/// for `M = (A + B·w₀)⁻¹·B`, so the roots are `w₀ − 1/μ` over the nonzero
/// eigenvalues `μ` of `M`. `hint` is tried first as the shift.
pub(crate) fn pencil_roots(a: &Matrix, b: &Matrix, hint: Option<f64>) -> Result<PencilRoots> {
    let n = a.nrows();
    if n == 0 {
        return Ok(PencilRoots {
            roots: Vec::new(),
            identically_zero: false,
        });
    }
    // A degree-n polynomial that vanishes at n + 1 points vanishes everywhere.
    let mut shifts: Vec<f64> = hint.into_iter().collect();
    shifts.extend(shift_candidates(n + 1));
    let mut best: Option<(f64, f64)> = None;
    let mut singular_at = 0;
    for &w0 in &shifts {
        let c = linalg::condition_1(&(a + b * w0));
        if c.is_finite() && c < 1e12 {
            if best.is_none_or(|(_, bc)| c < bc) {
                best = Some((w0, c));
            }
            if c < 1e3 {
                break;
            }
        } else {
            singular_at += 1;
        }
    }
    let Some((w0, _)) = best else {
        return Ok(PencilRoots {
            roots: Vec::new(),
            identically_zero: singular_at > n,
        });
    };
    // Roots at infinity (μ = 0) and at w = 0 (μ = 1/w₀) are removed first.
    // The scale ties "zero" to the pencil, so a root beyond |w| ~ 1/tol·cond
    // is treated as infinite.
    let pivot = a + b * w0;
    let scale = linalg::norm_1(&linalg::inverse(&pivot)?) * linalg::norm_1(a).max(linalg::norm_1(b));
    let mut mm = deflate_eigenvalue(&solve(&pivot, b)?, 0.0, DEFAULT_TOL, scale);
    if w0 != 0.0 {
        mm = deflate_eigenvalue(&mm, 1.0 / w0, DEFAULT_TOL, scale);
    }
    let mut roots: Vec<Complex64> = eigenvalues(&mm)?
        .into_iter()
        .map(|mu| Complex64::new(w0, 0.0) - mu.inv())
        .map(|w| polish(a, b, w))
        .filter(|w| w.norm() > 1e-12)
        .map(|w| {
            if w.im.abs() <= 1e-12 * w.norm() {
                Complex64::new(w.re, 0.0)
            } else {
                w
            }
        })
        .collect();
    roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(PencilRoots {
        roots,
        identically_zero: false,
    })
}

/// Argument-principle count of the roots of `det(A + B·w)` inside `|w| < 1`.
fn winding_number(a: &Matrix, b: &Matrix, grid: usize) -> Option<i64> {
    let vals: Vec<Complex64> = (0..grid)
        .map(|k| {
            let w = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / grid as f64);
            det_complex(&affine_pencil(a, b, w))
        })
        .collect();
    let peak = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if vals.iter().any(|v| v.norm() <= 1e-8 * peak) {
        return None;
    }
    let mut total = 0.0;
    for k in 0..grid {
        let step = (vals[(k + 1) % grid] / vals[k]).arg();
        // A phase jump near ±π means the grid is too coarse to follow.
        if step.abs() > 0.75 * PI {
            return None;
        }
        total += step;
    }
    Some((total / (2.0 * PI)).round() as i64)
}

/// `s = −ln(w)/p` on the principal branch.
pub fn w_to_s(w: Complex64, p: f64) -> Complex64 {
    -w.ln() / p
}

/// Transmission zeros of a SISO system: roots in `w = e^{−sp}` of
/// `det[K0 + L0·w; Ky + Ly·w]`, a polynomial of degree at most `n`.
pub fn scan_zeros(sys: &PHSystem, opts: ZeroScanOptions) -> Result<ZeroScan> {
    require_well_posed(sys)?;
    if sys.m != 1 {
        return Err(Error::Unsupported(format!(
            "zero scan needs a single-input system, got m = {}",
            sys.m
        )));
    }
    let pr = pencil_roots(&sys.k_nulled(), &sys.l_nulled(), None)?;
    let mut zeros: Vec<TransmissionZero> = pr
        .roots
        .into_iter()
        .map(|w| TransmissionZero {
            w,
            s: w_to_s(w, sys.p),
        })
        .collect();
    zeros.sort_by(|x, y| x.s.re.total_cmp(&y.s.re).then(x.s.im.total_cmp(&y.s.im)));
    let winding = if pr.identically_zero {
        None
    } else {
        winding_number(&sys.k_nulled(), &sys.l_nulled(), opts.grid.max(8))
    };
    Ok(ZeroScan {
        zeros,
        identically_zero: pr.identically_zero,
        period: 2.0 * PI / sys.p,
        winding,
    })
}
