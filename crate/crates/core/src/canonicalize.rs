//! Rewriting a system into uniform-speed boundary form.
//!
//! The pipeline is `diagonalize_constant` (physical variables to
//! characteristic variables), `reflect_positive` (make every channel flow
//! from `ζ = 0` to `ζ = 1`) and `split_commensurate` (cut each channel into
//! segments of one common travel time).

use crate::error::{Error, Result};
use crate::linalg::{inverse, Matrix};
use crate::model::{MultiSpeedSystem, PHSystem, RationalSpeed, RawConstantSystem};

/// Characteristic coordinates `z = S·x` of a constant-coefficient system.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalizedConstant {
    /// Diagonal of speeds, positive block first.
    pub delta: Matrix,
    pub s: Matrix,
    pub k_pos: usize,
    pub l_neg: usize,
}

/// Best rational approximation of `x > 0` with denominator at most
/// `max_den`, accepted when within `rel_tol` relative error.
fn rationalize(x: f64, rel_tol: f64, max_den: u64) -> Option<(u64, u64)> {
    let (mut h0, mut h1) = (0_u64, 1_u64);
    let (mut k0, mut k1) = (1_u64, 0_u64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a > u32::MAX as f64 {
            return None;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= rel_tol * x {
            return Some((h1, k1));
        }
        let frac = v - a as f64;
        if frac == 0.0 {
            break;
        }
        v = 1.0 / frac;
    }
    if k1 > 0 && ((h1 as f64 / k1 as f64) - x).abs() <= rel_tol * x {
        Some((h1, k1))
    } else {
        None
    }
}

/// Diagonalize `P₁·H` for constant symmetric `P₁` and positive definite `H`,
/// and rewrite the boundary and output rows in characteristic variables.
///
/// The raw boundary rows act on `[(Hx)(1); (Hx)(0)]`: the first `n` columns
/// multiply the trace at `ζ = 1`.
pub fn diagonalize_constant(raw: &RawConstantSystem) -> Result<(DiagonalizedConstant, MultiSpeedSystem)> {
    let n = raw.n;
    let m = raw.wb2.nrows();
    for (name, mat, rows, cols) in [
        ("P1", &raw.p1, n, n),
        ("H", &raw.h, n, n),
        ("WB1", &raw.wb1, n.saturating_sub(m), 2 * n),
        ("WB2", &raw.wb2, m, 2 * n),
        ("WC", &raw.wc, m, 2 * n),
    ] {
        if mat.shape() != (rows, cols) {
            return Err(Error::Shape(format!(
                "{name} is {}x{}, expected {rows}x{cols}",
                mat.nrows(),
                mat.ncols()
            )));
        }
    }
    let scale = raw.p1.norm().max(f64::MIN_POSITIVE);
    if (&raw.p1 - raw.p1.transpose()).norm() > 1e-12 * scale {
        return Err(Error::Unsupported("P1 is not symmetric".into()));
    }
    if (&raw.h - raw.h.transpose()).norm() > 1e-12 * raw.h.norm() {
        return Err(Error::Unsupported("H is not symmetric".into()));
    }
    let chol = raw
        .h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Unsupported("H is not positive definite".into()))?;
    let r = chol.l();
    let sym = r.transpose() * &raw.p1 * &r;
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let ph = &raw.p1 * &raw.h;
    let ph_norm = ph.norm();
    let mut order: Vec<usize> = (0..n).collect();
    for &i in &order {
        if eig.eigenvalues[i].abs() <= 1e-10 * ph_norm {
            return Err(Error::Singular("P1·H has a zero eigenvalue".into()));
        }
    }
    // Positive speeds descending, then negative speeds by ascending magnitude.
    order.sort_by(|&a, &b| {
        let (x, y) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        match (x > 0.0, y > 0.0) {
            (true, false) => std::cmp::Ordering::Less,
            (false, true) => std::cmp::Ordering::Greater,
            (true, true) => y.total_cmp(&x).then(a.cmp(&b)),
            (false, false) => y.total_cmp(&x).then(a.cmp(&b)),
        }
    });
    let q = Matrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let speeds_f: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let s = q.transpose() * r.transpose();
    let s_inv = inverse(&s)?;
    let delta = Matrix::from_diagonal(&nalgebra::DVector::from_vec(speeds_f.clone()));

    let resid = (&s * &ph - &delta * &s).norm();
    if resid > 1e-10 * ph_norm.max(1.0) {
        return Err(Error::Consistency(format!(
            "diagonalization residual {resid:e} exceeds tolerance"
        )));
    }

    let speeds = speeds_f
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (num, den) = rationalize(v.abs(), 1e-9, 1_000_000).ok_or_else(|| {
                Error::InvalidSpeed(format!("speed {v} of channel {i} is not a simple rational"))
            })?;
            RationalSpeed::new(num, den, if v > 0.0 { 1 } else { -1 })
        })
        .collect::<Result<Vec<_>>>()?;

    let hs = &raw.h * &s_inv;
    let wb = crate::linalg::vstack(&[&raw.wb1, &raw.wb2])?;
    let at_one = |w: &Matrix| w.columns(0, n) * &hs;
    let at_zero = |w: &Matrix| w.columns(n, n) * &hs;
    let k_pos = speeds_f.iter().filter(|v| **v > 0.0).count();
    let sys = MultiSpeedSystem {
        n,
        m,
        speeds,
        k: at_zero(&wb),
        l: at_one(&wb),
        ky: at_zero(&raw.wc),
        ly: at_one(&raw.wc),
    };
    Ok((
        DiagonalizedConstant {
            delta,
            s,
            k_pos,
            l_neg: n - k_pos,
        },
        sys,
    ))
}

/// Replace every channel moving toward `ζ = 0` by its mirror image
/// `z̃(ζ) = z(1 − ζ)`, swapping its `K`/`L` and `Ky`/`Ly` columns.
pub fn reflect_positive(sys: &MultiSpeedSystem) -> MultiSpeedSystem {
    let mut out = sys.clone();
    for (j, s) in sys.speeds.iter().enumerate() {
        if s.direction > 0 {
            out.k.set_column(j, &sys.l.column(j));
            out.l.set_column(j, &sys.k.column(j));
            out.ky.set_column(j, &sys.ly.column(j));
            out.ly.set_column(j, &sys.ky.column(j));
            out.speeds[j].direction = -1;
        }
    }
    out
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Where each original channel went after splitting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitLayout {
    /// For each original channel, its new channel indices from source
    /// (`ζ = 0`) to sink (`ζ = 1`). The sink segment keeps the original slot.
    pub segments: Vec<Vec<usize>>,
    /// Common travel time as an exact fraction (numerator, denominator).
    pub travel_time: (u128, u128),
}

impl SplitLayout {
    pub fn channel_count(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }
}

fn overflow() -> Error {
    Error::InvalidSpeed("speed ratios overflow exact integer arithmetic".into())
}

/// Cut each channel into segments of the common travel time `g`, the gcd
/// of all travel times. Segment `k + 1` receives what segment `k` emits, so
/// a chaining row `z_{k+1}(0) − z_k(1) = 0` is appended to the constraints.
pub fn split_commensurate(sys: &MultiSpeedSystem) -> Result<PHSystem> {
    Ok(split_commensurate_with_layout(sys)?.0)
}

/// `split_commensurate` together with the channel layout.
pub fn split_commensurate_with_layout(sys: &MultiSpeedSystem) -> Result<(PHSystem, SplitLayout)> {
    sys.check_shapes()?;
    if let Some(i) = sys.speeds.iter().position(|s| s.direction > 0) {
        return Err(Error::InvalidSpeed(format!(
            "channel {i} moves toward ζ = 0; reflect it first"
        )));
    }
    // Travel time of channel i is den_i/num_i in lowest terms; the gcd of
    // such fractions is gcd(den)/lcm(num).
    let mut g_num: u128 = 0;
    let mut lcm: u128 = 1;
    for s in &sys.speeds {
        let (tn, td) = s.travel_time();
        g_num = gcd(g_num, tn as u128);
        let td = td as u128;
        lcm = (lcm / gcd(lcm, td)).checked_mul(td).ok_or_else(overflow)?;
    }
    let reps = sys
        .speeds
        .iter()
        .map(|s| {
            let (tn, td) = s.travel_time();
            let r = (tn as u128)
                .checked_mul(lcm / td as u128)
                .ok_or_else(overflow)?
                / g_num;
            usize::try_from(r).map_err(|_| overflow())
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = reps.iter().sum();
    if total > 100_000 {
        return Err(Error::InvalidSpeed(format!(
            "splitting needs {total} channels; speed ratios are too fine"
        )));
    }

    let n = sys.n;
    let m = sys.m;
    let mut next = n;
    let segments: Vec<Vec<usize>> = reps
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut seg: Vec<usize> = (0..r - 1).map(|k| next + k).collect();
            next += r - 1;
            seg.push(i);
            seg
        })
        .collect();
    let source = |j: usize| segments[j][0];
    let sink = |j: usize| *segments[j].last().expect("at least one segment");

    let remap = |k: &Matrix, l: &Matrix, rows: std::ops::Range<usize>| {
        let mut kk = Matrix::zeros(rows.len(), total);
        let mut ll = Matrix::zeros(rows.len(), total);
        for (out_row, row) in rows.enumerate() {
            for j in 0..n {
                kk[(out_row, source(j))] += k[(row, j)];
                ll[(out_row, sink(j))] += l[(row, j)];
            }
        }
        (kk, ll)
    };

    let (k_orig, l_orig) = remap(&sys.k, &sys.l, 0..n - m);
    let chain_count = total - n;
    let mut k_chain = Matrix::zeros(chain_count, total);
    let mut l_chain = Matrix::zeros(chain_count, total);
    let mut row = 0;
    for seg in &segments {
        for pair in seg.windows(2) {
            k_chain[(row, pair[1])] = 1.0;
            l_chain[(row, pair[0])] = -1.0;
            row += 1;
        }
    }
    let k0 = crate::linalg::vstack(&[&k_orig, &k_chain])?;
    let l0 = crate::linalg::vstack(&[&l_orig, &l_chain])?;
    let (ku, lu) = remap(&sys.k, &sys.l, n - m..n);
    let (ky, ly) = remap(&sys.ky, &sys.ly, 0..m);

    let p = g_num as f64 / lcm as f64;
    let out = PHSystem::new(p, k0, l0, ku, lu, ky, ly)?;
    Ok((
        out,
        SplitLayout {
            segments,
            travel_time: (g_num, lcm),
        },
    ))
}
