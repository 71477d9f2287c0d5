//! Seeded random systems for property tests and benchmarks.
//!
//! Every generator draws from a `ChaCha8Rng`, so a seed fixes the system
//! bit for bit on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{check_well_posed, discrete_reduce};
use crate::linalg::{condition_1, spectral_radius, Matrix};
use crate::model::PHSystem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Small integers in `{−2, …, 2}`, zero with probability `zero_prob`.
fn sparse_int(rng: &mut impl Rng, rows: usize, cols: usize, zero_prob: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        if rng.random_bool(zero_prob) {
            0.0
        } else {
            rng.random_range(-2..=2) as f64
        }
    })
}

/// How the output rows relate to the constraint rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputStructure {
    /// Independent dense rows: `[K0; Ky]` is generically invertible.
    Generic,
    /// `Ky` is a combination of `K0` rows: `[K0; Ky]` drops rank.
    InRowSpace,
    /// `Ky = 0`: the output reads only outflow traces.
    OutflowOnly,
    /// Sparse small-integer data with exact structural zeros.
    SparseInteger,
}

const STRUCTURES: [OutputStructure; 4] = [
    OutputStructure::Generic,
    OutputStructure::InRowSpace,
    OutputStructure::OutflowOnly,
    OutputStructure::SparseInteger,
];

fn build(rng: &mut impl Rng, n: usize, m: usize, structure: OutputStructure) -> PHSystem {
    let c = n - m;
    let (k0, l0, ku, lu, mut ky, ly) = if structure == OutputStructure::SparseInteger {
        (
            sparse_int(rng, c, n, 0.6),
            sparse_int(rng, c, n, 0.6),
            sparse_int(rng, m, n, 0.6),
            sparse_int(rng, m, n, 0.6),
            sparse_int(rng, m, n, 0.6),
            sparse_int(rng, m, n, 0.6),
        )
    } else {
        (
            uniform(rng, c, n),
            uniform(rng, c, n),
            uniform(rng, m, n),
            uniform(rng, m, n),
            uniform(rng, m, n),
            uniform(rng, m, n),
        )
    };
    match structure {
        OutputStructure::InRowSpace => ky = uniform(rng, m, c) * &k0,
        OutputStructure::OutflowOnly => ky = Matrix::zeros(m, n),
        _ => {}
    }
    PHSystem::new(1.0, k0, l0, ku, lu, ky, ly).expect("generated shapes are consistent")
}

fn acceptable(sys: &PHSystem, cond_limit: f64) -> bool {
    check_well_posed(sys) && condition_1(&sys.k()) <= cond_limit
}

/// Well-posed system with `n` channels and `m` inputs, `cond₁(K) ≤ cond_limit`.
pub fn random_system(rng: &mut impl Rng, n: usize, m: usize, structure: OutputStructure, cond_limit: f64) -> PHSystem {
    loop {
        let sys = build(rng, n, m, structure);
        if acceptable(&sys, cond_limit) {
            return sys;
        }
    }
}

/// Well-posed SISO system with `1 ≤ n ≤ max_n`, cycling through all
/// output structures.
pub fn random_siso(rng: &mut impl Rng, max_n: usize) -> PHSystem {
    let n = rng.random_range(1..=max_n);
    let s = STRUCTURES[rng.random_range(0..STRUCTURES.len())];
    random_system(rng, n, 1, s, 1e6)
}

/// Well-posed square system with `m ≤ max_m`, `m ≤ n ≤ max_n`.
pub fn random_square(rng: &mut impl Rng, max_n: usize, max_m: usize) -> PHSystem {
    let m = rng.random_range(1..=max_m.min(max_n));
    let n = rng.random_range(m..=max_n);
    let s = STRUCTURES[rng.random_range(0..STRUCTURES.len())];
    random_system(rng, n, m, s, 1e6)
}

/// Well-posed system rescaled so that `r(Ad)` is drawn uniformly in
/// `[0.05, max_radius)`. Returns the system and its spectral radius.
pub fn random_stable(rng: &mut impl Rng, max_n: usize, max_radius: f64) -> (PHSystem, f64) {
    loop {
        let n = rng.random_range(1..=max_n);
        let mut sys = random_system(rng, n, 1, OutputStructure::Generic, 1e4);
        let d = discrete_reduce(&sys).expect("well-posed by construction");
        let Ok(r) = spectral_radius(&d.ad) else { continue };
        if r < 1e-6 {
            continue;
        }
        let target = rng.random_range(0.05..max_radius);
        sys.l0 *= target / r;
        sys.lu *= target / r;
        let d = discrete_reduce(&sys).expect("scaling keeps K");
        if let Ok(r) = spectral_radius(&d.ad) {
            if r < max_radius {
                return (sys, r);
            }
        }
    }
}

/// Random profile (`n × grid` cells) inside the span of `basis`.
pub fn profile_in(rng: &mut impl Rng, basis: &Matrix, grid: usize) -> Matrix {
    basis * uniform(rng, basis.ncols(), grid)
}

/// Generic random profile.
pub fn profile(rng: &mut impl Rng, n: usize, grid: usize) -> Matrix {
    uniform(rng, n, grid)
}
