#![allow(dead_code)]

pub mod checks;

use std::path::PathBuf;

use phzero_core::canonicalize::{split_commensurate_with_layout, SplitLayout};
use phzero_core::ensemble::rng;
use phzero_core::linalg::Matrix;
use phzero_core::model::{MultiSpeedSystem, PHSystem, SystemDocument};
use phzero_core::sim::{simulate, simulate_multispeed, split_profile};
use rand::Rng;

pub const CORPUS: [&str; 4] = ["ex31_presplit.json", "ex52.json", "ex53_reconciled.json", "ex54.json"];

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

pub fn load(name: &str) -> SystemDocument {
    SystemDocument::load(corpus_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every corpus entry as a uniform-speed system (multi-speed ones are split).
pub fn uniform_corpus() -> Vec<(&'static str, PHSystem)> {
    CORPUS
        .iter()
        .map(|&name| {
            let sys = match load(name) {
                SystemDocument::Uniform(s) => s,
                SystemDocument::MultiSpeed(ms) => phzero_core::canonicalize::split_commensurate(&ms).unwrap(),
            };
            (name, sys)
        })
        .collect()
}

pub fn uniform(name: &str) -> PHSystem {
    match load(name) {
        SystemDocument::Uniform(s) => s,
        SystemDocument::MultiSpeed(_) => panic!("{name} is multi-speed"),
    }
}

pub fn mat(r: usize, c: usize, d: &[f64]) -> Matrix {
    Matrix::from_row_slice(r, c, d)
}

/// Largest principal angle distance between the row spans of `a` and `b`.
pub fn row_span_gap(a: &Matrix, b: &Matrix) -> f64 {
    let qa = a.transpose().qr().q();
    let qb = b.transpose().qr().q();
    let pa = &qa * qa.transpose();
    let pb = &qb * qb.transpose();
    (pa - pb).abs().max()
}

/// Largest output gap between the multi-speed simulator and the split
/// uniform system driven by the same initial data and inputs.
pub fn io_gap(ms: &MultiSpeedSystem, grid: usize, steps: usize, seed: u64) -> f64 {
    let (sys, layout): (_, SplitLayout) = split_commensurate_with_layout(ms).unwrap();
    let (tn, td) = layout.travel_time;
    assert_eq!(sys.p, tn as f64 / td as f64);
    let mut r = rng(seed);
    let initial: Vec<Vec<f64>> = layout
        .segments
        .iter()
        .map(|segs| (0..segs.len() * grid).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let ticks = steps * grid;
    let u: Vec<Vec<f64>> = (0..ticks)
        .map(|_| (0..ms.m).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();

    let y_ms = simulate_multispeed(ms, &initial, &mut |t| u[t].clone(), ticks).unwrap();
    let z0 = split_profile(&layout, &initial, grid).unwrap();
    let mut input = |step: usize, _: &Matrix| Matrix::from_fn(ms.m, grid, |i, j| u[step * grid + j][i]);
    let traj = simulate(&sys, &z0, &mut input, steps).unwrap();
    assert!(traj.max_abs_output() > 1e-3, "outputs vanish; the comparison would be vacuous");
    let mut gap: f64 = 0.0;
    for (step, y) in traj.outputs.iter().enumerate() {
        for j in 0..grid {
            for i in 0..ms.m {
                gap = gap.max((y[(i, j)] - y_ms[(i, step * grid + j)]).abs());
            }
        }
    }
    gap
}
