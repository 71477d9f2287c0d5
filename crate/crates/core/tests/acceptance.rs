//! Acceptance gate: one line per criterion, then a single assertion.
//!
//! Run with `cargo test -p phzero-core --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use phzero_core::analysis::{is_exponentially_stable, scan_zeros, ZeroScanOptions};
use phzero_core::canonicalize::split_commensurate_with_layout;
use phzero_core::linalg::{rank, Matrix, DEFAULT_TOL};
use phzero_core::model::SystemDocument;
use phzero_core::zerodyn::{cross_check, reduce, trace_functional_deviation, vstar_of_system, ReduceOptions};

use common::checks::{
    decay_envelope, feedthrough_equivalence, route_equivalence, transfer_consistency, zero_output_certificate,
};
use common::{io_gap, load, mat, row_span_gap, uniform, uniform_corpus};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn unit(n: usize, i: usize) -> Matrix {
    let mut r = Matrix::zeros(1, n);
    r[(0, i)] = 1.0;
    r
}

fn two_speed_split() -> Outcome {
    let SystemDocument::MultiSpeed(ms) = load("ex31_presplit.json") else {
        return Err("corpus entry is not a multi-speed document".into());
    };
    let (sys, layout) = split_commensurate_with_layout(&ms).map_err(|e| e.to_string())?;
    let matrices = sys.n == 3
        && layout.segments == vec![vec![0], vec![2, 1]]
        && sys.k() == mat(3, 3, &[1., 0., 1., 0., 1., 0., 0., 0., 1.])
        && sys.l() == mat(3, 3, &[1., 0., 0., 0., 0., -1., 0., 0., 0.])
        && sys.ky == Matrix::zeros(1, 3)
        && sys.ly == mat(1, 3, &[1., 1., 0.]);
    let gap = (0..8).map(|seed| io_gap(&ms, 32, 10, seed)).fold(0.0, f64::max);
    ensure(
        matrices && gap <= 1e-12,
        format!("matrices {}, I/O gap {gap:.1e}", if matrices { "match" } else { "differ" }),
    )
}

fn split_system_reduction() -> Outcome {
    let sys = uniform("ex52.json");
    let zd = reduce(&sys, &ReduceOptions::default()).map_err(|e| e.to_string())?;
    let span = row_span_gap(&zd.constraints, &mat(1, 3, &[1., 1., 0.]));
    let ident = zd.identity_residuals.iter().copied().fold(0.0, f64::max);
    let report = cross_check(&sys).map_err(|e| e.to_string())?;
    let scan = scan_zeros(&sys, ZeroScanOptions::default()).map_err(|e| e.to_string())?;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let want = [-1.0 - phi, phi];
    let roots_ok = report.reduced_roots.len() == 2
        && scan.zeros.len() == 2
        && report.reduced_roots.iter().zip(want).all(|(w, t)| (w.re - t).abs() <= 1e-9 && w.im.abs() <= 1e-9)
        && report
            .reduced_roots
            .iter()
            .all(|r| scan.zeros.iter().any(|z| (z.w - r).norm() <= 1e-9));
    let v = vstar_of_system(&sys).map_err(|e| e.to_string())?;
    let (fa, fb) = zd.zeroing_functional();
    let dev = trace_functional_deviation(&sys, &v, (&fa, &fb), (&unit(3, 2), &Matrix::zeros(1, 3)))
        .map_err(|e| e.to_string())?;
    ensure(
        zd.k == 2 && span <= 1e-12 && ident <= 1e-9 && roots_ok && dev <= 1e-10,
        format!(
            "k {}, span gap {span:.1e}, identity {ident:.1e}, roots {}, input gap {dev:.1e}",
            zd.k,
            if roots_ok { "match" } else { "differ" }
        ),
    )
}

fn cyclic_system_reduction() -> Outcome {
    let sys = uniform("ex53_reconciled.json");
    let zd = reduce(&sys, &ReduceOptions::default()).map_err(|e| e.to_string())?;
    let iterations = zd.transform_chain.len();
    let span = row_span_gap(&zd.constraints, &mat(2, 3, &[1., 0., 0., 0., 1., 0.]));
    let kw_ok = zd.kw.shape() == (1, 1) && zd.kw[(0, 0)].abs() > 1e-6;
    let lw = zd.lw.abs().max();
    let v = vstar_of_system(&sys).map_err(|e| e.to_string())?;
    let (fa, fb) = zd.zeroing_functional();
    let dev = trace_functional_deviation(&sys, &v, (&fa, &fb), (&Matrix::zeros(1, 3), &unit(3, 2)))
        .map_err(|e| e.to_string())?;
    ensure(
        iterations == 2 && span <= 1e-12 && kw_ok && lw <= 1e-10 && dev <= 1e-10,
        format!(
            "iterations {iterations}, span gap {span:.1e}, Kw {:?}, |Lw| {lw:.1e}, input gap {dev:.1e}",
            zd.kw.as_slice()
        ),
    )
}

fn ten_channel_reduction() -> Outcome {
    let sys = uniform("ex54.json");
    let zd = reduce(&sys, &ReduceOptions::default()).map_err(|e| e.to_string())?;
    let iterations = zd.transform_chain.len();
    let lw = zd.lw.abs().max();
    let kw_rank = rank(&zd.kw, DEFAULT_TOL);
    let mut c = Matrix::zeros(1, 10);
    c[(0, 1)] = 1.0;
    c[(0, 3)] = -2.0;
    let span = row_span_gap(&zd.constraints, &c);
    let mut fa = Matrix::zeros(1, 10);
    fa[(0, 4)] = -2.5;
    fa[(0, 7)] = 0.5;
    fa[(0, 8)] = -3.0;
    let v = vstar_of_system(&sys).map_err(|e| e.to_string())?;
    let (za, zb) = zd.zeroing_functional();
    let dev = trace_functional_deviation(&sys, &v, (&za, &zb), (&fa, &Matrix::zeros(1, 10)))
        .map_err(|e| e.to_string())?;
    ensure(
        iterations == 1 && zd.k == 9 && lw <= 1e-9 && kw_rank == 9 && span <= 1e-9 && dev <= 1e-8,
        format!(
            "iterations {iterations}, k {}, |Lw| {lw:.1e}, rank Kw {kw_rank}, span gap {span:.1e}, input gap {dev:.1e}",
            zd.k
        ),
    )
}

fn feedthrough_invertibility() -> Outcome {
    let st = feedthrough_equivalence(5, 1000);
    ensure(
        st.violations == 0 && st.decided == st.samples,
        format!(
            "{} samples, {} decided, {} invertible, {} violations",
            st.samples, st.decided, st.invertible, st.violations
        ),
    )
}

fn route_agreement() -> Outcome {
    let st = route_equivalence(6, 200);
    ensure(
        st.violations == 0 && st.exhausted_unconfirmed == 0,
        format!(
            "{} samples, {} violations, {} scan exhaustions ({} without G ≡ 0)",
            st.samples, st.violations, st.exhausted, st.exhausted_unconfirmed
        ),
    )
}

fn zero_output() -> Outcome {
    let mut worst_closed: f64 = 0.0;
    let mut weakest_open = f64::INFINITY;
    for (_, sys) in uniform_corpus() {
        let st = zero_output_certificate(&sys, 7, 50, 64, 20);
        worst_closed = worst_closed.max(st.worst_closed);
        weakest_open = weakest_open.min(st.weakest_open);
    }
    ensure(
        worst_closed <= 1e-10 && weakest_open > 1e-6,
        format!("closed loop max|y|/|z0| {worst_closed:.1e}, open loop min {weakest_open:.2}"),
    )
}

fn stability() -> Outcome {
    let mut radii = Vec::new();
    let mut marginal = true;
    for name in ["ex52.json", "ex53_reconciled.json"] {
        let (stable, r) = is_exponentially_stable(&uniform(name)).map_err(|e| e.to_string())?;
        marginal &= !stable && (r - 1.0).abs() <= 1e-12;
        radii.push(r);
    }
    let st = decay_envelope(2026, 100, 16, 40);
    ensure(
        marginal && st.violations == 0,
        format!(
            "split and cyclic r {radii:?}, not stable; {} random systems, {} envelope violations, worst ratio {:.3}",
            st.samples, st.violations, st.worst_ratio
        ),
    )
}

fn transfer() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut zeros = 0;
    let mut disagreements = 0;
    let mut gain: f64 = 0.0;
    for (_, sys) in uniform_corpus() {
        let st = transfer_consistency(&sys, 9, 100);
        worst = worst.max(st.worst_relative);
        zeros += st.zeros;
        disagreements += st.zero_disagreements;
        gain = gain.max(st.worst_zero_gain);
    }
    ensure(
        worst < 1e-10 && disagreements == 0,
        format!("relative error {worst:.1e}; {zeros} zeros, {disagreements} disagreements, max |G| {gain:.1e}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 9] = [
        ("two-speed split", two_speed_split, Some(Duration::from_secs(1))),
        ("split system reduction", split_system_reduction, Some(Duration::from_secs(1))),
        ("cyclic system reduction", cyclic_system_reduction, Some(Duration::from_secs(1))),
        ("ten-channel reduction", ten_channel_reduction, Some(Duration::from_secs(1))),
        ("feedthrough invertibility", feedthrough_invertibility, None),
        ("route equivalence", route_agreement, None),
        ("zero-output certificate", zero_output, None),
        ("stability", stability, None),
        ("transfer consistency", transfer, None),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = budget.is_some_and(|b| elapsed > b);
        let (pass, detail) = match outcome {
            Ok(d) if !over => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(d) => (false, d),
        };
        println!(
            "{} {:>2} {name}: {detail} [{:.1} ms]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64() * 1e3
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
