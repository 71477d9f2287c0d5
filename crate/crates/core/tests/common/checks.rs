//! Ensemble checks shared by the acceptance target and the regular suites.

use num_complex::Complex64;
use phzero_core::analysis::{
    discrete_reduce, feedthrough, is_exponentially_stable, is_transmission_zero, scan_zeros,
    transfer_eval, ZeroScanOptions,
};
use phzero_core::ensemble::{profile, profile_in, random_siso, random_square, random_stable, rng};
use phzero_core::linalg::{inverse, Matrix};
use phzero_core::model::PHSystem;
use phzero_core::sim::{simulate, simulate_zeroing, Feedback, ZeroInput};
use phzero_core::zerodyn::{reduce, vstar_from_quadruple, vstar_of_system, ReduceOptions};
use phzero_core::Error;
use rand::Rng;

fn singular_values(m: &Matrix) -> (f64, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    (sv.min(), sv.max())
}

/// Scale-aware invertibility verdict. `None` when the sample sits between
/// the two thresholds.
fn verdict(sigma_min: f64, scale: f64) -> Option<bool> {
    if sigma_min <= 1e-8 * scale {
        Some(false)
    } else if scale <= 1e6 * sigma_min {
        Some(true)
    } else {
        None
    }
}

#[derive(Debug, Default)]
pub struct FeedthroughStats {
    pub samples: usize,
    pub decided: usize,
    pub violations: usize,
    pub invertible: usize,
}

/// `E` invertible ⇔ `[K0; Ky]` invertible on random square systems.
///
/// `E = Ky·X` with `X = K⁻¹·[0; I]`, so `E` is judged against
/// `‖Ky‖·‖X‖` rather than its own norm: a roundoff-sized `E` is singular.
pub fn feedthrough_equivalence(seed: u64, samples: usize) -> FeedthroughStats {
    let mut r = rng(seed);
    let mut st = FeedthroughStats {
        samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let sys = random_square(&mut r, 6, 2);
        let e = feedthrough(&sys).unwrap();
        let mut inj = Matrix::zeros(sys.n, sys.m);
        inj.view_mut((sys.n - sys.m, 0), (sys.m, sys.m)).fill_with_identity();
        let x = inverse(&sys.k()).unwrap() * inj;
        let e_scale = singular_values(&sys.ky).1 * singular_values(&x).1;
        let e_verdict = verdict(singular_values(&e).0, e_scale);
        let (smin, smax) = singular_values(&sys.k_nulled());
        let s_verdict = verdict(smin, smax);
        if let (Some(a), Some(b)) = (e_verdict, s_verdict) {
            st.decided += 1;
            if a != b {
                st.violations += 1;
            }
            if a {
                st.invertible += 1;
            }
        }
    }
    st
}

#[derive(Debug, Default)]
pub struct RouteStats {
    pub samples: usize,
    pub violations: usize,
    pub exhausted: usize,
    pub exhausted_unconfirmed: usize,
}

/// Boundary-pencil `V*`, quadruple `V*` and reduction depth agree.
pub fn route_equivalence(seed: u64, samples: usize) -> RouteStats {
    let mut r = rng(seed);
    let mut st = RouteStats {
        samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let sys = random_siso(&mut r, 6);
        let a = vstar_of_system(&sys).unwrap().dim();
        let b = vstar_from_quadruple(&discrete_reduce(&sys).unwrap()).unwrap().dim();
        match reduce(&sys, &ReduceOptions::default()) {
            Ok(zd) => {
                if a != b || b != zd.k {
                    st.violations += 1;
                }
            }
            Err(Error::S0Exhausted { .. }) => {
                st.exhausted += 1;
                let scan = scan_zeros(&sys, ZeroScanOptions::default()).unwrap();
                if !scan.identically_zero {
                    st.exhausted_unconfirmed += 1;
                }
                if a != b {
                    st.violations += 1;
                }
            }
            Err(_) => st.violations += 1,
        }
    }
    st
}

/// `L²` norm of a sampled profile.
pub fn l2(z: &Matrix) -> f64 {
    (z.norm_squared() / z.ncols() as f64).sqrt()
}

#[derive(Debug, Default)]
pub struct CertificateStats {
    /// Worst `max|y| / ‖z0‖` in closed loop, over both feedback routes.
    pub worst_closed: f64,
    /// Smallest `max|y| / ‖z0‖` for generic profiles and `u = 0`.
    pub weakest_open: f64,
}

/// Closed-loop zero output from `V*` and nonzero open-loop output from
/// generic profiles.
pub fn zero_output_certificate(sys: &PHSystem, seed: u64, profiles: usize, grid: usize, steps: usize) -> CertificateStats {
    let mut r = rng(seed);
    let zd = reduce(sys, &ReduceOptions::default()).unwrap();
    let v = vstar_of_system(sys).unwrap();
    let mut st = CertificateStats {
        worst_closed: 0.0,
        weakest_open: f64::INFINITY,
    };
    for _ in 0..profiles {
        let z0 = profile_in(&mut r, v.basis(), grid);
        let norm = l2(&z0);
        for fb in [Feedback::Friend, Feedback::Reduction] {
            let t = simulate_zeroing(sys, &zd, &z0, steps, fb).unwrap();
            st.worst_closed = st.worst_closed.max(t.max_abs_output() / norm);
        }
        let z0 = profile(&mut r, sys.n, grid);
        let t = simulate(sys, &z0, &mut ZeroInput { m: sys.m }, steps).unwrap();
        st.weakest_open = st.weakest_open.min(t.max_abs_output() / l2(&z0));
    }
    st
}

#[derive(Debug, Default)]
pub struct DecayStats {
    pub samples: usize,
    pub violations: usize,
    /// Largest `‖states[s]‖ / (C·(r + 0.05)^s)` seen for `s ≥ n`.
    pub worst_ratio: f64,
}

/// Open-loop decay against `C·(r + 0.05)^s`.
///
/// `C` is fitted on the propagator over the first `n` steps,
/// `C = ‖z0‖·max_{s ≤ n} ‖Ad^s‖₂/(r + 0.05)^s`. A fit on the single
/// trajectory can land in a phase trough of a rotating mode and
/// underestimate the transient.
pub fn decay_envelope(seed: u64, samples: usize, grid: usize, steps: usize) -> DecayStats {
    let mut r = rng(seed);
    let mut st = DecayStats {
        samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let (sys, radius) = random_stable(&mut r, 6, 0.95);
        let (stable, rr) = is_exponentially_stable(&sys).unwrap();
        assert!(stable && (rr - radius).abs() < 1e-12);
        let z0 = profile(&mut r, sys.n, grid);
        let t = simulate(&sys, &z0, &mut ZeroInput { m: 1 }, steps).unwrap();
        let rate = radius + 0.05;
        let ad = discrete_reduce(&sys).unwrap().ad;
        let mut power = Matrix::identity(sys.n, sys.n);
        let mut c: f64 = 0.0;
        for s in 0..=sys.n {
            c = c.max(singular_values(&power).1 / rate.powi(s as i32));
            power = &ad * power;
        }
        c *= t.states[0].norm();
        let mut bad = false;
        for s in sys.n..=steps {
            let ratio = t.states[s].norm() / (c * rate.powi(s as i32));
            st.worst_ratio = st.worst_ratio.max(ratio);
            bad |= ratio > 1.0;
        }
        if bad {
            st.violations += 1;
        }
    }
    st
}

#[derive(Debug, Default)]
pub struct TransferStats {
    pub samples: usize,
    pub worst_relative: f64,
    pub zeros: usize,
    /// Zeros where the singularity test and `|G(s)| ≤ 1e-8` disagree.
    pub zero_disagreements: usize,
    pub worst_zero_gain: f64,
}

/// Boundary solve vs discrete resolvent at random `s`, and both zero tests
/// at every scanned zero.
pub fn transfer_consistency(sys: &PHSystem, seed: u64, samples: usize) -> TransferStats {
    let mut r = rng(seed);
    let d = discrete_reduce(sys).unwrap();
    let mut st = TransferStats {
        samples,
        ..Default::default()
    };
    let mut taken = 0;
    while taken < samples {
        let s = Complex64::new(r.random_range(-1.0..2.0), r.random_range(-10.0..10.0)) / sys.p;
        let (Ok(a), Ok(b)) = (transfer_eval(sys, s), d.transfer_resolvent(s)) else {
            continue;
        };
        taken += 1;
        let diff = (&a.value - &b).norm();
        let scale = a.value.norm().max(b.norm());
        if scale > 0.0 {
            st.worst_relative = st.worst_relative.max(diff / scale);
        }
    }
    if sys.m == 1 {
        let scan = scan_zeros(sys, ZeroScanOptions::default()).unwrap();
        for z in &scan.zeros {
            st.zeros += 1;
            let singular = is_transmission_zero(sys, z.s, 1e-8).unwrap();
            let gain = transfer_eval(sys, z.s).unwrap().value.norm();
            st.worst_zero_gain = st.worst_zero_gain.max(gain);
            if singular != (gain <= 1e-8) {
                st.zero_disagreements += 1;
            }
        }
    }
    st
}
