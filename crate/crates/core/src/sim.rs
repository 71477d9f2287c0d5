//! Exact simulation by characteristics.
//!
//! A uniform-speed system moves every profile across the interval in time
//! `p`. Sampling the outflow traces on `grid_n` cells of one traversal
//! window gives the state `z_d(n)`, and one traversal is exactly
//! `z_d(n+1) = Ad·z_d(n) + Bd·u_d(n)` applied cell by cell.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;

use crate::analysis::{discrete_reduce, DiscreteSystem};
use crate::error::{Error, Result};
use crate::linalg::{solve, Matrix};
use crate::canonicalize::SplitLayout;
use crate::model::{rows, MultiSpeedSystem, PHSystem};
use crate::zerodyn::{nulling_friend, vstar_of_system, ZeroDynamicsResult};

/// Sampled trajectory. `states` has `steps + 1` entries; `inputs` and
/// `outputs` have `steps`. Column `j` of step `s` covers the time window
/// `[(s + j/grid_n)·p, (s + (j+1)/grid_n)·p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub grid_n: usize,
    pub steps: usize,
    pub p: f64,
    #[serde(serialize_with = "ser_mats")]
    pub states: Vec<Matrix>,
    #[serde(serialize_with = "ser_mats")]
    pub inputs: Vec<Matrix>,
    #[serde(serialize_with = "ser_mats")]
    pub outputs: Vec<Matrix>,
}

fn ser_mats<S: serde::Serializer>(v: &[Matrix], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter()
        .map(rows::to_rows)
        .collect::<Vec<_>>()
        .serialize(s)
}

impl Trajectory {
    pub fn max_abs_output(&self) -> f64 {
        self.outputs
            .iter()
            .flat_map(|m| m.iter())
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    /// Long format: `kind,step,cell,channel,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,step,cell,channel,value\n");
        for (kind, mats) in [
            ("state", &self.states),
            ("input", &self.inputs),
            ("output", &self.outputs),
        ] {
            for (step, m) in mats.iter().enumerate() {
                for cell in 0..m.ncols() {
                    for ch in 0..m.nrows() {
                        writeln!(out, "{kind},{step},{cell},{ch},{:e}", m[(ch, cell)])
                            .expect("writing to a String");
                    }
                }
            }
        }
        out
    }
}

/// Source of per-step input samples.
pub trait InputProvider {
    /// `m × grid_n` samples for traversal `step`, given the current state.
    fn input(&mut self, step: usize, state: &Matrix) -> Matrix;
}

/// `u ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroInput {
    pub m: usize,
}

impl InputProvider for ZeroInput {
    fn input(&mut self, _step: usize, state: &Matrix) -> Matrix {
        Matrix::zeros(self.m, state.ncols())
    }
}

/// `u_d(n) = F·z_d(n)`.
#[derive(Debug, Clone)]
pub struct StateFeedback(pub Matrix);

impl InputProvider for StateFeedback {
    fn input(&mut self, _step: usize, state: &Matrix) -> Matrix {
        &self.0 * state
    }
}

impl<F: FnMut(usize, &Matrix) -> Matrix> InputProvider for F {
    fn input(&mut self, step: usize, state: &Matrix) -> Matrix {
        self(step, state)
    }
}

/// `z_d(0)(ζ) = z₀(1 − ζ)`: reverse the cell order.
pub fn initial_state(z0: &Matrix) -> Matrix {
    let g = z0.ncols();
    Matrix::from_fn(z0.nrows(), g, |i, j| z0[(i, g - 1 - j)])
}

/// Run the quadruple from the discrete initial state `zd0`.
pub fn simulate_discrete(
    d: &DiscreteSystem,
    zd0: &Matrix,
    u: &mut dyn InputProvider,
    steps: usize,
) -> Result<Trajectory> {
    let n = d.n();
    let m = d.m();
    let g = zd0.ncols();
    if zd0.nrows() != n {
        return Err(Error::Shape(format!(
            "initial profile has {} channels, system has {n}",
            zd0.nrows()
        )));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    let mut outputs = Vec::with_capacity(steps);
    let mut z = zd0.clone();
    for step in 0..steps {
        let ui = u.input(step, &z);
        if ui.shape() != (m, g) {
            return Err(Error::Shape(format!(
                "input at step {step} is {}x{}, expected {m}x{g}",
                ui.nrows(),
                ui.ncols()
            )));
        }
        outputs.push(&d.cd * &z + &d.dd * &ui);
        let next = &d.ad * &z + &d.bd * &ui;
        states.push(std::mem::replace(&mut z, next));
        inputs.push(ui);
    }
    states.push(z);
    Ok(Trajectory {
        grid_n: g,
        steps,
        p: d.p,
        states,
        inputs,
        outputs,
    })
}

/// Simulate from the initial profile `z0` (`n × grid_n`, cells ordered
/// along `ζ`).
pub fn simulate(
    sys: &PHSystem,
    z0: &Matrix,
    u: &mut dyn InputProvider,
    steps: usize,
) -> Result<Trajectory> {
    let d = discrete_reduce(sys)?;
    simulate_discrete(&d, &initial_state(z0), u, steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    /// `u_d = Fd·z_d` from the nulling friend of `V*`.
    Friend,
    /// The zeroing input of the reduced boundary system. It is defined on
    /// `V*` only and is extended by zero on the orthogonal complement, so
    /// roundoff off `V*` is not amplified by an arbitrary extension.
    Reduction,
}

/// Closed loop from an initial profile in `V*` with the output held at zero.
pub fn simulate_zeroing(
    sys: &PHSystem,
    zd: &ZeroDynamicsResult,
    z0: &Matrix,
    steps: usize,
    feedback: Feedback,
) -> Result<Trajectory> {
    let d = discrete_reduce(sys)?;
    let v = vstar_of_system(sys)?;
    if z0.nrows() != sys.n {
        return Err(Error::Shape(format!(
            "initial profile has {} channels, system has {}",
            z0.nrows(),
            sys.n
        )));
    }
    let scale = (0..z0.ncols())
        .map(|j| z0.column(j).norm())
        .fold(0.0, f64::max);
    let distance = v.distance(z0);
    if distance > 1e-10 * scale {
        return Err(Error::OutsideVstar { distance });
    }
    let f = match feedback {
        Feedback::Friend => nulling_friend(&d, &v)?.fd,
        Feedback::Reduction => zd.zeroing_feedback()? * v.projector(),
    };
    simulate_discrete(&d, &initial_state(z0), &mut StateFeedback(f), steps)
}

/// Exact per-channel transport for a multi-speed system.
///
/// `initial[i]` holds the profile of channel `i` on equal cells along `ζ`.
/// Cell counts must be proportional to travel times so that every channel
/// advances by one cell per tick. Returns the `m × ticks` output samples;
/// `input(τ)` supplies the `m` inputs of tick `τ`.
pub fn simulate_multispeed(
    sys: &MultiSpeedSystem,
    initial: &[Vec<f64>],
    input: &mut dyn FnMut(usize) -> Vec<f64>,
    ticks: usize,
) -> Result<Matrix> {
    sys.check_shapes()?;
    let n = sys.n;
    if initial.len() != n {
        return Err(Error::Shape(format!("{} profiles for {n} channels", initial.len())));
    }
    for i in 0..n {
        let (ti_n, ti_d) = sys.speeds[i].travel_time();
        let (t0_n, t0_d) = sys.speeds[0].travel_time();
        // len_i / t_i == len_0 / t_0
        let lhs = initial[i].len() as u128 * ti_d as u128 * t0_n as u128;
        let rhs = initial[0].len() as u128 * t0_d as u128 * ti_n as u128;
        if lhs != rhs || initial[i].is_empty() {
            return Err(Error::Shape(format!(
                "channel {i}: {} cells do not match its travel time",
                initial[i].len()
            )));
        }
    }
    let inflow = sys.inflow_matrix();
    let outflow = sys.outflow_matrix();
    let trace_coeff = |k: &Matrix, l: &Matrix, inflow_side: bool| {
        let mut a = Matrix::zeros(k.nrows(), n);
        for (j, s) in sys.speeds.iter().enumerate() {
            // direction −1: inflow at ζ = 0 (K), outflow at ζ = 1 (L).
            let use_k = (s.direction < 0) == inflow_side;
            a.set_column(j, &if use_k { k.column(j) } else { l.column(j) });
        }
        a
    };
    let y_in = trace_coeff(&sys.ky, &sys.ly, true);
    let y_out = trace_coeff(&sys.ky, &sys.ly, false);

    // Front of each queue is the next cell to leave the interval.
    let mut queues: Vec<VecDeque<f64>> = initial
        .iter()
        .zip(&sys.speeds)
        .map(|(prof, s)| {
            if s.direction < 0 {
                prof.iter().rev().copied().collect()
            } else {
                prof.iter().copied().collect()
            }
        })
        .collect();

    let m = sys.m;
    let mut out = Matrix::zeros(m, ticks);
    for tau in 0..ticks {
        let u = input(tau);
        if u.len() != m {
            return Err(Error::Shape(format!("input at tick {tau} has {} entries", u.len())));
        }
        let x_out = Matrix::from_fn(n, 1, |i, _| queues[i].pop_front().expect("non-empty queue"));
        let mut rhs = -(&outflow * &x_out);
        for (i, ui) in u.iter().enumerate() {
            rhs[(n - m + i, 0)] += ui;
        }
        let x_in = solve(&inflow, &rhs).map_err(|_| Error::IllPosed)?;
        let y = &y_in * &x_in + &y_out * &x_out;
        out.set_column(tau, &y.column(0));
        for (i, q) in queues.iter_mut().enumerate() {
            q.push_back(x_in[(i, 0)]);
        }
    }
    Ok(out)
}

/// Cut multi-speed profiles into the channels of the split system.
///
/// `initial[i]` is channel `i` along `ζ`; its length must be `grid` times
/// its segment count. Segment `k` takes cells `k·grid .. (k+1)·grid`.
pub fn split_profile(layout: &SplitLayout, initial: &[Vec<f64>], grid: usize) -> Result<Matrix> {
    if initial.len() != layout.segments.len() {
        return Err(Error::Shape(format!(
            "{} profiles for {} channels",
            initial.len(),
            layout.segments.len()
        )));
    }
    let mut z0 = Matrix::zeros(layout.channel_count(), grid);
    for (i, (segs, prof)) in layout.segments.iter().zip(initial).enumerate() {
        if prof.len() != segs.len() * grid {
            return Err(Error::Shape(format!(
                "channel {i}: {} cells, expected {}",
                prof.len(),
                segs.len() * grid
            )));
        }
        for (k, &ch) in segs.iter().enumerate() {
            for j in 0..grid {
                z0[(ch, j)] = prof[k * grid + j];
            }
        }
    }
    Ok(z0)
}
