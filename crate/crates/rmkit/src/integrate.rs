//! Brownian paths, trajectory integration, and pathwise couplings.
//!
//! Two discretizations are provided. `LogSpace` (the default) integrates the
//! logarithm of each strictly positive coordinate, so positivity holds
//! exactly and a coordinate that starts at zero stays at zero. `Plain` is the
//! textbook explicit scheme on the original variables with negative
//! excursions clamped to zero.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{per_capita_growth, ModelParams, State2};
use crate::rng::NormalSource;

/// States with a coordinate beyond this are treated as numerically divergent;
/// the trajectory is truncated and flagged instead of going non-finite.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// A discretized Brownian motion: `n` independent `N(0, dt)` increments,
/// reproducible from `(seed, dt, n)`.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    dt: f64,
    seed: u64,
    increments: Vec<f64>,
}

impl BrownianPath {
    pub fn generate(seed: u64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step must be finite and > 0, got {dt}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("path needs at least one step".into()));
        }
        let mut source = NormalSource::new(seed);
        let sqrt_dt = dt.sqrt();
        let increments = (0..n_steps).map(|_| sqrt_dt * source.next_normal()).collect();
        Ok(Self { dt, seed, increments })
    }

    /// All-zero increments: the driving noise switched off.
    pub fn zeros(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step must be finite and > 0, got {dt}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("path needs at least one step".into()));
        }
        Ok(Self { dt, seed: 0, increments: vec![0.0; n_steps] })
    }

    /// Same Brownian path on a grid coarsened by `factor` (increments summed
    /// per group). `factor` must divide the number of steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.increments.len() % factor != 0 {
            return Err(Error::InvalidParameter(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.increments.len()
            )));
        }
        let increments = self
            .increments
            .chunks(factor)
            .map(|chunk| chunk.iter().sum())
            .collect();
        Ok(Self { dt: self.dt * factor as f64, seed: self.seed, increments })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Value of the Brownian motion on the grid (cumulative sums, `B_0 = 0`).
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut b = 0.0;
        out.push(b);
        for dw in &self.increments {
            b += dw;
            out.push(b);
        }
        out
    }
}

/// Integration scheme for the stochastic system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Explicit step on the log of each positive coordinate (exact
    /// positivity, exact absorption at zero).
    LogSpace,
    /// Explicit step on the original variables, negatives clamped to zero.
    Plain,
}

/// A sampled path of the two-species system.
#[derive(Debug, Clone)]
pub struct Trajectory2 {
    pub times: Vec<f64>,
    pub states: Vec<State2>,
    /// True when the run was cut short by the divergence guard.
    pub divergent: bool,
}

/// A sampled scalar path (prey-only runs, predator reconstructions).
#[derive(Debug, Clone)]
pub struct Trajectory1 {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub divergent: bool,
}

impl Trajectory2 {
    pub fn last_state(&self) -> State2 {
        *self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("trajectory is non-empty")
    }

    /// Prey coordinate as a scalar trajectory.
    pub fn prey(&self) -> Trajectory1 {
        Trajectory1 {
            times: self.times.clone(),
            values: self.states.iter().map(|s| s.x1).collect(),
            divergent: self.divergent,
        }
    }

    /// Predator coordinate as a scalar trajectory.
    pub fn predator(&self) -> Trajectory1 {
        Trajectory1 {
            times: self.times.clone(),
            values: self.states.iter().map(|s| s.x2).collect(),
            divergent: self.divergent,
        }
    }
}

impl Trajectory1 {
    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("trajectory has at least the initial value")
    }
}

/// Step size of a uniform time grid; rejects grids that are too short or
/// visibly non-uniform (e.g. multi-phase control trajectories).
pub(crate) fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Empty("time grid needs at least two points".into()));
    }
    let dt = times[1] - times[0];
    let span = times.last().expect("non-empty").abs().max(1.0);
    let tol = 64.0 * f64::EPSILON * span;
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > tol {
            return Err(Error::InvalidParameter(format!(
                "time grid is not uniform: step {} vs {}",
                w[1] - w[0],
                dt
            )));
        }
    }
    Ok(dt)
}

#[inline]
fn em_step_system(params: &ModelParams, s: State2, dt: f64, dw: f64, scheme: Scheme) -> State2 {
    let eps = params.epsilon();
    let f = per_capita_growth(params, &s);
    match scheme {
        Scheme::LogSpace => {
            let x1 = if s.x1 > 0.0 {
                (s.x1.ln() + (f[0] - 0.5 * eps * eps) * dt + eps * dw).exp()
            } else {
                0.0
            };
            let x2 = if s.x2 > 0.0 { (s.x2.ln() + f[1] * dt).exp() } else { 0.0 };
            State2 { x1, x2 }
        }
        Scheme::Plain => {
            let x1 = (s.x1 + s.x1 * f[0] * dt + eps * s.x1 * dw).max(0.0);
            let x2 = (s.x2 + s.x2 * f[1] * dt).max(0.0);
            State2 { x1, x2 }
        }
    }
}

#[inline]
fn em_step_logistic(params: &ModelParams, z: f64, dt: f64, dw: f64, scheme: Scheme) -> f64 {
    let eps = params.epsilon();
    let f = 1.0 - z / params.kappa();
    match scheme {
        Scheme::LogSpace => {
            if z > 0.0 {
                (z.ln() + (f - 0.5 * eps * eps) * dt + eps * dw).exp()
            } else {
                0.0
            }
        }
        Scheme::Plain => (z + z * f * dt + eps * z * dw).max(0.0),
    }
}

/// Integrate the two-species system along `path` from `x0`.
pub fn simulate_em(
    params: &ModelParams,
    x0: State2,
    path: &BrownianPath,
    scheme: Scheme,
) -> Trajectory2 {
    let n = path.n_steps();
    let dt = path.dt();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(x0);
    let mut s = x0;
    let mut divergent = false;
    for (i, &dw) in path.increments.iter().enumerate() {
        s = em_step_system(params, s, dt, dw, scheme);
        if !(s.x1 <= DIVERGENCE_LIMIT) || !(s.x2 <= DIVERGENCE_LIMIT) {
            divergent = true;
            break;
        }
        times.push((i + 1) as f64 * dt);
        states.push(s);
    }
    Trajectory2 { times, states, divergent }
}

/// Integrate the prey-only logistic law along `path` from `z0 >= 0`.
pub fn simulate_em_logistic(
    params: &ModelParams,
    z0: f64,
    path: &BrownianPath,
    scheme: Scheme,
) -> Result<Trajectory1> {
    if !(z0 >= 0.0) || !z0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "initial density must be finite and >= 0, got {z0}"
        )));
    }
    let n = path.n_steps();
    let dt = path.dt();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    times.push(0.0);
    values.push(z0);
    let mut z = z0;
    let mut divergent = false;
    for (i, &dw) in path.increments.iter().enumerate() {
        z = em_step_logistic(params, z, dt, dw, scheme);
        if !(z <= DIVERGENCE_LIMIT) {
            divergent = true;
            break;
        }
        times.push((i + 1) as f64 * dt);
        values.push(z);
    }
    Ok(Trajectory1 { times, values, divergent })
}

/// Stream the system integration without storing the trajectory: `visit` is
/// called once per step at the left grid endpoint (so each visited state
/// owns a `dt` of elapsed time), and the final state is returned. Produces
/// exactly the same states as [`simulate_em`] on
/// [`BrownianPath::generate`]`(seed, dt, n_steps)`.
pub fn stream_em<F: FnMut(f64, &State2)>(
    params: &ModelParams,
    x0: State2,
    seed: u64,
    dt: f64,
    n_steps: usize,
    scheme: Scheme,
    mut visit: F,
) -> Result<(State2, bool)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time step must be finite and > 0, got {dt}"
        )));
    }
    let mut source = NormalSource::new(seed);
    let sqrt_dt = dt.sqrt();
    let mut s = x0;
    for i in 0..n_steps {
        visit(i as f64 * dt, &s);
        let dw = sqrt_dt * source.next_normal();
        let next = em_step_system(params, s, dt, dw, scheme);
        if !(next.x1 <= DIVERGENCE_LIMIT) || !(next.x2 <= DIVERGENCE_LIMIT) {
            return Ok((s, true));
        }
        s = next;
    }
    Ok((s, false))
}

/// Noise-free flow by the same explicit stepping as [`Scheme::Plain`] on a
/// zero path. Takes only the two drift parameters; the noise intensity plays
/// no role without noise.
pub fn simulate_deterministic(
    alpha: f64,
    kappa: f64,
    x0: State2,
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory2> {
    let params = ModelParams::new(1.0, alpha, kappa)?;
    let path = BrownianPath::zeros(dt, n_steps)?;
    Ok(simulate_em(&params, x0, &path, Scheme::Plain))
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Explicit solution of the logistic law on the path's grid:
///
/// `z_t = z0 exp(Y_t) / (1 + (z0/kappa) ∫_0^t exp(Y_s) ds)` with
/// `Y_t = (1 - eps^2/2) t + eps B_t`, the time integral by the trapezoidal
/// rule. Evaluated in log space so long horizons cannot overflow.
pub fn exact_logistic(params: &ModelParams, z0: f64, path: &BrownianPath) -> Result<Trajectory1> {
    if !(z0 >= 0.0) || !z0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "initial density must be finite and >= 0, got {z0}"
        )));
    }
    let n = path.n_steps();
    let dt = path.dt();
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    if z0 == 0.0 {
        return Ok(Trajectory1 { times, values: vec![0.0; n + 1], divergent: false });
    }
    let eps = params.epsilon();
    let growth = 1.0 - 0.5 * eps * eps;
    let ln_z0 = z0.ln();
    let ln_ratio = (z0 / params.kappa()).ln();
    let ln_half_dt = (0.5 * dt).ln();
    let mut values = Vec::with_capacity(n + 1);
    values.push(z0);
    let mut b = 0.0;
    let mut y_prev = 0.0;
    let mut log_integral = f64::NEG_INFINITY;
    for (i, &dw) in path.increments.iter().enumerate() {
        b += dw;
        let y = growth * times[i + 1] + eps * b;
        log_integral = log_add_exp(log_integral, ln_half_dt + log_add_exp(y_prev, y));
        let log_denominator = log_add_exp(0.0, ln_ratio + log_integral);
        values.push((ln_z0 + y - log_denominator).exp());
        y_prev = y;
    }
    Ok(Trajectory1 { times, values, divergent: false })
}

/// Solution of the noise-free logistic equation, written in a form stable
/// for large times: `z_t -> kappa`.
pub fn logistic_ode_solution(kappa: f64, z0: f64, t: f64) -> f64 {
    if z0 == 0.0 {
        return 0.0;
    }
    kappa * z0 / (kappa * (-t).exp() + z0 * (-(-t).exp() + 1.0))
}

/// Result of running the full system and the prey-only logistic bound on a
/// shared noise path.
#[derive(Debug, Clone)]
pub struct CoupledCompare {
    pub system: Trajectory2,
    pub logistic: Trajectory1,
    /// Grid points where the prey exceeded the logistic bound beyond the
    /// floating-point allowance `1e-9 * (1 + z)`.
    pub violations: usize,
}

/// Run the system and the logistic law from `z0 = x0.x1` on the same path
/// (log-space scheme for both) and count violations of `x1 <= z`.
pub fn coupled_compare(
    params: &ModelParams,
    x0: State2,
    path: &BrownianPath,
) -> Result<CoupledCompare> {
    if !(x0.x1 > 0.0) {
        return Err(Error::InvalidParameter(
            "comparison coupling needs a strictly positive prey start".into(),
        ));
    }
    let system = simulate_em(params, x0, path, Scheme::LogSpace);
    let logistic = simulate_em_logistic(params, x0.x1, path, Scheme::LogSpace)?;
    let n = system.states.len().min(logistic.values.len());
    let violations = (0..n)
        .filter(|&i| {
            let x1 = system.states[i].x1;
            let z = logistic.values[i];
            x1 > z + 1e-9 * (1.0 + z)
        })
        .count();
    Ok(CoupledCompare { system, logistic, violations })
}

/// Reconstruct the predator coordinate from a prey path on a uniform grid:
///
/// `x2(t) = x2(0) exp(-alpha t + ∫_0^t x1/(1+x1) ds)`, trapezoidal rule.
pub fn predator_from_prey(
    params: &ModelParams,
    x2_0: f64,
    prey: &Trajectory1,
) -> Result<Trajectory1> {
    if !(x2_0 >= 0.0) || !x2_0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "initial predator density must be finite and >= 0, got {x2_0}"
        )));
    }
    let dt = uniform_step(&prey.times)?;
    let alpha = params.alpha();
    let mut values = Vec::with_capacity(prey.values.len());
    values.push(x2_0);
    let mut integral = 0.0;
    let response = |x: f64| x / (1.0 + x);
    for i in 1..prey.values.len() {
        integral += 0.5 * dt * (response(prey.values[i - 1]) + response(prey.values[i]));
        values.push(x2_0 * (-alpha * prey.times[i] + integral).exp());
    }
    Ok(Trajectory1 { times: prey.times.clone(), values, divergent: prey.divergent })
}

fn write_comment_lines<W: Write>(out: &mut W, comments: &[String]) -> Result<()> {
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Write `t,x1,x2` rows at full double precision, with `#`-prefixed comment
/// lines first.
pub fn write_csv2<W: Write>(traj: &Trajectory2, comments: &[String], out: &mut W) -> Result<()> {
    write_comment_lines(out, comments)?;
    writeln!(out, "t,x1,x2")?;
    for (t, s) in traj.times.iter().zip(traj.states.iter()) {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", t, s.x1, s.x2)?;
    }
    Ok(())
}

/// Write `t,z` rows at full double precision.
pub fn write_csv1<W: Write>(traj: &Trajectory1, comments: &[String], out: &mut W) -> Result<()> {
    write_comment_lines(out, comments)?;
    writeln!(out, "t,z")?;
    for (t, z) in traj.times.iter().zip(traj.values.iter()) {
        writeln!(out, "{:.16e},{:.16e}", t, z)?;
    }
    Ok(())
}
