//! Deterministic control system and constructive reachability.
//!
//! Replacing the noise channel by a piecewise-constant control `v` turns the
//! system into `y1' = y1 (F1(y) + v)`, `y2' = y2 F2(y)`. Two geometric
//! objects organize the phase plane: the vertical line `x1 = alpha/(1-alpha)`
//! on which the predator drift vanishes, and for each `v` the parabola
//! `(1 + v - x1/kappa)(1 + x1) = x2` on which the controlled prey drift
//! vanishes (prey grows below it, shrinks above it).
//!
//! [`reach`] steers from `x` to a ball around `z` in three phases: contract
//! to a neighborhood of the origin with `v = -1`, sweep right and climb the
//! parabola of a large `v*` until the predator level of the target is
//! crossed, then dive left with a strongly negative control while the
//! predator level barely moves.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::Trajectory2;
use crate::model::{per_capita_growth, ModelParams, State2};

/// Controlled vector field.
#[inline]
pub fn control_field(params: &ModelParams, v: f64, s: &State2) -> [f64; 2] {
    let f = per_capita_growth(params, s);
    [s.x1 * (f[0] + v), s.x2 * f[1]]
}

/// Height of the prey-nullcline parabola for control level `v` at `x1`.
#[inline]
pub fn parabola_x2(params: &ModelParams, v: f64, x1: f64) -> f64 {
    (1.0 + v - x1 / params.kappa()) * (1.0 + x1)
}

/// Vertex of the parabola: `x1* = (kappa v - 1 + kappa)/2`,
/// `x2* = (kappa (v+1) + 1)^2 / (4 kappa)`.
pub fn parabola_vertex(params: &ModelParams, v: f64) -> (f64, f64) {
    let kappa = params.kappa();
    let x1 = 0.5 * (kappa * v - 1.0 + kappa);
    let x2 = (kappa * (v + 1.0) + 1.0).powi(2) / (4.0 * kappa);
    (x1, x2)
}

/// Smallest control level in the doubling ladder `1, 2, 4, …` for which,
/// with a 10% margin, the target `z` sits strictly below the parabola and
/// the vertex abscissa clears the predator nullcline. Both conditions are
/// monotone in `v`, so the search terminates.
pub fn choose_vstar(params: &ModelParams, z: &State2) -> Result<f64> {
    if !params.alpha_admissible() {
        return Err(Error::InvalidParameter(
            "steering needs alpha < 1 (otherwise predators can never grow)".into(),
        ));
    }
    if !(z.x1 > 0.0 && z.x2 > 0.0) {
        return Err(Error::InvalidParameter(
            "target must have strictly positive coordinates".into(),
        ));
    }
    let margin = 1.1;
    let line = params.predator_nullcline_x1();
    let mut v = 1.0;
    loop {
        let below = parabola_x2(params, v, z.x1) >= margin * z.x2;
        let vertex_right = parabola_vertex(params, v).0 >= margin * line;
        if below && vertex_right {
            return Ok(v);
        }
        v *= 2.0;
        if !v.is_finite() {
            return Err(Error::NoConvergence("control level search diverged".into()));
        }
    }
}

/// Fixed plan for a steering run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlPlan {
    /// Phase-2 control level.
    pub v_star: f64,
    /// Magnitude of the phase-3 control (applied as `-big_r`).
    pub big_r: f64,
    /// Radius of the origin neighborhood ending phase 1.
    pub r0: f64,
    /// Radius of the target neighborhood ending phase 3.
    pub r_z: f64,
    /// Base integration step.
    pub ode_dt: f64,
    /// Per-phase time budget.
    pub max_phase_time: f64,
}

impl ControlPlan {
    pub fn new(v_star: f64, big_r: f64, r0: f64, r_z: f64, ode_dt: f64) -> Self {
        Self { v_star, big_r, r0, r_z, ode_dt, max_phase_time: 400.0 }
    }
}

/// One executed phase: its control level, grid index range in the returned
/// trajectory, interpolated end time, and whether its predicate was met.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub v: f64,
    pub predicate: String,
    pub start_index: usize,
    pub end_index: usize,
    pub t_start: f64,
    /// Predicate crossing time, linearly interpolated between grid points.
    pub t_end: f64,
    pub satisfied: bool,
}

/// Outcome of a steering run.
#[derive(Debug, Clone, Serialize)]
pub struct ReachOutcome {
    #[serde(skip)]
    pub trajectory: Trajectory2,
    pub success: bool,
    pub plan: ControlPlan,
    pub phases: Vec<PhaseRecord>,
    /// Largest `|x2 - z2|` seen during phase 3.
    pub phase3_band: f64,
    /// Index of the phase that timed out, when unsuccessful.
    pub failed_phase: Option<usize>,
}

/// Classical 4th-order step on the logs of the coordinates, which keeps the
/// trajectory strictly positive for any control level.
fn rk4_log_step(params: &ModelParams, v: f64, l: [f64; 2], dt: f64) -> [f64; 2] {
    let rate = |l: [f64; 2]| -> [f64; 2] {
        let s = State2 { x1: l[0].exp(), x2: l[1].exp() };
        let f = per_capita_growth(params, &s);
        [f[0] + v, f[1]]
    };
    let k1 = rate(l);
    let k2 = rate([l[0] + 0.5 * dt * k1[0], l[1] + 0.5 * dt * k1[1]]);
    let k3 = rate([l[0] + 0.5 * dt * k2[0], l[1] + 0.5 * dt * k2[1]]);
    let k4 = rate([l[0] + dt * k3[0], l[1] + dt * k3[1]]);
    [
        l[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        l[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

struct PhaseRun {
    satisfied: bool,
    /// Interpolated crossing time when satisfied, else the exit time.
    t_cross: f64,
}

/// Integrate one phase, appending to `times`/`states`. `progress` maps a
/// state to a scalar that crosses zero (from above) when the phase ends.
/// `guard` can veto a crossing (used for the "after the parabola" clause).
fn run_phase<P, G>(
    params: &ModelParams,
    v: f64,
    dt: f64,
    max_time: f64,
    times: &mut Vec<f64>,
    states: &mut Vec<State2>,
    progress: P,
    mut guard: G,
) -> Result<PhaseRun>
where
    P: Fn(&State2) -> f64,
    G: FnMut(&State2) -> bool,
{
    let mut s = *states.last().expect("phase starts from an existing state");
    let mut t = *times.last().expect("phase starts from an existing time");
    let t_limit = t + max_time;
    let mut gate_open = guard(&s);
    let mut prev_gap = progress(&s);
    if gate_open && prev_gap <= 0.0 {
        return Ok(PhaseRun { satisfied: true, t_cross: t });
    }
    let mut l = [s.x1.ln(), s.x2.ln()];
    while t < t_limit {
        l = rk4_log_step(params, v, l, dt);
        if !(l[0].is_finite() && l[1].is_finite()) {
            return Err(Error::NonFinite(
                "controlled trajectory left the representable range".into(),
            ));
        }
        s = State2 { x1: l[0].exp(), x2: l[1].exp() };
        if s.x1 == 0.0 || s.x2 == 0.0 || !(s.x1.is_finite() && s.x2.is_finite()) {
            return Err(Error::NonFinite(
                "controlled trajectory underflowed or overflowed".into(),
            ));
        }
        t += dt;
        times.push(t);
        states.push(s);
        if !gate_open {
            gate_open = guard(&s);
            prev_gap = progress(&s);
            continue;
        }
        let gap = progress(&s);
        if gap <= 0.0 {
            // Linear interpolation between the straddling grid points.
            let frac = if prev_gap > gap { prev_gap / (prev_gap - gap) } else { 1.0 };
            return Ok(PhaseRun { satisfied: true, t_cross: t - dt + frac * dt });
        }
        prev_gap = gap;
    }
    Ok(PhaseRun { satisfied: false, t_cross: t })
}

/// Steer from `x` to the `r_z`-ball around `z` under `plan`. Fails softly
/// (`success = false`, `failed_phase` set) when a phase exhausts its time
/// budget; errors only on invalid inputs.
pub fn reach(
    params: &ModelParams,
    x: &State2,
    z: &State2,
    plan: &ControlPlan,
) -> Result<ReachOutcome> {
    if !params.alpha_admissible() {
        return Err(Error::InvalidParameter(
            "steering needs alpha < 1 (otherwise predators can never grow)".into(),
        ));
    }
    for (name, s) in [("start", x), ("target", z)] {
        if !(s.x1 > 0.0 && s.x2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must have strictly positive coordinates, got ({}, {})",
                s.x1, s.x2
            )));
        }
    }
    if !(plan.r0 > 0.0 && plan.r_z > 0.0 && plan.ode_dt > 0.0 && plan.big_r > 0.0) {
        return Err(Error::InvalidParameter(
            "radii, control magnitude and step must be positive".into(),
        ));
    }

    let mut times = vec![0.0];
    let mut states = vec![*x];
    let mut phases = Vec::with_capacity(3);
    let mut failed_phase = None;
    let mut phase3_band = 0.0;

    // Degenerate plan: already inside the target ball.
    if x.distance(z) <= plan.r_z {
        return Ok(ReachOutcome {
            trajectory: Trajectory2 { times, states, divergent: false },
            success: true,
            plan: *plan,
            phases,
            phase3_band,
            failed_phase: None,
        });
    }

    // Phase 1: contract toward the origin.
    let start_index = states.len() - 1;
    let t_start = *times.last().expect("non-empty");
    let run = run_phase(
        params,
        -1.0,
        plan.ode_dt,
        plan.max_phase_time,
        &mut times,
        &mut states,
        |s| s.norm() - plan.r0,
        |_| true,
    )?;
    phases.push(PhaseRecord {
        v: -1.0,
        predicate: format!("enter origin ball of radius {}", plan.r0),
        start_index,
        end_index: states.len() - 1,
        t_start,
        t_end: run.t_cross,
        satisfied: run.satisfied,
    });
    if !run.satisfied {
        failed_phase = Some(1);
    }

    // Phase 2: sweep right below the parabola, climb it, cross x2 = z2.
    let mut crossed_with_margin = true;
    if failed_phase.is_none() {
        let start_index = states.len() - 1;
        let t_start = *times.last().expect("non-empty");
        let run = run_phase(
            params,
            plan.v_star,
            plan.ode_dt,
            plan.max_phase_time,
            &mut times,
            &mut states,
            |s| z.x2 - s.x2,
            |s| s.x2 >= parabola_x2(params, plan.v_star, s.x1),
        )?;
        let exit = states.last().expect("non-empty");
        crossed_with_margin = run.satisfied && exit.x1 > z.x1;
        phases.push(PhaseRecord {
            v: plan.v_star,
            predicate: format!("cross x2 = {} after crossing the parabola", z.x2),
            start_index,
            end_index: states.len() - 1,
            t_start,
            t_end: run.t_cross,
            satisfied: crossed_with_margin,
        });
        if !crossed_with_margin {
            failed_phase = Some(2);
        }
    }

    // Phase 3: dive left with v = -big_r; x2 must stay inside the band.
    if failed_phase.is_none() {
        let start_index = states.len() - 1;
        let t_start = *times.last().expect("non-empty");
        // The dive moves log(x1) at rate about big_r; resolve it.
        let dt3 = plan.ode_dt.min(0.1 / plan.big_r.max(1.0));
        let run = run_phase(
            params,
            -plan.big_r,
            dt3,
            plan.max_phase_time,
            &mut times,
            &mut states,
            |s| s.distance(z) - plan.r_z,
            |_| true,
        )?;
        phase3_band = states[start_index..]
            .iter()
            .map(|s| (s.x2 - z.x2).abs())
            .fold(0.0, f64::max);
        phases.push(PhaseRecord {
            v: -plan.big_r,
            predicate: format!("enter target ball of radius {}", plan.r_z),
            start_index,
            end_index: states.len() - 1,
            t_start,
            t_end: run.t_cross,
            satisfied: run.satisfied,
        });
        if !run.satisfied {
            failed_phase = Some(3);
        }
    }

    Ok(ReachOutcome {
        trajectory: Trajectory2 { times, states, divergent: false },
        success: failed_phase.is_none() && crossed_with_margin,
        plan: *plan,
        phases,
        phase3_band,
        failed_phase,
    })
}

/// Steer with automatic plan selection: `v*` from [`choose_vstar`], the
/// phase-3 magnitude doubled from 10 until the predator band stays within
/// `r_z` (capped at 1e6), and `r0` halved when phase 2 overshoots the
/// target's predator level.
pub fn reach_auto(
    params: &ModelParams,
    x: &State2,
    z: &State2,
    r0: f64,
    r_z: f64,
    ode_dt: f64,
) -> Result<ReachOutcome> {
    let v_star = choose_vstar(params, z)?;
    let mut last = None;
    let mut r0_try = r0;
    for _ in 0..8 {
        let mut big_r = 10.0;
        while big_r <= 1e6 {
            let plan = ControlPlan::new(v_star, big_r, r0_try, r_z, ode_dt);
            let outcome = reach(params, x, z, &plan)?;
            if outcome.success && outcome.phase3_band <= r_z {
                return Ok(outcome);
            }
            let retry_with_bigger_r = outcome.failed_phase == Some(3)
                || (outcome.success && outcome.phase3_band > r_z);
            last = Some(outcome);
            if !retry_with_bigger_r {
                break;
            }
            big_r *= 2.0;
        }
        if last.as_ref().is_some_and(|o| o.failed_phase == Some(2)) {
            r0_try *= 0.5;
        } else {
            break;
        }
    }
    last.ok_or_else(|| Error::NoConvergence("no steering plan attempted".into()))
}
