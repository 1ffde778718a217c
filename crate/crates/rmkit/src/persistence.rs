//! Invasion-rate analysis, regime classification and certificate checks.
//!
//! The central quantity is the predator's mean invasion rate against the
//! stationary prey law,
//!
//! `Λ(ε, α, κ) = ∫_0^∞ x/(1+x) γ(x) dx − α`,
//!
//! whose sign separates coexistence from predator extinction while
//! `ε² < 2`, with total extinction beyond. The rest of the module verifies
//! the supporting certificates numerically: drift conditions for exponential
//! and polynomial energy functions, the stationarity identity of the prey
//! law, the noise-bracket determinant, boundary invasion weights, and the
//! exponents of the polynomial convergence rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{per_capita_growth, GammaStationary, ModelParams, Species, State2};
use crate::special::integrate_adaptive;

/// Λ values within this distance of zero are reported as critical by
/// default; the sign of a quadrature result that small is not trustworthy.
pub const CRITICAL_TOL_DEFAULT: f64 = 1e-6;

/// Absolute quadrature tolerance for Λ.
const LAMBDA_QUAD_TOL: f64 = 1e-8;

/// Tail mass dropped when truncating integrals against the stationary law.
const TAIL_MASS: f64 = 1e-12;

/// Quadrature of `∫ f(x) γ(x) dx` against the stationary prey law, with
/// breakpoints informed by the law's bulk so narrow spikes are not missed.
fn integrate_against_gamma<F: Fn(f64) -> f64>(g: &GammaStationary, f: F) -> Result<f64> {
    let t_cut = g.tail_cutoff(TAIL_MASS);
    let (mean, var) = g.moments();
    let sd = var.sqrt();
    let mut pts = vec![0.0, t_cut];
    for m in [-8.0, -4.0, -2.0, -1.0, 1.0, 2.0, 4.0, 8.0] {
        pts.push(mean + m * sd);
    }
    pts.push(mean);
    // Near-zero refinement matters when the density diverges at 0.
    for frac in [1e-8, 1e-5, 1e-3, 1e-1] {
        pts.push(t_cut * frac);
        pts.push(g.scale() * frac);
    }
    pts.retain(|&p| (0.0..=t_cut).contains(&p));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_cut);
    let integrand = |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            g.log_density(x).exp() * f(x)
        }
    };
    Ok(integrate_adaptive(integrand, &pts, LAMBDA_QUAD_TOL)?.value)
}

/// Mean of the functional response `x/(1+x)` under a stationary prey law;
/// the invasion rate is this minus the mortality `alpha`.
pub fn mean_functional_response(law: &GammaStationary) -> Result<f64> {
    integrate_against_gamma(law, |x| x / (1.0 + x))
}

/// Mean invasion rate of the predator against the stationary prey law.
/// Defined only for `0 < ε² < 2`.
pub fn lambda_invasion(params: &ModelParams) -> Result<f64> {
    let g = GammaStationary::from_params(params)?;
    Ok(mean_functional_response(&g)? - params.alpha())
}

/// Long-run regime of the stochastic system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Persistence,
    PredatorExtinction,
    TotalExtinction,
    Critical,
}

/// An asymptotic log-rate bound for one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub quantity: String,
    pub bound: f64,
    /// True when the bound is attained, not just an upper estimate.
    pub exact: bool,
}

/// Regime classification together with the invasion rate (when defined) and
/// the applicable extinction rate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub lambda: Option<f64>,
    pub rate_bounds: Vec<RateBound>,
}

/// Classify the parameters. `tol` is the half-width of the critical band
/// around Λ = 0.
pub fn classify_regime(params: &ModelParams, tol: f64) -> Result<RegimeReport> {
    let eps_sq = params.epsilon() * params.epsilon();
    if eps_sq > 2.0 {
        return Ok(RegimeReport {
            regime: Regime::TotalExtinction,
            lambda: None,
            rate_bounds: vec![
                RateBound {
                    quantity: "x1_log_rate".into(),
                    bound: 1.0 - 0.5 * eps_sq,
                    exact: false,
                },
                RateBound {
                    quantity: "x2_log_rate".into(),
                    bound: -params.alpha(),
                    exact: false,
                },
            ],
        });
    }
    if eps_sq == 2.0 {
        return Ok(RegimeReport { regime: Regime::Critical, lambda: None, rate_bounds: vec![] });
    }
    let lambda = lambda_invasion(params)?;
    let report = if lambda.abs() <= tol {
        RegimeReport { regime: Regime::Critical, lambda: Some(lambda), rate_bounds: vec![] }
    } else if lambda > 0.0 {
        RegimeReport { regime: Regime::Persistence, lambda: Some(lambda), rate_bounds: vec![] }
    } else {
        RegimeReport {
            regime: Regime::PredatorExtinction,
            lambda: Some(lambda),
            rate_bounds: vec![RateBound {
                quantity: "x2_log_rate".into(),
                bound: lambda,
                exact: true,
            }],
        }
    };
    Ok(report)
}

/// Pointwise invasion rate of one species: per-capita growth corrected by
/// half its squared noise coefficient (`-ε²/2` for the prey, nothing for
/// the noiseless predator).
pub fn invasion_rate_at(params: &ModelParams, species: Species, s: &State2) -> f64 {
    let f = per_capita_growth(params, s);
    match species {
        Species::Prey => f[0] - 0.5 * params.epsilon() * params.epsilon(),
        Species::Predator => f[1],
    }
}

/// Positive weights making the weighted invasion rates strictly positive
/// against both boundary ergodic measures (the point mass at the origin and
/// the stationary prey law on the prey axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HofbauerWeights {
    pub p1: f64,
    pub p2: f64,
}

/// Weight selection: `p2 = 1` and `p1` at twice the threshold
/// `p2 α / (1 − ε²/2)`, re-verified against both boundary measures.
/// Absent unless `ε² < 2` and `Λ > 0`.
pub fn hofbauer_weights(params: &ModelParams) -> Result<Option<HofbauerWeights>> {
    if !params.noise_subcritical() {
        return Ok(None);
    }
    let lambda = lambda_invasion(params)?;
    if lambda <= 0.0 {
        return Ok(None);
    }
    let p2 = 1.0;
    let half_eps_sq = 0.5 * params.epsilon() * params.epsilon();
    let p1 = 2.0 * params.alpha() / (1.0 - half_eps_sq);
    let origin = State2 { x1: 0.0, x2: 0.0 };
    let at_origin = p1 * invasion_rate_at(params, Species::Prey, &origin)
        + p2 * invasion_rate_at(params, Species::Predator, &origin);
    let on_prey_axis = p2 * lambda;
    if at_origin > 0.0 && on_prey_axis > 0.0 {
        Ok(Some(HofbauerWeights { p1, p2 }))
    } else {
        Ok(None)
    }
}

/// Energy function family for drift-condition checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LyapunovFamily {
    /// `U(x) = exp(theta (x1 + x2))`.
    Exponential { theta: f64 },
    /// `U(x) = 1 + (x1 + x2)^n`.
    Polynomial { n: u32 },
}

/// Outcome of a sampled drift-condition check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    #[serde(flatten)]
    pub family: LyapunovFamily,
    /// Decay constant in `LU <= -a U + b`.
    pub a: f64,
    /// Offset in `LU <= -a U + b`.
    pub b: f64,
    /// Quadratic carré-du-champ constant `Γ(U) <= c U²`, polynomial family
    /// only.
    pub c: Option<f64>,
    pub verified: bool,
    /// Sample point with the worst margin (the binding point when verified,
    /// a violation witness when not).
    pub witness: Option<State2>,
    /// All constants used by the check, keyed by name.
    pub constants: BTreeMap<String, f64>,
}

/// Sampling layout for certificate checks: a log-spaced grid on
/// `[0, x_max]²` including both axes and the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_max: f64,
    pub points_per_axis: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_max: 50.0, points_per_axis: 64 }
    }
}

impl GridSpec {
    const X_MIN: f64 = 1e-3;

    /// Axis values: zero plus a log-spaced ladder up to `x_max`.
    pub fn axis(&self) -> Vec<f64> {
        let m = self.points_per_axis.max(2);
        let lo = Self::X_MIN.ln();
        let hi = self.x_max.ln();
        let mut axis = Vec::with_capacity(m + 1);
        axis.push(0.0);
        for i in 0..m {
            axis.push((lo + (hi - lo) * i as f64 / (m - 1) as f64).exp());
        }
        axis
    }

    pub fn refined(&self) -> GridSpec {
        GridSpec { x_max: self.x_max, points_per_axis: self.points_per_axis * 2 }
    }
}

/// `LU/U` for the exponential family.
fn exp_generator_ratio(params: &ModelParams, theta: f64, s: &State2) -> f64 {
    let f = per_capita_growth(params, s);
    let eps = params.epsilon();
    theta * s.x1 * f[0] + theta * s.x2 * f[1] + 0.5 * eps * eps * theta * theta * s.x1 * s.x1
}

/// `Γ(U)/U²`: the squared relative noise load of the energy function. For
/// the exponential family this is `ε² θ² x1²` (unbounded), for the
/// polynomial family it stays below `ε² n²`.
pub fn carre_du_champ_ratio(params: &ModelParams, family: LyapunovFamily, s: &State2) -> f64 {
    let eps_sq = params.epsilon() * params.epsilon();
    match family {
        LyapunovFamily::Exponential { theta } => eps_sq * theta * theta * s.x1 * s.x1,
        LyapunovFamily::Polynomial { n } => {
            let sum = s.x1 + s.x2;
            let u = 1.0 + sum.powi(n as i32);
            let grad = n as f64 * sum.powi(n as i32 - 1);
            eps_sq * s.x1 * s.x1 * (grad / u) * (grad / u)
        }
    }
}

/// Drift-condition check for `U = exp(theta (x1 + x2))`.
///
/// For `theta < theta* = 2/(κ ε²)` the decay constant is set to half the
/// proof rate `2 θ / c₀`, `c₀ = 1/κ − ε² θ/2`, and the offset is fitted over
/// the sample grid extended by the analytic ridge in the predator direction.
/// For `theta >= theta*` the quadratic noise term wins along the prey axis
/// and the check reports failure with the worst sample as witness.
pub fn lyapunov_exp_check(
    params: &ModelParams,
    theta: f64,
    grid: &GridSpec,
) -> Result<LyapunovReport> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent must be > 0, got {theta}"
        )));
    }
    let theta_star = params.theta_star();
    let mut constants = BTreeMap::new();
    constants.insert("theta".into(), theta);
    constants.insert("theta_star".into(), theta_star);
    let family = LyapunovFamily::Exponential { theta };
    let axis = grid.axis();

    if theta >= theta_star {
        // No finite offset can work; report the worst ratio as witness.
        let mut worst = (f64::NEG_INFINITY, State2 { x1: 0.0, x2: 0.0 });
        for &x1 in &axis {
            for &x2 in &axis {
                let s = State2 { x1, x2 };
                let r = exp_generator_ratio(params, theta, &s);
                if r > worst.0 {
                    worst = (r, s);
                }
            }
        }
        constants.insert("worst_ratio".into(), worst.0);
        return Ok(LyapunovReport {
            family,
            a: 0.0,
            b: 0.0,
            c: None,
            verified: false,
            witness: Some(worst.1),
            constants,
        });
    }

    let eps_sq = params.epsilon() * params.epsilon();
    let c0 = 1.0 / params.kappa() - 0.5 * eps_sq * theta;
    let proof_rate = 2.0 * theta / c0;
    let fraction = 0.5;
    let a = fraction * proof_rate;
    let alpha = params.alpha();
    let margin = 1.02;

    // log of max(0, LU + aU) at a sample; NEG_INFINITY when nonpositive.
    let log_excess = |s: &State2| -> f64 {
        let shifted = exp_generator_ratio(params, theta, s) + a;
        if shifted <= 0.0 {
            f64::NEG_INFINITY
        } else {
            theta * (s.x1 + s.x2) + shifted.ln()
        }
    };

    // For fixed x1 the excess is maximized at x2* = (ratio(x1,0) + a - alpha)/(alpha theta);
    // append that ridge so the offset does not depend on the x2 resolution.
    let mut samples: Vec<State2> = Vec::with_capacity(axis.len() * (axis.len() + 1));
    for &x1 in &axis {
        for &x2 in &axis {
            samples.push(State2 { x1, x2 });
        }
        let at_axis = exp_generator_ratio(params, theta, &State2 { x1, x2: 0.0 });
        let x2_ridge = (at_axis + a - alpha) / (alpha * theta);
        if x2_ridge > 0.0 && x2_ridge <= grid.x_max {
            samples.push(State2 { x1, x2: x2_ridge });
        }
    }

    let mut best = (f64::NEG_INFINITY, State2 { x1: 0.0, x2: 0.0 });
    for s in &samples {
        let v = log_excess(s);
        if v > best.0 {
            best = (v, *s);
        }
    }
    let b = if best.0 == f64::NEG_INFINITY { 0.0 } else { margin * best.0.exp() };
    let log_b = if b > 0.0 { b.ln() } else { f64::NEG_INFINITY };

    // Re-verify on the doubled grid against the same constants.
    let refined_axis = grid.refined().axis();
    let slack = 1e-9;
    let mut verified = b.is_finite();
    let mut witness = best.1;
    'outer: for &x1 in &refined_axis {
        for &x2 in &refined_axis {
            let v = log_excess(&State2 { x1, x2 });
            if v > log_b + slack {
                verified = false;
                witness = State2 { x1, x2 };
                break 'outer;
            }
        }
    }

    constants.insert("c0".into(), c0);
    constants.insert("proof_rate".into(), proof_rate);
    constants.insert("fraction".into(), fraction);
    constants.insert("margin".into(), margin);
    Ok(LyapunovReport {
        family,
        a,
        b,
        c: None,
        verified,
        witness: Some(witness),
        constants,
    })
}

/// `LU` for the polynomial family `U = 1 + (x1+x2)^n`.
fn poly_generator(params: &ModelParams, n: u32, s: &State2) -> f64 {
    let f = per_capita_growth(params, s);
    let sum = s.x1 + s.x2;
    let eps_sq = params.epsilon() * params.epsilon();
    let n_f = n as f64;
    n_f * sum.powi(n as i32 - 1) * (s.x1 * f[0] + s.x2 * f[1])
        + 0.5 * eps_sq * s.x1 * s.x1 * n_f * (n_f - 1.0) * sum.powi(n as i32 - 2)
}

fn poly_u(n: u32, s: &State2) -> f64 {
    1.0 + (s.x1 + s.x2).powi(n as i32)
}

fn abs_growth_sum(params: &ModelParams, s: &State2) -> f64 {
    let f = per_capita_growth(params, s);
    f[0].abs() + f[1].abs()
}

/// Four-part drift-condition check for `U = 1 + (x1+x2)^n`, `n > 2`:
///
/// 1. `LU <= -a U + b` with `a = α n / 2`;
/// 2. `Γ(U) <= c U²` with `c = ε² n²`;
/// 3. `|F1| + |F2| <= C U` with `C = 2 (2 + 1/κ + α)`;
/// 4. `LU + p0 (|F1| + |F2|) <= -δ U + b₂` with `δ = a/2`, which needs
///    `p0 < (a - δ)/C`.
pub fn lyapunov_poly_check(
    params: &ModelParams,
    n: u32,
    p0: f64,
    grid: &GridSpec,
) -> Result<LyapunovReport> {
    if n <= 2 {
        return Err(Error::InvalidParameter(format!(
            "polynomial degree must exceed 2, got {n}"
        )));
    }
    if !(p0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "growth weight p0 must be > 0, got {p0}"
        )));
    }
    let n_f = n as f64;
    let eps_sq = params.epsilon() * params.epsilon();
    let a = 0.5 * params.alpha() * n_f;
    let c = eps_sq * n_f * n_f;
    let big_c = 2.0 * (2.0 + 1.0 / params.kappa() + params.alpha());
    let delta = 0.5 * a;
    let p0_ceiling = (a - delta) / big_c;
    let margin = 1.02;
    let family = LyapunovFamily::Polynomial { n };

    let collect = |spec: &GridSpec| -> Vec<State2> {
        let axis = spec.axis();
        let mut out = Vec::with_capacity(axis.len() * axis.len());
        for &x1 in &axis {
            for &x2 in &axis {
                out.push(State2 { x1, x2 });
            }
        }
        out
    };
    let base = collect(grid);
    let refined = collect(&grid.refined());

    // Offsets fitted on the base grid.
    let mut b = 0.0f64;
    let mut b2 = 0.0f64;
    let mut witness = State2 { x1: 0.0, x2: 0.0 };
    let mut worst_excess = f64::NEG_INFINITY;
    for s in &base {
        let lu = poly_generator(params, n, s);
        let u = poly_u(n, s);
        let excess = lu + a * u;
        if excess > worst_excess {
            worst_excess = excess;
            witness = *s;
        }
        b = b.max(excess);
        b2 = b2.max(lu + p0 * abs_growth_sum(params, s) + delta * u);
    }
    b *= margin;
    b2 *= margin;

    // All four inequalities on the refined grid with the fitted constants.
    let slack = 1e-9;
    let mut drift_ok = true;
    let mut gamma_ok = true;
    let mut growth_ok = true;
    let mut combined_ok = p0 < p0_ceiling;
    for s in &refined {
        let lu = poly_generator(params, n, s);
        let u = poly_u(n, s);
        if lu > -a * u + b + slack * (1.0 + b.abs()) {
            drift_ok = false;
            witness = *s;
        }
        if carre_du_champ_ratio(params, family, s) > c * (1.0 + slack) {
            gamma_ok = false;
            witness = *s;
        }
        if abs_growth_sum(params, s) > big_c * u * (1.0 + slack) {
            growth_ok = false;
            witness = *s;
        }
        if lu + p0 * abs_growth_sum(params, s) > -delta * u + b2 + slack * (1.0 + b2.abs()) {
            combined_ok = false;
            witness = *s;
        }
    }
    let verified = drift_ok && gamma_ok && growth_ok && combined_ok;

    let mut constants = BTreeMap::new();
    constants.insert("n".into(), n_f);
    constants.insert("a".into(), a);
    constants.insert("b".into(), b);
    constants.insert("c".into(), c);
    constants.insert("big_c".into(), big_c);
    constants.insert("delta".into(), delta);
    constants.insert("p0".into(), p0);
    constants.insert("p0_ceiling".into(), p0_ceiling);
    constants.insert("b2".into(), b2);
    constants.insert("margin".into(), margin);
    constants.insert("check_drift".into(), f64::from(u8::from(drift_ok)));
    constants.insert("check_gamma".into(), f64::from(u8::from(gamma_ok)));
    constants.insert("check_growth".into(), f64::from(u8::from(growth_ok)));
    constants.insert("check_combined".into(), f64::from(u8::from(combined_ok)));
    Ok(LyapunovReport {
        family,
        a,
        b,
        c: Some(c),
        verified,
        witness: Some(witness),
        constants,
    })
}

/// A safe default growth weight for [`lyapunov_poly_check`]: half the
/// admissible ceiling.
pub fn poly_default_p0(params: &ModelParams, n: u32) -> f64 {
    let a = 0.5 * params.alpha() * n as f64;
    let big_c = 2.0 * (2.0 + 1.0 / params.kappa() + params.alpha());
    0.5 * (a - 0.5 * a) / big_c
}

/// Max absolute residual of the stationarity identity of the prey law,
/// normalized by the density maximum over the grid:
///
/// `-(d/dz)[z (1 - z/κ) γ] + (ε²/2)(d²/dz²)[z² γ] = 0`
///
/// evaluated through the analytically differentiated brackets. Grid points
/// must be strictly positive.
pub fn fokker_planck_residual(params: &ModelParams, grid: &[f64]) -> Result<f64> {
    let g = GammaStationary::from_params(params)?;
    if grid.is_empty() {
        return Err(Error::Empty("residual grid is empty".into()));
    }
    if grid.iter().any(|&z| !(z > 0.0)) {
        return Err(Error::InvalidParameter(
            "residual grid points must be strictly positive".into(),
        ));
    }
    let k = g.shape();
    let theta = g.scale();
    let half_eps_sq = 0.5 * params.epsilon() * params.epsilon();
    let mut max_residual = 0.0f64;
    let mut max_density = 0.0f64;
    for &z in grid {
        let density = g.log_density(z).exp();
        // d/dz[z(1-z/κ)γ] = γ (k - 2z/θ + z²/((k+1)θ²))
        let first = k - 2.0 * z / theta + z * z / ((k + 1.0) * theta * theta);
        // d²/dz²[z²γ] = γ (k(k+1) - 2(k+1)z/θ + z²/θ²)
        let second = k * (k + 1.0) - 2.0 * (k + 1.0) * z / theta + z * z / (theta * theta);
        let residual = density * (-first + half_eps_sq * second);
        max_residual = max_residual.max(residual.abs());
        max_density = max_density.max(density);
    }
    if max_density == 0.0 {
        return Err(Error::NonFinite("density vanished on the whole grid".into()));
    }
    Ok(max_residual / max_density)
}

/// Same residual through central finite differences of the undifferentiated
/// brackets; the independent cross-check of [`fokker_planck_residual`].
/// Step `h` must keep `z - h > 0` for every grid point.
pub fn fokker_planck_residual_fd(params: &ModelParams, grid: &[f64], h: f64) -> Result<f64> {
    let g = GammaStationary::from_params(params)?;
    if grid.is_empty() {
        return Err(Error::Empty("residual grid is empty".into()));
    }
    if !(h > 0.0) || grid.iter().any(|&z| !(z - h > 0.0)) {
        return Err(Error::InvalidParameter(
            "finite-difference step must satisfy 0 < h < min(grid)".into(),
        ));
    }
    let kappa = params.kappa();
    let half_eps_sq = 0.5 * params.epsilon() * params.epsilon();
    let density = |z: f64| g.log_density(z).exp();
    let flux = |z: f64| z * (1.0 - z / kappa) * density(z);
    let spread = |z: f64| z * z * density(z);
    let mut max_residual = 0.0f64;
    let mut max_density = 0.0f64;
    for &z in grid {
        let first = (flux(z + h) - flux(z - h)) / (2.0 * h);
        let second = (spread(z + h) - 2.0 * spread(z) + spread(z - h)) / (h * h);
        let residual = -first + half_eps_sq * second;
        max_residual = max_residual.max(residual.abs());
        max_density = max_density.max(density(z));
    }
    Ok(max_residual / max_density)
}

/// Closed form of the bracket determinant `det([S⁰, S¹], S¹)` of the
/// Stratonovich fields: `x1² ε² x2 / (1+x1)²`. Strictly positive on the open
/// quadrant, zero on the axes.
pub fn hormander_det(params: &ModelParams, s: &State2) -> f64 {
    let eps = params.epsilon();
    let denom = (1.0 + s.x1) * (1.0 + s.x1);
    s.x1 * s.x1 * eps * eps * s.x2 / denom
}

/// Stratonovich drift field `S⁰` (the Itô drift corrected by
/// `-½ Σ (∂S¹/∂x) S¹`) and noise field `S¹`.
fn stratonovich_fields(params: &ModelParams, s: &State2) -> ([f64; 2], [f64; 2]) {
    let f = per_capita_growth(params, s);
    let eps = params.epsilon();
    let drift = [s.x1 * (f[0] - 0.5 * eps * eps), s.x2 * f[1]];
    let noise = [eps * s.x1, 0.0];
    (drift, noise)
}

/// Bracket determinant computed numerically: Jacobians of the Stratonovich
/// fields by central differences, then `det([S⁰, S¹], S¹)`.
pub fn hormander_det_numeric(params: &ModelParams, s: &State2, h: f64) -> f64 {
    let jacobian = |pick: &dyn Fn(&State2) -> [f64; 2]| -> [[f64; 2]; 2] {
        let mut j = [[0.0; 2]; 2];
        for col in 0..2 {
            let step = h * (1.0 + if col == 0 { s.x1.abs() } else { s.x2.abs() });
            let mut plus = *s;
            let mut minus = *s;
            if col == 0 {
                plus.x1 += step;
                minus.x1 -= step;
            } else {
                plus.x2 += step;
                minus.x2 -= step;
            }
            let fp = pick(&plus);
            let fm = pick(&minus);
            for row in 0..2 {
                j[row][col] = (fp[row] - fm[row]) / (2.0 * step);
            }
        }
        j
    };
    let j_drift = jacobian(&|x| stratonovich_fields(params, x).0);
    let j_noise = jacobian(&|x| stratonovich_fields(params, x).1);
    let (drift, noise) = stratonovich_fields(params, s);
    // [S⁰, S¹] = J_{S¹} S⁰ − J_{S⁰} S¹
    let bracket = [
        j_noise[0][0] * drift[0] + j_noise[0][1] * drift[1]
            - (j_drift[0][0] * noise[0] + j_drift[0][1] * noise[1]),
        j_noise[1][0] * drift[0] + j_noise[1][1] * drift[1]
            - (j_drift[1][0] * noise[0] + j_drift[1][1] * noise[1]),
    ];
    bracket[0] * noise[1] - bracket[1] * noise[0]
}

/// Exponents governing the polynomial total-variation convergence rate in
/// the coexistence regime, for a polynomial energy function of degree `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateExponents {
    pub n: u32,
    /// Balance point `q0 = 1 + α/(ε² n)` of decay against noise load.
    pub q0: f64,
    /// Upper end of the admissible exponent range: `q0` when
    /// `α/ε² <= n/2`, otherwise `(q0+2)/2`.
    pub q_max: f64,
    /// Default choice, the midpoint of `(1, q_max)`.
    pub q: f64,
    /// Total-variation rate exponent `q - 1` for the default `q`.
    pub lambda_tv: f64,
    /// Admissible moment orders `[1, q]`.
    pub beta_range: (f64, f64),
    /// Shape of the weight norm for the default `q`.
    pub weight_form: String,
}

/// Compute the rate exponents. Requires `n > 2` and the coexistence regime
/// (`ε² < 2` with positive invasion rate).
pub fn rate_exponents(params: &ModelParams, n: u32) -> Result<RateExponents> {
    if n <= 2 {
        return Err(Error::InvalidParameter(format!(
            "polynomial degree must exceed 2, got {n}"
        )));
    }
    if !params.noise_subcritical() {
        return Err(Error::InvalidParameter(
            "rate exponents need epsilon^2 < 2".into(),
        ));
    }
    let lambda = lambda_invasion(params)?;
    if lambda <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rate exponents need a positive invasion rate, got {lambda}"
        )));
    }
    let eps_sq = params.epsilon() * params.epsilon();
    let n_f = n as f64;
    let q0 = 1.0 + params.alpha() / (eps_sq * n_f);
    let ratio = params.alpha() / eps_sq;
    let q_max = if ratio <= 0.5 * n_f { q0 } else { 0.5 * (q0 + 2.0) };
    let q = 0.5 * (1.0 + q_max);
    let weight_form = if q <= 2.0 {
        format!("V^q + C U^q (q = {q})")
    } else {
        format!("V^q + C U^(2q-2) (q = {q})")
    };
    Ok(RateExponents {
        n,
        q0,
        q_max,
        q,
        lambda_tv: q - 1.0,
        beta_range: (1.0, q),
        weight_form,
    })
}

/// Asymptotic log-rate bounds in the extinction regimes. Rejects parameters
/// in the coexistence or critical regime.
pub fn extinction_rate_bounds(params: &ModelParams) -> Result<Vec<RateBound>> {
    let report = classify_regime(params, CRITICAL_TOL_DEFAULT)?;
    match report.regime {
        Regime::PredatorExtinction | Regime::TotalExtinction => Ok(report.rate_bounds),
        other => Err(Error::InvalidParameter(format!(
            "extinction rate bounds are defined only in extinction regimes, got {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{sample_gamma, SplitMix64};

    fn params(eps: f64, alpha: f64, kappa: f64) -> ModelParams {
        ModelParams::new(eps, alpha, kappa).unwrap()
    }

    #[test]
    fn lambda_matches_reported_values() {
        // Reported to two decimals for three parameter sets.
        assert!((lambda_invasion(&params(0.6, 0.3, 2.5)).unwrap() - 0.34).abs() < 0.01);
        assert!((lambda_invasion(&params(0.6, 0.9, 2.5)).unwrap() + 0.26).abs() < 0.01);
        assert!((lambda_invasion(&params(1.35, 0.6, 4.5)).unwrap() + 0.48).abs() < 0.01);
    }

    #[test]
    fn lambda_small_noise_limit() {
        let lam = lambda_invasion(&params(0.01, 0.3, 2.5)).unwrap();
        assert!((lam - (2.5 / 3.5 - 0.3)).abs() < 0.002, "got {lam}");
    }

    #[test]
    fn lambda_near_critical_noise_limit() {
        let lam = lambda_invasion(&params(1.41, 0.5, 2.5)).unwrap();
        assert!((lam + 0.5).abs() < 0.02, "got {lam}");
    }

    #[test]
    fn lambda_rejects_supercritical_noise() {
        assert!(lambda_invasion(&params(1.5, 0.6, 4.5)).is_err());
    }

    #[test]
    fn lambda_is_affine_in_alpha() {
        for &(eps, kappa) in &[(0.6, 2.5), (1.1, 0.8), (0.3, 7.0)] {
            let base = lambda_invasion(&params(eps, 1.0, kappa)).unwrap() + 1.0;
            for &alpha in &[0.1, 0.5, 0.9] {
                let lam = lambda_invasion(&params(eps, alpha, kappa)).unwrap();
                assert!((lam - (base - alpha)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lambda_agrees_with_monte_carlo() {
        let p = params(0.6, 0.3, 2.5);
        let g = GammaStationary::from_params(&p).unwrap();
        let lam = lambda_invasion(&p).unwrap();
        let mut rng = SplitMix64::new(2024);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = sample_gamma(&mut rng, g.shape(), g.scale());
            let v = x / (1.0 + x);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(
            ((lam + p.alpha()) - mean).abs() < 4.0 * se,
            "quadrature {} vs sample {mean} (se {se})",
            lam + p.alpha()
        );
    }

    #[test]
    fn regime_classification() {
        assert_eq!(
            classify_regime(&params(0.6, 0.3, 2.5), CRITICAL_TOL_DEFAULT).unwrap().regime,
            Regime::Persistence
        );
        assert_eq!(
            classify_regime(&params(0.6, 0.9, 2.5), CRITICAL_TOL_DEFAULT).unwrap().regime,
            Regime::PredatorExtinction
        );
        let total = classify_regime(&params(1.5, 0.6, 4.5), CRITICAL_TOL_DEFAULT).unwrap();
        assert_eq!(total.regime, Regime::TotalExtinction);
        assert!(total.lambda.is_none());
        assert_eq!(total.rate_bounds.len(), 2);
    }

    #[test]
    fn critical_band_maps_to_critical() {
        // A generous band forces the persistence case into Critical.
        let report = classify_regime(&params(0.6, 0.3, 2.5), 1.0).unwrap();
        assert_eq!(report.regime, Regime::Critical);
        assert!(report.lambda.is_some());
    }

    #[test]
    fn pointwise_invasion_rates_at_origin() {
        let p = params(0.6, 0.3, 2.5);
        let origin = State2 { x1: 0.0, x2: 0.0 };
        assert!((invasion_rate_at(&p, Species::Prey, &origin) - 0.82).abs() < 1e-12);
        assert!((invasion_rate_at(&p, Species::Predator, &origin) + 0.3).abs() < 1e-12);
    }

    #[test]
    fn predator_invasion_mean_equals_lambda() {
        // The predator's pointwise rate averaged against the stationary prey
        // law is exactly the invasion rate.
        let p = params(0.6, 0.3, 2.5);
        let g = GammaStationary::from_params(&p).unwrap();
        let mean = integrate_against_gamma(&g, |x| {
            invasion_rate_at(&p, Species::Predator, &State2 { x1: x, x2: 0.0 })
        })
        .unwrap();
        let lam = lambda_invasion(&p).unwrap();
        assert!((mean - lam).abs() < 1e-7);
    }

    #[test]
    fn weights_exist_only_in_coexistence() {
        let w = hofbauer_weights(&params(0.6, 0.3, 2.5)).unwrap().unwrap();
        assert!((w.p1 - 0.731_707_317_073).abs() < 1e-9);
        assert_eq!(w.p2, 1.0);
        assert!(hofbauer_weights(&params(0.6, 0.9, 2.5)).unwrap().is_none());
        assert!(hofbauer_weights(&params(1.5, 0.6, 4.5)).unwrap().is_none());
    }

    #[test]
    fn exp_check_accepts_below_ceiling() {
        let p = params(0.6, 0.3, 2.5);
        assert!((p.theta_star() - 2.2222222222).abs() < 1e-9);
        let report = lyapunov_exp_check(&p, 1.1, &GridSpec::default()).unwrap();
        assert!(report.verified, "constants: {:?}", report.constants);
        assert!(report.a > 0.0 && report.b >= 0.0);
    }

    #[test]
    fn exp_check_rejects_above_ceiling() {
        let p = params(0.6, 0.3, 2.5);
        let report = lyapunov_exp_check(&p, 2.0 * p.theta_star(), &GridSpec::default()).unwrap();
        assert!(!report.verified);
        let w = report.witness.unwrap();
        // The violation shows up on the prey axis at large density.
        assert!(w.x2 < 1e-9, "witness {w:?}");
        assert!(w.x1 > 10.0, "witness {w:?}");
        assert!(lyapunov_exp_check(&p, -1.0, &GridSpec::default()).is_err());
    }

    #[test]
    fn exp_check_origin_needs_no_offset() {
        let p = params(0.6, 0.3, 2.5);
        let ratio = exp_generator_ratio(&p, 1.1, &State2 { x1: 0.0, x2: 0.0 });
        assert_eq!(ratio, 0.0);
    }

    #[test]
    fn exp_check_stable_under_refinement() {
        let p = params(0.6, 0.3, 2.5);
        let coarse = lyapunov_exp_check(&p, 1.1, &GridSpec::default()).unwrap();
        let fine = lyapunov_exp_check(&p, 1.1, &GridSpec::default().refined()).unwrap();
        assert!(coarse.verified && fine.verified);
        let ratio = fine.b / coarse.b;
        assert!(ratio > 0.8 && ratio < 1.25, "offsets {} vs {}", coarse.b, fine.b);
    }

    #[test]
    fn poly_check_passes_for_cubic() {
        let p = params(0.6, 0.3, 2.5);
        let report =
            lyapunov_poly_check(&p, 3, poly_default_p0(&p, 3), &GridSpec::default()).unwrap();
        assert!(report.verified, "constants: {:?}", report.constants);
        assert!((report.c.unwrap() - 0.36 * 9.0).abs() < 1e-12);
        assert!(lyapunov_poly_check(&p, 2, 0.1, &GridSpec::default()).is_err());
        assert!(lyapunov_poly_check(&p, 3, 0.0, &GridSpec::default()).is_err());
    }

    #[test]
    fn carre_du_champ_ratio_saturates_for_polynomial() {
        let p = params(0.6, 0.3, 2.5);
        let family = LyapunovFamily::Polynomial { n: 3 };
        let cap = 0.36 * 9.0;
        let mut last = 0.0;
        for &x1 in &[1.0, 10.0, 100.0, 1000.0] {
            let r = carre_du_champ_ratio(&p, family, &State2 { x1, x2: 0.0 });
            assert!(r <= cap * (1.0 + 1e-12));
            assert!(r > last);
            last = r;
        }
        assert!((last - cap).abs() < 0.01 * cap);
    }

    #[test]
    fn carre_du_champ_ratio_unbounded_for_exponential() {
        // The quadratic bound fails for the exponential family: the ratio
        // grows without limit along the prey axis.
        let p = params(0.6, 0.3, 2.5);
        let family = LyapunovFamily::Exponential { theta: 1.1 };
        let r10 = carre_du_champ_ratio(&p, family, &State2 { x1: 10.0, x2: 0.0 });
        let r100 = carre_du_champ_ratio(&p, family, &State2 { x1: 100.0, x2: 0.0 });
        assert!((r10 - 0.36 * 1.21 * 100.0).abs() < 1e-9);
        assert!(r100 > 99.0 * r10);
    }

    #[test]
    fn stationarity_residual_is_tiny() {
        let grid: Vec<f64> = (1..=1000).map(|i| i as f64 * 0.02).collect();
        for p in [params(1.0, 0.3, 1.0), params(0.6, 0.3, 2.5), params(1.35, 0.6, 4.5)] {
            let r = fokker_planck_residual(&p, &grid).unwrap();
            assert!(r < 1e-10, "residual {r} for {p:?}");
        }
        assert!(fokker_planck_residual(&params(1.5, 0.6, 4.5), &grid).is_err());
        assert!(fokker_planck_residual(&params(1.0, 0.3, 1.0), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn stationarity_residual_matches_finite_differences() {
        let grid: Vec<f64> = (5..=1000).map(|i| i as f64 * 0.02).collect();
        for p in [params(1.0, 0.3, 1.0), params(0.6, 0.3, 2.5)] {
            let analytic = fokker_planck_residual(&p, &grid).unwrap();
            let fd = fokker_planck_residual_fd(&p, &grid, 1e-4).unwrap();
            assert!((analytic - fd).abs() < 1e-5, "analytic {analytic} vs fd {fd}");
        }
    }

    #[test]
    fn bracket_determinant_closed_form() {
        let p = params(0.6, 0.3, 2.5);
        let det = hormander_det(&p, &State2 { x1: 1.0, x2: 1.0 });
        assert!((det - 0.09).abs() < 1e-12);
        assert_eq!(hormander_det(&p, &State2 { x1: 1.0, x2: 0.0 }), 0.0);
        assert_eq!(hormander_det(&p, &State2 { x1: 0.0, x2: 1.0 }), 0.0);
    }

    #[test]
    fn bracket_determinant_numeric_agreement() {
        let p = params(0.6, 0.3, 2.5);
        let mut rng = SplitMix64::new(7);
        for _ in 0..100 {
            let s = State2 {
                x1: 0.1 + 9.9 * rng.next_uniform(),
                x2: 0.1 + 9.9 * rng.next_uniform(),
            };
            let exact = hormander_det(&p, &s);
            let numeric = hormander_det_numeric(&p, &s, 1e-6);
            assert!(
                ((numeric - exact) / exact).abs() < 1e-5,
                "at {s:?}: exact {exact}, numeric {numeric}"
            );
        }
    }

    #[test]
    fn rate_exponents_branches() {
        // alpha/eps^2 = 1.667 > n/2 = 1.5: the shifted branch.
        let r = rate_exponents(&params(0.6, 0.6, 6.0), 3).unwrap();
        assert!((r.q0 - (1.0 + 0.6 / (0.36 * 3.0))).abs() < 1e-12);
        assert!((r.q_max - (1.5 + 0.6 / (2.0 * 0.36 * 3.0))).abs() < 1e-12);
        assert!((r.q_max - 1.7777777778).abs() < 1e-9);
        // alpha/eps^2 = 0.833 < 1.5: q_max = q0.
        let r2 = rate_exponents(&params(0.6, 0.3, 2.5), 3).unwrap();
        assert!((r2.q_max - r2.q0).abs() < 1e-15);
        assert!((r2.q0 - 1.2777777778).abs() < 1e-9);
        assert!(r2.lambda_tv > 0.0 && r2.q_max > 1.0);
    }

    #[test]
    fn rate_exponents_reject_outside_coexistence() {
        assert!(rate_exponents(&params(0.6, 0.9, 2.5), 3).is_err());
        assert!(rate_exponents(&params(1.5, 0.6, 4.5), 3).is_err());
        assert!(rate_exponents(&params(0.6, 0.3, 2.5), 2).is_err());
    }

    #[test]
    fn extinction_bounds_by_regime() {
        let bounds = extinction_rate_bounds(&params(0.6, 0.9, 2.5)).unwrap();
        assert_eq!(bounds.len(), 1);
        assert!(bounds[0].exact);
        assert!((bounds[0].bound + 0.26).abs() < 0.01);

        let bounds = extinction_rate_bounds(&params(1.5, 0.6, 4.5)).unwrap();
        assert_eq!(bounds.len(), 2);
        assert!((bounds[0].bound + 0.125).abs() < 1e-12);
        assert!((bounds[1].bound + 0.6).abs() < 1e-12);

        assert!(extinction_rate_bounds(&params(0.6, 0.3, 2.5)).is_err());
    }

    #[test]
    fn extinction_bound_continuous_at_noise_threshold() {
        let eps = 2f64.sqrt() + 1e-9;
        let bounds = extinction_rate_bounds(&params(eps, 0.6, 4.5)).unwrap();
        assert!(bounds[0].bound < 0.0 && bounds[0].bound > -1e-8);
    }
}
