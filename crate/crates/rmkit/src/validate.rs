//! End-to-end validation suite.
//!
//! Thirteen numbered checks pin the crate's behavior: exact arithmetic and
//! quadrature identities (fast) and Monte Carlo reproductions of the
//! asymptotic statements at desk scale (full). Every tolerance is fixed
//! here, and every stochastic check runs from a fixed seed. The suite backs
//! both `rmkit validate` and the acceptance test target.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::control::{self, ControlPlan};
use crate::integrate::{
    coupled_compare, exact_logistic, simulate_em, simulate_em_logistic, BrownianPath, Scheme,
};
use crate::model::{GammaStationary, ModelParams, Species, State2};
use crate::occupation::{
    accumulate_stream, summarize_slopes, time_average_stream, OccupationHistogram, Rect,
};
use crate::persistence::{
    classify_regime, fokker_planck_residual, hofbauer_weights, hormander_det,
    hormander_det_numeric, lambda_invasion, lyapunov_exp_check, lyapunov_poly_check,
    mean_functional_response, poly_default_p0, rate_exponents, GridSpec, Regime,
    CRITICAL_TOL_DEFAULT,
};
use crate::rng::{derive_stream_seed, SplitMix64};
use crate::Result;

/// Verdict of one numbered check.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub details: String,
    pub runtime_s: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:2}. {} ({:.2}s) - {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.runtime_s,
            self.details
        )
    }
}

/// Suite depth: `Fast` runs the analytic and certificate checks, `Full`
/// adds the Monte Carlo reproductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

/// Criteria cheap enough for a pre-commit loop.
pub const FAST_CRITERIA: &[usize] = &[1, 2, 3, 4, 11, 12];

fn timed<F: FnOnce() -> Result<(bool, String)>>(id: usize, name: &str, f: F) -> CriterionResult {
    let start = Instant::now();
    let (passed, details) = match f() {
        Ok(ok) => ok,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name: name.to_string(),
        passed,
        details,
        runtime_s: start.elapsed().as_secs_f64(),
    }
}

fn params(eps: f64, alpha: f64, kappa: f64) -> ModelParams {
    ModelParams::new(eps, alpha, kappa).expect("validation parameters are valid")
}

/// Check the three documented invasion-rate values through an arbitrary
/// evaluator (so a tampered evaluator demonstrably fails).
pub fn check_lambda_reference_values<F: Fn(&ModelParams) -> Result<f64>>(
    lambda: F,
) -> Result<(bool, String)> {
    let cases = [
        ((0.6, 0.3, 2.5), 0.34),
        ((0.6, 0.9, 2.5), -0.26),
        ((1.35, 0.6, 4.5), -0.48),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for ((eps, alpha, kappa), expected) in cases {
        let got = lambda(&params(eps, alpha, kappa))?;
        let pass = (got - expected).abs() < 0.01;
        ok &= pass;
        parts.push(format!("Λ({eps},{alpha},{kappa}) = {got:.4} vs {expected} ± 0.01"));
    }
    Ok((ok, parts.join("; ")))
}

/// 1. Reference invasion-rate values at the three documented parameter sets.
pub fn criterion_01_lambda_reference() -> CriterionResult {
    timed(1, "invasion rate reference values", || {
        check_lambda_reference_values(lambda_invasion)
    })
}

/// 2. Small-noise and near-critical-noise limits of the invasion rate.
pub fn criterion_02_lambda_limits() -> CriterionResult {
    timed(2, "invasion rate limits", || {
        let small = lambda_invasion(&params(0.01, 0.3, 2.5))?;
        let small_target = 2.5 / 3.5 - 0.3;
        let near = lambda_invasion(&params(1.41, 0.5, 2.5))?;
        let ok_small = (small - small_target).abs() < 0.002;
        let ok_near = (near + 0.5).abs() < 0.02;
        Ok((
            ok_small && ok_near,
            format!(
                "Λ(0.01,0.3,2.5) = {small:.5} vs {small_target:.5} ± 0.002; \
                 Λ(1.41,0.5,2.5) = {near:.5} vs -0.5 ± 0.02"
            ),
        ))
    })
}

/// 3. Affinity in the mortality parameter: Λ(ε,α,κ) = Λ₀(ε,κ) − α.
pub fn criterion_03_lambda_affinity() -> CriterionResult {
    timed(3, "invasion rate affine in mortality", || {
        let mut rng = SplitMix64::new(301);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let eps = 0.05 + 1.35 * rng.next_uniform();
            let kappa = 0.3 + 7.7 * rng.next_uniform();
            let base = mean_functional_response(&GammaStationary::from_params(&params(
                eps, 0.5, kappa,
            ))?)?;
            for alpha in [0.1, 0.5, 0.9] {
                let lam = lambda_invasion(&params(eps, alpha, kappa))?;
                worst = worst.max((lam - (base - alpha)).abs());
            }
        }
        Ok((worst < 1e-6, format!("max |Λ(ε,α,κ) − (Λ₀ − α)| = {worst:.2e} (< 1e-6)")))
    })
}

/// 4. Stationarity identity of the prey law: analytic residual at rounding
/// level on three parameter sets.
pub fn criterion_04_stationarity_identity() -> CriterionResult {
    timed(4, "stationary-law identity residual", || {
        let grid: Vec<f64> = (1..=1000).map(|i| i as f64 * 0.02).collect();
        let cases = [(1.0, 0.3, 1.0), (0.6, 0.3, 2.5), (1.35, 0.6, 4.5)];
        let mut ok = true;
        let mut parts = Vec::new();
        for (eps, alpha, kappa) in cases {
            let p = params(eps, alpha, kappa);
            if !p.noise_subcritical() {
                ok = false;
                parts.push(format!("({eps},{kappa}): unexpectedly outside ε² < 2"));
                continue;
            }
            let r = fokker_planck_residual(&p, &grid)?;
            ok &= r < 1e-10;
            parts.push(format!("residual({eps},{kappa}) = {r:.2e}"));
        }
        // The identity must refuse to evaluate beyond the noise threshold.
        ok &= fokker_planck_residual(&params(1.5, 0.6, 4.5), &grid).is_err();
        parts.push("ε² ≥ 2 rejected".into());
        Ok((ok, parts.join("; ")))
    })
}

/// 5. Strong convergence of the plain scheme against the explicit logistic
/// solution: log-log error slope in [0.35, 0.65].
pub fn criterion_05_strong_convergence() -> CriterionResult {
    timed(5, "strong-order slope of the plain scheme", || {
        let p = params(0.6, 0.3, 2.5);
        let z0 = 1.0;
        let n_paths: u64 = 200;
        let finest_exp = 12u32;
        let levels: Vec<u32> = (6..=finest_exp).collect();
        let errors: Vec<(f64, f64)> = levels
            .iter()
            .map(|&level| {
                let sum_sq: f64 = (0..n_paths)
                    .into_par_iter()
                    .map(|i| {
                        let seed = derive_stream_seed(501, i);
                        let fine = BrownianPath::generate(
                            seed,
                            0.5f64.powi(finest_exp as i32),
                            1 << finest_exp,
                        )
                        .expect("valid path");
                        let exact = exact_logistic(&p, z0, &fine).expect("valid start");
                        let coarse = fine.coarsen(1 << (finest_exp - level)).expect("divides");
                        let em = simulate_em_logistic(&p, z0, &coarse, Scheme::Plain)
                            .expect("valid start");
                        let d = em.last_value() - exact.last_value();
                        d * d
                    })
                    .sum();
                let dt = 0.5f64.powi(level as i32);
                (dt.ln(), (sum_sq / n_paths as f64).sqrt().ln())
            })
            .collect();
        let n = errors.len() as f64;
        let sx: f64 = errors.iter().map(|e| e.0).sum();
        let sy: f64 = errors.iter().map(|e| e.1).sum();
        let sxx: f64 = errors.iter().map(|e| e.0 * e.0).sum();
        let sxy: f64 = errors.iter().map(|e| e.0 * e.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        Ok((
            (0.35..=0.65).contains(&slope),
            format!("slope = {slope:.3} over dt ∈ {{2^-6..2^-12}}, 200 paths (band [0.35, 0.65])"),
        ))
    })
}

/// 6. Pathwise domination of the prey by the logistic law on shared noise.
pub fn criterion_06_pathwise_comparison() -> CriterionResult {
    timed(6, "pathwise comparison violations", || {
        let p = params(0.6, 0.3, 2.5);
        let x0 = State2 { x1: 0.75, x2: 1.25 };
        let total: usize = (0..50u64)
            .into_par_iter()
            .map(|i| {
                let path =
                    BrownianPath::generate(derive_stream_seed(601, i), 1e-3, 100_000)
                        .expect("valid path");
                coupled_compare(&p, x0, &path).expect("valid start").violations
            })
            .sum();
        Ok((total == 0, format!("{total} violations over 50 seeds, T = 100, dt = 1e-3")))
    })
}

/// 7. Predator log-rate in the predator-extinction regime equals the
/// invasion rate (the bound is attained).
pub fn criterion_07_predator_extinction_rate() -> CriterionResult {
    timed(7, "predator extinction log-rate", || {
        let p = params(0.6, 0.9, 2.5);
        let lambda = lambda_invasion(&p)?;
        let x0 = State2 { x1: 0.75, x2: 1.25 };
        let dt = 1e-3;
        let n_steps = 500_000; // T = 500
        let slopes: Vec<f64> = (0..100u64)
            .into_par_iter()
            .filter_map(|i| {
                let path = BrownianPath::generate(derive_stream_seed(701, i), dt, n_steps)
                    .expect("valid path");
                let traj = simulate_em(&p, x0, &path, Scheme::LogSpace);
                crate::occupation::log_slope_second_half(&traj, Species::Predator)
            })
            .collect();
        let est = summarize_slopes(&slopes, 100)?;
        let ok = (est.slope - lambda).abs() < 0.05;
        Ok((
            ok,
            format!(
                "slope = {:.4} ± {:.4} vs Λ = {lambda:.4} (tolerance 0.05, {} paths)",
                est.slope, est.std_err, est.paths_used
            ),
        ))
    })
}

/// 8. Total-extinction log-rates respect the drift bounds.
pub fn criterion_08_total_extinction_rates() -> CriterionResult {
    timed(8, "total extinction log-rates", || {
        let p = params(1.5, 0.6, 4.5);
        let x0 = State2 { x1: 0.75, x2: 1.25 };
        let dt = 1e-3;
        let n_steps = 300_000; // T = 300
        let slope_pairs: Vec<(Option<f64>, Option<f64>)> = (0..100u64)
            .into_par_iter()
            .map(|i| {
                let path = BrownianPath::generate(derive_stream_seed(801, i), dt, n_steps)
                    .expect("valid path");
                let traj = simulate_em(&p, x0, &path, Scheme::LogSpace);
                (
                    crate::occupation::log_slope_second_half(&traj, Species::Prey),
                    crate::occupation::log_slope_second_half(&traj, Species::Predator),
                )
            })
            .collect();
        let prey_slopes: Vec<f64> = slope_pairs.iter().filter_map(|s| s.0).collect();
        let predator_slopes: Vec<f64> = slope_pairs.iter().filter_map(|s| s.1).collect();
        let prey = summarize_slopes(&prey_slopes, slope_pairs.len())?;
        let predator = summarize_slopes(&predator_slopes, slope_pairs.len())?;
        let prey_bound = 1.0 - 0.5 * 1.5 * 1.5; // -0.125
        let predator_bound = -0.6;
        let ok = prey.slope <= prey_bound + 0.05 && predator.slope <= predator_bound + 0.05;
        Ok((
            ok,
            format!(
                "prey slope {:.4} ≤ {prey_bound} + 0.05; predator slope {:.4} ≤ {predator_bound} + 0.05",
                prey.slope, predator.slope
            ),
        ))
    })
}

/// 9. Occupation of the prey marginal converges to the stationary law in
/// the predator-extinction regime.
pub fn criterion_09_occupation_ks() -> CriterionResult {
    timed(9, "occupation KS to stationary prey law", || {
        let p = params(0.6, 0.9, 2.5);
        let g = GammaStationary::from_params(&p)?;
        let mut hist = OccupationHistogram::default_bins();
        let dt = 1e-3;
        let burn_in = 1_000_000; // t = 1e3
        let n_steps = 11_000_000; // burn-in + T = 1e4
        accumulate_stream(
            &mut hist,
            &p,
            State2 { x1: 0.75, x2: 1.25 },
            Scheme::LogSpace,
            dt,
            n_steps,
            burn_in,
            901,
        )?;
        let ks = hist.ks_to_gamma_marginal(&g)?;
        Ok((ks < 0.05, format!("KS = {ks:.4} after burn-in 1e3, T = 1e4 (< 0.05)")))
    })
}

/// 10. Stochastic persistence at desk scale: compact-set mass and a stable
/// exponential-moment time average.
pub fn criterion_10_persistence_mass() -> CriterionResult {
    timed(10, "persistence mass and exponential moment", || {
        let p = params(0.6, 0.3, 2.5);
        let x0 = State2 { x1: 0.75, x2: 1.25 };
        let dt = 1e-3;
        let t_steps = 10_000_000; // T = 1e4
        let mut hist = OccupationHistogram::default_bins();
        accumulate_stream(&mut hist, &p, x0, Scheme::LogSpace, dt, t_steps, 0, 1001)?;
        let mass = hist.fraction_in(&Rect {
            x1_lo: 0.05,
            x1_hi: 20.0,
            x2_lo: 0.05,
            x2_hi: 20.0,
        })?;
        let theta = 0.5 * p.theta_star();
        let averages = time_average_stream(
            &p,
            x0,
            Scheme::LogSpace,
            dt,
            &[t_steps, 2 * t_steps],
            1001,
            |s| (theta * (s.x1 + s.x2)).exp(),
        )?;
        let ratio = averages[1] / averages[0];
        let ok = mass >= 0.95 && averages.iter().all(|a| a.is_finite()) && (0.5..=2.0).contains(&ratio);
        Ok((
            ok,
            format!(
                "mass([0.05,20]²) = {mass:.4} (≥ 0.95); exp-moment avg {:.3} → {:.3}, ratio {ratio:.3} in [0.5, 2]",
                averages[0], averages[1]
            ),
        ))
    })
}

/// 11. Certificates: drift conditions, bracket determinant, boundary
/// weights.
pub fn criterion_11_certificates() -> CriterionResult {
    timed(11, "certificate checks", || {
        let p = params(0.6, 0.3, 2.5);
        let grid = GridSpec::default();
        let mut ok = true;
        let mut parts = Vec::new();

        let pass = lyapunov_exp_check(&p, 0.5 * p.theta_star(), &grid)?;
        ok &= pass.verified;
        parts.push(format!("exp θ*/2 verified = {}", pass.verified));
        let fail = lyapunov_exp_check(&p, 2.0 * p.theta_star(), &grid)?;
        ok &= !fail.verified;
        parts.push(format!("exp 2θ* verified = {}", fail.verified));

        let poly = lyapunov_poly_check(&p, 3, poly_default_p0(&p, 3), &grid)?;
        ok &= poly.verified;
        parts.push(format!("poly n=3 verified = {}", poly.verified));

        let mut rng = SplitMix64::new(1101);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let s = State2 {
                x1: 0.1 + 9.9 * rng.next_uniform(),
                x2: 0.1 + 9.9 * rng.next_uniform(),
            };
            let exact = hormander_det(&p, &s);
            let numeric = hormander_det_numeric(&p, &s, 1e-6);
            worst = worst.max(((numeric - exact) / exact).abs());
        }
        ok &= worst < 1e-5;
        parts.push(format!("bracket det rel err = {worst:.2e} (< 1e-5)"));

        for (case, expect_some) in [
            ((0.6, 0.3, 2.5), true),
            ((0.6, 0.9, 2.5), false),
            ((1.5, 0.6, 4.5), false),
        ] {
            let pc = params(case.0, case.1, case.2);
            let regime = classify_regime(&pc, CRITICAL_TOL_DEFAULT)?.regime;
            let got = hofbauer_weights(&pc)?.is_some();
            ok &= got == expect_some && got == (regime == Regime::Persistence);
        }
        parts.push("weights exist iff persistence".into());
        Ok((ok, parts.join("; ")))
    })
}

/// 12. Convergence-rate exponents: exact arithmetic on both branches.
pub fn criterion_12_rate_exponents() -> CriterionResult {
    timed(12, "convergence-rate exponents", || {
        // Branch with alpha/eps^2 > n/2 (shifted ceiling).
        let shifted = rate_exponents(&params(0.6, 0.6, 6.0), 3)?;
        let q0_expected = 1.0 + 0.6 / (0.36 * 3.0);
        let ok1 = (shifted.q0 - q0_expected).abs() < 1e-12
            && (shifted.q_max - (1.5 + 0.6 / (2.0 * 0.36 * 3.0))).abs() < 1e-12;
        // Branch with alpha/eps^2 < n/2 (ceiling at q0).
        let plain = rate_exponents(&params(0.6, 0.3, 2.5), 3)?;
        let ok2 = (plain.q0 - (1.0 + 0.3 / (0.36 * 3.0))).abs() < 1e-12
            && (plain.q_max - plain.q0).abs() < 1e-15;
        let ok3 = shifted.lambda_tv > 0.0 && plain.lambda_tv > 0.0;
        Ok((
            ok1 && ok2 && ok3,
            format!(
                "q0 = {:.6}, q_max = {:.6} (shifted); q0 = q_max = {:.6} (plain); λ_tv > 0",
                shifted.q0, shifted.q_max, plain.q0
            ),
        ))
    })
}

/// Pointwise invariants every steering trajectory must satisfy.
pub fn check_reach_invariants(
    params: &ModelParams,
    outcome: &control::ReachOutcome,
) -> std::result::Result<(), String> {
    let states = &outcome.trajectory.states;
    if !states.iter().all(|s| s.x1 > 0.0 && s.x2 > 0.0) {
        return Err("trajectory left the open quadrant".into());
    }
    let line = params.predator_nullcline_x1();
    for (idx, phase) in outcome.phases.iter().enumerate() {
        let slice = &states[phase.start_index..=phase.end_index];
        match idx {
            0 => {
                if !slice.windows(2).all(|w| w[1].x1 < w[0].x1) {
                    return Err("phase 1: prey not strictly decreasing".into());
                }
            }
            1 => {
                for w in slice.windows(2) {
                    if w[0].x1 < line && w[1].x1 < line && w[1].x2 > w[0].x2 * (1.0 + 1e-12) {
                        return Err("phase 2: predator grew left of the nullcline".into());
                    }
                    if w[0].x1 > line && w[1].x1 > line && w[1].x2 < w[0].x2 * (1.0 - 1e-12) {
                        return Err("phase 2: predator shrank right of the nullcline".into());
                    }
                }
                // Prey drift sign must match the parabola side exactly.
                for s in slice {
                    let wall = control::parabola_x2(params, phase.v, s.x1);
                    let f = control::control_field(params, phase.v, s);
                    if s.x2 < wall && f[0] <= 0.0 {
                        return Err("phase 2: prey drift not positive below the parabola".into());
                    }
                    if s.x2 > wall && f[0] >= 0.0 {
                        return Err("phase 2: prey drift not negative above the parabola".into());
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// 13. Reachability: the documented example plus random pairs, with the
/// phase-sign invariants checked pointwise.
pub fn criterion_13_reachability() -> CriterionResult {
    timed(13, "constructive reachability", || {
        let p = params(0.6, 0.3, 0.5);
        let mut ok = true;
        let mut parts = Vec::new();

        let example = control::reach(
            &p,
            &State2 { x1: 0.3, x2: 0.3 },
            &State2 { x1: 1.0, x2: 2.0 },
            &ControlPlan::new(3.0, 40.0, 0.15, 0.15, 1e-3),
        )?;
        ok &= example.success;
        if let Err(e) = check_reach_invariants(&p, &example) {
            ok = false;
            parts.push(format!("example invariants: {e}"));
        }
        parts.push(format!("documented example success = {}", example.success));

        let mut rng = SplitMix64::new(1301);
        let pairs: Vec<(State2, State2)> = (0..20)
            .map(|_| {
                (
                    State2 {
                        x1: 0.1 + 2.9 * rng.next_uniform(),
                        x2: 0.1 + 2.9 * rng.next_uniform(),
                    },
                    State2 {
                        x1: 0.1 + 2.9 * rng.next_uniform(),
                        x2: 0.1 + 2.9 * rng.next_uniform(),
                    },
                )
            })
            .collect();
        let outcomes: Vec<_> = pairs
            .par_iter()
            .map(|(x, z)| control::reach_auto(&p, x, z, 0.15, 0.15, 1e-3))
            .collect();
        let mut successes = 0;
        for (pair, outcome) in pairs.iter().zip(outcomes) {
            let outcome = outcome?;
            if outcome.success {
                successes += 1;
            } else {
                ok = false;
                parts.push(format!("pair {:?} failed at phase {:?}", pair, outcome.failed_phase));
            }
            if let Err(e) = check_reach_invariants(&p, &outcome) {
                ok = false;
                parts.push(format!("pair {:?}: {e}", pair));
            }
        }
        parts.push(format!("{successes}/20 random pairs reached"));
        Ok((ok, parts.join("; ")))
    })
}

/// Run the suite at the given level, in criterion order.
pub fn run_suite(level: Level) -> Vec<CriterionResult> {
    let all: Vec<fn() -> CriterionResult> = vec![
        criterion_01_lambda_reference,
        criterion_02_lambda_limits,
        criterion_03_lambda_affinity,
        criterion_04_stationarity_identity,
        criterion_05_strong_convergence,
        criterion_06_pathwise_comparison,
        criterion_07_predator_extinction_rate,
        criterion_08_total_extinction_rates,
        criterion_09_occupation_ks,
        criterion_10_persistence_mass,
        criterion_11_certificates,
        criterion_12_rate_exponents,
        criterion_13_reachability,
    ];
    all.iter()
        .enumerate()
        .filter(|(i, _)| level == Level::Full || FAST_CRITERIA.contains(&(i + 1)))
        .map(|(_, f)| f())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tampered_lambda_fails_reference_check() {
        let (ok, _) = check_lambda_reference_values(lambda_invasion).unwrap();
        assert!(ok);
        let (tampered, _) =
            check_lambda_reference_values(|p| lambda_invasion(p).map(|l| l + 0.05)).unwrap();
        assert!(!tampered);
    }

    #[test]
    fn fast_suite_ids() {
        let results = run_suite(Level::Fast);
        let ids: Vec<usize> = results.iter().map(|r| r.id).collect();
        assert_eq!(ids, FAST_CRITERIA);
    }
}
