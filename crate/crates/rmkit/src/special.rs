//! Scalar special functions and adaptive quadrature.
//!
//! Everything here is self-contained: Lanczos log-gamma, the regularized
//! incomplete gamma pair (series below `a + 1`, Lentz continued fraction
//! above), and a Gauss–Kronrod 15(7) adaptive integrator. Keeping these
//! in-repo pins the bit patterns that the rest of the crate depends on.

use crate::error::{Error, Result};

/// Lanczos coefficients, g = 7, 9 terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the Lanczos argument in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let base = z + LANCZOS_G + 0.5;
    LN_SQRT_TWO_PI + (z + 0.5) * base.ln() - base + sum.ln()
}

const INC_GAMMA_MAX_ITER: usize = 1000;

/// Regularized lower incomplete gamma function P(a, x) = γ(a, x) / Γ(a).
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<f64> {
    Ok(reg_gamma_pair(a, x)?.0)
}

/// Regularized upper incomplete gamma function Q(a, x) = 1 − P(a, x).
pub fn reg_upper_gamma(a: f64, x: f64) -> Result<f64> {
    Ok(reg_gamma_pair(a, x)?.1)
}

fn reg_gamma_pair(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "incomplete gamma needs a > 0 and x >= 0, got a = {a}, x = {x}"
        )));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    // exp(-x + a ln x - ln Γ(a)); underflows to 0 deep in either tail, which
    // is the right answer there.
    let prefactor = (-x + a * x.ln() - ln_gamma(a)).exp();
    if x < a + 1.0 {
        let p = lower_series(a, x, prefactor)?;
        Ok((p, 1.0 - p))
    } else {
        let q = upper_continued_fraction(a, x, prefactor)?;
        Ok((1.0 - q, q))
    }
}

/// P(a, x) = prefactor · Σ_{n≥0} x^n / (a (a+1) ⋯ (a+n)).
fn lower_series(a: f64, x: f64, prefactor: f64) -> Result<f64> {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..INC_GAMMA_MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * f64::EPSILON {
            return Ok(prefactor * sum);
        }
    }
    Err(Error::NoConvergence(format!(
        "incomplete gamma series at a = {a}, x = {x}"
    )))
}

/// Q(a, x) by the modified Lentz continued fraction.
fn upper_continued_fraction(a: f64, x: f64, prefactor: f64) -> Result<f64> {
    let tiny = 1e-300;
    let b0 = x + 1.0 - a;
    let mut f = if b0.abs() < tiny { tiny } else { b0 };
    let mut c = f;
    let mut d = 0.0;
    for n in 1..=INC_GAMMA_MAX_ITER {
        let an = (n as f64) * (a - n as f64);
        let bn = x + 2.0 * n as f64 + 1.0 - a;
        d = bn + an * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = bn + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            return Ok(prefactor / f);
        }
    }
    Err(Error::NoConvergence(format!(
        "incomplete gamma continued fraction at a = {a}, x = {x}"
    )))
}

// Gauss–Kronrod 15(7) nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive quadrature run.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Panel> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let (fa, fb) = if x == 0.0 {
            let v = f(center);
            (v, 0.0)
        } else {
            (f(center - half * x), f(center + half * x))
        };
        if !fa.is_finite() || !fb.is_finite() {
            return Err(Error::NonFinite(format!(
                "integrand non-finite inside [{lo}, {hi}]"
            )));
        }
        let pair = if x == 0.0 { fa } else { fa + fb };
        kronrod += wk * pair;
        // Odd indices (and the center) carry the embedded Gauss-7 rule.
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Ok(Panel {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

const MAX_PANELS: usize = 4000;

/// Adaptive Gauss–Kronrod integration over the partition given by
/// `breakpoints` (sorted, at least two entries). Bisects the worst panel
/// until the summed error estimate drops below `abs_tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    abs_tol: f64,
) -> Result<Quadrature> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidParameter(
            "integration needs at least two breakpoints".into(),
        ));
    }
    if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(
            "integration breakpoints must be strictly increasing".into(),
        ));
    }
    let mut panels = Vec::with_capacity(64);
    let mut evals = 0usize;
    for w in breakpoints.windows(2) {
        panels.push(gk15(&f, w[0], w[1])?);
        evals += 15;
    }
    loop {
        let total_error: f64 = panels.iter().map(|p| p.error).sum();
        if total_error <= abs_tol {
            break;
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::NoConvergence(format!(
                "quadrature error {total_error:.3e} above tolerance {abs_tol:.3e} \
                 after {} panels",
                panels.len()
            )));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("panel list is non-empty");
        let Panel { lo, hi, .. } = panels[worst];
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            // Interval exhausted at f64 resolution; accept its estimate.
            panels[worst].error = 0.0;
            continue;
        }
        let left = gk15(&f, lo, mid)?;
        let right = gk15(&f, mid, hi)?;
        evals += 30;
        panels[worst] = left;
        panels.push(right);
    }
    // Deterministic summation order regardless of refinement history.
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    Ok(Quadrature {
        value: panels.iter().map(|p| p.value).sum(),
        abs_error: panels.iter().map(|p| p.error).sum(),
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        // Γ(1) = Γ(2) = 1, Γ(5) = 24, Γ(1/2) = √π.
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-13);
        let half = 0.5 * std::f64::consts::PI.ln();
        assert!((ln_gamma(0.5) - half).abs() < 1e-13);
    }

    #[test]
    fn ln_gamma_recurrence() {
        // ln Γ(x+1) = ln Γ(x) + ln x over a wide range.
        for &x in &[0.11, 0.9, 3.7, 42.0, 1234.5, 19999.0] {
            let lhs = ln_gamma(x + 1.0);
            let rhs = ln_gamma(x) + x.ln();
            assert!(
                (lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0),
                "recurrence off at x = {x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn incomplete_gamma_exponential_case() {
        // P(1, x) = 1 − e^{−x}.
        for &x in &[0.01, 0.5, 1.0, 3.0, 10.0] {
            let p = reg_lower_gamma(1.0, x).unwrap();
            assert!((p - (1.0 - (-x).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn incomplete_gamma_complement() {
        for &a in &[0.097, 0.8, 1.0, 4.5556, 20.0] {
            for &x in &[0.001, 0.3, 1.0, 5.0, 40.0] {
                let p = reg_lower_gamma(a, x).unwrap();
                let q = reg_upper_gamma(a, x).unwrap();
                assert!((p + q - 1.0).abs() < 1e-12);
                assert!((0.0..=1.0 + 1e-12).contains(&p));
            }
        }
    }

    #[test]
    fn incomplete_gamma_rejects_bad_domain() {
        assert!(reg_lower_gamma(0.0, 1.0).is_err());
        assert!(reg_lower_gamma(1.0, -0.5).is_err());
    }

    #[test]
    fn quadrature_polynomial_is_exact() {
        // GK15 integrates degree-7 polynomials exactly; x^6 over [0, 2].
        let q = integrate_adaptive(|x| x.powi(6), &[0.0, 2.0], 1e-12).unwrap();
        assert!((q.value - 128.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_exponential_tail() {
        let q = integrate_adaptive(|x| (-x).exp(), &[0.0, 5.0, 40.0], 1e-12).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadrature_integrable_endpoint_singularity() {
        // ∫₀¹ x^{-1/2} dx = 2, with the endpoint mapped to 0.
        let f = |x: f64| if x == 0.0 { 0.0 } else { x.sqrt().recip() };
        let q = integrate_adaptive(f, &[0.0, 1e-6, 1e-3, 1.0], 1e-9).unwrap();
        assert!((q.value - 2.0).abs() < 1e-6, "got {}", q.value);
    }

    #[test]
    fn quadrature_rejects_bad_breakpoints() {
        assert!(integrate_adaptive(|x| x, &[1.0], 1e-9).is_err());
        assert!(integrate_adaptive(|x| x, &[1.0, 0.5], 1e-9).is_err());
    }
}
