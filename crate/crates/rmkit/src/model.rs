//! Model definition: parameters, state, vector fields, the stationary prey
//! law, and the noise-free regime taxonomy.
//!
//! The system lives on the nonnegative quadrant. Prey density `x1` follows a
//! logistic law with a Holling type II predation loss and multiplicative
//! noise of intensity `epsilon`; predator density `x2` grows at the rate
//! `x1/(1+x1) - alpha` with no noise of its own, so the diffusion matrix is
//! rank one everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_gamma, reg_lower_gamma};

/// Model parameters: noise intensity, predator mortality, prey carrying
/// capacity. All three must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    epsilon: f64,
    alpha: f64,
    kappa: f64,
}

impl ModelParams {
    pub fn new(epsilon: f64, alpha: f64, kappa: f64) -> Result<Self> {
        for (name, v) in [("epsilon", epsilon), ("alpha", alpha), ("kappa", kappa)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Self { epsilon, alpha, kappa })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `epsilon^2 < 2`: the prey-only dynamics admit a stationary law.
    pub fn noise_subcritical(&self) -> bool {
        self.epsilon * self.epsilon < 2.0
    }

    /// `alpha < 1`: mortality below the saturation value of the functional
    /// response. Larger values are accepted but the predator can never
    /// invade, so callers may want to warn.
    pub fn alpha_admissible(&self) -> bool {
        self.alpha < 1.0
    }

    /// Exponent ceiling `2 / (kappa epsilon^2)` for the exponential moment
    /// family; `exp(theta (x1+x2))` is a usable drift witness for any
    /// `theta` strictly below this.
    pub fn theta_star(&self) -> f64 {
        2.0 / (self.kappa * self.epsilon * self.epsilon)
    }

    /// Abscissa `alpha / (1 - alpha)` of the vertical line on which the
    /// predator drift changes sign. Only meaningful for `alpha < 1`.
    pub fn predator_nullcline_x1(&self) -> f64 {
        self.alpha / (1.0 - self.alpha)
    }
}

/// Nonnegative (prey, predator) state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State2 {
    pub x1: f64,
    pub x2: f64,
}

impl State2 {
    pub fn new(x1: f64, x2: f64) -> Result<Self> {
        if !x1.is_finite() || !x2.is_finite() || x1 < 0.0 || x2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "state must be finite and nonnegative, got ({x1}, {x2})"
            )));
        }
        Ok(Self { x1, x2 })
    }

    pub fn norm(&self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn distance(&self, other: &State2) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }
}

/// Coordinate selector for per-species diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Species {
    Prey,
    Predator,
}

impl Species {
    pub fn pick(&self, s: &State2) -> f64 {
        match self {
            Species::Prey => s.x1,
            Species::Predator => s.x2,
        }
    }
}

/// Per-capita growth rates `(F1, F2)`.
#[inline]
pub fn per_capita_growth(params: &ModelParams, s: &State2) -> [f64; 2] {
    [
        1.0 - s.x1 / params.kappa - s.x2 / (1.0 + s.x1),
        -params.alpha + s.x1 / (1.0 + s.x1),
    ]
}

/// Drift vector of the full system.
#[inline]
pub fn drift(params: &ModelParams, s: &State2) -> [f64; 2] {
    let f = per_capita_growth(params, s);
    [s.x1 * f[0], s.x2 * f[1]]
}

/// Noise coefficient vector. The second component is identically zero: only
/// the prey is driven by the Brownian motion.
#[inline]
pub fn diffusion(params: &ModelParams, s: &State2) -> [f64; 2] {
    [params.epsilon * s.x1, 0.0]
}

/// Drift and noise coefficient of the prey-only logistic law at density `z`.
#[inline]
pub fn logistic_drift_diffusion(params: &ModelParams, z: f64) -> (f64, f64) {
    (z * (1.0 - z / params.kappa), params.epsilon * z)
}

/// Interior equilibrium of the noise-free system, present exactly when
/// `alpha < kappa / (kappa + 1)`.
pub fn coexistence_equilibrium(params: &ModelParams) -> Option<State2> {
    let (alpha, kappa) = (params.alpha, params.kappa);
    if alpha >= kappa / (kappa + 1.0) {
        return None;
    }
    let one_minus = 1.0 - alpha;
    Some(State2 {
        x1: alpha / one_minus,
        x2: (kappa - (kappa + 1.0) * alpha) / (kappa * one_minus * one_minus),
    })
}

/// Long-run behavior of the noise-free system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeterministicRegime {
    /// `alpha >= kappa/(1+kappa)`: predators die out, prey settle at the
    /// carrying capacity.
    PredatorExtinctEquilibrium,
    /// Interior equilibrium attracts the whole open quadrant.
    StableCoexistence { equilibrium: State2 },
    /// `alpha < (kappa-1)/(1+kappa)`: the interior equilibrium is a source
    /// surrounded by an attracting cycle.
    LimitCycle { equilibrium: State2 },
}

impl DeterministicRegime {
    pub fn equilibrium(&self) -> Option<State2> {
        match self {
            DeterministicRegime::PredatorExtinctEquilibrium => None,
            DeterministicRegime::StableCoexistence { equilibrium }
            | DeterministicRegime::LimitCycle { equilibrium } => Some(*equilibrium),
        }
    }
}

/// Classify the noise-free system. Ties follow the weak inequalities of the
/// taxonomy: `alpha = kappa/(1+kappa)` is predator extinction and
/// `alpha = (kappa-1)/(1+kappa)` is stable coexistence.
pub fn deterministic_regime(params: &ModelParams) -> DeterministicRegime {
    let (alpha, kappa) = (params.alpha, params.kappa);
    if alpha >= kappa / (1.0 + kappa) {
        return DeterministicRegime::PredatorExtinctEquilibrium;
    }
    let equilibrium =
        coexistence_equilibrium(params).expect("equilibrium exists below the extinction threshold");
    if alpha < (kappa - 1.0) / (1.0 + kappa) {
        DeterministicRegime::LimitCycle { equilibrium }
    } else {
        DeterministicRegime::StableCoexistence { equilibrium }
    }
}

/// Stationary law of the prey-only dynamics: a Gamma distribution with shape
/// `2/epsilon^2 - 1` and scale `epsilon^2 kappa / 2`. Exists only while
/// `0 < epsilon^2 < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaStationary {
    k: f64,
    theta: f64,
    /// Cached `ln Γ(k) + k ln θ`, the log normalizer of the density.
    #[serde(skip)]
    ln_norm: f64,
}

impl GammaStationary {
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        let eps_sq = params.epsilon * params.epsilon;
        if eps_sq >= 2.0 {
            return Err(Error::Undefined(format!(
                "stationary prey law needs epsilon^2 < 2, got epsilon^2 = {eps_sq}"
            )));
        }
        let k = 2.0 / eps_sq - 1.0;
        let theta = eps_sq * params.kappa / 2.0;
        Ok(Self {
            k,
            theta,
            ln_norm: ln_gamma(k) + k * theta.ln(),
        })
    }

    pub fn shape(&self) -> f64 {
        self.k
    }

    pub fn scale(&self) -> f64 {
        self.theta
    }

    /// Log density at `x > 0`.
    pub fn log_density(&self, x: f64) -> f64 {
        (self.k - 1.0) * x.ln() - x / self.theta - self.ln_norm
    }

    /// Pointwise density at `x >= 0`.
    ///
    /// At `x = 0` the value depends on the shape: `+inf` for `k < 1` (the
    /// singularity is integrable, and callers doing quadrature must treat the
    /// endpoint themselves), `1/theta` for `k = 1`, and `0` for `k > 1`.
    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "density argument must be >= 0, got {x}"
            )));
        }
        if x == 0.0 {
            return Ok(if self.k < 1.0 {
                f64::INFINITY
            } else if self.k == 1.0 {
                1.0 / self.theta
            } else {
                0.0
            });
        }
        Ok(self.log_density(x).exp())
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cdf argument must be >= 0, got {x}"
            )));
        }
        reg_lower_gamma(self.k, x / self.theta)
    }

    /// Mean `k θ` and variance `k θ^2`.
    pub fn moments(&self) -> (f64, f64) {
        (self.k * self.theta, self.k * self.theta * self.theta)
    }

    /// A point `t` with tail mass below `tail_mass`, from the Chernoff bound
    /// `P(X > t) <= (t/kθ)^k e^{k - t/θ}` (valid for `t > kθ`), sharpened by
    /// doubling. Used to truncate quadrature over the stationary law.
    pub fn tail_cutoff(&self, tail_mass: f64) -> f64 {
        let mean = self.k * self.theta;
        let mut t = mean + self.theta;
        let bound = |t: f64| self.k * (t / mean).ln() + self.k - t / self.theta;
        while bound(t) > tail_mass.ln() {
            t *= 2.0;
        }
        t
    }
}

/// Mean and variance of the stationary prey law expressed through the model
/// parameters: `kappa (1 - epsilon^2/2)` and
/// `(kappa^2 epsilon^2 / 2)(1 - epsilon^2/2)`.
pub fn gamma_moments(g: &GammaStationary) -> (f64, f64) {
    g.moments()
}
