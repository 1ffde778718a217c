//! Python bindings: the model types and the main operations, importable as
//! `rmkit_py` (build the cdylib and rename/copy it to `rmkit_py.so`; see
//! `python/smoke_test.py`).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rmkit::control;
use rmkit::integrate::{self, BrownianPath, Scheme};
use rmkit::model::{self, GammaStationary, State2};
use rmkit::occupation::{accumulate_stream, OccupationHistogram};
use rmkit::persistence;

fn to_py_err(e: rmkit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_scheme(name: &str) -> PyResult<Scheme> {
    match name {
        "logspace" | "log_space" | "log-space" => Ok(Scheme::LogSpace),
        "plain" => Ok(Scheme::Plain),
        other => Err(PyValueError::new_err(format!(
            "unknown scheme {other:?} (expected 'logspace' or 'plain')"
        ))),
    }
}

/// Model parameters (noise intensity, predator mortality, carrying
/// capacity); all strictly positive.
#[pyclass(frozen, name = "ModelParams", skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: model::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(eps: f64, alpha: f64, kappa: f64) -> PyResult<Self> {
        Ok(Self { inner: model::ModelParams::new(eps, alpha, kappa).map_err(to_py_err)? })
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.epsilon()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }

    /// True when `eps**2 < 2` (the prey-only stationary law exists).
    #[getter]
    fn noise_subcritical(&self) -> bool {
        self.inner.noise_subcritical()
    }

    #[getter]
    fn alpha_admissible(&self) -> bool {
        self.inner.alpha_admissible()
    }

    /// Ceiling `2/(kappa*eps**2)` for exponential-moment exponents.
    #[getter]
    fn theta_star(&self) -> f64 {
        self.inner.theta_star()
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(eps={}, alpha={}, kappa={})",
            self.inner.epsilon(),
            self.inner.alpha(),
            self.inner.kappa()
        )
    }
}

/// Drift vector (dx1/dt, dx2/dt) at a state.
#[pyfunction]
fn drift(params: &PyModelParams, x1: f64, x2: f64) -> PyResult<(f64, f64)> {
    let s = State2::new(x1, x2).map_err(to_py_err)?;
    let d = model::drift(&params.inner, &s);
    Ok((d[0], d[1]))
}

/// Noise coefficient vector; the second component is always zero.
#[pyfunction]
fn diffusion(params: &PyModelParams, x1: f64, x2: f64) -> PyResult<(f64, f64)> {
    let s = State2::new(x1, x2).map_err(to_py_err)?;
    let d = model::diffusion(&params.inner, &s);
    Ok((d[0], d[1]))
}

/// Density of the stationary prey law at `x`.
#[pyfunction]
fn gamma_density(params: &PyModelParams, x: f64) -> PyResult<f64> {
    let g = GammaStationary::from_params(&params.inner).map_err(to_py_err)?;
    g.density(x).map_err(to_py_err)
}

/// CDF of the stationary prey law at `x`.
#[pyfunction]
fn gamma_cdf(params: &PyModelParams, x: f64) -> PyResult<f64> {
    let g = GammaStationary::from_params(&params.inner).map_err(to_py_err)?;
    g.cdf(x).map_err(to_py_err)
}

/// (mean, variance) of the stationary prey law.
#[pyfunction]
fn gamma_moments(params: &PyModelParams) -> PyResult<(f64, f64)> {
    let g = GammaStationary::from_params(&params.inner).map_err(to_py_err)?;
    Ok(g.moments())
}

/// Noise-free regime: ("predator_extinct_equilibrium" |
/// "stable_coexistence" | "limit_cycle", equilibrium or None).
#[pyfunction]
fn deterministic_regime(params: &PyModelParams) -> (String, Option<(f64, f64)>) {
    let regime = model::deterministic_regime(&params.inner);
    let name = match regime {
        model::DeterministicRegime::PredatorExtinctEquilibrium => "predator_extinct_equilibrium",
        model::DeterministicRegime::StableCoexistence { .. } => "stable_coexistence",
        model::DeterministicRegime::LimitCycle { .. } => "limit_cycle",
    };
    (name.to_string(), regime.equilibrium().map(|p| (p.x1, p.x2)))
}

/// Mean invasion rate of the predator against the stationary prey law.
#[pyfunction]
fn lambda_invasion(params: &PyModelParams) -> PyResult<f64> {
    persistence::lambda_invasion(&params.inner).map_err(to_py_err)
}

/// Regime classification as a dict with keys "regime", "lambda",
/// "rate_bounds".
#[pyfunction]
#[pyo3(signature = (params, tol = 1e-6))]
fn classify_regime<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = persistence::classify_regime(&params.inner, tol).map_err(to_py_err)?;
    let out = PyDict::new(py);
    let regime = match report.regime {
        persistence::Regime::Persistence => "persistence",
        persistence::Regime::PredatorExtinction => "predator_extinction",
        persistence::Regime::TotalExtinction => "total_extinction",
        persistence::Regime::Critical => "critical",
    };
    out.set_item("regime", regime)?;
    out.set_item("lambda", report.lambda)?;
    let bounds: Vec<(String, f64, bool)> = report
        .rate_bounds
        .into_iter()
        .map(|b| (b.quantity, b.bound, b.exact))
        .collect();
    out.set_item("rate_bounds", bounds)?;
    Ok(out)
}

/// Pointwise invasion rate of "prey" or "predator" at a state.
#[pyfunction]
fn invasion_rate_at(params: &PyModelParams, species: &str, x1: f64, x2: f64) -> PyResult<f64> {
    let s = State2::new(x1, x2).map_err(to_py_err)?;
    let species = match species {
        "prey" => model::Species::Prey,
        "predator" => model::Species::Predator,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown species {other:?} (expected 'prey' or 'predator')"
            )))
        }
    };
    Ok(persistence::invasion_rate_at(&params.inner, species, &s))
}

/// Boundary invasion weights (p1, p2), present only in the coexistence
/// regime.
#[pyfunction]
fn hofbauer_weights(params: &PyModelParams) -> PyResult<Option<(f64, f64)>> {
    Ok(persistence::hofbauer_weights(&params.inner)
        .map_err(to_py_err)?
        .map(|w| (w.p1, w.p2)))
}

/// Bracket determinant (closed form) at a state.
#[pyfunction]
fn hormander_det(params: &PyModelParams, x1: f64, x2: f64) -> PyResult<f64> {
    let s = State2::new(x1, x2).map_err(to_py_err)?;
    Ok(persistence::hormander_det(&params.inner, &s))
}

/// Polynomial convergence-rate exponents for degree `n`, as a dict.
#[pyfunction]
fn rate_exponents<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    n: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let e = persistence::rate_exponents(&params.inner, n).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("n", e.n)?;
    out.set_item("q0", e.q0)?;
    out.set_item("q_max", e.q_max)?;
    out.set_item("q", e.q)?;
    out.set_item("lambda_tv", e.lambda_tv)?;
    out.set_item("beta_range", e.beta_range)?;
    out.set_item("weight_form", e.weight_form)?;
    Ok(out)
}

/// Simulate the two-species system; returns (times, prey, predators).
#[pyfunction]
#[pyo3(signature = (params, x1, x2, dt, n_steps, seed, scheme = "logspace"))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    params: &PyModelParams,
    x1: f64,
    x2: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
    scheme: &str,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let x0 = State2::new(x1, x2).map_err(to_py_err)?;
    let path = BrownianPath::generate(seed, dt, n_steps).map_err(to_py_err)?;
    let traj = integrate::simulate_em(&params.inner, x0, &path, parse_scheme(scheme)?);
    Ok((
        traj.times,
        traj.states.iter().map(|s| s.x1).collect(),
        traj.states.iter().map(|s| s.x2).collect(),
    ))
}

/// Simulate the prey-only logistic law; returns (times, values).
#[pyfunction]
#[pyo3(signature = (params, z0, dt, n_steps, seed, scheme = "logspace"))]
fn simulate_logistic(
    params: &PyModelParams,
    z0: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
    scheme: &str,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let path = BrownianPath::generate(seed, dt, n_steps).map_err(to_py_err)?;
    let traj = integrate::simulate_em_logistic(&params.inner, z0, &path, parse_scheme(scheme)?)
        .map_err(to_py_err)?;
    Ok((traj.times, traj.values))
}

/// Explicit solution of the logistic law on the same grid and noise.
#[pyfunction]
fn exact_logistic(
    params: &PyModelParams,
    z0: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let path = BrownianPath::generate(seed, dt, n_steps).map_err(to_py_err)?;
    let traj = integrate::exact_logistic(&params.inner, z0, &path).map_err(to_py_err)?;
    Ok((traj.times, traj.values))
}

/// KS distance of the simulated prey occupation to the stationary prey law.
#[pyfunction]
#[pyo3(signature = (params, x1, x2, dt, n_steps, burn_in_steps, seed))]
#[allow(clippy::too_many_arguments)]
fn occupation_ks_to_gamma(
    params: &PyModelParams,
    x1: f64,
    x2: f64,
    dt: f64,
    n_steps: usize,
    burn_in_steps: usize,
    seed: u64,
) -> PyResult<f64> {
    let g = GammaStationary::from_params(&params.inner).map_err(to_py_err)?;
    let x0 = State2::new(x1, x2).map_err(to_py_err)?;
    let mut hist = OccupationHistogram::default_bins();
    accumulate_stream(
        &mut hist,
        &params.inner,
        x0,
        Scheme::LogSpace,
        dt,
        n_steps,
        burn_in_steps,
        seed,
    )
    .map_err(to_py_err)?;
    hist.ks_to_gamma_marginal(&g).map_err(to_py_err)
}

/// Steer the control system from `x` to a ball around `z`; returns
/// (success, times, prey, predators).
#[pyfunction]
#[pyo3(signature = (params, x, z, r0 = 0.15, r_z = 0.15, ode_dt = 1e-3))]
fn reach(
    params: &PyModelParams,
    x: (f64, f64),
    z: (f64, f64),
    r0: f64,
    r_z: f64,
    ode_dt: f64,
) -> PyResult<(bool, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let x = State2::new(x.0, x.1).map_err(to_py_err)?;
    let z = State2::new(z.0, z.1).map_err(to_py_err)?;
    let out = control::reach_auto(&params.inner, &x, &z, r0, r_z, ode_dt).map_err(to_py_err)?;
    Ok((
        out.success,
        out.trajectory.times,
        out.trajectory.states.iter().map(|s| s.x1).collect(),
        out.trajectory.states.iter().map(|s| s.x2).collect(),
    ))
}

#[pymodule]
fn rmkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(drift, m)?)?;
    m.add_function(wrap_pyfunction!(diffusion, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_density, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_moments, m)?)?;
    m.add_function(wrap_pyfunction!(deterministic_regime, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_invasion, m)?)?;
    m.add_function(wrap_pyfunction!(classify_regime, m)?)?;
    m.add_function(wrap_pyfunction!(invasion_rate_at, m)?)?;
    m.add_function(wrap_pyfunction!(hofbauer_weights, m)?)?;
    m.add_function(wrap_pyfunction!(hormander_det, m)?)?;
    m.add_function(wrap_pyfunction!(rate_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(exact_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(occupation_ks_to_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(reach, m)?)?;
    Ok(())
}
