//! Command-line front end.
//!
//! Subcommands: `lambda`, `classify`, `simulate`, `logistic`, `occupation`,
//! `phase`, `reach`, `certify`, `validate`. Every run is reproducible from
//! its flags plus the seed (`--seed`, falling back to `RMKIT_SEED`, then
//! 42); CSV outputs carry the resolved configuration and its hash as
//! `#`-prefixed header comments.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use rmkit::control::{self, ControlPlan};
use rmkit::integrate::{
    exact_logistic, logistic_ode_solution, simulate_deterministic, simulate_em,
    simulate_em_logistic, write_csv1, write_csv2, BrownianPath, Scheme, Trajectory1,
};
use rmkit::model::{GammaStationary, ModelParams, State2};
use rmkit::occupation::{accumulate_stream, OccupationHistogram, Rect};
use rmkit::persistence::{
    classify_regime, hofbauer_weights, hormander_det, hormander_det_numeric, lambda_invasion,
    lyapunov_exp_check, lyapunov_poly_check, poly_default_p0, rate_exponents, GridSpec, Regime,
    CRITICAL_TOL_DEFAULT,
};
use rmkit::rng::{derive_stream_seed, SplitMix64};
use rmkit::validate::{run_suite, Level};
use rmkit::{Error, Result};

#[derive(Parser)]
#[command(name = "rmkit", version, about = "Prey-predator diffusion toolkit")]
struct Cli {
    /// Flat key=value configuration file; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for ensembles and sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Invasion rate and regime for one parameter set.
    Lambda(ParamArgs),
    /// Full regime report (regime, invasion rate, rate bounds).
    Classify {
        #[command(flatten)]
        params: ParamArgs,
        /// Half-width of the critical band around zero.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Simulate one trajectory of the two-species system.
    Simulate(SimulateArgs),
    /// Simulate the prey-only logistic law.
    Logistic(LogisticArgs),
    /// Ensemble occupation histogram with diagnostics.
    Occupation(OccupationArgs),
    /// Invasion-rate sweep over a parameter grid.
    Phase(PhaseArgs),
    /// Steer the control system from one interior point to another.
    Reach(ReachArgs),
    /// Certificate reports: drift conditions, bracket determinant,
    /// invasion weights, rate exponents.
    Certify(CertifyArgs),
    /// Run the validation suite.
    Validate {
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
    },
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Noise intensity.
    #[arg(long)]
    eps: Option<f64>,
    /// Predator mortality.
    #[arg(long)]
    alpha: Option<f64>,
    /// Prey carrying capacity.
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Initial prey density.
    #[arg(long)]
    x1: Option<f64>,
    /// Initial predator density.
    #[arg(long)]
    x2: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon in time units.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Trajectory CSV path.
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
    /// Also write the noise-free trajectory from the same start.
    #[arg(long)]
    overlay_deterministic: bool,
    /// Write a gnuplot script next to the CSVs.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct LogisticArgs {
    /// Noise intensity (0 selects the noise-free closed form).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Initial density.
    #[arg(long)]
    z0: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Integration method: explicit scheme or the exact solution.
    #[arg(long, value_enum, default_value = "log-space")]
    method: LogisticMethod,
    #[arg(long, default_value = "logistic.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct OccupationArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    x1: Option<f64>,
    #[arg(long)]
    x2: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Accumulation horizon per path, after burn-in.
    #[arg(long)]
    t: Option<f64>,
    /// Discarded prefix in time units.
    #[arg(long)]
    burn_in: Option<f64>,
    /// Number of independent paths.
    #[arg(long)]
    seeds: Option<usize>,
    /// Base seed; member i runs on a stream derived from (seed, i).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, default_value = "occupation.csv")]
    out_hist: PathBuf,
    #[arg(long, default_value = "occupation.json")]
    out_json: PathBuf,
}

#[derive(Args)]
struct PhaseArgs {
    /// Which parameter pair to sweep.
    #[arg(long, value_enum)]
    sweep: SweepKind,
    /// Fixed mortality (eps-kappa sweep).
    #[arg(long)]
    alpha: Option<f64>,
    /// Fixed noise intensity (alpha-kappa sweep).
    #[arg(long)]
    eps: Option<f64>,
    /// Swept range lo:hi:n for the first parameter.
    #[arg(long)]
    p1_range: Option<String>,
    /// Swept range lo:hi:n for the second parameter (kappa).
    #[arg(long)]
    p2_range: Option<String>,
    #[arg(long, default_value = "phase.csv")]
    out: PathBuf,
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct ReachArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Start point "x1,x2".
    #[arg(long)]
    x: Option<String>,
    /// Target point "x1,x2".
    #[arg(long)]
    z: Option<String>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    rz: Option<f64>,
    /// Phase-2 control level (default: automatic search).
    #[arg(long)]
    vstar: Option<f64>,
    /// Phase-3 control magnitude (default: automatic doubling).
    #[arg(long)]
    big_r: Option<f64>,
    #[arg(long)]
    ode_dt: Option<f64>,
    /// Instead of one run, steer this many random interior pairs.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "reach.csv")]
    out_traj: PathBuf,
    #[arg(long, default_value = "reach_plan.json")]
    out_plan: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Exponential-family exponent (default: half the admissible ceiling).
    #[arg(long)]
    theta: Option<f64>,
    /// Polynomial-family degree.
    #[arg(long)]
    n: Option<u32>,
    /// Growth weight for the combined polynomial condition.
    #[arg(long)]
    p0: Option<f64>,
    /// Sample grid extent.
    #[arg(long)]
    x_max: Option<f64>,
    /// Sample grid resolution per axis.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Logspace,
    Plain,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Logspace => Scheme::LogSpace,
            SchemeArg::Plain => Scheme::Plain,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LogisticMethod {
    LogSpace,
    Plain,
    Exact,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

/// Flat key=value configuration, merged under explicit flags.
struct Cfg(BTreeMap<String, String>);

impl Cfg {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)?;
            for raw in text.lines() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with('[') {
                    continue;
                }
                if let Some((k, v)) = line.split_once('=') {
                    map.insert(
                        k.trim().to_string(),
                        v.trim().trim_matches('"').to_string(),
                    );
                }
            }
        }
        Ok(Cfg(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidParameter(format!("config key {key} has unparsable value {raw:?}"))
            }),
        }
    }
}

fn resolve<T: FromStr>(flag: Option<T>, cfg: &Cfg, key: &str, default: Option<T>) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = cfg.get::<T>(key)? {
        return Ok(v);
    }
    default.ok_or_else(|| Error::InvalidParameter(format!("missing required setting: {key}")))
}

fn resolve_params(args: &ParamArgs, cfg: &Cfg) -> Result<ModelParams> {
    ModelParams::new(
        resolve(args.eps, cfg, "eps", None)?,
        resolve(args.alpha, cfg, "alpha", None)?,
        resolve(args.kappa, cfg, "kappa", None)?,
    )
}

fn default_seed(flag: Option<u64>, cfg: &Cfg) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = cfg.get::<u64>("seed")? {
        return Ok(s);
    }
    match std::env::var("RMKIT_SEED") {
        Ok(raw) => raw.parse::<u64>().map_err(|_| {
            Error::InvalidParameter(format!("RMKIT_SEED must be a u64, got {raw:?}"))
        }),
        Err(_) => Ok(42),
    }
}

/// FNV-1a over the canonical configuration line.
fn config_hash(canonical: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

fn header_comments(tool: &str, canonical: &str) -> Vec<String> {
    vec![
        format!("rmkit {tool}"),
        format!("config_hash={:016x}", config_hash(canonical)),
        canonical.to_string(),
    ]
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

fn parse_point(raw: &str) -> Result<State2> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "point must be \"x1,x2\", got {raw:?}"
        )));
    }
    let x1 = parts[0].trim().parse::<f64>().map_err(|_| {
        Error::InvalidParameter(format!("bad coordinate {:?}", parts[0]))
    })?;
    let x2 = parts[1].trim().parse::<f64>().map_err(|_| {
        Error::InvalidParameter(format!("bad coordinate {:?}", parts[1]))
    })?;
    State2::new(x1, x2)
}

/// Parse "lo:hi:n" into n evenly spaced values.
fn parse_range(raw: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "range must be lo:hi:n, got {raw:?}"
        )));
    }
    let lo: f64 = parts[0].parse().map_err(|_| {
        Error::InvalidParameter(format!("bad range bound {:?}", parts[0]))
    })?;
    let hi: f64 = parts[1].parse().map_err(|_| {
        Error::InvalidParameter(format!("bad range bound {:?}", parts[1]))
    })?;
    let n: usize = parts[2].parse().map_err(|_| {
        Error::InvalidParameter(format!("bad range count {:?}", parts[2]))
    })?;
    if n < 1 || !(hi >= lo) {
        return Err(Error::InvalidParameter(format!("empty range {raw:?}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn steps_for(t: f64, dt: f64) -> Result<usize> {
    if !(t > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon and step must be positive, got t = {t}, dt = {dt}"
        )));
    }
    Ok((t / dt).round().max(1.0) as usize)
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    EpsKappa,
    AlphaKappa,
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Persistence => "persistence",
        Regime::PredatorExtinction => "predator_extinction",
        Regime::TotalExtinction => "total_extinction",
        Regime::Critical => "critical",
    }
}

fn cmd_lambda(params: &ParamArgs, cfg: &Cfg, json: bool) -> Result<ExitCode> {
    let p = resolve_params(params, cfg)?;
    if !p.noise_subcritical() {
        let msg = format!(
            "invasion rate undefined for epsilon^2 >= 2 (epsilon = {}); regime: total extinction",
            p.epsilon()
        );
        if json {
            println!("{}", json!({ "error": msg, "regime": "total_extinction" }));
        } else {
            eprintln!("error: {msg}");
        }
        return Ok(ExitCode::FAILURE);
    }
    let lambda = lambda_invasion(&p)?;
    let report = classify_regime(&p, CRITICAL_TOL_DEFAULT)?;
    if json {
        println!(
            "{}",
            json!({ "lambda": lambda, "regime": regime_name(report.regime) })
        );
    } else {
        println!("lambda = {lambda:.6}");
        println!("regime = {}", regime_name(report.regime));
        if !p.alpha_admissible() {
            println!("note: alpha >= 1, predators cannot invade for any noise level");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(params: &ParamArgs, tol: Option<f64>, cfg: &Cfg, json: bool) -> Result<ExitCode> {
    let p = resolve_params(params, cfg)?;
    let tol = resolve(tol, cfg, "tol", Some(CRITICAL_TOL_DEFAULT))?;
    let report = classify_regime(&p, tol)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("regime = {}", regime_name(report.regime));
        match report.lambda {
            Some(l) => println!("lambda = {l:.6}"),
            None => println!("lambda undefined (epsilon^2 >= 2)"),
        }
        for b in &report.rate_bounds {
            println!(
                "bound: {} <= {:.6}{}",
                b.quantity,
                b.bound,
                if b.exact { " (attained)" } else { "" }
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs, cfg: &Cfg, json: bool) -> Result<ExitCode> {
    let eps = resolve(args.params.eps, cfg, "eps", None)?;
    let alpha = resolve(args.params.alpha, cfg, "alpha", None)?;
    let kappa = resolve(args.params.kappa, cfg, "kappa", None)?;
    let x1 = resolve(args.x1, cfg, "x1", Some(0.75))?;
    let x2 = resolve(args.x2, cfg, "x2", Some(1.25))?;
    let dt = resolve(args.dt, cfg, "dt", Some(1e-3))?;
    let t = resolve(args.t, cfg, "t", Some(100.0))?;
    let seed = default_seed(args.seed, cfg)?;
    let scheme_arg = args.scheme.unwrap_or(SchemeArg::Logspace);
    let scheme_name = match scheme_arg {
        SchemeArg::Logspace => "logspace",
        SchemeArg::Plain => "plain",
    };
    let x0 = State2::new(x1, x2)?;
    let n = steps_for(t, dt)?;

    let canonical = format!(
        "eps={eps} alpha={alpha} kappa={kappa} x1={x1} x2={x2} dt={dt} t={t} seed={seed} scheme={scheme_name}"
    );
    let comments = header_comments("simulate", &canonical);

    let traj = if eps > 0.0 {
        let p = ModelParams::new(eps, alpha, kappa)?;
        let path = BrownianPath::generate(seed, dt, n)?;
        simulate_em(&p, x0, &path, scheme_arg.into())
    } else {
        simulate_deterministic(alpha, kappa, x0, dt, n)?
    };
    let mut buf = Vec::new();
    write_csv2(&traj, &comments, &mut buf)?;
    write_file(&args.out, &buf)?;

    let mut written = vec![args.out.clone()];
    let overlay_path = args.out.with_extension("deterministic.csv");
    if args.overlay_deterministic {
        let det = simulate_deterministic(alpha, kappa, x0, dt, n)?;
        let mut buf = Vec::new();
        write_csv2(&det, &comments, &mut buf)?;
        write_file(&overlay_path, &buf)?;
        written.push(overlay_path.clone());
    }
    if args.gnuplot {
        let gp = args.out.with_extension("gp");
        let mut script = String::new();
        script.push_str("set datafile separator ','\n");
        script.push_str("set xlabel 'x1 (prey)'\nset ylabel 'x2 (predator)'\n");
        script.push_str(&format!(
            "plot '{}' using 2:3 with lines lc 'black' title 'stochastic'",
            args.out.display()
        ));
        if args.overlay_deterministic {
            script.push_str(&format!(
                ", \\\n     '{}' using 2:3 with lines lc 'red' title 'deterministic'",
                overlay_path.display()
            ));
        }
        script.push('\n');
        write_file(&gp, script.as_bytes())?;
        written.push(gp);
    }

    let last = traj.last_state();
    if json {
        println!(
            "{}",
            json!({
                "files": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "final_state": { "x1": last.x1, "x2": last.x2 },
                "divergent": traj.divergent,
                "config_hash": format!("{:016x}", config_hash(&canonical)),
            })
        );
    } else {
        for p in &written {
            println!("wrote {}", p.display());
        }
        println!("final state: ({:.6}, {:.6})", last.x1, last.x2);
        if traj.divergent {
            println!("warning: trajectory truncated by the divergence guard");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_logistic(args: &LogisticArgs, cfg: &Cfg, json: bool) -> Result<ExitCode> {
    let eps = resolve(args.eps, cfg, "eps", None)?;
    let kappa = resolve(args.kappa, cfg, "kappa", None)?;
    let z0 = resolve(args.z0, cfg, "z0", Some(1.0))?;
    let dt = resolve(args.dt, cfg, "dt", Some(1e-3))?;
    let t = resolve(args.t, cfg, "t", Some(100.0))?;
    let seed = default_seed(args.seed, cfg)?;
    let n = steps_for(t, dt)?;
    let method_name = match args.method {
        LogisticMethod::LogSpace => "logspace",
        LogisticMethod::Plain => "plain",
        LogisticMethod::Exact => "exact",
    };
    let canonical =
        format!("eps={eps} kappa={kappa} z0={z0} dt={dt} t={t} seed={seed} method={method_name}");

    let traj = if eps > 0.0 {
        // Mortality does not enter the prey-only law; any valid value works.
        let p = ModelParams::new(eps, 1.0, kappa)?;
        let path = BrownianPath::generate(seed, dt, n)?;
        match args.method {
            LogisticMethod::LogSpace => simulate_em_logistic(&p, z0, &path, Scheme::LogSpace)?,
            LogisticMethod::Plain => simulate_em_logistic(&p, z0, &path, Scheme::Plain)?,
            LogisticMethod::Exact => exact_logistic(&p, z0, &path)?,
        }
    } else {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let values = times.iter().map(|&t| logistic_ode_solution(kappa, z0, t)).collect();
        Trajectory1 { times, values, divergent: false }
    };
    let mut buf = Vec::new();
    write_csv1(&traj, &header_comments("logistic", &canonical), &mut buf)?;
    write_file(&args.out, &buf)?;
    if json {
        println!(
            "{}",
            json!({
                "files": [args.out.display().to_string()],
                "final_value": traj.last_value(),
                "config_hash": format!("{:016x}", config_hash(&canonical)),
            })
        );
    } else {
        println!("wrote {}", args.out.display());
        println!("final value: {:.6}", traj.last_value());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_occupation(args: &OccupationArgs, cfg: &Cfg, json: bool) -> Result<ExitCode> {
    let p = resolve_params(&args.params, cfg)?;
    let x1 = resolve(args.x1, cfg, "x1", Some(0.75))?;
    let x2 = resolve(args.x2, cfg, "x2", Some(1.25))?;
    let dt = resolve(args.dt, cfg, "dt", Some(1e-3))?;
    let t = resolve(args.t, cfg, "t", Some(1e4))?;
    let burn_in = resolve(args.burn_in, cfg, "burn_in", Some(0.0))?;
    let n_paths = resolve(args.seeds, cfg, "seeds", Some(1))?;
    let seed = default_seed(args.seed, cfg)?;
    let scheme: Scheme = args.scheme.unwrap_or(SchemeArg::Logspace).into();
    if n_paths == 0 {
        return Err(Error::InvalidParameter("need at least one path (--seeds)".into()));
    }
    let x0 = State2::new(x1, x2)?;
    let burn_steps = (burn_in / dt).round() as usize;
    let n_steps = burn_steps + steps_for(t, dt)?;

    let canonical = format!(
        "eps={} alpha={} kappa={} x1={x1} x2={x2} dt={dt} t={t} burn_in={burn_in} seeds={n_paths} seed={seed}",
        p.epsilon(), p.alpha(), p.kappa()
    );

    let partials: Vec<Result<OccupationHistogram>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut hist = OccupationHistogram::default_bins();
            accumulate_stream(
                &mut hist,
                &p,
                x0,
                scheme,
                dt,
                n_steps,
                burn_steps,
                derive_stream_seed(seed, i),
            )?;
            Ok(hist)
        })
        .collect();
    let mut hist = OccupationHistogram::default_bins();
    for part in partials {
        hist.merge(&part?)?;
    }

    let mut buf = Vec::new();
    hist.write_csv(&header_comments("occupation", &canonical), &mut buf)?;
    write_file(&args.out_hist, &buf)?;

    let compact = Rect { x1_lo: 0.05, x1_hi: 20.0, x2_lo: 0.05, x2_hi: 20.0 };
    let compact_fraction = hist.fraction_in(&compact)?;
    let ks = match GammaStationary::from_params(&p) {
        Ok(g) => Some(hist.ks_to_gamma_marginal(&g)?),
        Err(_) => None,
    };
    let summary = json!({
        "total_time": hist.total_time(),
        "paths": n_paths,
        "overflow_fraction": hist.overflow_fraction(),
        "compact_region": { "x1": [0.05, 20.0], "x2": [0.05, 20.0] },
        "compact_fraction": compact_fraction,
        "ks_to_gamma_marginal": ks,
        "config_hash": format!("{:016x}", config_hash(&canonical)),
    });
    write_file(&args.out_json, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    if json {
        println!("{summary}");
    } else {
        println!("wrote {} and {}", args.out_hist.display(), args.out_json.display());
        println!("compact-set fraction: {compact_fraction:.4}");
        if let Some(ks) = ks {
            println!("KS to stationary prey law: {ks:.4}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_phase(args: &PhaseArgs, cfg: &Cfg, json: bool) -> Result<ExitCode> {
    let kappas = parse_range(&resolve(
        args.p2_range.clone(),
        cfg,
        "p2_range",
        Some("0.5:8:40".to_string()),
    )?)?;
    let (fixed_name, fixed_value, p1_name, p1_values) = match args.sweep {
        SweepKind::EpsKappa => {
            let alpha = resolve(args.alpha, cfg, "alpha", None)?;
            let range = resolve(args.p1_range.clone(), cfg, "p1_range", Some("0.1:1.6:40".to_string()))?;
            ("alpha", alpha, "eps", parse_range(&range)?)
        }
        SweepKind::AlphaKappa => {
            let eps = resolve(args.eps, cfg, "eps", None)?;
            let range = resolve(args.p1_range.clone(), cfg, "p1_range", Some("0.05:0.95:40".to_string()))?;
            ("eps", eps, "alpha", parse_range(&range)?)
        }
    };
    let canonical = format!(
        "sweep={} {fixed_name}={fixed_value} {p1_name}_values={} kappa_values={}",
        match args.sweep {
            SweepKind::EpsKappa => "eps-kappa",
            SweepKind::AlphaKappa => "alpha-kappa",
        },
        p1_values.len(),
        kappas.len()
    );

    let cells: Vec<(f64, f64)> = p1_values
        .iter()
        .flat_map(|&a| kappas.iter().map(move |&k| (a, k)))
        .collect();
    let rows: Vec<Result<String>> = cells
        .par_iter()
        .map(|&(p1, kappa)| {
            let params = match args.sweep {
                SweepKind::EpsKappa => ModelParams::new(p1, fixed_value, kappa),
                SweepKind::AlphaKappa => ModelParams::new(fixed_value, p1, kappa),
            }?;
            let report = classify_regime(&params, CRITICAL_TOL_DEFAULT)?;
            let lambda_field = match report.lambda {
                Some(l) => format!("{l:.10e}"),
                None => String::new(),
            };
            Ok(format!("{p1:.10e},{kappa:.10e},{lambda_field},{}", regime_name(report.regime)))
        })
        .collect();

    let mut buf = Vec::new();
    for line in header_comments("phase", &canonical) {
        writeln!(buf, "# {line}")?;
    }
    writeln!(buf, "p1,p2,lambda,regime")?;
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for row in rows {
        let row = row?;
        let regime = row.rsplit(',').next().map(str::to_owned);
        if let Some(r) = regime {
            let key = match r.as_str() {
                "persistence" => "persistence",
                "predator_extinction" => "predator_extinction",
                "total_extinction" => "total_extinction",
                _ => "critical",
            };
            *counts.entry(key).or_insert(0) += 1;
        }
        writeln!(buf, "{row}")?;
    }
    write_file(&args.out, &buf)?;
    let mut written = vec![args.out.clone()];
    if args.gnuplot {
        let gp = args.out.with_extension("gp");
        let contour = args.out.with_extension("contour.dat");
        // Two passes: extract the lambda = 0 contour (the boundary between
        // coexistence and predator extinction), then draw the colored grid
        // with the contour on top. Cells without a lambda value (eps^2 >= 2)
        // are skipped by gnuplot automatically.
        let script = format!(
            "set datafile separator ','\n\
             set dgrid3d {n1},{n2}\n\
             set contour base\n\
             set cntrparam levels discrete 0\n\
             unset surface\n\
             set table '{contour}'\n\
             splot '{data}' using 1:2:3\n\
             unset table\n\
             reset\n\
             set datafile separator ','\n\
             set xlabel '{p1_name}'\n\
             set ylabel 'kappa'\n\
             set view map\n\
             splot '{data}' using 1:2:3 with points pt 5 ps 1.5 palette notitle, \\\n      \
             '{contour}' using 1:2:(0) with lines lc 'black' lw 2 title 'lambda = 0'\n",
            n1 = p1_values.len(),
            n2 = kappas.len(),
            data = args.out.display(),
            contour = contour.display(),
        );
        write_file(&gp, script.as_bytes())?;
        written.push(gp);
    }
    if json {
        println!(
            "{}",
            json!({
                "files": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "cells": cells.len(),
                "regime_counts": counts,
                "config_hash": format!("{:016x}", config_hash(&canonical)),
            })
        );
    } else {
        println!("wrote {} ({} cells)", args.out.display(), cells.len());
        for (k, v) in counts {
            println!("  {k}: {v}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_reach(args: &ReachArgs, cfg: &Cfg, json: bool) -> Result<ExitCode> {
    let p = ModelParams::new(
        resolve(args.params.eps, cfg, "eps", Some(0.6))?,
        resolve(args.params.alpha, cfg, "alpha", None)?,
        resolve(args.params.kappa, cfg, "kappa", None)?,
    )?;
    let r0 = resolve(args.r0, cfg, "r0", Some(0.15))?;
    let rz = resolve(args.rz, cfg, "rz", Some(0.15))?;
    let ode_dt = resolve(args.ode_dt, cfg, "ode_dt", Some(1e-3))?;

    if let Some(count) = args.count {
        let seed = default_seed(args.seed, cfg)?;
        let mut rng = SplitMix64::new(seed);
        let pairs: Vec<(State2, State2)> = (0..count)
            .map(|_| {
                (
                    State2 { x1: 0.1 + 2.9 * rng.next_uniform(), x2: 0.1 + 2.9 * rng.next_uniform() },
                    State2 { x1: 0.1 + 2.9 * rng.next_uniform(), x2: 0.1 + 2.9 * rng.next_uniform() },
                )
            })
            .collect();
        let outcomes: Vec<_> = pairs
            .par_iter()
            .map(|(x, z)| control::reach_auto(&p, x, z, r0, rz, ode_dt))
            .collect();
        let mut successes = 0;
        for out in &outcomes {
            if out.as_ref().map(|o| o.success).unwrap_or(false) {
                successes += 1;
            }
        }
        if json {
            println!("{}", json!({ "pairs": count, "successes": successes }));
        } else {
            println!("{successes}/{count} random pairs reached");
        }
        return Ok(if successes == count { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }

    let x = parse_point(&resolve(args.x.clone(), cfg, "x", Some("0.3,0.3".to_string()))?)?;
    let z = parse_point(&resolve(args.z.clone(), cfg, "z", Some("1,2".to_string()))?)?;
    let canonical = format!(
        "alpha={} kappa={} x={},{} z={},{} r0={r0} rz={rz} ode_dt={ode_dt}",
        p.alpha(), p.kappa(), x.x1, x.x2, z.x1, z.x2
    );
    let outcome = match (args.vstar, args.big_r) {
        (None, None) => control::reach_auto(&p, &x, &z, r0, rz, ode_dt)?,
        (vstar, big_r) => {
            let v = match vstar {
                Some(v) => v,
                None => control::choose_vstar(&p, &z)?,
            };
            match big_r {
                Some(r) => control::reach(&p, &x, &z, &ControlPlan::new(v, r, r0, rz, ode_dt))?,
                None => {
                    // Fixed sweep level, automatic dive magnitude.
                    let mut out = None;
                    let mut r = 10.0;
                    while r <= 1e6 {
                        let o =
                            control::reach(&p, &x, &z, &ControlPlan::new(v, r, r0, rz, ode_dt))?;
                        let done = o.success && o.phase3_band <= rz;
                        out = Some(o);
                        if done {
                            break;
                        }
                        r *= 2.0;
                    }
                    out.expect("at least one attempt runs")
                }
            }
        }
    };

    let mut buf = Vec::new();
    write_csv2(&outcome.trajectory, &header_comments("reach", &canonical), &mut buf)?;
    write_file(&args.out_traj, &buf)?;
    write_file(&args.out_plan, serde_json::to_string_pretty(&outcome)?.as_bytes())?;
    if json {
        println!(
            "{}",
            json!({
                "success": outcome.success,
                "files": [args.out_traj.display().to_string(), args.out_plan.display().to_string()],
                "failed_phase": outcome.failed_phase,
            })
        );
    } else {
        println!("wrote {} and {}", args.out_traj.display(), args.out_plan.display());
        println!("success = {}", outcome.success);
        for ph in &outcome.phases {
            println!(
                "  v = {:+.3}: {} - {} (t = {:.3}..{:.3})",
                ph.v,
                ph.predicate,
                if ph.satisfied { "satisfied" } else { "timed out" },
                ph.t_start,
                ph.t_end
            );
        }
    }
    Ok(if outcome.success { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_certify(args: &CertifyArgs, cfg: &Cfg, json: bool) -> Result<ExitCode> {
    let p = resolve_params(&args.params, cfg)?;
    let grid = GridSpec {
        x_max: resolve(args.x_max, cfg, "x_max", Some(50.0))?,
        points_per_axis: resolve(args.points, cfg, "points", Some(64))?,
    };
    let theta = resolve(args.theta, cfg, "theta", Some(0.5 * p.theta_star()))?;
    let n = resolve(args.n, cfg, "n", Some(3))?;
    let p0 = resolve(args.p0, cfg, "p0", Some(poly_default_p0(&p, n)))?;

    let exp_report = lyapunov_exp_check(&p, theta, &grid)?;
    let poly_report = lyapunov_poly_check(&p, n, p0, &grid)?;
    let probe = State2 { x1: 1.0, x2: 1.0 };
    let det_exact = hormander_det(&p, &probe);
    let det_numeric = hormander_det_numeric(&p, &probe, 1e-6);
    let weights = hofbauer_weights(&p)?;
    let regime = classify_regime(&p, CRITICAL_TOL_DEFAULT)?;
    let exponents = match regime.regime {
        Regime::Persistence => Some(rate_exponents(&p, n)?),
        _ => None,
    };

    let report = json!({
        "regime": &regime,
        "lyapunov_exponential": &exp_report,
        "lyapunov_polynomial": &poly_report,
        "hormander": {
            "probe": { "x1": probe.x1, "x2": probe.x2 },
            "closed_form": det_exact,
            "finite_difference": det_numeric,
            "relative_gap": ((det_numeric - det_exact) / det_exact).abs(),
        },
        "hofbauer_weights": &weights,
        "rate_exponents": &exponents,
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("regime: {}", regime_name(regime.regime));
        println!(
            "exponential drift check (theta = {theta:.4}): verified = {}",
            exp_report.verified
        );
        println!(
            "polynomial drift check (n = {n}, p0 = {p0:.4}): verified = {}",
            poly_report.verified
        );
        println!(
            "bracket determinant at (1,1): closed form {det_exact:.6}, finite difference {det_numeric:.6}"
        );
        match weights {
            Some(w) => println!("invasion weights: p1 = {:.6}, p2 = {:.6}", w.p1, w.p2),
            None => println!("invasion weights: absent (not in the coexistence regime)"),
        }
        if let Some(e) = exponents {
            println!(
                "rate exponents: q0 = {:.4}, q_max = {:.4}, tv exponent = {:.4}",
                e.q0, e.q_max, e.lambda_tv
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(level: LevelArg, json: bool) -> Result<ExitCode> {
    let level = match level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    };
    let results = run_suite(level);
    let all_passed = results.iter().all(|r| r.passed);
    if json {
        println!("{}", serde_json::to_string_pretty(&results)?);
    } else {
        for r in &results {
            println!("{}", r.line());
        }
        println!(
            "{}: {}/{} criteria passed",
            if all_passed { "OK" } else { "FAILED" },
            results.iter().filter(|r| r.passed).count(),
            results.len()
        );
    }
    Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let cfg = Cfg::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Lambda(p) => cmd_lambda(p, &cfg, cli.json),
        Command::Classify { params, tol } => cmd_classify(params, *tol, &cfg, cli.json),
        Command::Simulate(args) => cmd_simulate(args, &cfg, cli.json),
        Command::Logistic(args) => cmd_logistic(args, &cfg, cli.json),
        Command::Occupation(args) => cmd_occupation(args, &cfg, cli.json),
        Command::Phase(args) => cmd_phase(args, &cfg, cli.json),
        Command::Reach(args) => cmd_reach(args, &cfg, cli.json),
        Command::Certify(args) => cmd_certify(args, &cfg, cli.json),
        Command::Validate { level } => cmd_validate(*level, cli.json),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
