//! Empirical occupation measures and distributional diagnostics.
//!
//! An [`OccupationHistogram`] accumulates the fraction of time a trajectory
//! spends in each cell of a log-spaced 2-D grid, with an explicit
//! zero-boundary bin below the smallest edge on each axis (extinction runs
//! pile mass against the axes) and an overflow bin above the largest edge.
//! Histograms merge associatively, so ensembles can accumulate per worker
//! and combine deterministically.

use std::io::Write;

use crate::error::{Error, Result};
use crate::integrate::{stream_em, uniform_step, Scheme, Trajectory1, Trajectory2};
use crate::model::{GammaStationary, ModelParams, Species, State2};

/// Time-weighted 2-D histogram over prey/predator densities.
#[derive(Debug, Clone)]
pub struct OccupationHistogram {
    /// Interior bin edges, shared by both axes (strictly increasing,
    /// log-spaced). Bin 0 is `[0, edges[0])`, interior bin `j` is
    /// `[edges[j-1], edges[j])`, and bin `edges.len()` catches everything at
    /// or above the last edge.
    edges: Vec<f64>,
    weights: Vec<f64>,
    total_time: f64,
}

impl OccupationHistogram {
    /// Log-spaced interior bins between `min_edge` and `max_edge`.
    pub fn new(min_edge: f64, max_edge: f64, interior_bins: usize) -> Result<Self> {
        if !(min_edge > 0.0) || !(max_edge > min_edge) || interior_bins < 1 {
            return Err(Error::InvalidParameter(format!(
                "histogram needs 0 < min_edge < max_edge and at least one bin, \
                 got ({min_edge}, {max_edge}, {interior_bins})"
            )));
        }
        let lo = min_edge.ln();
        let hi = max_edge.ln();
        let edges: Vec<f64> = (0..=interior_bins)
            .map(|i| (lo + (hi - lo) * i as f64 / interior_bins as f64).exp())
            .collect();
        let per_axis = interior_bins + 2;
        Ok(Self { edges, weights: vec![0.0; per_axis * per_axis], total_time: 0.0 })
    }

    /// 256 interior bins per axis spanning `[1e-6, 1e2]`.
    pub fn default_bins() -> Self {
        Self::new(1e-6, 1e2, 256).expect("default bin layout is valid")
    }

    fn bins_per_axis(&self) -> usize {
        self.edges.len() + 1
    }

    fn bin_index(&self, v: f64) -> usize {
        if v < self.edges[0] {
            0
        } else if v >= *self.edges.last().expect("edges are non-empty") {
            self.edges.len()
        } else {
            self.edges.partition_point(|&e| e <= v)
        }
    }

    /// Bounds of bin `i` on one axis; the overflow bin is unbounded above.
    fn bin_bounds(&self, i: usize) -> (f64, f64) {
        if i == 0 {
            (0.0, self.edges[0])
        } else if i < self.edges.len() {
            (self.edges[i - 1], self.edges[i])
        } else {
            (*self.edges.last().expect("edges are non-empty"), f64::INFINITY)
        }
    }

    /// Add `dt` of residence time at `state`.
    pub fn accumulate_sample(&mut self, state: &State2, dt: f64) {
        let per_axis = self.bins_per_axis();
        let i = self.bin_index(state.x1);
        let j = self.bin_index(state.x2);
        self.weights[i * per_axis + j] += dt;
        self.total_time += dt;
    }

    /// Fold per-cell visit counts in as `count * dt` each. One rounding per
    /// cell keeps trajectory accumulation order-independent bin-exactly.
    fn accumulate_counts(&mut self, counts: &[u64], dt: f64) {
        debug_assert_eq!(counts.len(), self.weights.len());
        let mut total: u64 = 0;
        for (w, &c) in self.weights.iter_mut().zip(counts.iter()) {
            if c > 0 {
                *w += c as f64 * dt;
                total += c;
            }
        }
        self.total_time += total as f64 * dt;
    }

    /// A zeroed visit-count grid matching this histogram's layout, for use
    /// with [`Self::count_sample`] and `accumulate_counts`.
    pub(crate) fn fresh_counts(&self) -> Vec<u64> {
        vec![0; self.weights.len()]
    }

    pub(crate) fn count_sample(&self, counts: &mut [u64], state: &State2) {
        let per_axis = self.bins_per_axis();
        counts[self.bin_index(state.x1) * per_axis + self.bin_index(state.x2)] += 1;
    }

    /// Accumulate a trajectory on a uniform grid by the left-endpoint rule:
    /// every state except the last owns one step of time.
    pub fn accumulate(&mut self, traj: &Trajectory2) -> Result<()> {
        let dt = uniform_step(&traj.times)?;
        let mut counts = self.fresh_counts();
        for s in &traj.states[..traj.states.len() - 1] {
            self.count_sample(&mut counts, s);
        }
        self.accumulate_counts(&counts, dt);
        Ok(())
    }

    /// Accumulate a prey-only trajectory as `(z, 0)` states.
    pub fn accumulate_prey(&mut self, traj: &Trajectory1) -> Result<()> {
        let dt = uniform_step(&traj.times)?;
        let mut counts = self.fresh_counts();
        for &z in &traj.values[..traj.values.len() - 1] {
            self.count_sample(&mut counts, &State2 { x1: z, x2: 0.0 });
        }
        self.accumulate_counts(&counts, dt);
        Ok(())
    }

    /// Merge another histogram with identical bin layout.
    pub fn merge(&mut self, other: &OccupationHistogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::InvalidParameter(
                "cannot merge histograms with different bin layouts".into(),
            ));
        }
        for (w, v) in self.weights.iter_mut().zip(other.weights.iter()) {
            *w += v;
        }
        self.total_time += other.total_time;
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Fraction of time in the overflow bins (either coordinate at or above
    /// the largest edge).
    pub fn overflow_fraction(&self) -> f64 {
        if self.total_time == 0.0 {
            return 0.0;
        }
        let per_axis = self.bins_per_axis();
        let top = per_axis - 1;
        let mut mass = 0.0;
        for i in 0..per_axis {
            mass += self.weights[i * per_axis + top];
            if i != top {
                mass += self.weights[top * per_axis + i];
            }
        }
        mass / self.total_time
    }

    /// Normalized mass of the bins meeting `region` (conservative outward
    /// rounding: a bin counts fully as soon as it intersects).
    pub fn fraction_in(&self, region: &Rect) -> Result<f64> {
        if self.total_time == 0.0 {
            return Err(Error::Empty("histogram holds no mass".into()));
        }
        let per_axis = self.bins_per_axis();
        let mut mass = 0.0;
        for i in 0..per_axis {
            let (x_lo, x_hi) = self.bin_bounds(i);
            if x_hi <= region.x1_lo || x_lo > region.x1_hi {
                continue;
            }
            for j in 0..per_axis {
                let (y_lo, y_hi) = self.bin_bounds(j);
                if y_hi <= region.x2_lo || y_lo > region.x2_hi {
                    continue;
                }
                mass += self.weights[i * per_axis + j];
            }
        }
        Ok(mass / self.total_time)
    }

    /// Empirical prey-marginal CDF at the interior edges.
    fn prey_marginal_cdf(&self) -> Vec<f64> {
        let per_axis = self.bins_per_axis();
        let mut row_mass = vec![0.0; per_axis];
        for i in 0..per_axis {
            for j in 0..per_axis {
                row_mass[i] += self.weights[i * per_axis + j];
            }
        }
        let mut cdf = Vec::with_capacity(self.edges.len());
        let mut cum = 0.0;
        for (i, _) in self.edges.iter().enumerate() {
            cum += row_mass[i];
            // Accumulated rounding can push cum a few ulps past the total.
            cdf.push((cum / self.total_time).min(1.0));
        }
        cdf
    }

    /// Kolmogorov–Smirnov distance between the prey marginal and the
    /// stationary prey law, taken over the bin edges.
    pub fn ks_to_gamma_marginal(&self, law: &GammaStationary) -> Result<f64> {
        if self.total_time == 0.0 {
            return Err(Error::Empty("histogram holds no mass".into()));
        }
        let empirical = self.prey_marginal_cdf();
        let mut ks = 0.0f64;
        for (edge, emp) in self.edges.iter().zip(empirical.iter()) {
            let theoretical = law.cdf(*edge)?;
            ks = ks.max((emp - theoretical).abs());
        }
        Ok(ks)
    }

    /// Write `bin_x1_lo,bin_x1_hi,bin_x2_lo,bin_x2_hi,weight` rows for every
    /// cell holding mass, with `#`-prefixed comment lines first.
    pub fn write_csv<W: Write>(&self, comments: &[String], out: &mut W) -> Result<()> {
        for line in comments {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "bin_x1_lo,bin_x1_hi,bin_x2_lo,bin_x2_hi,weight")?;
        let per_axis = self.bins_per_axis();
        for i in 0..per_axis {
            let (x_lo, x_hi) = self.bin_bounds(i);
            for j in 0..per_axis {
                let w = self.weights[i * per_axis + j];
                if w == 0.0 {
                    continue;
                }
                let (y_lo, y_hi) = self.bin_bounds(j);
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    x_lo, x_hi, y_lo, y_hi, w
                )?;
            }
        }
        Ok(())
    }
}

/// Axis-aligned rectangle `[x1_lo, x1_hi] × [x2_lo, x2_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x1_lo: f64,
    pub x1_hi: f64,
    pub x2_lo: f64,
    pub x2_hi: f64,
}

impl Rect {
    pub fn everything() -> Self {
        Rect { x1_lo: 0.0, x1_hi: f64::INFINITY, x2_lo: 0.0, x2_hi: f64::INFINITY }
    }
}

/// Time average `(1/T) Σ f(state) dt` over a uniform-grid trajectory
/// (left-endpoint rule). Aborts on non-finite values of `f`.
pub fn time_average<F: Fn(&State2) -> f64>(traj: &Trajectory2, f: F) -> Result<f64> {
    let dt = uniform_step(&traj.times)?;
    let mut sum = 0.0;
    for s in &traj.states[..traj.states.len() - 1] {
        let v = f(s);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "observable returned {v} at state ({}, {})",
                s.x1, s.x2
            )));
        }
        sum += v * dt;
    }
    Ok(sum / (dt * (traj.states.len() - 1) as f64))
}

/// Least-squares slope of `log(coordinate)` against time over the second
/// half of a trajectory. `None` when the coordinate hits numeric zero there.
pub fn log_slope_second_half(traj: &Trajectory2, species: Species) -> Option<f64> {
    let n = traj.times.len();
    if n < 4 {
        return None;
    }
    let start = n / 2;
    let mut st = 0.0;
    let mut stt = 0.0;
    let mut sy = 0.0;
    let mut sty = 0.0;
    let mut count = 0.0;
    for i in start..n {
        let v = species.pick(&traj.states[i]);
        if v <= 0.0 {
            return None;
        }
        let t = traj.times[i];
        let y = v.ln();
        st += t;
        stt += t * t;
        sy += y;
        sty += t * y;
        count += 1.0;
    }
    let denom = count * stt - st * st;
    if denom == 0.0 {
        return None;
    }
    Some((count * sty - st * sy) / denom)
}

/// Ensemble estimate of the asymptotic log-rate of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LogRateEstimate {
    pub slope: f64,
    pub std_err: f64,
    pub paths_used: usize,
    pub paths_excluded: usize,
}

/// Average the per-path second-half slope of `log(coordinate)` over an
/// ensemble of at least 30 trajectories. Paths whose coordinate hits
/// numeric zero are excluded and counted.
pub fn log_rate_estimate(trajs: &[Trajectory2], species: Species) -> Result<LogRateEstimate> {
    if trajs.len() < 30 {
        return Err(Error::InvalidParameter(format!(
            "log-rate estimation needs at least 30 trajectories, got {}",
            trajs.len()
        )));
    }
    let slopes: Vec<f64> = trajs
        .iter()
        .filter_map(|t| log_slope_second_half(t, species))
        .collect();
    summarize_slopes(&slopes, trajs.len())
}

/// Aggregate per-path slopes (mean and standard error of the mean).
pub fn summarize_slopes(slopes: &[f64], total_paths: usize) -> Result<LogRateEstimate> {
    if slopes.len() < 2 {
        return Err(Error::Empty(
            "too few usable paths for a log-rate estimate".into(),
        ));
    }
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let var = slopes.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    Ok(LogRateEstimate {
        slope: mean,
        std_err: (var / n).sqrt(),
        paths_used: slopes.len(),
        paths_excluded: total_paths - slopes.len(),
    })
}

/// Stream a long run straight into a histogram without storing the
/// trajectory. The first `burn_in_steps` steps are discarded; the final
/// state and the divergence flag are returned so runs can be chained.
/// Produces bin-exactly the same weights as accumulating the stored
/// trajectory.
pub fn accumulate_stream(
    hist: &mut OccupationHistogram,
    params: &ModelParams,
    x0: State2,
    scheme: Scheme,
    dt: f64,
    n_steps: usize,
    burn_in_steps: usize,
    seed: u64,
) -> Result<(State2, bool)> {
    let mut counts = hist.fresh_counts();
    let mut step = 0usize;
    let out = stream_em(params, x0, seed, dt, n_steps, scheme, |_, s| {
        if step >= burn_in_steps {
            hist.count_sample(&mut counts, s);
        }
        step += 1;
    })?;
    hist.accumulate_counts(&counts, dt);
    Ok(out)
}

/// Streaming time average of `f` along a fresh simulation, with partial
/// averages recorded at the requested step counts (sorted ascending).
pub fn time_average_stream<F: Fn(&State2) -> f64>(
    params: &ModelParams,
    x0: State2,
    scheme: Scheme,
    dt: f64,
    checkpoints: &[usize],
    seed: u64,
    f: F,
) -> Result<Vec<f64>> {
    let n_steps = *checkpoints.last().ok_or_else(|| {
        Error::InvalidParameter("need at least one checkpoint".into())
    })?;
    let mut sum = 0.0;
    let mut bad = None;
    let mut step = 0usize;
    let mut results = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = 0usize;
    let (_, _divergent) = stream_em(params, x0, seed, dt, n_steps, scheme, |_, s| {
        let v = f(s);
        if !v.is_finite() && bad.is_none() {
            bad = Some(*s);
        }
        sum += v * dt;
        step += 1;
        while next_checkpoint < checkpoints.len() && step == checkpoints[next_checkpoint] {
            results.push(sum / (dt * step as f64));
            next_checkpoint += 1;
        }
    })?;
    if let Some(s) = bad {
        return Err(Error::NonFinite(format!(
            "observable non-finite at state ({}, {})",
            s.x1, s.x2
        )));
    }
    if results.len() != checkpoints.len() {
        return Err(Error::NonFinite(
            "run diverged before reaching all checkpoints".into(),
        ));
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::BrownianPath;
    use crate::model::ModelParams;

    fn params(eps: f64, alpha: f64, kappa: f64) -> ModelParams {
        ModelParams::new(eps, alpha, kappa).unwrap()
    }

    fn constant_trajectory(s: State2, dt: f64, n: usize) -> Trajectory2 {
        Trajectory2 {
            times: (0..=n).map(|i| i as f64 * dt).collect(),
            states: vec![s; n + 1],
            divergent: false,
        }
    }

    #[test]
    fn constant_trajectory_fills_one_bin() {
        let mut hist = OccupationHistogram::new(1e-3, 1e2, 32).unwrap();
        let traj = constant_trajectory(State2 { x1: 1.0, x2: 2.0 }, 0.01, 500);
        hist.accumulate(&traj).unwrap();
        assert!((hist.total_time() - 5.0).abs() < 1e-12);
        assert!((hist.weight_sum() - 5.0).abs() < 1e-12);
        let tight = Rect { x1_lo: 0.9, x1_hi: 1.1, x2_lo: 1.9, x2_hi: 2.1 };
        assert!((hist.fraction_in(&tight).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn accumulation_is_additive_and_merge_commutes() {
        let p = params(0.6, 0.3, 2.5);
        let a = crate::integrate::simulate_em(
            &p,
            State2 { x1: 0.75, x2: 1.25 },
            &BrownianPath::generate(1, 1e-2, 500).unwrap(),
            Scheme::LogSpace,
        );
        let b = crate::integrate::simulate_em(
            &p,
            State2 { x1: 2.0, x2: 0.4 },
            &BrownianPath::generate(2, 1e-2, 700).unwrap(),
            Scheme::LogSpace,
        );
        let mut ab = OccupationHistogram::new(1e-6, 1e2, 64).unwrap();
        ab.accumulate(&a).unwrap();
        ab.accumulate(&b).unwrap();
        let mut ha = OccupationHistogram::new(1e-6, 1e2, 64).unwrap();
        ha.accumulate(&a).unwrap();
        let mut hb = OccupationHistogram::new(1e-6, 1e2, 64).unwrap();
        hb.accumulate(&b).unwrap();
        let mut ba = hb.clone();
        ba.merge(&ha).unwrap();
        let mut merged = ha.clone();
        merged.merge(&hb).unwrap();
        assert_eq!(merged.weights, ab.weights);
        assert_eq!(ba.weights, ab.weights);
        let mismatched = OccupationHistogram::new(1e-6, 1e2, 32).unwrap();
        assert!(merged.clone().merge(&mismatched).is_err());
    }

    #[test]
    fn mass_conservation_under_many_samples() {
        let mut hist = OccupationHistogram::new(1e-6, 1e2, 16).unwrap();
        let dt = 1e-3;
        let mut s = State2 { x1: 0.5, x2: 0.5 };
        for i in 0..1_000_000 {
            s.x1 = 0.5 + 0.4 * ((i as f64) * 0.1).sin();
            s.x2 = 0.5 + 0.4 * ((i as f64) * 0.05).cos();
            hist.accumulate_sample(&s, dt);
        }
        let rel = (hist.weight_sum() - hist.total_time()).abs() / hist.total_time();
        assert!(rel < 1e-9);
    }

    #[test]
    fn fraction_of_everything_is_one() {
        let mut hist = OccupationHistogram::default_bins();
        assert!(hist.fraction_in(&Rect::everything()).is_err());
        hist.accumulate_sample(&State2 { x1: 1.0, x2: 1e3 }, 1.0); // overflow bin
        hist.accumulate_sample(&State2 { x1: 0.0, x2: 0.0 }, 1.0); // zero bin
        hist.accumulate_sample(&State2 { x1: 1.0, x2: 1.0 }, 2.0);
        assert!((hist.fraction_in(&Rect::everything()).unwrap() - 1.0).abs() < 1e-12);
        assert!((hist.overflow_fraction() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fraction_is_monotone_in_region() {
        let p = params(0.6, 0.3, 2.5);
        let traj = crate::integrate::simulate_em(
            &p,
            State2 { x1: 0.75, x2: 1.25 },
            &BrownianPath::generate(5, 1e-2, 20_000).unwrap(),
            Scheme::LogSpace,
        );
        let mut hist = OccupationHistogram::default_bins();
        hist.accumulate(&traj).unwrap();
        let mut last = 0.0;
        for &half in &[0.5, 1.0, 2.0, 5.0, 20.0] {
            let f = hist
                .fraction_in(&Rect { x1_lo: 0.0, x1_hi: half, x2_lo: 0.0, x2_hi: half })
                .unwrap();
            assert!(f >= last);
            last = f;
        }
    }

    #[test]
    fn ks_against_direct_gamma_samples() {
        // A histogram filled with draws from the law itself must sit close
        // to the law in KS distance.
        let p = params(0.6, 0.9, 2.5);
        let g = GammaStationary::from_params(&p).unwrap();
        let mut rng = crate::rng::SplitMix64::new(11);
        let mut hist = OccupationHistogram::default_bins();
        for _ in 0..1_000_000 {
            let x = crate::rng::sample_gamma(&mut rng, g.shape(), g.scale());
            hist.accumulate_sample(&State2 { x1: x, x2: 0.0 }, 1.0);
        }
        let ks = hist.ks_to_gamma_marginal(&g).unwrap();
        assert!(ks < 0.005, "ks = {ks}");
        assert!(ks > 0.0);
    }

    #[test]
    fn time_average_of_one_is_one() {
        let traj = constant_trajectory(State2 { x1: 0.3, x2: 0.7 }, 0.01, 100);
        assert!((time_average(&traj, |_| 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(time_average(&traj, |_| f64::NAN).is_err());
    }

    #[test]
    fn non_uniform_grids_are_rejected() {
        let mut traj = constant_trajectory(State2 { x1: 1.0, x2: 1.0 }, 0.01, 10);
        traj.times[5] += 0.005;
        let mut hist = OccupationHistogram::default_bins();
        assert!(hist.accumulate(&traj).is_err());
        assert!(time_average(&traj, |_| 1.0).is_err());
    }

    #[test]
    fn log_slope_recovers_exponential_decay() {
        let dt = 0.01;
        let n = 10_000;
        let rate = -0.37;
        let traj = Trajectory2 {
            times: (0..=n).map(|i| i as f64 * dt).collect(),
            states: (0..=n)
                .map(|i| State2 { x1: 1.0, x2: 2.0 * (rate * i as f64 * dt).exp() })
                .collect(),
            divergent: false,
        };
        let slope = log_slope_second_half(&traj, Species::Predator).unwrap();
        assert!((slope - rate).abs() < 1e-9);
        // A path that hits zero is excluded.
        let mut dead = traj.clone();
        dead.states[n - 1].x2 = 0.0;
        assert!(log_slope_second_half(&dead, Species::Predator).is_none());
    }

    #[test]
    fn ensemble_estimate_requires_thirty_paths() {
        let traj = constant_trajectory(State2 { x1: 1.0, x2: 1.0 }, 0.01, 10);
        assert!(log_rate_estimate(&vec![traj; 10], Species::Prey).is_err());
    }

    #[test]
    fn streamed_accumulation_matches_stored() {
        let p = params(0.6, 0.3, 2.5);
        let x0 = State2 { x1: 0.75, x2: 1.25 };
        let (dt, n, seed) = (1e-3, 5000, 33);
        let traj = crate::integrate::simulate_em(
            &p,
            x0,
            &BrownianPath::generate(seed, dt, n).unwrap(),
            Scheme::LogSpace,
        );
        let mut stored = OccupationHistogram::default_bins();
        stored.accumulate(&traj).unwrap();
        let mut streamed = OccupationHistogram::default_bins();
        accumulate_stream(&mut streamed, &p, x0, Scheme::LogSpace, dt, n, 0, seed).unwrap();
        assert_eq!(stored.weights, streamed.weights);
        // Burn-in removes exactly the prefix mass.
        let mut burned = OccupationHistogram::default_bins();
        accumulate_stream(&mut burned, &p, x0, Scheme::LogSpace, dt, n, 1000, seed).unwrap();
        assert!((burned.total_time() - (n - 1000) as f64 * dt).abs() < 1e-9);
    }

    #[test]
    fn streamed_time_average_checkpoints() {
        let p = params(0.6, 0.3, 2.5);
        let x0 = State2 { x1: 0.75, x2: 1.25 };
        let avgs = time_average_stream(
            &p,
            x0,
            Scheme::LogSpace,
            1e-3,
            &[1000, 2000],
            9,
            |s| s.x1 + s.x2,
        )
        .unwrap();
        assert_eq!(avgs.len(), 2);
        assert!(avgs.iter().all(|a| a.is_finite() && *a > 0.0));
        // Against the stored-trajectory average at the first checkpoint.
        let traj = crate::integrate::simulate_em(
            &p,
            x0,
            &BrownianPath::generate(9, 1e-3, 1000).unwrap(),
            Scheme::LogSpace,
        );
        let direct = time_average(&traj, |s| s.x1 + s.x2).unwrap();
        assert!((avgs[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn csv_lists_only_massive_bins() {
        let mut hist = OccupationHistogram::new(1e-3, 1e2, 8).unwrap();
        hist.accumulate_sample(&State2 { x1: 1.0, x2: 1.0 }, 0.5);
        let mut buf = Vec::new();
        hist.write_csv(&[String::from("test")], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# test");
        assert_eq!(lines[1], "bin_x1_lo,bin_x1_hi,bin_x2_lo,bin_x2_hi,weight");
        assert_eq!(lines.len(), 3);
    }
}
