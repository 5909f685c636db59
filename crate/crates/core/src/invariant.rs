//! Empirical invariant measures by ensemble and time averaging, the Bessel
//! bridge marginal law, and Kolmogorov-Smirnov statistics.

use std::f64::consts::{PI, SQRT_2};

use rand_distr::{Distribution, Uniform};

use crate::ensemble::{member_seeds, par_map_seeds};
use crate::error::{Error, Result};
use crate::noise::{steps_for, CellStream, Grid, NoiseField};
use crate::solver::{run_observed, FieldSnapshot, SolverConfig};

/// Profiles sampled from several runs after a burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub grid: Grid,
    pub burn_in: f64,
    /// Sampling time of each profile.
    pub sampling_times: Vec<f64>,
    /// Ensemble member of each profile.
    pub members: Vec<usize>,
    samples: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn len(&self) -> usize {
        self.sampling_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sampling_times.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let w = self.grid.nx + 1;
        &self.samples[i * w..(i + 1) * w]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.samples.chunks_exact(self.grid.nx + 1)
    }

    pub fn member_count(&self) -> usize {
        self.members.iter().max().map_or(0, |m| m + 1)
    }

    /// Values at the node `x`, which must lie on the grid.
    pub fn marginal(&self, x: f64) -> Result<Vec<f64>> {
        let j = self.grid.node_index(x)?;
        Ok(self.samples().map(|s| s[j]).collect())
    }

    /// Marginal at `x` split by ensemble member, each in time order.
    pub fn member_series(&self, x: f64) -> Result<Vec<Vec<f64>>> {
        let j = self.grid.node_index(x)?;
        let mut out = vec![Vec::new(); self.member_count()];
        for (i, &m) in self.members.iter().enumerate() {
            out[m].push(self.sample(i)[j]);
        }
        Ok(out)
    }

    /// Profiles sampled in `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> EmpiricalMeasure {
        let eps = 1e-9 * t1.abs().max(1.0);
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.sampling_times[i] >= t0 - eps && self.sampling_times[i] <= t1 + eps)
            .collect();
        EmpiricalMeasure {
            grid: self.grid,
            burn_in: self.burn_in.max(t0),
            sampling_times: keep.iter().map(|&i| self.sampling_times[i]).collect(),
            members: keep.iter().map(|&i| self.members[i]).collect(),
            samples: keep.iter().flat_map(|&i| self.sample(i).iter().copied()).collect(),
        }
    }
}

/// Runs `m` copies of `sim` (seeds derived from `sim.seed`) to horizon `t`
/// and keeps the profiles at `burn_in, burn_in + thinning, ... <= t`.
/// `thinning` is rounded to a whole number of steps.
pub fn evolve_ensemble(sim: &SolverConfig, m: usize, t: f64, burn_in: f64, thinning: f64) -> Result<EmpiricalMeasure> {
    if m == 0 {
        return Err(Error::precondition("ensemble size must be positive"));
    }
    if !(burn_in >= 0.0 && burn_in < t) {
        return Err(Error::precondition(format!(
            "burn-in {burn_in} must lie in [0, T = {t})"
        )));
    }
    let run_cfg = sim.clone().with_horizon(t)?;
    run_cfg.validate()?;
    let g = run_cfg.grid;
    if !(thinning > 0.0 && thinning.is_finite()) {
        return Err(Error::precondition("thinning must be positive"));
    }
    let thin = (thinning / g.dt).round() as usize;
    if thin == 0 || thin < sim.snapshot_stride {
        return Err(Error::precondition(format!(
            "thinning {thinning} is below the snapshot interval {}",
            sim.snapshot_stride as f64 * g.dt
        )));
    }
    let first = steps_for(burn_in, g.dt)?;
    let steps: Vec<usize> = (first..=g.n_steps).step_by(thin).collect();
    let seeds = member_seeds(sim.seed, m);
    let runs: Vec<Vec<f64>> = par_map_seeds(&seeds, |seed| {
        let c = run_cfg.clone().with_seed(seed);
        let noise = NoiseField::new(g, seed);
        let mut out = Vec::with_capacity(steps.len() * (g.nx + 1));
        let mut next = 0;
        run_observed(&c, &noise, |v| {
            if next < steps.len() && v.n == steps[next] {
                out.extend_from_slice(v.state);
                next += 1;
            }
        })?;
        Ok(out)
    })?;
    let per = steps.len();
    Ok(EmpiricalMeasure {
        grid: g,
        burn_in,
        sampling_times: (0..m).flat_map(|_| steps.iter().map(|&n| g.time(n))).collect(),
        members: (0..m).flat_map(|i| std::iter::repeat_n(i, per)).collect(),
        samples: runs.concat(),
    })
}

/// CDF of the chi distribution with three degrees of freedom.
pub fn chi3_cdf(rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    if rho.is_infinite() {
        return 1.0;
    }
    let v = libm::erf(rho / SQRT_2) - (2.0 / PI).sqrt() * rho * (-0.5 * rho * rho).exp();
    v.clamp(0.0, 1.0)
}

/// `P(e(x) <= r)` for the standard 3D Bessel bridge `e`, whose marginal is
/// `sqrt(x (1 - x)) chi_3`.
pub fn bessel_bridge_marginal_cdf(x: f64, r: f64) -> Result<f64> {
    BesselBridgeMarginal::new(x, 1.0)?.cdf(r)
}

/// Marginal at `x` of a Bessel bridge scaled by `scale`:
/// `scale * sqrt(x (1 - x)) chi_3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselBridgeMarginal {
    pub x: f64,
    pub scale: f64,
}

impl BesselBridgeMarginal {
    pub fn new(x: f64, scale: f64) -> Result<Self> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::domain(format!("x must lie in (0, 1), got {x}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain("scale must be positive"));
        }
        Ok(BesselBridgeMarginal { x, scale })
    }

    /// Stationary marginal of `du = u_xx dt + sigma W(dt,dx) + eta`. The
    /// unconstrained stationary variance is `sigma^2 x (1 - x) / 2`, so the
    /// bridge is scaled by `sigma / sqrt 2`.
    pub fn for_equation(x: f64, sigma: f64) -> Result<Self> {
        Self::new(x, sigma.abs() / SQRT_2)
    }

    fn width(&self) -> f64 {
        self.scale * (self.x * (1.0 - self.x)).sqrt()
    }

    pub fn cdf(&self, r: f64) -> Result<f64> {
        if r.is_nan() {
            return Err(Error::domain("r is NaN"));
        }
        Ok(chi3_cdf(r / self.width()))
    }

    /// `E[chi_3] = 2 sqrt(2 / pi)`.
    pub fn mean(&self) -> f64 {
        self.width() * 2.0 * (2.0 / PI).sqrt()
    }

    /// `E[chi_3^2] = 3`.
    pub fn std_dev(&self) -> f64 {
        let w = self.width();
        (3.0 * w * w - self.mean().powi(2)).sqrt()
    }
}

/// `sup |F_n - F|` over the sample points.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::precondition("KS distance needs at least one sample"));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("samples contain NaN"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in s.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Two-sample statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::precondition("two-sample KS needs nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Limiting distribution of `sqrt(n) D_n`:
/// `K(l) = 1 - 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 l^2)`.
pub fn kolmogorov_cdf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda < 0.5 {
        // Dual series, fast for small arguments.
        let mut s = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            s += (-m * m * PI * PI / (8.0 * lambda * lambda)).exp();
        }
        return ((2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (1.0 - 2.0 * s).clamp(0.0, 1.0)
}

/// Solves `kolmogorov_cdf(l) = level` by bisection.
pub fn kolmogorov_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("level must lie in (0, 1), got {level}")));
    }
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical KS distance at confidence `level` for `n_eff` effective samples.
pub fn ks_threshold(n_eff: f64, level: f64) -> Result<f64> {
    if !(n_eff > 0.0) {
        return Err(Error::domain("effective sample size must be positive"));
    }
    Ok(kolmogorov_quantile(level)? / n_eff.sqrt())
}

/// Effective sample size under the fixed correlation allowance `n / 5`.
pub fn rule_of_thumb_ess(n: usize) -> f64 {
    n as f64 / 5.0
}

/// Effective sample size `n / tau` with `tau = 1 + 2 sum_k rho_k`, the lag
/// autocorrelations pooled over independent series and summed until the
/// first non-positive one.
pub fn autocorrelation_ess(series: &[Vec<f64>]) -> f64 {
    let n: usize = series.iter().map(Vec::len).sum();
    if n < 2 {
        return n as f64;
    }
    let mean = series.iter().flatten().sum::<f64>() / n as f64;
    let var = series.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let max_lag = series.iter().map(Vec::len).max().unwrap_or(0);
    let mut tau = 1.0;
    for k in 1..max_lag {
        let mut acc = 0.0;
        let mut pairs = 0usize;
        for s in series {
            for i in k..s.len() {
                acc += (s[i] - mean) * (s[i - k] - mean);
                pairs += 1;
            }
        }
        if pairs == 0 {
            break;
        }
        let rho = acc / pairs as f64 / var;
        if rho <= 0.0 {
            break;
        }
        tau += 2.0 * rho;
    }
    n as f64 / tau
}

/// KS distance of the marginal at `x` to `cdf` with its spread over
/// `replicates` bootstrap resamples of whole ensemble members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapKs {
    pub ks: f64,
    pub mean: f64,
    pub std_dev: f64,
}

pub fn bootstrap_ks<F: Fn(f64) -> f64>(
    measure: &EmpiricalMeasure,
    x: f64,
    cdf: F,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapKs> {
    let series = measure.member_series(x)?;
    let all: Vec<f64> = series.concat();
    let ks = ks_distance(&all, &cdf)?;
    let m = series.len();
    if replicates < 2 || m < 2 {
        return Err(Error::precondition("bootstrap needs two members and two replicates"));
    }
    let pick = Uniform::new(0, m).map_err(|e| Error::Domain(e.to_string()))?;
    let mut stats = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let mut rng = CellStream::new(seed, r as u32, (r >> 32) as u32, 0xB007);
        let mut resample = Vec::with_capacity(all.len());
        for _ in 0..m {
            resample.extend_from_slice(&series[pick.sample(&mut rng)]);
        }
        stats.push(ks_distance(&resample, &cdf)?);
    }
    let (mean, se) = crate::ensemble::mean_stderr(&stats);
    Ok(BootstrapKs {
        ks,
        mean,
        std_dev: se * (replicates as f64).sqrt(),
    })
}

/// Two-sample KS distance between the marginals at `x` of two measures.
pub fn stationarity_diagnostic(a: &EmpiricalMeasure, b: &EmpiricalMeasure, x: f64) -> Result<f64> {
    if a.grid.nx != b.grid.nx {
        return Err(Error::precondition("measures live on different grids"));
    }
    ks_two_sample(&a.marginal(x)?, &b.marginal(x)?)
}

/// Mean profile of a set of snapshots.
pub fn mean_profile(measure: &EmpiricalMeasure) -> FieldSnapshot {
    let mut acc = vec![0.0; measure.grid.nx + 1];
    for s in measure.samples() {
        acc.iter_mut().zip(s).for_each(|(a, v)| *a += v);
    }
    let n = measure.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}
