//! Dirichlet heat kernel on `[0, 1]` for `u_t = u_xx`.
//!
//! Two series are available. The sine series
//! `G(t,x,y) = 2 sum_k exp(-k^2 pi^2 t) sin(k pi x) sin(k pi y)`
//! converges fast for large `t`; the method of images
//! `G(t,x,y) = (4 pi t)^(-1/2) sum_n [exp(-(x-y+2n)^2/4t) - exp(-(x+y+2n)^2/4t)]`
//! converges fast for small `t`. [`eval`] dispatches between them at
//! `KernelConfig::crossover_time`.
//!
//! The module also carries numerical checks of two kernel estimates: the
//! uniform bound on `int_0^T int_0^1 G dy ds` ([`integral_bound`]) and the
//! Hölder-type moment brackets ([`verify_kernel_estimate`]).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad;

const PI2: f64 = PI * PI;

/// Series truncation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    /// Maximum number of sine modes.
    pub truncation_terms: usize,
    /// Below this time the image series is used.
    pub crossover_time: f64,
    /// Absolute truncation error target.
    pub tail_tolerance: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            truncation_terms: 64,
            crossover_time: 0.1,
            tail_tolerance: 1e-12,
        }
    }
}

impl KernelConfig {
    pub fn new(truncation_terms: usize, crossover_time: f64, tail_tolerance: f64) -> Result<Self> {
        let cfg = KernelConfig {
            truncation_terms,
            crossover_time,
            tail_tolerance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation_terms < 1 {
            return Err(Error::domain("truncation_terms must be at least 1"));
        }
        if !(self.crossover_time > 0.0 && self.crossover_time.is_finite()) {
            return Err(Error::domain("crossover_time must be positive"));
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance.is_finite()) {
            return Err(Error::domain("tail_tolerance must be positive"));
        }
        let tail = spectral_tail_bound(self.truncation_terms, self.crossover_time);
        if tail > self.tail_tolerance {
            return Err(Error::domain(format!(
                "{} sine modes leave a tail of {tail:e} at t = {}, above tolerance {:e}",
                self.truncation_terms, self.crossover_time, self.tail_tolerance
            )));
        }
        Ok(())
    }
}

/// Upper bound on `2 sum_{k >= K} exp(-k^2 pi^2 t)`, which dominates the
/// sine-series remainder after `K - 1` terms (so also after `K` terms).
pub fn spectral_tail_bound(terms: usize, t: f64) -> f64 {
    let k = terms as f64;
    let ratio = (-(2.0 * k + 1.0) * PI2 * t).exp();
    2.0 * (-k * k * PI2 * t).exp() / (1.0 - ratio)
}

// Internal truncation is this much tighter than the configured tolerance,
// so that the two representations agree to rounding.
const INTERNAL_MARGIN: f64 = 1e-3;

fn check_args(t: f64, x: f64, y: f64) -> Result<()> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::domain(format!("kernel time must be positive, got {t}")));
    }
    for (name, v) in [("x", x), ("y", y)] {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    Ok(())
}

/// Maps `(x, y)` to the reflected pair when `x > 1/2`, using
/// `G(t,x,y) = G(t,1-x,1-y)`. `1 - x` is exact for `x` in `[1/2, 1]`, so the
/// kernel vanishes exactly at `x = 1`.
#[inline]
fn fold(x: f64, y: f64) -> (f64, f64) {
    if x > 0.5 {
        (1.0 - x, 1.0 - y)
    } else {
        (x, y)
    }
}

#[inline]
pub(crate) fn spectral_unchecked(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> f64 {
    let (x, y) = fold(x, y);
    let stop = cfg.tail_tolerance * INTERNAL_MARGIN;
    let mut acc = 0.0;
    for k in 1..=cfg.truncation_terms {
        if spectral_tail_bound(k, t) <= stop {
            break;
        }
        let kf = k as f64;
        acc += (-kf * kf * PI2 * t).exp() * (kf * PI * x).sin() * (kf * PI * y).sin();
    }
    2.0 * acc
}

#[inline]
pub(crate) fn images_unchecked(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> f64 {
    let (x, y) = fold(x, y);
    let pre = 1.0 / (4.0 * PI * t).sqrt();
    let four_t = 4.0 * t;
    let stop = cfg.tail_tolerance * INTERNAL_MARGIN;
    let diff = x - y;
    let sum = x + y;
    // Pair exp(-(x-y+2n)^2/4t) with exp(-(x+y-2n)^2/4t): at x = 0 the two
    // arguments are exact negatives and the pair cancels exactly.
    let pair = |n: f64| {
        let a = diff + 2.0 * n;
        let b = sum - 2.0 * n;
        (-(a * a) / four_t).exp() - (-(b * b) / four_t).exp()
    };
    let mut acc = pair(0.0);
    let mut n = 1usize;
    loop {
        let nf = n as f64;
        acc += pair(nf) + pair(-nf);
        // Images with |m| > n sit at distance at least 2|m| - 2 from the
        // interval; bound the remaining two-sided tail geometrically.
        let m = nf + 1.0;
        let nearest = 2.0 * m - 2.0;
        let first = (-(nearest * nearest) / four_t).exp();
        if nearest > 0.0 && 8.0 * pre * first <= stop && (-(8.0 * m) / four_t).exp() < 0.5 {
            break;
        }
        n += 1;
    }
    pre * acc
}

#[inline]
pub(crate) fn eval_unchecked(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> f64 {
    if t < cfg.crossover_time {
        images_unchecked(t, x, y, cfg)
    } else {
        spectral_unchecked(t, x, y, cfg)
    }
}

/// Truncated sine series. The truncation error is below
/// `cfg.tail_tolerance` whenever `t >= cfg.crossover_time`.
pub fn eval_spectral(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    check_args(t, x, y)?;
    Ok(spectral_unchecked(t, x, y, cfg))
}

/// Image series, with the number of images chosen so the neglected
/// Gaussian tail is below `cfg.tail_tolerance`.
pub fn eval_images(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    check_args(t, x, y)?;
    Ok(images_unchecked(t, x, y, cfg))
}

/// Image series below the crossover time, sine series above it.
pub fn eval(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    check_args(t, x, y)?;
    Ok(eval_unchecked(t, x, y, cfg))
}

/// Result of [`integral_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralBound {
    pub sup_value: f64,
    /// `sup_value <= 1/3`.
    pub bound_check: bool,
    /// Position attaining the supremum.
    pub argmax: f64,
    /// `(x, int_0^T int_0^1 G(s,x,y) dy ds)` over the position grid.
    pub profile: Vec<(f64, f64)>,
    /// Bound on the neglected `int_T^inf` part.
    pub time_tail: f64,
}

/// The constant in the uniform bound `sup_x int_0^inf int_0^1 G dy ds <= 1/3`.
pub const INTEGRAL_BOUND: f64 = 1.0 / 3.0;

/// `int_0^T int_0^1 G(s,x,y) dy ds` by exact term-by-term integration of the
/// sine series: mode `k` contributes
/// `2 sin(k pi x) (1 - exp(-k^2 pi^2 T)) / (k^2 pi^2) * int_0^1 sin(k pi y) dy`.
pub fn space_time_integral(t_max: f64, x: f64, cfg: &KernelConfig) -> Result<f64> {
    if !t_max.is_finite() || t_max <= 0.0 {
        return Err(Error::domain(format!("T_max must be positive, got {t_max}")));
    }
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} is outside [0, 1]")));
    }
    Ok(space_time_integral_unchecked(t_max, x, integral_modes(cfg)))
}

fn integral_modes(cfg: &KernelConfig) -> usize {
    // Remainder over odd k > K is at most 1 / (pi^3 (K - 1)^2).
    let tol = cfg.tail_tolerance.max(1e-13);
    (1.0 / (PI.powi(3) * tol).sqrt()).ceil() as usize + 2
}

fn space_time_integral_unchecked(t_max: f64, x: f64, modes: usize) -> f64 {
    let x = if x > 0.5 { 1.0 - x } else { x };
    if x == 0.0 {
        return 0.0;
    }
    // Only odd modes survive the y-integral: int_0^1 sin(k pi y) dy = 2/(k pi).
    // Summed from the smallest term up to limit rounding.
    let mut acc = 0.0;
    let mut k = if modes % 2 == 1 { modes } else { modes - 1 };
    loop {
        let kf = k as f64;
        let lam = kf * kf * PI2;
        let time_part = -(-lam * t_max).exp_m1() / lam;
        acc += 2.0 * (kf * PI * x).sin() * time_part * 2.0 / (kf * PI);
        if k == 1 {
            break;
        }
        k -= 2;
    }
    acc
}

/// Supremum over an `n_grid`-point position grid of
/// `int_0^{T_max} int_0^1 G(s,x,y) dy ds`, checked against `1/3`.
pub fn integral_bound(t_max: f64, n_grid: usize, cfg: &KernelConfig) -> Result<IntegralBound> {
    if !t_max.is_finite() || t_max <= 0.0 {
        return Err(Error::domain(format!("T_max must be positive, got {t_max}")));
    }
    if n_grid < 2 {
        return Err(Error::domain("position grid needs at least two points"));
    }
    let modes = integral_modes(cfg);
    let profile: Vec<(f64, f64)> = (0..n_grid)
        .map(|i| {
            let x = i as f64 / (n_grid - 1) as f64;
            (x, space_time_integral_unchecked(t_max, x, modes))
        })
        .collect();
    let (argmax, sup_value) =
        profile
            .iter()
            .copied()
            .fold((0.0, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { p } else { best });
    let decay = (-PI2 * t_max).exp();
    let time_tail = 4.0 / PI.powi(3) * decay / (1.0 - decay);
    Ok(IntegralBound {
        sup_value,
        bound_check: profile.iter().all(|&(_, v)| v <= INTEGRAL_BOUND),
        argmax,
        profile,
        time_tail,
    })
}

/// Which of the three moment brackets to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    /// `sup_x [int_s^t (int_0^1 G(t-r,x,z)^2 dz)^(p/(p-2)) dr]^((p-2)/2)`.
    TimeIncrement,
    /// `sup_x [int_0^s (int_0^1 (G(t-r,x,z)-G(s-r,x,z))^2 dz)^(p/(p-2)) dr]^((p-2)/2)`.
    TwoTime,
    /// `sup_t [int_0^t (int_0^1 (G(t-r,x,z)-G(t-r,y,z))^2 dz)^(p/(p-2)) dr]^((p-2)/2)`.
    SpaceIncrement,
}

impl EstimateKind {
    /// Exponent of the increment in the upper bound, read as `(p-4)/4` in
    /// time and `(p-4)/2` in space.
    pub fn target_exponent(self, p: f64) -> f64 {
        match self {
            EstimateKind::TimeIncrement | EstimateKind::TwoTime => (p - 4.0) / 4.0,
            EstimateKind::SpaceIncrement => (p - 4.0) / 2.0,
        }
    }
}

impl std::str::FromStr for EstimateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time-increment" | "time" => Ok(EstimateKind::TimeIncrement),
            "two-time" => Ok(EstimateKind::TwoTime),
            "space-increment" | "space" => Ok(EstimateKind::SpaceIncrement),
            other => Err(Error::domain(format!("unknown estimate kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for EstimateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimateKind::TimeIncrement => "time-increment",
            EstimateKind::TwoTime => "two-time",
            EstimateKind::SpaceIncrement => "space-increment",
        })
    }
}

/// Sampling plan for [`verify_kernel_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSampling {
    /// Increments `|t - s|` or `|x - y|`, all positive.
    pub increments: Vec<f64>,
    /// Positions `x` for the time kinds, pair midpoints for the space kind.
    pub sup_points: Vec<f64>,
    /// Simpson intervals for each `dz` window.
    pub z_intervals: usize,
    /// Simpson intervals in `log r` for the lag integral.
    pub lag_intervals: usize,
    /// The earlier time `s` for [`EstimateKind::TwoTime`].
    pub base_time: f64,
    /// Upper limit of the lag integral for [`EstimateKind::SpaceIncrement`];
    /// the supremum over `t` is attained as `t -> inf` since the integrand is
    /// nonnegative.
    pub horizon: f64,
}

impl EstimateSampling {
    pub fn for_kind(kind: EstimateKind) -> Self {
        let increments = match kind {
            EstimateKind::TimeIncrement | EstimateKind::TwoTime => log_spaced(1e-4, 1e-2, 9),
            EstimateKind::SpaceIncrement => log_spaced(1e-3, 3e-2, 8),
        };
        let sup_points = match kind {
            EstimateKind::SpaceIncrement => vec![0.25, 0.5],
            _ => vec![0.1, 0.25, 0.5],
        };
        EstimateSampling {
            increments,
            sup_points,
            z_intervals: 2048,
            lag_intervals: 256,
            base_time: 1.0,
            horizon: 2.0,
        }
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Least-squares line through `(ln increment, ln quantity)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(increment, quantity)` pairs that entered the fit.
    pub points: Vec<(f64, f64)>,
}

/// Fits a power law to positive `(x, y)` samples on log-log axes.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    if usable.len() < 2 {
        return Err(Error::domain("power-law fit needs two positive samples"));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in &usable {
        let dx = x.ln() - mx;
        sxy += dx * (y.ln() - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(Error::domain("power-law fit needs distinct increments"));
    }
    let slope = sxy / sxx;
    Ok(ExponentFit {
        slope,
        intercept: my - slope * mx,
        points: usable,
    })
}

/// One signed kernel term `sign * G(lag, point, z)`.
#[derive(Clone, Copy)]
struct Term {
    lag: f64,
    point: f64,
    sign: f64,
}

/// `int_0^1 (sum_i sign_i G(lag_i, point_i, z))^2 dz`. Each term owns a
/// window wide enough to hold its Gaussian bulk; the integral runs over the
/// segments between window endpoints, each with its own Simpson grid, so a
/// narrow window nested inside a wide one stays resolved.
fn squared_mass(terms: &[Term], intervals: usize, cfg: &KernelConfig) -> f64 {
    let windows: Vec<(f64, f64)> = terms
        .iter()
        .map(|t| {
            let half = 10.0 * (2.0 * t.lag).sqrt();
            ((t.point - half).max(0.0), (t.point + half).min(1.0))
        })
        .collect();
    let mut cuts: Vec<f64> = windows.iter().flat_map(|&(a, b)| [a, b]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .filter(|seg| {
            let mid = 0.5 * (seg[0] + seg[1]);
            windows.iter().any(|&(a, b)| a <= mid && mid <= b)
        })
        .map(|seg| {
            quad::simpson(
                |z| {
                    let v: f64 = terms
                        .iter()
                        .map(|t| t.sign * eval_unchecked(t.lag, t.point, z, cfg))
                        .sum();
                    v * v
                },
                seg[0],
                seg[1],
                intervals,
            )
        })
        .sum()
}

/// `int_0^{upper} F(r)^q dr` with `F(r) ~ lead / sqrt(r)` as `r -> 0`.
/// Nodes are log-spaced on `[floor, upper]`; `[0, floor]` is integrated
/// from the leading asymptotics.
fn singular_lag_integral<F: Fn(f64) -> f64>(
    inner: F,
    lead: f64,
    q: f64,
    floor: f64,
    upper: f64,
    intervals: usize,
) -> f64 {
    let (a, b) = (floor.ln(), upper.ln());
    let body = quad::simpson(
        |v| {
            let r = v.exp();
            inner(r).max(0.0).powf(q) * r
        },
        a,
        b,
        intervals,
    );
    let e = 1.0 - 0.5 * q;
    let tail = lead.powf(q) * floor.powf(e) / e;
    body + tail
}

/// The bracket of `kind` at one increment, as a supremum over the sampling
/// positions.
pub fn estimate_bracket(
    kind: EstimateKind,
    p: f64,
    increment: f64,
    sampling: &EstimateSampling,
    cfg: &KernelConfig,
) -> Result<f64> {
    if !(p > 4.0) || !p.is_finite() {
        return Err(Error::domain(format!("estimates are stated for p > 4, got {p}")));
    }
    if !(increment >= 0.0) || !increment.is_finite() {
        return Err(Error::domain(format!("increment must be nonnegative, got {increment}")));
    }
    if increment == 0.0 {
        return Ok(0.0);
    }
    let q = p / (p - 2.0);
    let outer = (p - 2.0) / 2.0;
    let free_lead = 1.0 / (8.0 * PI).sqrt();
    let zi = sampling.z_intervals;
    let li = sampling.lag_intervals;
    let mut sup = 0.0f64;
    for &c in &sampling.sup_points {
        let value = match kind {
            EstimateKind::TimeIncrement => {
                let h = increment;
                singular_lag_integral(
                    |tau| {
                        squared_mass(
                            &[Term {
                                lag: tau,
                                point: c,
                                sign: 1.0,
                            }],
                            zi,
                            cfg,
                        )
                    },
                    free_lead,
                    q,
                    h * 1e-8,
                    h,
                    li,
                )
            }
            EstimateKind::TwoTime => {
                let h = increment;
                let s = sampling.base_time;
                singular_lag_integral(
                    |rho| {
                        squared_mass(
                            &[
                                Term {
                                    lag: rho + h,
                                    point: c,
                                    sign: 1.0,
                                },
                                Term {
                                    lag: rho,
                                    point: c,
                                    sign: -1.0,
                                },
                            ],
                            zi,
                            cfg,
                        )
                    },
                    free_lead,
                    q,
                    h * 1e-8,
                    s,
                    li,
                )
            }
            EstimateKind::SpaceIncrement => {
                let d = increment;
                let (x, y) = (c - 0.5 * d, c + 0.5 * d);
                if x < 0.0 || y > 1.0 {
                    continue;
                }
                singular_lag_integral(
                    |tau| {
                        squared_mass(
                            &[
                                Term {
                                    lag: tau,
                                    point: x,
                                    sign: 1.0,
                                },
                                Term {
                                    lag: tau,
                                    point: y,
                                    sign: -1.0,
                                },
                            ],
                            zi,
                            cfg,
                        )
                    },
                    2.0 * free_lead,
                    q,
                    d * d * 1e-8,
                    sampling.horizon,
                    2 * li,
                )
            }
        };
        sup = sup.max(value.powf(outer));
    }
    Ok(sup)
}

/// Evaluates the bracket of `kind` over `sampling.increments` and fits
/// `ln(bracket)` against `ln(increment)`.
pub fn verify_kernel_estimate(
    kind: EstimateKind,
    p: f64,
    sampling: &EstimateSampling,
    cfg: &KernelConfig,
) -> Result<ExponentFit> {
    if !(p > 4.0) || !p.is_finite() {
        return Err(Error::domain(format!("estimates are stated for p > 4, got {p}")));
    }
    if sampling.increments.len() < 2 || sampling.increments.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::domain("need at least two positive increments"));
    }
    if sampling.sup_points.is_empty() {
        return Err(Error::domain("need at least one sampling position"));
    }
    let points = sampling
        .increments
        .iter()
        .map(|&h| Ok((h, estimate_bracket(kind, p, h, sampling, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    fit_power_law(&points)
}

/// Largest deviations from the kernel identities on a fixed lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// `max |G(t,x,y) - G(t,y,x)|`.
    pub symmetry: f64,
    /// `max |G(t,0,y)|, |G(t,1,y)|`.
    pub boundary: f64,
    pub min_value: f64,
    /// `max |int G(s,x,z) G(t,z,y) dz - G(s+t,x,y)|`.
    pub chapman_kolmogorov: f64,
    /// `max (int G(t,x,y) dy - 1)`.
    pub mass_excess: f64,
    /// `max |eval_spectral - eval_images|` for `t >= 0.01`.
    pub cross_representation: f64,
}

/// Times `1e-4 ..= 10`, positions `0, 0.05, ..., 1`; products in the
/// semigroup check use `s, t in {0.05, 0.1, 0.5}` with 2048 Simpson intervals.
pub fn check_identities(cfg: &KernelConfig) -> Result<IdentityReport> {
    cfg.validate()?;
    let times = [1e-4, 1e-3, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 10.0];
    let xs: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut r = IdentityReport {
        symmetry: 0.0,
        boundary: 0.0,
        min_value: f64::INFINITY,
        chapman_kolmogorov: 0.0,
        mass_excess: f64::NEG_INFINITY,
        cross_representation: 0.0,
    };
    for &t in &times {
        for &x in &xs {
            r.boundary = r
                .boundary
                .max(eval(t, 0.0, x, cfg)?.abs())
                .max(eval(t, 1.0, x, cfg)?.abs());
            for &y in &xs {
                let a = eval(t, x, y, cfg)?;
                r.symmetry = r.symmetry.max((a - eval(t, y, x, cfg)?).abs());
                r.min_value = r.min_value.min(a);
                if t >= 0.01 {
                    let d = eval_spectral(t, x, y, cfg)? - eval_images(t, x, y, cfg)?;
                    r.cross_representation = r.cross_representation.max(d.abs());
                }
            }
            if x > 0.0 && x < 1.0 {
                let mass = quad::simpson(|y| eval_unchecked(t, x, y, cfg), 0.0, 1.0, 2048);
                r.mass_excess = r.mass_excess.max(mass - 1.0);
            }
        }
    }
    let lags = [0.05, 0.1, 0.5];
    let pts = [0.1, 0.3, 0.5, 0.7];
    for &s in &lags {
        for &t in &lags {
            for &x in &pts {
                for &y in &pts {
                    let lhs = quad::simpson(
                        |z| eval_unchecked(s, x, z, cfg) * eval_unchecked(t, z, y, cfg),
                        0.0,
                        1.0,
                        2048,
                    );
                    let d = (lhs - eval(s + t, x, y, cfg)?).abs();
                    r.chapman_kolmogorov = r.chapman_kolmogorov.max(d);
                }
            }
        }
    }
    Ok(r)
}
