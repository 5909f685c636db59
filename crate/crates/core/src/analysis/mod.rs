//! Diagnostics on simulated solutions: the damped transform
//! `u~(t,x) = exp(-alpha (T - t)) u(t,x)`, weak-form residuals, uniform-in-time
//! moment estimates, Hölder quotients and the damped stochastic convolution.

mod convolution;

pub use convolution::{
    default_modes, holder_constant, stochastic_convolution, stochastic_convolution_with, AlongTrajectory,
    ConvolutionField, ConvolutionWeights, ModalConvolution, VolatilityPath,
};

use std::fmt;
use std::sync::Arc;

use crate::ensemble::{mean_stderr, member_seed, member_seeds, par_map_seeds};
use crate::error::{Error, Result};
use crate::noise::{steps_for, NoiseField};
use crate::quad::trapezoid_samples;
use crate::solver::{run_observed, Coefficients, Forcing, ReflectionIncrements, SolverConfig, Trajectory};

/// Damping rate and reference horizon of the transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedParams {
    pub alpha: f64,
    pub t_ref: f64,
}

impl DampedParams {
    pub fn new(alpha: f64, t_ref: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
        }
        if !(t_ref > 0.0 && t_ref.is_finite()) {
            return Err(Error::domain(format!("T must be positive, got {t_ref}")));
        }
        Ok(DampedParams { alpha, t_ref })
    }

    /// `exp(-alpha (T - t))`.
    #[inline]
    pub fn factor(&self, t: f64) -> f64 {
        (-self.alpha * (self.t_ref - t)).exp()
    }
}

fn rescale(traj: &Trajectory, params: DampedParams, invert: bool) -> Result<Trajectory> {
    let horizon = traj.grid.t_horizon();
    if horizon > params.t_ref * (1.0 + 1e-12) {
        return Err(Error::precondition(format!(
            "trajectory horizon {horizon} exceeds T = {}",
            params.t_ref
        )));
    }
    let mut out = traj.clone();
    for i in 0..out.len() {
        let f = params.factor(out.time(i));
        let f = if invert { 1.0 / f } else { f };
        out.snapshot_mut(i).iter_mut().for_each(|v| *v *= f);
    }
    Ok(out)
}

/// Scales each snapshot by `exp(-alpha (T - t))`.
pub fn damped_transform(traj: &Trajectory, params: DampedParams) -> Result<Trajectory> {
    rescale(traj, params, false)
}

/// Inverse of [`damped_transform`].
pub fn undamped_transform(traj: &Trajectory, params: DampedParams) -> Result<Trajectory> {
    rescale(traj, params, true)
}

/// Coefficients of the equation solved by the damped field:
/// `f~(t,x,z) = e^{-a(T-t)} f(x, e^{a(T-t)} z) + a z` and
/// `sigma~(t,x,z) = e^{-a(T-t)} sigma(x, e^{a(T-t)} z)`.
#[derive(Debug, Clone)]
pub struct TransformedCoefficients {
    pub coefficients: Coefficients,
    pub params: DampedParams,
}

pub fn transformed_coefficients(coeffs: &Coefficients, params: DampedParams) -> TransformedCoefficients {
    TransformedCoefficients {
        coefficients: coeffs.clone(),
        params,
    }
}

impl Forcing for TransformedCoefficients {
    fn drift(&self, t: f64, x: f64, z: f64) -> f64 {
        let d = self.params.factor(t);
        d * self.coefficients.f(x, z / d) + self.params.alpha * z
    }

    fn volatility(&self, t: f64, x: f64, z: f64) -> f64 {
        let d = self.params.factor(t);
        d * self.coefficients.sigma(x, z / d)
    }
}

type Eval2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Test function `phi(s, x)` with `phi_s` and `phi_xx`, vanishing at `x = 0, 1`.
#[derive(Clone)]
pub struct TestFunction {
    phi: Eval2,
    phi_t: Eval2,
    phi_xx: Eval2,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").finish_non_exhaustive()
    }
}

impl TestFunction {
    /// Checks the boundary condition at `s = 0, 0.25, ..., 16`.
    pub fn new<P, T, X>(phi: P, phi_t: T, phi_xx: X) -> Result<Self>
    where
        P: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        T: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        X: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        for i in 0..=64 {
            let s = i as f64 * 0.25;
            let (a, b) = (phi(s, 0.0), phi(s, 1.0));
            if a.abs() > 1e-12 || b.abs() > 1e-12 {
                return Err(Error::domain(format!(
                    "test function does not vanish at the boundary at s = {s}: {a}, {b}"
                )));
            }
        }
        Ok(TestFunction {
            phi: Arc::new(phi),
            phi_t: Arc::new(phi_t),
            phi_xx: Arc::new(phi_xx),
        })
    }

    /// `sin(k pi x)`.
    pub fn sine_mode(k: u32) -> Self {
        Self::decaying_sine_mode(k, 0.0)
    }

    /// `exp(-rate s) sin(k pi x)`.
    pub fn decaying_sine_mode(k: u32, rate: f64) -> Self {
        let w = k as f64 * std::f64::consts::PI;
        // sin(k pi) is not exactly zero in floating point.
        let s = move |x: f64| if x <= 0.0 || x >= 1.0 { 0.0 } else { (w * x).sin() };
        TestFunction {
            phi: Arc::new(move |t, x| (-rate * t).exp() * s(x)),
            phi_t: Arc::new(move |t, x| -rate * (-rate * t).exp() * s(x)),
            phi_xx: Arc::new(move |t, x| -w * w * (-rate * t).exp() * s(x)),
        }
    }

    #[inline]
    pub fn value(&self, s: f64, x: f64) -> f64 {
        (self.phi)(s, x)
    }

    #[inline]
    pub fn time_derivative(&self, s: f64, x: f64) -> f64 {
        (self.phi_t)(s, x)
    }

    #[inline]
    pub fn laplacian(&self, s: f64, x: f64) -> f64 {
        (self.phi_xx)(s, x)
    }
}

/// Absolute defect of the weak formulation at `t_eval`:
///
/// `int u(t) phi(t) - int u_0 phi(0) - int_0^t int u (phi_s + phi_xx)
///  - int_0^t int f(u) phi - int_0^t int phi sigma(u) W(ds,dx) - int_0^t int phi eta(ds,dx)`.
///
/// Space integrals use the trapezoid rule, time integrals left-point step
/// sums. `traj` must record every step.
pub fn weak_form_residual(
    traj: &Trajectory,
    eta: &ReflectionIncrements,
    noise: &NoiseField,
    coeffs: &Coefficients,
    phi: &TestFunction,
    t_eval: f64,
) -> Result<f64> {
    let g = traj.grid;
    if eta.grid != g || noise.grid != g {
        return Err(Error::precondition("trajectory, reflection and noise grids differ"));
    }
    if !traj.is_dense() {
        return Err(Error::precondition("weak-form residual needs every step recorded"));
    }
    let n_eval = steps_for(t_eval, g.dt)?;
    if n_eval > g.n_steps {
        return Err(Error::precondition(format!(
            "t_eval = {t_eval} exceeds the horizon {}",
            g.t_horizon()
        )));
    }
    let xs = g.nodes();
    let pair = |s: f64, u: &[f64], w: &dyn Fn(f64, f64, f64) -> f64| -> f64 {
        let v: Vec<f64> = xs.iter().zip(u).map(|(&x, &u)| w(s, x, u)).collect();
        trapezoid_samples(&v, g.dx)
    };
    let t = g.time(n_eval);
    let lhs = pair(t, traj.snapshot(n_eval), &|s, x, u| u * phi.value(s, x))
        - pair(0.0, traj.snapshot(0), &|s, x, u| u * phi.value(s, x));
    let mut dw = vec![0.0; g.interior()];
    let mut rhs = 0.0;
    for n in 0..n_eval {
        let s = g.time(n);
        let u = traj.snapshot(n);
        rhs += g.dt
            * pair(s, u, &|s, x, u| {
                u * (phi.time_derivative(s, x) + phi.laplacian(s, x)) + coeffs.f(x, u) * phi.value(s, x)
            });
        noise.slice_into(n, &mut dw);
        let masses = eta.row(n);
        for j in 1..g.nx {
            let p = phi.value(s, xs[j]);
            rhs += p * (coeffs.sigma(xs[j], u[j]) * dw[j - 1] + masses[j - 1]);
        }
    }
    let r = (lhs - rhs).abs();
    if !r.is_finite() {
        return Err(Error::NonFinite {
            step: n_eval,
            what: "weak-form residual".into(),
        });
    }
    Ok(r)
}

/// Moment order, damping and horizons for [`sup_moment`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentConfig {
    pub p: f64,
    pub alpha: f64,
    pub horizons: Vec<f64>,
    pub ensemble_size: usize,
}

impl MomentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::domain(format!("p must be at least 1, got {}", self.p)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain("alpha must be positive"));
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::domain("horizons must be positive"));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("horizons must be strictly ascending"));
        }
        if self.ensemble_size < 30 {
            return Err(Error::precondition(format!(
                "ensemble size {} is below 30",
                self.ensemble_size
            )));
        }
        Ok(())
    }
}

/// Monte Carlo estimate of `E[sup_{t<=T} sup_x |u~(t,x)|^p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub t_horizon: f64,
    pub p: f64,
    pub alpha: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Per-member values, in seed order.
    pub samples: Vec<f64>,
}

/// `sup_{t<=T} sup_x |exp(-alpha (T-t)) u(t,x)|` of one run, over every step.
pub fn damped_sup(sim: &SolverConfig, params: DampedParams) -> Result<f64> {
    let noise = NoiseField::new(sim.grid, sim.seed);
    let mut sup = 0.0f64;
    run_observed(sim, &noise, |v| {
        let f = params.factor(v.t);
        let m = v.state.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        sup = sup.max(f * m);
    })?;
    Ok(sup)
}

/// For each horizon, runs `cfg.ensemble_size` independent copies of `sim`
/// and averages the damped sup raised to `p`. Each horizon draws its own
/// seeds from `sim.seed`.
pub fn sup_moment(cfg: &MomentConfig, sim: &SolverConfig) -> Result<Vec<MomentEstimate>> {
    cfg.validate()?;
    sim.validate()?;
    let mut out = Vec::with_capacity(cfg.horizons.len());
    for (k, &t) in cfg.horizons.iter().enumerate() {
        let run_cfg = sim.clone().with_horizon(t)?;
        let params = DampedParams::new(cfg.alpha, t)?;
        let seeds = member_seeds(member_seed(sim.seed, k as u64), cfg.ensemble_size);
        let samples = par_map_seeds(&seeds, |s| {
            Ok(damped_sup(&run_cfg.clone().with_seed(s), params)?.powf(cfg.p))
        })?;
        let (estimate, stderr) = mean_stderr(&samples);
        out.push(MomentEstimate {
            t_horizon: t,
            p: cfg.p,
            alpha: cfg.alpha,
            estimate,
            stderr,
            samples,
        });
    }
    Ok(out)
}

/// Empirical Hölder constant with its exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderEstimate {
    pub time_exponent: f64,
    pub space_exponent: f64,
    pub constant: f64,
    pub sample_count: usize,
}

/// `max |u_i - u_j| / |x_i - x_j|^exponent` over node pairs at least `2 dx`
/// apart.
pub fn holder_quotient(snapshot: &[f64], space_exponent: f64) -> Result<f64> {
    if !(space_exponent > 0.0 && space_exponent <= 0.5) {
        return Err(Error::domain(format!(
            "space exponent must lie in (0, 1/2], got {space_exponent}"
        )));
    }
    let nx = snapshot.len().saturating_sub(1);
    if nx < 8 {
        return Err(Error::precondition(format!("need at least 8 cells, got {nx}")));
    }
    let dx = 1.0 / nx as f64;
    let denom: Vec<f64> = (0..=nx).map(|d| (d as f64 * dx).powf(space_exponent)).collect();
    let mut q = 0.0f64;
    for i in 0..=nx {
        for j in i + 2..=nx {
            q = q.max((snapshot[i] - snapshot[j]).abs() / denom[j - i]);
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::Grid;
    use crate::solver::{run, InitialProfile};

    #[test]
    fn damping_at_known_points() {
        let g = Grid::diffusive(16, 2.0).unwrap();
        let cfg = SolverConfig::new(g, Coefficients::constant(0.0, 0.0), InitialProfile::Sine.sample(&g), 0);
        let (traj, _) = run(&cfg).unwrap();
        let p = DampedParams::new(1.0, 2.0).unwrap();
        let d = damped_transform(&traj, p).unwrap();
        for (a, b) in traj.snapshot(0).iter().zip(d.snapshot(0)) {
            assert!((b - a * 0.1353352832366127).abs() < 1e-12);
        }
        assert_eq!(d.last(), traj.last());
        let back = undamped_transform(&d, p).unwrap();
        for i in 0..traj.len() {
            for (a, b) in traj.snapshot(i).iter().zip(back.snapshot(i)) {
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }
        assert!(damped_transform(&traj, DampedParams::new(1.0, 1.0).unwrap()).is_err());
        assert!(DampedParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn transformed_constant_drift() {
        let p = DampedParams::new(0.7, 3.0).unwrap();
        let tc = transformed_coefficients(&Coefficients::constant(2.0, 0.5), p);
        for &(t, z) in &[(0.0, 0.3), (1.5, 2.0), (3.0, 0.0)] {
            let d = (-0.7f64 * (3.0 - t)).exp();
            assert!((tc.drift(t, 0.4, z) - (2.0 * d + 0.7 * z)).abs() < 1e-14);
            assert!((tc.volatility(t, 0.4, z) - 0.5 * d).abs() < 1e-15);
        }
    }

    #[test]
    fn test_function_boundary_is_checked() {
        assert!(TestFunction::new(|_, x| x, |_, _| 0.0, |_, _| 0.0).is_err());
        let phi = TestFunction::sine_mode(3);
        assert_eq!(phi.value(0.2, 1.0), 0.0);
    }

    #[test]
    fn holder_quotient_of_parabola() {
        let nx = 64;
        let v: Vec<f64> = (0..=nx)
            .map(|j| {
                let x = j as f64 / nx as f64;
                x * (1.0 - x)
            })
            .collect();
        let q = holder_quotient(&v, 0.25).unwrap();
        let mut brute = 0.0f64;
        for i in 0..=nx {
            for j in 0..=nx {
                let d = (i as f64 - j as f64).abs() / nx as f64;
                if d >= 2.0 / nx as f64 - 1e-15 {
                    brute = brute.max((v[i] - v[j]).abs() / d.powf(0.25));
                }
            }
        }
        assert!((q - brute).abs() < 1e-15);
        let shifted: Vec<f64> = v.iter().map(|u| u + 3.0).collect();
        assert!((holder_quotient(&shifted, 0.25).unwrap() - q).abs() < 1e-12);
        assert_eq!(holder_quotient(&vec![0.0; 65], 0.25).unwrap(), 0.0);
        assert!(holder_quotient(&[0.0; 5], 0.25).is_err());
        assert!(holder_quotient(&v, 0.75).is_err());
    }

    #[test]
    fn moment_config_validation() {
        let mut c = MomentConfig {
            p: 2.0,
            alpha: 1.0,
            horizons: vec![1.0, 2.0],
            ensemble_size: 30,
        };
        assert!(c.validate().is_ok());
        c.ensemble_size = 10;
        assert!(c.validate().is_err());
        c.ensemble_size = 30;
        c.horizons = vec![2.0, 1.0];
        assert!(c.validate().is_err());
        c.horizons = vec![1.0];
        c.p = 0.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_dynamics_have_zero_moments_and_residual() {
        let g = Grid::diffusive(16, 0.25).unwrap();
        let sim = SolverConfig::new(g, Coefficients::constant(0.0, 0.0), vec![0.0; 17], 1).with_stride(1);
        let cfg = MomentConfig {
            p: 2.0,
            alpha: 1.0,
            horizons: vec![0.25, 0.5],
            ensemble_size: 30,
        };
        for m in sup_moment(&cfg, &sim).unwrap() {
            assert_eq!(m.estimate, 0.0);
        }
        let (traj, eta) = run(&sim).unwrap();
        let noise = NoiseField::new(g, 1);
        let r = weak_form_residual(
            &traj,
            &eta,
            &noise,
            &sim.coefficients,
            &TestFunction::sine_mode(1),
            0.25,
        )
        .unwrap();
        assert!(r < 1e-12);
    }
}
