//! Semi-implicit integrator for the reflected stochastic heat equation
//!
//! `du = u_xx dt + f(x,u) dt + sigma(x,u) W(dt,dx) + eta`, `u >= 0`,
//! with `u(t,0) = u(t,1) = 0`.
//!
//! One step solves `(I - dt L_h) w = u^n + dt f(u^n) + sigma(u^n) dW / dx` on
//! the interior nodes, `L_h` the three-point Laplacian, then pushes `w` up to
//! the obstacle: `u^{n+1} = max(w, 0)`. The push is recorded as the cell mass
//! `eta = (u^{n+1} - w) dx`, so `u^{n+1} * eta = 0` holds exactly.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::noise::{Grid, NoiseField};
use crate::tridiag::BackwardEuler;

/// Nodal values `u(t, x_j)`, `j = 0..=nx`.
pub type FieldSnapshot = Vec<f64>;

/// Sup norm above which a run is declared unstable.
pub const BLOWUP_LIMIT: f64 = 1e10;

type Eval = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift `f(x, u)` and volatility `sigma(x, u)` with their bounds.
///
/// `c_f` and `c_sigma` bound both the coefficients and their Lipschitz
/// constants in `u` on `u >= 0`.
#[derive(Clone)]
pub struct Coefficients {
    drift: Eval,
    volatility: Eval,
    pub c_f: f64,
    pub c_sigma: f64,
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients")
            .field("c_f", &self.c_f)
            .field("c_sigma", &self.c_sigma)
            .finish_non_exhaustive()
    }
}

impl Coefficients {
    pub fn new<F, S>(drift: F, volatility: S, c_f: f64, c_sigma: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let c = Coefficients {
            drift: Arc::new(drift),
            volatility: Arc::new(volatility),
            c_f,
            c_sigma,
        };
        c.verify_conditions()?;
        Ok(c)
    }

    /// Constant coefficients `f = drift`, `sigma = volatility`.
    pub fn constant(drift: f64, volatility: f64) -> Self {
        Coefficients {
            drift: Arc::new(move |_, _| drift),
            volatility: Arc::new(move |_, _| volatility),
            c_f: drift.abs().max(f64::MIN_POSITIVE),
            c_sigma: volatility.abs().max(f64::MIN_POSITIVE),
        }
    }

    #[inline]
    pub fn f(&self, x: f64, u: f64) -> f64 {
        (self.drift)(x, u)
    }

    #[inline]
    pub fn sigma(&self, x: f64, u: f64) -> f64 {
        (self.volatility)(x, u)
    }

    /// Checks boundedness and the Lipschitz bound on a lattice of
    /// `(x, u) in [0,1] x [0,8]`.
    pub fn verify_conditions(&self) -> Result<()> {
        if !(self.c_f > 0.0 && self.c_f.is_finite() && self.c_sigma > 0.0 && self.c_sigma.is_finite()) {
            return Err(Error::domain("C_f and C_sigma must be positive and finite"));
        }
        let slack = 1.0 + 1e-12;
        let us: Vec<f64> = (0..=32).map(|i| i as f64 * 0.25).collect();
        for i in 0..=16 {
            let x = i as f64 / 16.0;
            let fs: Vec<f64> = us.iter().map(|&u| self.f(x, u)).collect();
            let ss: Vec<f64> = us.iter().map(|&u| self.sigma(x, u)).collect();
            for k in 0..us.len() {
                if !(fs[k].abs() <= self.c_f * slack) {
                    return Err(Error::domain(format!(
                        "|f({x}, {})| = {} exceeds C_f = {}",
                        us[k], fs[k], self.c_f
                    )));
                }
                if !(ss[k].abs() <= self.c_sigma * slack) {
                    return Err(Error::domain(format!(
                        "|sigma({x}, {})| = {} exceeds C_sigma = {}",
                        us[k], ss[k], self.c_sigma
                    )));
                }
                if k > 0 {
                    let du = us[k] - us[k - 1];
                    if (fs[k] - fs[k - 1]).abs() > self.c_f * du * slack {
                        return Err(Error::domain(format!("f is not C_f-Lipschitz at x = {x}")));
                    }
                    if (ss[k] - ss[k - 1]).abs() > self.c_sigma * du * slack {
                        return Err(Error::domain(format!("sigma is not C_sigma-Lipschitz at x = {x}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Possibly time-dependent drift and volatility, `(t, x, u) -> value`.
pub trait Forcing: Sync {
    fn drift(&self, t: f64, x: f64, u: f64) -> f64;
    fn volatility(&self, t: f64, x: f64, u: f64) -> f64;
}

impl Forcing for Coefficients {
    #[inline]
    fn drift(&self, _t: f64, x: f64, u: f64) -> f64 {
        self.f(x, u)
    }

    #[inline]
    fn volatility(&self, _t: f64, x: f64, u: f64) -> f64 {
        self.sigma(x, u)
    }
}

/// How the constraint `u >= 0` is enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// `u^{n+1} = max(w, 0)`.
    Projection,
    /// Penalty drift `max(-u, 0) / epsilon`, taken implicitly in the local
    /// reaction so that it stays stable for `epsilon << dt`.
    Penalization { epsilon: f64 },
}

/// Inputs of a single reflected run.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub grid: Grid,
    pub coefficients: Coefficients,
    pub initial_data: FieldSnapshot,
    pub scheme: Scheme,
    pub seed: u64,
    /// Record every `snapshot_stride`-th step (the final step is always kept).
    pub snapshot_stride: usize,
}

/// Stride that keeps at most 4096 snapshots.
pub fn default_stride(n_steps: usize) -> usize {
    n_steps.div_ceil(4095).max(1)
}

impl SolverConfig {
    pub fn new(grid: Grid, coefficients: Coefficients, initial_data: FieldSnapshot, seed: u64) -> Self {
        SolverConfig {
            grid,
            coefficients,
            initial_data,
            scheme: Scheme::Projection,
            seed,
            snapshot_stride: default_stride(grid.n_steps),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same configuration on another horizon; the stride is reset to the
    /// default for the new step count.
    pub fn with_horizon(mut self, t_horizon: f64) -> Result<Self> {
        self.grid = Grid::with_horizon(self.grid.nx, self.grid.dt, t_horizon)?;
        self.snapshot_stride = default_stride(self.grid.n_steps);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if self.initial_data.len() != g.nx + 1 {
            return Err(Error::precondition(format!(
                "initial data has {} values, grid has {} nodes",
                self.initial_data.len(),
                g.nx + 1
            )));
        }
        if self.initial_data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::precondition("initial data must be finite and nonnegative"));
        }
        if self.initial_data[0] != 0.0 || self.initial_data[g.nx] != 0.0 {
            return Err(Error::precondition("initial data must vanish at x = 0 and x = 1"));
        }
        if g.dt > g.dx {
            return Err(Error::precondition(format!(
                "dt = {} exceeds dx = {}; the explicit drift and noise need dt <= dx",
                g.dt, g.dx
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::precondition("snapshot stride must be positive"));
        }
        if let Scheme::Penalization { epsilon } = self.scheme {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::precondition("penalization epsilon must be positive"));
            }
        }
        self.coefficients.verify_conditions()
    }
}

/// Named initial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialProfile {
    Zero,
    /// `sin(pi x)`.
    Sine,
    /// `x (1 - x)`.
    Parabola,
}

impl InitialProfile {
    pub fn sample(self, grid: &Grid) -> FieldSnapshot {
        let mut v: FieldSnapshot = grid
            .nodes()
            .into_iter()
            .map(|x| match self {
                InitialProfile::Zero => 0.0,
                InitialProfile::Sine => (std::f64::consts::PI * x).sin().max(0.0),
                InitialProfile::Parabola => x * (1.0 - x),
            })
            .collect();
        v[0] = 0.0;
        v[grid.nx] = 0.0;
        v
    }
}

impl std::str::FromStr for InitialProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitialProfile::Zero),
            "sine" | "sin" => Ok(InitialProfile::Sine),
            "parabola" => Ok(InitialProfile::Parabola),
            other => Err(Error::domain(format!("unknown initial profile {other:?}"))),
        }
    }
}

/// Snapshots of a run at a fixed step stride.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub stride: usize,
    steps: Vec<usize>,
    data: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(grid: Grid, stride: usize) -> Self {
        let count = grid.n_steps / stride + 2;
        Trajectory {
            grid,
            stride,
            steps: Vec::with_capacity(count),
            data: Vec::with_capacity(count * (grid.nx + 1)),
        }
    }

    /// Builds a trajectory from explicit snapshots.
    pub fn from_snapshots(grid: Grid, stride: usize, snapshots: Vec<(usize, FieldSnapshot)>) -> Result<Self> {
        let mut tr = Trajectory::with_capacity(grid, stride.max(1));
        for (n, s) in snapshots {
            if s.len() != grid.nx + 1 {
                return Err(Error::precondition("snapshot length does not match grid"));
            }
            tr.push(n, &s);
        }
        Ok(tr)
    }

    fn push(&mut self, step: usize, values: &[f64]) {
        self.steps.push(step);
        self.data.extend_from_slice(values);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, i: usize) -> usize {
        self.steps[i]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid.time(self.steps[i])
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|&n| self.grid.time(n)).collect()
    }

    pub fn snapshot(&self, i: usize) -> &[f64] {
        let w = self.grid.nx + 1;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn snapshot_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.grid.nx + 1;
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn last(&self) -> &[f64] {
        self.snapshot(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        (0..self.len()).map(move |i| (self.time(i), self.snapshot(i)))
    }

    /// True when every step `0..=n_steps` is recorded.
    pub fn is_dense(&self) -> bool {
        self.len() == self.grid.n_steps + 1 && self.steps.iter().enumerate().all(|(i, &n)| i == n)
    }

    /// `sup_t sup_x |u|` over the recorded snapshots.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Reflection masses `eta[n][j]` on `[t_n, t_{n+1}) x [x_j - dx/2, x_j + dx/2)`
/// for interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionIncrements {
    pub grid: Grid,
    masses: Vec<f64>,
}

impl ReflectionIncrements {
    fn new(grid: Grid) -> Self {
        ReflectionIncrements {
            grid,
            masses: Vec::with_capacity(grid.n_steps * grid.interior()),
        }
    }

    pub fn n_steps(&self) -> usize {
        self.masses.len() / self.grid.interior()
    }

    /// Masses deposited during step `n`, interior nodes `1..nx`.
    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.grid.interior();
        &self.masses[n * w..(n + 1) * w]
    }

    pub fn all(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `sum x_j (1 - x_j) eta[n][j]`.
    pub fn weighted_mass(&self) -> f64 {
        let w = self.grid.interior();
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let x = self.grid.node(i % w + 1);
                x * (1.0 - x) * m
            })
            .sum()
    }

    /// Mass deposited in each step.
    pub fn per_step_mass(&self) -> Vec<f64> {
        (0..self.n_steps()).map(|n| self.row(n).iter().sum()).collect()
    }
}

/// State passed to run observers after each step.
pub struct StepView<'a> {
    /// Index of the state, `0..=n_steps`.
    pub n: usize,
    pub t: f64,
    pub state: &'a [f64],
    /// Masses deposited by the step into `state` (empty at `n = 0`).
    pub eta: &'a [f64],
}

/// Reusable step machinery for one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    diffusion: BackwardEuler,
    rhs: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: Grid) -> Self {
        Stepper {
            grid,
            diffusion: BackwardEuler::new(grid.interior(), grid.dt / (grid.dx * grid.dx)),
            rhs: vec![0.0; grid.interior()],
        }
    }

    /// One step from `state` (step `n`) into `next`; `terms(j, x, u)` gives
    /// `(drift, volatility)` at interior node `j`. `scheme = None` skips the
    /// constraint (the free equation).
    #[allow(clippy::too_many_arguments)]
    fn advance<T>(
        &mut self,
        n: usize,
        state: &[f64],
        noise: &[f64],
        mut terms: T,
        scheme: Option<Scheme>,
        next: &mut [f64],
        eta: &mut [f64],
    ) -> Result<()>
    where
        T: FnMut(usize, f64, f64) -> (f64, f64),
    {
        let g = self.grid;
        let m = g.interior();
        let inv_dx = 1.0 / g.dx;
        for j in 1..=m {
            let x = g.node(j);
            let u = state[j];
            let (f, s) = terms(j, x, u);
            let v = u + g.dt * f + s * noise[j - 1] * inv_dx;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    step: n,
                    what: format!("right-hand side at x = {x} (u = {u}, dW = {})", noise[j - 1]),
                });
            }
            self.rhs[j - 1] = v;
        }
        self.diffusion.solve_in_place(&mut self.rhs);
        next[0] = 0.0;
        next[g.nx] = 0.0;
        match scheme {
            None => {
                next[1..=m].copy_from_slice(&self.rhs);
                eta.fill(0.0);
            }
            Some(Scheme::Projection) => {
                for j in 0..m {
                    let w = self.rhs[j];
                    if w < 0.0 {
                        next[j + 1] = 0.0;
                        eta[j] = -w * g.dx;
                    } else {
                        next[j + 1] = w;
                        eta[j] = 0.0;
                    }
                }
            }
            Some(Scheme::Penalization { epsilon }) => {
                let damp = 1.0 / (1.0 + g.dt / epsilon);
                for j in 0..m {
                    let w = self.rhs[j];
                    if w < 0.0 {
                        let u = w * damp;
                        next[j + 1] = u;
                        eta[j] = (u - w) * g.dx;
                    } else {
                        next[j + 1] = w;
                        eta[j] = 0.0;
                    }
                }
            }
        }
        Ok(())
    }
}

/// One projection (or penalization) step of `cfg.scheme` from `state` with
/// the given noise slice. Returns the next state and the masses pushed in.
pub fn step(state: &[f64], noise_slice: &[f64], cfg: &SolverConfig) -> Result<(FieldSnapshot, Vec<f64>)> {
    let g = cfg.grid;
    if state.len() != g.nx + 1 || noise_slice.len() != g.interior() {
        return Err(Error::precondition("state or noise slice does not match the grid"));
    }
    if let Some(j) = state.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step: 0,
            what: format!("state at node {j}"),
        });
    }
    if let Some(j) = noise_slice.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step: 0,
            what: format!("noise at node {}", j + 1),
        });
    }
    let mut stepper = Stepper::new(g);
    let mut next = vec![0.0; g.nx + 1];
    let mut eta = vec![0.0; g.interior()];
    let c = &cfg.coefficients;
    stepper.advance(
        0,
        state,
        noise_slice,
        |_, x, u| (c.f(x, u), c.sigma(x, u)),
        Some(cfg.scheme),
        &mut next,
        &mut eta,
    )?;
    Ok((next, eta))
}

fn check_blowup(n: usize, grid: &Grid, state: &[f64]) -> Result<()> {
    let norm = state.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm > BLOWUP_LIMIT || !norm.is_finite() {
        return Err(Error::Unstable {
            step: n,
            time: grid.time(n),
            norm,
            limit: BLOWUP_LIMIT,
        });
    }
    Ok(())
}

/// Runs `cfg` with `noise`, calling `observe` on the initial state and after
/// every step. Nothing is stored.
pub fn run_observed<O>(cfg: &SolverConfig, noise: &NoiseField, mut observe: O) -> Result<()>
where
    O: FnMut(StepView<'_>),
{
    cfg.validate()?;
    if noise.grid != cfg.grid {
        return Err(Error::precondition("noise grid differs from solver grid"));
    }
    let g = cfg.grid;
    let mut stepper = Stepper::new(g);
    let mut state = cfg.initial_data.clone();
    let mut next = vec![0.0; g.nx + 1];
    let mut eta = vec![0.0; g.interior()];
    let mut dw = vec![0.0; g.interior()];
    observe(StepView {
        n: 0,
        t: 0.0,
        state: &state,
        eta: &[],
    });
    let c = &cfg.coefficients;
    for n in 0..g.n_steps {
        noise.slice_into(n, &mut dw);
        stepper.advance(
            n,
            &state,
            &dw,
            |_, x, u| (c.f(x, u), c.sigma(x, u)),
            Some(cfg.scheme),
            &mut next,
            &mut eta,
        )?;
        check_blowup(n + 1, &g, &next)?;
        std::mem::swap(&mut state, &mut next);
        observe(StepView {
            n: n + 1,
            t: g.time(n + 1),
            state: &state,
            eta: &eta,
        });
    }
    Ok(())
}

/// Runs `cfg` against an explicit noise field (for coupled refinements).
pub fn run_with_noise(cfg: &SolverConfig, noise: &NoiseField) -> Result<(Trajectory, ReflectionIncrements)> {
    let g = cfg.grid;
    let stride = cfg.snapshot_stride;
    let mut traj = Trajectory::with_capacity(g, stride.max(1));
    let mut masses = ReflectionIncrements::new(g);
    run_observed(cfg, noise, |v| {
        if v.n % stride == 0 || v.n == g.n_steps {
            traj.push(v.n, v.state);
        }
        masses.masses.extend_from_slice(v.eta);
    })?;
    Ok((traj, masses))
}

/// Integrates `cfg` from its initial data with noise keyed by `cfg.seed`.
pub fn run(cfg: &SolverConfig) -> Result<(Trajectory, ReflectionIncrements)> {
    run_with_noise(cfg, &NoiseField::new(cfg.grid, cfg.seed))
}

/// [`run`] for a configuration using the penalization scheme.
pub fn penalized_run(cfg: &SolverConfig) -> Result<(Trajectory, ReflectionIncrements)> {
    match cfg.scheme {
        Scheme::Penalization { .. } => run(cfg),
        Scheme::Projection => Err(Error::precondition("penalized_run needs the penalization scheme")),
    }
}

/// Lower bound on a penalized solution started from nonnegative data:
/// `u >= -epsilon (C_f + C_sigma max|dW| / (dt dx))`.
///
/// Backward Euler is a nonnegative contraction in the sup norm, so a step
/// lowers the minimum by at most `dt C_f + C_sigma max|dW| / dx`, and the
/// implicit penalty then scales negative values by `epsilon / (epsilon + dt)`.
/// The fixed point of that recursion is the bound.
pub fn penalty_floor(cfg: &SolverConfig, max_abs_dw: f64) -> Result<f64> {
    match cfg.scheme {
        Scheme::Penalization { epsilon } => {
            let g = cfg.grid;
            let c = &cfg.coefficients;
            Ok(-epsilon * (c.c_f + c.c_sigma * max_abs_dw / (g.dt * g.dx)))
        }
        Scheme::Projection => Err(Error::precondition("projection runs have floor 0")),
    }
}

/// Integrates the unconstrained equation from zero data with the drift and
/// volatility of `forcing` evaluated along `source` rather than along the
/// solution itself:
/// `v^{n+1} = (I - dt L_h)^{-1} (v^n + dt F(t_n, x, s^n) + S(t_n, x, s^n) dW / dx)`.
pub fn free_run<F: Forcing>(
    cfg: &SolverConfig,
    forcing: &F,
    source: &Trajectory,
    noise: &NoiseField,
) -> Result<Trajectory> {
    let g = cfg.grid;
    if source.grid != g || noise.grid != g {
        return Err(Error::precondition("source, noise and solver grids differ"));
    }
    if noise.seed != cfg.seed {
        return Err(Error::precondition(format!(
            "noise seed {} differs from run seed {}",
            noise.seed, cfg.seed
        )));
    }
    if !source.is_dense() {
        return Err(Error::precondition("source trajectory must record every step"));
    }
    if cfg.snapshot_stride == 0 {
        return Err(Error::precondition("snapshot stride must be positive"));
    }
    let stride = cfg.snapshot_stride;
    let mut stepper = Stepper::new(g);
    let mut state = vec![0.0; g.nx + 1];
    let mut next = vec![0.0; g.nx + 1];
    let mut eta = vec![0.0; g.interior()];
    let mut dw = vec![0.0; g.interior()];
    let mut out = Trajectory::with_capacity(g, stride);
    out.push(0, &state);
    for n in 0..g.n_steps {
        noise.slice_into(n, &mut dw);
        let t = g.time(n);
        let src = source.snapshot(n);
        stepper.advance(
            n,
            &state,
            &dw,
            |j, x, _| (forcing.drift(t, x, src[j]), forcing.volatility(t, x, src[j])),
            None,
            &mut next,
            &mut eta,
        )?;
        check_blowup(n + 1, &g, &next)?;
        std::mem::swap(&mut state, &mut next);
        if (n + 1) % stride == 0 || n + 1 == g.n_steps {
            out.push(n + 1, &state);
        }
    }
    Ok(out)
}
