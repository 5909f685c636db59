//! The damped stochastic convolution
//! `I(t,x) = int_0^t int_0^1 e^{-alpha(T-s)} G(t-s,x,y) sigma(y,u(s,y)) W(ds,dy)`.
//!
//! Cell `(n, j)` contributes `e^{-alpha(T-s_n)} G(t - s_n - dt/2, x, x_j) sigma dW_{n,j}`:
//! the kernel is taken at the midpoint lag, so the newest cell uses
//! `G(dt/2, ...)` instead of the singular `G(0, ...)`.
//!
//! Two evaluators: [`stochastic_convolution`] sums kernel values directly
//! at chosen points, [`ModalConvolution`] propagates sine-mode amplitudes
//! and yields the whole field on a lattice.

use std::f64::consts::PI;

use super::{DampedParams, HolderEstimate};
use crate::error::{Error, Result};
use crate::kernel::{self, KernelConfig};
use crate::noise::{steps_for, Grid, NoiseField};
use crate::solver::{Coefficients, Trajectory};

/// Volatility value `sigma(x_j, u^n_j)` for step `n`, interior node `j`.
pub trait VolatilityPath: Sync {
    fn at(&self, n: usize, j: usize) -> f64;
}

/// Constant volatility.
impl VolatilityPath for f64 {
    #[inline]
    fn at(&self, _n: usize, _j: usize) -> f64 {
        *self
    }
}

/// Volatility evaluated along a recorded solution.
#[derive(Debug, Clone, Copy)]
pub struct AlongTrajectory<'a> {
    traj: &'a Trajectory,
    coeffs: &'a Coefficients,
}

impl<'a> AlongTrajectory<'a> {
    pub fn new(traj: &'a Trajectory, coeffs: &'a Coefficients) -> Result<Self> {
        if !traj.is_dense() {
            return Err(Error::precondition("volatility path needs every step recorded"));
        }
        Ok(AlongTrajectory { traj, coeffs })
    }
}

impl VolatilityPath for AlongTrajectory<'_> {
    #[inline]
    fn at(&self, n: usize, j: usize) -> f64 {
        let g = &self.traj.grid;
        self.coeffs.sigma(g.node(j), self.traj.snapshot(n)[j])
    }
}

/// Convolution values on a `times x nodes` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionField {
    pub times: Vec<f64>,
    pub nodes: Vec<f64>,
    values: Vec<f64>,
}

impl ConvolutionField {
    pub fn get(&self, i_time: usize, i_node: usize) -> f64 {
        self.values[i_time * self.nodes.len() + i_node]
    }

    pub fn row(&self, i_time: usize) -> &[f64] {
        let w = self.nodes.len();
        &self.values[i_time * w..(i_time + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `e^{-alpha(T-s_n)} sigma dW_{n,j}` for `n < steps`, flattened `[n][j-1]`.
fn weighted_increments<V: VolatilityPath>(noise: &NoiseField, vol: &V, params: DampedParams, steps: usize) -> Vec<f64> {
    let g = noise.grid;
    let m = g.interior();
    let mut out = vec![0.0; steps * m];
    for n in 0..steps {
        let row = &mut out[n * m..(n + 1) * m];
        noise.slice_into(n, row);
        let d = params.factor(g.time(n));
        for (j, v) in row.iter_mut().enumerate() {
            *v *= d * vol.at(n, j + 1);
        }
    }
    out
}

fn check_horizon(params: DampedParams, grid: &Grid, step: usize) -> Result<()> {
    if step > grid.n_steps {
        return Err(Error::precondition(format!(
            "evaluation time {} exceeds the noise horizon {}",
            grid.time(step),
            grid.t_horizon()
        )));
    }
    if grid.time(step) > params.t_ref * (1.0 + 1e-12) {
        return Err(Error::precondition("evaluation time exceeds the damping horizon T"));
    }
    Ok(())
}

/// Pointwise convolution with volatility taken along `traj`.
pub fn stochastic_convolution(
    noise: &NoiseField,
    traj: &Trajectory,
    coeffs: &Coefficients,
    params: DampedParams,
    eval_times: &[f64],
    eval_nodes: &[f64],
    kcfg: &KernelConfig,
) -> Result<ConvolutionField> {
    if traj.grid != noise.grid {
        return Err(Error::precondition("trajectory and noise grids differ"));
    }
    let vol = AlongTrajectory::new(traj, coeffs)?;
    stochastic_convolution_with(noise, &vol, params, eval_times, eval_nodes, kcfg)
}

/// Pointwise convolution for any volatility path. Kernel rows
/// `G((l + 1/2) dt, x, x_j)` are computed once per node and shared by all
/// evaluation times.
pub fn stochastic_convolution_with<V: VolatilityPath>(
    noise: &NoiseField,
    vol: &V,
    params: DampedParams,
    eval_times: &[f64],
    eval_nodes: &[f64],
    kcfg: &KernelConfig,
) -> Result<ConvolutionField> {
    let g = noise.grid;
    let steps: Vec<usize> = eval_times.iter().map(|&t| steps_for(t, g.dt)).collect::<Result<_>>()?;
    let max_step = steps.iter().copied().max().unwrap_or(0);
    check_horizon(params, &g, max_step)?;
    let m = g.interior();
    let q = weighted_increments(noise, vol, params, max_step);
    let mut values = vec![0.0; eval_times.len() * eval_nodes.len()];
    let mut rows = vec![0.0; max_step * m];
    for (ix, &x) in eval_nodes.iter().enumerate() {
        for l in 0..max_step {
            let lag = (l as f64 + 0.5) * g.dt;
            for j in 1..g.nx {
                rows[l * m + j - 1] = kernel::eval(lag, x, g.node(j), kcfg)?;
            }
        }
        for (it, &s) in steps.iter().enumerate() {
            let mut acc = 0.0;
            for n in 0..s {
                let l = s - 1 - n;
                let k = &rows[l * m..(l + 1) * m];
                let w = &q[n * m..(n + 1) * m];
                acc += k.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            }
            values[it * eval_nodes.len() + ix] = acc;
        }
    }
    Ok(ConvolutionField {
        times: steps.iter().map(|&s| g.time(s)).collect(),
        nodes: eval_nodes.to_vec(),
        values,
    })
}

/// Kernel weights for a single evaluation point, reusable across noise
/// realizations on the same grid.
#[derive(Debug, Clone)]
pub struct ConvolutionWeights {
    pub grid: Grid,
    pub t: f64,
    pub x: f64,
    params: DampedParams,
    steps: usize,
    weights: Vec<f64>,
}

impl ConvolutionWeights {
    pub fn new(grid: Grid, params: DampedParams, t: f64, x: f64, kcfg: &KernelConfig) -> Result<Self> {
        let steps = steps_for(t, grid.dt)?;
        check_horizon(params, &grid, steps)?;
        let m = grid.interior();
        let mut weights = vec![0.0; steps * m];
        for n in 0..steps {
            let lag = (steps - n) as f64 * grid.dt - 0.5 * grid.dt;
            for j in 1..grid.nx {
                weights[n * m + j - 1] = kernel::eval(lag, x, grid.node(j), kcfg)?;
            }
        }
        Ok(ConvolutionWeights {
            grid,
            t: grid.time(steps),
            x,
            params,
            steps,
            weights,
        })
    }

    pub fn apply<V: VolatilityPath>(&self, noise: &NoiseField, vol: &V) -> Result<f64> {
        if noise.grid.nx != self.grid.nx || noise.grid.dt != self.grid.dt || noise.grid.n_steps < self.steps {
            return Err(Error::precondition("noise grid does not cover the evaluation point"));
        }
        let q = weighted_increments(noise, vol, self.params, self.steps);
        Ok(q.iter().zip(&self.weights).map(|(a, b)| a * b).sum())
    }
}

/// Number of sine modes for which the dropped kernel modes at lag `dt/2`
/// fall below `tol`: `exp(-K^2 pi^2 dt / 2) <= tol`.
pub fn default_modes(grid: &Grid, tol: f64) -> usize {
    let k = (2.0 * (1.0 / tol).ln() / (PI * PI * grid.dt)).sqrt();
    k.ceil() as usize + 1
}

/// Field evaluator by the recursion
/// `a_k(t_{m+1}) = e^{-k^2 pi^2 dt} a_k(t_m) + 2 e^{-alpha(T-s_m)} e^{-k^2 pi^2 dt/2} sum_j sin(k pi x_j) sigma dW_{m,j}`,
/// `I(t_m, x) = sum_k a_k(t_m) sin(k pi x)`.
#[derive(Debug, Clone)]
pub struct ModalConvolution {
    pub grid: Grid,
    pub params: DampedParams,
    pub modes: usize,
}

impl ModalConvolution {
    pub fn new(grid: Grid, params: DampedParams, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::domain("need at least one mode"));
        }
        Ok(ModalConvolution { grid, params, modes })
    }

    /// Field at steps `0, record_every, ...` up to `steps` and at nodes
    /// `0, node_every, ..., nx`.
    pub fn field<V: VolatilityPath>(
        &self,
        noise: &NoiseField,
        vol: &V,
        steps: usize,
        record_every: usize,
        node_every: usize,
    ) -> Result<ConvolutionField> {
        let g = self.grid;
        if noise.grid != g {
            return Err(Error::precondition("noise grid differs from the evaluator grid"));
        }
        if record_every == 0 || node_every == 0 || !g.nx.is_multiple_of(node_every) {
            return Err(Error::precondition(
                "node stride must divide nx and strides must be positive",
            ));
        }
        check_horizon(self.params, &g, steps)?;
        let k_max = self.modes;
        let m = g.interior();
        let mut basis = vec![0.0; k_max * m];
        for k in 0..k_max {
            let w = (k + 1) as f64 * PI;
            for j in 0..m {
                basis[k * m + j] = (w * g.node(j + 1)).sin();
            }
        }
        let out_nodes: Vec<usize> = (0..=g.nx).step_by(node_every).collect();
        let mut out_basis = vec![0.0; k_max * out_nodes.len()];
        for k in 0..k_max {
            let w = (k + 1) as f64 * PI;
            for (i, &j) in out_nodes.iter().enumerate() {
                out_basis[k * out_nodes.len() + i] = if j == 0 || j == g.nx {
                    0.0
                } else {
                    (w * g.node(j)).sin()
                };
            }
        }
        let decay: Vec<f64> = (1..=k_max)
            .map(|k| (-((k * k) as f64) * PI * PI * g.dt).exp())
            .collect();
        let half: Vec<f64> = (1..=k_max)
            .map(|k| 2.0 * (-((k * k) as f64) * PI * PI * g.dt * 0.5).exp())
            .collect();
        let mut amp = vec![0.0; k_max];
        let mut q = vec![0.0; m];
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut record = |n: usize, amp: &[f64]| {
            times.push(g.time(n));
            for i in 0..out_nodes.len() {
                let mut v = 0.0;
                for k in 0..k_max {
                    v += amp[k] * out_basis[k * out_nodes.len() + i];
                }
                values.push(v);
            }
        };
        record(0, &amp);
        for n in 0..steps {
            noise.slice_into(n, &mut q);
            let d = self.params.factor(g.time(n));
            for (j, v) in q.iter_mut().enumerate() {
                *v *= d * vol.at(n, j + 1);
            }
            for k in 0..k_max {
                let b: f64 = basis[k * m..(k + 1) * m].iter().zip(&q).map(|(s, v)| s * v).sum();
                amp[k] = decay[k] * amp[k] + half[k] * b;
            }
            if (n + 1) % record_every == 0 {
                record(n + 1, &amp);
            }
        }
        Ok(ConvolutionField {
            times,
            nodes: out_nodes.iter().map(|&j| g.node(j)).collect(),
            values,
        })
    }
}

/// `max |I(t,x) - I(s,y)| / (|t-s|^{gamma/4} + |x-y|^{gamma/2})` over all
/// distinct lattice points of `field`.
pub fn holder_constant(field: &ConvolutionField, gamma: f64) -> Result<HolderEstimate> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let (te, xe) = (gamma / 4.0, gamma / 2.0);
    let nt = field.times.len();
    let nn = field.nodes.len();
    let tp: Vec<f64> = (0..nt * nt)
        .map(|i| (field.times[i / nt] - field.times[i % nt]).abs().powf(te))
        .collect();
    let xp: Vec<f64> = (0..nn * nn)
        .map(|i| (field.nodes[i / nn] - field.nodes[i % nn]).abs().powf(xe))
        .collect();
    let mut best = 0.0f64;
    let mut count = 0usize;
    for a in 0..nt {
        let ra = field.row(a);
        for b in a..nt {
            let rb = field.row(b);
            let dt = tp[a * nt + b];
            for i in 0..nn {
                let start = if a == b { i + 1 } else { 0 };
                let xrow = &xp[i * nn..(i + 1) * nn];
                for k in start..nn {
                    let q = (ra[i] - rb[k]).abs() / (dt + xrow[k]);
                    best = best.max(q);
                }
                count += nn - start;
            }
        }
    }
    Ok(HolderEstimate {
        time_exponent: te,
        space_exponent: xe,
        constant: best,
        sample_count: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{run, InitialProfile, SolverConfig};

    #[test]
    fn vanishes_at_the_boundary_and_without_noise() {
        let g = Grid::diffusive(16, 0.25).unwrap();
        let noise = NoiseField::new(g, 3);
        let p = DampedParams::new(1.0, 0.25).unwrap();
        let k = KernelConfig::default();
        let f = stochastic_convolution_with(&noise, &1.0, p, &[0.125, 0.25], &[0.0, 0.5, 1.0], &k).unwrap();
        assert_eq!(f.get(0, 0), 0.0);
        assert_eq!(f.get(1, 0), 0.0);
        assert!(f.get(1, 1) != 0.0);
        let z = stochastic_convolution_with(&noise, &0.0, p, &[0.25], &[0.5], &k).unwrap();
        assert_eq!(z.get(0, 0), 0.0);
    }

    #[test]
    fn modal_and_pointwise_routes_agree() {
        let g = Grid::diffusive(16, 0.5).unwrap();
        let noise = NoiseField::new(g, 8);
        let p = DampedParams::new(1.0, 0.5).unwrap();
        let k = KernelConfig::default();
        let modal = ModalConvolution::new(g, p, default_modes(&g, 1e-14)).unwrap();
        let field = modal.field(&noise, &0.7, g.n_steps, 32, 4).unwrap();
        let times: Vec<f64> = field.times.clone();
        let direct = stochastic_convolution_with(&noise, &0.7, p, &times, &field.nodes, &k).unwrap();
        for (a, b) in field.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn weights_match_direct_sum() {
        let g = Grid::diffusive(16, 0.25).unwrap();
        let cfg =
            SolverConfig::new(g, Coefficients::constant(0.0, 1.0), InitialProfile::Sine.sample(&g), 2).with_stride(1);
        let (traj, _) = run(&cfg).unwrap();
        let noise = NoiseField::new(g, 2);
        let p = DampedParams::new(0.5, 0.25).unwrap();
        let k = KernelConfig::default();
        let w = ConvolutionWeights::new(g, p, 0.25, 0.375, &k).unwrap();
        let vol = AlongTrajectory::new(&traj, &cfg.coefficients).unwrap();
        let a = w.apply(&noise, &vol).unwrap();
        let b = stochastic_convolution(&noise, &traj, &cfg.coefficients, p, &[0.25], &[0.375], &k).unwrap();
        assert!((a - b.get(0, 0)).abs() < 1e-14);
    }

    #[test]
    fn holder_constant_of_linear_field() {
        let field = ConvolutionField {
            times: vec![0.0, 1.0],
            nodes: vec![0.0, 0.5, 1.0],
            values: vec![0.0, 0.5, 1.0, 0.0, 0.5, 1.0],
        };
        let h = holder_constant(&field, 0.5).unwrap();
        // Pair (x=0, x=1) at equal times: 1 / 1.
        assert!((h.constant - 1.0).abs() < 1e-15);
        assert_eq!(h.sample_count, 15);
    }
}
