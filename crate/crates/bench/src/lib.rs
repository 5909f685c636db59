//! Fixtures shared by the throughput benches.

use rshe::{Coefficients, Grid, InitialProfile, SolverConfig};

/// Reflected run with unit noise on the diffusive grid `dt = dx^2`.
pub fn reflected(nx: usize, t_horizon: f64, seed: u64) -> SolverConfig {
    let grid = Grid::diffusive(nx, t_horizon).expect("valid grid");
    let u0 = InitialProfile::Parabola.sample(&grid);
    SolverConfig::new(grid, Coefficients::constant(0.0, 1.0), u0, seed)
}

/// Interior space-time evaluation points for kernel benches.
pub fn kernel_points(n: usize) -> Vec<(f64, f64, f64)> {
    (0..n)
        .map(|i| {
            let s = (i as f64 + 0.5) / n as f64;
            (1e-3 + 0.5 * s * s, s, 1.0 - 0.7 * s)
        })
        .collect()
}
