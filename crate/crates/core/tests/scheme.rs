use rshe::ensemble::{mean_stderr, member_seeds, par_map_seeds};
use rshe::solver::penalty_floor;
use rshe::*;

fn noise_driven() -> Coefficients {
    Coefficients::constant(0.0, 1.0)
}

fn mean_step_mass(nx: usize, dt: f64, seeds: &[u64]) -> f64 {
    let g = Grid::with_horizon(nx, dt, 0.5).unwrap();
    let per = par_map_seeds(seeds, |s| {
        let cfg = SolverConfig::new(g, noise_driven(), vec![0.0; nx + 1], s);
        let (_, eta) = run(&cfg)?;
        let m = eta.per_step_mass();
        Ok(m.iter().sum::<f64>() / m.len() as f64)
    })
    .unwrap();
    mean_stderr(&per).0
}

#[test]
fn step_mass_halves_with_dt() {
    let nx = 32;
    let dx = 1.0 / nx as f64;
    let seeds = member_seeds(0, 40);
    let coarse = mean_step_mass(nx, dx * dx / 4.0, &seeds);
    let fine = mean_step_mass(nx, dx * dx / 8.0, &seeds);
    let ratio = fine / coarse;
    assert!((ratio - 0.5).abs() <= 0.1, "per-step mass ratio {ratio}");
}

#[test]
fn obstacle_problem_converges_at_first_order() {
    let t = 0.0625;
    let coeffs = Coefficients::new(|_, u| -8.0 + u.min(2.0), |_, _| 0.0, 8.0, 1.0).unwrap();
    let solve = |nx: usize| {
        let g = Grid::diffusive(nx, t).unwrap();
        let cfg = SolverConfig::new(g, coeffs.clone(), InitialProfile::Sine.sample(&g), 0);
        run(&cfg).unwrap().0.last().to_vec()
    };
    let reference = solve(512);
    let errors: Vec<f64> = [16usize, 32, 64]
        .iter()
        .map(|&nx| {
            let u = solve(nx);
            assert!(u[1..nx].contains(&0.0), "contact set is empty at nx = {nx}");
            let r = 512 / nx;
            (0..=nx).map(|j| (u[j] - reference[j * r]).abs()).fold(0.0, f64::max)
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.0, "observed order {order} from errors {errors:?}");
    }
}

#[test]
fn penalization_approaches_projection() {
    let g = Grid::diffusive(32, 1.0).unwrap();
    for seed in 0..3 {
        let cfg = SolverConfig::new(g, noise_driven(), vec![0.0; 33], seed);
        let (proj, _) = run(&cfg).unwrap();
        let dist: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&epsilon| {
                let pen = cfg.clone().with_scheme(Scheme::Penalization { epsilon });
                let (u, _) = penalized_run(&pen).unwrap();
                proj.last()
                    .iter()
                    .zip(u.last())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(dist.windows(2).all(|w| w[1] < w[0]), "seed {seed}: {dist:?}");
    }
}

#[test]
fn penalized_runs_respect_the_floor() {
    let g = Grid::diffusive(32, 1.0).unwrap();
    for epsilon in [1e-2, 1e-3, 1e-4] {
        for seed in 0..3 {
            let cfg =
                SolverConfig::new(g, noise_driven(), vec![0.0; 33], seed).with_scheme(Scheme::Penalization { epsilon });
            let (u, eta) = penalized_run(&cfg).unwrap();
            let noise = NoiseField::new(g, seed);
            let max_dw = (0..g.n_steps)
                .flat_map(|n| noise.slice(n))
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let floor = penalty_floor(&cfg, max_dw).unwrap();
            assert!(u.min_value() >= floor, "min {} below floor {floor}", u.min_value());
            assert!(u.min_value() < 0.0);
            assert!(eta.all().iter().all(|m| *m >= 0.0));
        }
    }
}

#[test]
fn projection_keeps_the_structure_exactly() {
    let g = Grid::diffusive(32, 0.5).unwrap();
    for seed in member_seeds(7, 8) {
        let cfg = SolverConfig::new(g, noise_driven(), vec![0.0; 33], seed).with_stride(1);
        let (u, eta) = run(&cfg).unwrap();
        assert!(u.min_value() >= 0.0);
        assert!(eta.all().iter().all(|m| *m >= 0.0));
        for n in 0..g.n_steps {
            let s = u.snapshot(n + 1);
            assert_eq!(s[0], 0.0);
            assert_eq!(s[32], 0.0);
            let contact: f64 = s[1..32].iter().zip(eta.row(n)).map(|(a, b)| a * b).sum();
            assert_eq!(contact, 0.0);
        }
    }
}

#[test]
fn identical_seeds_reproduce_bitwise() {
    let g = Grid::diffusive(16, 0.25).unwrap();
    let cfg = SolverConfig::new(g, noise_driven(), InitialProfile::Parabola.sample(&g), 99);
    let (a, ea) = run(&cfg).unwrap();
    let (b, eb) = run(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ea.all(), eb.all());
    let (c, _) = run(&cfg.clone().with_seed(100)).unwrap();
    assert_ne!(a, c);
}
