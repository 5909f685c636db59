use rshe::analysis::*;
use rshe::ensemble::member_seeds;
use rshe::*;

fn noise_driven() -> Coefficients {
    Coefficients::constant(0.0, 1.0)
}

#[test]
fn sup_moment_is_reproducible() {
    let g = Grid::diffusive(16, 1.0).unwrap();
    let sim = SolverConfig::new(g, noise_driven(), vec![0.0; 17], 3);
    let cfg = MomentConfig {
        p: 2.0,
        alpha: 1.0,
        horizons: vec![0.5, 1.0],
        ensemble_size: 30,
    };
    let a = sup_moment(&cfg, &sim).unwrap();
    let b = sup_moment(&cfg, &sim).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.estimate - y.estimate).abs() <= 1e-12);
        assert!(x.estimate >= 0.0 && x.stderr >= 0.0);
        assert_eq!(x.samples.len(), 30);
    }
}

#[test]
fn damping_never_increases_the_sup() {
    let g = Grid::diffusive(32, 1.0).unwrap();
    let params = DampedParams::new(1.0, 1.0).unwrap();
    for seed in member_seeds(11, 10) {
        let cfg = SolverConfig::new(g, noise_driven(), vec![0.0; 33], seed).with_stride(1);
        let (u, _) = run(&cfg).unwrap();
        let damped = damped_transform(&u, params).unwrap();
        for i in 0..u.len() {
            let raw = u.snapshot(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let d = damped.snapshot(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(d <= raw);
        }
        assert!((damped_sup(&cfg, params).unwrap() - damped.sup_norm()).abs() <= 1e-15);
    }
}

#[test]
fn weak_form_residual_shrinks_under_refinement() {
    let sigma = noise_driven();
    let phi = TestFunction::sine_mode(1);
    let fine = Grid::diffusive(64, 0.125).unwrap();
    for seed in 0..3 {
        let residual = |nx: usize| {
            let g = Grid::diffusive(nx, 0.125).unwrap();
            let noise = NoiseField::coupled(g, seed, fine).unwrap();
            let cfg = SolverConfig::new(g, sigma.clone(), vec![0.0; nx + 1], seed).with_stride(1);
            let (u, eta) = run_with_noise(&cfg, &noise).unwrap();
            weak_form_residual(&u, &eta, &noise, &sigma, &phi, 0.125).unwrap()
        };
        let (coarse, finer) = (residual(32), residual(64));
        assert!(coarse / finer >= 1.8, "seed {seed}: {coarse} vs {finer}");
    }
}

#[test]
fn convolution_routes_agree_at_a_point() {
    let g = Grid::diffusive(16, 0.25).unwrap();
    let params = DampedParams::new(1.0, 0.25).unwrap();
    let weights = ConvolutionWeights::new(g, params, 0.25, 0.5, &KernelConfig::default()).unwrap();
    let modal = ModalConvolution::new(g, params, default_modes(&g, 1e-12)).unwrap();
    for seed in 0..4 {
        let noise = NoiseField::new(g, seed);
        let direct = weights.apply(&noise, &1.0).unwrap();
        let field = modal.field(&noise, &1.0, g.n_steps, g.n_steps, 8).unwrap();
        let last = field.times.len() - 1;
        let mid = field.nodes.iter().position(|x| (x - 0.5).abs() < 1e-12).unwrap();
        assert!((direct - field.get(last, mid)).abs() <= 1e-10);
        assert_eq!(field.get(last, 0), 0.0);
    }
}

#[test]
fn zero_forcing_has_zero_moments() {
    let g = Grid::diffusive(16, 1.0).unwrap();
    let sim = SolverConfig::new(g, Coefficients::constant(0.0, 0.0), vec![0.0; 17], 0);
    let cfg = MomentConfig {
        p: 2.0,
        alpha: 1.0,
        horizons: vec![1.0, 2.0],
        ensemble_size: 30,
    };
    for m in sup_moment(&cfg, &sim).unwrap() {
        assert_eq!(m.estimate, 0.0);
    }
}
