use proptest::prelude::*;
use rshe::analysis::{damped_transform, holder_quotient, undamped_transform, DampedParams};
use rshe::invariant::{chi3_cdf, kolmogorov_cdf, kolmogorov_quantile, ks_distance};
use rshe::kernel;
use rshe::*;

fn profile(nx: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..3.0f64, nx - 1).prop_map(|inner| {
        let mut v = vec![0.0];
        v.extend(inner);
        v.push(0.0);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric_and_nonnegative(t in 1e-4..10.0f64, x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let cfg = KernelConfig::default();
        let a = kernel::eval(t, x, y, &cfg).unwrap();
        let b = kernel::eval(t, y, x, &cfg).unwrap();
        prop_assert!((a - b).abs() <= 2.0 * cfg.tail_tolerance);
        prop_assert!(a >= -cfg.tail_tolerance);
    }

    #[test]
    fn projected_step_is_complementary(
        state in profile(16),
        dw in prop::collection::vec(-0.05..0.05f64, 15),
        drift in -5.0..5.0f64,
    ) {
        let g = Grid::diffusive(16, 1.0).unwrap();
        let cfg = SolverConfig::new(g, Coefficients::constant(drift, 1.0), state.clone(), 0);
        let (next, eta) = step(&state, &dw, &cfg).unwrap();
        prop_assert_eq!(next[0], 0.0);
        prop_assert_eq!(next[16], 0.0);
        prop_assert!(next.iter().all(|v| *v >= 0.0));
        prop_assert!(eta.iter().all(|m| *m >= 0.0));
        let contact: f64 = next[1..16].iter().zip(&eta).map(|(u, m)| u * m).sum();
        prop_assert_eq!(contact, 0.0);
    }

    #[test]
    fn damping_is_invertible(values in prop::collection::vec(profile(8), 5), alpha in 0.01..5.0f64) {
        let g = Grid::new(8, 0.25, 4).unwrap();
        let snaps = values.into_iter().enumerate().collect();
        let traj = Trajectory::from_snapshots(g, 1, snaps).unwrap();
        let params = DampedParams::new(alpha, 1.0).unwrap();
        let back = undamped_transform(&damped_transform(&traj, params).unwrap(), params).unwrap();
        for i in 0..traj.len() {
            for (a, b) in traj.snapshot(i).iter().zip(back.snapshot(i)) {
                prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn holder_quotient_orders_by_exponent(
        u in prop::collection::vec(-2.0..2.0f64, 17),
        g1 in 0.05..0.5f64,
        frac in 0.0..1.0f64,
    ) {
        let g2 = g1 * frac.max(0.01);
        let q1 = holder_quotient(&u, g1).unwrap();
        let q2 = holder_quotient(&u, g2).unwrap();
        let dx: f64 = 1.0 / 16.0;
        prop_assert!(q2 <= q1 * (1.0 + 1e-12));
        prop_assert!(q2 >= q1 * (2.0 * dx).powf(g1 - g2) * (1.0 - 1e-12));
    }

    #[test]
    fn holder_quotient_ignores_shifts(u in prop::collection::vec(-2.0..2.0f64, 17), c in -10.0..10.0f64) {
        let shifted: Vec<f64> = u.iter().map(|v| v + c).collect();
        let a = holder_quotient(&u, 0.25).unwrap();
        let b = holder_quotient(&shifted, 0.25).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0) * (1.0 + c.abs()));
    }

    #[test]
    fn chi3_cdf_is_monotone(a in 0.0..8.0f64, b in 0.0..8.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(chi3_cdf(lo) <= chi3_cdf(hi));
        prop_assert!((0.0..=1.0).contains(&chi3_cdf(hi)));
    }

    #[test]
    fn ks_distance_is_a_probability(samples in prop::collection::vec(0.0..5.0f64, 1..200)) {
        let d = ks_distance(&samples, chi3_cdf).unwrap();
        prop_assert!(d > 0.0 && d <= 1.0);
        prop_assert!(d >= 0.5 / samples.len() as f64);
    }

    #[test]
    fn kolmogorov_quantile_inverts_the_cdf(level in 0.05..0.999f64) {
        let q = kolmogorov_quantile(level).unwrap();
        prop_assert!((kolmogorov_cdf(q) - level).abs() <= 1e-9);
    }
}
