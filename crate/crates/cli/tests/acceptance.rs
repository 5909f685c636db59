//! Full-size acceptance checks, each printing a PASS/FAIL line.
//! Parameters are given as command lines and resolved by the CLI parser.

use std::f64::consts::PI;
use std::io::Write;

use rshe::ensemble::mean_stderr;
use rshe::kernel::EstimateKind;
use rshe_cli::config::{Params, ReferenceLaw};
use rshe_cli::reports::{self, KsRow, WEAK_FORM_RELATIVE_TOLERANCE};
use rshe_cli::{parse, Parse};

fn params(cmd: &str) -> Params {
    let argv: Vec<String> = std::iter::once("rshe")
        .chain(cmd.split_whitespace())
        .map(String::from)
        .collect();
    match parse(&argv).unwrap() {
        Parse::Run(c) => c.params,
        Parse::Display(_) => panic!("{cmd} did not resolve to a run"),
    }
}

/// Written past the test harness capture so every line shows up.
fn line(text: String) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
    let _ = out.flush();
}

fn verdict(n: u32, pass: bool, detail: String) {
    line(format!(
        "check {n:>2}: {} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    ));
}

fn info(n: u32, detail: String) {
    line(format!("check {n:>2}: INFO | {detail}"));
}

#[test]
fn kernel_integral_bound() {
    let Params::VerifyKernel(p) = params("verify-kernel --t-max 10") else {
        unreachable!()
    };
    let r = reports::verify_kernel(&p).unwrap();
    // Stationary profile of phi'' = -1 with zero boundary values.
    let oracle = (0..=2000)
        .map(|i| {
            let x = i as f64 / 2000.0;
            x * (1.0 - x) / 2.0
        })
        .fold(0.0, f64::max);
    let sup = r.integral.sup_value;
    let pass = (sup - oracle).abs() <= 1e-4 && r.integral.bound_check && sup <= 1.0 / 3.0;
    verdict(
        1,
        pass,
        format!(
            "sup = {sup:.10} (target {oracle}), bound_ok = {}",
            r.integral.bound_check
        ),
    );
    assert!(pass);
}

#[test]
fn kernel_identities() {
    let Params::VerifyKernel(p) = params("verify-kernel") else {
        unreachable!()
    };
    let id = rshe::kernel::check_identities(&p.kernel).unwrap();
    let tol = p.kernel.tail_tolerance;
    let pass = id.symmetry <= 2.0 * tol
        && id.boundary <= tol
        && id.chapman_kolmogorov <= 1e-6
        && id.cross_representation <= 2e-12
        && id.min_value >= -tol
        && id.mass_excess <= 1e-9;
    verdict(
        2,
        pass,
        format!(
            "symmetry {:.2e}, boundary {:.2e}, semigroup {:.2e}, cross {:.2e}, min {:.2e}, mass excess {:.2e}",
            id.symmetry, id.boundary, id.chapman_kolmogorov, id.cross_representation, id.min_value, id.mass_excess
        ),
    );
    assert!(pass);
}

#[test]
fn kernel_increment_exponents() {
    let Params::VerifyKernel(p) = params("verify-kernel --p 8") else {
        unreachable!()
    };
    let r = reports::verify_kernel(&p).unwrap();
    let slope = |k: EstimateKind| r.fits.iter().find(|(kind, _)| *kind == k).unwrap().1.slope;
    let (time, two, space) = (
        slope(EstimateKind::TimeIncrement),
        slope(EstimateKind::TwoTime),
        slope(EstimateKind::SpaceIncrement),
    );
    let pass = time >= 0.9 && two >= 0.9 && space >= 1.8;
    verdict(
        3,
        pass,
        format!("slopes: time {time:.4}, two-time {two:.4} (>= 0.9), space {space:.4} (>= 1.8)"),
    );
    assert!(pass);
}

#[test]
fn heat_decay_oracle() {
    let Params::Simulate(p) = params("simulate --sigma 0 --f 0 --u0 sine --nx 64 --t-horizon 0.5") else {
        unreachable!()
    };
    let r = reports::simulate(&p).unwrap();
    let traj = &r.trajectory;
    let g = traj.grid;
    let mut err = 0.0f64;
    for (t, snap) in traj.iter() {
        for (j, u) in snap.iter().enumerate() {
            err = err.max((u - (-PI * PI * t).exp() * (PI * g.node(j)).sin()).abs());
        }
    }
    let mass = r.reflection.total_mass();
    let pass = err <= 5e-3 && mass == 0.0;
    verdict(
        4,
        pass,
        format!("max error {err:.3e} over all snapshots (<= 5e-3), eta mass {mass}"),
    );
    assert!(pass);
}

#[test]
fn obstacle_oracle() {
    let Params::Simulate(p) = params("simulate --sigma 0 --f -1 --u0 zero --nx 64 --t-horizon 0.25") else {
        unreachable!()
    };
    let r = reports::simulate(&p).unwrap();
    let g = r.trajectory.grid;
    let zero = r.trajectory.iter().all(|(_, s)| s.iter().all(|u| *u == 0.0));
    // Implicit solve of (1 + 2q) w_j - q (w_{j-1} + w_{j+1}) = -dt, q = dt/dx^2,
    // w_0 = w_nx = 0: w_j = -dt + a (rho^j + rho^(nx-j)).
    let q = g.dt / (g.dx * g.dx);
    let rho = ((1.0 + 2.0 * q) - ((1.0 + 2.0 * q).powi(2) - 4.0 * q * q).sqrt()) / (2.0 * q);
    let nx = g.nx as i32;
    let a = g.dt / (1.0 + rho.powi(nx));
    let (mut bulk_dev, mut layer_dev, mut bulk_cells) = (0.0f64, 0.0f64, 0usize);
    for n in 0..g.n_steps {
        for (i, m) in r.reflection.row(n).iter().enumerate() {
            let j = i as i32 + 1;
            let layer = a * (rho.powi(j) + rho.powi(nx - j)) * g.dx;
            layer_dev = layer_dev.max((m - (g.dt * g.dx - layer)).abs());
            if layer < 1e-13 {
                bulk_dev = bulk_dev.max((m - g.dt * g.dx).abs());
                if n == 0 {
                    bulk_cells += 1;
                }
            }
        }
    }
    let pass = zero && bulk_dev <= 1e-12 && layer_dev <= 1e-15 && bulk_cells > 0;
    verdict(
        5,
        pass,
        format!(
            "u == 0: {zero}; |eta - dt dx| = {bulk_dev:.2e} on {bulk_cells} cells outside the boundary layer; \
             layer cells match the discrete solution to {layer_dev:.2e}"
        ),
    );
    assert!(pass);
}

#[test]
fn structural_invariants() {
    let Params::Simulate(p) = params("simulate --sigma 1 --f 0 --nx 64 --t-horizon 1 --ensemble 200 --seed 6") else {
        unreachable!()
    };
    let r = reports::simulate(&p).unwrap();
    let bad: Vec<u64> = r
        .structure
        .iter()
        .filter(|s| !(s.min_u >= 0.0 && s.min_eta >= 0.0 && s.complementarity == 0.0 && s.boundary == 0.0))
        .map(|s| s.seed)
        .collect();
    let pass = r.structure.len() == 200 && bad.is_empty();
    verdict(
        6,
        pass,
        format!("{} runs checked, {} violating", r.structure.len(), bad.len()),
    );
    assert!(pass);
}

#[test]
fn weak_form_residual() {
    let Params::VerifyWeakform(p) = params("verify-weakform --nx 64 --t-horizon 0.25 --ensemble 5 --seed 7") else {
        unreachable!()
    };
    let rows = reports::verify_weakform(&p).unwrap();
    let base: Vec<_> = rows.iter().filter(|r| r.nx == 64).collect();
    let within = base
        .iter()
        .all(|r| r.residual <= WEAK_FORM_RELATIVE_TOLERANCE * r.scale);
    let worst = base.iter().map(|r| r.residual / r.scale).fold(0.0, f64::max);
    let mut ratios = Vec::new();
    for name in ["sin(pi x)", "exp(-s) sin(2 pi x)"] {
        let mean = |nx: usize| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.nx == nx && r.test_function == name)
                .map(|r| r.residual)
                .collect();
            mean_stderr(&v).0
        };
        ratios.push(mean(64) / mean(128));
    }
    let pass = within && ratios.iter().all(|r| *r >= 1.8);
    verdict(
        7,
        pass,
        format!(
            "worst residual/scale at nx=64 {worst:.2e} (<= {WEAK_FORM_RELATIVE_TOLERANCE:e}); \
             refinement ratios {:.2}, {:.2} (>= 1.8)",
            ratios[0], ratios[1]
        ),
    );
    assert!(pass);
}

#[test]
fn moment_plateau() {
    let Params::VerifyMoments(p) =
        params("verify-moments --p 2 --alpha 1 --ensemble 200 --horizons 1,2,4,8 --nx 64 --seed 8")
    else {
        unreachable!()
    };
    let est = rshe::analysis::sup_moment(&p.moments, &p.sim.solver().unwrap()).unwrap();
    let bars: Vec<String> = est
        .iter()
        .map(|e| format!("T={}: {:.4} +- {:.4}", e.t_horizon, e.estimate, 4.0 * e.stderr))
        .collect();
    let ratio = est.last().unwrap().estimate / est[0].estimate;
    let pass = est.iter().all(|e| e.estimate.is_finite() && e.estimate >= 0.0) && ratio <= 1.5;
    verdict(
        8,
        pass,
        format!("ratio {ratio:.3} (<= 1.5); 4-sigma bars: {}", bars.join(", ")),
    );
    assert!(pass);
}

#[test]
fn comparison_inequality() {
    let Params::VerifyMoments(p) = params("verify-moments --alpha 1 --t-horizon 2 --ensemble 200 --seed 9") else {
        unreachable!()
    };
    let r = reports::verify_moments(&rshe_cli::config::MomentParams {
        moments: rshe::analysis::MomentConfig {
            horizons: vec![p.sim.t_horizon],
            ensemble_size: 200,
            ..p.moments.clone()
        },
        ..p.clone()
    })
    .unwrap();
    let rows = &r.comparison;
    let held = rows.iter().filter(|c| c.holds()).count();
    let worst = rows
        .iter()
        .map(|c| c.u_sup / (2.0 * c.v_sup + c.slack))
        .fold(0.0, f64::max);
    let pass = rows.len() == 200 && held as f64 >= 0.95 * rows.len() as f64;
    verdict(
        9,
        pass,
        format!(
            "{held}/{} seeds satisfy sup|u~| <= 2 sup|v~| + {:.4}; worst ratio {worst:.3}",
            rows.len(),
            rows[0].slack
        ),
    );
    assert!(pass);
}

#[test]
fn stochastic_convolution() {
    let Params::Convolution(p) =
        params("convolution --nx 64 --alpha 1 --horizons 1,2,4,8 --ensemble 100 --mean-ensemble 500 --seed 10")
    else {
        unreachable!()
    };
    let r = reports::convolution(&p).unwrap();
    let (mean, se) = mean_stderr(&r.point_values);
    let c: Vec<(f64, f64)> = r.holder.iter().map(|h| h.mean_stderr()).collect();
    let growth = c.last().unwrap().0 / c[0].0;
    let pass = r.boundary_max == 0.0 && mean.abs() <= 4.0 * se && growth <= 1.5;
    let consts: Vec<String> = r
        .holder
        .iter()
        .zip(&c)
        .map(|(h, (m, s))| format!("T={}: {m:.4} +- {s:.4}", h.t_horizon))
        .collect();
    verdict(
        10,
        pass,
        format!(
            "max |I(t,0)| = {}; mean at (1, 0.5) = {mean:.4} +- {se:.4} over {} seeds; \
             Hölder constants {} (growth {growth:.3} <= 1.5)",
            r.boundary_max,
            r.point_values.len(),
            consts.join(", ")
        ),
    );
    assert!(pass);
}

fn ks_at(rows: &[KsRow], x: f64) -> &KsRow {
    rows.iter().find(|r| (r.node - x).abs() < 1e-12).unwrap()
}

#[test]
fn invariant_law() {
    // Thinning of 120 steps at nx = 64 gives 103 samples per member, so
    // n_eff = n / 5 reaches 2000 with 100 members.
    let thinning = 120.0 / 4096.0;
    let invariant = |nx: usize| {
        let Params::EstimateInvariant(p) = params(&format!(
            "estimate-invariant --sigma 1 --f 0 --nx {nx} --ensemble 100 --t-horizon 4 --burn-in 1 \
             --thinning {thinning} --nodes 0.25,0.5,0.75 --seed 11"
        )) else {
            unreachable!()
        };
        let m = reports::invariant_measure(&p).unwrap();
        let standard = reports::ks_rows(&m, &p.nodes, 1.0, ReferenceLaw::Standard, p.sim.seed).unwrap();
        let equation = reports::ks_rows(&m, &p.nodes, 1.0, ReferenceLaw::Equation, p.sim.seed).unwrap();
        (standard, equation)
    };
    let (std64, eq64) = invariant(64);
    let (std128, eq128) = invariant(128);
    let (a, b) = (ks_at(&std64, 0.5), ks_at(&std128, 0.5));
    let close = a.ks < 0.05 && a.n_eff >= 2000.0;
    let spread = 4.0 * (a.ks_std_dev.powi(2) + b.ks_std_dev.powi(2)).sqrt();
    let monotone = b.ks <= a.ks + spread;
    verdict(
        11,
        close && monotone,
        format!(
            "KS to sqrt(x(1-x)) chi_3 at x=0.5: {:.4} (< 0.05) at n_eff {:.0} (>= 2000); \
             nx=128: {:.4} (<= {:.4} + {:.4}); sample mean {:.4} vs law mean {:.4}",
            a.ks, a.n_eff, b.ks, a.ks, spread, a.sample_mean, a.law_mean
        ),
    );
    let (e64, e128) = (ks_at(&eq64, 0.5), ks_at(&eq128, 0.5));
    info(
        11,
        format!(
            "against the law of the simulated equation (bridge scaled by 1/sqrt 2): KS {:.4} at nx=64, \
             {:.4} at nx=128; law mean {:.4}, sample means {:.4} / {:.4}",
            e64.ks, e128.ks, e64.law_mean, e64.sample_mean, e128.sample_mean
        ),
    );
    let (_, eq32) = invariant(32);
    for x in [0.25, 0.5, 0.75] {
        let ks: Vec<String> = [&eq32, &eq64, &eq128]
            .iter()
            .map(|rows| format!("{:.4} +- {:.4}", ks_at(rows, x).ks, ks_at(rows, x).ks_std_dev))
            .collect();
        info(
            11,
            format!("x = {x}: KS to the equation law at nx = 32, 64, 128: {}", ks.join(", ")),
        );
    }
    assert!(close, "KS {} at nx = 64 is not below 0.05", a.ks);
    assert!(monotone, "KS grew from {} to {} as nx doubled", a.ks, b.ks);
}

#[test]
fn holder_tightness() {
    let Params::Holder(p) =
        params("holder --sigma 1 --f 0 --nx 64 --horizons 1,2,4,8 --ensemble 200 --exponent 0.25 --seed 12")
    else {
        unreachable!()
    };
    let r = reports::holder(&p).unwrap();
    let maxima: Vec<f64> = r.iter().map(|h| h.max()).collect();
    let hi = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = lo > 0.0 && hi / lo <= 2.0;
    let rows: Vec<String> = r
        .iter()
        .map(|h| {
            let (m, s) = h.mean_stderr();
            format!("T={}: max {:.4}, mean {m:.4} +- {:.4}", h.t_horizon, h.max(), 4.0 * s)
        })
        .collect();
    verdict(
        12,
        pass,
        format!("max/min of sup over seeds {:.3} (<= 2); {}", hi / lo, rows.join(", ")),
    );
    assert!(pass);
}
