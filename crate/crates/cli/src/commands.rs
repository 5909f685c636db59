use std::path::PathBuf;

use crate::config::{parse, Params, Parse, RunConfig, UsageError};
use crate::output::{key_values, real, Csv};
use crate::reports;

/// Exit status for success, rejected input and numerical failure.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error(transparent)]
    Core(#[from] rshe::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        }
    }
}

/// Parses, validates and executes `argv` (program name first), returning
/// the process exit status.
pub fn run_command(argv: &[String]) -> i32 {
    let cfg = match parse(argv) {
        Ok(Parse::Run(c)) => c,
        Ok(Parse::Display(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let threads = match worker_count() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let outcome = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cfg)),
            Err(e) => {
                eprintln!("cannot start {n} workers: {e}");
                return EXIT_USAGE;
            }
        },
        None => execute(&cfg),
    };
    match outcome {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}: {e}", cfg.command.name());
            e.exit_code()
        }
    }
}

fn worker_count() -> Result<Option<usize>, UsageError> {
    match std::env::var("RSHE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(UsageError(format!(
                "RSHE_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Runs a validated config and writes its CSV files.
pub fn execute(cfg: &RunConfig) -> Result<Vec<PathBuf>, RunError> {
    let hash = cfg.hash();
    let seed = cfg.seed;
    let dir = &cfg.output_dir;
    let csv = |columns: &[&str]| Csv::new(&hash, seed, columns);
    let mut written = Vec::new();
    match &cfg.params {
        Params::Simulate(p) => {
            let r = reports::simulate(p)?;
            let traj = &r.trajectory;
            let g = traj.grid;
            let mut t = csv(&["t", "x", "u"]);
            for (time, snap) in traj.iter() {
                for (j, u) in snap.iter().enumerate() {
                    t.row(&[real(time), real(g.node(j)), real(*u)]);
                }
            }
            written.push(t.write(dir, "trajectory.csv")?);
            let mut e = csv(&["t", "x", "eta_mass"]);
            for i in 0..traj.len().saturating_sub(1) {
                let mut block = vec![0.0; g.interior()];
                for n in traj.step(i)..traj.step(i + 1) {
                    block.iter_mut().zip(r.reflection.row(n)).for_each(|(b, m)| *b += m);
                }
                for (j, m) in block.iter().enumerate() {
                    e.row(&[real(traj.time(i)), real(g.node(j + 1)), real(*m)]);
                }
            }
            written.push(e.write(dir, "reflection.csv")?);
            let mut s = csv(&["seed", "min_u", "min_eta", "complementarity", "boundary"]);
            for row in &r.structure {
                s.row(&[
                    row.seed.to_string(),
                    real(row.min_u),
                    real(row.min_eta),
                    real(row.complementarity),
                    real(row.boundary),
                ]);
            }
            written.push(s.write(dir, "structure.csv")?);
        }
        Params::VerifyKernel(p) => {
            let r = reports::verify_kernel(p)?;
            let id = &r.identities;
            let mut pairs = vec![
                ("sup_value", real(r.integral.sup_value)),
                ("bound", real(rshe::kernel::INTEGRAL_BOUND)),
                ("bound_ok", r.integral.bound_check.to_string()),
                ("argmax", real(r.integral.argmax)),
                ("time_tail", real(r.integral.time_tail)),
                ("symmetry", real(id.symmetry)),
                ("boundary", real(id.boundary)),
                ("min_value", real(id.min_value)),
                ("chapman_kolmogorov", real(id.chapman_kolmogorov)),
                ("mass_excess", real(id.mass_excess)),
                ("cross_representation", real(id.cross_representation)),
            ];
            let names: Vec<(String, String, String)> = r
                .fits
                .iter()
                .map(|(k, fit)| {
                    let key = k.to_string().replace('-', "_");
                    (key, real(fit.slope), real(k.target_exponent(p.p)))
                })
                .collect();
            let mut owned = Vec::new();
            for (key, slope, target) in &names {
                owned.push((format!("{key}_slope"), slope.clone()));
                owned.push((format!("{key}_target"), target.clone()));
            }
            pairs.extend(owned.iter().map(|(k, v)| (k.as_str(), v.clone())));
            written.push(key_values(&hash, seed, &pairs).write(dir, "kernel_report.csv")?);
        }
        Params::VerifyWeakform(p) => {
            let rows = reports::verify_weakform(p)?;
            let mut w = csv(&["seed", "test_function", "nx", "residual", "scale"]);
            for r in &rows {
                w.row(&[
                    r.seed.to_string(),
                    format!("\"{}\"", r.test_function),
                    r.nx.to_string(),
                    real(r.residual),
                    real(r.scale),
                ]);
            }
            written.push(w.write(dir, "weakform.csv")?);
        }
        Params::VerifyMoments(p) => {
            let r = reports::verify_moments(p)?;
            let mut m = csv(&["T", "p", "alpha", "estimate", "stderr"]);
            for e in &r.estimates {
                m.row(&[
                    real(e.t_horizon),
                    real(e.p),
                    real(e.alpha),
                    real(e.estimate),
                    real(e.stderr),
                ]);
            }
            written.push(m.write(dir, "moments.csv")?);
            let mut c = csv(&["seed", "u_sup", "v_sup", "slack", "holds"]);
            for row in &r.comparison {
                c.row(&[
                    row.seed.to_string(),
                    real(row.u_sup),
                    real(row.v_sup),
                    real(row.slack),
                    row.holds().to_string(),
                ]);
            }
            written.push(c.write(dir, "comparison.csv")?);
        }
        Params::Holder(p) => {
            let r = reports::holder(p)?;
            let mut h = csv(&["T", "exponent", "n_seeds", "mean", "stderr", "max"]);
            for s in &r {
                let (mean, se) = s.mean_stderr();
                h.row(&[
                    real(s.t_horizon),
                    real(p.space_exponent),
                    s.values.len().to_string(),
                    real(mean),
                    real(se),
                    real(s.max()),
                ]);
            }
            written.push(h.write(dir, "holder.csv")?);
        }
        Params::EstimateInvariant(p) => {
            let rows = reports::estimate_invariant(p)?;
            let mut k = csv(&["node", "n_samples", "ks", "threshold"]);
            for r in &rows {
                k.row(&[real(r.node), r.n_samples.to_string(), real(r.ks), real(r.threshold)]);
            }
            written.push(k.write(dir, "ks.csv")?);
        }
        Params::Convolution(p) => {
            let r = reports::convolution(p)?;
            let mut h = csv(&["T", "gamma", "n_seeds", "constant", "stderr"]);
            for s in &r.holder {
                let (mean, se) = s.mean_stderr();
                h.row(&[
                    real(s.t_horizon),
                    real(p.gamma),
                    s.values.len().to_string(),
                    real(mean),
                    real(se),
                ]);
            }
            written.push(h.write(dir, "convolution_holder.csv")?);
            let (mean, se) = rshe::ensemble::mean_stderr(&r.point_values);
            let mut m = csv(&["t", "x", "n_seeds", "mean", "stderr", "boundary_max"]);
            m.row(&[
                real(1.0),
                real(0.5),
                r.point_values.len().to_string(),
                real(mean),
                real(se),
                real(r.boundary_max),
            ]);
            written.push(m.write(dir, "convolution_point.csv")?);
        }
    }
    Ok(written)
}
