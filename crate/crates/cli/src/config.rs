//! Command-line and config-file resolution.
//!
//! Every parameter has a config key and a flag. A config file holds
//! `key = value` lines (`#` starts a comment); flags override it. The
//! resolved parameters are validated before any computation starts.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use rshe::analysis::{DampedParams, MomentConfig};
use rshe::{Coefficients, Grid, InitialProfile, KernelConfig, Scheme, SolverConfig};

/// A rejected command line or config file.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

impl From<rshe::Error> for UsageError {
    fn from(e: rshe::Error) -> Self {
        UsageError(e.to_string())
    }
}

type Parsed<T> = std::result::Result<T, UsageError>;

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "rshe", version, about = "Reflected stochastic heat equation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: CommandLine,
}

#[derive(Debug, Subcommand)]
enum CommandLine {
    /// Integrate one reflected run and check the structure of an ensemble.
    Simulate(Flags),
    /// Kernel integral bound, identities and increment exponents.
    VerifyKernel(Flags),
    /// Weak-form residuals under coupled refinement.
    VerifyWeakform(Flags),
    /// Damped sup moments and the comparison with the mild-form field.
    VerifyMoments(Flags),
    /// Spatial Hölder quotients of terminal profiles.
    Holder(Flags),
    /// Empirical invariant marginals and their KS distances.
    EstimateInvariant(Flags),
    /// Damped stochastic convolution statistics.
    Convolution(Flags),
}

#[derive(Debug, Clone, Default, Args)]
#[command(allow_negative_numbers = true)]
struct Flags {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "t-horizon")]
    t_horizon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long = "ensemble")]
    ensemble_size: Option<String>,
    #[arg(long = "burn-in")]
    burn_in: Option<String>,
    #[arg(long)]
    thinning: Option<String>,
    /// projection or penalization.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long = "epsilon")]
    penalization_epsilon: Option<String>,
    /// Output directory.
    #[arg(long = "out", value_name = "DIR")]
    output_dir: Option<String>,
    /// Constant drift.
    #[arg(long = "f")]
    f: Option<String>,
    /// Constant volatility.
    #[arg(long)]
    sigma: Option<String>,
    /// zero, sine or parabola.
    #[arg(long = "u0")]
    initial_data: Option<String>,
    #[arg(long = "t-max")]
    t_max: Option<String>,
    #[arg(long = "n-grid")]
    n_grid: Option<String>,
    #[arg(long = "truncation-terms")]
    truncation_terms: Option<String>,
    #[arg(long = "crossover-time")]
    crossover_time: Option<String>,
    #[arg(long = "tail-tolerance")]
    tail_tolerance: Option<String>,
    /// Comma-separated ascending horizons.
    #[arg(long)]
    horizons: Option<String>,
    /// Spatial Hölder exponent.
    #[arg(long = "exponent")]
    space_exponent: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Comma-separated nodes in (0, 1).
    #[arg(long)]
    nodes: Option<String>,
    /// Reference law: equation or standard.
    #[arg(long)]
    law: Option<String>,
    /// Ensemble size for the pointwise mean of the convolution.
    #[arg(long = "mean-ensemble")]
    mean_ensemble_size: Option<String>,
}

impl Flags {
    fn entries(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("nx", &self.nx),
            ("dt", &self.dt),
            ("t_horizon", &self.t_horizon),
            ("seed", &self.seed),
            ("alpha", &self.alpha),
            ("p", &self.p),
            ("ensemble_size", &self.ensemble_size),
            ("burn_in", &self.burn_in),
            ("thinning", &self.thinning),
            ("scheme", &self.scheme),
            ("penalization_epsilon", &self.penalization_epsilon),
            ("output_dir", &self.output_dir),
            ("f", &self.f),
            ("sigma", &self.sigma),
            ("initial_data", &self.initial_data),
            ("T_max", &self.t_max),
            ("n_grid", &self.n_grid),
            ("truncation_terms", &self.truncation_terms),
            ("crossover_time", &self.crossover_time),
            ("tail_tolerance", &self.tail_tolerance),
            ("horizons", &self.horizons),
            ("space_exponent", &self.space_exponent),
            ("gamma", &self.gamma),
            ("nodes", &self.nodes),
            ("law", &self.law),
            ("mean_ensemble_size", &self.mean_ensemble_size),
        ]
    }
}

/// The commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    VerifyKernel,
    VerifyWeakform,
    VerifyMoments,
    Holder,
    EstimateInvariant,
    Convolution,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VerifyKernel => "verify-kernel",
            Command::VerifyWeakform => "verify-weakform",
            Command::VerifyMoments => "verify-moments",
            Command::Holder => "holder",
            Command::EstimateInvariant => "estimate-invariant",
            Command::Convolution => "convolution",
        }
    }

    /// Keys the command reads, with their defaults.
    fn defaults(self) -> Vec<(&'static str, &'static str)> {
        let sim = |t: &'static str| {
            vec![
                ("nx", "64"),
                ("dt", ""),
                ("t_horizon", t),
                ("seed", "0"),
                ("f", "0"),
                ("sigma", "1"),
                ("initial_data", "zero"),
                ("scheme", "projection"),
                ("penalization_epsilon", "0.001"),
            ]
        };
        let mut keys = match self {
            Command::Simulate => {
                let mut k = sim("1");
                k.push(("ensemble_size", "1"));
                k
            }
            Command::VerifyKernel => vec![
                ("truncation_terms", "64"),
                ("crossover_time", "0.1"),
                ("tail_tolerance", "1e-12"),
                ("T_max", "10"),
                ("n_grid", "1025"),
                ("p", "8"),
            ],
            Command::VerifyWeakform => {
                let mut k = sim("0.25");
                k.push(("ensemble_size", "5"));
                k
            }
            Command::VerifyMoments => {
                let mut k = sim("2");
                k.extend([
                    ("p", "2"),
                    ("alpha", "1"),
                    ("horizons", "1,2,4,8"),
                    ("ensemble_size", "200"),
                ]);
                k
            }
            Command::Holder => {
                let mut k = sim("8");
                k.extend([
                    ("horizons", "1,2,4,8"),
                    ("ensemble_size", "200"),
                    ("space_exponent", "0.25"),
                ]);
                k
            }
            Command::EstimateInvariant => {
                let mut k = sim("4");
                k.extend([
                    ("ensemble_size", "100"),
                    ("burn_in", "1"),
                    ("thinning", "0.1"),
                    ("nodes", "0.25,0.5,0.75"),
                    ("law", "equation"),
                ]);
                k
            }
            Command::Convolution => vec![
                ("nx", "64"),
                ("dt", ""),
                ("seed", "0"),
                ("sigma", "1"),
                ("alpha", "1"),
                ("horizons", "1,2,4,8"),
                ("ensemble_size", "100"),
                ("mean_ensemble_size", "500"),
                ("gamma", "0.5"),
            ],
        };
        keys.push(("output_dir", "."));
        keys
    }
}

/// Parameters shared by the commands that integrate the equation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub nx: usize,
    pub dt: f64,
    pub t_horizon: f64,
    pub seed: u64,
    pub f: f64,
    pub sigma: f64,
    pub initial_data: InitialProfile,
    pub scheme: Scheme,
}

impl SimParams {
    pub fn grid(&self) -> Result<Grid, rshe::Error> {
        Grid::with_horizon(self.nx, self.dt, self.t_horizon)
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients::constant(self.f, self.sigma)
    }

    /// Solver configuration on the horizon `t_horizon`.
    pub fn solver(&self) -> Result<SolverConfig, rshe::Error> {
        let g = self.grid()?;
        Ok(SolverConfig::new(g, self.coefficients(), self.initial_data.sample(&g), self.seed).with_scheme(self.scheme))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateParams {
    pub sim: SimParams,
    pub ensemble_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub kernel: KernelConfig,
    pub t_max: f64,
    pub n_grid: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakFormParams {
    pub sim: SimParams,
    pub ensemble_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentParams {
    /// `t_horizon` is the comparison horizon.
    pub sim: SimParams,
    pub moments: MomentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderParams {
    pub sim: SimParams,
    pub horizons: Vec<f64>,
    pub ensemble_size: usize,
    pub space_exponent: f64,
}

/// Which law the invariant marginals are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceLaw {
    /// `sigma / sqrt 2` times the Bessel bridge, the stationary law of the
    /// simulated equation.
    Equation,
    /// The unscaled Bessel bridge `sqrt(x (1 - x)) chi_3`.
    Standard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantParams {
    pub sim: SimParams,
    pub ensemble_size: usize,
    pub burn_in: f64,
    pub thinning: f64,
    pub nodes: Vec<f64>,
    pub law: ReferenceLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionParams {
    pub nx: usize,
    pub dt: f64,
    pub seed: u64,
    pub sigma: f64,
    pub alpha: f64,
    pub horizons: Vec<f64>,
    pub ensemble_size: usize,
    pub mean_ensemble_size: usize,
    pub gamma: f64,
}

/// Validated parameters of one command.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Simulate(SimulateParams),
    VerifyKernel(KernelParams),
    VerifyWeakform(WeakFormParams),
    VerifyMoments(MomentParams),
    Holder(HolderParams),
    EstimateInvariant(InvariantParams),
    Convolution(ConvolutionParams),
}

/// A parsed and validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// The resolved `key = value` settings, sorted by key.
    pub resolved: BTreeMap<String, String>,
}

impl RunConfig {
    /// Canonical text of the resolved settings.
    pub fn canonical(&self) -> String {
        let mut s = format!("command = {}\n", self.command.name());
        for (k, v) in &self.resolved {
            if k != "output_dir" {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    }

    /// SHA-256 of [`RunConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Outcome of parsing: a run, or text clap wants printed (help, version).
#[derive(Debug)]
pub enum Parse {
    Run(Box<RunConfig>),
    Display(String),
}

/// Parses `argv` (including the program name) into a validated config.
pub fn parse(argv: &[String]) -> Parsed<Parse> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Parse::Display(e.to_string())),
                _ => Err(usage(e.to_string())),
            };
        }
    };
    let (command, flags) = match cli.command {
        CommandLine::Simulate(f) => (Command::Simulate, f),
        CommandLine::VerifyKernel(f) => (Command::VerifyKernel, f),
        CommandLine::VerifyWeakform(f) => (Command::VerifyWeakform, f),
        CommandLine::VerifyMoments(f) => (Command::VerifyMoments, f),
        CommandLine::Holder(f) => (Command::Holder, f),
        CommandLine::EstimateInvariant(f) => (Command::EstimateInvariant, f),
        CommandLine::Convolution(f) => (Command::Convolution, f),
    };
    resolve(command, &flags).map(|c| Parse::Run(Box::new(c)))
}

/// Parses a `key = value` config file body.
pub fn parse_config_text(text: &str) -> Parsed<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(usage(format!("config line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(usage(format!("config line {}: duplicate key {k}", i + 1)));
        }
    }
    Ok(out)
}

fn resolve(command: Command, flags: &Flags) -> Parsed<RunConfig> {
    let defaults = command.defaults();
    let known = |k: &str| defaults.iter().any(|(d, _)| *d == k);
    let mut settings: BTreeMap<String, String> = defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    if let Some(path) = &flags.config {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        for (k, v) in parse_config_text(&text)? {
            if !known(&k) {
                return Err(usage(format!("config key {k} does not apply to {}", command.name())));
            }
            settings.insert(k, v);
        }
    }
    for (k, v) in flags.entries() {
        if let Some(v) = v {
            if !known(k) {
                return Err(usage(format!(
                    "--{} does not apply to {}",
                    k.replace('_', "-"),
                    command.name()
                )));
            }
            settings.insert(k.to_string(), v.clone());
        }
    }
    let mut r = Reader { settings };
    let params = match command {
        Command::Simulate => Params::Simulate(SimulateParams {
            sim: r.sim()?,
            ensemble_size: r.positive_usize("ensemble_size")?,
        }),
        Command::VerifyKernel => {
            let kernel = KernelConfig::new(
                r.positive_usize("truncation_terms")?,
                r.positive("crossover_time")?,
                r.positive("tail_tolerance")?,
            )?;
            let p = r.real("p")?;
            if !(p > 4.0) {
                return Err(usage(format!("p must exceed 4 for the kernel estimates, got {p}")));
            }
            let n_grid = r.positive_usize("n_grid")?;
            if n_grid < 2 {
                return Err(usage("n_grid must be at least 2"));
            }
            Params::VerifyKernel(KernelParams {
                kernel,
                t_max: r.positive("T_max")?,
                n_grid,
                p,
            })
        }
        Command::VerifyWeakform => {
            let sim = r.sim()?;
            Params::VerifyWeakform(WeakFormParams {
                sim,
                ensemble_size: r.positive_usize("ensemble_size")?,
            })
        }
        Command::VerifyMoments => {
            let sim = r.sim()?;
            let moments = MomentConfig {
                p: r.real("p")?,
                alpha: r.real("alpha")?,
                horizons: r.list("horizons")?,
                ensemble_size: r.positive_usize("ensemble_size")?,
            };
            moments.validate()?;
            for &t in &moments.horizons {
                Grid::with_horizon(sim.nx, sim.dt, t)?;
            }
            DampedParams::new(moments.alpha, sim.t_horizon)?;
            Params::VerifyMoments(MomentParams { sim, moments })
        }
        Command::Holder => {
            let sim = r.sim()?;
            let horizons = r.horizons(&sim)?;
            let space_exponent = r.real("space_exponent")?;
            if !(space_exponent > 0.0 && space_exponent <= 0.5) {
                return Err(usage("space_exponent must lie in (0, 1/2]"));
            }
            if sim.nx < 8 {
                return Err(usage("holder needs nx >= 8"));
            }
            Params::Holder(HolderParams {
                sim,
                horizons,
                ensemble_size: r.positive_usize("ensemble_size")?,
                space_exponent,
            })
        }
        Command::EstimateInvariant => {
            let sim = r.sim()?;
            let burn_in = r.real("burn_in")?;
            if !(burn_in >= 0.0 && burn_in < sim.t_horizon) {
                return Err(usage("burn_in must lie in [0, t_horizon)"));
            }
            Grid::with_horizon(sim.nx, sim.dt, burn_in.max(sim.dt))?;
            let thinning = r.positive("thinning")?;
            if (thinning / sim.dt).round() < 1.0 {
                return Err(usage("thinning must be at least one time step"));
            }
            let nodes = r.list("nodes")?;
            for &x in &nodes {
                if !(x > 0.0 && x < 1.0) {
                    return Err(usage(format!("node {x} is not interior")));
                }
                Grid::new(sim.nx, sim.dt, 1)?.node_index(x)?;
            }
            let law = match r.text("law")?.as_str() {
                "equation" => ReferenceLaw::Equation,
                "standard" => ReferenceLaw::Standard,
                other => return Err(usage(format!("unknown law {other}; expected equation or standard"))),
            };
            if sim.sigma == 0.0 {
                return Err(usage("the invariant law needs sigma != 0"));
            }
            Params::EstimateInvariant(InvariantParams {
                sim,
                ensemble_size: r.positive_usize("ensemble_size")?,
                burn_in,
                thinning,
                nodes,
                law,
            })
        }
        Command::Convolution => {
            let nx = r.positive_usize("nx")?;
            let dt = r.dt(nx)?;
            let horizons = r.list("horizons")?;
            if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) {
                return Err(usage("horizons must be strictly ascending"));
            }
            for &t in &horizons {
                Grid::with_horizon(nx, dt, t)?;
                DampedParams::new(1.0, t)?;
            }
            Grid::with_horizon(nx, dt, 1.0)?;
            let gamma = r.real("gamma")?;
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(usage("gamma must lie in (0, 1]"));
            }
            let alpha = r.real("alpha")?;
            DampedParams::new(alpha, 1.0)?;
            Params::Convolution(ConvolutionParams {
                nx,
                dt,
                seed: r.seed()?,
                sigma: r.real("sigma")?,
                alpha,
                horizons,
                ensemble_size: r.positive_usize("ensemble_size")?,
                mean_ensemble_size: r.positive_usize("mean_ensemble_size")?,
                gamma,
            })
        }
    };
    let seed = match command {
        Command::VerifyKernel => 0,
        _ => r.seed()?,
    };
    let output_dir = PathBuf::from(r.text("output_dir")?);
    Ok(RunConfig {
        command,
        params,
        output_dir,
        seed,
        resolved: r.settings,
    })
}

struct Reader {
    settings: BTreeMap<String, String>,
}

impl Reader {
    fn text(&self, key: &str) -> Parsed<String> {
        self.settings
            .get(key)
            .cloned()
            .ok_or_else(|| usage(format!("missing {key}")))
    }

    fn real(&self, key: &str) -> Parsed<f64> {
        let v = self.text(key)?;
        let x: f64 = v.parse().map_err(|_| usage(format!("{key}: {v:?} is not a number")))?;
        if !x.is_finite() {
            return Err(usage(format!("{key} must be finite")));
        }
        Ok(x)
    }

    fn positive(&self, key: &str) -> Parsed<f64> {
        let x = self.real(key)?;
        if x <= 0.0 {
            return Err(usage(format!("{key} must be positive, got {x}")));
        }
        Ok(x)
    }

    fn positive_usize(&self, key: &str) -> Parsed<usize> {
        let v = self.text(key)?;
        let n: usize = v
            .parse()
            .map_err(|_| usage(format!("{key}: {v:?} is not a nonnegative integer")))?;
        if n == 0 {
            return Err(usage(format!("{key} must be positive")));
        }
        Ok(n)
    }

    fn seed(&self) -> Parsed<u64> {
        let v = self.text("seed")?;
        v.parse()
            .map_err(|_| usage(format!("seed: {v:?} is not a 64-bit unsigned integer")))
    }

    fn list(&self, key: &str) -> Parsed<Vec<f64>> {
        let v = self.text(key)?;
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| usage(format!("{key}: {s:?} is not a number")))
            })
            .collect()
    }

    /// `dt` defaults to `dx^2`; the resolved value is written back.
    fn dt(&mut self, nx: usize) -> Parsed<f64> {
        let dt = if self.text("dt")?.is_empty() {
            let dx = 1.0 / nx as f64;
            dx * dx
        } else {
            self.positive("dt")?
        };
        self.settings.insert("dt".into(), format!("{dt:e}"));
        Ok(dt)
    }

    fn horizons(&self, sim: &SimParams) -> Parsed<Vec<f64>> {
        let h = self.list("horizons")?;
        if h.is_empty() || h.iter().any(|t| *t <= 0.0) || h.windows(2).any(|w| w[1] <= w[0]) {
            return Err(usage("horizons must be positive and strictly ascending"));
        }
        for &t in &h {
            Grid::with_horizon(sim.nx, sim.dt, t)?;
        }
        Ok(h)
    }

    fn sim(&mut self) -> Parsed<SimParams> {
        let nx = self.positive_usize("nx")?;
        let dt = self.dt(nx)?;
        let scheme = match self.text("scheme")?.as_str() {
            "projection" => {
                self.settings.remove("penalization_epsilon");
                Scheme::Projection
            }
            "penalization" => Scheme::Penalization {
                epsilon: self.positive("penalization_epsilon")?,
            },
            other => {
                return Err(usage(format!(
                    "unknown scheme {other}; expected projection or penalization"
                )))
            }
        };
        let initial_data: InitialProfile = self.text("initial_data")?.parse()?;
        let sim = SimParams {
            nx,
            dt,
            t_horizon: self.positive("t_horizon")?,
            seed: self.seed()?,
            f: self.real("f")?,
            sigma: self.real("sigma")?,
            initial_data,
            scheme,
        };
        sim.solver()?.validate()?;
        Ok(sim)
    }
}
