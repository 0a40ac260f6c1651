//! `riverkpp` command line: phase-plane orbits, stationary states,
//! simulations, predictions, verification runs and parameter sweeps.
//!
//! Every subcommand writes its artifacts and one `manifest.json` into
//! `--out`. Exit status: 0 on success, 1 on a domain or I/O error, 2 on a
//! usage error.

pub mod manifest;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use riverkpp::classifier::{classify_parameters, sweep_point, verify_trichotomy, SimOptions, SweepSpec};
use riverkpp::network::{NetworkConfig, RiverNetwork};
use riverkpp::phase_plane::{equilibrium_eigen, psi_curve, trace_special_trajectory, PsiGridOptions, TraceOptions, TrajectoryKind};
use riverkpp::simulator::{canonical_bump, discretize, ContaminationPolicy, FarBoundary, GridSpec, Observers, Probe, Scheme, Simulator};
use riverkpp::stationary::{
    classify_case, compute_thresholds_with, existence_from_report, stationary_profile_with, supersolution, ExistenceLabel,
    ProfileOptions, ThresholdOptions, ThresholdReport, TypeSelector,
};

use manifest::{ResolvedConfig, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "riverkpp", version, about = "Fisher-KPP advection-diffusion on star river networks")]
pub struct Cli {
    /// Directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "riverkpp-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace a special orbit of the scaled phase plane.
    PhasePlane(PhasePlaneArgs),
    /// Thresholds (JSON) and, with --alpha, a stationary profile (CSV).
    Stationary(StationaryArgs),
    /// Time-integrate the network from an initial datum.
    Simulate(SimulateArgs),
    /// Predict the long-time outcome from the branch speeds.
    Classify(ConfigArg),
    /// Predict, simulate from the canonical bump, and compare.
    Verify(VerifyArgs),
    /// Prediction (and optionally simulation) over a grid of speeds.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    GammaPlus,
    GammaMinus,
    GammaStar,
    H,
}

impl From<KindArg> for TrajectoryKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::GammaPlus => TrajectoryKind::GammaPlus,
            KindArg::GammaMinus => TrajectoryKind::GammaMinus,
            KindArg::GammaStar => TrajectoryKind::GammaStar,
            KindArg::H => TrajectoryKind::H,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FarBcArg {
    Neumann,
    Dirichlet,
    Robin,
}

impl From<FarBcArg> for FarBoundary {
    fn from(b: FarBcArg) -> Self {
        match b {
            FarBcArg::Neumann => FarBoundary::Neumann,
            FarBcArg::Dirichlet => FarBoundary::Dirichlet,
            FarBcArg::Robin => FarBoundary::FastDecayRobin,
        }
    }
}

#[derive(Debug, Args)]
pub struct PhasePlaneArgs {
    /// `mu = beta^-2`.
    #[arg(long)]
    pub mu: f64,
    #[arg(long, value_enum)]
    pub kind: KindArg,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Network JSON: `{"branches": [{"orientation": "upper", "beta": 3, "a": 1}, ...]}`.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct StationaryArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Junction value of the profile to build.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Physical junction slope of the first upper branch (continuum regimes).
    #[arg(long, conflicts_with = "decreasing")]
    pub split: Option<f64>,
    /// Build the type-01 profile whose upper branch `ID` rises to 1 upstream.
    #[arg(long, value_name = "ID")]
    pub decreasing: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Truncation length of every branch. Keep L >= (2 + max beta) T + 20 so
    /// fronts stay inside the window; the run warns when they do not.
    #[arg(long = "L", default_value_t = 500.0)]
    pub length: f64,
    /// Nodes per branch (default: spacing 0.05).
    #[arg(long = "N")]
    pub nodes: Option<usize>,
    #[arg(long, default_value_t = 0.005)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 200.0)]
    pub t_final: f64,
    #[arg(long = "far-bc", value_enum, default_value = "neumann")]
    pub far_bc: FarBcArg,
}

impl GridArgs {
    fn nodes(&self) -> usize {
        self.nodes.unwrap_or_else(|| (self.length / 0.05).ceil() as usize + 1)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// `bump` (max(0, 1 - x^2)), `bump:<amp>:<width>`, `const:<v>`, or
    /// `super:<M>` (M e^{k+ x} upstream where beta >= 2, M elsewhere).
    #[arg(long, default_value = "bump")]
    pub init: String,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 0.5)]
    pub sample_every: f64,
    /// Record the Lyapunov functional (two-branch networks).
    #[arg(long)]
    pub lyapunov: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Outcome and junction-gap tolerance.
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `family:name=start:stop:count,...`, family one of tb, uul, ull; e.g.
    /// `tb:beta_u=1.5:3:7,beta_l=1`.
    #[arg(long)]
    pub grid: String,
    /// Also simulate every point from the canonical bump.
    #[arg(long)]
    pub simulate: bool,
    #[command(flatten)]
    pub sim: GridArgs,
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    /// Worker threads (default: all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

/// Parses `argv`, runs, and maps the outcome to an exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("RIVERKPP_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn read_network(path: &Path) -> anyhow::Result<RiverNetwork> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: NetworkConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(cfg.build()?)
}

fn sim_options(grid: &GridArgs, tol: f64) -> SimOptions {
    SimOptions {
        length: grid.length,
        h: grid.length / (grid.nodes() - 1) as f64,
        dt: grid.dt,
        t_final: grid.t_final,
        far_bc: grid.far_bc.into(),
        tol,
        ..SimOptions::default()
    }
}

/// Runs one subcommand and writes its artifacts plus the manifest.
pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let start = Instant::now();
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let (config, artifacts) = match &cli.command {
        Command::PhasePlane(a) => phase_plane(a, &cli.out)?,
        Command::Stationary(a) => stationary(a, &cli.out)?,
        Command::Simulate(a) => simulate(a, &cli.out)?,
        Command::Classify(a) => classify(a, &cli.out)?,
        Command::Verify(a) => verify(a, &cli.out)?,
        Command::Sweep(a) => sweep(a, &cli.out)?,
    };
    let mut manifest = RunManifest::new(config);
    manifest.artifacts = artifacts;
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&cli.out)?;
    Ok(())
}

/// Re-runs the subcommand recorded in a manifest into `out`.
pub fn replay(config: &ResolvedConfig, out: &Path) -> anyhow::Result<Vec<String>> {
    std::fs::create_dir_all(out)?;
    let artifacts = execute(config, out)?;
    let mut manifest = RunManifest::new(config.clone());
    manifest.artifacts = artifacts.clone();
    manifest.write(out)?;
    Ok(artifacts)
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> anyhow::Result<String> {
    std::fs::write(out.join(name), serde_json::to_string_pretty(value)?)?;
    Ok(name.to_string())
}

type Outcome = (ResolvedConfig, Vec<String>);

fn phase_plane(a: &PhasePlaneArgs, out: &Path) -> anyhow::Result<Outcome> {
    let config = ResolvedConfig::PhasePlane {
        mu: a.mu,
        kind: a.kind.into(),
        trace: TraceOptions::default(),
        grid: PsiGridOptions::default(),
    };
    let artifacts = execute(&config, out)?;
    Ok((config, artifacts))
}

fn stationary(a: &StationaryArgs, out: &Path) -> anyhow::Result<Outcome> {
    let selector = match (a.decreasing, a.split) {
        (Some(d), _) => TypeSelector::Type01 { decreasing: d },
        (None, split) => TypeSelector::Type00 { split },
    };
    let config = ResolvedConfig::Stationary {
        network: read_network(&a.config.config)?,
        thresholds: ThresholdOptions::default(),
        alpha: a.alpha,
        selector,
        profile: ProfileOptions::default(),
    };
    let artifacts = execute(&config, out)?;
    Ok((config, artifacts))
}

fn simulate(a: &SimulateArgs, out: &Path) -> anyhow::Result<Outcome> {
    let config = ResolvedConfig::Simulate {
        network: read_network(&a.config.config)?,
        init: a.init.clone(),
        length: a.grid.length,
        nodes: a.grid.nodes(),
        dt: a.grid.dt,
        t_final: a.grid.t_final,
        far_bc: a.grid.far_bc.into(),
        sample_every: a.sample_every,
        lyapunov: a.lyapunov,
    };
    let artifacts = execute(&config, out)?;
    Ok((config, artifacts))
}

fn classify(a: &ConfigArg, out: &Path) -> anyhow::Result<Outcome> {
    let config = ResolvedConfig::Classify { network: read_network(&a.config)? };
    let artifacts = execute(&config, out)?;
    Ok((config, artifacts))
}

fn verify(a: &VerifyArgs, out: &Path) -> anyhow::Result<Outcome> {
    let config = ResolvedConfig::Verify { network: read_network(&a.config.config)?, sim: sim_options(&a.grid, a.tol) };
    let artifacts = execute(&config, out)?;
    Ok((config, artifacts))
}

fn sweep(a: &SweepArgs, out: &Path) -> anyhow::Result<Outcome> {
    let config = ResolvedConfig::Sweep {
        grid: a.grid.clone(),
        simulate: a.simulate,
        sim: sim_options(&a.sim, a.tol),
        workers: a.workers,
    };
    let artifacts = execute(&config, out)?;
    Ok((config, artifacts))
}

/// Initial datum from its textual spec.
pub fn parse_init<'a>(spec: &str, network: &'a RiverNetwork) -> anyhow::Result<Box<dyn Fn(usize, f64) -> f64 + 'a>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.parse::<f64>().map_err(|e| anyhow!("init '{spec}': {e}"));
    Ok(match parts.as_slice() {
        ["bump"] => Box::new(canonical_bump),
        ["bump", amp, width] => {
            let (amp, width) = (num(amp)?, num(width)?);
            if !(width > 0.0) {
                bail!("init '{spec}': width must be positive");
            }
            Box::new(move |_, x: f64| amp * (1.0 - (x / width).powi(2)).max(0.0))
        }
        ["const", v] => {
            let v = num(v)?;
            Box::new(move |_, _| v)
        }
        ["super", m] => Box::new(supersolution(network, num(m)?)),
        _ => bail!("unknown init '{spec}' (bump, bump:<amp>:<width>, const:<v>, super:<M>)"),
    })
}

#[derive(Serialize)]
struct StationarySummary {
    case: riverkpp::stationary::CaseTag,
    thresholds: Option<ThresholdReport>,
    note: Option<String>,
    alpha: Option<f64>,
    existence: Option<ExistenceLabel>,
    flux_residual: Option<f64>,
    decay: Option<Vec<Option<riverkpp::stationary::DecayClass>>>,
}

/// Does the work described by a resolved config; returns artifact names.
pub fn execute(config: &ResolvedConfig, out: &Path) -> anyhow::Result<Vec<String>> {
    let mut artifacts = Vec::new();
    match config {
        ResolvedConfig::PhasePlane { mu, kind, trace, grid } => {
            let traj = trace_special_trajectory(*kind, *mu, trace)?;
            artifacts.push(output::write_trajectory(out, &traj)?);
            artifacts.push(output::write_psi_curve(out, &psi_curve(&traj, grid)?)?);
            artifacts.push(write_json(out, "equilibria.json", &equilibrium_eigen(*mu))?);
        }
        ResolvedConfig::Stationary { network, thresholds, alpha, selector, profile } => {
            let case = classify_case(network)?;
            let (report, note) = match compute_thresholds_with(network, thresholds) {
                Ok(r) => (Some(r), None),
                Err(e @ riverkpp::Error::RegimeHasNoThreshold(_)) => (None, Some(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            let mut summary = StationarySummary {
                case: case.clone(),
                thresholds: report.clone(),
                note,
                alpha: *alpha,
                existence: None,
                flux_residual: None,
                decay: None,
            };
            if let Some(alpha) = alpha {
                summary.existence = Some(existence_from_report(&case, report.as_ref(), *alpha));
                let p = stationary_profile_with(network, *alpha, *selector, profile)?;
                summary.flux_residual = Some(p.flux_residual);
                summary.decay = Some(p.decay.clone());
                artifacts.push(output::write_profile(out, &p)?);
            }
            artifacts.insert(0, write_json(out, "thresholds.json", &summary)?);
        }
        ResolvedConfig::Simulate { network, init, length, nodes, dt, t_final, far_bc, sample_every, lyapunov } => {
            let grid = GridSpec::uniform(network, *length, *nodes, *far_bc)?;
            let f = parse_init(init, network)?;
            let mut state = discretize(network, &grid, &*f)?;
            let sim = Simulator::new(network, &grid, *dt, Scheme::default())?;
            let probes = network.upper_ids().into_iter().map(|b| Probe { branch: b, x: -0.5 * length }).collect();
            let observers = Observers {
                sample_every: *sample_every,
                probes,
                lyapunov: *lyapunov,
                contamination: ContaminationPolicy::Warn,
                ..Observers::default()
            };
            let series = sim.run(&mut state, *t_final, &observers)?;
            if let Some(w) = &series.contamination {
                log::warn!("front reached the far end of branch {} at t = {:.3}; enlarge --L", w.branch, w.time);
            }
            artifacts.push(output::write_time_series(out, &series)?);
            artifacts.push(output::write_state(out, &state)?);
        }
        ResolvedConfig::Classify { network } => {
            #[derive(Serialize)]
            struct Prediction {
                case: riverkpp::stationary::CaseTag,
                prediction: riverkpp::classifier::PersistenceState,
            }
            let p = Prediction { case: classify_case(network)?, prediction: classify_parameters(network)? };
            println!("{}: {}", p.case, p.prediction);
            artifacts.push(write_json(out, "prediction.json", &p)?);
        }
        ResolvedConfig::Verify { network, sim } => {
            let report = verify_trichotomy(network, sim)?;
            artifacts.push(write_json(out, "report.json", &report)?);
            println!("predicted {}, observed {}: {}", report.predicted, report.observed, if report.pass { "pass" } else { "FAIL" });
            if !report.pass {
                bail!("verification failed (see report.json)");
            }
        }
        ResolvedConfig::Sweep { grid, simulate, sim, workers } => {
            let spec = SweepSpec::parse(grid)?;
            let points = spec.points();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(*workers).build()?;
            let sim_opts = simulate.then_some(sim);
            let rows: Vec<_> = pool.install(|| points.par_iter().map(|b| sweep_point(spec.family, b, sim_opts)).collect());
            artifacts.push(output::write_sweep(out, spec.family, &rows)?);
        }
    }
    Ok(artifacts)
}
