use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ratchet_cli::{
    run_experiment, CliError, Experiment, ExperimentConfig, Format, InitialState, EXIT_THRESHOLD,
};
use ratchet_core::FScaling;

#[derive(Debug, Parser)]
#[command(
    name = "ratchet",
    version,
    about = "Muller's ratchet under tournament selection: experiments and reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Quasi-stationary profile from the recursion.
    Profile,
    /// Level-mass ODE from a small initial mass.
    Ode,
    /// Minimal load on decorated Yule trees.
    Yule,
    /// Minimal class of a branching random walk.
    Brw,
    /// Galton-Watson extinction and leaf generating function.
    Gw,
    /// Distributional fixed point of the minimal load.
    Fixedpoint,
    /// Forward Moran simulation: clicks and profile.
    Forward,
    /// Hierarchy of logistic competitions and level-0 extinction times.
    Dual,
    /// Graphical representation: forward transport against the backward graph.
    Graphical,
    /// Cross-route comparison of the profile estimates.
    Compare,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Profile => Experiment::Profile,
            Command::Ode => Experiment::Ode,
            Command::Yule => Experiment::Yule,
            Command::Brw => Experiment::Brw,
            Command::Gw => Experiment::Gw,
            Command::Fixedpoint => Experiment::Fixedpoint,
            Command::Forward => Experiment::Forward,
            Command::Dual => Experiment::Dual,
            Command::Graphical => Experiment::Graphical,
            Command::Compare => Experiment::Compare,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Monomorphic,
    Profile,
}

#[derive(Debug, clap::Args)]
struct Flags {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Sets mu to rho * alpha.
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    n: Option<u64>,
    #[arg(long, global = true, conflicts_with = "f_family")]
    f_value: Option<f64>,
    /// `log:C` for C ln N or `power:C,GAMMA` for C N^GAMMA.
    #[arg(long, global = true)]
    f_family: Option<String>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    t_max: Option<f64>,
    #[arg(long, global = true)]
    burn_in: Option<f64>,
    #[arg(long, global = true)]
    snapshot_grid: Option<f64>,
    #[arg(long, global = true)]
    kmax: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, global = true, value_enum)]
    init: Option<InitArg>,
    /// `N / f(N)` values for the extinction-time sweep (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    n_over_f: Option<Vec<f64>>,
    #[arg(long, global = true)]
    joint_draws: Option<usize>,
    #[arg(long, global = true)]
    forward_reps: Option<usize>,
    /// Long-format route file for `compare`; repeat for each route file.
    #[arg(long = "input", global = true)]
    inputs: Vec<PathBuf>,
}

fn parse_family(s: &str) -> Result<FScaling, CliError> {
    let bad = || {
        CliError::Config(format!(
            "cannot parse f family `{s}`; use log:C or power:C,GAMMA"
        ))
    };
    let (name, args) = s.split_once(':').ok_or_else(bad)?;
    let nums = args
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad())?;
    match (name, nums.as_slice()) {
        ("log", [c]) => Ok(FScaling::Log { c: *c }),
        ("power", [c, gamma]) => Ok(FScaling::Power {
            c: *c,
            gamma: *gamma,
        }),
        _ => Err(bad()),
    }
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, CliError> {
    let experiment = Experiment::from(cli.command);
    let f = cli.flags;
    let mut cfg = match &f.config {
        Some(path) => ExperimentConfig::from_file(path, Some(experiment))?,
        None => ExperimentConfig::new(experiment),
    };
    let p = &mut cfg.params;
    if let Some(v) = f.alpha {
        p.alpha = v;
    }
    if let Some(v) = f.mu {
        p.mu = v;
        p.rho = None;
    }
    if f.rho.is_some() {
        p.rho = f.rho;
    }
    if let Some(v) = f.n {
        p.n = v;
    }
    if let Some(v) = f.f_value {
        p.f = FScaling::Value { value: v };
    }
    if let Some(s) = &f.f_family {
        p.f = parse_family(s)?;
    }
    if f.reps.is_some() {
        cfg.reps = f.reps;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if f.t_max.is_some() {
        cfg.t_max = f.t_max;
    }
    if f.burn_in.is_some() {
        cfg.burn_in = f.burn_in;
    }
    if f.snapshot_grid.is_some() {
        cfg.snapshot_grid = f.snapshot_grid;
    }
    if let Some(v) = f.kmax {
        cfg.kmax = v;
    }
    if let Some(v) = f.out {
        cfg.out_dir = v;
    }
    if let Some(v) = f.format {
        cfg.format = match v {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    if let Some(v) = f.init {
        cfg.init = match v {
            InitArg::Monomorphic => InitialState::Monomorphic,
            InitArg::Profile => InitialState::Profile,
        };
    }
    if let Some(v) = f.n_over_f {
        cfg.n_over_f = v;
    }
    if let Some(v) = f.joint_draws {
        cfg.joint_draws = v;
    }
    if let Some(v) = f.forward_reps {
        cfg.forward_reps = v;
    }
    if !f.inputs.is_empty() {
        cfg.inputs = f.inputs;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = build_config(cli).and_then(|cfg| run_experiment(&cfg).map(|o| (cfg, o)));
    match outcome {
        Ok((cfg, o)) => {
            for f in &o.files {
                println!("{}", cfg.out_dir.join(&f.name).display());
            }
            if o.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "compare: deviation above threshold: {}",
                    o.summary["failures"]
                );
                ExitCode::from(EXIT_THRESHOLD as u8)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
