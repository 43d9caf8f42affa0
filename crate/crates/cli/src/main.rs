//! `critform` command-line front end. Argument parsing only; the work happens
//! in `critform::io::run`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use critform::io::{self, Command, Format, HChoice, Input, JobConfig, Options};
use critform::weak::{self, Mode};
use critform::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CommandArg {
    Classify,
    Green,
    HardyWeight,
    GroundState,
    AlphaProfile,
    Decay,
    VerifyDecay,
    Excessive,
    Harnack,
    Check,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Classify => Command::Classify,
            CommandArg::Green => Command::Green,
            CommandArg::HardyWeight => Command::HardyWeight,
            CommandArg::GroundState => Command::GroundState,
            CommandArg::AlphaProfile => Command::AlphaProfile,
            CommandArg::Decay => Command::Decay,
            CommandArg::VerifyDecay => Command::VerifyDecay,
            CommandArg::Excessive => Command::Excessive,
            CommandArg::Harnack => Command::Harnack,
            CommandArg::Check => Command::Check,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Hardy,
    Poincare,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HArg {
    One,
    Resolvent,
}

/// Criticality toolkit for discrete Schrödinger forms on weighted graphs.
///
/// Reports are JSON on stdout (or `--output`). Exit status is 0 on success,
/// 2 for inconclusive verdicts and 1 on errors, which are reported as a JSON
/// object `{"error": {"code", "message"}}` on stderr.
#[derive(Debug, Parser)]
#[command(name = "critform", version)]
struct Cli {
    command: CommandArg,

    /// Graph document (JSON).
    #[arg(long, conflicts_with_all = ["family", "kernel"])]
    graph: Option<PathBuf>,
    /// Built-in family: lattice, birth_death or dirichlet_path.
    #[arg(long, conflicts_with = "kernel")]
    family: Option<String>,
    /// Family parameter `key=value`, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Dense kernel matrix (CSV, one target point per row).
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Target measure ν, one value per kernel row.
    #[arg(long, requires = "kernel")]
    nu: Option<PathBuf>,
    /// Source measure µ, one value per kernel column.
    #[arg(long, requires = "kernel")]
    mu: Option<PathBuf>,
    /// Exponent of the kernel operator.
    #[arg(long, default_value_t = 2.0)]
    p: f64,

    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override `key=value`; keys: cap, excessivity, green, gs, lambda.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tolerances: Vec<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Record wall time in the report.
    #[arg(long)]
    timing: bool,

    /// Root vertex when classifying a single graph.
    #[arg(long)]
    root: Option<String>,
    /// Source vertex of `g = δ_source`; `g = 1` otherwise.
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    max_radius: Option<usize>,
    #[arg(long, default_value_t = 10)]
    window_radius: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Hardy)]
    mode: ModeArg,
    /// Comparison function for weak inequalities.
    #[arg(long, value_enum, default_value_t = HArg::One)]
    h: HArg,
    /// `r` values: comma list or `lo:hi:n` for a geometric grid.
    #[arg(long)]
    r_grid: Option<String>,
    /// `t` values: comma list or `lo:hi:n`.
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 50)]
    starts: usize,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// `alpha-profile` report or CSV table consumed by `decay`.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// `decay` report consumed by `verify-decay`.
    #[arg(long)]
    decay: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    target_mass: f64,
    /// Comma-separated vertex ids normalizing the excessive function.
    #[arg(long)]
    reference: Option<String>,
}

fn key_value(raw: &str) -> Result<(String, String), Error> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Config(format!("expected key=value, got {raw:?}")))
}

fn grid(raw: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Config(format!("cannot parse grid {raw:?}"));
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        return Ok(weak::log_grid(lo, hi, n));
    }
    raw.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
}

fn job_from(cli: &Cli) -> Result<JobConfig, Error> {
    let input = if let Some(path) = &cli.graph {
        Input::Graph { path: path.clone() }
    } else if let Some(name) = &cli.family {
        let params = cli.params.iter().map(|p| key_value(p)).collect::<Result<BTreeMap<_, _>, _>>()?;
        Input::Family {
            name: name.clone(),
            params,
        }
    } else if let Some(matrix) = &cli.kernel {
        Input::Kernel {
            matrix: matrix.clone(),
            nu: cli.nu.clone(),
            mu: cli.mu.clone(),
            p: cli.p,
        }
    } else {
        Input::None
    };
    if !cli.params.is_empty() && cli.family.is_none() {
        return Err(Error::Config("--param needs --family".into()));
    }
    let mut tolerances = BTreeMap::new();
    for raw in &cli.tolerances {
        let (k, v) = key_value(raw)?;
        let value: f64 = v
            .parse()
            .map_err(|_| Error::Config(format!("tolerance {k}={v} is not a number")))?;
        tolerances.insert(k, value);
    }
    let mut job = JobConfig::new(cli.command.into(), input);
    job.seed = cli.seed;
    job.tolerances = tolerances;
    job.env = io::collect_env(std::env::vars());
    job.format = match cli.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    job.timing = cli.timing;
    job.options = Options {
        root: cli.root.clone(),
        source: cli.source.clone(),
        max_radius: cli.max_radius,
        window_radius: cli.window_radius,
        mode: match cli.mode {
            ModeArg::Hardy => Mode::Hardy,
            ModeArg::Poincare => Mode::Poincare,
        },
        h: match cli.h {
            HArg::One => HChoice::One,
            HArg::Resolvent => HChoice::Resolvent,
        },
        r_grid: cli.r_grid.as_deref().map(grid).transpose()?,
        t_grid: cli.t_grid.as_deref().map(grid).transpose()?,
        samples: cli.samples,
        starts: cli.starts,
        iterations: cli.iterations,
        profile: cli.profile.clone(),
        decay: cli.decay.clone(),
        target_mass: cli.target_mass,
        reference: cli
            .reference
            .as_ref()
            .map(|r| r.split(',').map(|s| s.trim().to_string()).collect()),
    };
    Ok(job)
}

fn configure_threads(job: &JobConfig) -> Result<(), Error> {
    if let Some(raw) = job.env.get(io::ENV_THREADS) {
        let n: usize = raw
            .parse()
            .map_err(|_| Error::Config(format!("{}={raw} is not a thread count", io::ENV_THREADS)))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<i32, Error> {
    let job = job_from(cli)?;
    configure_threads(&job)?;
    let outcome = io::run(&job)?;
    let text = match job.format {
        Format::Json => outcome.report.to_json(),
        Format::Csv => outcome.table.as_ref().map(|t| t.to_csv()).unwrap_or_default(),
    };
    match &cli.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(outcome.exit_code)
}

fn fail(error: &Error) -> ExitCode {
    eprintln!("{}", io::error_object(error));
    ExitCode::from(io::exit_code_for(error) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail(&Error::Config(e.to_string().trim().to_string()));
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => fail(&e),
    }
}
