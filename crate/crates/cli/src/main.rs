mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::{CliError, CmdResult};
use config::{ConfigError, RunConfig};
use output::{ManifestInfo, Staging};

/// Tensegrity shell collision and re-orientation toolkit.
#[derive(Parser)]
#[command(name = "tenseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run configuration (JSON). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo samples (per scale factor for scale-study).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Collision speed, m/s.
    #[arg(long, global = true)]
    speed: Option<f64>,
    /// Comma-separated scale factors.
    #[arg(long = "scale-list", global = true, value_delimiter = ',')]
    scale_list: Option<Vec<f64>>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Collide in the default orientations and check the design limits.
    DesignCheck,
    /// Collide in the configured orientations and write the traces.
    Collide,
    /// Random-orientation comparison of tensegrity and guard.
    Montecarlo,
    /// Repeat the comparison over geometric scale factors.
    ScaleStudy,
    /// Face graph, shortest rotation paths and payload margin.
    ReorientPlan,
    /// Closed-loop pivot simulation of the planned rotations.
    PivotSim,
    /// Torque-to-thrust error rates of the three converters.
    ThrustMap,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::DesignCheck => "design-check",
            Self::Collide => "collide",
            Self::Montecarlo => "montecarlo",
            Self::ScaleStudy => "scale-study",
            Self::ReorientPlan => "reorient-plan",
            Self::PivotSim => "pivot-sim",
            Self::ThrustMap => "thrust-map",
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.samples {
        match cli.command {
            Command::ScaleStudy => cfg.study.scale_samples = n,
            _ => cfg.study.samples = n,
        }
    }
    if let Some(v) = cli.speed {
        cfg.collision.speed = v;
        cfg.study.speed = v;
    }
    if let Some(list) = &cli.scale_list {
        cfg.study.scale_factors = list.clone();
    }
    if let Ok(raw) = std::env::var("TENSEG_WORKERS") {
        let n = raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| ConfigError::Invalid(format!("TENSEG_WORKERS must be a positive integer, got `{raw}`")))?;
        cfg.workers = Some(n);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CmdResult {
    let cfg = resolve_config(cli)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError::Invalid(format!("cannot start {n} workers: {e}")))?;
    }
    let started = Instant::now();
    let mut staging = Staging::new(&cli.out)?;
    let config_json = cfg.canonical_json();
    staging.write("config.json", |w| w.write_all(config_json.as_bytes()))?;
    let pass = match cli.command {
        Command::DesignCheck => commands::design_check_cmd(&cfg, &mut staging),
        Command::Collide => commands::collide_cmd(&cfg, &mut staging),
        Command::Montecarlo => commands::montecarlo_cmd(&cfg, &mut staging),
        Command::ScaleStudy => commands::scale_study_cmd(&cfg, &mut staging),
        Command::ReorientPlan => commands::reorient_plan_cmd(&cfg, &mut staging),
        Command::PivotSim => commands::pivot_sim_cmd(&cfg, &mut staging),
        Command::ThrustMap => commands::thrust_map_cmd(&cfg, &mut staging),
    }?;
    let placed = staging.commit(ManifestInfo {
        command: cli.command.name(),
        seed: cfg.seed,
        config_json: &config_json,
        wall_time_s: started.elapsed().as_secs_f64(),
    })?;
    for p in placed {
        log::info!("wrote {}", p.display());
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("tenseg {}: one or more checks failed", cli.command.name());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("tenseg {}: {e}", cli.command.name());
            ExitCode::from(CliError::exit_code(&e))
        }
    }
}
