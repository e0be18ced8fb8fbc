//! `flownav`: flow prediction, refinement, planning and tracking from the command line.
//!
//! Every command reads one JSON config (`--config`); flags override its fields. Exit
//! codes: 0 ok, 2 input or validation error, 3 solver not converged, 4 no path, 5
//! numeric failure.

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{FixtureArgs, FixtureKind, VariantSelection};
use crate::config::{parse_point, PipelineConfig};
use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "flownav",
    version,
    about = "Flow-aware navigation for micro-robots in channels"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline config; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Binary PGM mask (0 solid, 255 fluid).
    #[arg(long, global = true)]
    mask: Option<PathBuf>,
    /// Mask annotations; defaults to the mask path with a .json extension.
    #[arg(long, global = true)]
    sidecar: Option<PathBuf>,
    /// Observation CSV (x_m,y_m,vx_mps,vy_mps).
    #[arg(long, global = true)]
    obs: Option<PathBuf>,
    /// Solved MFN1 field to start from instead of solving.
    #[arg(long, global = true)]
    field: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Start position `x,y` in meters.
    #[arg(long, global = true, value_parser = parse_point, allow_hyphen_values = true)]
    start: Option<[f64; 2]>,
    /// Goal position `x,y` in meters.
    #[arg(long, global = true, value_parser = parse_point, allow_hyphen_values = true)]
    goal: Option<[f64; 2]>,
    /// Worker threads for batch runs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed for randomized fixtures.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Steady flow from the mask: field.mfn, residuals.csv, solve.json.
    Solve,
    /// Assimilate observations: refined.mfn, loss.csv, refine.json.
    Refine,
    /// Flow-aware path: plan.json, plan.svg.
    Plan {
        /// Also plan with plain path length and time both paths.
        #[arg(long)]
        euclidean: bool,
    },
    /// Lemniscate tracking run: trace.csv, metrics.json, track.svg.
    Track {
        /// FLOW_COMP, NO_COMP, OBSERVER, or `all` for one subdirectory per variant.
        #[arg(long, default_value = "FLOW_COMP", value_parser = commands::parse_variant)]
        variant: VariantSelection,
    },
    /// solve, refine, plan and navigate, with summary.json.
    Pipeline {
        #[arg(long)]
        euclidean: bool,
    },
    /// Write a synthetic channel with its sidecar and a runnable config.
    Fixture {
        #[arg(long, value_enum, default_value = "straight")]
        kind: FixtureKind,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 16)]
        height: usize,
        /// Meters per pixel.
        #[arg(long, default_value_t = 1e-4)]
        pixel_size: f64,
        /// Mean inlet speed, m/s.
        #[arg(long, default_value_t = 1e-3)]
        v_inlet: f64,
        /// Also solve the fixture and sample observations along its centerlines.
        #[arg(long)]
        observations: bool,
    },
}

fn resolve(common: &Common) -> CliResult<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let set = |dst: &mut Option<PathBuf>, src: &Option<PathBuf>| {
        if src.is_some() {
            dst.clone_from(src);
        }
    };
    set(&mut cfg.mask, &common.mask);
    set(&mut cfg.sidecar, &common.sidecar);
    set(&mut cfg.observations, &common.obs);
    set(&mut cfg.field, &common.field);
    set(&mut cfg.out, &common.out);
    cfg.start = common.start.or(cfg.start);
    cfg.goal = common.goal.or(cfg.goal);
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = resolve(&cli.common)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Refine => commands::refine(&cfg),
        Command::Plan { euclidean } => commands::plan(&cfg, euclidean),
        Command::Track { variant } => commands::track(&cfg, variant, cli.common.jobs),
        Command::Pipeline { euclidean } => commands::pipeline(&cfg, euclidean),
        Command::Fixture {
            kind,
            width,
            height,
            pixel_size,
            v_inlet,
            observations,
        } => commands::fixture(
            &cfg,
            &FixtureArgs {
                kind,
                width,
                height,
                pixel_size,
                v_inlet,
                seed: cli.common.seed,
                observations,
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            log::debug!("exit code {} ({})", e.exit_code(), e.code());
            ExitCode::from(e.exit_code())
        }
    }
}
