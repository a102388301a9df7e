use agrofin_cli::commands;
use agrofin_cli::config::RunConfig;
use agrofin_cli::{exit_code_for, Context};
use agrofin_core::FarmerMode;
use anyhow::bail;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

const EXIT_HELP: &str = "Exit codes:
  0  success
  1  validation failure (one or more invariants failed)
  2  config error (bad file, unknown or missing keys, bad flag values)
  3  infeasible scenario, or a sweep/figure with <90% feasible rows
  4  convergence or calibration failure";

#[derive(Parser)]
#[command(
    name = "agrofin",
    version,
    about = "Equilibrium model of a commodity market with partially integrated financial investors",
    after_help = EXIT_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file (defaults to the built-in reference scenario)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the market-integration coefficient α
    #[arg(long, global = true, value_name = "VALUE")]
    alpha: Option<f64>,

    /// Farmer expectation mode for solve/sweep
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,

    /// Quadrature grid size
    #[arg(long, global = true, value_name = "N", help = "Grid points (default 133)")]
    grid_points: Option<usize>,

    /// Grid truncation half-width in standard deviations
    #[arg(long, global = true, value_name = "K", help = "Truncation (default 4)")]
    truncation: Option<f64>,

    /// Solver tolerance for both the price and expectation iterations
    #[arg(long, global = true, value_name = "EPS", help = "Tolerance (default 1e-7)")]
    tol: Option<f64>,

    /// Worker threads for sweeps: a number or `auto`
    #[arg(long, global = true, value_name = "N|auto", default_value = "auto")]
    threads: String,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario; writes summary.json, price_schedule.csv, metrics.csv
    Solve,
    /// Comparative-statics sweep; writes sweep.csv and sweep.json
    Sweep,
    /// Emit data and a gnuplot script for one of the six figures
    Figure {
        /// Figure id, 1 through 6
        id: u8,
    },
    /// Run the full invariant suite; writes validate_report.json
    Validate,
    /// Calibrate the low-default contrast market (writes market_b.json)
    CalibrateMarketB {
        /// Target default fraction (default 0.02)
        #[arg(long)]
        target: Option<f64>,
        /// Aggregate-volatility multiplier (default 2.0)
        #[arg(long)]
        sigma_mult: Option<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Rational,
    Naive,
    Both,
}

fn build_context(cli: &Cli) -> anyhow::Result<Context> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut params = config.scenario_params();
    if let Some(alpha) = cli.alpha {
        params.alpha = alpha;
    }
    let mut grid = config.grid_config();
    if let Some(n) = cli.grid_points {
        grid.n_points = n;
    }
    if let Some(k) = cli.truncation {
        grid.truncation = k;
    }
    let mut solver = config.solver_config();
    if let Some(tol) = cli.tol {
        solver.gamma_tol = tol;
        solver.price_tol = tol;
    }
    params.validate()?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Context {
        params,
        grid,
        solver,
        out_dir,
        config,
    })
}

fn configure_threads(threads: &str) -> anyhow::Result<()> {
    if threads == "auto" {
        return Ok(());
    }
    let n: usize = threads
        .parse()
        .map_err(|_| anyhow::anyhow!("--threads takes a number or `auto`, got `{threads}`"))?;
    if n == 0 {
        bail!("--threads must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .ok();
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    configure_threads(&cli.threads)?;
    let ctx = build_context(cli)?;
    match &cli.command {
        Command::Solve => {
            let mode = match cli.mode.unwrap_or(ModeArg::Rational) {
                ModeArg::Rational => FarmerMode::Rational,
                ModeArg::Naive => FarmerMode::Naive,
                ModeArg::Both => bail!("solve takes --mode rational or naive"),
            };
            commands::run_solve(&ctx, mode)
        }
        Command::Sweep => {
            let mode = match cli.mode.unwrap_or(ModeArg::Rational) {
                ModeArg::Rational => agrofin_core::SweepMode::Rational,
                ModeArg::Naive => agrofin_core::SweepMode::Naive,
                ModeArg::Both => agrofin_core::SweepMode::Both,
            };
            commands::run_sweep_cmd(&ctx, mode)
        }
        Command::Figure { id } => commands::run_figure(&ctx, *id, cli.alpha),
        Command::Validate => commands::run_validate(&ctx),
        Command::CalibrateMarketB { target, sigma_mult } => {
            commands::run_calibrate(&ctx, *target, *sigma_mult)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => std::process::exit(code as i32),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code_for(&err) as i32);
        }
    }
}
