//! Command-line front end for the CV-QKD saturation-attack simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cvqkd_sim::harness::{
    default_out_dir, reproduce_figure, run_scenario, Scenario, ScenarioConfig, OUT_DIR_ENV,
};
use cvqkd_sim::units::SystemParams;

#[derive(Parser)]
#[command(
    name = "cvqkd-sim",
    about = "Simulate the homodyne-saturation attack on GMCS CV-QKD and its post-selection counter-measures",
    version
)]
struct Cli {
    /// Output directory (defaults to $CVQKD_SIM_OUT or ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Base RNG seed
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Worker-pool size for grid scenarios
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a JSON config file
    Simulate {
        /// Path to the scenario config (JSON)
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-emit one of the standard figure datasets (2..=6)
    ReproduceFigure {
        /// Figure id
        id: u8,
    },
    /// One attack run with a full JSON report
    Attack {
        #[arg(long)]
        distance_km: f64,
        /// Displacement at Bob (sqrt shot-noise units)
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Explicit amplitude gain g (overrides --strategy)
        #[arg(long)]
        gain: Option<f64>,
        /// 1 = fixed G = 2, 2 = unbiased-transmission gain
        #[arg(long, default_value_t = 1)]
        strategy: u8,
        /// Pulses to simulate
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        /// Also export the raw quadrature block as CSV
        #[arg(long, default_value_t = false)]
        export_block: bool,
        /// Modulation variance override (defaults to the distance schedule)
        #[arg(long)]
        va: Option<f64>,
    },
    /// Key-rate sweep over distance at fixed excess noise
    Keyrate {
        #[arg(long)]
        distance_km: Option<f64>,
        /// Excess noise (defaults to the system technical noise)
        #[arg(long)]
        xi: Option<f64>,
    },
    /// Gaussian post-selection of an x_b sample file
    Postselect {
        /// CSV with an x_b column
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the full acceptance suite (one pass/fail line per criterion)
    Acceptance,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": e.to_string()}));
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> cvqkd_sim::Result<bool> {
    let out_dir = cli.out.clone().unwrap_or_else(default_out_dir);
    let base = ScenarioConfig {
        seed: cli.seed,
        threads: cli.threads,
        out_dir: out_dir.clone(),
        ..Default::default()
    };
    let output = match cli.command {
        Command::Simulate { config } => {
            let body = std::fs::read_to_string(&config)?;
            let mut cfg: ScenarioConfig = serde_json::from_str(&body)?;
            // command line overrides the file for seed/threads/out
            if cli.seed != 1 {
                cfg.seed = cli.seed;
            }
            if cli.threads != 1 {
                cfg.threads = cli.threads;
            }
            if let Some(out) = cli.out {
                cfg.out_dir = out;
            } else if std::env::var_os(OUT_DIR_ENV).is_some() {
                cfg.out_dir = default_out_dir();
            }
            run_scenario(&cfg)?
        }
        Command::ReproduceFigure { id } => reproduce_figure(id, cli.seed, out_dir)?,
        Command::Attack {
            distance_km,
            delta,
            gain,
            strategy,
            n,
            export_block,
            va,
        } => run_scenario(&ScenarioConfig {
            scenario: Scenario::AttackRun,
            distance_km,
            delta: Some(delta),
            gain,
            strategy,
            n,
            export_block,
            va,
            system: SystemParams::default(),
            ..base
        })?,
        Command::Keyrate { distance_km, xi } => run_scenario(&ScenarioConfig {
            scenario: Scenario::KeyrateSweep,
            distance_km: distance_km.unwrap_or(25.0),
            xi,
            ..base
        })?,
        Command::Postselect { input } => run_scenario(&ScenarioConfig {
            scenario: Scenario::Postselect,
            input: Some(input),
            ..base
        })?,
        Command::Acceptance => run_scenario(&ScenarioConfig {
            scenario: Scenario::Acceptance,
            ..base
        })?,
    };
    println!("summary: {}", output.summary_path.display());
    Ok(output.success)
}
