use clap::{Parser, Subcommand};
use gridscc::pulse::{pulse_delta_t, PulseParams};
use gridscc::runner::{self, RunError, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gridscc", version, about = "Gridded social cost of carbon and urban heat island runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write all reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// ECS sampling seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Validate a configuration and print it with defaults applied.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the temperature response to a CO₂ pulse.
    Pulse {
        /// Pulse year.
        #[arg(long)]
        year: i32,
        /// Last year printed.
        #[arg(long, default_value_t = 2100)]
        horizon: i32,
        /// Pulse size in GtC.
        #[arg(long, default_value_t = 1.0)]
        size: f64,
    },
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let result = runner::load_config(&config)
                .map_err(RunError::from)
                .and_then(|c| runner::run(&c, &RunOptions { out_dir: out, seed, threads }));
            match result {
                Ok(summary) => {
                    for f in &summary.files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config } => match runner::load_config(&config) {
            Ok(c) => {
                println!("{}", serde_json::to_string_pretty(&c).expect("config serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e.into()),
        },
        Command::Pulse { year, horizon, size } => {
            let params = PulseParams {
                year,
                size_gtc: size,
                ..PulseParams::default()
            };
            if let Err(e) = params.validate() {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            println!("year,elapsed,delta_t_degC");
            for y in year..=horizon.max(year) {
                println!("{y},{},{:.9e}", y - year, pulse_delta_t(&params, y));
            }
            ExitCode::SUCCESS
        }
    }
}
