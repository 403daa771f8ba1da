//! Command-line entry point: scenario generation, simulation runs and
//! analysis, tied into reproducible run directories.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tollsim_core::generate::{self, GridCityParams, PigouParams, TwoRouteParams};
use tollsim_core::scenario::{analyze_run, compare_runs, run_scenario, Overrides, RunDir};
use tollsim_core::SimError;

#[derive(Parser)]
#[command(
    name = "tollsim",
    version,
    about = "Agent-based transport simulation with co-evolutionary replanning and cordon tolling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioKind {
    /// Grid city with a central cordon region and transit lines.
    GridCity,
    /// Two-route bottleneck network for equilibrium experiments.
    Pigou,
    /// Corridor with a tolled through route and an untolled bypass.
    TwoRouteCordon,
}

#[derive(Subcommand)]
enum Command {
    /// Writes network/population/transit/config files for a synthetic scenario.
    Generate {
        kind: ScenarioKind,
        /// Directory the scenario files are written to.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        persons: Option<usize>,
        /// Grid side length (grid-city only).
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Runs the co-evolutionary loop for a scenario config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Run directory (overrides the config's output path).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the toll scheme with a named preset (e.g. nyc-cbd-base).
        #[arg(long)]
        toll_preset: Option<String>,
        /// Force an empty toll scheme (baseline runs).
        #[arg(long, conflicts_with = "toll_preset")]
        no_toll: bool,
    },
    /// Writes all analysis outputs for a completed run directory.
    Analyze {
        run_dir: PathBuf,
        /// Hour for the GeoJSON congestion map.
        #[arg(long, default_value_t = 17)]
        hour: usize,
    },
    /// Compares a baseline run against a policy run.
    Compare {
        baseline: PathBuf,
        policy: PathBuf,
        #[arg(long, default_value = "comparison")]
        out: PathBuf,
        /// Compare even when seeds or networks differ.
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints usage errors itself; keep exit code 1 for them.
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            match err {
                SimError::Iteration { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Generate {
            kind,
            out,
            persons,
            size,
            seed,
            iterations,
        } => {
            let config = match kind {
                ScenarioKind::GridCity => {
                    let mut params = GridCityParams::default();
                    if let Some(p) = persons {
                        params.persons = p;
                    }
                    if let Some(s) = size {
                        params.size = s;
                    }
                    if let Some(s) = seed {
                        params.seed = s;
                    }
                    if let Some(n) = iterations {
                        params.iterations = n;
                    }
                    generate::grid_city(&out, &params)?
                }
                ScenarioKind::Pigou => {
                    let mut params = PigouParams::default();
                    if let Some(p) = persons {
                        params.persons = p;
                    }
                    if let Some(s) = seed {
                        params.seed = s;
                    }
                    if let Some(n) = iterations {
                        params.iterations = n;
                    }
                    generate::pigou(&out, &params)?
                }
                ScenarioKind::TwoRouteCordon => {
                    let mut params = TwoRouteParams::default();
                    if let Some(p) = persons {
                        params.persons = p;
                    }
                    if let Some(s) = seed {
                        params.seed = s;
                    }
                    if let Some(n) = iterations {
                        params.iterations = n;
                    }
                    generate::two_route_cordon(&out, &params)?
                }
            };
            println!("scenario written, config at {}", config.display());
            Ok(())
        }
        Command::Run {
            config,
            seed,
            iterations,
            out,
            toll_preset,
            no_toll,
        } => {
            let overrides = Overrides {
                seed,
                iterations,
                output: out,
                toll_preset,
                no_toll,
            };
            let run_dir = run_scenario(&config, &overrides)?;
            println!("run complete: {}", run_dir.display());
            Ok(())
        }
        Command::Analyze { run_dir, hour } => {
            let run = RunDir::load(&run_dir)?;
            let out = analyze_run(&run, hour)?;
            println!("analysis written to {}", out.display());
            Ok(())
        }
        Command::Compare {
            baseline,
            policy,
            out,
            force,
        } => {
            let out = compare_runs(&baseline, &policy, force, &out)?;
            println!("comparison written to {}", out.display());
            Ok(())
        }
    }
}
