use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spacelike_flow::cli;

#[derive(Debug, Parser)]
#[command(name = "spacelike-flow", version, about = "Maximal spacelike graphs by mean curvature flow")]
struct Args {
    /// Worker threads for the flow (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the solvability condition for a scenario.
    Check { scenario: String },
    /// Run the flow and write diagnostics.csv, solution.csv and report.json.
    Solve {
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid refinement study against the scenario's exact solution.
    Order {
        scenario: String,
        /// Comma separated spacings, e.g. `1/20,1/40,1/80`.
        #[arg(long, default_value = "1/20,1/40,1/80")]
        h: String,
    },
    /// Run the built-in invariant and oracle checks.
    Verify,
    /// Write every catalog scenario as a JSON file into a directory.
    Catalog { dir: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut stdout = std::io::stdout();
    let load = |s: &str| cli::load_scenario(s).map_err(|e| eprintln!("error: {e}"));
    let code = match &args.command {
        Command::Check { scenario } => match load(scenario) {
            Ok(spec) => cli::cmd_check(&spec, &mut stdout),
            Err(()) => cli::EXIT_ERROR,
        },
        Command::Solve { scenario, out } => match load(scenario) {
            Ok(spec) => cli::cmd_solve(&spec, out, args.workers, &mut stdout),
            Err(()) => cli::EXIT_ERROR,
        },
        Command::Order { scenario, h } => match (load(scenario), cli::parse_h_list(h)) {
            (Ok(spec), Ok(hs)) => cli::cmd_order(&spec, &hs, args.workers, &mut stdout),
            (_, Err(e)) => {
                eprintln!("error: {e}");
                cli::EXIT_ERROR
            }
            _ => cli::EXIT_ERROR,
        },
        Command::Verify => cli::cmd_verify(&mut stdout),
        Command::Catalog { dir } => {
            let write = || -> std::io::Result<()> {
                std::fs::create_dir_all(dir)?;
                for spec in spacelike_flow::scenario::catalog() {
                    std::fs::write(dir.join(format!("{}.json", spec.name)), spacelike_flow::scenario::emit(&spec))?;
                }
                Ok(())
            };
            match write() {
                Ok(()) => cli::EXIT_OK,
                Err(e) => {
                    eprintln!("error: {e}");
                    cli::EXIT_ERROR
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
