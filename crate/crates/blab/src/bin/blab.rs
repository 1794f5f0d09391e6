//! Command-line front end: runs analysis and certification scenarios and
//! writes machine-checkable reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use blab::report::{run_scenario, Action, Scenario};

#[derive(Parser)]
#[command(
    name = "blab",
    about = "Blender laboratory for coindex-1 heterodimensional cycles",
    version
)]
struct Cli {
    /// classify | covering | verify-blender | sweep-mu | search | report-all
    action: String,
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: "out").
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the search bound.
    #[arg(long)]
    k_max: Option<u64>,
    /// Override the number of verification trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the refinement depth.
    #[arg(long)]
    depth: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(action) = Action::parse(&cli.action) else {
        eprintln!(
            "error: unknown action {:?} (expected classify, covering, verify-blender, sweep-mu, search, or report-all)",
            cli.action
        );
        return ExitCode::from(1);
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let mut scenario = match Scenario::from_json(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: invalid config {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        scenario.options.seed = seed;
    }
    if let Some(k_max) = cli.k_max {
        scenario.options.k_max = k_max;
    }
    if let Some(trials) = cli.trials {
        scenario.options.trials = trials;
    }
    if let Some(depth) = cli.depth {
        scenario.options.depth = depth;
    }
    match run_scenario(&scenario, &[action], &cli.out) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.all_certified {
                println!("all requested certifications passed");
                ExitCode::from(0)
            } else {
                eprintln!("certification failure (see reports)");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
