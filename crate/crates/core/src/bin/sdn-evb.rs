use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use sdn_evb::checker::explore::WORKERS_ENV;
use sdn_evb::run::{parse_workers, run, summary, Mode, RunError, RunOptions};
use sdn_evb::scenario::PolicyName;
use sdn_evb::RefinementLevel;

/// Explore and verify the guarded-event SDN model on a scenario.
///
/// Exit status: 0 when every verdict holds (or is only bounded), 1 when a
/// property fails, 2 on a usage or input error. The worker count for
/// exploration is read from SDN_EVB_WORKERS.
#[derive(Debug, Parser)]
#[command(name = "sdn-evb", version)]
struct Cli {
    /// simulate | explore | check | refine-check | decompose-check
    mode: Mode,
    #[arg(long)]
    scenario: PathBuf,
    /// L0..L3; defaults to the scenario's level.
    #[arg(long)]
    level: Option<RefinementLevel>,
    /// Depth bound (steps from the initial state).
    #[arg(long)]
    depth: Option<usize>,
    /// Successors expanded per state; 0 expands all.
    #[arg(long)]
    branch: Option<usize>,
    /// exhaustive | seeded | priority
    #[arg(long)]
    policy: Option<PolicyName>,
    #[arg(long)]
    seed: Option<u64>,
    /// Property file; defaults to the built-in liveness table.
    #[arg(long)]
    ltl: Option<PathBuf>,
    /// Output directory for report.json and trace files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Depth bound for standalone components in decompose-check.
    #[arg(long)]
    component_depth: Option<usize>,
    /// Embed full states in trace files.
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                RunError::EXIT_CODE as u8
            } else {
                0
            });
        }
    };
    let result = parse_workers(std::env::var(WORKERS_ENV).ok().as_deref()).and_then(|workers| {
        run(&RunOptions {
            mode: cli.mode,
            scenario: cli.scenario,
            level: cli.level,
            depth: cli.depth,
            branch: cli.branch,
            policy: cli.policy,
            seed: cli.seed,
            ltl: cli.ltl,
            out: cli.out,
            workers,
            component_depth: cli.component_depth,
            verbose: cli.verbose,
        })
    });
    match result {
        Ok(report) => {
            print!("{}", summary(&report));
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("sdn-evb: {e}");
            ExitCode::from(RunError::EXIT_CODE as u8)
        }
    }
}
