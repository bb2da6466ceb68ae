use std::io;
use std::process::ExitCode;

use clap::Parser;

use edgedis_core::experiment::{run_election_benchmark, run_sweep, run_uniqueness_scenario, Cli, Invocation};
use edgedis_core::Error;

fn run(inv: Invocation) -> Result<bool, Error> {
    match inv {
        Invocation::Sweep(spec) => {
            let report = run_sweep(&spec)?;
            if spec.out.is_none() {
                report.write_csv(io::stdout().lock())?;
            }
            let stalled = report.any_stalled();
            if stalled {
                eprintln!("at least one run stalled");
            }
            Ok(!stalled)
        }
        Invocation::Scenario { trace } => {
            let verdict = run_uniqueness_scenario();
            print!("{verdict}");
            if let Some(path) = trace {
                std::fs::write(path, &verdict.trace)?;
            }
            if !verdict.passed() {
                eprint!("{}", verdict.trace);
            }
            Ok(verdict.passed())
        }
        Invocation::ElectionBench { spec, out } => {
            let report = run_election_benchmark(&spec)?;
            match out {
                Some(path) => report.write_csv(std::fs::File::create(path)?)?,
                None => report.write_csv(io::stdout().lock())?,
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = cli.into_invocation().and_then(run);
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
