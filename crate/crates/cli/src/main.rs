mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use heavytail_pa::Error;

use args::{Cli, Command};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_VALIDATION),
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_VALIDATION);
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::AnalyticPmf(a) => commands::analytic_pmf(a),
        Command::SampleLimit(a) => commands::sample_limit(a),
        Command::Density(a) => commands::density(a),
        Command::Angular(a) => commands::angular(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Compare(a) => commands::compare(a),
        Command::Verify(a) => commands::verify(a).map(|pass| {
            println!("{}", if pass { "PASS" } else { "FAIL" });
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

fn main() -> ExitCode {
    run(std::env::args_os())
}
