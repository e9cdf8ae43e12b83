use std::process::ExitCode;

use clap::Parser;

use ibflow::cli::{execute, exit_status, Cli, EXIT_VALIDATION};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            if !cli.quiet {
                println!("{}", outcome.summary);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ibflow: {e}");
            if e.is_validation() && cli.command.parse::<ibflow::cli::Command>().is_err() {
                eprintln!("usage: ibflow <command> --config PATH [--jobs N] [--out DIR] [--quiet]");
            }
            ExitCode::from(exit_status(&e))
        }
    }
}
