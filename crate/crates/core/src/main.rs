use std::process;

use clap::error::ErrorKind;
use clap::Parser;

use bellsim::experiment::{render, resolve_invocation, run_experiment, Cli};

fn main() {
    process::exit(run());
}

// exit codes: 0 success, 1 invalid config, 2 internal invariant violation
fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let invocation = match resolve_invocation(cli) {
        Ok(invocation) => invocation,
        Err(e) => {
            eprintln!("bellsim: {e}");
            return e.exit_code();
        }
    };
    let report = match run_experiment(&invocation.config) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("bellsim: {e}");
            return e.exit_code();
        }
    };
    let rendered = match render(&report) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("bellsim: {e}");
            return e.exit_code();
        }
    };
    match invocation.out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, rendered) {
                eprintln!("bellsim: failed to write {}: {e}", path.display());
                return 2;
            }
        }
        None => print!("{rendered}"),
    }
    0
}
