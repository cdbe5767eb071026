use std::process::ExitCode;

use clap::Parser;
use qkinetic::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();
    let result = execute(command, args, |seed, generated| {
        if generated {
            eprintln!("seed: {seed} (generated; pass --seed {seed} to repeat)");
        } else {
            eprintln!("seed: {seed}");
        }
    });
    match result {
        Ok(summary) => {
            eprintln!("{}: wrote {}", summary.command, summary.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
