use std::process::ExitCode;

use clap::Parser;
use moyodft_cli::{run, Cli, MAX_BASIS_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let max_basis = std::env::var(MAX_BASIS_ENV).ok();
    let mut stdout = std::io::stdout().lock();
    match run(&cli, max_basis.as_deref(), &mut stdout) {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(e) => {
            eprintln!("moyodft: {e}");
            ExitCode::from(1)
        }
    }
}
