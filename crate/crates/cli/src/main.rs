use std::io;
use std::process::ExitCode;

use clap::Parser;
use quasilocal_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    match execute(&cli, &mut stdout) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", e.summary());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
