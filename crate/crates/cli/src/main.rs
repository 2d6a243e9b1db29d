use std::process::ExitCode;

use clap::Parser;
use cyclefv_cli::{configure_threads, run, usage, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let result = configure_threads().and_then(|()| run(cli, &mut std::io::stdout(), &mut std::io::stderr()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\n{}", usage(name));
                eprintln!("Run `cyclefv {name} --help` for details.");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
