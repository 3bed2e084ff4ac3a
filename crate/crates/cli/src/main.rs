use std::process::ExitCode;

use bundle_interp_cli::{run, Cli, EXIT_INPUT};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the input-error code; --help/--version succeed.
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    ExitCode::from(run(&cli))
}
