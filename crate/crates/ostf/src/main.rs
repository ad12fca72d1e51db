use std::process::ExitCode;

use clap::Parser;
use ostf::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.render(cli.pretty).trim_end());
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
