//! Command-line front end: config parsing, output files and exit codes.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;

use args::{Cli, Command};
pub use error::CliError;

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analytic(a) => commands::analytic(a),
        Command::Scenario(a) => commands::scenario(a),
        Command::ScalingSweep(a) => commands::sweep(a),
    }
}

impl Cli {
    pub fn out_dir(&self) -> &std::path::Path {
        match &self.command {
            Command::Simulate(a) => &a.common.out,
            Command::Analytic(a) => &a.common.out,
            Command::Scenario(a) => &a.common.out,
            Command::ScalingSweep(a) => &a.common.out,
        }
    }
}
