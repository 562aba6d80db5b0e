//! Library face of the dfdl binary: flag parsing, the four subcommands,
//! and report emission, kept out of main.rs so tests can drive the same
//! code the binary runs.

pub mod args;
pub mod commands;
pub mod report;

use args::{Cli, Command};

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> dfdl::Result<()> {
    match &cli.command {
        Command::Train(args) => commands::cmd_train(args),
        Command::Classify(args) => {
            println!("{}", commands::cmd_classify(args)?);
            Ok(())
        }
        Command::Eval(args) => {
            print!("{}", commands::cmd_eval(args)?.to_text());
            Ok(())
        }
        Command::Synth(args) => commands::cmd_synth(args),
    }
}
