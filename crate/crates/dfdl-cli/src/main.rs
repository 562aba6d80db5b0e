//! Exit codes: 0 success, 1 usage or configuration errors, 2 I/O
//! failures.

use clap::Parser;

use dfdl_cli::args::Cli;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version arrive here too; they are not errors.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = dfdl_cli::run(&cli) {
        eprintln!("error: {err}");
        let code = match err {
            dfdl::Error::Io { .. } => 2,
            _ => 1,
        };
        std::process::exit(code);
    }
}
