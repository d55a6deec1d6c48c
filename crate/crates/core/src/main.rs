//! Binary entry point: parse arguments, dispatch, map errors to exit codes.

use clap::Parser;
use mirk_hnn::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    };
    std::process::exit(code);
}
