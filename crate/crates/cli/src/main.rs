//! Exit codes: 0 clean, 1 a verification verdict failed or the Monte Carlo
//! variance gate tripped, 2 anything that prevented the run (bad flags,
//! domain errors, io). Clap's own usage errors also exit 2.

mod args;
mod run;

use clap::Parser;
use rbm_core::Error;

fn main() {
    let cli = args::Cli::parse();
    match run::dispatch(cli.command) {
        Ok(run::Outcome::Clean) => {}
        Ok(run::Outcome::SuiteFailed) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Variance { .. } => 1,
                _ => 2,
            };
            std::process::exit(code);
        }
    }
}
