mod cli;

use clap::Parser;

fn main() {
    let args = cli::Cli::parse();
    if let Err(err) = cli::dispatch(args) {
        if let Some(step) = cli::diverged_step(&err) {
            eprintln!("error: loss became non-finite at step {step}");
            std::process::exit(cli::EXIT_DIVERGED);
        }
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
