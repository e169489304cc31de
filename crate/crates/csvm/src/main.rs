use clap::Parser;

use csvm::cli::{self, CliArgs};

fn main() {
    let args = CliArgs::parse();
    if let Err(err) = cli::run(args.command) {
        eprintln!("error: {err}");
        std::process::exit(cli::exit_code(&err));
    }
}
