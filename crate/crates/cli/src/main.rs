use clap::Parser;
use roadrl_cli::{run, Cli};

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("roadrl: {e}");
        std::process::exit(e.exit_code());
    }
}
