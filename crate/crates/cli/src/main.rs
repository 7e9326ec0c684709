use clap::Parser;
use cobound_cli::config::Cli;

fn main() {
    let cli = Cli::parse();
    std::process::exit(cobound_cli::run(&cli));
}
