use clap::Parser;
use distdiff::cli::{run_cli, Cli};

fn main() {
    let cli = Cli::parse();
    let out = run_cli(&cli);
    print!("{}", out.stdout);
    std::process::exit(out.exit_code);
}
