use clap::Parser;

use fracflow::cli::{configure_threads, main_with, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(f) = configure_threads() {
        eprintln!("{}", f.to_json());
        std::process::exit(f.code);
    }
    std::process::exit(main_with(cli));
}
