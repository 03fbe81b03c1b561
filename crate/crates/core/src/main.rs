use clap::Parser;
use compact6::cli::{main_with, Cli};

fn main() {
    std::process::exit(main_with(Cli::parse()));
}
