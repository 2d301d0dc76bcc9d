use clap::Parser;
use panoptic::cli::{run, Cli};

fn main() {
    std::process::exit(run(&Cli::parse()));
}
