use clap::Parser;
use ordinalflow_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ORDINALFLOW_LOG", "warn"))
        .format_timestamp(None)
        .init();
    std::process::exit(run(Cli::parse()));
}
