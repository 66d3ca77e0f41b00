use clap::Parser;
use uqbench_cli::{init_threads, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(err) = init_threads().and_then(|()| run(cli)) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
