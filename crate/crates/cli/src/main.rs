use clap::Parser;
use kmr_cli::commands::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors exit with clap's own code 2, matching invalid config.
    let cli = Cli::parse();
    let outcome = kmr_cli::configure_threads().and_then(|()| run(cli));
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
