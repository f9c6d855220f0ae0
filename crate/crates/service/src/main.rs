use clap::Parser;
use cropchain_service::cli::{run, Cli};
use tracing_subscriber::EnvFilter;

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let line = format!("{e:#}").replace('\n', " ");
        eprintln!("error: {line}");
        std::process::exit(1);
    }
}
