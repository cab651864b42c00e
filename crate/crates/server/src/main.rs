use clap::Parser;
use tracing::Level;

fn main() {
    // RUST_LOG takes a single level here (error, warn, info, debug, trace).
    let level = std::env::var("RUST_LOG")
        .ok()
        .and_then(|v| v.parse::<Level>().ok())
        .unwrap_or(Level::INFO);
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = styleprobe_server::cli::run(styleprobe_server::cli::Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
