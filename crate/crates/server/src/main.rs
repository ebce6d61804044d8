use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use precplan_server::{app, ServerConfig};
use tracing_subscriber::EnvFilter;

/// Serve the planning REST API.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// JSON server config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured listen address.
    #[arg(long)]
    listen: Option<String>,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let mut config = match &args.config {
        Some(path) => match ServerConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("planning-server: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => ServerConfig::default(),
    };
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    if config.data_dir.is_none() {
        config.data_dir = std::env::var_os("PRECPLAN_DATA_DIR").map(PathBuf::from);
    }
    config.llm = config.llm.with_env();
    let listen = config.listen.clone();
    let router = match app(config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("planning-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    let listener = match tokio::net::TcpListener::bind(&listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("planning-server: cannot bind {listen}: {e}");
            return ExitCode::FAILURE;
        }
    };
    tracing::info!(%listen, "serving");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    if let Err(e) = axum::serve(listener, router).with_graceful_shutdown(shutdown).await {
        eprintln!("planning-server: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
