//! `proact-service`: serve live sessions over TCP.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use log::info;

use proact_service::{Server, Service, ServiceConfig};

#[derive(Parser)]
#[command(name = "proact-service", version, about = "Live session host")]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "PROACT_LISTEN", default_value = "127.0.0.1:7878")]
    listen: String,
    /// Seconds without requests before a session is closed; 0 disables.
    #[arg(long, env = "PROACT_IDLE_TIMEOUT", default_value_t = 600)]
    idle_timeout: u64,
    /// Seconds between heartbeats.
    #[arg(long, default_value_t = 5)]
    heartbeat: u64,
    /// Directory for input traces of closed sessions.
    #[arg(long, env = "PROACT_TRACE_DIR")]
    trace_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let cfg = ServiceConfig {
        idle_timeout: (args.idle_timeout > 0).then(|| Duration::from_secs(args.idle_timeout)),
        heartbeat: Duration::from_secs(args.heartbeat.max(1)),
        trace_dir: args.trace_dir,
    };
    let server = match Server::bind(&args.listen, Arc::new(Service::new(cfg))) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot listen on {}: {e}", args.listen);
            return ExitCode::from(1);
        }
    };
    info!(
        "listening on {}",
        server.local_addr().map(|a| a.to_string()).unwrap_or(args.listen)
    );
    match server.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
