//! Command-line and HTTP front ends for `rolecycle-core`.

pub mod commands;
pub mod error;
pub mod files;
pub mod server;
pub mod session;

use std::sync::Arc;

use commands::{Cli, Command};
use error::CliError;
use serde_json::Value;

/// Runs a parsed command. `serve` blocks until interrupted.
pub fn run(cli: Cli) -> Result<Value, CliError> {
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::Transitions(a) => commands::transitions(&a),
        Command::Project(a) => commands::project(&a),
        Command::Steer(a) => commands::steer(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Serve(a) => serve(&a),
    }
}

fn serve(args: &commands::ServeArgs) -> Result<Value, CliError> {
    let session = Arc::new(args.analysis().session()?);
    let addr = format!("{}:{}", args.bind, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {addr}: {e}")))?;
        eprintln!(
            "{}",
            serde_json::json!({ "listening": addr, "session": session.id, "snapshots": session.snapshots.len() })
        );
        axum::serve(listener, server::router(session))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Usage(format!("server failed: {e}")))?;
        Ok(serde_json::json!({ "stopped": true }))
    })
}
