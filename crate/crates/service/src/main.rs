use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use stsem_service::{router, AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "stsem-server", about = "Serve relevance-feedback sessions over HTTP")]
struct Args {
    #[arg(long, env = "STSEM_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Directory of corpus files (`*.json`) loaded at startup.
    #[arg(long, env = "STSEM_CORPUS_DIR")]
    corpus_dir: Option<PathBuf>,
    /// Directory where session snapshots are persisted and restored from.
    #[arg(long, env = "STSEM_SESSION_DIR")]
    session_dir: Option<PathBuf>,
    #[arg(long = "default-r", env = "STSEM_DEFAULT_R", default_value_t = stsem_core::learner::DEFAULT_LEVELS)]
    default_r: usize,
    #[arg(long = "default-beam", env = "STSEM_DEFAULT_BEAM", default_value_t = 0)]
    default_beam: usize,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    if args.default_r < 2 {
        anyhow::bail!("--default-r must be at least 2");
    }
    let state = Arc::new(AppState::new(ServiceConfig {
        default_levels: args.default_r,
        default_beam_width: args.default_beam,
        session_dir: args.session_dir.clone(),
    }));
    if let Some(dir) = &args.corpus_dir {
        let ids = state
            .load_corpus_dir(dir)
            .with_context(|| format!("loading corpora from {}", dir.display()))?;
        eprintln!("loaded {} corpora: {}", ids.len(), ids.join(", "));
    }
    if let Some(dir) = &args.session_dir {
        std::fs::create_dir_all(dir)?;
        let (restored, skipped) = state.restore_sessions(dir)?;
        eprintln!("restored {} sessions", restored.len());
        for s in skipped {
            eprintln!("skipped {s}");
        }
    }
    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
