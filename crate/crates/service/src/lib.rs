//! HTTP review service for the moderation engine.
//!
//! Serves the queue of high-risk unreviewed videos, the per-video timeline,
//! frame and audio layouts, accepts moderator reviews into a durable log and
//! retrains the filter from them.
//!
//! | method | path | notes |
//! |---|---|---|
//! | GET | `/queue?threshold=` | 409 without a corpus |
//! | GET | `/videos/{id}` | metadata, timeline, risk |
//! | GET | `/videos/{id}/frames` | scene layout |
//! | GET | `/videos/{id}/audio` | histogram and storyline |
//! | GET | `/videos/{id}/thumb/{frame}` | image, or an SVG placeholder |
//! | POST | `/videos/{id}/review` | 422 invalid, 404 unknown, 409 duplicate |
//! | POST | `/train` | 409 unless both classes are reviewed |
//! | GET | `/model` | current model metadata |
//! | GET | `/metrics?hours=` | TE / MR against corpus ground truth |
//! | GET | `/palette` | category colors |

pub mod api;
pub mod config;
pub mod error;
pub mod state;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::router;
pub use config::ServiceConfig;
pub use error::{ApiError, ServiceError};
pub use state::AppState;

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_listener(state, listener).await
}

/// Serves on an already bound listener until Ctrl-C.
pub async fn serve_listener(state: Arc<AppState>, listener: tokio::net::TcpListener) -> Result<(), ServiceError> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
