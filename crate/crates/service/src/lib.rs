//! HTTP API behind the annotation workbench: ranked passages, guideline
//! validation with a semantic-overlap preview, and an append-only pair store.
//!
//! | method | path | body / reply |
//! |---|---|---|
//! | GET | `/passages?sort=score` | ranked `PassageScore`s |
//! | GET | `/passages/{id}` | text, sentences, entity and pronoun highlights |
//! | POST | `/validate` | `DraftPair` in, report plus bias preview out |
//! | POST | `/pairs` | `DraftPair` in, stored `PairRecord` out (422 with the report when rejected) |
//! | GET | `/pairs` | every record, latest state |
//! | GET | `/export` | accepted pairs as SQuAD JSON |

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

pub mod config;
pub mod routes;
pub mod state;
pub mod store;

pub use config::{ScorerConfig, ServiceConfig};
pub use routes::{router, PairRequest, PassageView, ValidateResponse};
pub use state::{export_pairs, AppState, Corpus, ExportError};
pub use store::{PairRecord, PairStore, Status, StoreError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindError {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid passage corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("server failed: {0}")]
    Io(#[source] std::io::Error),
}

/// A bound listener plus loaded state, not yet accepting connections.
pub struct Server {
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
}

impl Server {
    pub async fn bind(config: &ServiceConfig) -> Result<Self, ServeError> {
        let state = AppState::from_config(config)?;
        Self::bind_state(&config.listen, state).await
    }

    pub async fn bind_state(addr: &str, state: AppState) -> Result<Self, ServeError> {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|source| ServeError::BindError {
                addr: addr.to_string(),
                source,
            })?;
        Ok(Self {
            listener,
            state: Arc::new(state),
        })
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.listener.local_addr().ok()
    }

    pub fn state(&self) -> Arc<AppState> {
        self.state.clone()
    }

    /// Serve until `shutdown` resolves, then flush the store to disk.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        if let Some(addr) = self.local_addr() {
            log::info!("listening on http://{addr}");
        }
        let state = self.state.clone();
        axum::serve(self.listener, router(self.state))
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(ServeError::Io)?;
        state.store.sync()?;
        log::info!("store {} flushed", state.store.path().display());
        Ok(())
    }
}

/// Bind and serve until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let server = Server::bind(&config).await?;
    server
        .run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
