//! Host-side companion to `eit-core`.
//!
//! Everything that needs `std` lives here: the JSON experiment config, the
//! CSV / PGM / JSON file formats, the batch experiments behind the `sweep`
//! and `recon` verbs, and the WebSocket touchpad service with its replayable
//! event log.

pub mod config;
pub mod experiment;
pub mod formats;
pub mod raster;
pub mod replay;
pub mod server;
pub mod session;

pub use config::ExperimentConfig;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] eit_core::Error),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("io: {0}")]
    Stream(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("websocket: {0}")]
    WebSocket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
