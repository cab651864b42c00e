//! HTTP service and CLI around the `styleprobe` workbench.

pub mod api;
pub mod cli;
pub mod error;
pub mod session;
pub mod state;

pub use api::router;
pub use error::{ApiError, ErrorEnvelope};
pub use state::AppState;
