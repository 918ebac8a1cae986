//! HTTP+JSON service for interactive training sessions.
//!
//! Corpora are registered under their content id. Each session serializes
//! its mutations and publishes an immutable state (session plus ranking)
//! after every accepted one; reads always see the latest published state.

pub mod api;
pub mod error;
pub mod state;

pub use api::router;
pub use state::{AppState, ServiceConfig};
