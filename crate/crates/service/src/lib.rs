//! HTTP service and command line front end: sensor ingest, ranked crop
//! predictions, ledger recording and read-only chain inspection.

pub mod api;
pub mod cli;
pub mod config;
pub mod http;
pub mod simulate;

pub use api::{PredictRequest, PredictResponse, Service, ServiceOptions};
pub use config::ServiceConfig;
