//! Files in and out: run configuration, jurisdiction tables, result tables.

pub mod config;
pub mod jurisdictions;
pub mod output;

pub use config::RunConfig;
pub use jurisdictions::{load_jurisdictions, read_jurisdictions, JurisdictionFile};
