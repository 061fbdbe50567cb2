//! Command-line front end: configuration, CSV/GeoJSON ingestion and
//! emission, and orchestration of the scan, comparison, simulation, and
//! window-dump verbs on top of the `funscan` library.

pub mod compare;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod region;
pub mod simulate;

pub use config::{Overrides, RunConfig, Verb};
pub use error::CliError;
pub use region::StudyRegion;
