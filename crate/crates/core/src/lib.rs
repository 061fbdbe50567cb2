//! Spatial cluster detection in areal count data, adjusted for scalar and
//! longitudinal covariates.
//!
//! The pipeline: smooth each location's longitudinal observations onto a
//! basis ([`fda`]), reduce to principal-component scores, fit a null GLM
//! with the covariate effects ([`glm`]), scan circular windows ([`geo`])
//! for the most likely cluster, and calibrate significance by Monte Carlo
//! ([`scan`]). [`adjust`] wires the covariate strategies and [`sim`] houses
//! the synthetic power study.

pub mod adjust;
pub mod fda;
pub mod geo;
pub mod glm;
mod linalg;
pub mod scan;
pub mod sim;

pub use adjust::{AdjustedModel, AdjustmentMode, AdjustOptions, BasisKind, BasisSpec, SummaryStat};
pub use fda::{BasisSystem, FunctionalDesign, LongitudinalSeries};
pub use geo::{Location, PotentialCluster};
pub use glm::{Dataset, Family, NullFit};
pub use scan::{ClusterReport, MonteCarloResult, ScanResult, Sidedness};
