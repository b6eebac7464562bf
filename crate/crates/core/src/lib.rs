//! Record linkage with data-driven link-threshold selection for
//! subclassified causal effect estimation.
//!
//! Pipeline: two files are blocked and compared field by field
//! ([`similarity`], [`linkage`]); links are ranked by match score; for every
//! candidate threshold the linked units feed a propensity-subclassified
//! effect estimator ([`causal`]); a stopping rule picks the threshold
//! ([`selection`]). [`simgen`] and [`harness`] provide synthetic data and
//! Monte Carlo experiments.

pub mod causal;
pub mod harness;
pub mod linkage;
pub mod records;
pub mod rng;
pub mod selection;
pub mod simgen;
pub mod similarity;
