//! Link-tracing network survey simulation and design-adherent estimation.
//!
//! The pipeline: load or generate a population network ([`netpop`],
//! [`oracle::gen_population`]), draw a field sample with a coupon-based
//! design ([`fieldsim`]), estimate inclusion probabilities by resampling the
//! sample network ([`resampler`]), and turn them into point and interval
//! estimates ([`estimators`]). [`harness`] replicates the whole thing and
//! scores estimators against the known population truth.

pub mod config;
pub mod estimators;
pub mod fieldsim;
pub mod harness;
pub mod netpop;
pub mod oracle;
pub mod resampler;
pub mod rng;

pub use estimators::{EstimateResult, EstimatorId, VarianceId};
pub use fieldsim::{DesignConfig, DesignKind, SampleNetwork};
pub use netpop::{AttributeTable, PopulationGraph};
pub use resampler::{InclusionFrequencies, ResampleConfig, ResampleMode};
