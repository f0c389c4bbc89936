//! Empirical-Bayes ranking by r-value.
pub mod closed_form;
pub mod error;
pub mod io;
pub mod model;
pub mod optim;
pub mod prior_fit;
pub mod quadrature;
pub mod ranking;
pub mod roots;
pub mod rvalue;
pub mod sim;
pub mod special;
pub mod tail;
pub mod thresholds;
/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, ErrorClass, Result, UnitIssue};
