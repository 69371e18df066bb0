//! Estimation of the biological treatment effect in two-visit parallel-group
//! trials where rescue medication is given by a deterministic threshold rule.
//!
//! The numerical core is generic over the floating-point type through
//! [`Real`]; the aliases below fix it to `f64`, which is what the CLI and the
//! file formats use.

pub mod bootstrap;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod mc_harness;
pub mod model;
pub mod normal;
pub mod num;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::Mode;
pub use model::Arm;
pub use num::Real;

pub type Scenario = model::ScenarioParams<f64>;
pub type Dataset = datagen::TrialDataset<f64>;
pub type Subject = datagen::SubjectRecord<f64>;
pub type Estimates = estimators::EstimateSet<f64>;
pub type Moments = estimators::ArmMoments<f64>;
pub type Summary = mc_harness::McSummary<f64>;
pub type Bootstrap = bootstrap::BootstrapResult<f64>;
pub type Strata = model::StrataTable<f64>;
pub type Truncated = normal::TruncatedMoments<f64>;
