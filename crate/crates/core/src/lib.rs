//! Extended RC(K) association models for two-way contingency tables.
//!
//! The model family combines generalized logit types (local, global,
//! continuation) for rows and columns with a power scaling factor lambda.
//! The crate fits models by maximum likelihood, sweeps the family for model
//! selection, and synthesises counterfactual tables with rescaled
//! association under fixed margins.

pub mod error;
pub mod fixtures;
pub mod interactions;
pub mod rc_model;
pub mod scenario;
pub mod selection;
pub mod table;

pub use error::{Error, Result};
pub use interactions::{InteractionMatrix, InteractionSpec, LogitType};
pub use rc_model::{FitOptions, FitResult, ModelSpec, RCParams};
pub use scenario::{MarginPolicy, ScenarioSpec, ScenarioTable};
pub use selection::{Selection, SelectionPolicy, SweepGrid, SweepResult};
pub use table::{ContingencyTable, Margins, ProbabilityTable};
