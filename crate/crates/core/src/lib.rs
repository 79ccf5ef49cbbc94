//! Deployment-readiness audits for tabular regression models.
//!
//! The crate bundles self-contained model families (OLS, CART trees,
//! random forests, RBF kernel SVR), traditional and grouped
//! cross-validation, permutation importance and Shapley explanations, and
//! three audits built on top of them: the overfit gap between random and
//! grouped CV, the effect of omitting a physically important variable,
//! and underspecification among near-equivalent feature subsets. Seeded
//! synthetic generators provide datasets with known ground truth.

pub mod audits;
pub mod data;
pub mod error;
pub mod explain;
pub mod formula;
pub mod models;
pub mod rng;
pub mod synthgen;
pub mod validation;

pub use error::{Error, Result};
