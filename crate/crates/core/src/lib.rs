//! Capital allocation on the simplex by minimizing the multivariate risk
//! indicators `I`, `J` and `I_loc`.
//!
//! Joint loss models live in [`joint_models`], Monte Carlo estimators in
//! [`indicators`], optimality systems in [`closed_form`] and the root finders
//! and mirror descent in [`solvers`].

pub mod cli;
pub mod closed_form;
pub mod error;
pub mod indicators;
pub mod joint_models;
pub mod marginals;
pub mod solvers;
pub mod special;
pub mod stream;

pub use error::{Error, Result};
pub use indicators::{Allocation, Indicator, IndicatorEstimate, Penalty, Side};
pub use joint_models::JointModel;
pub use marginals::Marginal;
