//! Deterministic root solvers for residual systems, a stochastic
//! mirror-descent minimizer of the Monte Carlo indicators, and parameter
//! sweeps.

mod mirror;
mod root;
mod sweep;

pub use mirror::{mirror_descent_minimize, MirrorSchedule};
pub use root::{solve_asymptotic, solve_bracketed, solve_closed_form, solve_simplex, SimplexSolution};
pub use sweep::{sweep, sweep_model_parameter, Grid, SweepRow, SweepStatus};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Initial Newton step fraction; halved while the residual norm grows.
    pub newton_damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-10, max_iter: 200, newton_damping: 1.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::domain(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::domain("max_iter must be at least 1"));
        }
        if !(self.newton_damping > 0.0 && self.newton_damping <= 1.0) {
            return Err(Error::domain(format!(
                "newton_damping must lie in (0,1], got {}",
                self.newton_damping
            )));
        }
        Ok(())
    }
}
