use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{Allocation, Indicator, Penalty};
use crate::joint_models::JointModel;
use crate::solvers::{Grid, MirrorSchedule, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    ClosedForm,
    MonteCarlo,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    #[default]
    Absolute,
    Power { exponent: f64 },
}

impl PenaltySpec {
    pub fn build(&self) -> Result<Penalty> {
        match *self {
            PenaltySpec::Absolute => Ok(Penalty::absolute()),
            PenaltySpec::Power { exponent } => Penalty::power(exponent),
        }
    }
}

/// Explicit allocation for `estimate`: capitals, or fractions of the capital.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationSpec {
    Capitals(Vec<f64>),
    Fractions(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// A scalar field of the model, or `"capital"`.
    pub parameter: String,
    pub grid: Grid,
    /// Keep Marshall–Olkin marginal rates fixed while `lambda0` moves.
    #[serde(default)]
    pub hold_marginals: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSpec {
    /// Largest accepted |z| for Monte Carlo agreement checks.
    pub z_threshold: f64,
}

impl Default for ValidateSpec {
    fn default() -> Self {
        Self { z_threshold: 4.0 }
    }
}

fn default_samples() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: JointModel,
    pub capital: f64,
    #[serde(default = "default_indicator")]
    pub indicator: Indicator,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub penalty: PenaltySpec,
    #[serde(default)]
    pub allocation: Option<AllocationSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub mirror: MirrorSchedule,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub validate: ValidateSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_indicator() -> Indicator {
    Indicator::I
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::domain(format!("invalid config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::domain(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.capital.is_finite() && self.capital > 0.0) {
            return Err(Error::domain(format!("capital must be positive, got {}", self.capital)));
        }
        if self.samples == 0 {
            return Err(Error::domain("samples must be at least 1"));
        }
        self.solver.validate()?;
        self.mirror.validate()?;
        self.penalty.build()?;
        if let Some(s) = &self.sweep {
            s.grid.values()?;
        }
        Ok(())
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty.build().expect("checked at load")
    }

    pub fn allocation(&self) -> Option<Result<Allocation>> {
        self.allocation.as_ref().map(|a| match a {
            AllocationSpec::Capitals(c) => Allocation::new(c.clone(), self.capital),
            AllocationSpec::Fractions(f) => Allocation::from_fractions(f, self.capital),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(
            r#"{"model":{"kind":"independent_exponential","rates":[0.05,0.25]},"capital":50}"#,
        )
        .unwrap();
        assert_eq!(c.indicator, Indicator::I);
        assert_eq!(c.method, Method::ClosedForm);
        assert_eq!(c.samples, 1_000_000);
        assert_eq!(c.validate.z_threshold, 4.0);
    }

    #[test]
    fn full_config_parses() {
        let c = RunConfig::from_json(
            r#"{
              "model": {"kind": "fgm_exponential", "beta1": 0.05, "beta2": 0.25, "theta": 0.5},
              "capital": 50, "indicator": "I_loc", "method": "both", "samples": 1000, "seed": 3,
              "penalty": {"kind": "power", "exponent": 2},
              "allocation": {"fractions": [0.7, 0.3]},
              "sweep": {"parameter": "theta", "grid": {"start": -1, "stop": 1, "step": 0.5}},
              "mirror": {"iterations": 10},
              "solver": {"abs_tol": 1e-9},
              "validate": {"z_threshold": 3.5},
              "output": "out.json"
            }"#,
        )
        .unwrap();
        assert_eq!(c.indicator, Indicator::ILoc);
        assert_eq!(c.mirror.batch, 10_000);
        assert_eq!(c.solver.max_iter, 200);
        assert_eq!(c.allocation().unwrap().unwrap().capitals(), &[35.0, 15.0]);
        assert_eq!(c.sweep.unwrap().grid.values().unwrap().len(), 5);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for bad in [
            r#"{"model":{"kind":"independent_exponential","rates":[0.05,0.25]},"capital":-1}"#,
            r#"{"model":{"kind":"fgm_exponential","beta1":0.2,"beta2":0.25,"theta":0},"capital":5}"#,
            r#"{"model":{"kind":"independent_exponential","rates":[0.05,0.25]},"capital":5,"typo":1}"#,
            r#"{"model":{"kind":"independent_exponential","rates":[0.05,0.25]},"capital":5,"samples":0}"#,
            "not json",
        ] {
            assert!(RunConfig::from_json(bad).is_err(), "{bad}");
        }
    }
}
