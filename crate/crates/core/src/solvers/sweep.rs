use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{solve_closed_form, SimplexSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::indicators::{Indicator, Penalty};
use crate::joint_models::JointModel;

/// Parameter values, either listed or as an arithmetic range with both ends
/// included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Values { values: Vec<f64> },
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::List(values) | Grid::Values { values } => Ok(values.clone()),
            Grid::Range { start, stop, step } => {
                if !(step.is_finite() && *step > 0.0 && start.is_finite() && stop.is_finite()) {
                    return Err(Error::domain(format!("invalid range {start}..{stop} step {step}")));
                }
                if stop < start {
                    return Ok(Vec::new());
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // Snap to 12 decimals so printed grid values stay clean.
                Ok((0..count).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Ok,
    Error(String),
}

impl fmt::Display for SweepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepStatus::Ok => f.write_str("ok"),
            SweepStatus::Error(_) => f.write_str("error"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    /// Root fraction of the first branch.
    pub beta_frac: Option<f64>,
    pub residual_norm: Option<f64>,
    pub status: SweepStatus,
}

/// Solves every grid point independently; failures are kept in their row.
pub fn sweep(grid: &[f64], solve: impl Fn(f64) -> Result<SimplexSolution>) -> Vec<SweepRow> {
    grid.iter()
        .map(|&p| match solve(p) {
            Ok(s) => SweepRow {
                parameter: p,
                beta_frac: Some(s.fractions[0]),
                residual_norm: Some(s.residual_norm),
                status: SweepStatus::Ok,
            },
            Err(e) => SweepRow { parameter: p, beta_frac: None, residual_norm: None, status: SweepStatus::Error(e.to_string()) },
        })
        .collect()
}

/// `base` with the named field set to `value`. With `hold_marginals`, moving
/// `lambda0` of a Marshall–Olkin model also moves `lambda1` and `lambda2` so
/// that the marginal rates stay fixed.
pub fn with_parameter(base: &JointModel, parameter: &str, value: f64, hold_marginals: bool) -> Result<JointModel> {
    if let (JointModel::MarshallOlkin(m), "lambda0", true) = (base, parameter, hold_marginals) {
        return Ok(crate::joint_models::MarshallOlkin::with_marginal_rates(m.beta1(), m.beta2(), value)?.into());
    }
    let mut v = serde_json::to_value(base).map_err(|e| Error::domain(e.to_string()))?;
    let obj = v.as_object_mut().ok_or_else(|| Error::domain("model is not an object"))?;
    match obj.get(parameter) {
        Some(Value::Number(_)) => {}
        _ => {
            return Err(Error::domain(format!(
                "model {} has no scalar parameter {parameter:?}",
                base.kind()
            )))
        }
    }
    let num = serde_json::Number::from_f64(value).ok_or_else(|| Error::domain("parameter must be finite"))?;
    obj.insert(parameter.to_string(), Value::Number(num));
    serde_json::from_value(v).map_err(|e| Error::domain(e.to_string()))
}

/// Closed-form sweep of one model parameter, or of the capital when
/// `parameter` is `"capital"`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_model_parameter(
    base: &JointModel,
    parameter: &str,
    grid: &[f64],
    u: f64,
    indicator: Indicator,
    hold_marginals: bool,
    config: &SolverConfig,
) -> Vec<SweepRow> {
    let penalty = Penalty::absolute();
    sweep(grid, |p| {
        if parameter == "capital" {
            return solve_closed_form(base, indicator, p, &penalty, config);
        }
        let model = with_parameter(base, parameter, p, hold_marginals)?;
        solve_closed_form(&model, indicator, u, &penalty, config)
    })
}
