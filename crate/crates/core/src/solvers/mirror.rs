use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{Allocation, Indicator, Penalty};
use crate::joint_models::JointModel;
use crate::stream::{derive_seed, fold_chunks};

const FLOOR: f64 = 1e-12;

/// Step `c / n`, smoothing width `c' n^(-1/4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MirrorSchedule {
    pub step: f64,
    /// Width constant `c'`; `None` means `0.1 u`.
    pub width: Option<f64>,
    pub batch: usize,
    pub iterations: usize,
}

impl Default for MirrorSchedule {
    fn default() -> Self {
        Self { step: 1.0, width: None, batch: 10_000, iterations: 2000 }
    }
}

impl MirrorSchedule {
    pub fn validate(&self) -> Result<()> {
        let width_ok = self.width.is_none_or(|w| w.is_finite() && w > 0.0);
        if !(self.step.is_finite() && self.step > 0.0) || !width_ok || self.batch == 0 || self.iterations == 0 {
            return Err(Error::domain(format!("mirror schedule parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Entropic mirror descent on the simplex with two-point finite-difference
/// gradients of the Monte Carlo indicator. Returns the average of the
/// iterates over the second half of the run.
pub fn mirror_descent_minimize(
    model: &JointModel,
    u: f64,
    indicator: Indicator,
    penalty: &Penalty,
    schedule: &MirrorSchedule,
    seed: u64,
) -> Result<Allocation> {
    model.validate()?;
    schedule.validate()?;
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::domain(format!("capital must be positive, got {u}")));
    }
    if !model.has_finite_means() {
        return Err(Error::domain("indicators need finite marginal means"));
    }
    let d = model.dim();
    let width = schedule.width.unwrap_or(0.1 * u);
    let mut alpha = vec![1.0 / d as f64; d];
    let mut avg = vec![0.0; d];
    let mut averaged = 0usize;
    let half = schedule.iterations / 2;

    for n in 1..=schedule.iterations {
        let nf = n as f64;
        let delta = width * nf.powf(-0.25);
        let caps: Vec<f64> = alpha.iter().map(|a| a * u).collect();
        let sums = fold_chunks(model, schedule.batch, derive_seed(seed, n as u64), || vec![0.0; d], |acc, x| {
            let s: f64 = x.iter().sum();
            let w = indicator.weight(s, u);
            if w == 0.0 {
                return;
            }
            for k in 0..d {
                let cost = |v: f64| {
                    let r = v - x[k];
                    if r < 0.0 {
                        penalty.value(r)
                    } else {
                        0.0
                    }
                };
                acc[k] += w * (cost(caps[k] + delta) - cost(caps[k] - delta));
            }
        });
        let mut grad = vec![0.0; d];
        for chunk in &sums {
            for (g, c) in grad.iter_mut().zip(chunk) {
                *g += c;
            }
        }
        let scale = u / (2.0 * delta * schedule.batch as f64);
        let eta = schedule.step / nf;
        // Shift by the mean gradient; leaves the normalized update unchanged.
        let mean = grad.iter().sum::<f64>() / d as f64;
        for (a, g) in alpha.iter_mut().zip(&grad) {
            *a *= (-eta * scale * (g - mean)).exp();
        }
        normalize_with_floor(&mut alpha);
        if n > half {
            averaged += 1;
            for (s, a) in avg.iter_mut().zip(&alpha) {
                *s += a;
            }
        }
    }
    let fractions: Vec<f64> = avg.iter().map(|s| s / averaged as f64).collect();
    let total: f64 = fractions.iter().sum();
    Allocation::new(fractions.iter().map(|f| f / total * u).collect(), u)
}

fn normalize_with_floor(alpha: &mut [f64]) {
    let s: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a = (*a / s).max(FLOOR));
    let s: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= s);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint_models::{Comonotonic, IndependentExponential};
    use crate::marginals::Marginal;

    fn short() -> MirrorSchedule {
        MirrorSchedule { batch: 2000, iterations: 300, ..Default::default() }
    }

    #[test]
    fn symmetric_model_splits_evenly() {
        let m: JointModel = IndependentExponential::new(vec![1.0, 1.0]).unwrap().into();
        let a = mirror_descent_minimize(&m, 10.0, Indicator::I, &Penalty::absolute(), &short(), 3).unwrap();
        assert!((a.capitals()[0] - 5.0).abs() < 0.1, "{a:?}");
    }

    #[test]
    fn comonotonic_exponentials_reach_quantile_matching() {
        let marg = vec![Marginal::exponential(0.05).unwrap(), Marginal::exponential(0.25).unwrap()];
        let m: JointModel = Comonotonic::new(marg).unwrap().into();
        let sched = MirrorSchedule { batch: 4000, iterations: 600, ..Default::default() };
        let a = mirror_descent_minimize(&m, 50.0, Indicator::I, &Penalty::absolute(), &sched, 8).unwrap();
        assert!((a.capitals()[0] - 125.0 / 3.0).abs() < 0.5, "{a:?}");
    }

    #[test]
    fn same_seed_same_answer() {
        let m: JointModel = IndependentExponential::new(vec![0.3, 0.9]).unwrap().into();
        let s = MirrorSchedule { batch: 500, iterations: 50, ..Default::default() };
        let a = mirror_descent_minimize(&m, 8.0, Indicator::J, &Penalty::absolute(), &s, 1).unwrap();
        let b = mirror_descent_minimize(&m, 8.0, Indicator::J, &Penalty::absolute(), &s, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schedule_is_validated() {
        let m: JointModel = IndependentExponential::new(vec![0.3, 0.9]).unwrap().into();
        let s = MirrorSchedule { batch: 0, ..Default::default() };
        assert!(mirror_descent_minimize(&m, 8.0, Indicator::I, &Penalty::absolute(), &s, 1).is_err());
    }
}
