//! Monte Carlo estimators of the indicators I, J and I_loc and of the
//! branch optimality-condition probabilities.
//!
//! Every estimator consumes the loss-vector stream defined by `(seed, n)`,
//! which does not depend on the allocation; estimates at nearby allocations
//! therefore share their random numbers.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint_models::JointModel;
use crate::stream::{fold_chunks, merge_in_order, Moments};

/// Full allocation of a group capital `total` over the branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    capitals: Vec<f64>,
    total: f64,
}

impl Allocation {
    pub fn new(capitals: Vec<f64>, total: f64) -> Result<Self> {
        if !(total.is_finite() && total >= 0.0) {
            return Err(Error::domain(format!("total capital must be finite and >= 0, got {total}")));
        }
        if capitals.is_empty() {
            return Err(Error::domain("allocation needs at least one branch"));
        }
        if capitals.iter().any(|&c| !(c.is_finite() && c >= 0.0)) {
            return Err(Error::domain(format!("capitals must be finite and >= 0, got {capitals:?}")));
        }
        let sum: f64 = capitals.iter().sum();
        if (sum - total).abs() > 1e-9 * total {
            return Err(Error::domain(format!("capitals sum to {sum}, expected {total}")));
        }
        Ok(Self { capitals, total })
    }

    /// Capitals `total * fractions`; fractions must be on the simplex.
    pub fn from_fractions(fractions: &[f64], total: f64) -> Result<Self> {
        let s: f64 = fractions.iter().sum();
        if fractions.iter().any(|&f| !(f >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("fractions must lie on the simplex, got {fractions:?}")));
        }
        let capitals = fractions.iter().map(|&f| f / s * total).collect();
        Self::new(capitals, total)
    }

    pub fn uniform(d: usize, total: f64) -> Result<Self> {
        Self::new(vec![total / d as f64; d], total)
    }

    pub fn capitals(&self) -> &[f64] {
        &self.capitals
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.capitals.len()
    }

    pub fn fractions(&self) -> Vec<f64> {
        if self.total == 0.0 {
            return vec![1.0 / self.dim() as f64; self.dim()];
        }
        self.capitals.iter().map(|c| c / self.total).collect()
    }
}

type PenaltyFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Cost `g(x)` charged on a branch reserve `x = u_k - X_k < 0`.
#[derive(Clone)]
pub struct Penalty {
    g: PenaltyFn,
    g_prime: PenaltyFn,
    absolute: bool,
}

impl fmt::Debug for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Penalty").field("absolute", &self.absolute).finish_non_exhaustive()
    }
}

impl Default for Penalty {
    fn default() -> Self {
        Self::absolute()
    }
}

impl Penalty {
    /// `g(x) = |x|`, `g'(x) = -1` on `x < 0`.
    pub fn absolute() -> Self {
        Self {
            g: Arc::new(|x: f64| x.abs()),
            g_prime: Arc::new(|x: f64| if x < 0.0 { -1.0 } else { 0.0 }),
            absolute: true,
        }
    }

    /// `g(x) = |x|^p` with `p >= 1`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::domain(format!("power penalty needs p >= 1, got {p}")));
        }
        if p == 1.0 {
            return Ok(Self::absolute());
        }
        Ok(Self {
            g: Arc::new(move |x: f64| x.abs().powf(p)),
            g_prime: Arc::new(move |x: f64| if x < 0.0 { -p * (-x).powf(p - 1.0) } else { 0.0 }),
            absolute: false,
        })
    }

    /// A user penalty, checked for `g(0) = 0`, nonnegativity and convexity
    /// on a grid over `[-grid_span, 0]`.
    pub fn custom<G, D>(g: G, g_prime: D, grid_span: f64) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(grid_span.is_finite() && grid_span > 0.0) {
            return Err(Error::domain("penalty grid span must be positive"));
        }
        if g(0.0).abs() > 1e-12 {
            return Err(Error::domain(format!("penalty must vanish at 0, g(0) = {}", g(0.0))));
        }
        const POINTS: usize = 201;
        let xs: Vec<f64> = (0..POINTS).map(|k| -grid_span * k as f64 / (POINTS - 1) as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        let scale = vals.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if vals.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::domain("penalty must be nonnegative on negative reserves"));
        }
        if vals.windows(3).any(|w| w[0] + w[2] - 2.0 * w[1] < -1e-10 * scale) {
            return Err(Error::domain("penalty must be convex"));
        }
        Ok(Self { g: Arc::new(g), g_prime: Arc::new(g_prime), absolute: false })
    }

    pub fn is_absolute(&self) -> bool {
        self.absolute
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.g_prime)(x)
    }

    /// Summed branch costs `sum_k g(min(u_k - x_k, 0))`.
    pub fn cost(&self, capitals: &[f64], x: &[f64]) -> f64 {
        capitals
            .iter()
            .zip(x)
            .map(|(&u, &xk)| {
                let r = u - xk;
                if r < 0.0 {
                    self.value(r)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Indicator {
    I,
    J,
    #[serde(rename = "I_loc")]
    ILoc,
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Indicator::I => "I",
            Indicator::J => "J",
            Indicator::ILoc => "I_loc",
        })
    }
}

impl Indicator {
    /// Event weight applied to the branch costs for aggregate loss `s`.
    #[inline]
    pub fn weight(self, s: f64, u: f64) -> f64 {
        match self {
            Indicator::I => (s <= u) as u8 as f64,
            Indicator::J => (s > u) as u8 as f64,
            Indicator::ILoc => 1.0,
        }
    }

    /// Side of the aggregate event in the branch optimality condition.
    pub fn side(self) -> Option<Side> {
        match self {
            Indicator::I => Some(Side::Lower),
            Indicator::J => Some(Side::Upper),
            Indicator::ILoc => None,
        }
    }
}

/// Aggregate event in a condition probability `P(X_i > u_i, S <= u)`
/// (`Lower`) or `P(X_i > u_i, S > u)` (`Upper`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    #[inline]
    pub fn holds(self, s: f64, u: f64) -> bool {
        match self {
            Side::Lower => s <= u,
            Side::Upper => s > u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
}

impl IndicatorEstimate {
    fn from_moments(m: &Moments, seed: u64) -> Self {
        Self { value: m.mean, std_error: m.std_error(), n: m.count as usize, seed }
    }
}

/// Per-draw contributions to I, J and I_loc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleTerms {
    pub i: f64,
    pub j: f64,
    pub i_loc: f64,
}

pub fn sample_terms(x: &[f64], alloc: &Allocation, penalty: &Penalty) -> SampleTerms {
    let cost = penalty.cost(alloc.capitals(), x);
    let s: f64 = x.iter().sum();
    let u = alloc.total();
    SampleTerms { i: cost * Indicator::I.weight(s, u), j: cost * Indicator::J.weight(s, u), i_loc: cost }
}

/// Per-draw condition indicators for branch `i`: `(lower, upper, X_i > u_i)`.
pub fn condition_terms(x: &[f64], i: usize, alloc: &Allocation) -> (bool, bool, bool) {
    let exceed = x[i] > alloc.capitals()[i];
    let s: f64 = x.iter().sum();
    let u = alloc.total();
    (exceed && Side::Lower.holds(s, u), exceed && Side::Upper.holds(s, u), exceed)
}

fn check_inputs(model: &JointModel, alloc: &Allocation, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    if alloc.dim() != model.dim() {
        return Err(Error::domain(format!(
            "allocation has {} branches, model has {}",
            alloc.dim(),
            model.dim()
        )));
    }
    Ok(())
}

fn check_means(model: &JointModel) -> Result<()> {
    if model.has_finite_means() {
        Ok(())
    } else {
        Err(Error::domain("indicators need finite marginal means (Pareto shape > 1)"))
    }
}

/// I, J and I_loc estimated from one pass over the stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorTriple {
    pub i: IndicatorEstimate,
    pub j: IndicatorEstimate,
    pub i_loc: IndicatorEstimate,
}

impl IndicatorTriple {
    pub fn get(&self, which: Indicator) -> IndicatorEstimate {
        match which {
            Indicator::I => self.i,
            Indicator::J => self.j,
            Indicator::ILoc => self.i_loc,
        }
    }
}

pub fn estimate_all(
    model: &JointModel,
    alloc: &Allocation,
    penalty: &Penalty,
    n: usize,
    seed: u64,
) -> Result<IndicatorTriple> {
    check_inputs(model, alloc, n)?;
    check_means(model)?;
    let chunks = fold_chunks(model, n, seed, || vec![Moments::default(); 3], |acc, x| {
        let t = sample_terms(x, alloc, penalty);
        acc[0].push(t.i);
        acc[1].push(t.j);
        acc[2].push(t.i_loc);
    });
    let m = merge_in_order(chunks, 3);
    Ok(IndicatorTriple {
        i: IndicatorEstimate::from_moments(&m[0], seed),
        j: IndicatorEstimate::from_moments(&m[1], seed),
        i_loc: IndicatorEstimate::from_moments(&m[2], seed),
    })
}

pub fn estimate_indicator(
    model: &JointModel,
    which: Indicator,
    alloc: &Allocation,
    penalty: &Penalty,
    n: usize,
    seed: u64,
) -> Result<IndicatorEstimate> {
    check_inputs(model, alloc, n)?;
    check_means(model)?;
    let u = alloc.total();
    let chunks = fold_chunks(model, n, seed, Moments::default, |acc, x| {
        let s: f64 = x.iter().sum();
        let w = which.weight(s, u);
        acc.push(if w == 0.0 { 0.0 } else { w * penalty.cost(alloc.capitals(), x) });
    });
    let m = merge_in_order(chunks.into_iter().map(|m| vec![m]).collect(), 1);
    Ok(IndicatorEstimate::from_moments(&m[0], seed))
}

/// `I = sum_k E[g(u_k - X_k) 1{X_k > u_k} 1{S <= u}]`.
pub fn estimate_i(model: &JointModel, alloc: &Allocation, penalty: &Penalty, n: usize, seed: u64) -> Result<IndicatorEstimate> {
    estimate_indicator(model, Indicator::I, alloc, penalty, n, seed)
}

/// `J = sum_k E[g(u_k - X_k) 1{X_k > u_k} 1{S > u}]`.
pub fn estimate_j(model: &JointModel, alloc: &Allocation, penalty: &Penalty, n: usize, seed: u64) -> Result<IndicatorEstimate> {
    estimate_indicator(model, Indicator::J, alloc, penalty, n, seed)
}

/// `I_loc = sum_k E[g(u_k - X_k) 1{X_k > u_k}]`.
pub fn estimate_i_loc(model: &JointModel, alloc: &Allocation, penalty: &Penalty, n: usize, seed: u64) -> Result<IndicatorEstimate> {
    estimate_indicator(model, Indicator::ILoc, alloc, penalty, n, seed)
}

/// Bernoulli estimate of `P(X_i > u_i, S <= u)` or `P(X_i > u_i, S > u)`,
/// with `u` the allocation total.
pub fn estimate_condition(
    model: &JointModel,
    i: usize,
    alloc: &Allocation,
    side: Side,
    n: usize,
    seed: u64,
) -> Result<IndicatorEstimate> {
    check_inputs(model, alloc, n)?;
    if i >= model.dim() {
        return Err(Error::domain(format!("branch {i} out of range")));
    }
    let chunks = fold_chunks(model, n, seed, Moments::default, |acc, x| {
        let (lo, up, _) = condition_terms(x, i, alloc);
        acc.push(match side {
            Side::Lower => lo,
            Side::Upper => up,
        } as u8 as f64);
    });
    let m = merge_in_order(chunks.into_iter().map(|m| vec![m]).collect(), 1);
    Ok(IndicatorEstimate::from_moments(&m[0], seed))
}

/// Outcome of testing that all branch condition probabilities are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityCertificate {
    pub side: Side,
    /// One estimate per branch.
    pub probabilities: Vec<IndicatorEstimate>,
    /// Largest `|mean difference| / std error` over branch pairs, from paired
    /// per-sample differences.
    pub max_z: f64,
    /// Largest unpaired score `|p_i - p_j| / sqrt(se_i^2 + se_j^2)`.
    pub max_z_unpaired: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub fn stationarity_certificate(
    model: &JointModel,
    alloc: &Allocation,
    side: Side,
    n: usize,
    seed: u64,
    threshold: f64,
) -> Result<StationarityCertificate> {
    check_inputs(model, alloc, n)?;
    let d = model.dim();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
    let width = d + pairs.len();
    let u = alloc.total();
    let caps = alloc.capitals();
    let chunks = fold_chunks(model, n, seed, || vec![Moments::default(); width], |acc, x| {
        let s: f64 = x.iter().sum();
        let on = side.holds(s, u);
        let hit = |k: usize| (on && x[k] > caps[k]) as u8 as f64;
        for k in 0..d {
            acc[k].push(hit(k));
        }
        for (p, &(a, b)) in pairs.iter().enumerate() {
            acc[d + p].push(hit(a) - hit(b));
        }
    });
    let m = merge_in_order(chunks, width);
    let z = |mean: f64, se: f64| {
        if mean == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            mean.abs() / se
        }
    };
    let max_z = (0..pairs.len()).map(|p| z(m[d + p].mean, m[d + p].std_error())).fold(0.0, f64::max);
    let max_z_unpaired = pairs
        .iter()
        .map(|&(a, b)| z(m[a].mean - m[b].mean, m[a].std_error().hypot(m[b].std_error())))
        .fold(0.0, f64::max);
    Ok(StationarityCertificate {
        side,
        probabilities: m[..d].iter().map(|mm| IndicatorEstimate::from_moments(mm, seed)).collect(),
        max_z,
        max_z_unpaired,
        threshold,
        passed: max_z <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint_models::{Comonotonic, IndependentExponential, IndependentPareto};
    use crate::marginals::Marginal;
    use crate::stream::for_each_sample;
    use proptest::prelude::*;

    fn exp_model(rates: &[f64]) -> JointModel {
        IndependentExponential::new(rates.to_vec()).unwrap().into()
    }

    #[test]
    fn allocation_validation() {
        assert!(Allocation::new(vec![1.0, 2.0], 3.0).is_ok());
        assert!(Allocation::new(vec![1.0, 2.0], 3.1).is_err());
        assert!(Allocation::new(vec![-1.0, 4.0], 3.0).is_err());
        assert!(Allocation::new(vec![0.0, 0.0], 0.0).is_ok());
        let a = Allocation::from_fractions(&[0.25, 0.75], 8.0).unwrap();
        assert_eq!(a.capitals(), &[2.0, 6.0]);
    }

    #[test]
    fn penalty_checks() {
        assert!(Penalty::custom(|x: f64| x * x, |x: f64| 2.0 * x, 10.0).is_ok());
        assert!(Penalty::custom(|x: f64| x.abs() + 1.0, |_| -1.0, 10.0).is_err());
        assert!(Penalty::custom(|x: f64| (-x).sqrt(), |_| 0.0, 10.0).is_err());
        assert!(Penalty::power(0.5).is_err());
        assert!(Penalty::power(1.0).unwrap().is_absolute());
    }

    #[test]
    fn zero_capital_kills_i() {
        let m = exp_model(&[1.0, 2.0]);
        let a = Allocation::new(vec![0.0, 0.0], 0.0).unwrap();
        let e = estimate_i(&m, &a, &Penalty::absolute(), 10_000, 1).unwrap();
        assert_eq!(e.value, 0.0);
        let j = estimate_j(&m, &a, &Penalty::absolute(), 200_000, 1).unwrap();
        assert!((j.value - 1.5).abs() < 3.0 * j.std_error);
    }

    #[test]
    fn i_loc_matches_stop_loss_formula() {
        let m = exp_model(&[1.0, 2.0]);
        let a = Allocation::new(vec![1.0, 1.0], 2.0).unwrap();
        let e = estimate_i_loc(&m, &a, &Penalty::absolute(), 400_000, 9).unwrap();
        let exact = (-1.0_f64).exp() + (-2.0_f64).exp() / 2.0;
        assert!((e.value - exact).abs() < 3.0 * e.std_error, "{e:?} vs {exact}");
    }

    #[test]
    fn condition_matches_closed_form() {
        let m = exp_model(&[1.0, 2.0]);
        let a = Allocation::new(vec![1.0, 2.0], 3.0).unwrap();
        let e = estimate_condition(&m, 0, &a, Side::Lower, 400_000, 4).unwrap();
        let exact = crate::joint_models::exp_joint_lower_prob(&[1.0, 2.0], 0, 1.0, 3.0).unwrap();
        assert!((e.value - exact).abs() < 4.0 * e.std_error);
    }

    #[test]
    fn identities_hold_per_sample() {
        let m = exp_model(&[0.5, 1.5, 3.0]);
        let a = Allocation::new(vec![1.0, 0.5, 0.5], 2.0).unwrap();
        let pen = Penalty::absolute();
        for_each_sample(&m, 50_000, 11, |x| {
            let t = sample_terms(x, &a, &pen);
            assert_eq!(t.i + t.j, t.i_loc);
            for k in 0..3 {
                let (lo, up, ex) = condition_terms(x, k, &a);
                assert_eq!(lo as u8 + up as u8, ex as u8);
            }
        });
    }

    #[test]
    fn estimates_are_deterministic_and_additive() {
        let m = exp_model(&[0.2, 0.7]);
        let a = Allocation::new(vec![6.0, 4.0], 10.0).unwrap();
        let pen = Penalty::absolute();
        let t1 = estimate_all(&m, &a, &pen, 150_000, 5).unwrap();
        let t2 = estimate_all(&m, &a, &pen, 150_000, 5).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.i, estimate_i(&m, &a, &pen, 150_000, 5).unwrap());
        assert!((t1.i.value + t1.j.value - t1.i_loc.value).abs() < 1e-12);
    }

    #[test]
    fn infinite_mean_is_rejected() {
        let m: JointModel = IndependentPareto::new(0.8, vec![1.0, 2.0]).unwrap().into();
        let a = Allocation::uniform(2, 2.0).unwrap();
        assert!(matches!(estimate_i(&m, &a, &Penalty::absolute(), 10, 0), Err(Error::Domain(_))));
        assert!(estimate_condition(&m, 0, &a, Side::Lower, 10, 0).is_ok());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = exp_model(&[1.0, 2.0]);
        let a = Allocation::uniform(3, 3.0).unwrap();
        assert!(estimate_i(&m, &a, &Penalty::absolute(), 10, 0).is_err());
        let a2 = Allocation::uniform(2, 3.0).unwrap();
        assert!(estimate_i(&m, &a2, &Penalty::absolute(), 0, 0).is_err());
    }

    #[test]
    fn comonotonic_quantile_matched_allocation_has_zero_i() {
        let marg = vec![Marginal::exponential(0.05).unwrap(), Marginal::exponential(0.25).unwrap()];
        let m: JointModel = Comonotonic::new(marg).unwrap().into();
        let a = Allocation::new(vec![125.0 / 3.0, 25.0 / 3.0], 50.0).unwrap();
        let e = estimate_i(&m, &a, &Penalty::absolute(), 200_000, 2).unwrap();
        assert!(e.value.abs() <= 3.0 * e.std_error + 1e-9, "{e:?}");
    }

    #[test]
    fn certificate_detects_imbalance() {
        let m = exp_model(&[0.05, 0.25]);
        let bad = Allocation::new(vec![25.0, 25.0], 50.0).unwrap();
        let c = stationarity_certificate(&m, &bad, Side::Lower, 100_000, 3, 4.0).unwrap();
        assert!(!c.passed);
        assert!(c.max_z >= c.max_z_unpaired * 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn midpoint_convexity_of_i(t in 0.2f64..0.8, h in 0.02f64..0.15, seed in 0u64..1000) {
            let m = exp_model(&[0.3, 0.9]);
            let pen = Penalty::absolute();
            let n = 20_000;
            let at = |f: f64| {
                let a = Allocation::from_fractions(&[f, 1.0 - f], 8.0).unwrap();
                estimate_i(&m, &a, &pen, n, seed).unwrap()
            };
            let (lo, mid, hi) = (at(t - h), at(t), at(t + h));
            let pooled = (lo.std_error.powi(2) + 4.0 * mid.std_error.powi(2) + hi.std_error.powi(2)).sqrt();
            prop_assert!(lo.value + hi.value - 2.0 * mid.value >= -3.0 * pooled);
        }
    }
}
