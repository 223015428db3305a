//! Optimality equation systems for the models with explicit joint laws, and
//! the direct closed-form and asymptotic allocations.
//!
//! A system is described by its branch condition values `c_i(alpha)`: the
//! probability `P(X_i > u_i, S <= u)` for I, `P(X_i > u_i, S > u)` for J, or
//! a positive rescaled asymptotic analogue. The optimal allocation equalizes
//! them. Condition values are produced in log space so that systems at large
//! capital, where every `c_i` underflows, remain solvable.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::indicators::{Allocation, Indicator, Penalty};
use crate::joint_models::{
    exp_joint_lower_prob, CorrelatedParetoMixture, FgmExponential, JointModel, MarshallOlkin,
};
use crate::marginals::{self, Marginal};
use crate::special::{gamma_p, ln_signed_sum, safe_ln};

type LnConditions = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Vector residual on the simplex whose root is an optimal allocation.
#[derive(Clone)]
pub struct ResidualSystem {
    dim: usize,
    label: String,
    ln_conditions: LnConditions,
    hint: Option<Vec<f64>>,
    ln_scale: f64,
}

impl fmt::Debug for ResidualSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResidualSystem")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("hint", &self.hint)
            .finish_non_exhaustive()
    }
}

impl ResidualSystem {
    /// `ln_conditions` maps simplex fractions to `ln c_i` for every branch.
    pub fn new<F>(dim: usize, label: impl Into<String>, ln_conditions: F, hint: Option<Vec<f64>>) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { dim, label: label.into(), ln_conditions: Arc::new(ln_conditions), hint, ln_scale: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// A point expected to lie near the root (the asymptotic allocation when
    /// one is known).
    pub fn hint(&self) -> Option<&[f64]> {
        self.hint.as_deref()
    }

    /// Same system with every condition value multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0, "scale factor must be positive");
        let mut s = self.clone();
        s.ln_scale += factor.ln();
        s
    }

    pub fn ln_conditions(&self, alpha: &[f64]) -> Vec<f64> {
        debug_assert_eq!(alpha.len(), self.dim);
        let mut v = (self.ln_conditions)(alpha);
        if self.ln_scale != 0.0 {
            v.iter_mut().for_each(|x| *x += self.ln_scale);
        }
        v
    }

    pub fn conditions(&self, alpha: &[f64]) -> Vec<f64> {
        self.ln_conditions(alpha).into_iter().map(f64::exp).collect()
    }

    /// `c_1 - c_{j+1}` for `j = 1..d-1`.
    pub fn residual(&self, alpha: &[f64]) -> Vec<f64> {
        let c = self.conditions(alpha);
        c[1..].iter().map(|cj| c[0] - cj).collect()
    }

    /// `ln c_1 - ln c_{j+1}`: same root, invariant under positive rescaling.
    pub fn log_residual(&self, alpha: &[f64]) -> Vec<f64> {
        let l = self.ln_conditions(alpha);
        l[1..].iter().map(|lj| l[0] - lj).collect()
    }

    /// Scalar log residual of a bivariate system at `alpha = (beta, 1 - beta)`.
    pub fn log_residual_at(&self, beta: f64) -> f64 {
        self.log_residual(&[beta, 1.0 - beta])[0]
    }
}

fn floor_ln(v: Option<f64>) -> f64 {
    v.unwrap_or_else(|| safe_ln(0.0))
}

/// `u_i`-independent condition checks shared by the exponential systems.
fn exp_setup(rates: &[f64], u: f64) -> Result<Vec<f64>> {
    if rates.len() < 2 {
        return Err(Error::domain("systems need at least two branches"));
    }
    if rates.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
        return Err(Error::domain(format!("rates must be positive, got {rates:?}")));
    }
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::domain(format!("capital must be positive, got {u}")));
    }
    marginals::erlang_coefficients(rates)
}

/// I system for independent exponentials, `h(x) = exp(-u x)`:
/// `c_i = h(b_i a_i) - sum_l A_l h(b_l) h(a_i (b_i - b_l))`.
pub fn eizo_system(rates: &[f64], u: f64) -> Result<ResidualSystem> {
    let coef = exp_setup(rates, u)?;
    let rates = rates.to_vec();
    let hint = asymptotic_exponential_i(&rates);
    Ok(ResidualSystem::new(
        rates.len(),
        "independent exponential, I",
        move |a| {
            rates
                .iter()
                .zip(a)
                .map(|(&b, &ai)| {
                    let head = marginals::erlang_cdf_with(&coef, &rates, u * (1.0 - ai));
                    -u * b * ai + safe_ln(head)
                })
                .collect()
        },
        Some(hint),
    ))
}

/// J system for independent exponentials:
/// `c_i = sum_l A_l h(b_l) h(a_i (b_i - b_l))`.
pub fn eizv_system(rates: &[f64], u: f64) -> Result<ResidualSystem> {
    let coef = exp_setup(rates, u)?;
    let rates = rates.to_vec();
    let hint = asymptotic_exponential_j(&rates).ok();
    Ok(ResidualSystem::new(
        rates.len(),
        "independent exponential, J",
        move |a| {
            rates
                .iter()
                .zip(a)
                .map(|(&b, &ai)| {
                    let tail = ln_signed_sum(
                        coef.iter().zip(&rates).map(|(&c, &bl)| (c, -bl * u * (1.0 - ai))),
                    );
                    -u * b * ai + floor_ln(tail)
                })
                .collect()
        },
        hint,
    ))
}

/// Large-capital limit of the I allocation: `a_i = (1/b_i) / sum_j (1/b_j)`.
pub fn asymptotic_exponential_i(rates: &[f64]) -> Vec<f64> {
    let total: f64 = rates.iter().map(|b| 1.0 / b).sum();
    rates.iter().map(|b| (1.0 / b) / total).collect()
}

fn unit_vector(d: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[k] = 1.0;
    v
}

fn unique_extreme(values: &[f64], better: impl Fn(f64, f64) -> bool) -> Result<usize> {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if better(v, values[best]) {
            best = k;
        }
    }
    if values.iter().enumerate().any(|(k, &v)| k != best && v == values[best]) {
        return Err(Error::TiedRiskiestBranch);
    }
    Ok(best)
}

/// Large-capital limit of the J allocation: all capital on the smallest rate.
pub fn asymptotic_exponential_j(rates: &[f64]) -> Result<Vec<f64>> {
    let k = unique_extreme(rates, |a, b| a < b)?;
    Ok(unit_vector(rates.len(), k))
}

/// u-free asymptotic I system for independent Pareto-Lomax branches:
/// `(a_i/b_i)^-a - (a_j/b_j)^-a = (1/b_i)^-a - (1/b_j)^-a`.
pub fn pareto_asymptotic_i_system(shape: f64, scales: &[f64]) -> Result<ResidualSystem> {
    if !(shape.is_finite() && shape > 0.0) || scales.len() < 2 || scales.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::domain("Pareto system needs shape > 0 and at least two positive scales"));
    }
    let scales = scales.to_vec();
    let total: f64 = scales.iter().sum();
    let hint = scales.iter().map(|b| b / total).collect();
    Ok(ResidualSystem::new(
        scales.len(),
        "independent Pareto, asymptotic I",
        move |a| {
            // c_i = b_i^a (a_i^-a - 1)
            scales
                .iter()
                .zip(a)
                .map(|(&b, &ai)| shape * b.ln() + safe_ln((-shape * ai.ln()).exp_m1()))
                .collect()
        },
        Some(hint),
    ))
}

/// Asymptotic J allocation for independent Pareto-Lomax: all capital on the
/// largest scale.
pub fn pareto_asymptotic_j(scales: &[f64]) -> Result<Vec<f64>> {
    let k = unique_extreme(scales, |a, b| a > b)?;
    Ok(unit_vector(scales.len(), k))
}

#[derive(Clone, Copy)]
enum MixtureKind {
    I,
    J,
}

fn mixture_system(
    model: &CorrelatedParetoMixture,
    u: Option<f64>,
    kind: MixtureKind,
) -> Result<ResidualSystem> {
    model_is_valid(&JointModel::CorrelatedParetoMixture(model.clone()))?;
    if let Some(u) = u {
        if !(u.is_finite() && u > 0.0) {
            return Err(Error::domain(format!("capital must be positive, got {u}")));
        }
    }
    let coef = marginals::erlang_coefficients(&model.rates)?;
    let rates = model.rates.clone();
    let (a, b) = (model.mix_shape, model.mix_rate);
    // ln s(x): (1 + x u / b)^-a at finite capital, x^-a in the limit.
    let ln_s = move |x: f64| match u {
        Some(u) => -a * (x * u / b).ln_1p(),
        None => -a * x.ln(),
    };
    let label = match (kind, u.is_some()) {
        (MixtureKind::I, true) => "correlated Pareto mixture, I",
        (MixtureKind::J, true) => "correlated Pareto mixture, J",
        (MixtureKind::I, false) => "correlated Pareto mixture, asymptotic I",
        (MixtureKind::J, false) => "correlated Pareto mixture, asymptotic J",
    };
    let hint = Some(asymptotic_exponential_i(&rates));
    Ok(ResidualSystem::new(
        rates.len(),
        label,
        move |alpha| {
            rates
                .iter()
                .zip(alpha)
                .map(|(&bi, &ai)| {
                    let mixed = coef
                        .iter()
                        .zip(&rates)
                        .map(|(&c, &bl)| (c, ln_s(ai * bi + (1.0 - ai) * bl)));
                    floor_ln(match kind {
                        MixtureKind::I => ln_signed_sum(
                            std::iter::once((1.0, ln_s(bi * ai))).chain(mixed.map(|(c, l)| (-c, l))),
                        ),
                        MixtureKind::J => ln_signed_sum(mixed),
                    })
                })
                .collect()
        },
        hint,
    ))
}

/// `s(b_i a_i) - s(b_j a_j) - sum_l A_l [s(a_i b_i + (1-a_i) b_l) - s(a_j b_j + (1-a_j) b_l)]`
/// with `s(x) = (1 + x u / b)^-a`.
pub fn mixture_i_system(model: &CorrelatedParetoMixture, u: f64) -> Result<ResidualSystem> {
    mixture_system(model, Some(u), MixtureKind::I)
}

/// `sum_l A_l [s(a_i b_i + (1-a_i) b_l) - s(a_j b_j + (1-a_j) b_l)]`.
pub fn mixture_j_system(model: &CorrelatedParetoMixture, u: f64) -> Result<ResidualSystem> {
    mixture_system(model, Some(u), MixtureKind::J)
}

/// The I system with `s` replaced by `x -> x^-a`.
pub fn mixture_asymptotic_i_system(model: &CorrelatedParetoMixture) -> Result<ResidualSystem> {
    mixture_system(model, None, MixtureKind::I)
}

/// The J system with `s` replaced by `x -> x^-a`.
pub fn mixture_asymptotic_j_system(model: &CorrelatedParetoMixture) -> Result<ResidualSystem> {
    mixture_system(model, None, MixtureKind::J)
}

fn model_is_valid(model: &JointModel) -> Result<()> {
    model.validate()
}

/// Allocation equalizing the marginal cdf levels `F_i(u_i)`, which is optimal
/// for I, J and I_loc when the branches are comonotonic.
pub fn comonotonic_allocation(marginals: &[Marginal], u: f64) -> Result<Allocation> {
    if marginals.is_empty() {
        return Err(Error::domain("need at least one marginal"));
    }
    marginals.iter().try_for_each(Marginal::validate)?;
    if !(u.is_finite() && u >= 0.0) {
        return Err(Error::domain(format!("capital must be finite and >= 0, got {u}")));
    }
    if u == 0.0 {
        return Allocation::new(vec![0.0; marginals.len()], 0.0);
    }
    let capitals_at = |ln_q: f64| -> Result<Vec<f64>> {
        let q = ln_q.exp();
        marginals.iter().map(|m| m.inverse_survival(q)).collect()
    };
    let total_at = |ln_q: f64| -> Result<f64> { Ok(capitals_at(ln_q)?.iter().sum()) };
    // Total capital decreases in the common survival level q; bisect on ln q.
    let (mut lo, mut hi) = (-700.0_f64, -1e-15_f64);
    let at_lo = total_at(lo)?;
    let at_hi = total_at(hi)?;
    if !(at_lo >= u && at_hi <= u) {
        return Err(Error::domain(format!(
            "capital {u} not bracketed by the marginal quantiles ({at_hi}, {at_lo})"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total_at(mid)? > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let caps_lo = capitals_at(lo)?;
    let caps_hi = capitals_at(hi)?;
    let err = |c: &[f64]| (c.iter().sum::<f64>() - u).abs();
    let mut caps = if err(&caps_lo) <= err(&caps_hi) { caps_lo } else { caps_hi };
    // Remove the last rounding-level mismatch so the allocation is full.
    let sum: f64 = caps.iter().sum();
    caps.iter_mut().for_each(|c| *c *= u / sum);
    Allocation::new(caps, u)
}

/// Optimal allocation for I_loc: equal marginal survival `P(X_i > u_i)`.
/// The equations coincide with the comonotonic ones.
pub fn iloc_allocation(marginals: &[Marginal], u: f64) -> Result<Allocation> {
    comonotonic_allocation(marginals, u)
}

fn check_frac(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("beta_frac must lie in (0,1), got {beta}")))
    }
}

/// `P(X_1 > beta u, S <= u) - P(X_2 > (1-beta) u, S <= u)` in the FGM model,
/// i.e. `F_{X2,S}((1-beta) u, u) - F_{X1,S}(beta u, u)`. Decreasing in
/// `beta`; its root is the I-optimal fraction of branch 1.
pub fn fgm_residual(beta1: f64, beta2: f64, theta: f64, u: f64, beta_frac: f64) -> Result<f64> {
    let m = FgmExponential::new(beta1, beta2, theta)?;
    check_frac(beta_frac)?;
    let f1 = m.joint_cdf_branch_s(0, beta_frac * u, u)?;
    let f2 = m.joint_cdf_branch_s(1, (1.0 - beta_frac) * u, u)?;
    Ok(f2 - f1)
}

/// [`fgm_residual`] written term by term in `h(x) = exp(-beta1 u x)` with
/// `alpha = beta2 / beta1`.
pub fn fgm_residual_expanded(beta1: f64, beta2: f64, theta: f64, u: f64, beta_frac: f64) -> Result<f64> {
    FgmExponential::new(beta1, beta2, theta)?;
    check_frac(beta_frac)?;
    let h = |x: f64| (-beta1 * u * x).exp();
    let (al, b, t) = (beta2 / beta1, beta_frac, theta);
    let f1 = 1.0 - h(b)
        + (1.0 + t) / (al - 1.0) * (h(al) - h(al + b - al * b))
        + t / (al - 1.0) * (h(2.0 * al) - h(2.0 * al + 2.0 * b - 2.0 * al * b))
        - 2.0 * t / (al - 2.0) * (h(al) - h(al + 2.0 * b - al * b))
        - t / (2.0 * al - 1.0) * (h(2.0 * al) - h(2.0 * al + b - 2.0 * al * b));
    let f2 = (1.0 + t)
        * (1.0 - h(al * (1.0 - b)) + al / (1.0 - al) * (h(1.0) - h(al + b - al * b)))
        + t * (1.0 - h(2.0 * al * (1.0 - b))
            + al / (1.0 - al) * (h(2.0) - h(2.0 * al + 2.0 * b - 2.0 * al * b)))
        - t * (1.0 - h(2.0 * al * (1.0 - b))
            + 2.0 * al / (1.0 - 2.0 * al) * (h(1.0) - h(2.0 * al + b - 2.0 * al * b)))
        - t * (1.0 - h(al * (1.0 - b))
            + al / (2.0 - al) * (h(2.0) - h(al + 2.0 * b - al * b)));
    Ok(f2 - f1)
}

/// Bivariate conditions for a model given through `F_{X_i,S}`.
fn bivariate_system<F>(label: &'static str, u: f64, indicator: Indicator, rates: (f64, f64), cdf: F) -> ResidualSystem
where
    F: Fn(usize, f64, f64) -> Result<f64> + Send + Sync + 'static,
{
    ResidualSystem::new(
        2,
        label,
        move |a| {
            let total = cdf(0, u, u).unwrap_or(f64::NAN);
            (0..2)
                .map(|k| {
                    let x = a[k] * u;
                    let lower = total - cdf(k, x, u).unwrap_or(f64::NAN);
                    let c = match indicator {
                        Indicator::J => {
                            let r = if k == 0 { rates.0 } else { rates.1 };
                            (-r * x).exp() - lower
                        }
                        _ => lower,
                    };
                    safe_ln(c)
                })
                .collect()
        },
        None,
    )
}

pub fn fgm_system(model: &FgmExponential, u: f64, indicator: Indicator) -> Result<ResidualSystem> {
    model_is_valid(&JointModel::FgmExponential(*model))?;
    check_capital(u)?;
    let m = *model;
    let label = if indicator == Indicator::J { "FGM exponential, J" } else { "FGM exponential, I" };
    Ok(bivariate_system(label, u, indicator, (m.beta1, m.beta2), move |k, x, s| m.joint_cdf_branch_s(k, x, s)))
}

fn check_capital(u: f64) -> Result<()> {
    if u.is_finite() && u > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("capital must be positive, got {u}")))
    }
}

/// `P(X_1 > beta u, S <= u) - P(X_2 > (1-beta) u, S <= u)` under the common
/// shock model, from the piecewise `F_{X1,S}` (branch 2 by exchanging the
/// idiosyncratic shocks).
pub fn mo_residual(lambda0: f64, lambda1: f64, lambda2: f64, u: f64, beta_frac: f64) -> Result<f64> {
    let m = MarshallOlkin::new(lambda0, lambda1, lambda2)?;
    check_frac(beta_frac)?;
    if m.is_symmetric() && lambda0 == 0.0 {
        // i.i.d. exponentials: S ~ Gamma(2, lambda1).
        let c = |x: f64| (-lambda1 * x).exp() * gamma_p(2.0, lambda1 * (u - x));
        return Ok(c(beta_frac * u) - c((1.0 - beta_frac) * u));
    }
    let f1 = m.joint_cdf_branch_s(0, beta_frac * u, u)?;
    let f2 = m.joint_cdf_branch_s(1, (1.0 - beta_frac) * u, u)?;
    Ok(f2 - f1)
}

pub fn mo_system(model: &MarshallOlkin, u: f64, indicator: Indicator) -> Result<ResidualSystem> {
    model_is_valid(&JointModel::MarshallOlkin(*model))?;
    check_capital(u)?;
    let m = *model;
    if m.is_symmetric() && m.lambda0 == 0.0 {
        return Err(Error::SingularParameters("symmetric model without common shock".into()));
    }
    let label = if indicator == Indicator::J { "Marshall-Olkin, J" } else { "Marshall-Olkin, I" };
    Ok(bivariate_system(label, u, indicator, (m.beta1(), m.beta2()), move |k, x, s| m.joint_cdf_branch_s(k, x, s)))
}

/// What a closed-form treatment of a model produces: either fractions
/// directly or a system to solve.
#[derive(Debug, Clone)]
pub enum ClosedForm {
    Direct(Vec<f64>),
    System(ResidualSystem),
}

fn require_absolute(penalty: &Penalty) -> Result<()> {
    if penalty.is_absolute() {
        Ok(())
    } else {
        Err(Error::UnsupportedPenalty)
    }
}

/// Closed-form problem for `indicator` at capital `u`.
pub fn closed_form_problem(model: &JointModel, indicator: Indicator, u: f64, penalty: &Penalty) -> Result<ClosedForm> {
    require_absolute(penalty)?;
    model.validate()?;
    check_capital(u)?;
    if indicator == Indicator::ILoc {
        return Ok(ClosedForm::Direct(iloc_allocation(&model.marginals(), u)?.fractions()));
    }
    match model {
        JointModel::IndependentExponential(m) => {
            if m.rates.iter().all(|&r| r == m.rates[0]) {
                return Ok(ClosedForm::Direct(vec![1.0 / m.rates.len() as f64; m.rates.len()]));
            }
            Ok(ClosedForm::System(match indicator {
                Indicator::J => eizv_system(&m.rates, u)?,
                _ => eizo_system(&m.rates, u)?,
            }))
        }
        JointModel::CorrelatedParetoMixture(m) => Ok(ClosedForm::System(match indicator {
            Indicator::J => mixture_j_system(m, u)?,
            _ => mixture_i_system(m, u)?,
        })),
        JointModel::Comonotonic(m) => Ok(ClosedForm::Direct(comonotonic_allocation(&m.marginals, u)?.fractions())),
        JointModel::FgmExponential(m) => Ok(ClosedForm::System(fgm_system(m, u, indicator)?)),
        JointModel::MarshallOlkin(m) => {
            if m.is_symmetric() {
                return Ok(ClosedForm::Direct(vec![0.5, 0.5]));
            }
            Ok(ClosedForm::System(mo_system(m, u, indicator)?))
        }
        JointModel::IndependentPareto(_) => Err(Error::Unsupported(
            "independent Pareto has closed forms only asymptotically".into(),
        )),
    }
}

/// Large-capital allocation problem for `indicator`.
pub fn asymptotic_problem(model: &JointModel, indicator: Indicator) -> Result<ClosedForm> {
    model.validate()?;
    match (model, indicator) {
        (JointModel::IndependentExponential(m), Indicator::I | Indicator::ILoc) => {
            Ok(ClosedForm::Direct(asymptotic_exponential_i(&m.rates)))
        }
        (JointModel::IndependentExponential(m), Indicator::J) => {
            Ok(ClosedForm::Direct(asymptotic_exponential_j(&m.rates)?))
        }
        (JointModel::IndependentPareto(m), Indicator::I) => {
            Ok(ClosedForm::System(pareto_asymptotic_i_system(m.shape, &m.scales)?))
        }
        (JointModel::IndependentPareto(m), Indicator::J) => Ok(ClosedForm::Direct(pareto_asymptotic_j(&m.scales)?)),
        (JointModel::IndependentPareto(m), Indicator::ILoc) => {
            let total: f64 = m.scales.iter().sum();
            Ok(ClosedForm::Direct(m.scales.iter().map(|b| b / total).collect()))
        }
        (JointModel::CorrelatedParetoMixture(m), Indicator::I) => {
            Ok(ClosedForm::System(mixture_asymptotic_i_system(m)?))
        }
        (JointModel::CorrelatedParetoMixture(m), Indicator::J) => {
            Ok(ClosedForm::System(mixture_asymptotic_j_system(m)?))
        }
        _ => Err(Error::Unsupported(format!(
            "no asymptotic allocation for {} with indicator {indicator}",
            model.kind()
        ))),
    }
}

/// `P(X_i > u_i, S <= u) - P(X_j > u_j, S <= u)` straight from the joint
/// probabilities, for cross-checking [`eizo_system`].
pub fn exp_condition_difference(rates: &[f64], alpha: &[f64], u: f64, j: usize) -> Result<f64> {
    Ok(exp_joint_lower_prob(rates, 0, alpha[0] * u, u)? - exp_joint_lower_prob(rates, j, alpha[j] * u, u)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint_models::mixture_joint_lower_prob;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eizo_matches_joint_probabilities_and_h_form() {
        let rates = [0.5, 1.0, 2.0];
        let u = 3.0;
        let sys = eizo_system(&rates, u).unwrap();
        let coef = marginals::erlang_coefficients(&rates).unwrap();
        let h = |x: f64| (-u * x).exp();
        let alpha = [0.5, 0.3, 0.2];
        let r = sys.residual(&alpha);
        for j in 1..3 {
            let direct = exp_condition_difference(&rates, &alpha, u, j).unwrap();
            assert!(close(r[j - 1], direct, 1e-14));
            let paper = h(rates[0] * alpha[0]) - h(rates[j] * alpha[j])
                - coef
                    .iter()
                    .zip(&rates)
                    .map(|(a, &bl)| a * h(bl) * (h(alpha[0] * (rates[0] - bl)) - h(alpha[j] * (rates[j] - bl))))
                    .sum::<f64>();
            assert!(close(r[j - 1], paper, 1e-14));
        }
    }

    #[test]
    fn eizo_near_asymptotic_point_at_large_capital() {
        let sys = eizo_system(&[1.0, 2.0], 100.0).unwrap();
        assert!(sys.residual(&[2.0 / 3.0, 1.0 / 3.0])[0].abs() < 1e-3);
    }

    #[test]
    fn eizv_matches_upper_probabilities() {
        let rates = [0.5, 1.0, 2.0];
        let m = crate::joint_models::IndependentExponential::new(rates.to_vec()).unwrap();
        let sys = eizv_system(&rates, 4.0).unwrap();
        let alpha = [0.6, 0.25, 0.15];
        let c = sys.conditions(&alpha);
        for k in 0..3 {
            assert!(close(c[k], m.upper_prob(k, alpha[k] * 4.0, 4.0).unwrap(), 1e-14));
        }
    }

    #[test]
    fn equal_rates_need_the_uniform_bypass() {
        assert!(matches!(eizo_system(&[1.0, 1.0], 5.0), Err(Error::DistinctRatesRequired(_))));
        assert!(matches!(eizv_system(&[1.0, 1.0], 5.0), Err(Error::DistinctRatesRequired(_))));
        let m: JointModel = crate::joint_models::IndependentExponential::new(vec![1.0, 1.0]).unwrap().into();
        match closed_form_problem(&m, Indicator::I, 10.0, &Penalty::absolute()).unwrap() {
            ClosedForm::Direct(f) => assert_eq!(f, vec![0.5, 0.5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn asymptotic_exponential_formulas() {
        let a = asymptotic_exponential_i(&[0.05, 0.25]);
        assert!(close(a[0], 5.0 / 6.0, 1e-15) && close(a[1], 1.0 / 6.0, 1e-15));
        let b = asymptotic_exponential_i(&[0.5, 1.0, 2.0]);
        for (x, y) in b.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!(close(*x, y, 1e-15));
        }
        assert_eq!(asymptotic_exponential_i(&[3.0; 4]), vec![0.25; 4]);
        assert_eq!(asymptotic_exponential_j(&[0.05, 0.25]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(asymptotic_exponential_j(&[2.0, 1.0, 0.5]).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(asymptotic_exponential_j(&[1.0, 1.0]), Err(Error::TiedRiskiestBranch));
    }

    #[test]
    fn pareto_asymptotics() {
        let sys = pareto_asymptotic_i_system(2.0, &[1.5, 1.5, 1.5]).unwrap();
        let r = sys.log_residual(&[1.0 / 3.0; 3]);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        // independent bisection on 1/a^2 - 4/(1-a)^2 = -3
        let f = |a: f64| 1.0 / (a * a) - 4.0 / ((1.0 - a) * (1.0 - a)) + 3.0;
        let (mut lo, mut hi) = (1e-6, 1.0 - 1e-6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!(close(root, 0.3732, 1e-4));
        let sys = pareto_asymptotic_i_system(2.0, &[1.0, 2.0]).unwrap();
        assert!(sys.log_residual_at(root).abs() < 1e-9);
        assert_eq!(pareto_asymptotic_j(&[3.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(pareto_asymptotic_j(&[1.0, 3.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(pareto_asymptotic_j(&[2.0, 2.0]), Err(Error::TiedRiskiestBranch));
    }

    #[test]
    fn mixture_i_matches_joint_probabilities() {
        let m = CorrelatedParetoMixture::new(3.0, 1.0, vec![1.0, 2.0, 0.7]).unwrap();
        let u = 5.0;
        let sys = mixture_i_system(&m, u).unwrap();
        let alpha = [0.3, 0.2, 0.5];
        let c = sys.conditions(&alpha);
        for k in 0..3 {
            let p = mixture_joint_lower_prob(&m, k, alpha[k] * u, u).unwrap();
            assert!(close(c[k], p, 1e-13), "{k}: {} vs {p}", c[k]);
        }
    }

    #[test]
    fn mixture_converges_to_its_asymptotic_system() {
        let m = CorrelatedParetoMixture::new(2.5, 1.0, vec![1.0, 2.0]).unwrap();
        let asym = mixture_asymptotic_i_system(&m).unwrap();
        let alpha = [0.6, 0.4];
        let target = asym.residual(&alpha)[0];
        let gap = |u: f64| {
            let s1 = (1.0 + u / m.mix_rate).powf(-m.mix_shape);
            (mixture_i_system(&m, u).unwrap().residual(&alpha)[0] / s1 - target).abs()
        };
        let (g2, g4) = (gap(1e2), gap(1e4));
        assert!(g4 < g2 * 0.05, "{g2} {g4}");
        let asym_j = mixture_asymptotic_j_system(&m).unwrap();
        let target_j = asym_j.residual(&alpha)[0];
        let u = 1e5;
        let s1 = (1.0 + u / m.mix_rate).powf(-m.mix_shape);
        let rel = mixture_j_system(&m, u).unwrap().residual(&alpha)[0] / s1;
        assert!((rel - target_j).abs() < 1e-3 * target_j.abs().max(1.0));
    }

    #[test]
    fn comonotonic_examples() {
        let e = [Marginal::exponential(0.05).unwrap(), Marginal::exponential(0.25).unwrap()];
        let a = comonotonic_allocation(&e, 50.0).unwrap();
        assert!(close(a.capitals()[0], 125.0 / 3.0, 1e-9) && close(a.capitals()[1], 25.0 / 3.0, 1e-9));
        let ln = [Marginal::log_normal(0.0, 0.8).unwrap(), Marginal::log_normal(2f64.ln(), 0.8).unwrap()];
        let a = comonotonic_allocation(&ln, 3.0).unwrap();
        assert!(close(a.capitals()[0], 1.0, 1e-9) && close(a.capitals()[1], 2.0, 1e-9));
        let p = [Marginal::pareto(2.5, 1.0).unwrap(), Marginal::pareto(2.5, 3.0).unwrap()];
        let a = comonotonic_allocation(&p, 8.0).unwrap();
        assert!(close(a.capitals()[0], 2.0, 1e-9) && close(a.capitals()[1], 6.0, 1e-9));
        let levels: Vec<f64> = p.iter().zip(a.capitals()).map(|(m, &c)| m.cdf(c)).collect();
        assert!(close(levels[0], levels[1], 1e-9));
    }

    #[test]
    fn iloc_independent_formulas() {
        let p = [Marginal::pareto(3.0, 1.0).unwrap(), Marginal::pareto(3.0, 4.0).unwrap()];
        let f = iloc_allocation(&p, 10.0).unwrap().fractions();
        assert!(close(f[0], 0.2, 1e-12));
        let e = [Marginal::exponential(1.0).unwrap(), Marginal::exponential(3.0).unwrap()];
        let f = iloc_allocation(&e, 10.0).unwrap().fractions();
        assert!(close(f[0], 0.75, 1e-12));
    }

    #[test]
    fn fgm_independence_and_expansion() {
        let rates = [0.05, 0.25];
        let sys = eizo_system(&rates, 50.0).unwrap();
        for k in 1..100 {
            let b = k as f64 / 100.0;
            let f0 = fgm_residual(0.05, 0.25, 0.0, 50.0, b).unwrap();
            assert!(close(f0, sys.residual(&[b, 1.0 - b])[0], 1e-12));
            for theta in [-1.0, -0.4, 0.5, 1.0] {
                let a = fgm_residual(0.05, 0.25, theta, 50.0, b).unwrap();
                let e = fgm_residual_expanded(0.05, 0.25, theta, 50.0, b).unwrap();
                assert!(close(a, e, 1e-12), "theta={theta} b={b}: {a} vs {e}");
            }
        }
        assert!(matches!(fgm_residual(0.2, 0.25, 0.0, 50.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn fgm_residual_is_decreasing() {
        for theta in [-1.0, 0.0, 1.0] {
            let vals: Vec<f64> = (1..100).map(|k| fgm_residual(0.05, 0.25, theta, 50.0, k as f64 / 100.0).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn mo_without_shock_is_independence() {
        let sys = eizo_system(&[0.05, 0.25], 50.0).unwrap();
        for k in 1..100 {
            let b = k as f64 / 100.0;
            let r = mo_residual(0.0, 0.05, 0.25, 50.0, b).unwrap();
            assert!(close(r, sys.residual(&[b, 1.0 - b])[0], 1e-12));
        }
        // i.i.d. case: zero at one half
        assert!(mo_residual(0.0, 0.1, 0.1, 20.0, 0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn bivariate_j_conditions_partition_survival() {
        let m = FgmExponential::new(0.05, 0.25, 0.6).unwrap();
        let si = fgm_system(&m, 50.0, Indicator::I).unwrap();
        let sj = fgm_system(&m, 50.0, Indicator::J).unwrap();
        let alpha = [0.7, 0.3];
        let (ci, cj) = (si.conditions(&alpha), sj.conditions(&alpha));
        assert!(close(ci[0] + cj[0], (-0.05 * 35.0_f64).exp(), 1e-13));
        assert!(close(ci[1] + cj[1], (-0.25 * 15.0_f64).exp(), 1e-13));
    }

    #[test]
    fn closed_forms_refuse_other_penalties() {
        let m: JointModel = crate::joint_models::IndependentExponential::new(vec![1.0, 2.0]).unwrap().into();
        let p = Penalty::power(2.0).unwrap();
        assert!(matches!(closed_form_problem(&m, Indicator::I, 1.0, &p), Err(Error::UnsupportedPenalty)));
    }

    proptest! {
        #[test]
        fn log_residual_is_scale_invariant(a in 0.05f64..0.95, k in 1e-6f64..1e6) {
            let sys = eizo_system(&[0.3, 1.2], 20.0).unwrap();
            let l = sys.log_residual_at(a);
            let ls = sys.scaled(k).log_residual_at(a);
            prop_assert!((l - ls).abs() <= 1e-12 * (1.0 + l.abs()));
        }

        #[test]
        fn comonotonic_levels_are_equal(
            r1 in 0.05f64..3.0, r2 in 0.05f64..3.0, s in 0.2f64..1.5, u in 0.5f64..40.0
        ) {
            let m = [
                Marginal::exponential(r1).unwrap(),
                Marginal::log_normal(0.3, s).unwrap(),
                Marginal::gamma(2.0, r2).unwrap(),
            ];
            let a = comonotonic_allocation(&m, u).unwrap();
            let lv: Vec<f64> = m.iter().zip(a.capitals()).map(|(mm, &c)| mm.cdf(c)).collect();
            prop_assert!((lv[0] - lv[1]).abs() < 1e-9 && (lv[0] - lv[2]).abs() < 1e-9, "{lv:?}");
        }
    }
}
