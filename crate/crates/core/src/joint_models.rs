//! Dependent d-variate loss models: exact samplers for every model and the
//! closed-form joint quantities the allocation equations are built from.

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaSampler, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::{self, Marginal};

/// Relative distance to a singular denominator below which Marshall–Olkin
/// parameters are rejected.
pub const MO_SINGULAR_EPS: f64 = 1e-8;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d >= 2 {
        Ok(())
    } else {
        Err(Error::domain(format!("models need at least two branches, got {d}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentExponential {
    pub rates: Vec<f64>,
}

impl IndependentExponential {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        let m = Self { rates };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.rates.len())?;
        self.rates.iter().try_for_each(|&r| check_positive("rate", r))
    }

    /// `P(X_i > u_i, S <= u)`; rates must be distinct.
    pub fn lower_prob(&self, i: usize, u_i: f64, u: f64) -> Result<f64> {
        exp_joint_lower_prob(&self.rates, i, u_i, u)
    }

    /// `P(X_i > u_i, S > u)`.
    pub fn upper_prob(&self, i: usize, u_i: f64, u: f64) -> Result<f64> {
        check_branch_args(self.rates.len(), i, u_i, u)?;
        let coef = marginals::erlang_coefficients(&self.rates)?;
        let tail = marginals::erlang_survival_with(&coef, &self.rates, u - u_i);
        Ok(((-self.rates[i] * u_i).exp() * tail).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentPareto {
    pub shape: f64,
    pub scales: Vec<f64>,
}

impl IndependentPareto {
    pub fn new(shape: f64, scales: Vec<f64>) -> Result<Self> {
        let m = Self { shape, scales };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.scales.len())?;
        check_positive("shape", self.shape)?;
        self.scales.iter().try_for_each(|&b| check_positive("scale", b))
    }
}

/// Exponentials `X_i ~ Exp(rate_i * Theta)` sharing a Gamma(mix_shape,
/// mix_rate) frailty `Theta`; each margin is Pareto-Lomax with shape
/// `mix_shape` and scale `mix_rate / rate_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedParetoMixture {
    pub mix_shape: f64,
    pub mix_rate: f64,
    pub rates: Vec<f64>,
}

impl CorrelatedParetoMixture {
    pub fn new(mix_shape: f64, mix_rate: f64, rates: Vec<f64>) -> Result<Self> {
        let m = Self { mix_shape, mix_rate, rates };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.rates.len())?;
        check_positive("mix_shape", self.mix_shape)?;
        check_positive("mix_rate", self.mix_rate)?;
        self.rates.iter().try_for_each(|&r| check_positive("rate", r))?;
        marginals::check_distinct_rates(&self.rates)
    }

    /// Laplace transform of the frailty, `E[exp(-y Theta)] = (1 + y/b)^-a`.
    pub fn frailty_transform(&self, y: f64) -> f64 {
        (-self.mix_shape * (y / self.mix_rate).ln_1p()).exp()
    }

    /// `P(X_i > u_i, S <= u)`.
    pub fn lower_prob(&self, i: usize, u_i: f64, u: f64) -> Result<f64> {
        mixture_joint_lower_prob(self, i, u_i, u)
    }

    /// `P(S <= u) = sum_l A_l (1 - s(rate_l))`.
    pub fn prob_sum_le(&self, u: f64) -> Result<f64> {
        self.lower_prob(0, 0.0, u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comonotonic {
    pub marginals: Vec<Marginal>,
}

impl Comonotonic {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        let m = Self { marginals };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.marginals.len())?;
        self.marginals.iter().try_for_each(Marginal::validate)
    }
}

/// Bivariate exponential margins joined by an FGM copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgmExponential {
    pub beta1: f64,
    pub beta2: f64,
    pub theta: f64,
}

impl FgmExponential {
    pub fn new(beta1: f64, beta2: f64, theta: f64) -> Result<Self> {
        let m = Self { beta1, beta2, theta };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        check_positive("beta1", self.beta1)?;
        check_positive("beta2", self.beta2)?;
        if !(self.beta1 < self.beta2 / 2.0) {
            return Err(Error::domain(format!(
                "FGM model requires beta1 < beta2/2, got beta1={} beta2={}",
                self.beta1, self.beta2
            )));
        }
        if !(self.theta.abs() <= 1.0) {
            return Err(Error::domain(format!("FGM theta must lie in [-1,1], got {}", self.theta)));
        }
        Ok(())
    }

    /// Pearson correlation of the pair (informational).
    pub fn pearson_correlation(&self) -> f64 {
        self.theta / 4.0
    }

    fn rates(&self, branch: usize) -> (f64, f64) {
        if branch == 0 {
            (self.beta1, self.beta2)
        } else {
            (self.beta2, self.beta1)
        }
    }

    /// `P(X_branch <= x, S <= s)` from the four-term combination of
    /// exponential building blocks.
    pub fn joint_cdf_branch_s(&self, branch: usize, x: f64, s: f64) -> Result<f64> {
        if branch > 1 {
            return Err(Error::domain(format!("bivariate model has no branch {branch}")));
        }
        check_lower_orthant(x, s)?;
        let (a, b) = self.rates(branch);
        let t = self.theta;
        let f = |p: f64, q: f64| fgm_block(x, s, p, q);
        let v = (1.0 + t) * f(a, b) + t * f(2.0 * a, 2.0 * b) - t * f(2.0 * a, b) - t * f(a, 2.0 * b);
        Ok(v.clamp(0.0, 1.0))
    }

    pub fn prob_sum_le(&self, s: f64) -> Result<f64> {
        self.joint_cdf_branch_s(0, s.max(0.0), s.max(0.0))
    }

    /// `P(X_branch > x, S <= s)`.
    pub fn lower_prob(&self, branch: usize, x: f64, s: f64) -> Result<f64> {
        let v = self.prob_sum_le(s)? - self.joint_cdf_branch_s(branch, x, s)?;
        Ok(v.max(0.0))
    }
}

/// `int_0^x int_t^s a b exp(-(a-b) t) exp(-b r) dr dt`.
fn fgm_block(x: f64, s: f64, a: f64, b: f64) -> f64 {
    let k = a / (b - a);
    1.0 - (-a * x).exp() + k * (-b * s).exp() - k * (-b * s + (b - a) * x).exp()
}

fn check_lower_orthant(x: f64, s: f64) -> Result<()> {
    if x.is_nan() || s.is_nan() || x < 0.0 || x > s {
        return Err(Error::domain(format!("joint cdf needs 0 <= x <= s, got x={x} s={s}")));
    }
    Ok(())
}

/// Common-shock model `X_i = min(Y_i, Y_0)`, `Y_k ~ Exp(lambda_k)`.
/// `lambda0 = 0` is the independent case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarshallOlkin {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl MarshallOlkin {
    pub fn new(lambda0: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        let m = Self { lambda0, lambda1, lambda2 };
        m.validate()?;
        Ok(m)
    }

    /// Holds the marginal rates fixed and moves the common-shock intensity.
    pub fn with_marginal_rates(beta1: f64, beta2: f64, lambda0: f64) -> Result<Self> {
        Self::new(lambda0, beta1 - lambda0, beta2 - lambda0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda0.is_finite() && self.lambda0 >= 0.0) {
            return Err(Error::domain(format!("lambda0 must be >= 0, got {}", self.lambda0)));
        }
        check_positive("lambda1", self.lambda1)?;
        check_positive("lambda2", self.lambda2)?;
        if !self.is_symmetric() {
            self.check_denominators()?;
        }
        Ok(())
    }

    fn check_denominators(&self) -> Result<()> {
        let scale = self.lambda_sum();
        let (b1, b2) = (self.beta1(), self.beta2());
        for (name, d) in [("beta1 - lambda2", b1 - self.lambda2), ("lambda1 - beta2", self.lambda1 - b2)] {
            if d.abs() <= MO_SINGULAR_EPS * scale {
                return Err(Error::SingularParameters(format!("{name} = {d:e}")));
            }
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.lambda1 == self.lambda2
    }

    pub fn beta1(&self) -> f64 {
        self.lambda0 + self.lambda1
    }

    pub fn beta2(&self) -> f64 {
        self.lambda0 + self.lambda2
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambda0 + self.lambda1 + self.lambda2
    }

    /// Pearson correlation of the pair (informational).
    pub fn pearson_correlation(&self) -> f64 {
        self.lambda0 / self.lambda_sum()
    }

    fn swapped(&self) -> Self {
        Self { lambda0: self.lambda0, lambda1: self.lambda2, lambda2: self.lambda1 }
    }

    /// `P(X_1 <= x1, S <= s)`, piecewise in `s >= 2 x1` and `x1 <= s < 2 x1`,
    /// carrying the diagonal mass of the common shock.
    pub fn joint_cdf_x1_s(&self, x1: f64, s: f64) -> Result<f64> {
        check_lower_orthant(x1, s)?;
        self.check_denominators()?;
        let (l0, l1, l2) = (self.lambda0, self.lambda1, self.lambda2);
        let (b1, b2, ls) = (self.beta1(), self.beta2(), self.lambda_sum());
        let e = |z: f64| (-z).exp();
        let shock = |m: f64| if l0 > 0.0 { l0 / ls * (1.0 - e(ls * m)) } else { 0.0 };
        let v = if s >= 2.0 * x1 {
            2.0 * b1 * l2 / ((b1 - l2) * (b1 + l2)) * (1.0 - e((b1 + l2) * x1))
                - l2 / (b1 - l2) * (1.0 - e(b1 * x1))
                - b1 / (b1 - l2) * (e(b1 * x1) - e((b1 + l2) * x1))
                + l1 / (l1 + b2) * (1.0 - e((l1 + b2) * x1))
                - l1 / (l1 - b2) * e(b2 * s)
                + l1 / (l1 - b2) * e((l1 - b2) * x1 + b2 * s)
                + shock(x1)
        } else {
            2.0 * b1 * l2 / ((b1 - l2) * (b1 + l2)) * (1.0 - e((b1 + l2) * s / 2.0))
                - l2 / (b1 - l2) * (1.0 - e(b1 * x1))
                - b1 / (b1 - l2) * (e(b1 * x1) - e((b1 - l2) * x1 + l2 * s))
                + l1 / (l1 - b2) * (1.0 - e(b2 * s))
                - 2.0 * l1 * b2 / ((l1 - b2) * (l1 + b2)) * (1.0 - e((l1 + b2) * s / 2.0))
                + shock(s / 2.0)
        };
        Ok(v.clamp(0.0, 1.0))
    }

    /// `P(X_branch <= x, S <= s)`; branch 1 swaps the roles of the two
    /// idiosyncratic shocks.
    pub fn joint_cdf_branch_s(&self, branch: usize, x: f64, s: f64) -> Result<f64> {
        match branch {
            0 => self.joint_cdf_x1_s(x, s),
            1 => self.swapped().joint_cdf_x1_s(x, s),
            _ => Err(Error::domain(format!("bivariate model has no branch {branch}"))),
        }
    }

    pub fn prob_sum_le(&self, s: f64) -> Result<f64> {
        self.joint_cdf_x1_s(s.max(0.0), s.max(0.0))
    }

    /// `P(X_branch > x, S <= s)`.
    pub fn lower_prob(&self, branch: usize, x: f64, s: f64) -> Result<f64> {
        let v = self.prob_sum_le(s)? - self.joint_cdf_branch_s(branch, x, s)?;
        Ok(v.max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawJointModel {
    IndependentExponential(IndependentExponential),
    IndependentPareto(IndependentPareto),
    CorrelatedParetoMixture(CorrelatedParetoMixture),
    Comonotonic(Comonotonic),
    FgmExponential(FgmExponential),
    MarshallOlkin(MarshallOlkin),
}

/// A dependent loss model over `d >= 2` branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawJointModel")]
pub enum JointModel {
    IndependentExponential(IndependentExponential),
    IndependentPareto(IndependentPareto),
    CorrelatedParetoMixture(CorrelatedParetoMixture),
    Comonotonic(Comonotonic),
    FgmExponential(FgmExponential),
    MarshallOlkin(MarshallOlkin),
}

impl TryFrom<RawJointModel> for JointModel {
    type Error = Error;

    fn try_from(raw: RawJointModel) -> Result<Self> {
        let model = match raw {
            RawJointModel::IndependentExponential(m) => JointModel::IndependentExponential(m),
            RawJointModel::IndependentPareto(m) => JointModel::IndependentPareto(m),
            RawJointModel::CorrelatedParetoMixture(m) => JointModel::CorrelatedParetoMixture(m),
            RawJointModel::Comonotonic(m) => JointModel::Comonotonic(m),
            RawJointModel::FgmExponential(m) => JointModel::FgmExponential(m),
            RawJointModel::MarshallOlkin(m) => JointModel::MarshallOlkin(m),
        };
        model.validate()?;
        Ok(model)
    }
}

impl From<IndependentExponential> for JointModel {
    fn from(m: IndependentExponential) -> Self {
        JointModel::IndependentExponential(m)
    }
}
impl From<IndependentPareto> for JointModel {
    fn from(m: IndependentPareto) -> Self {
        JointModel::IndependentPareto(m)
    }
}
impl From<CorrelatedParetoMixture> for JointModel {
    fn from(m: CorrelatedParetoMixture) -> Self {
        JointModel::CorrelatedParetoMixture(m)
    }
}
impl From<Comonotonic> for JointModel {
    fn from(m: Comonotonic) -> Self {
        JointModel::Comonotonic(m)
    }
}
impl From<FgmExponential> for JointModel {
    fn from(m: FgmExponential) -> Self {
        JointModel::FgmExponential(m)
    }
}
impl From<MarshallOlkin> for JointModel {
    fn from(m: MarshallOlkin) -> Self {
        JointModel::MarshallOlkin(m)
    }
}

impl JointModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            JointModel::IndependentExponential(m) => m.validate(),
            JointModel::IndependentPareto(m) => m.validate(),
            JointModel::CorrelatedParetoMixture(m) => m.validate(),
            JointModel::Comonotonic(m) => m.validate(),
            JointModel::FgmExponential(m) => m.validate(),
            JointModel::MarshallOlkin(m) => m.validate(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            JointModel::IndependentExponential(_) => "independent_exponential",
            JointModel::IndependentPareto(_) => "independent_pareto",
            JointModel::CorrelatedParetoMixture(_) => "correlated_pareto_mixture",
            JointModel::Comonotonic(_) => "comonotonic",
            JointModel::FgmExponential(_) => "fgm_exponential",
            JointModel::MarshallOlkin(_) => "marshall_olkin",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            JointModel::IndependentExponential(m) => m.rates.len(),
            JointModel::IndependentPareto(m) => m.scales.len(),
            JointModel::CorrelatedParetoMixture(m) => m.rates.len(),
            JointModel::Comonotonic(m) => m.marginals.len(),
            JointModel::FgmExponential(_) | JointModel::MarshallOlkin(_) => 2,
        }
    }

    /// Marginal law of branch `i`.
    pub fn marginal(&self, i: usize) -> Marginal {
        match self {
            JointModel::IndependentExponential(m) => Marginal::Exponential { rate: m.rates[i] },
            JointModel::IndependentPareto(m) => Marginal::ParetoLomax { shape: m.shape, scale: m.scales[i] },
            JointModel::CorrelatedParetoMixture(m) => Marginal::ParetoLomax {
                shape: m.mix_shape,
                scale: m.mix_rate / m.rates[i],
            },
            JointModel::Comonotonic(m) => m.marginals[i],
            JointModel::FgmExponential(m) => Marginal::Exponential { rate: m.rates(i).0 },
            JointModel::MarshallOlkin(m) => Marginal::Exponential {
                rate: if i == 0 { m.beta1() } else { m.beta2() },
            },
        }
    }

    pub fn marginals(&self) -> Vec<Marginal> {
        (0..self.dim()).map(|i| self.marginal(i)).collect()
    }

    pub fn has_finite_means(&self) -> bool {
        self.marginals().iter().all(Marginal::has_finite_mean)
    }

    /// Draws one loss vector into `out` (length `dim()`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        match self {
            JointModel::IndependentExponential(m) => {
                for (x, &r) in out.iter_mut().zip(&m.rates) {
                    *x = exp_draw(rng) / r;
                }
            }
            JointModel::IndependentPareto(m) => {
                for (x, &b) in out.iter_mut().zip(&m.scales) {
                    *x = b * (exp_draw(rng) / m.shape).exp_m1();
                }
            }
            JointModel::CorrelatedParetoMixture(m) => {
                let theta = GammaSampler::new(m.mix_shape, 1.0 / m.mix_rate)
                    .expect("validated frailty parameters")
                    .sample(rng);
                for (x, &r) in out.iter_mut().zip(&m.rates) {
                    *x = exp_draw(rng) / (r * theta);
                }
            }
            JointModel::Comonotonic(m) => {
                let u: f64 = Open01.sample(rng);
                for (x, marg) in out.iter_mut().zip(&m.marginals) {
                    *x = marg.quantile(u).expect("open unit interval");
                }
            }
            JointModel::FgmExponential(m) => {
                // X1 by inversion; X2 by inverting the conditional copula
                // C(v2 | v1) = v2 (1 + theta (1 - v2)(1 - 2 v1)), solved for
                // the complement y = 1 - v2 to keep tail precision.
                let w1: f64 = Open01.sample(rng);
                let w2: f64 = Open01.sample(rng);
                let a = m.theta * (2.0 * w1 - 1.0);
                let y = 2.0 * w2 / ((1.0 - a) + ((1.0 - a) * (1.0 - a) + 4.0 * a * w2).sqrt());
                out[0] = -w1.ln() / m.beta1;
                out[1] = -y.ln() / m.beta2;
            }
            JointModel::MarshallOlkin(m) => {
                let y0 = if m.lambda0 > 0.0 { exp_draw(rng) / m.lambda0 } else { f64::INFINITY };
                let y1 = exp_draw(rng) / m.lambda1;
                let y2 = exp_draw(rng) / m.lambda2;
                out[0] = y1.min(y0);
                out[1] = y2.min(y0);
            }
        }
    }

    pub fn sample_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    /// Pearson correlation where the model reports one (informational only).
    pub fn pearson_correlation(&self) -> Option<f64> {
        match self {
            JointModel::FgmExponential(m) => Some(m.pearson_correlation()),
            JointModel::MarshallOlkin(m) => Some(m.pearson_correlation()),
            JointModel::IndependentExponential(_) | JointModel::IndependentPareto(_) => Some(0.0),
            _ => None,
        }
    }
}

fn exp_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    -u.ln()
}

fn check_branch_args(d: usize, i: usize, u_i: f64, u: f64) -> Result<()> {
    if i >= d {
        return Err(Error::domain(format!("branch {i} out of range for dimension {d}")));
    }
    if u_i.is_nan() || u.is_nan() || u_i < 0.0 || u_i > u {
        return Err(Error::domain(format!("need 0 <= u_i <= u, got u_i={u_i} u={u}")));
    }
    Ok(())
}

/// `P(X_i > u_i, S <= u)` for independent exponentials with distinct rates:
/// `h(b_i a_i) - sum_l A_l h(b_l) h(a_i (b_i - b_l))`, `h(x) = exp(-u x)`.
///
/// Evaluated in the factored form `exp(-b_i u_i) (1 - sum_l A_l exp(-b_l (u - u_i)))`.
pub fn exp_joint_lower_prob(rates: &[f64], i: usize, u_i: f64, u: f64) -> Result<f64> {
    check_branch_args(rates.len(), i, u_i, u)?;
    let coef = marginals::erlang_coefficients(rates)?;
    let head = marginals::erlang_cdf_with(&coef, rates, u - u_i);
    Ok(((-rates[i] * u_i).exp() * head).clamp(0.0, 1.0))
}

/// `P(X_1 <= x1, S <= s)` in the FGM model.
pub fn fgm_joint_cdf_x1_s(model: &FgmExponential, x1: f64, s: f64) -> Result<f64> {
    model.joint_cdf_branch_s(0, x1, s)
}

/// `P(X_1 <= x1, S <= s)` in the Marshall–Olkin model.
pub fn mo_joint_cdf_x1_s(model: &MarshallOlkin, x1: f64, s: f64) -> Result<f64> {
    model.joint_cdf_x1_s(x1, s)
}

/// `P(X_i > u_i, S <= u)` for the Gamma-frailty mixture:
/// `s(b_i a_i) - sum_l A_l s(a_i b_i + (1 - a_i) b_l)`, `s(x) = (1 + x u / b)^-a`.
pub fn mixture_joint_lower_prob(
    model: &CorrelatedParetoMixture,
    i: usize,
    u_i: f64,
    u: f64,
) -> Result<f64> {
    check_branch_args(model.rates.len(), i, u_i, u)?;
    let coef = marginals::erlang_coefficients(&model.rates)?;
    let bi = model.rates[i];
    let head = model.frailty_transform(bi * u_i);
    let tail: f64 = coef
        .iter()
        .zip(&model.rates)
        .map(|(a, &bl)| a * model.frailty_transform(bi * u_i + bl * (u - u_i)))
        .sum();
    Ok((head - tail).clamp(0.0, 1.0))
}
