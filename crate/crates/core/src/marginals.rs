//! Univariate loss distributions used as branch marginals.

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaSampler, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special;

const QUANTILE_ABS_TOL: f64 = 1e-12;
const DISTINCT_REL_TOL: f64 = 1e-9;

/// A branch loss distribution.
///
/// `ParetoLomax` is the shifted Pareto with survival `(1 + x/scale)^-shape`;
/// `Gamma` is parametrized by shape and rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Exponential { rate: f64 },
    ParetoLomax { shape: f64, scale: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Gamma { shape: f64, rate: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Marginal {
    pub fn exponential(rate: f64) -> Result<Self> {
        let m = Marginal::Exponential { rate };
        m.validate()?;
        Ok(m)
    }

    pub fn pareto(shape: f64, scale: f64) -> Result<Self> {
        let m = Marginal::ParetoLomax { shape, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        let m = Marginal::LogNormal { mu, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let m = Marginal::Gamma { shape, rate };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Exponential { rate } => positive("rate", rate),
            Marginal::ParetoLomax { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
            Marginal::LogNormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::domain(format!("mu must be finite, got {mu}")));
                }
                positive("sigma", sigma)
            }
            Marginal::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)
            }
        }
    }

    /// Indicators need `E[X] < inf`.
    pub fn has_finite_mean(&self) -> bool {
        self.mean().is_finite()
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Exponential { rate } => 1.0 / rate,
            Marginal::ParetoLomax { shape, scale } => {
                if shape > 1.0 {
                    scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Marginal::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Marginal::Gamma { shape, rate } => shape / rate,
        }
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match *self {
            Marginal::Exponential { rate } => (-rate * x).exp(),
            Marginal::ParetoLomax { shape, scale } => (-shape * (x / scale).ln_1p()).exp(),
            Marginal::LogNormal { mu, sigma } => special::normal_sf((x.ln() - mu) / sigma),
            Marginal::Gamma { shape, rate } => special::gamma_q(shape, rate * x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Marginal::Exponential { rate } => -(-rate * x).exp_m1(),
            Marginal::ParetoLomax { shape, scale } => -(-shape * (x / scale).ln_1p()).exp_m1(),
            Marginal::LogNormal { mu, sigma } => special::normal_cdf((x.ln() - mu) / sigma),
            Marginal::Gamma { shape, rate } => special::gamma_p(shape, rate * x),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            Marginal::Exponential { rate } => rate * (-rate * x).exp(),
            Marginal::ParetoLomax { shape, scale } => {
                shape / scale * (-(shape + 1.0) * (x / scale).ln_1p()).exp()
            }
            Marginal::LogNormal { mu, sigma } => {
                if x == 0.0 {
                    return 0.0;
                }
                special::normal_pdf((x.ln() - mu) / sigma) / (x * sigma)
            }
            Marginal::Gamma { shape, rate } => {
                if x == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        rate
                    } else {
                        0.0
                    };
                }
                (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - special::ln_gamma(shape))
                    .exp()
            }
        }
    }

    /// Inverse cdf on the open unit interval.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0,1), got {p}")));
        }
        Ok(match *self {
            Marginal::Exponential { rate } => -(-p).ln_1p() / rate,
            Marginal::ParetoLomax { shape, scale } => scale * (-(-p).ln_1p() / shape).exp_m1(),
            Marginal::LogNormal { mu, sigma } => {
                (mu + sigma * special::inverse_normal_cdf(p)).exp()
            }
            Marginal::Gamma { .. } => self.bisect(|x| self.cdf(x) - p),
        })
    }

    /// Inverse survival function: the `x` with `P(X > x) = q`. Keeps full
    /// relative precision for tiny `q`, where `quantile(1 - q)` would not.
    pub fn inverse_survival(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("survival level must lie in (0,1), got {q}")));
        }
        Ok(match *self {
            Marginal::Exponential { rate } => -q.ln() / rate,
            Marginal::ParetoLomax { shape, scale } => scale * (-q.ln() / shape).exp_m1(),
            Marginal::LogNormal { mu, sigma } => {
                (mu + sigma * special::inverse_normal_sf(q)).exp()
            }
            Marginal::Gamma { .. } => self.bisect(|x| q - self.survival(x)),
        })
    }

    // Root of an increasing function of x on [0, inf).
    fn bisect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = self.mean().max(1.0);
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..4000 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= QUANTILE_ABS_TOL || mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Exponential { rate } => {
                let u: f64 = Open01.sample(rng);
                -u.ln() / rate
            }
            Marginal::ParetoLomax { shape, scale } => {
                let u: f64 = Open01.sample(rng);
                scale * (-u.ln() / shape).exp_m1()
            }
            Marginal::LogNormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
            Marginal::Gamma { shape, rate } => GammaSampler::new(shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
        }
    }
}

/// Rejects rate vectors with two entries equal within relative `1e-9`.
pub fn check_distinct_rates(rates: &[f64]) -> Result<()> {
    for (i, &a) in rates.iter().enumerate() {
        for &b in &rates[i + 1..] {
            if (a - b).abs() <= DISTINCT_REL_TOL * a.abs().max(b.abs()) {
                return Err(Error::DistinctRatesRequired(rates.to_vec()));
            }
        }
    }
    Ok(())
}

/// Generalized-Erlang weights `A_l = prod_{j != l} b_j / (b_j - b_l)`.
pub fn erlang_coefficients(rates: &[f64]) -> Result<Vec<f64>> {
    check_distinct_rates(rates)?;
    Ok((0..rates.len())
        .map(|l| {
            rates
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != l)
                .map(|(_, &bj)| bj / (bj - rates[l]))
                .product()
        })
        .collect())
}

/// Survival function of a sum of independent exponentials with distinct
/// rates, `sum_l A_l exp(-b_l x)`.
pub fn erlang_survival(rates: &[f64], x: f64) -> Result<f64> {
    let coef = erlang_coefficients(rates)?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    let s: f64 = coef
        .iter()
        .zip(rates)
        .map(|(a, b)| a * (-b * x).exp())
        .sum();
    Ok(s.clamp(0.0, 1.0))
}

/// `1 - erlang_survival`, summed as `-sum_l A_l expm1(-b_l x)` so small `x`
/// keeps more relative accuracy.
pub(crate) fn erlang_cdf_with(coef: &[f64], rates: &[f64], x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -coef
        .iter()
        .zip(rates)
        .map(|(a, b)| a * (-b * x).exp_m1())
        .sum::<f64>()
}

pub(crate) fn erlang_survival_with(coef: &[f64], rates: &[f64], x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    coef.iter()
        .zip(rates)
        .map(|(a, b)| a * (-b * x).exp())
        .sum()
}
