//! Posterior tail probabilities `V_α(D) = P(θ ≥ θ_α | D)`.

use crate::error::{Error, Result};
use crate::model::{EmpiricalDist, Payload, ThetaLaw};
use crate::special::{beta_inc_upper, norm_sf};

/// `P(θ >= theta)` under the normal posterior for a normal measurement.
pub fn tail_normal(x: f64, sigma2: f64, mu: f64, tau2: f64, theta: f64) -> f64 {
    let (m, v) = normal_posterior(x, sigma2, mu, tau2);
    normal_upper(m, v, theta)
}

fn normal_posterior(x: f64, sigma2: f64, mu: f64, tau2: f64) -> (f64, f64) {
    let s = tau2 + sigma2;
    ((mu * sigma2 + x * tau2) / s, tau2 * sigma2 / s)
}

fn normal_upper(m: f64, v: f64, theta: f64) -> f64 {
    if v == 0.0 {
        return if m >= theta { 1.0 } else { 0.0 };
    }
    norm_sf((theta - m) / v.sqrt())
}

/// Upper tail of `Beta(a + y, b + n - y)` at `theta`, for `0 < theta < 1`.
pub fn tail_beta_binomial(y: u64, n: u64, a: f64, b: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    Ok(beta_inc_upper(theta, a + y as f64, b + (n - y) as f64))
}

/// Fraction of draws `>= theta`.
pub fn tail_from_draws(draws: &EmpiricalDist, theta: f64) -> f64 {
    draws.upper_fraction(theta)
}

/// A unit's posterior for θ, ready for repeated tail queries.
#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Normal { mean: f64, var: f64 },
    Beta { a: f64, b: f64 },
    Draws(EmpiricalDist),
}

impl Posterior {
    pub fn from_unit(payload: &Payload, prior: &ThetaLaw) -> Result<Self> {
        match (payload, prior) {
            (Payload::Normal { x, sigma2 }, ThetaLaw::Normal { mu, tau2 }) => {
                let (mean, var) = normal_posterior(*x, *sigma2, *mu, *tau2);
                Ok(Posterior::Normal { mean, var })
            }
            (Payload::Binomial { y, n }, ThetaLaw::Beta { a, b }) => Ok(Posterior::Beta {
                a: a + *y as f64,
                b: b + (n - y) as f64,
            }),
            (Payload::Draws { draws }, _) => Ok(Posterior::Draws(EmpiricalDist::new(draws.clone())?)),
            (p, law) => Err(Error::ModelMismatch(format!(
                "{} data cannot be combined with a {} prior",
                p.kind().name(),
                law.family()
            ))),
        }
    }

    /// `P(θ >= theta | D)`. For beta posteriors, `theta <= 0` gives 1 and
    /// `theta >= 1` gives 0.
    pub fn upper_tail(&self, theta: f64) -> f64 {
        match self {
            Posterior::Normal { mean, var } => normal_upper(*mean, *var, theta),
            Posterior::Beta { a, b } => {
                if theta <= 0.0 {
                    1.0
                } else if theta >= 1.0 {
                    0.0
                } else {
                    beta_inc_upper(theta, *a, *b)
                }
            }
            Posterior::Draws(d) => d.upper_fraction(theta),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Posterior::Normal { mean, .. } => *mean,
            Posterior::Beta { a, b } => a / (a + b),
            Posterior::Draws(d) => d.mean(),
        }
    }
}

/// The per-unit map `α ↦ V_α(D)`.
#[derive(Debug, Clone)]
pub struct TailProbFn<'a> {
    pub posterior: Posterior,
    pub prior: &'a ThetaLaw,
}

impl<'a> TailProbFn<'a> {
    pub fn new(payload: &Payload, prior: &'a ThetaLaw) -> Result<Self> {
        Ok(Self {
            posterior: Posterior::from_unit(payload, prior)?,
            prior,
        })
    }

    pub fn evaluate(&self, alpha: f64) -> f64 {
        self.posterior.upper_tail(self.prior.upper_quantile(alpha))
    }

    pub fn evaluate_at_theta(&self, theta: f64) -> f64 {
        self.posterior.upper_tail(theta)
    }
}

pub fn posterior_mean(payload: &Payload, prior: &ThetaLaw) -> Result<f64> {
    Ok(Posterior::from_unit(payload, prior)?.mean())
}

/// Uniform α grid on [0, 1] with `θ_α` precomputed, for the integral
/// `PER = 1 - ∫ V_α dα` by the composite trapezoid rule.
#[derive(Debug, Clone)]
pub struct PerQuadrature {
    thetas: Vec<f64>,
}

/// Default trapezoid node count for the PER integral.
pub const PER_NODES: usize = 1001;

impl PerQuadrature {
    pub fn new(prior: &ThetaLaw, nodes: usize) -> Result<Self> {
        if nodes < 201 {
            return Err(Error::InvalidParameter(format!(
                "PER quadrature needs at least 201 nodes, got {nodes}"
            )));
        }
        let h = 1.0 / (nodes - 1) as f64;
        let thetas = (0..nodes).map(|k| prior.upper_quantile(k as f64 * h)).collect();
        Ok(Self { thetas })
    }

    pub fn per(&self, post: &Posterior) -> f64 {
        let m = self.thetas.len();
        let h = 1.0 / (m - 1) as f64;
        let mut s = 0.0;
        for (k, &t) in self.thetas.iter().enumerate() {
            let v = post.upper_tail(t);
            s += if k == 0 || k == m - 1 { 0.5 * v } else { v };
        }
        (1.0 - s * h).clamp(0.0, 1.0)
    }
}

pub fn per_integral(tail: &TailProbFn<'_>, quad: &PerQuadrature) -> f64 {
    quad.per(&tail.posterior)
}
