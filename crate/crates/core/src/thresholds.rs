//! Threshold-function families for the normal/normal model, on the
//! standardized scale (θ ~ N(0, 1), X | θ, σ² ~ N(θ, σ²)).
//!
//! A method selects unit i into its top-α list when `X_i >= t_α(σ_i²)`.
//! Each family carries one constant `u_α`, fixed by requiring the marginal
//! exceedance `E_g[Φ̄(t_α(σ²)/√(1+σ²))]` to equal α.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VarianceLaw;
use crate::quadrature::QuadConfig;
use crate::roots::{brent, expand_bracket};
use crate::special::{norm_cdf, norm_quantile, norm_sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Mle,
    /// One-sided z statistic against the benchmark `c` (standardized units).
    Pv { c: f64 },
    Pm,
    Per,
    Bf,
    MaxAgree,
}

impl Method {
    pub const PV0: Method = Method::Pv { c: 0.0 };

    pub fn name(&self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::Pv { c } if *c == 0.0 => "pv0",
            Method::Pv { .. } => "pvc",
            Method::Pm => "pm",
            Method::Per => "per",
            Method::Bf => "bf",
            Method::MaxAgree => "maxagree",
        }
    }

    /// The Table-1 families with PV at the prior mean.
    pub fn table_one() -> [Method; 6] {
        [Method::Mle, Method::PV0, Method::Pm, Method::Per, Method::Bf, Method::MaxAgree]
    }
}

/// `t_α(σ²)` given `u_α`. `alpha` is used only by MAXAGREE (through `θ_α`).
pub fn threshold(method: Method, alpha: f64, u: f64, s2: f64) -> f64 {
    match method {
        Method::Mle => u,
        Method::Pv { c } => c + u * s2.sqrt(),
        Method::Pm => u * (s2 + 1.0),
        Method::Per => u * ((s2 + 1.0) * (2.0 * s2 + 1.0)).sqrt(),
        Method::Bf => {
            let k = u + (1.0 / s2).ln_1p();
            (s2 * (s2 + 1.0) * k).max(0.0).sqrt()
        }
        Method::MaxAgree => maxagree_threshold(norm_quantile(1.0 - alpha), u, s2),
    }
}

/// `t*_α(σ²) = θ_α(σ²+1) - u_α√(σ²(σ²+1))`.
pub fn maxagree_threshold(theta_alpha: f64, u: f64, s2: f64) -> f64 {
    theta_alpha * (s2 + 1.0) - u * (s2 * (s2 + 1.0)).sqrt()
}

/// Lower and upper conditional tail masses of `X | σ²` at the threshold.
fn cond_tails(method: Method, alpha: f64, u: f64, s2: f64) -> (f64, f64) {
    let z = threshold(method, alpha, u, s2) / (1.0 + s2).sqrt();
    (norm_cdf(z), norm_sf(z))
}

fn quad_for(alpha: f64) -> QuadConfig {
    let small = alpha.min(1.0 - alpha);
    QuadConfig {
        abs_tol: (1e-12 * small).min(1e-10),
        rel_tol: 1e-12,
        ..Default::default()
    }
}

/// Marginal exceedance `P(X >= t_α(σ²))` minus α, evaluated on whichever
/// tail is smaller so that tiny α keep their relative accuracy.
pub fn size_residual(method: Method, alpha: f64, u: f64, law: &VarianceLaw) -> Result<f64> {
    let cfg = quad_for(alpha);
    if alpha <= 0.5 {
        Ok(law.expect(|s| cond_tails(method, alpha, u, s).1, &cfg)? - alpha)
    } else {
        Ok((1.0 - alpha) - law.expect(|s| cond_tails(method, alpha, u, s).0, &cfg)?)
    }
}

/// The marginal exceedance probability of a threshold family.
pub fn exceedance(method: Method, alpha: f64, u: f64, law: &VarianceLaw) -> Result<f64> {
    Ok(size_residual(method, alpha, u, law)? + alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct USolution {
    pub u: f64,
    /// Marginal exceedance minus α at `u`.
    pub residual: f64,
}

/// Solve the size constraint for `u_α`. `start` seeds the bracket search.
pub fn solve_u_alpha_from(method: Method, alpha: f64, law: &VarianceLaw, start: f64) -> Result<USolution> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, 1)")));
    }
    if matches!(method, Method::Bf) && alpha >= 0.5 {
        return Err(Error::NoBracket(format!(
            "BF selects only X > 0, so its size is below 0.5; alpha = {alpha} unreachable"
        )));
    }
    let mut failure = None;
    let mut f = |u: f64| match size_residual(method, alpha, u, law) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let step = 0.25;
    let (lo, hi) = expand_bracket(&mut f, start - step, start + step, 80)?;
    let u = brent(&mut f, lo, hi, 1e-13, 0.0)?;
    let residual = f(u);
    if let Some(e) = failure {
        return Err(e);
    }
    // Count the residual against α's own scale in the far tails.
    let scale = alpha.min(1.0 - alpha).min(1.0);
    if residual.abs() > 1e-8 * scale.max(1e-2) {
        return Err(Error::NoBracket(format!(
            "size residual {residual:e} at u = {u} for alpha = {alpha}"
        )));
    }
    Ok(USolution { u, residual })
}

pub fn solve_u_alpha(method: Method, alpha: f64, law: &VarianceLaw) -> Result<USolution> {
    let start = match method {
        Method::MaxAgree => 0.0,
        _ => norm_quantile(1.0 - alpha),
    };
    solve_u_alpha_from(method, alpha, law, start)
}

/// `u_α` for several α at once, with each solve seeded by its neighbour.
pub fn solve_u_alphas(method: Method, alphas: &[f64], law: &VarianceLaw) -> Result<Vec<USolution>> {
    let mut out: Vec<USolution> = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let sol = match out.last() {
            Some(prev) => solve_u_alpha_from(method, a, law, prev.u),
            None => solve_u_alpha(method, a, law),
        }?;
        out.push(sol);
    }
    Ok(out)
}

/// One point of a threshold curve, on the standardized scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub sigma2: f64,
    pub threshold: f64,
}

/// Threshold values for every (α, σ²) pair, α-major.
pub fn threshold_curves(
    method: Method,
    alphas: &[f64],
    sigma2_grid: &[f64],
    law: &VarianceLaw,
) -> Result<Vec<CurvePoint>> {
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&i, &j| alphas[i].total_cmp(&alphas[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| alphas[i]).collect();
    let sols = solve_u_alphas(method, &sorted, law)?;
    let mut u_of = vec![0.0; alphas.len()];
    for (k, &i) in order.iter().enumerate() {
        u_of[i] = sols[k].u;
    }
    let mut out = Vec::with_capacity(alphas.len() * sigma2_grid.len());
    for (i, &a) in alphas.iter().enumerate() {
        for &s in sigma2_grid {
            out.push(CurvePoint {
                alpha: a,
                sigma2: s,
                threshold: threshold(method, a, u_of[i], s),
            });
        }
    }
    Ok(out)
}

/// Threshold on the original scale, `μ + τ·t_α(σ²/τ²)`.
pub fn rescale_threshold(t_std: f64, mu: f64, tau2: f64) -> f64 {
    mu + tau2.sqrt() * t_std
}

/// Ranking variables on the standardized scale, with their orientation:
/// larger is better except for PER.
pub fn standardized_variable(method: Method, x: f64, s2: f64) -> f64 {
    match method {
        Method::Mle => x,
        Method::Pv { c } => (x - c) / s2.sqrt(),
        Method::Pm => x / (s2 + 1.0),
        Method::Per => {
            let m = x / (s2 + 1.0);
            let v = s2 / (s2 + 1.0);
            norm_cdf(-m / (1.0 + v).sqrt())
        }
        Method::Bf => {
            if x > 0.0 {
                -0.5 * (1.0 / s2).ln_1p() + x * x / (2.0 * s2 * (s2 + 1.0))
            } else {
                f64::NEG_INFINITY
            }
        }
        Method::MaxAgree => f64::NAN,
    }
}
