//! Empirical-Bayes estimation of the population laws by marginal maximum
//! likelihood.
//!
//! Both θ-law fits run BFGS in unconstrained log-parameter space from a
//! method-of-moments start, then polish with a few Newton steps on the
//! analytic Hessian, which also yields standard errors for the diagnostics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_units;
use crate::model::{Dataset, EmpiricalDist, PayloadKind, ThetaLaw, VarianceLaw};
use crate::optim::{bfgs, BfgsConfig};
use crate::special::{digamma, ln_gamma, trigamma};

/// Identifies the data a prior was fit to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataFingerprint {
    pub unit_count: usize,
    pub data_hash: String,
}

impl DataFingerprint {
    pub fn of(ds: &Dataset) -> Self {
        let mut buf = Vec::new();
        // serialization of a validated dataset cannot fail
        write_units(&mut buf, ds.units()).expect("in-memory CSV");
        let digest = Sha256::digest(&buf);
        Self {
            unit_count: ds.len(),
            data_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub grad_norm: f64,
    pub at_boundary: bool,
    /// Asymptotic standard errors from the observed information.
    pub std_errors: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// A fitted θ law (and optionally a variance law) as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPrior {
    pub theta: ThetaLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceLaw>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub fingerprint: DataFingerprint,
    pub diagnostics: FitDiagnostics,
}

impl FittedPrior {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: FittedPrior = serde_json::from_str(s)?;
        p.theta.validate()?;
        if let Some(v) = &p.variance {
            v.validate()?;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub optimizer: BfgsConfig,
    /// Newton polishing steps after BFGS.
    pub newton_steps: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            optimizer: BfgsConfig::default(),
            newton_steps: 20,
        }
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Sum of beta-binomial log marginal likelihood terms, excluding the
/// binomial coefficients.
fn bb_loglik(ys: &[u64], ns: &[u64], a: f64, b: f64) -> f64 {
    let c = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    ys.iter()
        .zip(ns)
        .map(|(&y, &n)| {
            let (y, n) = (y as f64, n as f64);
            ln_gamma(y + a) + ln_gamma(n - y + b) - ln_gamma(n + a + b) + c
        })
        .sum()
}

/// Gradient and Hessian of the beta-binomial log-likelihood in (a, b).
fn bb_derivs(ys: &[u64], ns: &[u64], a: f64, b: f64) -> ([f64; 2], [[f64; 3]; 1]) {
    let (psi_ab, tri_ab) = (digamma(a + b), trigamma(a + b));
    let (psi_a, psi_b) = (digamma(a), digamma(b));
    let (tri_a, tri_b) = (trigamma(a), trigamma(b));
    let mut ga = 0.0;
    let mut gb = 0.0;
    let mut haa = 0.0;
    let mut hbb = 0.0;
    let mut hab = 0.0;
    for (&y, &n) in ys.iter().zip(ns) {
        let (y, n) = (y as f64, n as f64);
        let psi_n = digamma(n + a + b);
        let tri_n = trigamma(n + a + b);
        let (dya, dyb) = if y > 0.0 {
            (digamma(y + a) - psi_a, trigamma(y + a) - tri_a)
        } else {
            (0.0, 0.0)
        };
        let m = n - y;
        let (dma, dmb) = if m > 0.0 {
            (digamma(m + b) - psi_b, trigamma(m + b) - tri_b)
        } else {
            (0.0, 0.0)
        };
        let common = psi_ab - psi_n;
        let common2 = tri_ab - tri_n;
        ga += dya + common;
        gb += dma + common;
        haa += dyb + common2;
        hbb += dmb + common2;
        hab += common2;
    }
    ([ga, gb], [[haa, hab, hbb]])
}

fn inverse_2x2(h: [f64; 3]) -> Option<[f64; 3]> {
    let det = h[0] * h[2] - h[1] * h[1];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([h[2] / det, -h[1] / det, h[0] / det])
}

/// Newton polish of a 2-parameter maximization given in log coordinates.
/// `eval` returns (loglik, gradient, hessian [h00, h01, h11]) at a point.
fn newton_polish<F>(mut eval: F, mut x: [f64; 2], steps: usize, tol: f64) -> ([f64; 2], f64, f64)
where
    F: FnMut([f64; 2]) -> (f64, [f64; 2], [f64; 3]),
{
    let (mut f, mut g, mut h) = eval(x);
    for _ in 0..steps {
        let gn = g[0].hypot(g[1]);
        if gn < tol {
            break;
        }
        // maximize: step = -H⁻¹ g (H negative definite near the optimum)
        let Some(inv) = inverse_2x2(h) else { break };
        let step = [-(inv[0] * g[0] + inv[1] * g[1]), -(inv[1] * g[0] + inv[2] * g[1])];
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let cand = [x[0] + t * step[0], x[1] + t * step[1]];
            let (fc, gc, hc) = eval(cand);
            if fc.is_finite() && (fc >= f - 1e-12 * f.abs().max(1.0)) && gc[0].hypot(gc[1]) < gn {
                x = cand;
                f = fc;
                g = gc;
                h = hc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (x, f, g[0].hypot(g[1]))
}

/// Fit θ ~ Beta(a, b) to binomial counts by marginal maximum likelihood.
pub fn fit_beta_binomial(ds: &Dataset, cfg: &FitConfig) -> Result<FittedPrior> {
    let (ys, ns) = ds
        .binomial_columns()
        .ok_or_else(|| Error::ModelMismatch("beta-binomial fit needs binomial data".into()))?;
    if ys.len() < 2 {
        return Err(Error::DegenerateData("need at least 2 units".into()));
    }
    if ys.iter().all(|&y| y == 0) {
        return Err(Error::DegenerateData("all units have y = 0".into()));
    }
    if ys.iter().zip(&ns).all(|(y, n)| y == n) {
        return Err(Error::DegenerateData("all units have y = n".into()));
    }
    let (a0, b0) = beta_binomial_moments(&ys, &ns);
    const LOG_CAP: f64 = 40.0;
    let objective = |v: &[f64]| {
        let (la, lb) = (v[0].clamp(-LOG_CAP, LOG_CAP), v[1].clamp(-LOG_CAP, LOG_CAP));
        let (a, b) = (la.exp(), lb.exp());
        let ll = bb_loglik(&ys, &ns, a, b);
        let (g, _) = bb_derivs(&ys, &ns, a, b);
        (-ll, vec![-g[0] * a, -g[1] * b])
    };
    let res = bfgs(objective, &[a0.ln(), b0.ln()], &cfg.optimizer);
    let eval = |x: [f64; 2]| {
        let (a, b) = (x[0].exp(), x[1].exp());
        let ll = bb_loglik(&ys, &ns, a, b);
        let (g, [h]) = bb_derivs(&ys, &ns, a, b);
        let gl = [g[0] * a, g[1] * b];
        let hl = [h[0] * a * a + g[0] * a, h[1] * a * b, h[2] * b * b + g[1] * b];
        (ll, gl, hl)
    };
    let (x, ll, grad_norm) = newton_polish(
        eval,
        [res.x[0].clamp(-LOG_CAP, LOG_CAP), res.x[1].clamp(-LOG_CAP, LOG_CAP)],
        cfg.newton_steps,
        cfg.optimizer.grad_tol,
    );
    let (a, b) = (x[0].exp(), x[1].exp());
    let converged = grad_norm < cfg.optimizer.grad_tol;
    let mut diag = FitDiagnostics {
        iterations: res.iterations,
        grad_norm,
        at_boundary: a + b > 1e8,
        ..Default::default()
    };
    if diag.at_boundary {
        diag.warnings
            .push("a + b diverges: data show no overdispersion beyond binomial".into());
    }
    if !converged {
        diag.warnings.push(format!(
            "did not reach gradient norm {:e} (best {grad_norm:e})",
            cfg.optimizer.grad_tol
        ));
    }
    let (_, [h]) = bb_derivs(&ys, &ns, a, b);
    if let Some(inv) = inverse_2x2([-h[0], -h[1], -h[2]]) {
        if inv[0] > 0.0 && inv[2] > 0.0 {
            diag.std_errors.insert("a".into(), inv[0].sqrt());
            diag.std_errors.insert("b".into(), inv[2].sqrt());
        }
    }
    let const_term: f64 = ys.iter().zip(&ns).map(|(&y, &n)| ln_choose(n, y)).sum();
    Ok(FittedPrior {
        theta: ThetaLaw::Beta { a, b },
        variance: None,
        log_likelihood: ll + const_term,
        converged,
        fingerprint: DataFingerprint::of(ds),
        diagnostics: diag,
    })
}

/// Method-of-moments start for the beta-binomial fit.
fn beta_binomial_moments(ys: &[u64], ns: &[u64]) -> (f64, f64) {
    let k = ys.len() as f64;
    let props: Vec<f64> = ys.iter().zip(ns).map(|(&y, &n)| y as f64 / n as f64).collect();
    let m = (props.iter().sum::<f64>() / k).clamp(1e-3, 1.0 - 1e-3);
    let var = props.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    let binom_noise = ns.iter().map(|&n| m * (1.0 - m) / n as f64).sum::<f64>() / k;
    let excess = var - binom_noise;
    let total = if excess > 1e-12 {
        (m * (1.0 - m) / excess - 1.0).clamp(0.5, 1e6)
    } else {
        1e3
    };
    (m * total, (1.0 - m) * total)
}

fn normal_loglik(xs: &[f64], s2: &[f64], mu: f64, tau2: f64) -> f64 {
    const LN_2PI: f64 = 1.837_877_066_409_345_5;
    xs.iter()
        .zip(s2)
        .map(|(&x, &s)| {
            let v = tau2 + s;
            -0.5 * (LN_2PI + v.ln() + (x - mu) * (x - mu) / v)
        })
        .sum()
}

/// Gradient and Hessian of the normal/normal marginal log-likelihood in (μ, τ²).
fn normal_derivs(xs: &[f64], s2: &[f64], mu: f64, tau2: f64) -> ([f64; 2], [f64; 3]) {
    let mut g = [0.0; 2];
    let mut h = [0.0; 3];
    for (&x, &s) in xs.iter().zip(s2) {
        let w = 1.0 / (tau2 + s);
        let r = x - mu;
        g[0] += r * w;
        g[1] += 0.5 * (r * r * w * w - w);
        h[0] -= w;
        h[1] -= r * w * w;
        h[2] += 0.5 * w * w - r * r * w * w * w;
    }
    (g, h)
}

/// Fit θ ~ Normal(μ, τ²) from `X_i ~ Normal(μ, τ² + σ_i²)`.
///
/// `sigma2` may contain zeros here (the model then reduces to plain normal
/// maximum likelihood); datasets themselves require positive variances.
pub fn fit_normal_normal_columns(xs: &[f64], sigma2: &[f64], cfg: &FitConfig) -> Result<NormalFit> {
    if xs.len() < 2 || xs.len() != sigma2.len() {
        return Err(Error::DegenerateData("need at least 2 units".into()));
    }
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    if var == 0.0 {
        return Err(Error::DegenerateData(
            "all x identical: tau2 estimate is 0".into(),
        ));
    }
    let mean_s2 = sigma2.iter().sum::<f64>() / k;
    let tau2_start = (var - mean_s2).max(0.05 * var);
    let start_ll = normal_loglik(xs, sigma2, mean, tau2_start);

    let objective = |v: &[f64]| {
        let tau2 = v[1].clamp(-700.0, 700.0).exp();
        let ll = normal_loglik(xs, sigma2, v[0], tau2);
        let (g, _) = normal_derivs(xs, sigma2, v[0], tau2);
        (-ll, vec![-g[0], -g[1] * tau2])
    };
    let res = bfgs(objective, &[mean, tau2_start.ln()], &cfg.optimizer);
    let eval = |x: [f64; 2]| {
        let tau2 = x[1].exp();
        let ll = normal_loglik(xs, sigma2, x[0], tau2);
        let (g, h) = normal_derivs(xs, sigma2, x[0], tau2);
        (ll, [g[0], g[1] * tau2], [h[0], h[1] * tau2, h[2] * tau2 * tau2 + g[1] * tau2])
    };
    let (x, mut ll, mut grad_norm) =
        newton_polish(eval, [res.x[0], res.x[1].clamp(-700.0, 700.0)], cfg.newton_steps, cfg.optimizer.grad_tol);
    let (mut mu, mut tau2) = (x[0], x[1].exp());
    let mut at_boundary = false;
    let mut warnings = Vec::new();

    // Boundary τ² = 0: profile score at the origin is non-positive.
    if sigma2.iter().all(|&s| s > 0.0) {
        let wsum: f64 = sigma2.iter().map(|s| 1.0 / s).sum();
        let mu0 = xs.iter().zip(sigma2).map(|(x, s)| x / s).sum::<f64>() / wsum;
        let score0: f64 = xs
            .iter()
            .zip(sigma2)
            .map(|(x, s)| 0.5 * ((x - mu0).powi(2) / (s * s) - 1.0 / s))
            .sum();
        let ll0 = normal_loglik(xs, sigma2, mu0, 0.0);
        if score0 <= 0.0 && ll0 >= ll - 1e-9 {
            mu = mu0;
            tau2 = 0.0;
            ll = ll0;
            grad_norm = 0.0;
            at_boundary = true;
            warnings.push("tau2 clamped to 0; r-values are degenerate".to_string());
        }
    }
    let converged = at_boundary || grad_norm < cfg.optimizer.grad_tol;
    if !converged {
        warnings.push(format!("gradient norm {grad_norm:e} above tolerance"));
    }
    let mut std_errors = BTreeMap::new();
    if !at_boundary {
        let (_, h) = normal_derivs(xs, sigma2, mu, tau2);
        if let Some(inv) = inverse_2x2([-h[0], -h[1], -h[2]]) {
            if inv[0] > 0.0 && inv[2] > 0.0 {
                std_errors.insert("mu".into(), inv[0].sqrt());
                std_errors.insert("tau2".into(), inv[2].sqrt());
            }
        }
    }
    Ok(NormalFit {
        mu,
        tau2,
        log_likelihood: ll,
        start_log_likelihood: start_ll,
        converged,
        diagnostics: FitDiagnostics {
            iterations: res.iterations,
            grad_norm,
            at_boundary,
            std_errors,
            warnings,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFit {
    pub mu: f64,
    pub tau2: f64,
    pub log_likelihood: f64,
    /// Log-likelihood at the method-of-moments start.
    pub start_log_likelihood: f64,
    pub converged: bool,
    pub diagnostics: FitDiagnostics,
}

/// Fit the normal/normal θ law to a normal dataset.
pub fn fit_normal_normal(ds: &Dataset, cfg: &FitConfig) -> Result<FittedPrior> {
    let (xs, s2) = ds
        .normal_columns()
        .ok_or_else(|| Error::ModelMismatch("normal/normal fit needs normal data".into()))?;
    let fit = fit_normal_normal_columns(&xs, &s2, cfg)?;
    Ok(FittedPrior {
        theta: ThetaLaw::Normal {
            mu: fit.mu,
            tau2: fit.tau2,
        },
        variance: None,
        log_likelihood: fit.log_likelihood,
        converged: fit.converged,
        fingerprint: DataFingerprint::of(ds),
        diagnostics: fit.diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceFamily {
    Gamma,
    InvGamma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceFit {
    pub law: VarianceLaw,
    pub log_likelihood: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Gamma shape and rate by maximum likelihood. Solves
/// `ln k - ψ(k) = ln(mean) - mean(ln v)` by Newton iteration in `ln k`.
fn gamma_ml(values: &[f64]) -> Result<(f64, f64, bool)> {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let mean_log = values.iter().map(|v| v.ln()).sum::<f64>() / k;
    let s = mean.ln() - mean_log;
    if s <= 1e-14 {
        return Err(Error::DegenerateData("zero spread".into()));
    }
    let mut shape = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    let mut converged = false;
    for _ in 0..100 {
        let f = shape.ln() - digamma(shape) - s;
        // d/d(ln k) of f
        let df = 1.0 - shape * trigamma(shape);
        let step = f / df;
        let next = (shape.ln() - step).exp();
        if ((next - shape) / shape).abs() < 1e-14 {
            shape = next;
            converged = true;
            break;
        }
        shape = next;
    }
    Ok((shape, shape / mean, converged))
}

/// Fit a variance law to observed σ² values by maximum likelihood.
pub fn fit_variance_law_values(sigma2: &[f64], family: VarianceFamily) -> Result<VarianceFit> {
    if sigma2.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if sigma2.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidParameter("variances must be positive".into()));
    }
    let first = sigma2[0];
    if sigma2.iter().all(|&s| s == first) {
        return Ok(VarianceFit {
            law: VarianceLaw::PointMass { sigma2: first },
            log_likelihood: f64::INFINITY,
            converged: true,
            warnings: vec![format!("all variances equal {first}; using a point mass")],
        });
    }
    let fit = match family {
        VarianceFamily::Gamma => {
            let (shape, rate, converged) = gamma_ml(sigma2)?;
            let ll = sigma2
                .iter()
                .map(|&v| shape * rate.ln() + (shape - 1.0) * v.ln() - rate * v - ln_gamma(shape))
                .sum();
            VarianceFit {
                law: VarianceLaw::Gamma { shape, rate },
                log_likelihood: ll,
                converged,
                warnings: vec![],
            }
        }
        VarianceFamily::InvGamma => {
            let inv: Vec<f64> = sigma2.iter().map(|v| 1.0 / v).collect();
            let (shape, scale, converged) = gamma_ml(&inv)?;
            let ll = sigma2
                .iter()
                .map(|&v| shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * v.ln() - scale / v)
                .sum();
            VarianceFit {
                law: VarianceLaw::InvGamma { shape, scale },
                log_likelihood: ll,
                converged,
                warnings: vec![],
            }
        }
    };
    if !fit.converged {
        return Err(Error::NonConvergence {
            iterations: 100,
            grad_norm: f64::NAN,
        });
    }
    Ok(fit)
}

pub fn fit_variance_law(ds: &Dataset, family: VarianceFamily) -> Result<VarianceFit> {
    let (_, s2) = ds
        .normal_columns()
        .ok_or_else(|| Error::ModelMismatch("variance law fit needs normal data".into()))?;
    fit_variance_law_values(&s2, family)
}

/// Minimum pooled draws for an empirical θ law.
pub const MIN_PRIOR_DRAWS: usize = 1000;

/// Empirical θ law from pooled or externally supplied population draws.
pub fn empirical_prior_from_draws(draws: Vec<f64>) -> Result<ThetaLaw> {
    if draws.len() < MIN_PRIOR_DRAWS {
        return Err(Error::TooFewDraws {
            got: draws.len(),
            need: MIN_PRIOR_DRAWS,
        });
    }
    Ok(ThetaLaw::Empirical {
        dist: EmpiricalDist::new(draws)?,
    })
}

/// Pool all unit draws of a draws dataset into an empirical θ law.
pub fn empirical_prior_from_dataset(ds: &Dataset) -> Result<ThetaLaw> {
    if ds.kind() != PayloadKind::Draws {
        return Err(Error::ModelMismatch("pooled prior needs posterior draws".into()));
    }
    let pooled: Vec<f64> = ds
        .units()
        .iter()
        .flat_map(|u| match &u.payload {
            crate::model::Payload::Draws { draws } => draws.clone(),
            _ => Vec::new(),
        })
        .collect();
    empirical_prior_from_draws(pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_dataset, UnitRecord};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Binomial, Distribution, Gamma, Normal};

    fn binom(units: &[(u64, u64)]) -> Dataset {
        validate_dataset(
            units
                .iter()
                .enumerate()
                .map(|(i, &(y, n))| UnitRecord::binomial(format!("u{i}"), y, n))
                .collect(),
            &Default::default(),
        )
        .unwrap()
    }

    #[test]
    fn degenerate_binomial_inputs() {
        assert!(matches!(
            fit_beta_binomial(&binom(&[(0, 3), (0, 5)]), &Default::default()),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            fit_beta_binomial(&binom(&[(3, 3), (5, 5)]), &Default::default()),
            Err(Error::DegenerateData(_))
        ));
        assert!(fit_beta_binomial(&binom(&[(1, 3)]), &Default::default()).is_err());
    }

    #[test]
    fn symmetric_pair_has_mean_one_half() {
        let fit = fit_beta_binomial(&binom(&[(1, 2), (1, 2)]), &Default::default()).unwrap();
        let ThetaLaw::Beta { a, b } = fit.theta else { panic!() };
        assert!((a / (a + b) - 0.5).abs() < 1e-9, "a={a} b={b}");
    }

    #[test]
    fn beta_binomial_recovers_generating_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(20140416);
        let beta = Beta::new(4.0, 6.0).unwrap();
        let units: Vec<(u64, u64)> = (0..10_000)
            .map(|_| {
                let n = 10 + (rand::Rng::random_range(&mut rng, 0..191u64));
                let p: f64 = beta.sample(&mut rng);
                let y = Binomial::new(n, p).unwrap().sample(&mut rng);
                (y, n)
            })
            .collect();
        let ds = binom(&units);
        let fit = fit_beta_binomial(&ds, &Default::default()).unwrap();
        let ThetaLaw::Beta { a, b } = fit.theta else { panic!() };
        assert!(fit.converged, "{:?}", fit.diagnostics);
        assert!((a - 4.0).abs() < 0.4 && (b - 6.0).abs() < 0.6, "a={a} b={b}");
        // fitted mean inside the hull of observed proportions
        let m = a / (a + b);
        let props: Vec<f64> = units.iter().map(|&(y, n)| y as f64 / n as f64).collect();
        let lo = props.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = props.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= m && m <= hi);
        assert!(fit.diagnostics.std_errors.contains_key("a"));
    }

    #[test]
    fn zero_sampling_variance_reduces_to_normal_ml() {
        let xs = [1.0, 2.0, 4.0, 7.0, -1.5];
        let fit = fit_normal_normal_columns(&xs, &[0.0; 5], &Default::default()).unwrap();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((fit.mu - mean).abs() < 1e-9);
        assert!((fit.tau2 - var).abs() < 1e-8);
    }

    #[test]
    fn symmetric_pair_normal_mean_zero() {
        let fit = fit_normal_normal_columns(&[-1.0, 1.0], &[1.0, 1.0], &Default::default()).unwrap();
        assert!(fit.mu.abs() < 1e-12);
        // sample variance 1 equals σ², so τ² sits on the boundary
        assert!(fit.diagnostics.at_boundary && fit.tau2 == 0.0);
    }

    #[test]
    fn identical_x_is_degenerate() {
        assert!(matches!(
            fit_normal_normal_columns(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0], &Default::default()),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn normal_normal_recovers_truth_and_beats_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gamma = Gamma::new(1.0, 1.0).unwrap();
        let std = Normal::new(0.0, 1.0).unwrap();
        let n = 100_000;
        let mut xs = Vec::with_capacity(n);
        let mut s2 = Vec::with_capacity(n);
        for _ in 0..n {
            let theta: f64 = std.sample(&mut rng);
            let v: f64 = gamma.sample(&mut rng);
            xs.push(theta + v.sqrt() * std.sample(&mut rng));
            s2.push(v);
        }
        let fit = fit_normal_normal_columns(&xs, &s2, &Default::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.mu.abs() < 0.02, "mu={}", fit.mu);
        assert!((fit.tau2 - 1.0).abs() < 0.03, "tau2={}", fit.tau2);
        assert!(fit.log_likelihood >= fit.start_log_likelihood);
    }

    #[test]
    fn variance_law_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Gamma::new(4.0, 0.25).unwrap();
        let v: Vec<f64> = (0..1_000_000).map(|_| g.sample(&mut rng)).collect();
        let fit = fit_variance_law_values(&v, VarianceFamily::Gamma).unwrap();
        let VarianceLaw::Gamma { shape, rate } = fit.law else { panic!() };
        assert!((shape / 4.0 - 1.0).abs() < 0.02);
        assert!((shape / rate - 1.0).abs() < 0.01);

        // InvGamma(3, 2): reciprocal of Gamma(3, rate 2)
        let g = Gamma::new(3.0, 0.5).unwrap();
        let v: Vec<f64> = (0..10_000).map(|_| 1.0 / g.sample(&mut rng)).collect();
        let fit = fit_variance_law_values(&v, VarianceFamily::InvGamma).unwrap();
        let VarianceLaw::InvGamma { shape, scale } = fit.law else { panic!() };
        assert!((shape / 3.0 - 1.0).abs() < 0.05, "shape={shape}");
        assert!((scale / 2.0 - 1.0).abs() < 0.05, "scale={scale}");
        assert!(fit.log_likelihood.is_finite());

        let pm = fit_variance_law_values(&[0.7; 10], VarianceFamily::Gamma).unwrap();
        assert_eq!(pm.law, VarianceLaw::PointMass { sigma2: 0.7 });
        assert_eq!(pm.warnings.len(), 1);
    }

    #[test]
    fn empirical_prior_quantiles() {
        assert!(matches!(
            empirical_prior_from_draws(vec![0.0; 999]),
            Err(Error::TooFewDraws { .. })
        ));
        let grid: Vec<f64> = (1..=1000).map(|k| k as f64 / 1000.0).collect();
        let law = empirical_prior_from_draws(grid).unwrap();
        assert!((law.upper_quantile(0.10) - 0.9001).abs() < 1e-12);
        let law = empirical_prior_from_draws(vec![3.0; 2000]).unwrap();
        assert_eq!(law.upper_quantile(0.01), 3.0);
        assert_eq!(law.upper_quantile(0.7), 3.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let std = Normal::new(0.0, 1.0).unwrap();
        let law = empirical_prior_from_draws((0..1_000_000).map(|_| std.sample(&mut rng)).collect()).unwrap();
        assert!((law.upper_quantile(0.1) - 1.2816).abs() < 0.01);
    }

    #[test]
    fn fitted_prior_json_round_trip() {
        let fit = fit_beta_binomial(&binom(&[(3, 9), (5, 8), (1, 4), (9, 12)]), &Default::default()).unwrap();
        let back = FittedPrior::from_json(&fit.to_json().unwrap()).unwrap();
        assert_eq!(back, fit);
        assert_eq!(back.fingerprint.unit_count, 4);
        assert_eq!(back.fingerprint.data_hash.len(), 64);
    }
}
