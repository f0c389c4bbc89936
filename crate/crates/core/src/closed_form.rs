//! Closed-form r-values for the normal/normal model.
//!
//! On the standardized scale a unit with data (x, σ²) has r-value r solving
//! `x = t*_r(σ²)`. The constant `u_r` is tabulated once per variance law on
//! a grid uniform in logit(α) and interpolated by cubic Hermite polynomials
//! using the exact derivative `du/dα` from the implicit-function theorem.

use crate::error::{Error, Result};
use crate::model::{ThetaLaw, VarianceLaw};
use crate::quadrature::QuadConfig;
use crate::roots::brent;
use crate::special::{norm_pdf, norm_quantile};
use crate::thresholds::{maxagree_threshold, solve_u_alpha_from, Method};

#[derive(Debug, Clone, Copy)]
pub struct UTableConfig {
    pub nodes: usize,
    /// Table covers `[alpha_min, 1 - alpha_min]`.
    pub alpha_min: f64,
}

impl Default for UTableConfig {
    fn default() -> Self {
        Self {
            nodes: 2301,
            alpha_min: 1e-10,
        }
    }
}

fn logit(a: f64) -> f64 {
    (a / (1.0 - a)).ln()
}

fn expit(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `u_α` for MAXAGREE as a smooth function of α.
#[derive(Debug, Clone)]
pub struct UTable {
    z: Vec<f64>,
    u: Vec<f64>,
    du_dz: Vec<f64>,
}

/// `du/dα` at a solved `(α, u)`.
fn du_dalpha(alpha: f64, u: f64, law: &VarianceLaw) -> Result<f64> {
    let theta = norm_quantile(1.0 - alpha);
    let cfg = QuadConfig {
        abs_tol: 1e-13 * alpha.min(1.0 - alpha),
        rel_tol: 1e-12,
        ..Default::default()
    };
    let z = |s: f64| theta * (1.0 + s).sqrt() - u * s.sqrt();
    let a = law.expect(|s| norm_pdf(z(s)) * (1.0 + s).sqrt(), &cfg)?;
    let b = law.expect(|s| norm_pdf(z(s)) * s.sqrt(), &cfg)?;
    Ok((1.0 - a / norm_pdf(theta)) / b)
}

impl UTable {
    /// Tabulate for a variance law on the standardized scale.
    pub fn build(law: &VarianceLaw, cfg: &UTableConfig) -> Result<Self> {
        if cfg.nodes < 2 || !(cfg.alpha_min > 0.0 && cfg.alpha_min < 0.5) {
            return Err(Error::InvalidParameter("bad u table configuration".into()));
        }
        if let VarianceLaw::PointMass { sigma2 } = law {
            if *sigma2 <= 0.0 {
                return Err(Error::InvalidParameter("point-mass variance must be positive".into()));
            }
        }
        let z_hi = logit(1.0 - cfg.alpha_min);
        let h = 2.0 * z_hi / (cfg.nodes - 1) as f64;
        let z: Vec<f64> = (0..cfg.nodes).map(|k| -z_hi + k as f64 * h).collect();
        let mut u = Vec::with_capacity(cfg.nodes);
        let mut du_dz = Vec::with_capacity(cfg.nodes);
        let mut prev = 0.0;
        for &zk in &z {
            let a = expit(zk);
            let sol = solve_u_alpha_from(Method::MaxAgree, a, law, prev)?;
            prev = sol.u;
            u.push(sol.u);
            du_dz.push(du_dalpha(a, sol.u, law)? * a * (1.0 - a));
        }
        Ok(Self { z, u, du_dz })
    }

    pub fn alpha_range(&self) -> (f64, f64) {
        (expit(self.z[0]), expit(self.z[self.z.len() - 1]))
    }

    fn eval_z(&self, zq: f64) -> f64 {
        let n = self.z.len();
        let h = self.z[1] - self.z[0];
        let pos = ((zq - self.z[0]) / h).clamp(0.0, (n - 1) as f64);
        let k = (pos.floor() as usize).min(n - 2);
        let t = pos - k as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.u[k] + h10 * h * self.du_dz[k] + h01 * self.u[k + 1] + h11 * h * self.du_dz[k + 1]
    }

    /// Interpolated `u_α`; α outside the table range is clamped to it.
    pub fn u(&self, alpha: f64) -> f64 {
        self.eval_z(logit(alpha))
    }
}

/// Closed-form r-value solver for a fitted normal prior and variance law.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    mu: f64,
    tau: f64,
    table: UTable,
}

impl ClosedForm {
    /// `variance_law` is on the original data scale.
    pub fn new(prior: &ThetaLaw, variance_law: &VarianceLaw, cfg: &UTableConfig) -> Result<Self> {
        let ThetaLaw::Normal { mu, tau2 } = prior else {
            return Err(Error::ModelMismatch("closed form needs a normal prior".into()));
        };
        if !(*tau2 > 0.0) {
            return Err(Error::InvalidParameter(
                "closed form needs tau2 > 0 (fitted prior is degenerate)".into(),
            ));
        }
        let std_law = variance_law.scaled(1.0 / tau2);
        Ok(Self {
            mu: *mu,
            tau: tau2.sqrt(),
            table: UTable::build(&std_law, cfg)?,
        })
    }

    pub fn table(&self) -> &UTable {
        &self.table
    }

    /// `t*_α(σ²)` on the standardized scale with tabulated `u_α`.
    pub fn threshold_std(&self, alpha: f64, s2: f64) -> f64 {
        maxagree_threshold(norm_quantile(1.0 - alpha), self.table.u(alpha), s2)
    }

    /// r-value for data (x, σ²) on the original scale.
    pub fn rvalue(&self, x: f64, sigma2: f64) -> f64 {
        let xs = (x - self.mu) / self.tau;
        let s2 = sigma2 / (self.tau * self.tau);
        let (z_lo, z_hi) = (self.table.z[0], self.table.z[self.table.z.len() - 1]);
        let f = |z: f64| {
            let a = expit(z);
            xs - maxagree_threshold(norm_quantile(1.0 - a), self.table.eval_z(z), s2)
        };
        if f(z_lo) >= 0.0 {
            return expit(z_lo);
        }
        if f(z_hi) <= 0.0 {
            return 1.0;
        }
        match brent(f, z_lo, z_hi, 1e-12, 0.0) {
            Ok(z) => expit(z),
            Err(_) => f64::NAN,
        }
    }
}
