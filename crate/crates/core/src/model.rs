//! Domain types shared by every stage: unit records, validated datasets,
//! population laws for θ and σ², and rank assignment.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, UnitIssue};
use crate::quadrature::{integrate_half_line, QuadConfig};
use crate::special::{beta_inc_inv, ln_gamma, norm_quantile};

/// One unit's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Normal { x: f64, sigma2: f64 },
    Binomial { y: u64, n: u64 },
    Draws { draws: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Normal,
    Binomial,
    Draws,
}

impl PayloadKind {
    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::Normal => "normal",
            PayloadKind::Binomial => "binomial",
            PayloadKind::Draws => "draws",
        }
    }
}

impl std::str::FromStr for PayloadKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(PayloadKind::Normal),
            "binomial" => Ok(PayloadKind::Binomial),
            "draws" => Ok(PayloadKind::Draws),
            other => Err(Error::InvalidParameter(format!("unknown model kind '{other}'"))),
        }
    }
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::Normal { .. } => PayloadKind::Normal,
            Payload::Binomial { .. } => PayloadKind::Binomial,
            Payload::Draws { .. } => PayloadKind::Draws,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub id: String,
    pub payload: Payload,
}

impl UnitRecord {
    pub fn normal(id: impl Into<String>, x: f64, sigma2: f64) -> Self {
        Self {
            id: id.into(),
            payload: Payload::Normal { x, sigma2 },
        }
    }

    pub fn binomial(id: impl Into<String>, y: u64, n: u64) -> Self {
        Self {
            id: id.into(),
            payload: Payload::Binomial { y, n },
        }
    }

    pub fn draws(id: impl Into<String>, draws: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            payload: Payload::Draws { draws },
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationConfig {
    /// Posterior-draw count below which a warning is emitted.
    pub min_draws: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { min_draws: 100 }
    }
}

/// A non-empty, homogeneous, invariant-checked collection of units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    kind: PayloadKind,
    units: Vec<UnitRecord>,
    warnings: Vec<String>,
}

/// Check unit invariants and payload homogeneity.
pub fn validate_dataset(units: Vec<UnitRecord>, cfg: &ValidationConfig) -> Result<Dataset> {
    let first = units.first().ok_or(Error::EmptyDataset)?;
    let kind = first.payload.kind();
    if let Some(odd) = units.iter().find(|u| u.payload.kind() != kind) {
        return Err(Error::MixedPayloadKinds {
            first: kind.name().to_string(),
            other: format!("{} (unit {})", odd.payload.kind().name(), odd.id),
        });
    }
    let mut issues = Vec::new();
    let mut warnings = Vec::new();
    for u in &units {
        let mut bad = |problem: String| {
            issues.push(UnitIssue {
                id: u.id.clone(),
                problem,
            })
        };
        match &u.payload {
            Payload::Normal { x, sigma2 } => {
                if !x.is_finite() {
                    bad(format!("x = {x} is not finite"));
                }
                if !(sigma2.is_finite() && *sigma2 > 0.0) {
                    bad(format!("sigma2 = {sigma2} must be positive and finite"));
                }
            }
            Payload::Binomial { y, n } => {
                if *n == 0 {
                    bad("n must be at least 1".to_string());
                } else if y > n {
                    bad(format!("y = {y} exceeds n = {n}"));
                }
            }
            Payload::Draws { draws } => {
                if draws.is_empty() {
                    bad("no posterior draws".to_string());
                } else if draws.iter().any(|d| !d.is_finite()) {
                    bad("non-finite posterior draw".to_string());
                } else if draws.len() < cfg.min_draws {
                    warnings.push(format!(
                        "unit {} has {} draws (< {})",
                        u.id,
                        draws.len(),
                        cfg.min_draws
                    ));
                }
            }
        }
    }
    if !issues.is_empty() {
        return Err(Error::InvalidUnits(issues));
    }
    Ok(Dataset {
        kind,
        units,
        warnings,
    })
}

impl Dataset {
    pub fn kind(&self) -> PayloadKind {
        self.kind
    }

    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn ids(&self) -> Vec<String> {
        self.units.iter().map(|u| u.id.clone()).collect()
    }

    pub fn into_units(self) -> Vec<UnitRecord> {
        self.units
    }

    /// `(Σy, Σn)` for binomial data.
    pub fn binomial_totals(&self) -> Option<(u64, u64)> {
        if self.kind != PayloadKind::Binomial {
            return None;
        }
        let mut ys = 0;
        let mut ns = 0;
        for u in &self.units {
            if let Payload::Binomial { y, n } = u.payload {
                ys += y;
                ns += n;
            }
        }
        Some((ys, ns))
    }

    /// Pooled success rate `Σy / Σn` for binomial data.
    pub fn marginal_rate(&self) -> Option<f64> {
        self.binomial_totals().map(|(y, n)| y as f64 / n as f64)
    }

    /// `(x, σ²)` columns for normal data.
    pub fn normal_columns(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.kind != PayloadKind::Normal {
            return None;
        }
        Some(
            self.units
                .iter()
                .filter_map(|u| match u.payload {
                    Payload::Normal { x, sigma2 } => Some((x, sigma2)),
                    _ => None,
                })
                .unzip(),
        )
    }

    /// `(y, n)` columns for binomial data.
    pub fn binomial_columns(&self) -> Option<(Vec<u64>, Vec<u64>)> {
        if self.kind != PayloadKind::Binomial {
            return None;
        }
        Some(
            self.units
                .iter()
                .filter_map(|u| match u.payload {
                    Payload::Binomial { y, n } => Some((y, n)),
                    _ => None,
                })
                .unzip(),
        )
    }
}

/// Sorted sample with type-7 (linear interpolation) quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDist {
    sorted: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewDraws { got: 0, need: 1 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite empirical value".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Lower quantile at probability `p`, interpolating between order statistics.
    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.sorted, p)
    }

    /// Fraction of values `>= t`, located by bisection.
    pub fn upper_fraction(&self, t: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v < t);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }
}

/// Type-7 quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Population law of the unit parameters θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ThetaLaw {
    Normal { mu: f64, tau2: f64 },
    Beta { a: f64, b: f64 },
    Empirical { dist: EmpiricalDist },
}

/// Population law of the unit sampling variances σ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum VarianceLaw {
    Gamma { shape: f64, rate: f64 },
    InvGamma { shape: f64, scale: f64 },
    PointMass { sigma2: f64 },
    Empirical { dist: EmpiricalDist },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub theta: ThetaLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceLaw>,
}

/// `θ_α`, the upper-α quantile of the θ law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaQuantile {
    pub alpha: f64,
    pub theta_alpha: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive and finite")))
    }
}

impl ThetaLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            ThetaLaw::Normal { mu, tau2 } => {
                if !mu.is_finite() || !tau2.is_finite() || *tau2 < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "normal prior ({mu}, {tau2}) invalid"
                    )));
                }
                Ok(())
            }
            ThetaLaw::Beta { a, b } => {
                check_positive("a", *a)?;
                check_positive("b", *b)
            }
            ThetaLaw::Empirical { dist } => {
                if dist.is_empty() {
                    Err(Error::TooFewDraws { got: 0, need: 1 })
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `θ_α` with `P(θ >= θ_α) = α`.
    pub fn upper_quantile(&self, alpha: f64) -> f64 {
        match self {
            ThetaLaw::Normal { mu, tau2 } => mu + tau2.sqrt() * norm_quantile(1.0 - alpha),
            ThetaLaw::Beta { a, b } => beta_inc_inv(1.0 - alpha, *a, *b),
            ThetaLaw::Empirical { dist } => dist.quantile(1.0 - alpha),
        }
    }

    pub fn theta_quantile(&self, alpha: f64) -> ThetaQuantile {
        ThetaQuantile {
            alpha,
            theta_alpha: self.upper_quantile(alpha),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ThetaLaw::Normal { mu, .. } => *mu,
            ThetaLaw::Beta { a, b } => a / (a + b),
            ThetaLaw::Empirical { dist } => dist.mean(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ThetaLaw::Normal { .. } => "normal",
            ThetaLaw::Beta { .. } => "beta",
            ThetaLaw::Empirical { .. } => "empirical",
        }
    }
}

impl VarianceLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            VarianceLaw::Gamma { shape, rate } => {
                check_positive("shape", *shape)?;
                check_positive("rate", *rate)
            }
            VarianceLaw::InvGamma { shape, scale } => {
                check_positive("shape", *shape)?;
                check_positive("scale", *scale)
            }
            VarianceLaw::PointMass { sigma2 } => check_positive("sigma2", *sigma2),
            VarianceLaw::Empirical { dist } => {
                if dist.values().iter().any(|v| *v <= 0.0) {
                    Err(Error::InvalidParameter("empirical variances must be positive".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Gamma law with the given mean and coefficient of variation.
    pub fn gamma_mean_cv(mean: f64, cv: f64) -> Self {
        let shape = 1.0 / (cv * cv);
        VarianceLaw::Gamma {
            shape,
            rate: shape / mean,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            VarianceLaw::Gamma { shape, rate } => shape / rate,
            VarianceLaw::InvGamma { shape, scale } => {
                if *shape > 1.0 {
                    scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            VarianceLaw::PointMass { sigma2 } => *sigma2,
            VarianceLaw::Empirical { dist } => dist.mean(),
        }
    }

    /// Law of `c·σ²`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            VarianceLaw::Gamma { shape, rate } => VarianceLaw::Gamma {
                shape: *shape,
                rate: rate / c,
            },
            VarianceLaw::InvGamma { shape, scale } => VarianceLaw::InvGamma {
                shape: *shape,
                scale: scale * c,
            },
            VarianceLaw::PointMass { sigma2 } => VarianceLaw::PointMass { sigma2: sigma2 * c },
            VarianceLaw::Empirical { dist } => VarianceLaw::Empirical {
                dist: EmpiricalDist {
                    sorted: dist.values().iter().map(|v| v * c).collect(),
                },
            },
        }
    }

    /// `E[h(σ²)]` under this law.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut h: F, cfg: &QuadConfig) -> Result<f64> {
        match self {
            VarianceLaw::Gamma { shape, rate } => expect_gamma(|y| h(y / rate), *shape, cfg),
            VarianceLaw::InvGamma { shape, scale } => {
                // 1/σ² ~ Gamma(shape, rate = scale)
                expect_gamma(|y| h(scale / y), *shape, cfg)
            }
            VarianceLaw::PointMass { sigma2 } => Ok(h(*sigma2)),
            VarianceLaw::Empirical { dist } => {
                let vals = dist.values();
                Ok(vals.iter().map(|&v| h(v)).sum::<f64>() / vals.len() as f64)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            VarianceLaw::Gamma { shape, rate } => {
                GammaDist::new(*shape, 1.0 / rate).expect("validated gamma").sample(rng)
            }
            VarianceLaw::InvGamma { shape, scale } => {
                1.0 / GammaDist::new(*shape, 1.0 / scale).expect("validated inv-gamma").sample(rng)
            }
            VarianceLaw::PointMass { sigma2 } => *sigma2,
            VarianceLaw::Empirical { dist } => {
                let v = dist.values();
                v[rng.random_range(0..v.len())]
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            VarianceLaw::Gamma { .. } => "gamma",
            VarianceLaw::InvGamma { .. } => "inv_gamma",
            VarianceLaw::PointMass { .. } => "point_mass",
            VarianceLaw::Empirical { .. } => "empirical",
        }
    }
}

/// `E[h(Y)]` for `Y ~ Gamma(shape, 1)`.
fn expect_gamma<F: FnMut(f64) -> f64>(mut h: F, shape: f64, cfg: &QuadConfig) -> Result<f64> {
    if shape >= 1.0 {
        let norm = ln_gamma(shape);
        let r = integrate_half_line(
            |y| {
                if y <= 0.0 {
                    return 0.0;
                }
                let dens = ((shape - 1.0) * y.ln() - y - norm).exp();
                if dens == 0.0 {
                    0.0
                } else {
                    h(y) * dens
                }
            },
            cfg,
        )?;
        Ok(r.value)
    } else {
        // y = t^{1/shape} turns the density into exp(-t^{1/shape}) / Γ(shape + 1),
        // which is bounded at the origin.
        let inv = 1.0 / shape;
        let norm = ln_gamma(shape + 1.0);
        let r = integrate_half_line(
            |t| {
                let y = t.powf(inv);
                let w = (-y - norm).exp();
                if w == 0.0 || y == 0.0 {
                    0.0
                } else {
                    h(y) * w
                }
            },
            cfg,
        )?;
        Ok(r.value)
    }
}

/// Which direction of a ranking variable is "better".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    SmallerIsBetter,
    LargerIsBetter,
}

/// Integer ranks (1 = top) for `values`, ties broken by id.
///
/// NaN values are ranked after every number.
pub fn assign_ranks(values: &[f64], ids: &[String], orientation: Orientation) -> Vec<usize> {
    assert_eq!(values.len(), ids.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (values[i], values[j]);
        let by_value = match (a.is_nan(), b.is_nan()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => match orientation {
                Orientation::SmallerIsBetter => a.total_cmp(&b),
                Orientation::LargerIsBetter => b.total_cmp(&a),
            },
        };
        by_value.then_with(|| ids[i].cmp(&ids[j]))
    });
    let mut ranks = vec![0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_normal_unit_is_valid() {
        let ds = validate_dataset(vec![UnitRecord::normal("a", 0.0, 1.0)], &Default::default())
            .unwrap();
        assert_eq!(ds.kind(), PayloadKind::Normal);
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn y_above_n_is_rejected_with_unit_id() {
        let err = validate_dataset(vec![UnitRecord::binomial("p7", 5, 3)], &Default::default())
            .unwrap_err();
        match err {
            Error::InvalidUnits(issues) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].id, "p7");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_and_mixed_are_rejected() {
        assert!(matches!(
            validate_dataset(vec![], &Default::default()),
            Err(Error::EmptyDataset)
        ));
        let mixed = vec![UnitRecord::normal("a", 0.0, 1.0), UnitRecord::binomial("b", 1, 2)];
        assert!(matches!(
            validate_dataset(mixed, &Default::default()),
            Err(Error::MixedPayloadKinds { .. })
        ));
    }

    #[test]
    fn nonpositive_variance_and_zero_trials_are_invalid() {
        let bad = vec![UnitRecord::normal("a", 0.0, 0.0), UnitRecord::normal("b", f64::NAN, 1.0)];
        match validate_dataset(bad, &Default::default()).unwrap_err() {
            Error::InvalidUnits(issues) => assert_eq!(issues.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(validate_dataset(vec![UnitRecord::binomial("z", 0, 0)], &Default::default()).is_err());
    }

    #[test]
    fn short_draw_vectors_warn_but_validate() {
        let ds = validate_dataset(vec![UnitRecord::draws("d", vec![0.1; 20])], &Default::default())
            .unwrap();
        assert_eq!(ds.warnings().len(), 1);
        assert!(validate_dataset(
            vec![UnitRecord::draws("d", vec![0.1, f64::INFINITY])],
            &Default::default()
        )
        .is_err());
    }

    #[test]
    fn validation_is_idempotent() {
        let units = vec![UnitRecord::binomial("a", 3, 9), UnitRecord::binomial("b", 0, 1)];
        let once = validate_dataset(units, &Default::default()).unwrap();
        let twice = validate_dataset(once.units().to_vec(), &Default::default()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn type7_quantiles_on_uniform_grid() {
        let grid: Vec<f64> = (1..=1000).map(|k| k as f64 / 1000.0).collect();
        let d = EmpiricalDist::new(grid).unwrap();
        // h = 999 * 0.9 = 899.1 → 0.900 + 0.1 * 0.001
        assert!((d.quantile(0.9) - 0.9001).abs() < 1e-12);
        assert_eq!(d.upper_fraction(0.9005), 0.1);
        let c = EmpiricalDist::new(vec![2.5; 50]).unwrap();
        assert_eq!(c.quantile(0.1), 2.5);
        assert_eq!(c.quantile(0.99), 2.5);
    }

    #[test]
    fn theta_upper_quantiles() {
        let n = ThetaLaw::Normal { mu: 1.0, tau2: 4.0 };
        assert!((n.upper_quantile(0.1) - (1.0 + 2.0 * 1.281_551_565_544_600_4)).abs() < 1e-12);
        let b = ThetaLaw::Beta { a: 1.0, b: 1.0 };
        assert!((b.upper_quantile(0.25) - 0.75).abs() < 1e-12);
        // decreasing in α
        let b = ThetaLaw::Beta { a: 15.12, b: 5.38 };
        let qs: Vec<f64> = [0.01, 0.1, 0.5, 0.9].iter().map(|&a| b.upper_quantile(a)).collect();
        assert!(qs.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn variance_law_expectations() {
        let cfg = QuadConfig::default();
        for law in [
            VarianceLaw::gamma_mean_cv(1.0, 0.5),
            VarianceLaw::gamma_mean_cv(1.0, 2.0),
            VarianceLaw::InvGamma { shape: 3.0, scale: 2.0 },
            VarianceLaw::InvGamma { shape: 0.5, scale: 2.0 },
        ] {
            let total = law.expect(|_| 1.0, &cfg).unwrap();
            assert!((total - 1.0).abs() < 1e-9, "{law:?} mass {total}");
        }
        let g = VarianceLaw::gamma_mean_cv(1.0, 2.0);
        assert!((g.expect(|s| s, &cfg).unwrap() - 1.0).abs() < 1e-9);
        let ig = VarianceLaw::InvGamma { shape: 3.0, scale: 2.0 };
        assert!((ig.expect(|s| s, &cfg).unwrap() - 1.0).abs() < 1e-9);
        // scaling composes with expectation
        let scaled = g.scaled(3.0);
        assert!((scaled.expect(|s| s, &cfg).unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn ranks_break_ties_by_id() {
        let ids: Vec<String> = ["c", "a", "b", "d"].iter().map(|s| s.to_string()).collect();
        let v = [1.0, 2.0, 1.0, f64::NAN];
        assert_eq!(assign_ranks(&v, &ids, Orientation::SmallerIsBetter), vec![2, 3, 1, 4]);
        assert_eq!(assign_ranks(&v, &ids, Orientation::LargerIsBetter), vec![3, 1, 2, 4]);
    }
}
