//! Monte-Carlo studies: agreement and variance enrichment of top lists,
//! the held-out similarity protocol, and uniformity checks.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaDist, Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{ClosedForm, UTableConfig};
use crate::error::{Error, Result};
use crate::model::{quantile_sorted, Dataset, Payload, ThetaLaw, UnitRecord, VarianceLaw};
use crate::prior_fit::{fit_beta_binomial, FitConfig};
use crate::ranking::{build_ranking_table, RankConfig, RankMethod};
use crate::special::{beta_inc_upper, norm_sf};
use crate::thresholds::{standardized_variable, Method};

/// Trial counts for simulated binomial units, uniform on `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialsLaw {
    pub lo: u64,
    pub hi: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_units: usize,
    pub theta: ThetaLaw,
    #[serde(default)]
    pub variance: Option<VarianceLaw>,
    #[serde(default)]
    pub trials: Option<TrialsLaw>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
}

fn default_alphas() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.25]
}

fn one() -> usize {
    1
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.theta.validate()?;
        if self.n_units == 0 || self.replicates == 0 {
            return Err(Error::InvalidParameter("n_units and replicates must be positive".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidParameter("alphas must lie in (0, 1)".into()));
        }
        match (&self.theta, &self.variance, &self.trials) {
            (ThetaLaw::Normal { .. }, Some(v), None) => v.validate(),
            (ThetaLaw::Beta { .. }, None, Some(t)) if t.lo >= 1 && t.lo <= t.hi => Ok(()),
            _ => Err(Error::InvalidParameter(
                "need a normal theta law with a variance law, or a beta theta law with trials".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PopData {
    Normal { x: Vec<f64>, sigma2: Vec<f64> },
    Binomial { y: Vec<u64>, n: Vec<u64> },
}

/// A simulated population with its true parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub data: PopData,
    pub theta: Vec<f64>,
    /// `1 - F(θ_i)` under the generating law: unit i is truly in the top α
    /// exactly when this is at most α.
    pub upper_tail: Vec<f64>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        let w = self.len().to_string().len();
        (0..self.len()).map(|i| format!("u{i:0w$}")).collect()
    }

    pub fn to_units(&self) -> Vec<UnitRecord> {
        let ids = self.ids();
        match &self.data {
            PopData::Normal { x, sigma2 } => ids
                .into_iter()
                .zip(x.iter().zip(sigma2))
                .map(|(id, (&x, &s))| UnitRecord::normal(id, x, s))
                .collect(),
            PopData::Binomial { y, n } => ids
                .into_iter()
                .zip(y.iter().zip(n))
                .map(|(id, (&y, &n))| UnitRecord::binomial(id, y, n))
                .collect(),
        }
    }
}

const BLOCK: usize = 4096;

/// Generator for one block of units; streams are keyed by (replicate, block)
/// so the output does not depend on how blocks are scheduled.
pub fn block_rng(seed: u64, replicate: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replicate << 32) | block);
    rng
}

fn sample_theta<R: Rng>(law: &ThetaLaw, rng: &mut R) -> f64 {
    match law {
        ThetaLaw::Normal { mu, tau2 } => {
            let z: f64 = StandardNormal.sample(rng);
            mu + tau2.sqrt() * z
        }
        ThetaLaw::Beta { a, b } => BetaDist::new(*a, *b).expect("validated beta").sample(rng),
        ThetaLaw::Empirical { dist } => {
            let v = dist.values();
            v[rng.random_range(0..v.len())]
        }
    }
}

fn theta_upper_tail(law: &ThetaLaw, theta: f64) -> f64 {
    match law {
        ThetaLaw::Normal { mu, tau2 } => {
            if *tau2 == 0.0 {
                if theta >= *mu { 1.0 } else { 0.0 }
            } else {
                norm_sf((theta - mu) / tau2.sqrt())
            }
        }
        ThetaLaw::Beta { a, b } => beta_inc_upper(theta.clamp(0.0, 1.0), *a, *b),
        ThetaLaw::Empirical { dist } => dist.upper_fraction(theta),
    }
}

pub fn simulate_population(cfg: &SimConfig, replicate: u64) -> Result<Population> {
    cfg.validate()?;
    let n = cfg.n_units;
    let blocks = n.div_ceil(BLOCK);
    type Row = (f64, f64, u64, f64);
    let rows: Vec<Vec<Row>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(cfg.seed, replicate, b as u64);
            let len = BLOCK.min(n - b * BLOCK);
            (0..len)
                .map(|_| {
                    let theta = sample_theta(&cfg.theta, &mut rng);
                    match (&cfg.variance, &cfg.trials) {
                        (Some(v), _) => {
                            let s = v.sample(&mut rng);
                            let z: f64 = StandardNormal.sample(&mut rng);
                            (theta, theta + s.sqrt() * z, 0, s)
                        }
                        (None, Some(t)) => {
                            let trials = rng.random_range(t.lo..=t.hi);
                            let y = Binomial::new(trials, theta.clamp(0.0, 1.0))
                                .expect("valid binomial")
                                .sample(&mut rng);
                            (theta, y as f64, trials, 0.0)
                        }
                        (None, None) => unreachable!("validated config"),
                    }
                })
                .collect()
        })
        .collect();
    let mut theta = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut b_u = Vec::with_capacity(n);
    let mut b_f = Vec::with_capacity(n);
    for (t, x, trials, s) in rows.into_iter().flatten() {
        theta.push(t);
        a.push(x);
        b_u.push(trials);
        b_f.push(s);
    }
    let upper_tail = theta.par_iter().map(|&t| theta_upper_tail(&cfg.theta, t)).collect();
    let data = if cfg.variance.is_some() {
        PopData::Normal { x: a, sigma2: b_f }
    } else {
        PopData::Binomial {
            y: a.into_iter().map(|v| v as u64).collect(),
            n: b_u,
        }
    };
    Ok(Population {
        data,
        theta,
        upper_tail,
    })
}

/// Indices of the `k` best units, ties broken by index.
pub fn top_k(values: &[f64], k: usize, larger_is_better: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    let key = |i: usize| {
        let v = values[i];
        if v.is_nan() {
            f64::INFINITY
        } else if larger_is_better {
            -v
        } else {
            v
        }
    };
    let cmp = |&i: &usize, &j: &usize| key(i).total_cmp(&key(j)).then(i.cmp(&j));
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

/// Counts for one method at one α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionCounts {
    pub n_units: usize,
    pub selected: usize,
    pub truly_top: usize,
    pub both: usize,
}

impl SelectionCounts {
    pub fn agreement(&self) -> f64 {
        self.both as f64 / self.n_units as f64
    }

    pub fn fdr(&self) -> f64 {
        if self.selected == 0 {
            0.0
        } else {
            (self.selected - self.both) as f64 / self.selected as f64
        }
    }

    pub fn power(&self) -> f64 {
        if self.truly_top == 0 {
            0.0
        } else {
            self.both as f64 / self.truly_top as f64
        }
    }

    /// Largest deviation in `agreement = (1 - FDR)·|S|/N` and
    /// `agreement = power·|T|/N`.
    pub fn identity_error(&self) -> f64 {
        let n = self.n_units as f64;
        let a = self.agreement();
        let e1 = (a - (1.0 - self.fdr()) * self.selected as f64 / n).abs();
        let e2 = if self.truly_top == 0 {
            0.0
        } else {
            (a - self.power() * self.truly_top as f64 / n).abs()
        };
        e1.max(e2)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodAlphaResult {
    pub method: String,
    pub alpha: f64,
    pub counts: Vec<SelectionCounts>,
    pub agreement: f64,
    pub agreement_se: f64,
    pub fdr: f64,
    pub power: f64,
    pub selected_sigma2_median: f64,
    pub selected_sigma2_iqr: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub n_units: usize,
    pub replicates: usize,
    pub seed: u64,
    pub marginal_sigma2_median: f64,
    pub results: Vec<MethodAlphaResult>,
    /// Worst counting-identity deviation over all methods, α and replicates.
    pub max_identity_error: f64,
}

impl AgreementReport {
    pub fn get(&self, method: &str, alpha: f64) -> Option<&MethodAlphaResult> {
        self.results.iter().find(|r| r.method == method && r.alpha == alpha)
    }
}

pub fn study_method_name(m: Method) -> &'static str {
    match m {
        Method::MaxAgree => "rvalue",
        Method::Pv { .. } => "pv",
        other => other.name(),
    }
}

/// Ranking variable for each unit on the standardized scale; larger is better.
fn study_scores(
    method: Method,
    xs: &[f64],
    s2: &[f64],
    closed: Option<&ClosedForm>,
) -> Vec<f64> {
    xs.par_iter()
        .zip(s2.par_iter())
        .map(|(&x, &s)| match method {
            Method::MaxAgree => -closed.expect("closed form").rvalue(x, s),
            Method::Per => -standardized_variable(Method::Per, x, s),
            m => standardized_variable(m, x, s),
        })
        .collect()
}

/// Agreement, FDR, power and selected-σ² summaries for each method and α.
pub fn agreement_study(cfg: &SimConfig, methods: &[Method]) -> Result<AgreementReport> {
    cfg.validate()?;
    let (ThetaLaw::Normal { mu, tau2 }, Some(law)) = (&cfg.theta, &cfg.variance) else {
        return Err(Error::ModelMismatch("agreement study needs the normal/normal model".into()));
    };
    if !(*tau2 > 0.0) {
        return Err(Error::InvalidParameter("agreement study needs tau2 > 0".into()));
    }
    let tau = tau2.sqrt();
    let std_law = law.scaled(1.0 / tau2);
    let closed = if methods.contains(&Method::MaxAgree) {
        Some(ClosedForm::new(
            &ThetaLaw::Normal { mu: 0.0, tau2: 1.0 },
            &std_law,
            &UTableConfig::default(),
        )?)
    } else {
        None
    };
    let n = cfg.n_units;
    let mut acc: Vec<(Method, f64, Vec<SelectionCounts>, Vec<f64>)> = Vec::new();
    let mut marginal_median = 0.0;
    for rep in 0..cfg.replicates {
        let pop = simulate_population(cfg, rep as u64)?;
        let PopData::Normal { x, sigma2 } = &pop.data else { unreachable!() };
        let xs: Vec<f64> = x.iter().map(|v| (v - mu) / tau).collect();
        let s2: Vec<f64> = sigma2.iter().map(|v| v / tau2).collect();
        let mut sorted_s2 = sigma2.clone();
        sorted_s2.par_sort_unstable_by(f64::total_cmp);
        marginal_median += quantile_sorted(&sorted_s2, 0.5) / cfg.replicates as f64;
        for &m in methods {
            let scores = study_scores(m, &xs, &s2, closed.as_ref());
            for &alpha in &cfg.alphas {
                let k = (alpha * n as f64).round() as usize;
                let sel = top_k(&scores, k, true);
                let both = sel.iter().filter(|&&i| pop.upper_tail[i] <= alpha).count();
                let truly_top = pop.upper_tail.iter().filter(|&&t| t <= alpha).count();
                let counts = SelectionCounts {
                    n_units: n,
                    selected: k,
                    truly_top,
                    both,
                };
                let mut sel_s2: Vec<f64> = sel.iter().map(|&i| sigma2[i]).collect();
                sel_s2.sort_unstable_by(f64::total_cmp);
                let slot = match acc.iter_mut().find(|e| e.0 == m && e.1 == alpha) {
                    Some(e) => e,
                    None => {
                        acc.push((m, alpha, Vec::new(), Vec::new()));
                        acc.last_mut().unwrap()
                    }
                };
                slot.2.push(counts);
                slot.3.extend(sel_s2);
            }
        }
    }
    let mut max_identity_error: f64 = 0.0;
    let results = acc
        .into_iter()
        .map(|(m, alpha, counts, mut sel_s2)| {
            sel_s2.sort_unstable_by(f64::total_cmp);
            let reps = counts.len() as f64;
            let agreement = counts.iter().map(|c| c.agreement()).sum::<f64>() / reps;
            for c in &counts {
                max_identity_error = max_identity_error.max(c.identity_error());
            }
            let q = |p| if sel_s2.is_empty() { f64::NAN } else { quantile_sorted(&sel_s2, p) };
            MethodAlphaResult {
                method: study_method_name(m).to_string(),
                alpha,
                agreement,
                agreement_se: (agreement * (1.0 - agreement) / (n as f64 * reps)).sqrt(),
                fdr: counts.iter().map(|c| c.fdr()).sum::<f64>() / reps,
                power: counts.iter().map(|c| c.power()).sum::<f64>() / reps,
                selected_sigma2_median: q(0.5),
                selected_sigma2_iqr: (q(0.25), q(0.75)),
                counts,
            }
        })
        .collect();
    Ok(AgreementReport {
        n_units: n,
        replicates: cfg.replicates,
        seed: cfg.seed,
        marginal_sigma2_median: marginal_median,
        results,
        max_identity_error,
    })
}

/// Kolmogorov–Smirnov distance between a sample and Uniform(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.par_sort_unstable_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i + 1) as f64 / n - x)
        })
        .fold(0.0, f64::max)
}

/// Mean of `(1/t) Σ 1[true rank ≤ t]·1[method rank ≤ t]` for each t.
pub fn similarity_score(true_ranks: &[usize], method_ranks: &[usize], t: usize) -> f64 {
    let hits = true_ranks
        .iter()
        .zip(method_ranks)
        .filter(|(&a, &b)| a <= t && b <= t)
        .count();
    hits as f64 / t as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityConfig {
    #[serde(default = "default_t_list")]
    pub t_list: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: u64,
}

fn default_t_list() -> Vec<usize> {
    vec![5, 10, 25, 50, 100]
}

fn default_replicates() -> usize {
    2000
}

#[derive(Debug, Clone, Serialize)]
pub struct SimilarityRow {
    pub method: String,
    pub t: usize,
    pub mean: f64,
    pub se: f64,
    /// Mean and standard error of (r-value score − this method's score).
    pub diff_vs_rvalue: f64,
    pub diff_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimilarityReport {
    pub replicates: usize,
    pub seed: u64,
    pub rows: Vec<SimilarityRow>,
}

impl SimilarityReport {
    pub fn get(&self, method: &str, t: usize) -> Option<&SimilarityRow> {
        self.rows.iter().find(|r| r.method == method && r.t == t)
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Score rankings computed from `train` against θ vectors drawn from the
/// beta posterior given `full`. Both datasets must hold the same unit ids.
pub fn similarity_validation(train: &Dataset, full: &Dataset, cfg: &SimilarityConfig) -> Result<SimilarityReport> {
    if train.len() != full.len() {
        return Err(Error::MismatchedUnitIds(format!(
            "{} training units vs {} full-data units",
            train.len(),
            full.len()
        )));
    }
    let full_pos: HashMap<&str, usize> = full
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| (u.id.as_str(), i))
        .collect();
    let align: Vec<usize> = train
        .units()
        .iter()
        .map(|u| {
            full_pos
                .get(u.id.as_str())
                .copied()
                .ok_or_else(|| Error::MismatchedUnitIds(format!("unit {} missing from full data", u.id)))
        })
        .collect::<Result<_>>()?;

    let full_prior = fit_beta_binomial(full, &FitConfig::default())?.theta;
    let ThetaLaw::Beta { a, b } = full_prior else { unreachable!() };
    let post: Vec<(f64, f64)> = align
        .iter()
        .map(|&j| match full.units()[j].payload {
            Payload::Binomial { y, n } => Ok((a + y as f64, b + (n - y) as f64)),
            _ => Err(Error::ModelMismatch("validation needs binomial data".into())),
        })
        .collect::<Result<_>>()?;

    let train_prior = fit_beta_binomial(train, &FitConfig::default())?.theta;
    let table = build_ranking_table(train, &train_prior, &RankConfig::default())?;
    let methods = [RankMethod::Rvalue, RankMethod::Mle, RankMethod::Pm, RankMethod::Per];
    let method_ranks: Vec<Vec<usize>> = methods
        .iter()
        .map(|&m| table.column(m).map(|c| c.ranks.clone()).expect("binomial table column"))
        .collect();
    let ids = train.ids();

    // scores[rep][method][t]
    let scores: Vec<Vec<Vec<f64>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = block_rng(cfg.seed, rep as u64, 0);
            let theta: Vec<f64> = post
                .iter()
                .map(|&(pa, pb)| BetaDist::new(pa, pb).expect("posterior").sample(&mut rng))
                .collect();
            let true_ranks = crate::model::assign_ranks(&theta, &ids, crate::model::Orientation::LargerIsBetter);
            method_ranks
                .iter()
                .map(|mr| cfg.t_list.iter().map(|&t| similarity_score(&true_ranks, mr, t)).collect())
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for (mi, m) in methods.iter().enumerate() {
        for (ti, &t) in cfg.t_list.iter().enumerate() {
            let own: Vec<f64> = scores.iter().map(|s| s[mi][ti]).collect();
            let diff: Vec<f64> = scores.iter().map(|s| s[0][ti] - s[mi][ti]).collect();
            let (mean, se) = mean_se(&own);
            let (dm, dse) = mean_se(&diff);
            rows.push(SimilarityRow {
                method: m.name().to_string(),
                t,
                mean,
                se,
                diff_vs_rvalue: dm,
                diff_se: dse,
            });
        }
    }
    Ok(SimilarityReport {
        replicates: cfg.replicates,
        seed: cfg.seed,
        rows,
    })
}
