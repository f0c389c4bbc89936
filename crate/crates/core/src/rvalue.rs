//! r-values by the grid algorithm: tail probabilities on an α grid, the
//! smoothed quantile curve `λ_α`, and a per-unit crossing search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ThetaLaw;
use crate::tail::Posterior;

/// Strictly increasing α nodes in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    nodes: Vec<f64>,
}

pub const DEFAULT_GRID_SIZE: usize = 199;

impl AlphaGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("empty alpha grid".into()));
        }
        if nodes.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidParameter("alpha grid nodes must lie in (0, 1)".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("alpha grid must be strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    /// `n` nodes: three quarters uniform in `log2(-log2 α)` over
    /// [1e-4, 0.5], the rest uniform over (0.5, 0.995].
    pub fn log_enriched(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidParameter(format!("grid size {n} below 8")));
        }
        let n_low = (3 * n + 2) / 4;
        let n_high = n - n_low;
        let l0 = (-(1e-4f64).log2()).log2();
        let mut nodes = Vec::with_capacity(n);
        for k in 0..n_low {
            let l = l0 * (1.0 - k as f64 / (n_low - 1) as f64);
            nodes.push((-(l.exp2())).exp2());
        }
        let step = 0.495 / n_high as f64;
        nodes.extend((1..=n_high).map(|k| 0.5 + k as f64 * step));
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Whether the grid reaches from at most 0.001 to at least 0.99.
    pub fn covers_default_range(&self) -> bool {
        self.min() <= 1e-3 && self.max() >= 0.99
    }
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self::log_enriched(DEFAULT_GRID_SIZE).expect("default grid")
    }
}

/// Row-major matrix `v[i][j] = V_{α_j}(D_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VMatrix {
    pub n_units: usize,
    pub n_alpha: usize,
    pub values: Vec<f64>,
}

impl VMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_alpha..(i + 1) * self.n_alpha]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_units).map(|i| self.values[i * self.n_alpha + j]).collect()
    }
}

fn grid_thetas(prior: &ThetaLaw, grid: &AlphaGrid) -> Vec<f64> {
    grid.nodes().iter().map(|&a| prior.upper_quantile(a)).collect()
}

pub fn build_v_matrix(posteriors: &[Posterior], prior: &ThetaLaw, grid: &AlphaGrid) -> VMatrix {
    let thetas = grid_thetas(prior, grid);
    let values: Vec<f64> = posteriors
        .par_iter()
        .flat_map_iter(|p| thetas.iter().map(move |&t| p.upper_tail(t)))
        .collect();
    VMatrix {
        n_units: posteriors.len(),
        n_alpha: grid.len(),
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Gaussian kernel bandwidth in grid nodes; 0 disables smoothing.
    pub bandwidth: f64,
    /// Project the smoothed curve onto non-decreasing sequences.
    pub isotonic: bool,
    /// 0 gives the kernel-weighted average; 1 or 2 fits a local polynomial
    /// in α with the same weights, which removes the average's bias where
    /// the curve bends or the node spacing changes.
    #[serde(default)]
    pub degree: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            bandwidth: 5.0,
            isotonic: false,
            degree: 0,
        }
    }
}

/// The crossing level `λ_α`, piecewise linear between grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCurve {
    pub grid: Vec<f64>,
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Units below which column quantiles are too coarse to trust.
pub const MIN_LAMBDA_UNITS: usize = 50;
const SMOOTHING_WARN: f64 = 0.1;

fn column_quantile(col: &mut [f64], p: f64) -> f64 {
    let n = col.len();
    if n == 1 {
        return col[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let (_, &mut lo_v, rest) = col.select_nth_unstable_by(lo, f64::total_cmp);
    if lo + 1 >= n {
        return lo_v;
    }
    let hi_v = rest.iter().copied().fold(f64::INFINITY, f64::min);
    lo_v + (h - lo as f64) * (hi_v - lo_v)
}

fn gaussian_smooth(raw: &[f64], bw: f64) -> Vec<f64> {
    if bw <= 0.0 {
        return raw.to_vec();
    }
    let n = raw.len();
    (0..n)
        .map(|j| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, &r) in raw.iter().enumerate() {
                let d = (k as f64 - j as f64) / bw;
                let w = (-0.5 * d * d).exp();
                num += w * r;
                den += w;
            }
            num / den
        })
        .collect()
}

fn local_poly_smooth(raw: &[f64], alpha: &[f64], bw: f64, degree: usize) -> Vec<f64> {
    if bw <= 0.0 {
        return raw.to_vec();
    }
    let p = degree + 1;
    (0..raw.len())
        .map(|j| {
            // scale the regressor by the local node spacing for conditioning
            let lo = j.saturating_sub(1);
            let hi = (j + 1).min(alpha.len() - 1);
            let scale = (alpha[hi] - alpha[lo]).max(f64::MIN_POSITIVE);
            let mut m = vec![0.0; p * p];
            let mut rhs = vec![0.0; p];
            for (k, &r) in raw.iter().enumerate() {
                let d = (k as f64 - j as f64) / bw;
                let w = (-0.5 * d * d).exp();
                if w < 1e-14 {
                    continue;
                }
                let z = (alpha[k] - alpha[j]) / scale;
                let mut pw = vec![1.0; p];
                for q in 1..p {
                    pw[q] = pw[q - 1] * z;
                }
                for a in 0..p {
                    rhs[a] += w * pw[a] * r;
                    for b in 0..p {
                        m[a * p + b] += w * pw[a] * pw[b];
                    }
                }
            }
            solve_small(&mut m, &mut rhs, p).unwrap_or(raw[j])
        })
        .collect()
}

/// Intercept of a small symmetric system by Gaussian elimination with pivoting.
fn solve_small(m: &mut [f64], rhs: &mut [f64], p: usize) -> Option<f64> {
    for c in 0..p {
        let piv = (c..p).max_by(|&a, &b| m[a * p + c].abs().total_cmp(&m[b * p + c].abs()))?;
        if m[piv * p + c].abs() < 1e-300 {
            return None;
        }
        for k in 0..p {
            m.swap(c * p + k, piv * p + k);
        }
        rhs.swap(c, piv);
        for r in c + 1..p {
            let f = m[r * p + c] / m[c * p + c];
            for k in c..p {
                m[r * p + k] -= f * m[c * p + k];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let mut x = vec![0.0; p];
    for r in (0..p).rev() {
        let s: f64 = (r + 1..p).map(|k| m[r * p + k] * x[k]).sum();
        x[r] = (rhs[r] - s) / m[r * p + r];
    }
    x[0].is_finite().then_some(x[0])
}

/// Pool-adjacent-violators projection onto non-decreasing sequences.
fn isotonic_increasing(v: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (m2, c2) = blocks[blocks.len() - 1];
            let (m1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let c = c1 + c2;
            *blocks.last_mut().unwrap() = ((m1 * c1 as f64 + m2 * c2 as f64) / c as f64, c);
        }
    }
    blocks.into_iter().flat_map(|(m, c)| std::iter::repeat_n(m, c)).collect()
}

impl LambdaCurve {
    /// Build from raw column quantiles.
    pub fn from_raw(grid: &AlphaGrid, raw: Vec<f64>, n_units: usize, cfg: &SmoothingConfig) -> Self {
        let mut smoothed = if cfg.degree == 0 {
            gaussian_smooth(&raw, cfg.bandwidth)
        } else {
            local_poly_smooth(&raw, grid.nodes(), cfg.bandwidth, cfg.degree)
        };
        if cfg.isotonic {
            smoothed = isotonic_increasing(&smoothed);
        }
        smoothed.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        let mut warnings = Vec::new();
        if n_units < MIN_LAMBDA_UNITS {
            warnings.push(format!(
                "only {n_units} units; lambda quantiles are coarse below {MIN_LAMBDA_UNITS}"
            ));
        }
        let (worst, at) = raw
            .iter()
            .zip(&smoothed)
            .enumerate()
            .map(|(j, (r, s))| ((r - s).abs(), j))
            .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
        if worst > SMOOTHING_WARN {
            warnings.push(format!(
                "smoothing moved lambda by {worst:.3} at alpha = {}",
                grid.nodes()[at]
            ));
        }
        Self {
            grid: grid.nodes().to_vec(),
            raw,
            smoothed,
            warnings,
        }
    }

    /// Piecewise-linear interpolation of the smoothed curve, flat outside the grid.
    pub fn eval(&self, alpha: f64) -> f64 {
        let g = &self.grid;
        let n = g.len();
        if alpha <= g[0] {
            return self.smoothed[0];
        }
        if alpha >= g[n - 1] {
            return self.smoothed[n - 1];
        }
        let j = g.partition_point(|&x| x <= alpha);
        let (a0, a1) = (g[j - 1], g[j]);
        let t = (alpha - a0) / (a1 - a0);
        self.smoothed[j - 1] + t * (self.smoothed[j] - self.smoothed[j - 1])
    }
}

pub fn build_lambda_curve(v: &VMatrix, grid: &AlphaGrid, cfg: &SmoothingConfig) -> LambdaCurve {
    let raw = (0..v.n_alpha)
        .map(|j| {
            let mut col = v.column(j);
            column_quantile(&mut col, 1.0 - grid.nodes()[j])
        })
        .collect();
    LambdaCurve::from_raw(grid, raw, v.n_units, cfg)
}

/// As [`build_lambda_curve`], holding only one column of the V matrix at a time.
pub fn build_lambda_curve_streaming(
    posteriors: &[Posterior],
    prior: &ThetaLaw,
    grid: &AlphaGrid,
    cfg: &SmoothingConfig,
) -> LambdaCurve {
    let thetas = grid_thetas(prior, grid);
    let mut col = vec![0.0; posteriors.len()];
    let raw = thetas
        .iter()
        .zip(grid.nodes())
        .map(|(&t, &a)| {
            col.par_iter_mut()
                .zip(posteriors.par_iter())
                .for_each(|(c, p)| *c = p.upper_tail(t));
            column_quantile(&mut col, 1.0 - a)
        })
        .collect();
    LambdaCurve::from_raw(grid, raw, posteriors.len(), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootFlag {
    Interior,
    AtBoundaryTop,
    NoCrossing,
}

impl RootFlag {
    pub fn name(self) -> &'static str {
        match self {
            RootFlag::Interior => "interior",
            RootFlag::AtBoundaryTop => "at-boundary-top",
            RootFlag::NoCrossing => "no-crossing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RValueResult {
    pub rvalue: f64,
    /// `V_r - λ_r` at the reported root.
    pub residual: f64,
    pub flag: RootFlag,
    pub multiple_roots: bool,
}

impl RValueResult {
    pub fn flags(&self) -> String {
        if self.multiple_roots {
            format!("{};multiple-roots", self.flag.name())
        } else {
            self.flag.name().to_string()
        }
    }
}

/// Default bisection tolerance on α.
pub const ROOT_TOL: f64 = 1e-8;

/// Solves `V_α(D) = λ_α` for one unit against a fixed λ curve.
pub struct Solver<'a> {
    prior: &'a ThetaLaw,
    lambda: &'a LambdaCurve,
    thetas: Vec<f64>,
    tol: f64,
}

impl<'a> Solver<'a> {
    pub fn new(prior: &'a ThetaLaw, lambda: &'a LambdaCurve, tol: f64) -> Self {
        let thetas = lambda.grid.iter().map(|&a| prior.upper_quantile(a)).collect();
        Self {
            prior,
            lambda,
            thetas,
            tol,
        }
    }

    pub fn solve(&self, post: &Posterior) -> RValueResult {
        self.solve_with(|a| post.upper_tail(self.prior.upper_quantile(a)), |j| {
            post.upper_tail(self.thetas[j])
        })
    }

    /// `tail(α)` is the unit's tail function; `at_node(j)` its value at grid node `j`.
    pub fn solve_with<F, G>(&self, tail: F, at_node: G) -> RValueResult
    where
        F: Fn(f64) -> f64,
        G: Fn(usize) -> f64,
    {
        let g = &self.lambda.grid;
        let lam = &self.lambda.smoothed;
        let d0 = at_node(0) - lam[0];
        let mut first: Option<usize> = None;
        let mut crossings = 0usize;
        let mut prev_neg = d0 < 0.0;
        if !prev_neg {
            crossings = 1;
        }
        for j in 1..g.len() {
            let neg = at_node(j) - lam[j] < 0.0;
            if prev_neg && !neg {
                crossings += 1;
                if first.is_none() && d0 < 0.0 {
                    first = Some(j);
                }
            }
            prev_neg = neg;
        }
        let multiple_roots = crossings > 1;
        if d0 >= 0.0 {
            return RValueResult {
                rvalue: g[0],
                residual: d0,
                flag: RootFlag::AtBoundaryTop,
                multiple_roots,
            };
        }
        let Some(j) = first else {
            return RValueResult {
                rvalue: 1.0,
                residual: tail(1.0) - self.lambda.eval(1.0),
                flag: RootFlag::NoCrossing,
                multiple_roots,
            };
        };
        let delta = |a: f64| tail(a) - self.lambda.eval(a);
        let (mut lo, mut hi) = (g[j - 1], g[j]);
        while hi - lo > self.tol {
            let mid = 0.5 * (lo + hi);
            if delta(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        RValueResult {
            rvalue: hi,
            residual: delta(hi),
            flag: RootFlag::Interior,
            multiple_roots,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RValueConfig {
    pub grid: AlphaGrid,
    pub smoothing: SmoothingConfig,
    pub tol: f64,
    /// Keep the full V matrix (needed for dumping; memory N × grid size).
    pub keep_v: bool,
}

impl Default for RValueConfig {
    fn default() -> Self {
        Self {
            grid: AlphaGrid::default(),
            smoothing: SmoothingConfig::default(),
            tol: ROOT_TOL,
            keep_v: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RValueRun {
    pub results: Vec<RValueResult>,
    pub lambda: LambdaCurve,
    pub v: Option<VMatrix>,
    pub warnings: Vec<String>,
}

impl RValueRun {
    pub fn rvalues(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.rvalue).collect()
    }
}

pub fn compute_rvalues(posteriors: &[Posterior], prior: &ThetaLaw, cfg: &RValueConfig) -> Result<RValueRun> {
    if posteriors.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (lambda, v) = if cfg.keep_v {
        let v = build_v_matrix(posteriors, prior, &cfg.grid);
        (build_lambda_curve(&v, &cfg.grid, &cfg.smoothing), Some(v))
    } else {
        (build_lambda_curve_streaming(posteriors, prior, &cfg.grid, &cfg.smoothing), None)
    };
    let solver = Solver::new(prior, &lambda, cfg.tol);
    let results: Vec<RValueResult> = match &v {
        Some(v) => posteriors
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let row = v.row(i);
                solver.solve_with(|a| p.upper_tail(prior.upper_quantile(a)), |j| row[j])
            })
            .collect(),
        None => posteriors.par_iter().map(|p| solver.solve(p)).collect(),
    };
    let mut warnings = lambda.warnings.clone();
    if !cfg.grid.covers_default_range() {
        warnings.push("alpha grid does not span [0.001, 0.99]".into());
    }
    let multi = results.iter().filter(|r| r.multiple_roots).count();
    if multi > 0 {
        warnings.push(format!("{multi} units have multiple crossings; smallest root reported"));
    }
    Ok(RValueRun {
        results,
        lambda,
        v,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{quantile_sorted, Payload};
    use proptest::prelude::*;

    #[test]
    fn default_grid_shape() {
        let g = AlphaGrid::default();
        assert_eq!(g.len(), 199);
        assert!((g.min() - 1e-4).abs() < 1e-15);
        assert!((g.max() - 0.995).abs() < 1e-12);
        assert!(g.covers_default_range());
        assert_eq!(g.nodes().iter().filter(|&&a| a <= 0.5).count(), 149);
        assert!((g.nodes()[148] - 0.5).abs() < 1e-15);
        // uniform spacing in log2(-log2 α) on the low part
        let l: Vec<f64> = g.nodes()[..149].iter().map(|a| (-a.log2()).log2()).collect();
        let d0 = l[1] - l[0];
        assert!(l.windows(2).all(|w| ((w[1] - w[0]) - d0).abs() < 1e-12));
        assert!(AlphaGrid::new(vec![0.2, 0.1]).is_err());
        assert!(AlphaGrid::new(vec![0.0, 0.1]).is_err());
    }

    #[test]
    fn single_median_unit() {
        let prior = ThetaLaw::Normal { mu: 0.0, tau2: 1.0 };
        let post = Posterior::from_unit(&Payload::Normal { x: 0.0, sigma2: 1.0 }, &prior).unwrap();
        let v = build_v_matrix(&[post], &prior, &AlphaGrid::new(vec![0.5]).unwrap());
        assert_eq!(v.values, vec![0.5]);
    }

    #[test]
    fn identical_units_identical_rows_and_constant_lambda() {
        let prior = ThetaLaw::Beta { a: 4.0, b: 6.0 };
        let post = Posterior::from_unit(&Payload::Binomial { y: 3, n: 9 }, &prior).unwrap();
        let posts = vec![post; 60];
        let grid = AlphaGrid::default();
        let v = build_v_matrix(&posts, &prior, &grid);
        assert!((1..60).all(|i| v.row(i) == v.row(0)));
        assert!(v.row(0).windows(2).all(|w| w[0] <= w[1]));
        let lam = build_lambda_curve(&v, &grid, &SmoothingConfig::default());
        assert_eq!(lam.raw, v.row(0).to_vec());
        let streamed = build_lambda_curve_streaming(&posts, &prior, &grid, &SmoothingConfig::default());
        assert_eq!(streamed, lam);

        let flat = LambdaCurve::from_raw(&grid, vec![0.3; 199], 100, &SmoothingConfig::default());
        assert!(flat.smoothed.iter().all(|&s| (s - 0.3).abs() < 1e-15));
        assert!(flat.warnings.is_empty());
    }

    #[test]
    fn column_quantile_matches_sort() {
        let mut col = vec![0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8];
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        for &p in &[0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!((column_quantile(&mut col.clone(), p) - quantile_sorted(&sorted, p)).abs() < 1e-15);
        }
        assert_eq!(column_quantile(&mut col, 1.0), 0.9);
    }

    #[test]
    fn lambda_interpolation_is_flat_outside() {
        let grid = AlphaGrid::new(vec![0.1, 0.2, 0.4]).unwrap();
        let cfg = SmoothingConfig {
            bandwidth: 0.0,
            ..Default::default()
        };
        let lam = LambdaCurve::from_raw(&grid, vec![0.2, 0.4, 0.5], 100, &cfg);
        assert_eq!(lam.eval(0.01), 0.2);
        assert_eq!(lam.eval(0.9), 0.5);
        assert!((lam.eval(0.15) - 0.3).abs() < 1e-15);
        assert!((lam.eval(0.3) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn smoothing_warnings() {
        let grid = AlphaGrid::default();
        let mut raw = vec![0.2; 199];
        raw[100] = 0.9;
        let lam = LambdaCurve::from_raw(&grid, raw, 10, &SmoothingConfig::default());
        assert_eq!(lam.warnings.len(), 2);
    }

    #[test]
    fn isotonic_projection() {
        assert_eq!(isotonic_increasing(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_increasing(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    fn line_lambda(grid: &AlphaGrid, f: impl Fn(f64) -> f64) -> LambdaCurve {
        let raw = grid.nodes().iter().map(|&a| f(a)).collect();
        LambdaCurve::from_raw(
            grid,
            raw,
            100,
            &SmoothingConfig {
                bandwidth: 0.0,
                ..Default::default()
            },
        )
    }

    #[test]
    fn crossing_of_two_lines() {
        // λ_α = 0.2 + 0.5α; tails V = 2α and V = 0.1 + α cross at 2/15 and 0.2
        let grid = AlphaGrid::new((1..100).map(|k| k as f64 / 100.0).collect()).unwrap();
        let lam = line_lambda(&grid, |a| 0.2 + 0.5 * a);
        let prior = ThetaLaw::Normal { mu: 0.0, tau2: 1.0 };
        let solver = Solver::new(&prior, &lam, 1e-10);
        let nodes = grid.nodes().to_vec();
        let r1 = solver.solve_with(|a| 2.0 * a, |j| 2.0 * nodes[j]);
        let r2 = solver.solve_with(|a| 0.1 + a, |j| 0.1 + nodes[j]);
        assert_eq!(r1.flag, RootFlag::Interior);
        assert!((r1.rvalue - 2.0 / 15.0).abs() < 1e-9);
        assert!((r2.rvalue - 0.2).abs() < 1e-9);
        assert!(r1.residual.abs() < 1e-9);
        assert!(!r1.multiple_roots);
    }

    #[test]
    fn boundary_and_no_crossing_flags() {
        let grid = AlphaGrid::default();
        let lam = line_lambda(&grid, |a| 0.2 + 0.5 * a);
        let prior = ThetaLaw::Normal { mu: 0.0, tau2: 1.0 };
        let solver = Solver::new(&prior, &lam, 1e-10);
        let nodes = grid.nodes().to_vec();
        let same = solver.solve_with(|a| lam.eval(a), |j| lam.smoothed[j]);
        assert_eq!(same.flag, RootFlag::AtBoundaryTop);
        assert_eq!(same.rvalue, grid.min());
        let never = solver.solve_with(|a| 0.1 * a, |j| 0.1 * nodes[j]);
        assert_eq!(never.flag, RootFlag::NoCrossing);
        assert_eq!(never.rvalue, 1.0);
        // crosses up at 0.1, back down at 0.3, up again at 0.5
        let wiggle = |a: f64| 0.2 + 0.5 * a + (a - 0.1) * (a - 0.3) * (a - 0.5);
        let multi = solver.solve_with(wiggle, |j| wiggle(nodes[j]));
        assert!(multi.multiple_roots);
        assert!((multi.rvalue - 0.1).abs() < 1e-8);
        assert_eq!(multi.flags(), "interior;multiple-roots");
    }

    proptest! {
        #[test]
        fn rvalue_nonincreasing_in_y(y in 0u64..60, n_extra in 1u64..40) {
            let n = 60 + n_extra;
            let prior = ThetaLaw::Beta { a: 15.12, b: 5.38 };
            let posts: Vec<Posterior> = (0..=n)
                .map(|y| Posterior::from_unit(&Payload::Binomial { y, n }, &prior).unwrap())
                .collect();
            let grid = AlphaGrid::log_enriched(60).unwrap();
            let cfg = RValueConfig { grid, ..Default::default() };
            let lam = build_lambda_curve_streaming(&posts, &prior, &cfg.grid, &cfg.smoothing);
            let solver = Solver::new(&prior, &lam, 1e-9);
            let lo = solver.solve(&posts[y as usize]).rvalue;
            let hi = solver.solve(&posts[y as usize + 1]).rvalue;
            prop_assert!(hi <= lo + 1e-9);
        }
    }
}
