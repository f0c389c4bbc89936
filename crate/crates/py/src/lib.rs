//! Python bindings: datasets, priors, r-values, baseline rankings,
//! threshold curves and the simulation studies.
//!
//! Structured results (laws, study reports) cross the boundary as plain
//! dicts through the `json` module, so their keys match the JSON files the
//! CLI writes.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rankval_core::closed_form::UTableConfig;
use rankval_core::io::read_units_path;
use rankval_core::model::{validate_dataset, Dataset, PriorSpec, ThetaLaw, UnitRecord, ValidationConfig, VarianceLaw};
use rankval_core::prior_fit::{
    empirical_prior_from_dataset, fit_beta_binomial, fit_normal_normal, fit_variance_law, FitConfig, FittedPrior,
    VarianceFamily,
};
use rankval_core::ranking::{build_ranking_table, rvalues_only, RankConfig, RankMethod, RankingTable, RvalueRoute};
use rankval_core::rvalue::{AlphaGrid, RValueConfig, SmoothingConfig};
use rankval_core::sim::{agreement_study as run_agreement, ks_uniform as ks, similarity_validation as run_similarity};
use rankval_core::sim::{SimConfig, SimilarityConfig};
use rankval_core::tail::{posterior_mean, Posterior};
use rankval_core::thresholds::{threshold_curves, Method};
use rankval_core::model::PayloadKind;
use rankval_core::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(rankval, RankvalError, PyValueError, "A rankval failure; args are (code, message).");

fn err(e: Error) -> PyErr {
    RankvalError::new_err((e.code(), e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| err(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let py = obj.py();
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| err(e.into()))
}

fn dataset(units: Vec<UnitRecord>) -> PyResult<PyDataset> {
    validate_dataset(units, &ValidationConfig::default())
        .map(|inner| PyDataset { inner })
        .map_err(err)
}

fn same_len(ids: &[String], other: usize) -> PyResult<()> {
    if ids.len() == other {
        Ok(())
    } else {
        Err(err(Error::InvalidParameter(format!("{} ids but {other} values", ids.len()))))
    }
}

/// A validated, homogeneous collection of units.
#[pyclass(frozen, name = "Dataset", module = "rankval")]
pub struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Binomial counts: `y` successes out of `n` trials per unit.
    #[staticmethod]
    fn binomial(ids: Vec<String>, y: Vec<u64>, n: Vec<u64>) -> PyResult<Self> {
        same_len(&ids, y.len())?;
        same_len(&ids, n.len())?;
        dataset(
            ids.into_iter()
                .zip(y.into_iter().zip(n))
                .map(|(id, (y, n))| UnitRecord::binomial(id, y, n))
                .collect(),
        )
    }

    /// Normal estimates `x` with known sampling variances `sigma2`.
    #[staticmethod]
    fn normal(ids: Vec<String>, x: Vec<f64>, sigma2: Vec<f64>) -> PyResult<Self> {
        same_len(&ids, x.len())?;
        same_len(&ids, sigma2.len())?;
        dataset(
            ids.into_iter()
                .zip(x.into_iter().zip(sigma2))
                .map(|(id, (x, s))| UnitRecord::normal(id, x, s))
                .collect(),
        )
    }

    /// Posterior draws of θ, one list per unit.
    #[staticmethod]
    fn draws(ids: Vec<String>, draws: Vec<Vec<f64>>) -> PyResult<Self> {
        same_len(&ids, draws.len())?;
        dataset(ids.into_iter().zip(draws).map(|(id, d)| UnitRecord::draws(id, d)).collect())
    }

    /// Read a unit CSV; the model is inferred from the header.
    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        dataset(read_units_path(&path, None).map_err(err)?)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(kind={}, units={})", self.inner.kind().name(), self.inner.len())
    }
}

/// A θ law, optionally with a variance law and the fit that produced it.
#[pyclass(frozen, name = "Prior", module = "rankval")]
pub struct PyPrior {
    spec: PriorSpec,
    fitted: Option<FittedPrior>,
}

fn family(name: &str) -> PyResult<VarianceFamily> {
    match name {
        "gamma" => Ok(VarianceFamily::Gamma),
        "inv_gamma" => Ok(VarianceFamily::InvGamma),
        other => Err(err(Error::InvalidParameter(format!("unknown variance law '{other}'")))),
    }
}

#[pymethods]
impl PyPrior {
    /// Fit by marginal maximum likelihood (beta-binomial or normal/normal),
    /// or pool the draws into an empirical law. `variance_law` ("gamma" or
    /// "inv_gamma") also fits the σ² law of normal data.
    #[staticmethod]
    #[pyo3(signature = (dataset, variance_law=None))]
    fn fit(dataset: &PyDataset, variance_law: Option<&str>) -> PyResult<Self> {
        let ds = &dataset.inner;
        let cfg = FitConfig::default();
        let (theta, mut fitted) = match ds.kind() {
            PayloadKind::Binomial => {
                let f = fit_beta_binomial(ds, &cfg).map_err(err)?;
                (f.theta.clone(), Some(f))
            }
            PayloadKind::Normal => {
                let f = fit_normal_normal(ds, &cfg).map_err(err)?;
                (f.theta.clone(), Some(f))
            }
            PayloadKind::Draws => (empirical_prior_from_dataset(ds).map_err(err)?, None),
        };
        let variance = match variance_law {
            Some(name) => Some(fit_variance_law(ds, family(name)?).map_err(err)?.law),
            None => None,
        };
        if let Some(f) = fitted.as_mut() {
            f.variance = variance.clone();
        }
        Ok(Self {
            spec: PriorSpec { theta, variance },
            fitted,
        })
    }

    #[staticmethod]
    fn beta(a: f64, b: f64) -> PyResult<Self> {
        Self::from_spec(PriorSpec {
            theta: ThetaLaw::Beta { a, b },
            variance: None,
        })
    }

    /// Normal θ law; `variance` is a variance-law dict such as
    /// `{"family": "gamma", "shape": 2.0, "rate": 2.0}`.
    #[staticmethod]
    #[pyo3(signature = (mu, tau2, variance=None))]
    fn normal(mu: f64, tau2: f64, variance: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let variance = variance.map(from_py::<VarianceLaw>).transpose()?;
        Self::from_spec(PriorSpec {
            theta: ThetaLaw::Normal { mu, tau2 },
            variance,
        })
    }

    /// Accepts a fitted-prior JSON document, `{"theta": ..., "variance": ...}`
    /// or a bare θ law.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| err(e.into()))?;
        if v.get("fingerprint").is_some() {
            let f = FittedPrior::from_json(text).map_err(err)?;
            return Ok(Self {
                spec: PriorSpec {
                    theta: f.theta.clone(),
                    variance: f.variance.clone(),
                },
                fitted: Some(f),
            });
        }
        let spec = if v.get("theta").is_some() {
            serde_json::from_value(v)
        } else {
            serde_json::from_value(v).map(|theta| PriorSpec { theta, variance: None })
        }
        .map_err(|e| err(e.into()))?;
        Self::from_spec(spec)
    }

    fn to_json(&self) -> PyResult<String> {
        match &self.fitted {
            Some(f) => f.to_json().map_err(err),
            None => serde_json::to_string_pretty(&self.spec).map_err(|e| err(e.into())),
        }
    }

    #[getter]
    fn theta<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.spec.theta)
    }

    #[getter]
    fn variance<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.spec.variance)
    }

    #[getter]
    fn log_likelihood(&self) -> Option<f64> {
        self.fitted.as_ref().map(|f| f.log_likelihood)
    }

    #[getter]
    fn std_errors<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.fitted.as_ref().map(|f| &f.diagnostics.std_errors))
    }

    fn __repr__(&self) -> String {
        format!("Prior({})", serde_json::to_string(&self.spec.theta).unwrap_or_default())
    }
}

impl PyPrior {
    fn from_spec(spec: PriorSpec) -> PyResult<Self> {
        spec.theta.validate().map_err(err)?;
        if let Some(v) = &spec.variance {
            v.validate().map_err(err)?;
        }
        Ok(Self { spec, fitted: None })
    }
}

fn method_by_name(name: &str) -> PyResult<RankMethod> {
    [
        RankMethod::Rvalue,
        RankMethod::Mle,
        RankMethod::Pvalue,
        RankMethod::Pm,
        RankMethod::Per,
        RankMethod::Bf,
    ]
    .into_iter()
    .find(|m| m.name() == name)
    .ok_or_else(|| err(Error::InvalidParameter(format!("unknown ranking method '{name}'"))))
}

/// Ranking variables and ranks (1 = best) per method.
#[pyclass(frozen, name = "RankingTable", module = "rankval")]
pub struct PyRankingTable {
    inner: RankingTable,
}

#[pymethods]
impl PyRankingTable {
    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids.clone()
    }

    #[getter]
    fn methods(&self) -> Vec<&'static str> {
        self.inner.columns.iter().map(|c| c.method.name()).collect()
    }

    fn values(&self, method: &str) -> PyResult<Vec<f64>> {
        let m = method_by_name(method)?;
        self.inner
            .column(m)
            .map(|c| c.values.clone())
            .ok_or_else(|| err(Error::InvalidParameter(format!("table has no '{method}' column"))))
    }

    fn ranks(&self, method: &str) -> PyResult<Vec<usize>> {
        let m = method_by_name(method)?;
        self.inner
            .column(m)
            .map(|c| c.ranks.clone())
            .ok_or_else(|| err(Error::InvalidParameter(format!("table has no '{method}' column"))))
    }

    #[getter]
    fn rvalues(&self) -> Vec<f64> {
        self.inner.rvalues.iter().map(|r| r.rvalue).collect()
    }

    #[getter]
    fn flags(&self) -> Vec<String> {
        self.inner.rvalues.iter().map(|r| r.flags()).collect()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.inner.rvalues.iter().map(|r| r.residual).collect()
    }

    /// `{"grid", "raw", "smoothed"}` for grid r-values, else None.
    #[getter]
    fn lambda_curve<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.run.as_ref().map(|r| &r.lambda))
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.diagnostics.warnings.clone()
    }

    /// The full table as CSV text.
    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(err)?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }

    fn __len__(&self) -> usize {
        self.inner.ids.len()
    }
}

fn grid_route(grid_size: usize, smooth_bandwidth: f64, smooth_degree: usize, isotonic: bool) -> PyResult<RvalueRoute> {
    Ok(RvalueRoute::Grid(RValueConfig {
        grid: AlphaGrid::log_enriched(grid_size).map_err(err)?,
        smoothing: SmoothingConfig {
            bandwidth: smooth_bandwidth,
            isotonic,
            degree: smooth_degree,
        },
        ..Default::default()
    }))
}

/// r-values by the grid algorithm.
#[pyfunction]
#[pyo3(signature = (dataset, prior, grid_size=199, smooth_bandwidth=5.0, smooth_degree=0, isotonic=false))]
fn rvalues(
    dataset: &PyDataset,
    prior: &PyPrior,
    grid_size: usize,
    smooth_bandwidth: f64,
    smooth_degree: usize,
    isotonic: bool,
) -> PyResult<PyRankingTable> {
    let cfg = RankConfig {
        route: grid_route(grid_size, smooth_bandwidth, smooth_degree, isotonic)?,
        ..Default::default()
    };
    rvalues_only(&dataset.inner, &prior.spec.theta, &cfg)
        .map(|inner| PyRankingTable { inner })
        .map_err(err)
}

/// Every ranking method the data supports. `route="closed_form"` computes
/// normal r-values from the prior's variance law.
#[pyfunction]
#[pyo3(signature = (dataset, prior, route="grid", pv_benchmark=0.0, grid_size=199, smooth_bandwidth=5.0))]
fn rank(
    dataset: &PyDataset,
    prior: &PyPrior,
    route: &str,
    pv_benchmark: f64,
    grid_size: usize,
    smooth_bandwidth: f64,
) -> PyResult<PyRankingTable> {
    let route = match route {
        "grid" => grid_route(grid_size, smooth_bandwidth, 0, false)?,
        "closed_form" => {
            let law = prior
                .spec
                .variance
                .clone()
                .ok_or_else(|| err(Error::ModelMismatch("closed form needs a prior with a variance law".into())))?;
            RvalueRoute::ClosedForm(law, UTableConfig::default())
        }
        other => return Err(err(Error::InvalidParameter(format!("unknown route '{other}'")))),
    };
    let cfg = RankConfig {
        route,
        pv_benchmark,
        ..Default::default()
    };
    build_ranking_table(&dataset.inner, &prior.spec.theta, &cfg)
        .map(|inner| PyRankingTable { inner })
        .map_err(err)
}

/// `P(θ_i ≥ theta | D_i)` for every unit.
#[pyfunction]
fn tail_probabilities(dataset: &PyDataset, prior: &PyPrior, theta: f64) -> PyResult<Vec<f64>> {
    dataset
        .inner
        .units()
        .iter()
        .map(|u| Posterior::from_unit(&u.payload, &prior.spec.theta).map(|p| p.upper_tail(theta)))
        .collect::<Result<_, _>>()
        .map_err(err)
}

#[pyfunction]
fn posterior_means(dataset: &PyDataset, prior: &PyPrior) -> PyResult<Vec<f64>> {
    dataset
        .inner
        .units()
        .iter()
        .map(|u| posterior_mean(&u.payload, &prior.spec.theta))
        .collect::<Result<_, _>>()
        .map_err(err)
}

fn study_method(name: &str) -> PyResult<Method> {
    Ok(match name {
        "mle" => Method::Mle,
        "pv" | "pv0" => Method::PV0,
        "pm" => Method::Pm,
        "per" => Method::Per,
        "bf" => Method::Bf,
        "rvalue" | "maxagree" => Method::MaxAgree,
        other => match other.strip_prefix("pv:").map(str::parse::<f64>) {
            Some(Ok(c)) => Method::Pv { c },
            _ => return Err(err(Error::InvalidParameter(format!("unknown method '{other}'")))),
        },
    })
}

/// Standardized threshold curve as `(alpha, sigma2, threshold)` tuples.
#[pyfunction]
fn threshold_curve(
    method: &str,
    alphas: Vec<f64>,
    sigma2: Vec<f64>,
    variance_law: &Bound<'_, PyAny>,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let law: VarianceLaw = from_py(variance_law)?;
    let pts = threshold_curves(study_method(method)?, &alphas, &sigma2, &law).map_err(err)?;
    Ok(pts.into_iter().map(|p| (p.alpha, p.sigma2, p.threshold)).collect())
}

/// Agreement, FDR, power and selected-σ² summaries; `config` has the
/// fields of the CLI's simulation config.
#[pyfunction]
#[pyo3(signature = (config, methods=vec!["mle".to_string(), "pv".into(), "pm".into(), "per".into(), "rvalue".into()]))]
fn agreement_study<'py>(
    py: Python<'py>,
    config: &Bound<'py, PyAny>,
    methods: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg: SimConfig = from_py(config)?;
    let methods = methods.iter().map(|m| study_method(m)).collect::<PyResult<Vec<_>>>()?;
    let rep = py.detach(|| run_agreement(&cfg, &methods)).map_err(err)?;
    to_py(py, &rep)
}

/// Mean top-t similarity of rankings from `train` to θ drawn given `full`.
#[pyfunction]
fn similarity_validation<'py>(
    py: Python<'py>,
    train: &PyDataset,
    full: &PyDataset,
    config: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg: SimilarityConfig = from_py(config)?;
    let rep = py.detach(|| run_similarity(&train.inner, &full.inner, &cfg)).map_err(err)?;
    to_py(py, &rep)
}

/// Kolmogorov-Smirnov distance to Uniform(0, 1).
#[pyfunction]
fn ks_uniform(values: Vec<f64>) -> f64 {
    ks(&values)
}

#[pymodule]
fn rankval(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("RankvalError", m.py().get_type::<RankvalError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyPrior>()?;
    m.add_class::<PyRankingTable>()?;
    m.add_function(wrap_pyfunction!(rvalues, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(tail_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_means, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_curve, m)?)?;
    m.add_function(wrap_pyfunction!(agreement_study, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_validation, m)?)?;
    m.add_function(wrap_pyfunction!(ks_uniform, m)?)?;
    Ok(())
}
