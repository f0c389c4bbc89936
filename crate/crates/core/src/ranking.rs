//! Per-unit ranking variables and integer ranks for every method.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::{ClosedForm, UTableConfig};
use crate::error::{Error, Result};
use crate::io::fmt_sig6;
use crate::model::{assign_ranks, Dataset, Orientation, Payload, ThetaLaw, VarianceLaw};
use crate::rvalue::{compute_rvalues, RValueConfig, RValueResult, RValueRun};
use crate::special::norm_sf;
use crate::tail::{PerQuadrature, Posterior, PER_NODES};
use crate::thresholds::{standardized_variable, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    Rvalue,
    Mle,
    Pvalue,
    Pm,
    Per,
    Bf,
}

impl RankMethod {
    pub fn name(self) -> &'static str {
        match self {
            RankMethod::Rvalue => "rvalue",
            RankMethod::Mle => "mle",
            RankMethod::Pvalue => "pvalue",
            RankMethod::Pm => "pm",
            RankMethod::Per => "per",
            RankMethod::Bf => "bf",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            RankMethod::Rvalue | RankMethod::Pvalue | RankMethod::Per => Orientation::SmallerIsBetter,
            RankMethod::Mle | RankMethod::Pm | RankMethod::Bf => Orientation::LargerIsBetter,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodColumn {
    pub method: RankMethod,
    pub orientation: Orientation,
    pub values: Vec<f64>,
    pub ranks: Vec<usize>,
}

/// How r-values are computed.
#[derive(Debug, Clone)]
pub enum RvalueRoute {
    Grid(RValueConfig),
    /// Normal data only: invert the optimal threshold under this variance law.
    ClosedForm(VarianceLaw, UTableConfig),
}

#[derive(Debug, Clone)]
pub struct RankConfig {
    pub route: RvalueRoute,
    /// Benchmark null for the one-sided p-value, original scale.
    pub pv_benchmark: f64,
    pub per_nodes: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            route: RvalueRoute::Grid(RValueConfig::default()),
            pv_benchmark: 0.0,
            per_nodes: PER_NODES,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableDiagnostics {
    pub prior: ThetaLaw,
    pub grid_size: usize,
    pub max_abs_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingTable {
    pub ids: Vec<String>,
    pub columns: Vec<MethodColumn>,
    pub rvalues: Vec<RValueResult>,
    pub diagnostics: TableDiagnostics,
    #[serde(skip)]
    pub run: Option<RValueRun>,
}

impl RankingTable {
    pub fn column(&self, m: RankMethod) -> Option<&MethodColumn> {
        self.columns.iter().find(|c| c.method == m)
    }

    /// Unit indices in rank order for a method.
    pub fn order(&self, m: RankMethod) -> Option<Vec<usize>> {
        let col = self.column(m)?;
        let mut idx: Vec<usize> = (0..self.ids.len()).collect();
        idx.sort_by_key(|&i| col.ranks[i]);
        Some(idx)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut head = vec!["id".to_string()];
        for c in &self.columns {
            head.push(c.method.name().to_string());
            head.push(format!("{}_rank", c.method.name()));
            if c.method == RankMethod::Rvalue {
                head.push("rvalue_flags".into());
                head.push("rvalue_residual".into());
            }
        }
        w.write_record(&head)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            for c in &self.columns {
                row.push(fmt_sig6(c.values[i]));
                row.push(c.ranks[i].to_string());
                if c.method == RankMethod::Rvalue {
                    row.push(self.rvalues[i].flags());
                    row.push(fmt_sig6(self.rvalues[i].residual));
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// The `rvalue` subcommand's table: id, rvalue, rank, flags, residual.
    pub fn write_rvalue_csv<W: Write>(&self, out: W) -> Result<()> {
        let col = self
            .column(RankMethod::Rvalue)
            .ok_or_else(|| Error::InvalidParameter("table has no r-values".into()))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "rvalue", "rank", "flags", "residual"])?;
        for (i, id) in self.ids.iter().enumerate() {
            w.write_record([
                id.clone(),
                fmt_sig6(col.values[i]),
                col.ranks[i].to_string(),
                self.rvalues[i].flags(),
                fmt_sig6(self.rvalues[i].residual),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn column(method: RankMethod, values: Vec<f64>, ids: &[String]) -> MethodColumn {
    let ranks = assign_ranks(&values, ids, method.orientation());
    MethodColumn {
        method,
        orientation: method.orientation(),
        values,
        ranks,
    }
}

/// r-values alone, for any supported model.
pub fn rvalues_only(ds: &Dataset, prior: &ThetaLaw, cfg: &RankConfig) -> Result<RankingTable> {
    build(ds, prior, cfg, false)
}

/// All ranking variables the data kind supports.
pub fn build_ranking_table(ds: &Dataset, prior: &ThetaLaw, cfg: &RankConfig) -> Result<RankingTable> {
    build(ds, prior, cfg, true)
}

fn build(ds: &Dataset, prior: &ThetaLaw, cfg: &RankConfig, all: bool) -> Result<RankingTable> {
    prior.validate()?;
    let ids = ds.ids();
    let posteriors: Vec<Posterior> = ds
        .units()
        .par_iter()
        .map(|u| Posterior::from_unit(&u.payload, prior))
        .collect::<Result<_>>()?;
    let mut warnings: Vec<String> = ds.warnings().to_vec();

    let (rvalues, run, grid_size) = match &cfg.route {
        RvalueRoute::Grid(rc) => {
            let run = compute_rvalues(&posteriors, prior, rc)?;
            warnings.extend(run.warnings.iter().cloned());
            (run.results.clone(), Some(run), rc.grid.len())
        }
        RvalueRoute::ClosedForm(law, tc) => {
            let (xs, s2) = ds
                .normal_columns()
                .ok_or_else(|| Error::ModelMismatch("closed-form r-values need normal data".into()))?;
            let cf = ClosedForm::new(prior, law, tc)?;
            let res = xs
                .par_iter()
                .zip(s2.par_iter())
                .map(|(&x, &s)| {
                    let r = cf.rvalue(x, s);
                    RValueResult {
                        rvalue: r,
                        residual: 0.0,
                        flag: if r >= 1.0 {
                            crate::rvalue::RootFlag::NoCrossing
                        } else {
                            crate::rvalue::RootFlag::Interior
                        },
                        multiple_roots: false,
                    }
                })
                .collect();
            (res, None, tc.nodes)
        }
    };
    let max_abs_residual = rvalues
        .iter()
        .filter(|r| r.flag == crate::rvalue::RootFlag::Interior)
        .map(|r| r.residual.abs())
        .fold(0.0, f64::max);
    let mut columns = vec![column(
        RankMethod::Rvalue,
        rvalues.iter().map(|r| r.rvalue).collect(),
        &ids,
    )];

    if all {
        let pm: Vec<f64> = posteriors.iter().map(Posterior::mean).collect();
        match (ds.kind(), prior) {
            (crate::model::PayloadKind::Normal, ThetaLaw::Normal { mu, tau2 }) => {
                let (xs, s2) = ds.normal_columns().expect("normal data");
                let tau = tau2.sqrt();
                let std_var = |m: Method| -> Vec<f64> {
                    xs.iter()
                        .zip(&s2)
                        .map(|(&x, &s)| standardized_variable(m, (x - mu) / tau, s / tau2))
                        .collect()
                };
                columns.push(column(RankMethod::Mle, xs.clone(), &ids));
                let pv = xs
                    .iter()
                    .zip(&s2)
                    .map(|(&x, &s)| norm_sf((x - cfg.pv_benchmark) / s.sqrt()))
                    .collect();
                columns.push(column(RankMethod::Pvalue, pv, &ids));
                columns.push(column(RankMethod::Pm, pm, &ids));
                if *tau2 > 0.0 {
                    columns.push(column(RankMethod::Per, std_var(Method::Per), &ids));
                    columns.push(column(RankMethod::Bf, std_var(Method::Bf), &ids));
                } else {
                    warnings.push("tau2 = 0: PER and BF omitted".into());
                }
            }
            (kind, _) => {
                if kind == crate::model::PayloadKind::Binomial {
                    let mle = ds
                        .units()
                        .iter()
                        .map(|u| match u.payload {
                            Payload::Binomial { y, n } => y as f64 / n as f64,
                            _ => f64::NAN,
                        })
                        .collect();
                    columns.push(column(RankMethod::Mle, mle, &ids));
                }
                columns.push(column(RankMethod::Pm, pm, &ids));
                let quad = PerQuadrature::new(prior, cfg.per_nodes)?;
                let per = posteriors.par_iter().map(|p| quad.per(p)).collect();
                columns.push(column(RankMethod::Per, per, &ids));
            }
        }
    }
    Ok(RankingTable {
        ids,
        columns,
        rvalues,
        diagnostics: TableDiagnostics {
            prior: prior.clone(),
            grid_size,
            max_abs_residual,
            warnings,
        },
        run,
    })
}

/// Bayes factors exist only for the normal model.
pub fn bf_variable(payload: &Payload, prior: &ThetaLaw) -> Result<f64> {
    match (payload, prior) {
        (Payload::Normal { x, sigma2 }, ThetaLaw::Normal { mu, tau2 }) if *tau2 > 0.0 => Ok(
            standardized_variable(Method::Bf, (x - mu) / tau2.sqrt(), sigma2 / tau2),
        ),
        _ => Err(Error::BfUndefined),
    }
}
