//! The `bench` subcommand.
//!
//! `enrichment` and `agreement` read a simulation config: the fields of a
//! `SimConfig` plus optional `methods` and `gamma_cv`. A `gamma_cv` list
//! sweeps the variance law over Gamma laws with the configured mean and each
//! listed coefficient of variation; sweep point k uses seed `seed + k`. The
//! `validation` study reads `train` and `full` dataset paths (relative to the
//! config file) plus the similarity-study settings.

use std::fs;

use rankval_core::io::fmt_sig6;
use rankval_core::model::VarianceLaw;
use rankval_core::sim::{agreement_study, similarity_validation, AgreementReport, SimConfig, SimilarityConfig};
use rankval_core::thresholds::Method;
use rankval_core::Error;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::args::{BenchArgs, DataArgs, Study};
use crate::commands::{load, relative_to};
use crate::output::{check_input, check_output, sibling, CliError, CliResult, Provenance};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimStudyConfig {
    #[serde(flatten)]
    sim: SimConfig,
    #[serde(default)]
    methods: Option<Vec<String>>,
    #[serde(default)]
    gamma_cv: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ValidationStudyConfig {
    train: PathBuf,
    full: PathBuf,
    #[serde(flatten)]
    similarity: SimilarityConfig,
}

const DEFAULT_METHODS: [&str; 5] = ["mle", "pv", "pm", "per", "rvalue"];

fn parse_method(name: &str) -> CliResult<Method> {
    let m = match name {
        "mle" => Method::Mle,
        "pv" | "pv0" => Method::PV0,
        "pm" => Method::Pm,
        "per" => Method::Per,
        "bf" => Method::Bf,
        "rvalue" | "maxagree" => Method::MaxAgree,
        other => match other.strip_prefix("pv:").map(str::parse::<f64>) {
            Some(Ok(c)) => Method::Pv { c },
            _ => return Err(CliError::usage("UsageError", format!("unknown method '{other}'"))),
        },
    };
    Ok(m)
}

struct Row {
    method: String,
    key: String,
    metric: &'static str,
    value: f64,
    mc_se: Option<f64>,
    seed: u64,
    setting: String,
}

fn binomial_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

fn report_rows(study: Study, rep: &AgreementReport, setting: &str, rows: &mut Vec<Row>) {
    let mut push = |method: &str, alpha: f64, metric, value, mc_se| {
        rows.push(Row {
            method: method.into(),
            key: fmt_sig6(alpha),
            metric,
            value,
            mc_se,
            seed: rep.seed,
            setting: setting.into(),
        })
    };
    for r in &rep.results {
        match study {
            Study::Agreement => {
                let selected: usize = r.counts.iter().map(|c| c.selected).sum();
                let truly: usize = r.counts.iter().map(|c| c.truly_top).sum();
                push(&r.method, r.alpha, "agreement", r.agreement, Some(r.agreement_se));
                push(&r.method, r.alpha, "fdr", r.fdr, Some(binomial_se(r.fdr, selected)));
                push(&r.method, r.alpha, "power", r.power, Some(binomial_se(r.power, truly)));
            }
            _ => {
                push(&r.method, r.alpha, "selected_sigma2_median", r.selected_sigma2_median, None);
                push(&r.method, r.alpha, "selected_sigma2_q25", r.selected_sigma2_iqr.0, None);
                push(&r.method, r.alpha, "selected_sigma2_q75", r.selected_sigma2_iqr.1, None);
                push(
                    &r.method,
                    r.alpha,
                    "median_ratio_to_marginal",
                    r.selected_sigma2_median / rep.marginal_sigma2_median,
                    None,
                );
            }
        }
    }
    if study == Study::Agreement {
        rows.push(Row {
            method: "all".into(),
            key: String::new(),
            metric: "max_identity_error",
            value: rep.max_identity_error,
            mc_se: None,
            seed: rep.seed,
            setting: setting.into(),
        });
    } else {
        rows.push(Row {
            method: "marginal".into(),
            key: String::new(),
            metric: "sigma2_median",
            value: rep.marginal_sigma2_median,
            mc_se: None,
            seed: rep.seed,
            setting: setting.into(),
        });
    }
}

pub fn run(a: BenchArgs) -> CliResult<()> {
    check_input(&a.config)?;
    let manifest = a.manifest.clone().unwrap_or_else(|| sibling(&a.out, "manifest.json"));
    check_output(&a.out)?;
    check_output(&manifest)?;
    let text = fs::read_to_string(&a.config)?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::usage("BadConfig", format!("config: {e}")))?;
    let bad_config = |e: serde_json::Error| CliError::usage("BadConfig", format!("config: {e}"));

    let mut rows = Vec::new();
    let mut prov;
    match a.study {
        Study::Enrichment | Study::Agreement => {
            let cfg: SimStudyConfig = serde_json::from_value(raw).map_err(bad_config)?;
            let methods = match &cfg.methods {
                Some(names) => names.iter().map(|n| parse_method(n)).collect::<CliResult<Vec<_>>>()?,
                None => DEFAULT_METHODS.iter().map(|n| parse_method(n)).collect::<CliResult<Vec<_>>>()?,
            };
            let mut points = Vec::new();
            if cfg.gamma_cv.is_empty() {
                points.push((cfg.sim.clone(), String::new()));
            } else {
                let mean = cfg
                    .sim
                    .variance
                    .as_ref()
                    .map(VarianceLaw::mean)
                    .ok_or_else(|| Error::InvalidParameter("gamma_cv needs a variance law".into()))?;
                for (k, &cv) in cfg.gamma_cv.iter().enumerate() {
                    let mut sim = cfg.sim.clone();
                    sim.variance = Some(VarianceLaw::gamma_mean_cv(mean, cv));
                    sim.seed = cfg.sim.seed + k as u64;
                    points.push((sim, format!("gamma_cv={}", fmt_sig6(cv))));
                }
            }
            for (sim, _) in &points {
                sim.validate()?;
            }
            prov = Provenance::new(
                "bench",
                &serde_json::json!({"study": a.study, "config_path": a.config, "config": cfg}),
            )?;
            prov.set_seed(cfg.sim.seed);
            prov.phase("setup");
            for (sim, setting) in &points {
                let rep = agreement_study(sim, &methods)?;
                report_rows(a.study, &rep, setting, &mut rows);
            }
            prov.phase("study");
        }
        Study::Validation => {
            let cfg: ValidationStudyConfig = serde_json::from_value(raw).map_err(bad_config)?;
            let train_path = relative_to(&a.config, &cfg.train);
            let full_path = relative_to(&a.config, &cfg.full);
            check_input(&train_path)?;
            check_input(&full_path)?;
            prov = Provenance::new(
                "bench",
                &serde_json::json!({"study": a.study, "config_path": a.config, "config": cfg}),
            )?;
            prov.set_seed(cfg.similarity.seed);
            let data = |p: &PathBuf| DataArgs {
                input: p.clone(),
                model: None,
                draws_matrix: None,
            };
            let train = load(&data(&train_path))?;
            let full = load(&data(&full_path))?;
            prov.input(&train_path, &train);
            prov.input(&full_path, &full);
            prov.phase("load");
            let rep = similarity_validation(&train, &full, &cfg.similarity)?;
            for r in &rep.rows {
                rows.push(Row {
                    method: r.method.clone(),
                    key: r.t.to_string(),
                    metric: "mean_similarity",
                    value: r.mean,
                    mc_se: Some(r.se),
                    seed: rep.seed,
                    setting: String::new(),
                });
                if r.method != "rvalue" {
                    rows.push(Row {
                        method: r.method.clone(),
                        key: r.t.to_string(),
                        metric: "rvalue_minus_method",
                        value: r.diff_vs_rvalue,
                        mc_se: Some(r.diff_se),
                        seed: rep.seed,
                        setting: String::new(),
                    });
                }
            }
            prov.phase("study");
        }
    }

    let study = serde_json::to_value(a.study)?;
    let study = study.as_str().unwrap_or_default().to_string();
    prov.write_csv(&a.out, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["study", "method", "alpha_or_t", "metric", "value", "mc_se", "seed", "setting"])?;
        for r in &rows {
            w.write_record([
                study.clone(),
                r.method.clone(),
                r.key.clone(),
                r.metric.to_string(),
                fmt_sig6(r.value),
                r.mc_se.map(fmt_sig6).unwrap_or_default(),
                r.seed.to_string(),
                r.setting.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    prov.finish(&manifest)
}
