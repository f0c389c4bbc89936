use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rankval_core::io::{fmt_sig6, read_draws_sidecar, read_units_path};
use rankval_core::model::{validate_dataset, Dataset, PayloadKind, PriorSpec, ThetaLaw, ValidationConfig, VarianceLaw};
use rankval_core::prior_fit::{
    empirical_prior_from_dataset, fit_beta_binomial, fit_normal_normal, fit_variance_law, DataFingerprint,
    FitConfig, FitDiagnostics, FittedPrior, VarianceFamily,
};
use rankval_core::closed_form::UTableConfig;
use rankval_core::ranking::{build_ranking_table, rvalues_only, RankConfig, RvalueRoute};
use rankval_core::rvalue::{build_v_matrix, AlphaGrid, RValueConfig, SmoothingConfig, VMatrix};
use rankval_core::tail::Posterior;
use rankval_core::thresholds::{rescale_threshold, threshold_curves, Method};
use rankval_core::Error;
use serde_json::Value;

use crate::args::*;
use crate::bench;
use crate::output::{check_input, check_output, sibling, CliError, CliResult, Provenance};

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Fit(a) => fit(a),
        Command::Tailprob(a) => tailprob(a),
        Command::Rvalue(a) => rvalue(a),
        Command::Rank(a) => rank(a),
        Command::Curves(a) => curves(a),
        Command::Bench(a) => bench::run(a),
    }
}

fn check_data(d: &DataArgs) -> CliResult<()> {
    check_input(&d.input)?;
    if let Some(m) = &d.draws_matrix {
        check_input(m)?;
        if d.model.is_some_and(|k| k != ModelKind::Draws) {
            return Err(CliError::usage("UsageError", "--draws-matrix requires --model draws"));
        }
    }
    Ok(())
}

fn check_prior(p: &PriorArgs) -> CliResult<()> {
    match (p.prior, &p.prior_file) {
        (PriorSource::File, Some(f)) => check_input(f),
        (PriorSource::File, None) => Err(CliError::usage("UsageError", "--prior file needs --prior-file")),
        (PriorSource::Fit, Some(_)) => Err(CliError::usage("UsageError", "--prior-file needs --prior file")),
        (PriorSource::Fit, None) => Ok(()),
    }
}

fn check_outputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> CliResult<()> {
    let mut seen: Vec<&Path> = Vec::new();
    for p in paths {
        check_output(p)?;
        if seen.contains(&p) {
            return Err(CliError::usage(
                "UsageError",
                format!("output '{}' named twice", p.display()),
            ));
        }
        seen.push(p);
    }
    Ok(())
}

fn core_kind(m: ModelKind) -> PayloadKind {
    match m {
        ModelKind::Normal => PayloadKind::Normal,
        ModelKind::Binomial => PayloadKind::Binomial,
        ModelKind::Draws => PayloadKind::Draws,
    }
}

pub fn load(d: &DataArgs) -> CliResult<Dataset> {
    let units = match &d.draws_matrix {
        Some(m) => read_draws_sidecar(File::open(&d.input)?, File::open(m)?)?,
        None => read_units_path(&d.input, d.model.map(core_kind))?,
    };
    Ok(validate_dataset(units, &ValidationConfig::default())?)
}

fn variance_family(v: VarianceFamilyArg) -> VarianceFamily {
    match v {
        VarianceFamilyArg::Gamma => VarianceFamily::Gamma,
        VarianceFamilyArg::InvGamma => VarianceFamily::InvGamma,
    }
}

/// Fit the θ law that matches the data kind.
fn fit_prior(ds: &Dataset, variance: Option<VarianceFamilyArg>) -> CliResult<FittedPrior> {
    let cfg = FitConfig::default();
    let mut fitted = match ds.kind() {
        PayloadKind::Binomial => fit_beta_binomial(ds, &cfg)?,
        PayloadKind::Normal => fit_normal_normal(ds, &cfg)?,
        PayloadKind::Draws => FittedPrior {
            theta: empirical_prior_from_dataset(ds)?,
            variance: None,
            log_likelihood: 0.0,
            converged: true,
            fingerprint: DataFingerprint::of(ds),
            diagnostics: FitDiagnostics {
                warnings: vec!["pooled empirical prior; no likelihood".into()],
                ..Default::default()
            },
        },
    };
    if let Some(fam) = variance {
        if ds.kind() != PayloadKind::Normal {
            return Err(Error::ModelMismatch("a variance law needs normal data".into()).into());
        }
        let vf = fit_variance_law(ds, variance_family(fam))?;
        fitted.diagnostics.warnings.extend(vf.warnings);
        fitted.variance = Some(vf.law);
    }
    Ok(fitted)
}

/// Accepts a fitted prior, a `{"theta", "variance"}` object or a bare θ law.
pub fn parse_prior(text: &str) -> CliResult<PriorSpec> {
    let v: Value = serde_json::from_str(text)?;
    let spec = if v.get("theta").is_some() {
        serde_json::from_value::<PriorSpec>(v)?
    } else {
        PriorSpec {
            theta: serde_json::from_value::<ThetaLaw>(v)?,
            variance: None,
        }
    };
    spec.theta.validate()?;
    if let Some(law) = &spec.variance {
        law.validate()?;
    }
    Ok(spec)
}

struct Resolved {
    spec: PriorSpec,
    fitted: Option<FittedPrior>,
}

fn resolve_prior(p: &PriorArgs, ds: &Dataset, variance: Option<VarianceFamilyArg>) -> CliResult<Resolved> {
    match (p.prior, &p.prior_file) {
        (PriorSource::File, Some(path)) => Ok(Resolved {
            spec: parse_prior(&fs::read_to_string(path)?)?,
            fitted: None,
        }),
        _ => {
            let f = fit_prior(ds, variance)?;
            Ok(Resolved {
                spec: PriorSpec {
                    theta: f.theta.clone(),
                    variance: f.variance.clone(),
                },
                fitted: Some(f),
            })
        }
    }
}

fn rvalue_config(g: &GridArgs, keep_v: bool) -> CliResult<RValueConfig> {
    if !(g.smooth_bandwidth >= 0.0 && g.smooth_bandwidth.is_finite()) {
        return Err(CliError::usage("UsageError", "--smooth-bandwidth must be a nonnegative number"));
    }
    Ok(RValueConfig {
        grid: AlphaGrid::log_enriched(g.grid_size)?,
        smoothing: SmoothingConfig {
            bandwidth: g.smooth_bandwidth,
            isotonic: g.isotonic,
            degree: g.smooth_degree as usize,
        },
        keep_v,
        ..Default::default()
    })
}

fn write_prior(prov: &mut Provenance, path: &Path, fitted: &Option<FittedPrior>) -> CliResult<()> {
    if let Some(f) = fitted {
        prov.write_json(path, serde_json::to_value(f)?)?;
    }
    Ok(())
}

fn write_v(prov: &mut Provenance, path: &Path, ids: &[String], grid: &[f64], v: &VMatrix) -> CliResult<()> {
    prov.write_csv(path, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut head = vec!["id".to_string()];
        head.extend(grid.iter().map(|a| fmt_sig6(*a)));
        w.write_record(&head)?;
        for (i, id) in ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(v.row(i).iter().map(|x| fmt_sig6(*x)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })
}

fn fit(a: FitArgs) -> CliResult<()> {
    check_data(&a.data)?;
    let manifest = a.manifest.clone().unwrap_or_else(|| sibling(&a.out, "manifest.json"));
    check_outputs([a.out.as_path(), manifest.as_path()])?;
    let mut prov = Provenance::new("fit", &a)?;
    let ds = load(&a.data)?;
    prov.input(&a.data.input, &ds);
    prov.phase("load");
    let fitted = fit_prior(&ds, a.variance_law)?;
    prov.phase("fit");
    prov.write_json(&a.out, serde_json::to_value(&fitted)?)?;
    prov.finish(&manifest)
}

fn tailprob(a: TailprobArgs) -> CliResult<()> {
    check_data(&a.data)?;
    check_prior(&a.prior)?;
    let prior_out = a.prior_out.clone().unwrap_or_else(|| sibling(&a.out, "prior.json"));
    let manifest = a.manifest.clone().unwrap_or_else(|| sibling(&a.out, "manifest.json"));
    check_outputs([a.out.as_path(), prior_out.as_path(), manifest.as_path()])?;
    let grid = AlphaGrid::log_enriched(a.grid_size)?;
    let mut prov = Provenance::new("tailprob", &a)?;
    let ds = load(&a.data)?;
    prov.input(&a.data.input, &ds);
    prov.phase("load");
    let prior = resolve_prior(&a.prior, &ds, None)?;
    prov.phase("prior");
    let posteriors: Vec<Posterior> = ds
        .units()
        .iter()
        .map(|u| Posterior::from_unit(&u.payload, &prior.spec.theta))
        .collect::<Result<_, _>>()?;
    let v = build_v_matrix(&posteriors, &prior.spec.theta, &grid);
    prov.phase("tailprob");
    write_v(&mut prov, &a.out, &ds.ids(), grid.nodes(), &v)?;
    write_prior(&mut prov, &prior_out, &prior.fitted)?;
    prov.finish(&manifest)
}

fn rvalue(a: RvalueArgs) -> CliResult<()> {
    check_data(&a.data)?;
    check_prior(&a.prior)?;
    let prior_out = a.prior_out.clone().unwrap_or_else(|| sibling(&a.out, "prior.json"));
    let manifest = a.manifest.clone().unwrap_or_else(|| sibling(&a.out, "manifest.json"));
    let mut outs: Vec<&Path> = vec![&a.out, &prior_out, &manifest];
    outs.extend(a.dump_lambda.as_deref());
    outs.extend(a.dump_v.as_deref());
    check_outputs(outs)?;
    let rc = rvalue_config(&a.grid, a.dump_v.is_some())?;

    let mut prov = Provenance::new("rvalue", &a)?;
    let ds = load(&a.data)?;
    prov.input(&a.data.input, &ds);
    prov.phase("load");
    let prior = resolve_prior(&a.prior, &ds, None)?;
    prov.phase("prior");
    let cfg = RankConfig {
        route: RvalueRoute::Grid(rc.clone()),
        ..Default::default()
    };
    let table = rvalues_only(&ds, &prior.spec.theta, &cfg)?;
    prov.phase("rvalue");

    prov.write_csv(&a.out, |buf| Ok(table.write_rvalue_csv(buf)?))?;
    write_prior(&mut prov, &prior_out, &prior.fitted)?;
    let run = table.run.as_ref().expect("grid route keeps its run");
    if let Some(path) = &a.dump_lambda {
        let lam = &run.lambda;
        prov.write_csv(path, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["alpha", "raw", "smoothed"])?;
            for j in 0..lam.grid.len() {
                w.write_record([fmt_sig6(lam.grid[j]), fmt_sig6(lam.raw[j]), fmt_sig6(lam.smoothed[j])])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    if let (Some(path), Some(v)) = (&a.dump_v, &run.v) {
        write_v(&mut prov, path, &table.ids, rc.grid.nodes(), v)?;
    }
    prov.finish(&manifest)
}

fn rank(a: RankArgs) -> CliResult<()> {
    check_data(&a.data)?;
    check_prior(&a.prior)?;
    let prior_out = a.prior_out.clone().unwrap_or_else(|| sibling(&a.out, "prior.json"));
    let manifest = a.manifest.clone().unwrap_or_else(|| sibling(&a.out, "manifest.json"));
    check_outputs([a.out.as_path(), prior_out.as_path(), manifest.as_path()])?;
    let rc = rvalue_config(&a.grid, false)?;

    let mut prov = Provenance::new("rank", &a)?;
    let ds = load(&a.data)?;
    prov.input(&a.data.input, &ds);
    prov.phase("load");
    let want_variance = (a.route == Route::ClosedForm).then_some(a.variance_law);
    let mut prior = resolve_prior(&a.prior, &ds, want_variance)?;
    let route = match a.route {
        Route::Grid => RvalueRoute::Grid(rc),
        Route::ClosedForm => {
            let law = match prior.spec.variance.clone() {
                Some(l) => l,
                None => {
                    let l = fit_variance_law(&ds, variance_family(a.variance_law))?.law;
                    prior.spec.variance = Some(l.clone());
                    l
                }
            };
            RvalueRoute::ClosedForm(law, UTableConfig::default())
        }
    };
    prov.phase("prior");
    let cfg = RankConfig {
        route,
        pv_benchmark: a.pv_benchmark,
        ..Default::default()
    };
    let table = build_ranking_table(&ds, &prior.spec.theta, &cfg)?;
    prov.phase("rank");
    prov.write_csv(&a.out, |buf| Ok(table.write_csv(buf)?))?;
    write_prior(&mut prov, &prior_out, &prior.fitted)?;
    prov.finish(&manifest)
}

/// Parse `gamma:SHAPE,RATE`, `inv_gamma:SHAPE,SCALE` or `point:SIGMA2`.
pub fn parse_law(spec: &str) -> CliResult<VarianceLaw> {
    let bad = || CliError::usage("UsageError", format!("bad variance law '{spec}'"));
    let (family, params) = spec.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> = params
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let law = match (family.trim(), nums.as_slice()) {
        ("gamma", [shape, rate]) => VarianceLaw::Gamma { shape: *shape, rate: *rate },
        ("inv_gamma", [shape, scale]) => VarianceLaw::InvGamma { shape: *shape, scale: *scale },
        ("point", [s]) => VarianceLaw::PointMass { sigma2: *s },
        _ => return Err(bad()),
    };
    law.validate()?;
    Ok(law)
}

fn curves(a: CurvesArgs) -> CliResult<()> {
    let manifest = a.manifest.clone().unwrap_or_else(|| sibling(&a.out, "manifest.json"));
    if let Some(p) = &a.prior_file {
        check_input(p)?;
    }
    check_outputs([a.out.as_path(), manifest.as_path()])?;
    if !(a.sigma2_min > 0.0 && a.sigma2_max > a.sigma2_min && a.sigma2_points >= 2) {
        return Err(CliError::usage(
            "UsageError",
            "need 0 < --sigma2-min < --sigma2-max and --sigma2-points >= 2",
        ));
    }
    if a.alphas.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(CliError::usage("UsageError", "--alphas must lie in (0, 1)"));
    }

    let mut prov = Provenance::new("curves", &a)?;
    // (mu, tau2) maps the standardized family to the output scale
    let (mu, tau2, law) = match (&a.law, &a.prior_file) {
        (Some(spec), None) => (0.0, 1.0, parse_law(spec)?),
        (None, Some(path)) => {
            let spec = parse_prior(&fs::read_to_string(path)?)?;
            let ThetaLaw::Normal { mu, tau2 } = spec.theta else {
                return Err(Error::ModelMismatch("threshold curves need a normal θ law".into()).into());
            };
            let law = spec
                .variance
                .ok_or_else(|| Error::ModelMismatch("prior file has no variance law".into()))?;
            (mu, tau2, law.scaled(1.0 / tau2))
        }
        _ => return Err(CliError::usage("UsageError", "give exactly one of --law and --prior-file")),
    };
    let ratio = (a.sigma2_max / a.sigma2_min).ln();
    let sigma2: Vec<f64> = (0..a.sigma2_points)
        .map(|k| a.sigma2_min * (ratio * k as f64 / (a.sigma2_points - 1) as f64).exp())
        .collect();
    let s_std: Vec<f64> = sigma2.iter().map(|s| s / tau2).collect();
    let c_std = (a.pv_benchmark - mu) / tau2.sqrt();

    let mut rows = Vec::new();
    for m in &a.methods {
        let method = match m {
            CurveMethod::Mle => Method::Mle,
            CurveMethod::Pv => Method::Pv { c: c_std },
            CurveMethod::Pm => Method::Pm,
            CurveMethod::Per => Method::Per,
            CurveMethod::Bf => Method::Bf,
            CurveMethod::Maxagree => Method::MaxAgree,
        };
        let pts = threshold_curves(method, &a.alphas, &s_std, &law)?;
        for (k, p) in pts.iter().enumerate() {
            rows.push([
                method.name().to_string(),
                fmt_sig6(p.alpha),
                fmt_sig6(sigma2[k % sigma2.len()]),
                fmt_sig6(rescale_threshold(p.threshold, mu, tau2)),
            ]);
        }
    }
    prov.phase("curves");
    prov.write_csv(&a.out, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["method", "alpha", "sigma2", "threshold"])?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    })?;
    prov.finish(&manifest)
}

/// Resolve `rel` against the directory holding `base`.
pub fn relative_to(base: &Path, rel: &Path) -> PathBuf {
    if rel.is_absolute() {
        return rel.to_path_buf();
    }
    base.parent().map(|d| d.join(rel)).unwrap_or_else(|| rel.to_path_buf())
}
