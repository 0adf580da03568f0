//! Implementations of the four subcommands. Each takes a typed
//! configuration, reads/writes files under the output directory, and
//! returns a single-line error on failure.

use crate::io::{
    self, read_table_file, write_csv, write_json, BoxError, CliResult, EstimatesDoc, FitDocument,
    MleAnchorDoc, SelectedDocument, SimulateDocument, SCHEMA_VERSION,
};
use crate::summary;
use gpsvc::{
    default_bounds_and_init, fit_mle_on, information_criterion, predict_svc, sample_full_svc,
    sample_uniform_locs, select_grid, select_mbo, BoundsInit, CdControl, FitResult, IcType,
    KernelKind, KernelSpec, LikelihoodEngine, MleControl, SelectionResult, SvcData,
};
use nalgebra::DMatrix;
use std::path::{Path, PathBuf};

fn err(msg: impl Into<String>) -> BoxError {
    msg.into().into()
}

fn ensure_out_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| err(format!("cannot create output directory {}: {e}", out.display())))
}

#[derive(Debug, Clone)]
pub struct SimulateConfig {
    pub n: usize,
    pub dim: usize,
    pub domain: (f64, f64),
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub ranges: Vec<f64>,
    pub nugget_sd: f64,
    pub kernel: KernelKind,
    pub seed: u64,
    pub out: PathBuf,
}

/// Write `data.csv` (y, x*, loc*), `truth.csv` (beta_1..beta_q), and
/// `params.json`.
pub fn cmd_simulate(config: &SimulateConfig) -> CliResult<()> {
    ensure_out_dir(&config.out)?;
    let locs = sample_uniform_locs(
        config.n,
        config.dim,
        config.domain.0,
        config.domain.1,
        config.seed,
    )
    .map_err(|e| err(e.to_string()))?;
    let truth = sample_full_svc(
        &config.means,
        &config.variances,
        &config.ranges,
        config.nugget_sd,
        &locs,
        config.kernel,
        config.seed,
    )
    .map_err(|e| err(e.to_string()))?;

    let q = config.means.len();
    let d = config.dim;
    let mut headers = vec!["y".to_string()];
    headers.extend((1..=q).map(|k| format!("x{k}")));
    headers.extend((1..=d).map(|k| format!("loc{k}")));
    let data = &truth.data;
    let rows: Vec<Vec<f64>> = (0..config.n)
        .map(|i| {
            let mut row = Vec::with_capacity(1 + q + d);
            row.push(data.y()[i]);
            for k in 0..q {
                row.push(data.x()[(i, k)]);
            }
            for k in 0..d {
                row.push(data.locs()[(i, k)]);
            }
            row
        })
        .collect();
    write_csv(&config.out.join("data.csv"), &headers, &rows)?;

    let beta_headers: Vec<String> = (1..=q).map(|k| format!("beta_{k}")).collect();
    let beta_rows: Vec<Vec<f64>> = (0..config.n)
        .map(|i| (0..q).map(|k| truth.beta[(i, k)]).collect())
        .collect();
    write_csv(&config.out.join("truth.csv"), &beta_headers, &beta_rows)?;

    write_json(
        &config.out.join("params.json"),
        &SimulateDocument {
            schema_version: SCHEMA_VERSION,
            kernel: config.kernel.name().to_string(),
            seed: config.seed,
            n: config.n,
            dim: config.dim,
            domain: [config.domain.0, config.domain.1],
            means: config.means.clone(),
            variances: config.variances.clone(),
            ranges: config.ranges.clone(),
            nugget_sd: config.nugget_sd,
        },
    )
}

/// Column roles shared by `fit` and `select`.
#[derive(Debug, Clone)]
pub struct ColumnRoles {
    pub response: String,
    pub fixed: Vec<String>,
    /// Defaults to the fixed-effect list when absent.
    pub random: Option<Vec<String>>,
    pub locs: Vec<String>,
}

impl ColumnRoles {
    pub fn random_names(&self) -> Vec<String> {
        self.random.clone().unwrap_or_else(|| self.fixed.clone())
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub data: PathBuf,
    pub roles: ColumnRoles,
    pub kernel: KernelKind,
    pub taper: Option<f64>,
    pub profile: bool,
    pub threads: usize,
    pub max_iter: usize,
    pub lower: Option<Vec<f64>>,
    pub init: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub out: PathBuf,
}

fn kernel_spec(kernel: KernelKind, taper: Option<f64>) -> CliResult<KernelSpec> {
    match taper {
        None => Ok(KernelSpec::new(kernel)),
        Some(range) => KernelSpec::with_taper_range(kernel, range).map_err(|e| err(e.to_string())),
    }
}

fn load_data(path: &Path, roles: &ColumnRoles) -> CliResult<(SvcData, io::Table)> {
    let table = read_table_file(path)?;
    let y = table.column(table.column_index(&roles.response)?);
    let x = table.matrix(&roles.fixed)?;
    let w = table.matrix(&roles.random_names())?;
    let locs = table.matrix(&roles.locs)?;
    let data = SvcData::new(nalgebra::DVector::from_vec(y), x, Some(w), locs)
        .map_err(|e| err(e.to_string()))?;
    Ok((data, table))
}

/// Table-default bounds with any user-provided vectors substituted in.
fn resolve_bounds(
    data: &SvcData,
    profile: bool,
    lower: &Option<Vec<f64>>,
    init: &Option<Vec<f64>>,
    upper: &Option<Vec<f64>>,
) -> CliResult<BoundsInit> {
    let mut bounds = default_bounds_and_init(data, profile).map_err(|e| err(e.to_string()))?;
    let dim = bounds.init.len();
    for (name, target, provided) in [
        ("--lower", &mut bounds.lower, lower),
        ("--init", &mut bounds.init, init),
        ("--upper", &mut bounds.upper, upper),
    ] {
        if let Some(values) = provided {
            if values.len() != dim {
                return Err(err(format!(
                    "{name} has {} entries but the {} parametrization needs {dim}",
                    values.len(),
                    if profile { "profile" } else { "full" }
                )));
            }
            target.clone_from(values);
        }
    }
    bounds.validate().map_err(|e| err(e.to_string()))?;
    Ok(bounds)
}

fn run_fit(
    data: SvcData,
    config_kernel: KernelKind,
    taper: Option<f64>,
    profile: bool,
    threads: usize,
    max_iter: usize,
    lower: &Option<Vec<f64>>,
    init: &Option<Vec<f64>>,
    upper: &Option<Vec<f64>>,
) -> CliResult<(FitResult, LikelihoodEngine, BoundsInit)> {
    let spec = kernel_spec(config_kernel, taper)?;
    let bounds = resolve_bounds(&data, profile, lower, init, upper)?;
    let control = MleControl {
        profile,
        threads,
        max_iter,
        bounds: Some(bounds.clone()),
        ..MleControl::new(spec)
    };
    let engine = LikelihoodEngine::new(data, spec).map_err(|e| err(e.to_string()))?;
    let fit = fit_mle_on(&engine, &control).map_err(|e| err(e.to_string()))?;
    Ok((fit, engine, bounds))
}

/// Fit, write `fit.json` and `residuals.csv`, and print the summary.
pub fn cmd_fit(config: &FitConfig) -> CliResult<()> {
    ensure_out_dir(&config.out)?;
    let (data, _) = load_data(&config.data, &config.roles)?;
    let (fit, engine, _) = run_fit(
        data,
        config.kernel,
        config.taper,
        config.profile,
        config.threads,
        config.max_iter,
        &config.lower,
        &config.init,
        &config.upper,
    )?;

    let doc = FitDocument::new(
        &fit,
        engine.data(),
        config.kernel.name(),
        config.taper,
        &config.roles.response,
        &config.roles.fixed,
        &config.roles.random_names(),
        &config.roles.locs,
    );
    write_json(&config.out.join("fit.json"), &doc)?;

    let resid_rows: Vec<Vec<f64>> = fit.residuals.iter().map(|e| vec![*e]).collect();
    write_csv(
        &config.out.join("residuals.csv"),
        &["residual".to_string()],
        &resid_rows,
    )?;

    print!("{}", summary::render_fit_summary(&fit, &engine, &doc));
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PredictConfig {
    /// CSV of new locations, named as in the fit; may also carry the fit's
    /// fixed and random covariate columns to request response predictions.
    pub data: PathBuf,
    pub fit: PathBuf,
    pub out: PathBuf,
}

/// Read `fit.json`, predict at the new locations, write `predictions.csv`
/// with columns `SVC_1..SVC_q [, y_hat, pred_var]`.
pub fn cmd_predict(config: &PredictConfig) -> CliResult<()> {
    ensure_out_dir(&config.out)?;
    let bytes = std::fs::read(&config.fit)
        .map_err(|e| err(format!("cannot read {}: {e}", config.fit.display())))?;
    let doc = FitDocument::from_json(&bytes)?;
    let data = doc.training_data()?;
    let kernel: KernelKind = doc
        .kernel
        .parse()
        .map_err(|e: gpsvc::Error| err(e.to_string()))?;
    let spec = kernel_spec(kernel, doc.taper_range)?;
    let engine = LikelihoodEngine::new(data, spec).map_err(|e| err(e.to_string()))?;
    let omega = doc.estimates.to_params()?;

    let table = read_table_file(&config.data)?;
    let newlocs = table.matrix(&doc.loc_names)?;
    let have_design = doc
        .fixed_names
        .iter()
        .chain(doc.random_names.iter())
        .all(|n| table.headers.iter().any(|h| h == n));
    let (new_x, new_w) = if have_design {
        (
            Some(table.matrix(&doc.fixed_names)?),
            Some(table.matrix(&doc.random_names)?),
        )
    } else {
        (None, None)
    };

    let prediction = predict_svc(&engine, &omega, &newlocs, new_x.as_ref(), new_w.as_ref())
        .map_err(|e| err(e.to_string()))?;

    let q = omega.q();
    let mut headers: Vec<String> = (1..=q).map(|k| format!("SVC_{k}")).collect();
    if prediction.y_hat.is_some() {
        headers.push("y_hat".to_string());
        headers.push("pred_var".to_string());
    }
    let rows: Vec<Vec<f64>> = (0..newlocs.nrows())
        .map(|i| {
            let mut row: Vec<f64> = (0..q).map(|k| prediction.eta[(i, k)]).collect();
            if let (Some(y), Some(v)) = (&prediction.y_hat, &prediction.pred_var) {
                row.push(y[i]);
                row.push(v[i]);
            }
            row
        })
        .collect();
    write_csv(&config.out.join("predictions.csv"), &headers, &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMethod {
    Grid,
    Mbo,
}

#[derive(Debug, Clone)]
pub struct SelectConfig {
    pub data: PathBuf,
    pub roles: ColumnRoles,
    pub kernel: KernelKind,
    pub taper: Option<f64>,
    pub profile: bool,
    pub threads: usize,
    pub max_iter: usize,
    pub lower: Option<Vec<f64>>,
    pub init: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub method: SelectMethod,
    pub ic: IcType,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_per_dim: usize,
    pub n_init: usize,
    pub n_iter: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn make_pool(threads: usize) -> CliResult<Option<rayon::ThreadPool>> {
    if threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map(Some)
            .map_err(|e| err(format!("thread pool construction failed: {e}")))
    } else {
        Ok(None)
    }
}

/// Anchor MLE, shrinkage search, `selection_trace.csv` plus `selected.json`.
pub fn cmd_select(config: &SelectConfig) -> CliResult<()> {
    ensure_out_dir(&config.out)?;
    let (data, _) = load_data(&config.data, &config.roles)?;
    let (mle_fit, engine, theta_bounds_full) = run_fit(
        data,
        config.kernel,
        config.taper,
        config.profile,
        config.threads,
        config.max_iter,
        &config.lower,
        &config.init,
        &config.upper,
    )?;
    // the coordinate descent re-uses the MLE's covariance bounds
    let p = engine.data().p();
    let theta_bounds = if config.profile {
        theta_bounds_full
    } else {
        BoundsInit {
            lower: theta_bounds_full.lower[p..].to_vec(),
            init: theta_bounds_full.init[p..].to_vec(),
            upper: theta_bounds_full.upper[p..].to_vec(),
        }
    };

    let lambda_box = gpsvc::LambdaBox::square(config.lambda_min, config.lambda_max)
        .map_err(|e| err(e.to_string()))?;
    let cd = CdControl::default();
    let pool = make_pool(config.threads)?;
    let result: SelectionResult = match config.method {
        SelectMethod::Grid => select_grid(
            &engine,
            &mle_fit.estimates,
            &theta_bounds,
            &lambda_box,
            config.n_per_dim,
            config.ic,
            &cd,
            pool.as_ref(),
        ),
        SelectMethod::Mbo => select_mbo(
            &engine,
            &mle_fit.estimates,
            &theta_bounds,
            &lambda_box,
            config.n_init,
            config.n_iter,
            config.ic,
            &cd,
            config.seed,
            pool.as_ref(),
        ),
    }
    .map_err(|e| err(e.to_string()))?;

    // trace: method, iter, lambda_mu, lambda_theta, ic_value, converged
    let mut trace = String::from("method,iter,lambda_mu,lambda_theta,ic_value,converged\n");
    for (i, e) in result.evaluations.iter().enumerate() {
        trace.push_str(&format!(
            "{},{},{},{},{},{}\n",
            result.method.name(),
            i,
            io::fmt_f64(e.pair.lambda_mu),
            io::fmt_f64(e.pair.lambda_theta),
            io::fmt_f64(e.ic),
            e.converged
        ));
    }
    std::fs::write(config.out.join("selection_trace.csv"), trace)
        .map_err(|e| err(format!("cannot write selection_trace.csv: {e}")))?;

    let best = result.best_eval();
    let best_estimate = best
        .estimate
        .as_ref()
        .ok_or_else(|| err("chosen evaluation carries no estimate"))?;
    let mle_ic = information_criterion(&engine, &mle_fit.estimates, config.ic)
        .map_err(|e| err(e.to_string()))?;
    write_json(
        &config.out.join("selected.json"),
        &SelectedDocument {
            schema_version: SCHEMA_VERSION,
            method: result.method.name().to_string(),
            ic_type: config.ic.name().to_string(),
            lambda_mu: best.pair.lambda_mu,
            lambda_theta: best.pair.lambda_theta,
            ic: best.ic,
            estimates: EstimatesDoc::from_params(best_estimate),
            mle: MleAnchorDoc {
                estimates: EstimatesDoc::from_params(&mle_fit.estimates),
                neg2_log_lik: mle_fit.neg2_log_lik,
                ic: mle_ic,
            },
            notes: result.notes.clone(),
        },
    )?;

    println!(
        "selected lambda = ({}, {}) with {} = {}",
        io::fmt_f64(best.pair.lambda_mu),
        io::fmt_f64(best.pair.lambda_theta),
        config.ic.name(),
        io::fmt_f64(best.ic)
    );
    Ok(())
}

/// Count of distinct location rows, for the fit report.
pub fn distinct_locations(locs: &DMatrix<f64>) -> usize {
    let mut seen: std::collections::BTreeSet<Vec<u64>> = std::collections::BTreeSet::new();
    for i in 0..locs.nrows() {
        let key: Vec<u64> = (0..locs.ncols()).map(|j| locs[(i, j)].to_bits()).collect();
        seen.insert(key);
    }
    seen.len()
}
