//! Maximum likelihood estimation: default parameter settings, the
//! box-constrained quasi-Newton driver, observed-information standard
//! errors, tests, and fit summaries.

use crate::error::{Error, Result};
use crate::likelihood::{KernelSpec, LikelihoodEngine};
use crate::model::{median_distance, CovParams, ParamVector, SvcData};
use crate::optimize::{minimize_bounded, FdScheme, OptimOptions};
use crate::predict;
use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Lower/initial/upper parameter settings in the layout of the optimized
/// vector: `(rho_1, sigma2_1, ..., rho_q, sigma2_q, tau2)` under the profile
/// likelihood, with the fixed effects `(mu_1, ..., mu_p)` prepended when the
/// full likelihood is optimized.
#[derive(Debug, Clone)]
pub struct BoundsInit {
    pub lower: Vec<f64>,
    pub init: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundsInit {
    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.init.len() || self.upper.len() != self.init.len() {
            return Err(Error::Domain(format!(
                "bounds lengths differ: {}/{}/{}",
                self.lower.len(),
                self.init.len(),
                self.upper.len()
            )));
        }
        for i in 0..self.init.len() {
            if !(self.lower[i] <= self.init[i] && self.init[i] <= self.upper[i]) {
                return Err(Error::Domain(format!(
                    "bounds must satisfy lower <= init <= upper at coordinate {i}: \
                     {} / {} / {}",
                    self.lower[i], self.init[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }
}

/// Control parameters of the estimation.
#[derive(Debug, Clone)]
pub struct MleControl {
    pub kernel: KernelSpec,
    /// Optimize the profile likelihood (mean concentrated out) instead of
    /// the full likelihood.
    pub profile: bool,
    /// Override for the default Table-style parameter settings.
    pub bounds: Option<BoundsInit>,
    pub scheme: FdScheme,
    /// Worker threads for the parallel gradient; results are bitwise
    /// independent of this knob.
    pub threads: usize,
    pub max_iter: usize,
    /// Relative function-change convergence tolerance.
    pub ftol_rel: f64,
    /// Projected-gradient convergence tolerance (scaled coordinates).
    pub pgtol: f64,
}

impl MleControl {
    pub fn new(kernel: KernelSpec) -> Self {
        let defaults = OptimOptions::default();
        Self {
            kernel,
            profile: false,
            bounds: None,
            scheme: FdScheme::Central,
            threads: 1,
            max_iter: defaults.max_iter,
            ftol_rel: defaults.ftol_rel,
            pgtol: defaults.pgtol,
        }
    }
}

/// Default parameter settings: with `delta` the median pairwise distance and
/// `s2y` the sample variance of the response, ranges start at `delta / 4`
/// inside `(1e-3 delta, 10 delta)`, process and nugget variances start at
/// `s2y / (q + 1)` below `10 s2y` (nugget bounded below by `1e-6`), and the
/// fixed effects start at their ordinary-least-squares estimate, unbounded.
/// Mean entries are present only when the full likelihood is optimized.
pub fn default_bounds_and_init(data: &SvcData, profile: bool) -> Result<BoundsInit> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Domain(format!(
            "default parameter settings need n >= 2, got {n}"
        )));
    }
    let delta = median_distance(&crate::model::pairwise_distances(data.locs()))?;
    if !(delta > 0.0) {
        return Err(Error::Domain(
            "median pairwise distance is zero; locations are all identical".into(),
        ));
    }
    let y_bar = data.y().mean();
    let s2y = data.y().iter().map(|v| (v - y_bar).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if !(s2y > 0.0) {
        return Err(Error::Domain(
            "response has zero sample variance; the model is degenerate".into(),
        ));
    }
    let q = data.q() as f64;
    let var_init = s2y / (q + 1.0);
    let var_upper = 10.0 * s2y;

    let mut lower = Vec::new();
    let mut init = Vec::new();
    let mut upper = Vec::new();
    if !profile {
        let ols = ols_estimate(data)?;
        for j in 0..data.p() {
            lower.push(f64::NEG_INFINITY);
            init.push(ols[j]);
            upper.push(f64::INFINITY);
        }
    }
    for _ in 0..data.q() {
        lower.push(1e-3 * delta);
        init.push(delta / 4.0);
        upper.push(10.0 * delta);
        lower.push(0.0);
        init.push(var_init);
        upper.push(var_upper);
    }
    lower.push(1e-6);
    init.push(var_init);
    upper.push(var_upper);
    Ok(BoundsInit { lower, init, upper })
}

fn ols_estimate(data: &SvcData) -> Result<DVector<f64>> {
    let svd = data.x().clone().svd(true, true);
    svd.solve(data.y(), 1e-12)
        .map_err(|e| Error::Numeric(format!("OLS initialization failed: {e}")))
}

/// Two-sided Z test of a fixed effect against zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZTest {
    pub z: f64,
    pub p_value: f64,
}

/// Wald test of a process variance against zero (chi-squared, 1 df).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest {
    pub w: f64,
    pub p_value: f64,
}

pub fn z_test(estimate: f64, se: f64) -> ZTest {
    let z = estimate / se;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    ZTest { z, p_value: 2.0 * (1.0 - normal.cdf(z.abs())) }
}

pub fn wald_test(estimate: f64, se: f64) -> WaldTest {
    let ratio = estimate / se;
    let w = ratio * ratio;
    let chi2 = ChiSquared::new(1.0).expect("chi squared with 1 df");
    WaldTest { w, p_value: 1.0 - chi2.cdf(w) }
}

/// Per-entry standard errors; `None` marks entries the observed information
/// could not support.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StdErrors {
    pub mu: Vec<Option<f64>>,
    pub ranges: Vec<Option<f64>>,
    pub variances: Vec<Option<f64>>,
    pub nugget: Option<f64>,
}

/// Tests attached to the entries that admit one: Z for fixed effects, Wald
/// for process variances. Ranges and the nugget carry no test.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestStats {
    pub fixed: Vec<Option<ZTest>>,
    pub variances: Vec<Option<WaldTest>>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub estimates: ParamVector,
    pub std_errors: StdErrors,
    pub tests: TestStats,
    /// Final `-2 log L` at the estimates (identical for the profile and the
    /// full parametrization).
    pub neg2_log_lik: f64,
    /// Whether the profile likelihood was optimized.
    pub profile: bool,
    /// Objective evaluations requested by the optimizer (line searches and
    /// starting point); finite-difference probes are counted separately.
    pub n_evals: usize,
    pub n_grad_evals: usize,
    pub n_fd_evals: usize,
    pub iterations: usize,
    /// 0 means success; 1 iteration limit; 52 abnormal line-search exit.
    pub convergence: i32,
    pub message: String,
    /// Conditional residuals `y - X mu_hat - sum_k w_k .* eta_hat_k`.
    pub residuals: DVector<f64>,
    pub residual_se: f64,
    pub r_squared: f64,
    /// `-2 log L + log(n) (p + 2q + 1)`, counting every free parameter.
    pub bic: f64,
}

fn make_pool(threads: usize) -> Result<Option<rayon::ThreadPool>> {
    if threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map(Some)
            .map_err(|e| Error::Numeric(format!("thread pool construction failed: {e}")))
    } else {
        Ok(None)
    }
}

/// Fit by maximum likelihood; convenience wrapper that also hands back the
/// engine for prediction and selection work.
pub fn fit_mle(data: SvcData, control: &MleControl) -> Result<(FitResult, LikelihoodEngine)> {
    let engine = LikelihoodEngine::new(data, control.kernel)?;
    let fit = fit_mle_on(&engine, control)?;
    Ok((fit, engine))
}

/// Fit by maximum likelihood on an existing engine.
pub fn fit_mle_on(engine: &LikelihoodEngine, control: &MleControl) -> Result<FitResult> {
    let data = engine.data();
    let (p, q) = (data.p(), data.q());
    let dim = if control.profile { 2 * q + 1 } else { p + 2 * q + 1 };

    let bounds = match &control.bounds {
        Some(b) => b.clone(),
        None => default_bounds_and_init(data, control.profile)?,
    };
    bounds.validate()?;
    if bounds.init.len() != dim {
        return Err(Error::Domain(format!(
            "bounds have {} entries but the {} parametrization needs {dim}",
            bounds.init.len(),
            if control.profile { "profile" } else { "full" }
        )));
    }
    let theta_offset = if control.profile { 0 } else { p };
    for k in 0..q {
        let idx = theta_offset + 2 * k;
        if !(bounds.lower[idx] > 0.0) {
            return Err(Error::Domain(format!(
                "lower bound of range {} must be > 0, got {}",
                k + 1,
                bounds.lower[idx]
            )));
        }
    }

    // optimize in coordinates divided by max(|init|, 1)
    let scale: Vec<f64> = bounds.init.iter().map(|v| v.abs().max(1.0)).collect();
    let zl: Vec<f64> = bounds.lower.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let zu: Vec<f64> = bounds.upper.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let z0: Vec<f64> = bounds.init.iter().zip(&scale).map(|(v, s)| v / s).collect();

    let unscale = |z: &[f64]| -> Vec<f64> {
        z.iter().zip(&scale).map(|(v, s)| v * s).collect()
    };

    let profile = control.profile;
    let objective = move |z: &[f64]| -> Result<f64> {
        let x = unscale(z);
        if profile {
            let cov = CovParams::from_slice(&x)?;
            engine.profile_neg2_relaxed(&cov)
        } else {
            let omega = ParamVector::from_slice(&x, p)?;
            engine.neg2_log_lik_relaxed(&omega)
        }
    };

    let opts = OptimOptions {
        max_iter: control.max_iter,
        ftol_rel: control.ftol_rel,
        pgtol: control.pgtol,
        scheme: control.scheme,
        ..OptimOptions::default()
    };
    let pool = make_pool(control.threads)?;
    let outcome = minimize_bounded(&objective, &z0, &zl, &zu, &opts, pool.as_ref())?;

    let x_hat: Vec<f64> = outcome.x.iter().zip(&scale).map(|(v, s)| v * s).collect();
    let estimates = if profile {
        let cov = CovParams::from_slice(&x_hat)?;
        let (_, mu) = engine.profile_parts(&cov)?;
        ParamVector { mu: mu.iter().copied().collect(), cov }
    } else {
        ParamVector::from_slice(&x_hat, p)?
    };

    let (std_errors, tests) = standard_errors(engine, &estimates, profile, pool.as_ref());
    let summary = summary_stats(engine, &estimates, outcome.f)?;

    Ok(FitResult {
        estimates,
        std_errors,
        tests,
        neg2_log_lik: outcome.f,
        profile,
        n_evals: outcome.n_f_evals,
        n_grad_evals: outcome.n_grad_evals,
        n_fd_evals: outcome.n_fd_evals,
        iterations: outcome.iterations,
        convergence: outcome.code,
        message: outcome.message,
        residuals: summary.residuals,
        residual_se: summary.residual_se,
        r_squared: summary.r_squared,
        bic: summary.bic,
    })
}

/// Central-difference Hessian with per-coordinate step
/// `max(1e-4, 1e-4 |x_i|)`; entries whose stencil evaluations fail are NaN.
fn fd_hessian(
    f: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    x: &[f64],
    pool: Option<&rayon::ThreadPool>,
) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| (1e-4 * v.abs()).max(1e-4)).collect();
    let eval_all = |points: &[Vec<f64>]| -> Vec<f64> {
        let run = |p: &Vec<f64>| f(p).unwrap_or(f64::NAN);
        match pool {
            Some(pool) if points.len() > 1 => pool.install(|| {
                use rayon::prelude::*;
                points.par_iter().map(run).collect()
            }),
            _ => points.iter().map(run).collect(),
        }
    };

    let mut points = vec![x.to_vec()];
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut p = x.to_vec();
            p[i] += s * h[i];
            points.push(p);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut p = x.to_vec();
                p[i] += si * h[i];
                p[j] += sj * h[j];
                points.push(p);
            }
        }
    }
    let vals = eval_all(&points);

    let f0 = vals[0];
    let axis = |i: usize, plus: bool| vals[1 + 2 * i + usize::from(!plus)];
    let mut quad_base = 1 + 2 * n;
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        hess[(i, i)] = (axis(i, true) - 2.0 * f0 + axis(i, false)) / (h[i] * h[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (pp, pm, mp, mm) = (
                vals[quad_base],
                vals[quad_base + 1],
                vals[quad_base + 2],
                vals[quad_base + 3],
            );
            quad_base += 4;
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Standard errors from the inverse of the finite-difference Hessian rows
/// that are numerically usable; coordinates whose stencil failed, or whose
/// inverse-Hessian diagonal is not positive, report no standard error.
fn ses_from_hessian(hess: &DMatrix<f64>) -> Vec<Option<f64>> {
    let n = hess.nrows();
    let good: Vec<usize> = (0..n)
        .filter(|&i| (0..n).all(|j| hess[(i, j)].is_finite()))
        .collect();
    let mut out = vec![None; n];
    if good.is_empty() {
        return out;
    }
    let block = DMatrix::from_fn(good.len(), good.len(), |a, b| hess[(good[a], good[b])]);
    let Some(inv) = block.try_inverse() else {
        return out;
    };
    for (a, &i) in good.iter().enumerate() {
        let v = inv[(a, a)];
        if v > 0.0 && v.is_finite() {
            out[i] = Some(v.sqrt());
        }
    }
    out
}

/// Observed-information standard errors and the Z / Wald test statistics.
///
/// Under the profile likelihood the covariance block comes from the profile
/// Hessian and the fixed effects from the GLS covariance at the estimated
/// covariance parameters; under the full likelihood everything comes from
/// one joint Hessian of `-log L`.
pub fn standard_errors(
    engine: &LikelihoodEngine,
    estimates: &ParamVector,
    profile: bool,
    pool: Option<&rayon::ThreadPool>,
) -> (StdErrors, TestStats) {
    let p = estimates.p();
    let q = estimates.q();

    let (mu_se, theta_se) = if profile {
        let theta_hat = estimates.cov.to_vec();
        let obj = |x: &[f64]| -> Result<f64> {
            let cov = CovParams::from_slice(x)?;
            engine.profile_neg2_relaxed(&cov).map(|v| 0.5 * v)
        };
        let hess = fd_hessian(&obj, &theta_hat, pool);
        let theta_se = ses_from_hessian(&hess);

        let mu_se = gls_covariance(engine, &estimates.cov)
            .map(|cov_mu| {
                (0..p)
                    .map(|j| {
                        let v = cov_mu[(j, j)];
                        (v > 0.0).then(|| v.sqrt())
                    })
                    .collect()
            })
            .unwrap_or_else(|_| vec![None; p]);
        (mu_se, theta_se)
    } else {
        let omega_hat = estimates.to_vec();
        let obj = |x: &[f64]| -> Result<f64> {
            let omega = ParamVector::from_slice(x, p)?;
            engine.neg2_log_lik_relaxed(&omega).map(|v| 0.5 * v)
        };
        let hess = fd_hessian(&obj, &omega_hat, pool);
        let all = ses_from_hessian(&hess);
        (all[..p].to_vec(), all[p..].to_vec())
    };

    let std_errors = StdErrors {
        mu: mu_se.clone(),
        ranges: (0..q).map(|k| theta_se[2 * k]).collect(),
        variances: (0..q).map(|k| theta_se[2 * k + 1]).collect(),
        nugget: theta_se[2 * q],
    };
    let tests = TestStats {
        fixed: (0..p)
            .map(|j| mu_se[j].map(|se| z_test(estimates.mu[j], se)))
            .collect(),
        variances: (0..q)
            .map(|k| {
                std_errors.variances[k].map(|se| wald_test(estimates.cov.gps[k].variance, se))
            })
            .collect(),
    };
    (std_errors, tests)
}

/// GLS covariance of the fixed effects, `(X' Sigma^-1 X)^-1`.
fn gls_covariance(engine: &LikelihoodEngine, cov: &CovParams) -> Result<DMatrix<f64>> {
    let factor = engine.factorize(cov)?;
    let xw = factor.whiten_mat(engine.data().x());
    let xtx = xw.transpose() * &xw;
    let n = xtx.nrows();
    Cholesky::new(xtx)
        .map(|c| c.solve(&DMatrix::identity(n, n)))
        .ok_or_else(|| Error::Numeric("X' Sigma^-1 X is singular".into()))
}

pub struct SummaryStats {
    pub residuals: DVector<f64>,
    pub residual_se: f64,
    pub r_squared: f64,
    pub bic: f64,
}

/// Conditional residuals, their standard deviation, the coefficient of
/// determination, and the all-parameters BIC.
pub fn summary_stats(
    engine: &LikelihoodEngine,
    estimates: &ParamVector,
    neg2_log_lik: f64,
) -> Result<SummaryStats> {
    let data = engine.data();
    let n = data.n();
    let eta = predict::fitted_random_effects(engine, estimates)?;
    let mu = DVector::from_column_slice(&estimates.mu);
    let mut fitted = data.x() * mu;
    for i in 0..n {
        for k in 0..data.q() {
            fitted[i] += data.w()[(i, k)] * eta[(i, k)];
        }
    }
    let residuals = data.y() - fitted;
    let e_bar = residuals.mean();
    let residual_se = if n > 1 {
        (residuals.iter().map(|e| (e - e_bar).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    let y_bar = data.y().mean();
    let ss_tot = data.y().iter().map(|y| (y - y_bar).powi(2)).sum::<f64>();
    let ss_res = residuals.iter().map(|e| e * e).sum::<f64>();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let k_params = (data.p() + 2 * data.q() + 1) as f64;
    let bic = neg2_log_lik + (n as f64).ln() * k_params;
    Ok(SummaryStats { residuals, residual_se, r_squared, bic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use crate::model::GpParams;
    use crate::sample::{sample_full_svc, sample_uniform_locs};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn default_range_settings_from_median_distance() {
        // locations (0, 1, 3): pairwise distances {1, 2, 3}, median 2
        let data = SvcData::new(
            DVector::from_vec(vec![0.0, 1.0, 5.0]),
            DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]),
            None,
            DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]),
        )
        .unwrap();
        let b = default_bounds_and_init(&data, true).unwrap();
        // theta layout: (rho, sigma2, tau2)
        assert_relative_eq!(b.lower[0], 0.002, max_relative = 1e-12);
        assert_relative_eq!(b.init[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(b.upper[0], 20.0, max_relative = 1e-12);
    }

    #[test]
    fn default_variance_settings_from_response_variance() {
        // y = (0, 2): sample variance 2; q = 1 so the initial value is 1
        let data = SvcData::new(
            DVector::from_vec(vec![0.0, 2.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            None,
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let b = default_bounds_and_init(&data, true).unwrap();
        assert_eq!(b.lower[1], 0.0);
        assert_relative_eq!(b.init[1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(b.upper[1], 20.0, max_relative = 1e-12);
        // nugget lower bound is always 1e-6
        assert_eq!(b.lower[2], 1e-6);
    }

    #[test]
    fn full_mode_prepends_ols_means() {
        let locs = sample_uniform_locs(30, 1, 0.0, 10.0, 1).unwrap();
        let truth = sample_full_svc(&[1.0, 2.0], &[0.0, 0.0], &[1.0, 1.0], 0.3, &locs, KernelKind::Exp, 1)
            .unwrap();
        let b = default_bounds_and_init(&truth.data, false).unwrap();
        assert_eq!(b.init.len(), 2 + 2 * 2 + 1);
        assert_eq!(b.lower[0], f64::NEG_INFINITY);
        assert_eq!(b.upper[1], f64::INFINITY);
        // OLS on near-linear data lands near the truth
        assert!((b.init[0] - 1.0).abs() < 0.5);
        assert!((b.init[1] - 2.0).abs() < 0.5);
    }

    #[test]
    fn degenerate_response_is_rejected() {
        let data = SvcData::new(
            DVector::from_vec(vec![1.0, 1.0, 1.0]),
            DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]),
            None,
            DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]),
        )
        .unwrap();
        let err = default_bounds_and_init(&data, true).unwrap_err();
        assert!(err.to_string().contains("zero sample variance"));
    }

    #[test]
    fn paper_summary_test_statistics() {
        let z = z_test(1.1799, 0.3820);
        assert!((z.z - 3.089).abs() < 1e-3);
        assert!((z.p_value - 0.00201).abs() < 5e-5);

        let w = wald_test(1.22053, 0.47731);
        assert!((w.w - 6.539).abs() < 5e-3);
        assert!((w.p_value - 0.0106).abs() < 5e-4);

        // Wald statistic is exactly the squared ratio
        assert_relative_eq!(w.w, (1.22053f64 / 0.47731).powi(2), max_relative = 1e-15);
    }

    #[test]
    fn fit_recovers_iid_model() {
        // all process variances zero, small noise: means recovered within
        // 3 SE and variances close to zero
        let locs = sample_uniform_locs(60, 1, 0.0, 10.0, 11).unwrap();
        let truth =
            sample_full_svc(&[1.0, -0.5], &[0.0, 0.0], &[1.0, 1.0], 0.1, &locs, KernelKind::Mat32, 11)
                .unwrap();
        let y_bar = truth.data.y().mean();
        let s2y = truth
            .data
            .y()
            .iter()
            .map(|v| (v - y_bar).powi(2))
            .sum::<f64>()
            / 59.0;

        let control = MleControl {
            profile: true,
            ..MleControl::new(KernelSpec::new(KernelKind::Mat32))
        };
        let (fit, _) = fit_mle(truth.data.clone(), &control).unwrap();
        for j in 0..2 {
            let se = fit.std_errors.mu[j].expect("GLS standard error");
            assert!(
                (fit.estimates.mu[j] - [1.0, -0.5][j]).abs() <= 3.0 * se,
                "mean {j}: {} vs {} (se {se})",
                fit.estimates.mu[j],
                [1.0, -0.5][j]
            );
        }
        for gp in &fit.estimates.cov.gps {
            assert!(gp.variance <= 0.05 * s2y, "variance {}", gp.variance);
        }
    }

    #[test]
    fn estimates_respect_bounds_and_minimality() {
        let locs = sample_uniform_locs(50, 1, 0.0, 10.0, 7).unwrap();
        let truth =
            sample_full_svc(&[1.0], &[1.0], &[0.8], 0.4, &locs, KernelKind::Exp, 7).unwrap();
        let control = MleControl {
            profile: true,
            ..MleControl::new(KernelSpec::new(KernelKind::Exp))
        };
        let (fit, engine) = fit_mle(truth.data, &control).unwrap();
        let b = default_bounds_and_init(engine.data(), true).unwrap();
        let theta = fit.estimates.cov.to_vec();
        for i in 0..theta.len() {
            assert!(theta[i] >= b.lower[i] - 1e-12 && theta[i] <= b.upper[i] + 1e-12);
        }

        // the reported optimum beats a 1-D grid around it in the range axis
        let base = fit.neg2_log_lik;
        for mult in [0.5, 0.8, 1.25, 2.0] {
            let mut cov = fit.estimates.cov.clone();
            cov.gps[0].range = (cov.gps[0].range * mult).clamp(b.lower[0], b.upper[0]);
            let v = engine.profile_neg2_log_lik(&cov).unwrap();
            assert!(base <= v + 1e-6, "grid point beat the optimum: {v} < {base}");
        }
    }

    #[test]
    fn r_squared_and_residual_se_recomputed_from_scratch() {
        let locs = sample_uniform_locs(10, 1, 0.0, 5.0, 3).unwrap();
        let truth =
            sample_full_svc(&[1.0], &[0.5], &[1.0], 0.3, &locs, KernelKind::Mat32, 3).unwrap();
        let engine = LikelihoodEngine::new(truth.data.clone(), KernelSpec::new(KernelKind::Mat32))
            .unwrap();
        let omega = truth.params.clone();
        let neg2 = engine.neg2_log_lik(&omega).unwrap();
        let s = summary_stats(&engine, &omega, neg2).unwrap();

        // recompute directly
        let eta = crate::predict::fitted_random_effects(&engine, &omega).unwrap();
        let data = engine.data();
        let mut ss_res = 0.0;
        for i in 0..10 {
            let fitted = data.x()[(i, 0)] * omega.mu[0] + data.w()[(i, 0)] * eta[(i, 0)];
            ss_res += (data.y()[i] - fitted).powi(2);
        }
        let y_bar = data.y().mean();
        let ss_tot = data.y().iter().map(|y| (y - y_bar).powi(2)).sum::<f64>();
        assert_relative_eq!(s.r_squared, 1.0 - ss_res / ss_tot, epsilon = 1e-12);
        assert_relative_eq!(
            s.bic,
            neg2 + 10f64.ln() * 4.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn perfect_fit_means_unit_r_squared() {
        // sigma2 large, tau tiny: the smoother interpolates and residuals
        // are near zero; R^2 ~ 1. The exact R^2 = 1 case: residuals zero.
        let locs = sample_uniform_locs(12, 1, 0.0, 5.0, 9).unwrap();
        let truth = sample_full_svc(&[0.5], &[0.0], &[1.0], 0.0, &locs, KernelKind::Exp, 9).unwrap();
        // y = 0.5 * x exactly; with sigma2 = 0 the fitted values are X mu
        let engine =
            LikelihoodEngine::new(truth.data.clone(), KernelSpec::new(KernelKind::Exp)).unwrap();
        let omega = ParamVector {
            mu: vec![0.5],
            cov: CovParams {
                gps: vec![GpParams { range: 1.0, variance: 0.0 }],
                nugget: 1e-6,
            },
        };
        let neg2 = engine.neg2_log_lik(&omega).unwrap();
        let s = summary_stats(&engine, &omega, neg2).unwrap();
        assert!(s.residuals.iter().all(|e| e.abs() < 1e-12));
        assert_relative_eq!(s.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn intercept_only_iid_model_has_zero_r_squared() {
        let data = SvcData::new(
            DVector::from_vec(vec![1.0, 3.0, 2.0, 4.0]),
            DMatrix::from_row_slice(4, 1, &[1.0; 4]),
            None,
            DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]),
        )
        .unwrap();
        let engine = LikelihoodEngine::new(data, KernelSpec::new(KernelKind::Exp)).unwrap();
        let omega = ParamVector {
            mu: vec![2.5], // the sample mean
            cov: CovParams {
                gps: vec![GpParams { range: 1.0, variance: 0.0 }],
                nugget: 1.0,
            },
        };
        let neg2 = engine.neg2_log_lik(&omega).unwrap();
        let s = summary_stats(&engine, &omega, neg2).unwrap();
        assert_relative_eq!(s.r_squared, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn absent_se_means_absent_test() {
        let se = StdErrors {
            mu: vec![None],
            ranges: vec![None],
            variances: vec![None],
            nugget: None,
        };
        let tests = TestStats {
            fixed: vec![se.mu[0].map(|s| z_test(1.0, s))],
            variances: vec![se.variances[0].map(|s| wald_test(1.0, s))],
        };
        assert!(tests.fixed[0].is_none());
        assert!(tests.variances[0].is_none());
    }
}
