//! Joint fixed/random-effect selection by adaptive-lasso penalized maximum
//! likelihood.
//!
//! The minimized objective is `-2 log L + 2 n sum_j lambda_j |mu_j|
//! + 2 sum_k lambda_{p+k} sigma2_k`, with per-coefficient weights anchored at
//! the unpenalized MLE. A coordinate descent alternates an exact soft-
//! thresholding step on the whitened fixed effects with a box-constrained
//! quasi-Newton step on the covariance parameters. Shrinkage pairs are
//! scored by an information criterion and searched either on a log-spaced
//! grid or by surrogate-model optimization with the expected-improvement
//! infill criterion.

use crate::error::{Error, Result};
use crate::kernel::KernelKind;
use crate::likelihood::{KernelSpec, LikelihoodEngine};
use crate::mle::{fit_mle, BoundsInit, MleControl};
use crate::model::{CovParams, ParamVector, SvcData};
use crate::optimize::{minimize_bounded, OptimOptions};
use crate::predict::predict_svc;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use std::time::Instant;

/// Entries below this magnitude count as zero in the `||.||_0` penalties;
/// the coordinate descent produces exact zeros for the fixed effects but
/// box-clamped near-zeros can survive on the variance side.
pub const ZERO_TOL: f64 = 1e-8;

/// A candidate shrinkage configuration `(lambda_mu, lambda_theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkagePair {
    pub lambda_mu: f64,
    pub lambda_theta: f64,
}

/// Rectangular search region for the shrinkage parameters.
#[derive(Debug, Clone, Copy)]
pub struct LambdaBox {
    pub lambda_mu: (f64, f64),
    pub lambda_theta: (f64, f64),
}

impl LambdaBox {
    pub fn square(lo: f64, hi: f64) -> Result<Self> {
        let b = Self { lambda_mu: (lo, hi), lambda_theta: (lo, hi) };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("lambda_mu", self.lambda_mu),
            ("lambda_theta", self.lambda_theta),
        ] {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::Domain(format!(
                    "{name} search interval must satisfy 0 < lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    fn log_lo(&self) -> [f64; 2] {
        [self.lambda_mu.0.log10(), self.lambda_theta.0.log10()]
    }

    fn log_hi(&self) -> [f64; 2] {
        [self.lambda_mu.1.log10(), self.lambda_theta.1.log10()]
    }

    pub fn contains(&self, pair: &ShrinkagePair) -> bool {
        pair.lambda_mu >= self.lambda_mu.0
            && pair.lambda_mu <= self.lambda_mu.1
            && pair.lambda_theta >= self.lambda_theta.0
            && pair.lambda_theta <= self.lambda_theta.1
    }
}

/// Per-coefficient penalty weights; an infinite weight pins its parameter
/// to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveWeights {
    pub mu: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Weights anchored at the MLE: `lambda_j = lambda_mu / |mu_hat_j|` and
/// `lambda_{p+k} = lambda_theta / sigma2_hat_k`; division by zero yields an
/// infinite weight.
pub fn adaptive_weights(mle_estimate: &ParamVector, pair: &ShrinkagePair) -> AdaptiveWeights {
    let ratio = |lambda: f64, anchor: f64| -> f64 {
        let a = anchor.abs();
        if a == 0.0 {
            f64::INFINITY
        } else {
            lambda / a
        }
    };
    AdaptiveWeights {
        mu: mle_estimate
            .mu
            .iter()
            .map(|m| ratio(pair.lambda_mu, *m))
            .collect(),
        variances: mle_estimate
            .cov
            .gps
            .iter()
            .map(|gp| ratio(pair.lambda_theta, gp.variance))
            .collect(),
    }
}

fn penalty_term(weight: f64, value: f64) -> f64 {
    if weight.is_infinite() {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        weight * value.abs()
    }
}

/// The penalized objective `-2 log L + 2 n sum_j lambda_j |mu_j|
/// + 2 sum_k lambda_{p+k} |sigma2_k|`.
pub fn penalized_neg2_log_lik(
    engine: &LikelihoodEngine,
    omega: &ParamVector,
    weights: &AdaptiveWeights,
) -> Result<f64> {
    let n = engine.n() as f64;
    let base = engine.neg2_log_lik(omega)?;
    let mut pen = 0.0;
    for (w, m) in weights.mu.iter().zip(&omega.mu) {
        pen += 2.0 * n * penalty_term(*w, *m);
    }
    for (w, gp) in weights.variances.iter().zip(&omega.cov.gps) {
        pen += 2.0 * penalty_term(*w, gp.variance);
    }
    Ok(base + pen)
}

const LASSO_SWEEP_TOL: f64 = 1e-10;
const LASSO_MAX_SWEEPS: usize = 10_000;

/// Exact minimizer of the fixed-effect block: whiten through the Cholesky
/// factor of `Sigma_Y(theta)`, then cyclic coordinate-wise soft
/// thresholding of `||y~ - X~ mu||^2 + 2 n sum_j lambda_j |mu_j|`.
pub fn mu_lasso_step(
    engine: &LikelihoodEngine,
    cov: &CovParams,
    weights_mu: &[f64],
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let data = engine.data();
    let p = data.p();
    if weights_mu.len() != p {
        return Err(Error::Domain(format!(
            "{} fixed-effect weights provided but the data has {p}",
            weights_mu.len()
        )));
    }
    let factor = engine.factorize(cov)?;
    let xw = factor.whiten_mat(data.x());
    let yw = factor.whiten_vec(data.y());
    let n = data.n() as f64;

    let col_norm2: Vec<f64> = (0..p).map(|j| xw.column(j).norm_squared()).collect();
    let mut mu: Vec<f64> = match warm {
        Some(w) if w.len() == p => w.to_vec(),
        _ => vec![0.0; p],
    };
    for j in 0..p {
        if weights_mu[j].is_infinite() || col_norm2[j] == 0.0 {
            mu[j] = 0.0;
        }
    }
    let mut resid = yw.clone();
    for j in 0..p {
        if mu[j] != 0.0 {
            resid -= xw.column(j) * mu[j];
        }
    }

    for sweep in 0..LASSO_MAX_SWEEPS {
        let mut max_change = 0.0_f64;
        for j in 0..p {
            if weights_mu[j].is_infinite() || col_norm2[j] == 0.0 {
                continue;
            }
            let old = mu[j];
            let z = xw.column(j).dot(&resid) + col_norm2[j] * old;
            let threshold = n * weights_mu[j];
            let new = soft_threshold(z, threshold) / col_norm2[j];
            if new != old {
                resid -= xw.column(j) * (new - old);
                mu[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if max_change < LASSO_SWEEP_TOL {
            return Ok(mu);
        }
        let _ = sweep;
    }
    Err(Error::CdNonConvergence { sweeps: LASSO_MAX_SWEEPS, last: mu })
}

#[inline]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if gamma.is_infinite() {
        return 0.0;
    }
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Box-constrained quasi-Newton step on the covariance block for fixed
/// fixed effects, warm-started at `warm`; processes with infinite weight are
/// clamped to zero variance and excluded from the optimization (their
/// ranges stay frozen).
pub fn theta_penalized_step(
    engine: &LikelihoodEngine,
    mu: &[f64],
    weights_var: &[f64],
    bounds: &BoundsInit,
    warm: &CovParams,
    pool: Option<&rayon::ThreadPool>,
) -> Result<CovParams> {
    let q = engine.data().q();
    let dim = 2 * q + 1;
    if weights_var.len() != q {
        return Err(Error::Domain(format!(
            "{} variance weights provided but the data has {q} processes",
            weights_var.len()
        )));
    }
    if bounds.lower.len() != dim {
        return Err(Error::Domain(format!(
            "covariance bounds need {dim} entries, got {}",
            bounds.lower.len()
        )));
    }

    let pinned: Vec<bool> = weights_var.iter().map(|w| w.is_infinite()).collect();
    // theta-layout indices that stay free
    let mut active: Vec<usize> = Vec::new();
    for k in 0..q {
        if !pinned[k] {
            active.push(2 * k);
            active.push(2 * k + 1);
        }
    }
    active.push(2 * q);

    let mut template = warm.clone();
    for k in 0..q {
        if pinned[k] {
            template.gps[k].variance = 0.0;
        }
    }

    let warm_vec = template.to_vec();
    let x0: Vec<f64> = active.iter().map(|&i| warm_vec[i]).collect();
    let lo: Vec<f64> = active.iter().map(|&i| bounds.lower[i]).collect();
    let hi: Vec<f64> = active.iter().map(|&i| bounds.upper[i]).collect();
    let scale: Vec<f64> = x0.iter().map(|v| v.abs().max(1.0)).collect();
    let z0: Vec<f64> = x0.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let zl: Vec<f64> = lo.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let zu: Vec<f64> = hi.iter().zip(&scale).map(|(v, s)| v / s).collect();

    let assemble = |z: &[f64]| -> Result<CovParams> {
        let mut theta = warm_vec.clone();
        for (a, &i) in active.iter().enumerate() {
            theta[i] = z[a] * scale[a];
        }
        for k in 0..q {
            if pinned[k] {
                theta[2 * k + 1] = 0.0;
            }
        }
        CovParams::from_slice(&theta)
    };
    let mu_owned = mu.to_vec();
    let objective = |z: &[f64]| -> Result<f64> {
        let cov = assemble(z)?;
        let base = engine.neg2_log_lik(&ParamVector { mu: mu_owned.clone(), cov: cov.clone() })?;
        let mut pen = 0.0;
        for k in 0..q {
            if !pinned[k] {
                pen += 2.0 * weights_var[k] * cov.gps[k].variance;
            }
        }
        Ok(base + pen)
    };

    let outcome = minimize_bounded(&objective, &z0, &zl, &zu, &OptimOptions::default(), pool)?;
    assemble(&outcome.x)
}

/// Stopping rule of the coordinate descent.
#[derive(Debug, Clone, Copy)]
pub struct CdControl {
    pub max_cycles: usize,
    pub tol: f64,
    /// Converge on the change of the penalized objective rather than the
    /// parameter values.
    pub on_loglik: bool,
}

impl Default for CdControl {
    fn default() -> Self {
        Self { max_cycles: 20, tol: 1e-8, on_loglik: false }
    }
}

#[derive(Debug, Clone)]
pub struct CdOutcome {
    pub estimate: ParamVector,
    pub converged: bool,
    pub cycles: usize,
    /// Penalized objective after each cycle; nonincreasing by construction.
    pub objective_trace: Vec<f64>,
}

/// Penalized maximum likelihood at one shrinkage pair: cyclic descent
/// between the exact fixed-effect lasso step and the covariance step,
/// started from the MLE covariance estimate.
pub fn cd_pmle(
    engine: &LikelihoodEngine,
    mle_estimate: &ParamVector,
    theta_bounds: &BoundsInit,
    pair: &ShrinkagePair,
    control: &CdControl,
    pool: Option<&rayon::ThreadPool>,
) -> Result<CdOutcome> {
    let weights = adaptive_weights(mle_estimate, pair);
    let mut mu = mle_estimate.mu.clone();
    let mut cov = mle_estimate.cov.clone();
    let mut prev_x = {
        let mut v = mu.clone();
        v.extend_from_slice(&cov.to_vec());
        v
    };
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut cycles = 0;

    for _cycle in 0..control.max_cycles {
        cycles += 1;
        mu = mu_lasso_step(engine, &cov, &weights.mu, Some(&mu))?;
        cov = theta_penalized_step(engine, &mu, &weights.variances, theta_bounds, &cov, pool)?;

        let omega = ParamVector { mu: mu.clone(), cov: cov.clone() };
        let objective = penalized_neg2_log_lik(engine, &omega, &weights)?;
        if let Some(&prev) = trace.last() {
            // the descent property is a correctness invariant, not a
            // tolerance matter
            assert!(
                objective <= prev + 1e-6 * prev.abs().max(1.0),
                "penalized objective increased across coordinate-descent \
                 cycles: {prev} -> {objective}"
            );
            if control.on_loglik && (prev - objective).abs() < control.tol {
                converged = true;
                trace.push(objective);
                break;
            }
        }
        trace.push(objective);

        let mut x = mu.clone();
        x.extend_from_slice(&cov.to_vec());
        let change = x
            .iter()
            .zip(&prev_x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        prev_x = x;
        if !control.on_loglik && change < control.tol {
            converged = true;
            break;
        }
    }

    Ok(CdOutcome {
        estimate: ParamVector { mu, cov },
        converged,
        cycles,
        objective_trace: trace,
    })
}

/// Effective degrees of freedom: the trace of the hat matrix of the mixed
/// model, `tau2 tr[(X'S^-1X)^-1 X'S^-1 S^-1 X] + n - tau2 tr[S^-1]` with
/// `S = Sigma_Y(theta)`.
pub fn effective_df(engine: &LikelihoodEngine, cov: &CovParams) -> Result<f64> {
    let factor = engine.factorize(cov)?;
    let data = engine.data();
    let (n, p) = (data.n(), data.p());
    let mut z = DMatrix::zeros(n, p);
    for j in 0..p {
        let col = DVector::from_column_slice(data.x().column(j).as_slice());
        z.set_column(j, &factor.solve_vec(&col));
    }
    let a = data.x().transpose() * &z;
    let b = z.transpose() * &z;
    let chol = Cholesky::new(a)
        .ok_or_else(|| Error::Numeric("X' Sigma^-1 X is singular in the hat-matrix trace".into()))?;
    let c = chol.solve(&b);
    let tau2 = cov.nugget;
    Ok(tau2 * c.trace() + n as f64 - tau2 * factor.inv_trace())
}

/// Supported information criteria for scoring penalized fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcType {
    /// Conditional Akaike criterion with the effective-degrees-of-freedom
    /// penalty.
    CaicVb,
    /// Bayesian criterion counting the nonzero fixed effects and process
    /// variances.
    Bic,
}

impl IcType {
    pub fn name(self) -> &'static str {
        match self {
            IcType::CaicVb => "cAIC_VB",
            IcType::Bic => "BIC",
        }
    }
}

/// Deviance plus the criterion-specific complexity penalty.
pub fn information_criterion(
    engine: &LikelihoodEngine,
    omega: &ParamVector,
    ic: IcType,
) -> Result<f64> {
    let n = engine.n();
    let p = engine.data().p();
    let deviance = engine.neg2_log_lik(omega)?;
    match ic {
        IcType::Bic => {
            let nonzero_mu = omega.mu.iter().filter(|m| m.abs() > ZERO_TOL).count();
            let nonzero_var = omega
                .cov
                .gps
                .iter()
                .filter(|gp| gp.variance.abs() > ZERO_TOL)
                .count();
            Ok(deviance + (n as f64).ln() * (nonzero_mu + nonzero_var) as f64)
        }
        IcType::CaicVb => {
            if n <= p + 2 {
                return Err(Error::Domain(format!(
                    "cAIC needs n > p + 2, got n = {n}, p = {p}"
                )));
            }
            let df = effective_df(engine, &omega.cov)?;
            let nf = n as f64;
            let pf = p as f64;
            let alpha = (2.0 * nf / (nf - pf - 2.0)) * (df + 1.0 - (df - pf) / (nf - pf));
            Ok(deviance + alpha)
        }
    }
}

/// Closed-form expected improvement of a Gaussian posterior against the
/// incumbent minimum; exactly zero when the posterior is degenerate.
pub fn expected_improvement(xi_min: f64, mu_hat: f64, s_hat: f64) -> f64 {
    if !(s_hat > 0.0) {
        return 0.0;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = (xi_min - mu_hat) / s_hat;
    let ei = (xi_min - mu_hat) * normal.cdf(z) + s_hat * normal.pdf(z);
    ei.max(0.0)
}

/// Latin hypercube design over the box, stratified on the log10 scale.
pub fn lhs_design(n_init: usize, bounds: &LambdaBox, seed: u64) -> Result<Vec<ShrinkagePair>> {
    if n_init < 2 {
        return Err(Error::Domain(format!("LHS needs n_init >= 2, got {n_init}")));
    }
    bounds.validate()?;
    let lo = bounds.log_lo();
    let hi = bounds.log_hi();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut coords: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for d in 0..2 {
        let mut strata: Vec<usize> = (0..n_init).collect();
        strata.shuffle(&mut rng);
        coords[d] = strata
            .into_iter()
            .map(|s| {
                let u: f64 = rng.random_range(0.0..1.0);
                lo[d] + (s as f64 + u) / n_init as f64 * (hi[d] - lo[d])
            })
            .collect();
    }
    Ok((0..n_init)
        .map(|i| ShrinkagePair {
            lambda_mu: 10f64.powf(coords[0][i]),
            lambda_theta: 10f64.powf(coords[1][i]),
        })
        .collect())
}

/// One scored shrinkage configuration.
#[derive(Debug, Clone)]
pub struct SelectionEval {
    pub pair: ShrinkagePair,
    /// Penalized estimate; absent when the coordinate descent failed.
    pub estimate: Option<ParamVector>,
    /// Information criterion; NaN when the evaluation failed.
    pub ic: f64,
    pub converged: bool,
    /// Wall-clock spent on this evaluation (diagnostic only; never
    /// serialized).
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    Grid,
    Mbo,
}

impl SelectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Grid => "grid",
            SelectionMethod::Mbo => "mbo",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    pub evaluations: Vec<SelectionEval>,
    /// Index of the chosen evaluation; its IC is the minimum over all
    /// successful evaluations.
    pub best: usize,
    /// Diagnostics such as surrogate-fit fallbacks.
    pub notes: Vec<String>,
}

impl SelectionResult {
    pub fn best_eval(&self) -> &SelectionEval {
        &self.evaluations[self.best]
    }
}

/// Scores one shrinkage pair; failures are reported as `(None, NaN, false)`.
pub type IcObjective<'a> =
    dyn Fn(&ShrinkagePair) -> (Option<ParamVector>, f64, bool) + Sync + 'a;

fn argmin_ic(evals: &[SelectionEval]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in evals.iter().enumerate() {
        if e.ic.is_nan() {
            continue;
        }
        if best.map_or(true, |b| e.ic < evals[b].ic) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| Error::Numeric("every shrinkage evaluation failed".into()))
}

fn timed_eval(ic_fn: &IcObjective<'_>, pair: &ShrinkagePair) -> SelectionEval {
    let t0 = Instant::now();
    let (estimate, ic, converged) = ic_fn(pair);
    SelectionEval {
        pair: *pair,
        estimate,
        ic,
        converged,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

/// Log10-spaced lattice, row-major with `lambda_mu` as the outer axis.
fn grid_points(bounds: &LambdaBox, n_per_dim: usize) -> Vec<ShrinkagePair> {
    let lo = bounds.log_lo();
    let hi = bounds.log_hi();
    let axis = |d: usize| -> Vec<f64> {
        (0..n_per_dim)
            .map(|i| {
                let t = if n_per_dim == 1 {
                    0.0
                } else {
                    i as f64 / (n_per_dim - 1) as f64
                };
                10f64.powf(lo[d] + t * (hi[d] - lo[d]))
            })
            .collect()
    };
    let (mus, thetas) = (axis(0), axis(1));
    let mut points = Vec::with_capacity(n_per_dim * n_per_dim);
    for m in &mus {
        for t in &thetas {
            points.push(ShrinkagePair { lambda_mu: *m, lambda_theta: *t });
        }
    }
    points
}

/// Grid search over a generic IC objective; cells are embarrassingly
/// parallel and collected in lattice order, so the outcome is independent
/// of the thread count.
pub fn select_grid_with(
    ic_fn: &IcObjective<'_>,
    bounds: &LambdaBox,
    n_per_dim: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<SelectionResult> {
    if n_per_dim < 2 {
        return Err(Error::Domain(format!(
            "grid needs at least 2 points per dimension, got {n_per_dim}"
        )));
    }
    bounds.validate()?;
    let points = grid_points(bounds, n_per_dim);
    let evaluations: Vec<SelectionEval> = match pool {
        Some(pool) => pool.install(|| {
            use rayon::prelude::*;
            points.par_iter().map(|p| timed_eval(ic_fn, p)).collect()
        }),
        None => points.iter().map(|p| timed_eval(ic_fn, p)).collect(),
    };
    let best = argmin_ic(&evaluations)?;
    Ok(SelectionResult {
        method: SelectionMethod::Grid,
        evaluations,
        best,
        notes: Vec::new(),
    })
}

/// Gaussian surrogate of the IC surface over the log10 shrinkage plane:
/// constant mean, one unit-weight process with the Matern 3/2 kernel,
/// fitted by this crate's own profile maximum likelihood.
#[derive(Debug)]
pub struct SurrogateState {
    /// Design points on the log10 scale, pairwise distinct.
    pub design: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub xi_min: f64,
    engine: LikelihoodEngine,
    estimates: ParamVector,
}

impl SurrogateState {
    pub fn fit(design: &[[f64; 2]], values: &[f64]) -> Result<Self> {
        if design.len() != values.len() || design.len() < 2 {
            return Err(Error::Domain(format!(
                "surrogate needs >= 2 design points with matching values, got {}/{}",
                design.len(),
                values.len()
            )));
        }
        for i in 0..design.len() {
            for j in (i + 1)..design.len() {
                let d = (design[i][0] - design[j][0])
                    .abs()
                    .max((design[i][1] - design[j][1]).abs());
                if d == 0.0 {
                    return Err(Error::Domain(format!(
                        "surrogate design points {i} and {j} coincide"
                    )));
                }
            }
        }
        let n = design.len();
        let y = DVector::from_fn(n, |i, _| values[i]);
        let x = DMatrix::from_element(n, 1, 1.0);
        let locs = DMatrix::from_fn(n, 2, |i, d| design[i][d]);
        let data = SvcData::new(y, x, None, locs)?;
        let control = MleControl {
            profile: true,
            ..MleControl::new(KernelSpec::new(KernelKind::Mat32))
        };
        let (fit, engine) = fit_mle(data, &control)?;
        let xi_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            design: design.to_vec(),
            values: values.to_vec(),
            xi_min,
            engine,
            estimates: fit.estimates,
        })
    }

    /// Fitted surrogate parameters (constant mean, kernel range/variance,
    /// nugget).
    pub fn params(&self) -> &ParamVector {
        &self.estimates
    }

    /// Kriging mean and standard deviation of the latent IC surface at a
    /// log10-scale point; the fitted nugget is excluded from the variance.
    pub fn kriging(&self, point: &[f64; 2]) -> Result<(f64, f64)> {
        let newlocs = DMatrix::from_row_slice(1, 2, point);
        let ones = DMatrix::from_element(1, 1, 1.0);
        let out = predict_svc(&self.engine, &self.estimates, &newlocs, Some(&ones), Some(&ones))?;
        let mu = out.y_hat.expect("requested")[0];
        let var = (out.pred_var.expect("requested")[0] - self.estimates.cov.nugget).max(0.0);
        Ok((mu, var.sqrt()))
    }

    pub fn expected_improvement_at(&self, point: &[f64; 2]) -> Result<f64> {
        let (mu, s) = self.kriging(point)?;
        Ok(expected_improvement(self.xi_min, mu, s))
    }
}

const EI_MULTISTART_PER_DIM: usize = 8;
const DUPLICATE_LOG_TOL: f64 = 1e-10;

/// Maximize expected improvement over the box by multistart local search
/// from a log-spaced lattice of starting points; candidates that collide
/// with existing design points are discarded.
fn maximize_ei(
    surrogate: &SurrogateState,
    bounds: &LambdaBox,
    taken: &[[f64; 2]],
    pool: Option<&rayon::ThreadPool>,
) -> Option<ShrinkagePair> {
    let lo = bounds.log_lo();
    let hi = bounds.log_hi();
    let k = EI_MULTISTART_PER_DIM;
    let mut starts = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            starts.push(vec![
                lo[0] + (i as f64 + 0.5) / k as f64 * (hi[0] - lo[0]),
                lo[1] + (j as f64 + 0.5) / k as f64 * (hi[1] - lo[1]),
            ]);
        }
    }
    let objective = |z: &[f64]| -> Result<f64> {
        surrogate
            .expected_improvement_at(&[z[0], z[1]])
            .map(|ei| -ei)
    };
    let opts = OptimOptions {
        max_iter: 60,
        ..OptimOptions::default()
    };
    let run_one = |start: &Vec<f64>| -> Option<(f64, [f64; 2])> {
        let out = minimize_bounded(
            &objective,
            start,
            &[lo[0], lo[1]],
            &[hi[0], hi[1]],
            &opts,
            None,
        )
        .ok()?;
        Some((-out.f, [out.x[0], out.x[1]]))
    };
    let candidates: Vec<Option<(f64, [f64; 2])>> = match pool {
        Some(pool) => pool.install(|| {
            use rayon::prelude::*;
            starts.par_iter().map(run_one).collect()
        }),
        None => starts.iter().map(run_one).collect(),
    };

    let mut best: Option<(f64, [f64; 2])> = None;
    for cand in candidates.into_iter().flatten() {
        let duplicate = taken.iter().any(|t| {
            (t[0] - cand.1[0]).abs().max((t[1] - cand.1[1]).abs()) <= DUPLICATE_LOG_TOL
        });
        if duplicate {
            continue;
        }
        if best.map_or(true, |b| cand.0 > b.0) {
            best = Some(cand);
        }
    }
    best.map(|(_, point)| ShrinkagePair {
        lambda_mu: 10f64.powf(point[0]),
        lambda_theta: 10f64.powf(point[1]),
    })
}

/// Surrogate-model search over a generic IC objective: a Latin hypercube
/// initialization followed by sequential expected-improvement proposals.
pub fn select_mbo_with(
    ic_fn: &IcObjective<'_>,
    bounds: &LambdaBox,
    n_init: usize,
    n_iter: usize,
    seed: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<SelectionResult> {
    bounds.validate()?;
    let init_points = lhs_design(n_init, bounds, seed)?;
    let mut evaluations: Vec<SelectionEval> = init_points
        .iter()
        .map(|p| timed_eval(ic_fn, p))
        .collect();
    let mut notes = Vec::new();

    for iter in 0..n_iter {
        let mut design = Vec::new();
        let mut values = Vec::new();
        let mut taken = Vec::new();
        for e in &evaluations {
            let point = [e.pair.lambda_mu.log10(), e.pair.lambda_theta.log10()];
            taken.push(point);
            if !e.ic.is_nan() {
                design.push(point);
                values.push(e.ic);
            }
        }
        if design.len() < 2 {
            notes.push(format!(
                "iteration {iter}: fewer than two successful evaluations; \
                 falling back to the best point so far"
            ));
            break;
        }
        let surrogate = match SurrogateState::fit(&design, &values) {
            Ok(s) => s,
            Err(e) => {
                notes.push(format!(
                    "iteration {iter}: surrogate fit failed ({e}); falling \
                     back to the best point so far"
                ));
                break;
            }
        };
        let Some(next) = maximize_ei(&surrogate, bounds, &taken, pool) else {
            notes.push(format!(
                "iteration {iter}: no distinct expected-improvement \
                 candidate; stopping early"
            ));
            break;
        };
        evaluations.push(timed_eval(ic_fn, &next));
    }

    let best = argmin_ic(&evaluations)?;
    Ok(SelectionResult {
        method: SelectionMethod::Mbo,
        evaluations,
        best,
        notes,
    })
}

fn real_ic_objective<'a>(
    engine: &'a LikelihoodEngine,
    mle_estimate: &'a ParamVector,
    theta_bounds: &'a BoundsInit,
    ic: IcType,
    cd: &'a CdControl,
    cell_pool: Option<&'a rayon::ThreadPool>,
) -> impl Fn(&ShrinkagePair) -> (Option<ParamVector>, f64, bool) + Sync + 'a {
    move |pair| {
        match cd_pmle(engine, mle_estimate, theta_bounds, pair, cd, cell_pool) {
            Ok(out) => match information_criterion(engine, &out.estimate, ic) {
                Ok(value) => (Some(out.estimate), value, out.converged),
                Err(_) => (Some(out.estimate), f64::NAN, false),
            },
            Err(_) => (None, f64::NAN, false),
        }
    }
}

/// Grid search of the shrinkage plane on real data. Cells run concurrently
/// over the pool; each owns its entire coordinate-descent state.
pub fn select_grid(
    engine: &LikelihoodEngine,
    mle_estimate: &ParamVector,
    theta_bounds: &BoundsInit,
    bounds: &LambdaBox,
    n_per_dim: usize,
    ic: IcType,
    cd: &CdControl,
    pool: Option<&rayon::ThreadPool>,
) -> Result<SelectionResult> {
    if ic == IcType::CaicVb && engine.n() <= engine.data().p() + 2 {
        return Err(Error::Domain("cAIC needs n > p + 2".into()));
    }
    let ic_fn = real_ic_objective(engine, mle_estimate, theta_bounds, ic, cd, None);
    select_grid_with(&ic_fn, bounds, n_per_dim, pool)
}

/// Surrogate-model search on real data; iterations are sequential, the
/// inner coordinate descent uses the pool.
#[allow(clippy::too_many_arguments)]
pub fn select_mbo(
    engine: &LikelihoodEngine,
    mle_estimate: &ParamVector,
    theta_bounds: &BoundsInit,
    bounds: &LambdaBox,
    n_init: usize,
    n_iter: usize,
    ic: IcType,
    cd: &CdControl,
    seed: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<SelectionResult> {
    if ic == IcType::CaicVb && engine.n() <= engine.data().p() + 2 {
        return Err(Error::Domain("cAIC needs n > p + 2".into()));
    }
    let ic_fn = real_ic_objective(engine, mle_estimate, theta_bounds, ic, cd, pool);
    select_mbo_with(&ic_fn, bounds, n_init, n_iter, seed, pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use crate::model::GpParams;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn small_engine(seed: u64, n: usize, p: usize) -> LikelihoodEngine {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut norm = || -> f64 { StandardNormal.sample(&mut rng) };
        let locs = DMatrix::from_fn(n, 1, |i, _| i as f64 * 0.9 + 0.05 * norm());
        let x = DMatrix::from_fn(n, p, |_, c| if c == 0 { 1.0 } else { norm() });
        let y = DVector::from_fn(n, |i, _| 1.0 + 0.3 * i as f64 + norm());
        let data = SvcData::new(y, x, None, locs).unwrap();
        LikelihoodEngine::new(data, KernelSpec::new(KernelKind::Exp)).unwrap()
    }

    fn plain_omega(p: usize, q: usize) -> ParamVector {
        ParamVector {
            mu: vec![0.4; p],
            cov: CovParams {
                gps: (0..q)
                    .map(|_| GpParams { range: 1.0, variance: 0.6 })
                    .collect(),
                nugget: 0.5,
            },
        }
    }

    #[test]
    fn zero_weights_reduce_to_the_likelihood() {
        let engine = small_engine(1, 7, 2);
        let omega = plain_omega(2, 2);
        let weights = AdaptiveWeights { mu: vec![0.0, 0.0], variances: vec![0.0, 0.0] };
        let a = penalized_neg2_log_lik(&engine, &omega, &weights).unwrap();
        let b = engine.neg2_log_lik(&omega).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_parameters_contribute_no_penalty() {
        let engine = small_engine(2, 6, 1);
        let mut omega = plain_omega(1, 1);
        omega.mu[0] = 0.0;
        omega.cov.gps[0].variance = 0.0;
        let weights = AdaptiveWeights {
            mu: vec![f64::INFINITY],
            variances: vec![f64::INFINITY],
        };
        let a = penalized_neg2_log_lik(&engine, &omega, &weights).unwrap();
        let b = engine.neg2_log_lik(&omega).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hand_computed_penalty() {
        // n = 4, lambda_1 = 0.5, mu_1 = 2, everything else unpenalized:
        // objective = -2 log L + 2 * 4 * 0.5 * 2
        let engine = small_engine(3, 4, 1);
        let mut omega = plain_omega(1, 1);
        omega.mu[0] = 2.0;
        let weights = AdaptiveWeights { mu: vec![0.5], variances: vec![0.0] };
        let with = penalized_neg2_log_lik(&engine, &omega, &weights).unwrap();
        let without = engine.neg2_log_lik(&omega).unwrap();
        assert_relative_eq!(with - without, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn adaptive_weight_examples() {
        let mle = ParamVector {
            mu: vec![2.0, -0.5],
            cov: CovParams {
                gps: vec![GpParams { range: 1.0, variance: 4.0 }],
                nugget: 0.1,
            },
        };
        let w = adaptive_weights(&mle, &ShrinkagePair { lambda_mu: 1.0, lambda_theta: 2.0 });
        assert_eq!(w.mu, vec![0.5, 2.0]);
        assert_eq!(w.variances, vec![0.5]);

        let mle0 = ParamVector {
            mu: vec![0.0],
            cov: CovParams {
                gps: vec![GpParams { range: 1.0, variance: 0.0 }],
                nugget: 0.1,
            },
        };
        let w0 = adaptive_weights(&mle0, &ShrinkagePair { lambda_mu: 1.0, lambda_theta: 1.0 });
        assert!(w0.mu[0].is_infinite());
        assert!(w0.variances[0].is_infinite());
    }

    #[test]
    fn unpenalized_lasso_step_is_gls() {
        let engine = small_engine(4, 9, 2);
        let cov = plain_omega(2, 2).cov;
        let mu = mu_lasso_step(&engine, &cov, &[0.0, 0.0], None).unwrap();
        let gls = engine.gls_mean(&cov).unwrap();
        for j in 0..2 {
            assert_relative_eq!(mu[j], gls[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn infinite_weights_zero_the_means() {
        let engine = small_engine(5, 8, 2);
        let cov = plain_omega(2, 2).cov;
        let mu = mu_lasso_step(&engine, &cov, &[f64::INFINITY, f64::INFINITY], None).unwrap();
        assert_eq!(mu, vec![0.0, 0.0]);
    }

    #[test]
    fn soft_threshold_hand_case() {
        // orthonormal whitened design: z = 3, threshold 1 -> 2
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.7, 1.0), 0.0);
        assert_eq!(soft_threshold(5.0, f64::INFINITY), 0.0);

        // through the full step: Sigma_Y = I (sigma2 = 0, tau2 = 1),
        // X = e_1 so the whitened design is orthonormal
        let data = SvcData::new(
            DVector::from_vec(vec![3.0, 0.4]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            Some(DMatrix::from_row_slice(2, 1, &[1.0, 1.0])),
            DMatrix::from_row_slice(2, 1, &[0.0, 5.0]),
        )
        .unwrap();
        let engine = LikelihoodEngine::new(data, KernelSpec::new(KernelKind::Exp)).unwrap();
        let cov = CovParams {
            gps: vec![GpParams { range: 1.0, variance: 0.0 }],
            nugget: 1.0,
        };
        // n * lambda = 1 -> lambda = 0.5
        let mu = mu_lasso_step(&engine, &cov, &[0.5], None).unwrap();
        assert_relative_eq!(mu[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn theta_step_with_zero_weights_matches_direct_optimization() {
        let engine = small_engine(6, 10, 1);
        let bounds = crate::mle::default_bounds_and_init(engine.data(), true).unwrap();
        let mu = vec![1.2];
        let warm = CovParams::from_slice(&bounds.init).unwrap();
        let stepped =
            theta_penalized_step(&engine, &mu, &[0.0], &bounds, &warm, None).unwrap();

        // direct optimization of the same unpenalized objective
        let objective = |x: &[f64]| -> Result<f64> {
            let cov = CovParams::from_slice(x)?;
            engine.neg2_log_lik(&ParamVector { mu: mu.clone(), cov })
        };
        let direct = minimize_bounded(
            &objective,
            &bounds.init,
            &bounds.lower,
            &bounds.upper,
            &OptimOptions::default(),
            None,
        )
        .unwrap();
        let stepped_val = engine
            .neg2_log_lik(&ParamVector { mu: mu.clone(), cov: stepped })
            .unwrap();
        assert!((stepped_val - direct.f).abs() <= 1e-4 * direct.f.abs().max(1.0));
    }

    #[test]
    fn infinite_variance_weights_reduce_to_nugget_model() {
        let engine = small_engine(7, 8, 1);
        let bounds = crate::mle::default_bounds_and_init(engine.data(), true).unwrap();
        let warm = CovParams::from_slice(&bounds.init).unwrap();
        let out = theta_penalized_step(
            &engine,
            &[0.5],
            &[f64::INFINITY],
            &bounds,
            &warm,
            None,
        )
        .unwrap();
        assert_eq!(out.gps[0].variance, 0.0);
        // range frozen at the warm value
        assert_eq!(out.gps[0].range, warm.gps[0].range);
    }

    #[test]
    fn effective_df_is_p_for_iid_model() {
        let engine = small_engine(8, 9, 2);
        let cov = CovParams {
            gps: vec![
                GpParams { range: 1.0, variance: 0.0 },
                GpParams { range: 2.0, variance: 0.0 },
            ],
            nugget: 0.8,
        };
        let df = effective_df(&engine, &cov).unwrap();
        assert_relative_eq!(df, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn effective_df_matches_explicit_hat_trace() {
        for seed in 0..6 {
            let engine = small_engine(100 + seed, 3 + (seed as usize % 4), 1);
            let cov = CovParams {
                gps: vec![GpParams { range: 0.8, variance: 0.9 }],
                nugget: 0.4,
            };
            let df = effective_df(&engine, &cov).unwrap();

            // oracle: form the hat matrix explicitly and trace it
            let sigma = engine.assemble_cov_y(&cov).unwrap().to_dense();
            let inv = sigma.try_inverse().unwrap();
            let x = engine.data().x();
            let a = (x.transpose() * &inv * x).try_inverse().unwrap();
            let n = engine.n();
            let hat = DMatrix::identity(n, n) - &inv * cov.nugget
                + &inv * x * a * x.transpose() * &inv * cov.nugget;
            assert_relative_eq!(df, hat.trace(), epsilon = 1e-10);
        }
    }

    #[test]
    fn effective_df_stays_between_p_and_n() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        for trial in 0..50 {
            let n = 4 + (trial % 7);
            let engine = small_engine(200 + trial as u64, n, 1);
            let variance: f64 = rng.random_range(0.01..3.0);
            let range: f64 = rng.random_range(0.2..4.0);
            let nugget: f64 = rng.random_range(0.05..2.0);
            let cov = CovParams {
                gps: vec![GpParams { range, variance }],
                nugget,
            };
            let df = effective_df(&engine, &cov).unwrap();
            assert!(
                df >= 1.0 - 1e-8 && df <= n as f64 + 1e-8,
                "df {df} outside [1, {n}]"
            );
        }
    }

    #[test]
    fn bic_hand_case() {
        // deviance 200, n = 100, 3 + 2 nonzero entries
        let engine = small_engine(9, 4, 1);
        let _ = engine;
        let penalty = 100f64.ln() * 5.0;
        assert_relative_eq!(200.0 + penalty, 223.02585092994046, max_relative = 1e-12);
    }

    #[test]
    fn bic_counts_only_nonzero_entries() {
        let engine = small_engine(10, 8, 2);
        let mut omega = plain_omega(2, 2);
        omega.mu[1] = 0.0;
        omega.cov.gps[1].variance = 0.0;
        let bic = information_criterion(&engine, &omega, IcType::Bic).unwrap();
        let dev = engine.neg2_log_lik(&omega).unwrap();
        assert_relative_eq!(bic - dev, 8f64.ln() * 2.0, max_relative = 1e-12);

        // all zero: no penalty at all
        let mut bare = omega.clone();
        bare.mu = vec![0.0, 0.0];
        bare.cov.gps[0].variance = 0.0;
        let bic0 = information_criterion(&engine, &bare, IcType::Bic).unwrap();
        let dev0 = engine.neg2_log_lik(&bare).unwrap();
        assert_eq!(bic0, dev0);
    }

    #[test]
    fn bic_is_invariant_to_covariate_order() {
        let engine = small_engine(11, 8, 2);
        let omega = plain_omega(2, 2);
        let b1 = information_criterion(&engine, &omega, IcType::Bic).unwrap();

        // swap the two covariate columns everywhere
        let data = engine.data();
        let x = DMatrix::from_fn(8, 2, |i, j| data.x()[(i, 1 - j)]);
        let w = DMatrix::from_fn(8, 2, |i, j| data.w()[(i, 1 - j)]);
        let swapped = SvcData::new(data.y().clone(), x, Some(w), data.locs().clone()).unwrap();
        let engine2 = LikelihoodEngine::new(swapped, *engine.kernel()).unwrap();
        let mut omega2 = omega.clone();
        omega2.mu.reverse();
        omega2.cov.gps.reverse();
        let b2 = information_criterion(&engine2, &omega2, IcType::Bic).unwrap();
        assert_relative_eq!(b1, b2, max_relative = 1e-12);
    }

    #[test]
    fn caic_needs_enough_observations() {
        let engine = small_engine(12, 3, 1);
        let omega = plain_omega(1, 1);
        assert!(information_criterion(&engine, &omega, IcType::CaicVb).is_err());

        let engine = small_engine(12, 10, 1);
        let omega = plain_omega(1, 1);
        let caic = information_criterion(&engine, &omega, IcType::CaicVb).unwrap();
        assert!(caic.is_finite());
    }

    #[test]
    fn expected_improvement_closed_form_values() {
        assert_eq!(expected_improvement(1.0, 2.0, 0.0), 0.0);
        // xi_min = mu: EI = s * phi(0)
        assert_relative_eq!(
            expected_improvement(0.0, 0.0, 1.0),
            0.3989422804014327,
            max_relative = 1e-12
        );
        // xi_min - mu = 1, s = 1: Phi(1) + phi(1)
        assert_relative_eq!(
            expected_improvement(1.0, 0.0, 1.0),
            1.0833154705876864,
            max_relative = 1e-10
        );
    }

    #[test]
    fn expected_improvement_is_nonnegative_and_monotone_in_s() {
        for xi in [-2.0, 0.0, 1.5] {
            for mu in [-1.0, 0.0, 2.0] {
                let mut prev = expected_improvement(xi, mu, 1e-6);
                assert!(prev >= 0.0);
                if xi - mu <= 0.0 {
                    for s in [0.1, 0.5, 1.0, 2.0, 5.0] {
                        let ei = expected_improvement(xi, mu, s);
                        assert!(ei >= prev - 1e-15, "EI not increasing in s");
                        prev = ei;
                    }
                }
            }
        }
    }

    #[test]
    fn lhs_respects_strata_on_log_scale() {
        let bounds = LambdaBox::square(1.0, 10.0).unwrap();
        let pts = lhs_design(2, &bounds, 5).unwrap();
        let sqrt10 = 10f64.sqrt();
        for d in 0..2 {
            let coords: Vec<f64> = pts
                .iter()
                .map(|p| if d == 0 { p.lambda_mu } else { p.lambda_theta })
                .collect();
            let in_low = coords.iter().filter(|&&v| v < sqrt10).count();
            assert_eq!(in_low, 1, "one point per log stratum in dim {d}");
        }

        let pts5 = lhs_design(5, &bounds, 7).unwrap();
        for d in 0..2 {
            let mut counts = [0usize; 5];
            for p in &pts5 {
                let v = if d == 0 { p.lambda_mu } else { p.lambda_theta };
                let s = ((v.log10()) * 5.0).floor().min(4.0) as usize;
                counts[s] += 1;
            }
            assert_eq!(counts, [1, 1, 1, 1, 1]);
            for p in &pts5 {
                assert!(bounds.contains(p));
            }
        }
    }

    #[test]
    fn lhs_rejects_degenerate_inputs() {
        assert!(LambdaBox::square(0.0, 1.0).is_err());
        assert!(LambdaBox::square(1.0, 1.0).is_err());
        let bounds = LambdaBox::square(1e-3, 1.0).unwrap();
        assert!(lhs_design(1, &bounds, 1).is_err());
        // determinism
        let a = lhs_design(4, &bounds, 9).unwrap();
        let b = lhs_design(4, &bounds, 9).unwrap();
        assert_eq!(a, b);
    }

    /// A separable quadratic bowl on the log scale with its minimum at a
    /// lattice point.
    fn toy_bowl(pair: &ShrinkagePair) -> (Option<ParamVector>, f64, bool) {
        let a = pair.lambda_mu.log10() + 1.0;
        let b = pair.lambda_theta.log10() + 1.0;
        (None, a * a + b * b, true)
    }

    #[test]
    fn grid_and_mbo_agree_on_a_toy_bowl() {
        let bounds = LambdaBox::square(1e-3, 1.0).unwrap();
        let grid = select_grid_with(&toy_bowl, &bounds, 10, None).unwrap();
        assert_eq!(grid.evaluations.len(), 100);
        let g = grid.best_eval();
        assert_relative_eq!(g.pair.lambda_mu, 0.1, max_relative = 1e-9);
        assert_relative_eq!(g.pair.lambda_theta, 0.1, max_relative = 1e-9);
        assert!(grid
            .evaluations
            .iter()
            .all(|e| e.ic >= g.ic));

        let mbo = select_mbo_with(&toy_bowl, &bounds, 5, 15, 1, None).unwrap();
        assert_eq!(mbo.evaluations.len(), 20);
        let m = mbo.best_eval();
        assert!(
            m.ic <= g.ic + 0.05,
            "MBO best {} vs grid best {}",
            m.ic,
            g.ic
        );
    }

    #[test]
    fn mbo_with_zero_iterations_scores_only_the_design() {
        let bounds = LambdaBox::square(1e-3, 1.0).unwrap();
        let mbo = select_mbo_with(&toy_bowl, &bounds, 4, 0, 2, None).unwrap();
        assert_eq!(mbo.evaluations.len(), 4);
        let best = mbo.best_eval();
        assert!(mbo.evaluations.iter().all(|e| e.ic >= best.ic));
    }

    #[test]
    fn surrogate_interpolates_a_smooth_surface() {
        // fit the surrogate on a smooth function and check the kriging mean
        // is close at a held-out point while far points keep variance
        let mut design = Vec::new();
        let mut values = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let p = [-3.0 + 0.75 * i as f64, -3.0 + 0.75 * j as f64];
                design.push(p);
                values.push((p[0] + 1.0).powi(2) + (p[1] + 1.0).powi(2));
            }
        }
        let s = SurrogateState::fit(&design, &values).unwrap();
        let (mu, sd) = s.kriging(&[-1.0, -1.0]).unwrap();
        assert!(mu.abs() < 0.35, "kriging mean at the bowl center: {mu}");
        assert!(sd >= 0.0);
        let ei = s.expected_improvement_at(&[-1.0, -1.0]).unwrap();
        assert!(ei >= 0.0);
    }

    #[test]
    fn surrogate_rejects_duplicate_design_points() {
        let design = vec![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]];
        let values = vec![1.0, 2.0, 3.0];
        assert!(SurrogateState::fit(&design, &values).is_err());
    }
}
