//! Synthetic data generation: exact Gaussian-process draws and the full
//! SVC generator.
//!
//! All randomness flows through a seedable, portable ChaCha12 generator;
//! identical seeds give bitwise-identical output on every platform.
//! Components of the full generator draw from distinct generator streams of
//! the same seed, so concurrent extensions cannot collide.

use crate::error::{Error, Result};
use crate::kernel::{corr_unchecked, KernelKind, KernelParams};
use crate::model::{pairwise_distances, CovParams, GpParams, ParamVector, SvcData};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// A generated data set together with everything that produced it.
#[derive(Debug, Clone)]
pub struct SvcTruth {
    /// True coefficient surfaces `beta_k(s_i) = mu_k + eta_k(s_i)`, `n x q`.
    pub beta: DMatrix<f64>,
    pub data: SvcData,
    /// Generating parameters (nugget stored as a variance).
    pub params: ParamVector,
    /// The drawn noise vector; `y - sum_k beta_k .* x_k` equals it exactly.
    pub noise: DVector<f64>,
    pub seed: u64,
}

/// Relative jitter added to the diagonal before factorizing a sampling
/// covariance; sampling has no nugget so near-duplicate locations would
/// otherwise defeat the factorization. Never used on the likelihood side.
const SAMPLING_JITTER: f64 = 1e-10;

fn sample_gp_with(
    rng: &mut ChaCha12Rng,
    locs: &DMatrix<f64>,
    kernel: KernelKind,
    params: &KernelParams,
) -> Result<DVector<f64>> {
    if !(params.range > 0.0) {
        return Err(Error::Domain(format!(
            "kernel range must be > 0, got {}",
            params.range
        )));
    }
    if !(params.variance >= 0.0) {
        return Err(Error::Domain(format!(
            "kernel variance must be >= 0, got {}",
            params.variance
        )));
    }
    let n = locs.nrows();
    if params.variance == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let dist = pairwise_distances(locs);
    let jitter = SAMPLING_JITTER * params.variance;
    let sigma = DMatrix::from_fn(n, n, |i, j| {
        let c = params.variance * corr_unchecked(kernel, dist.get(i, j) / params.range);
        if i == j {
            c + jitter
        } else {
            c
        }
    });
    let chol = Cholesky::new(sigma).ok_or_else(|| {
        Error::Numeric(
            "sampling covariance is not positive definite even with jitter".into(),
        )
    })?;
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    Ok(chol.l() * z)
}

/// Draw one zero-mean Gaussian-process realization at `locs`.
pub fn sample_gp(
    locs: &DMatrix<f64>,
    kernel: KernelKind,
    params: &KernelParams,
    seed: u64,
) -> Result<DVector<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    sample_gp_with(&mut rng, locs, kernel, params)
}

/// Sample a full SVC data set: intercept column plus standard-normal
/// covariates, `W = X`, coefficient surfaces `beta_k = mu_k + eta_k`, and
/// response `y = sum_k beta_k .* x_k + nugget_sd * eps`.
pub fn sample_full_svc(
    means: &[f64],
    variances: &[f64],
    ranges: &[f64],
    nugget_sd: f64,
    locs: &DMatrix<f64>,
    kernel: KernelKind,
    seed: u64,
) -> Result<SvcTruth> {
    let q = means.len();
    if q == 0 {
        return Err(Error::Domain("at least one coefficient is required".into()));
    }
    if variances.len() != q || ranges.len() != q {
        return Err(Error::Domain(format!(
            "means/variances/ranges must have equal length, got {q}/{}/{}",
            variances.len(),
            ranges.len()
        )));
    }
    if !(nugget_sd >= 0.0) {
        return Err(Error::Domain(format!(
            "nugget standard deviation must be >= 0, got {nugget_sd}"
        )));
    }
    let n = locs.nrows();
    if n == 0 {
        return Err(Error::Domain("at least one location is required".into()));
    }

    let stream_rng = |stream: u64| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    };

    // covariates: intercept, then standard normal columns
    let mut x = DMatrix::zeros(n, q);
    {
        let mut rng = stream_rng(1);
        for j in 0..q {
            for i in 0..n {
                x[(i, j)] = if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) };
            }
        }
    }

    let mut beta = DMatrix::zeros(n, q);
    for k in 0..q {
        let gp = KernelParams::new(ranges[k], variances[k])?;
        let mut rng = stream_rng(2 + k as u64);
        let eta = sample_gp_with(&mut rng, locs, kernel, &gp)?;
        for i in 0..n {
            beta[(i, k)] = means[k] + eta[i];
        }
    }

    let mut rng = stream_rng(2 + q as u64);
    let noise = DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        nugget_sd * z
    });

    let y = DVector::from_fn(n, |i, _| {
        let mut s = noise[i];
        for k in 0..q {
            s += beta[(i, k)] * x[(i, k)];
        }
        s
    });

    let data = SvcData::new(y, x, None, locs.clone())?;
    let params = ParamVector {
        mu: means.to_vec(),
        cov: CovParams {
            gps: (0..q)
                .map(|k| GpParams { range: ranges[k], variance: variances[k] })
                .collect(),
            nugget: nugget_sd * nugget_sd,
        },
    };
    Ok(SvcTruth { beta, data, params, noise, seed })
}

/// Uniform locations over `[lo, hi]^d`; sorted when the domain is one
/// dimensional, matching how line transects are usually presented.
pub fn sample_uniform_locs(n: usize, d: usize, lo: f64, hi: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 || d == 0 {
        return Err(Error::Domain("need n >= 1 locations and d >= 1".into()));
    }
    if !(lo < hi) {
        return Err(Error::Domain(format!(
            "domain must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut locs = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            locs[(i, j)] = rng.random_range(lo..hi);
        }
    }
    if d == 1 {
        let mut col: Vec<f64> = locs.column(0).iter().copied().collect();
        col.sort_by(|a, b| a.total_cmp(b));
        for (i, v) in col.into_iter().enumerate() {
            locs[(i, 0)] = v;
        }
    }
    Ok(locs)
}
