//! Marginal covariance assembly and (profile) log-likelihood evaluation.
//!
//! The marginal covariance of the response is
//! `Sigma_Y(theta) = sum_k (w_k w_k^T) .* Sigma_k + tau2 I`, dense by default
//! or sparse when a taper is configured. All solves and log-determinants go
//! through a single Cholesky factorization per evaluation.

use crate::error::{Error, Result};
use crate::kernel::{corr_unchecked, KernelKind, TaperSpec};
use crate::model::{pairwise_distances, CovParams, DistanceMatrix, GpParams, ParamVector, SvcData};
use crate::sparse::{SparseChol, SparseTemplate};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::sync::OnceLock;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Kernel family plus optional taper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub taper: Option<TaperSpec>,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        Self { kind, taper: None }
    }

    /// Taper with the default compact family paired to `kind`.
    pub fn with_taper_range(kind: KernelKind, taper_range: f64) -> Result<Self> {
        Ok(Self {
            kind,
            taper: Some(TaperSpec::for_kernel(taper_range, kind)?),
        })
    }
}

/// Immutable evaluation context: data, kernel, cached distances, and the
/// taper-induced sparsity pattern when tapering is on.
///
/// Evaluations at different parameters are pure and may run concurrently
/// against one shared engine; each evaluation owns its scratch factorization.
#[derive(Debug)]
pub struct LikelihoodEngine {
    data: SvcData,
    kernel: KernelSpec,
    dist: DistanceMatrix,
    sparse: Option<SparseTemplate>,
}

impl LikelihoodEngine {
    pub fn new(data: SvcData, kernel: KernelSpec) -> Result<Self> {
        data.validate()?;
        for k in 0..data.q() {
            if data.w().column(k).iter().all(|&v| v == 0.0) {
                return Err(Error::Domain(format!(
                    "random-effect column {} is identically zero; its process \
                     variance is not identifiable",
                    k + 1
                )));
            }
        }
        let dist = pairwise_distances(data.locs());
        let sparse = kernel
            .taper
            .as_ref()
            .map(|t| SparseTemplate::from_distances(&dist, t.range));
        Ok(Self { data, kernel, dist, sparse })
    }

    pub fn data(&self) -> &SvcData {
        &self.data
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn dist(&self) -> &DistanceMatrix {
        &self.dist
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn is_tapered(&self) -> bool {
        self.sparse.is_some()
    }

    /// Stored off-diagonal entries of the taper pattern (both triangles).
    pub fn taper_nnz_offdiag(&self) -> Option<usize> {
        self.sparse.as_ref().map(|s| s.nnz_offdiag())
    }

    /// Covariance of one process at distance `u`, taper applied when the
    /// engine is tapered.
    #[inline]
    pub(crate) fn gp_cov(&self, gp: &GpParams, u: f64) -> f64 {
        let mut c = gp.variance * corr_unchecked(self.kernel.kind, u / gp.range);
        if let Some(t) = &self.kernel.taper {
            c *= corr_unchecked(t.kind, u / t.range);
        }
        c
    }

    #[inline]
    fn cov_entry(&self, cov: &CovParams, i: usize, j: usize, u: f64) -> f64 {
        let w = self.data.w();
        let mut s = 0.0;
        for (k, gp) in cov.gps.iter().enumerate() {
            s += w[(i, k)] * w[(j, k)] * self.gp_cov(gp, u);
        }
        s
    }

    fn check_cov_shape(&self, cov: &CovParams) -> Result<()> {
        if cov.q() != self.data.q() {
            return Err(Error::Domain(format!(
                "covariance parameters describe {} processes but the data has {}",
                cov.q(),
                self.data.q()
            )));
        }
        Ok(())
    }

    /// Ranges must be positive for the kernels to be evaluable; variances and
    /// nugget are left free so finite-difference probes may step across zero.
    fn check_cov_relaxed(&self, cov: &CovParams) -> Result<()> {
        self.check_cov_shape(cov)?;
        for (k, gp) in cov.gps.iter().enumerate() {
            if !(gp.range > 0.0) {
                return Err(Error::Domain(format!(
                    "range of process {} must be > 0, got {}",
                    k + 1,
                    gp.range
                )));
            }
            if !gp.variance.is_finite() {
                return Err(Error::Domain(format!(
                    "variance of process {} must be finite",
                    k + 1
                )));
            }
        }
        if !cov.nugget.is_finite() {
            return Err(Error::Domain("nugget must be finite".into()));
        }
        Ok(())
    }

    /// Assemble `Sigma_Y(theta)`, dense or sparse per the engine's taper.
    pub fn assemble_cov_y(&self, cov: &CovParams) -> Result<CovYMatrix<'_>> {
        self.check_cov_shape(cov)?;
        cov.validate()?;
        Ok(self.assemble_unchecked(cov))
    }

    fn assemble_unchecked(&self, cov: &CovParams) -> CovYMatrix<'_> {
        let repr = match &self.sparse {
            None => {
                let n = self.n();
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let mut v = self.cov_entry(cov, i, j, self.dist.get(i, j));
                        if i == j {
                            v += cov.nugget;
                        }
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                CovYRepr::Dense(m)
            }
            Some(template) => {
                let values = template.fill(
                    |i, j, u| self.cov_entry(cov, i, j, u),
                    |i| self.cov_entry(cov, i, i, 0.0) + cov.nugget,
                );
                CovYRepr::Sparse(values)
            }
        };
        CovYMatrix { repr, factor: OnceLock::new() }
    }

    /// Assemble and factorize without retaining the assembled matrix.
    fn factor_for(&self, cov: &CovParams) -> Result<CovYFactor<'_>> {
        self.assemble_unchecked(cov).into_factor()
    }

    fn neg2_inner(&self, omega: &ParamVector, relaxed: bool) -> Result<f64> {
        if omega.p() != self.data.p() {
            return Err(Error::Domain(format!(
                "{} fixed effects provided but the data has {}",
                omega.p(),
                self.data.p()
            )));
        }
        if relaxed {
            self.check_cov_relaxed(&omega.cov)?;
        } else {
            self.check_cov_shape(&omega.cov)?;
            omega.validate()?;
        }
        let factor = self.factor_for(&omega.cov)?;
        let mu = DVector::from_column_slice(&omega.mu);
        let resid = self.data.y() - self.data.x() * mu;
        let white = factor.whiten_vec(&resid);
        Ok(self.n() as f64 * LN_2PI + factor.log_det() + white.norm_squared())
    }

    /// `-2 l(omega)` of the marginal Gaussian log-likelihood.
    pub fn neg2_log_lik(&self, omega: &ParamVector) -> Result<f64> {
        self.neg2_inner(omega, false)
    }

    /// Like [`neg2_log_lik`](Self::neg2_log_lik) but variances and nugget may
    /// be any finite real; used by finite-difference probes near the
    /// feasibility boundary. Positive definiteness still has to hold.
    pub(crate) fn neg2_log_lik_relaxed(&self, omega: &ParamVector) -> Result<f64> {
        self.neg2_inner(omega, true)
    }

    /// Generalized-least-squares mean given covariance parameters:
    /// `(X' Sigma^-1 X)^-1 X' Sigma^-1 y`, via Cholesky solves.
    pub fn gls_mean(&self, cov: &CovParams) -> Result<DVector<f64>> {
        self.check_cov_shape(cov)?;
        cov.validate()?;
        let factor = self.factor_for(cov)?;
        Ok(self.gls_from_factor(&factor)?.0)
    }

    fn gls_from_factor(&self, factor: &CovYFactor<'_>) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
        let xw = factor.whiten_mat(self.data.x());
        let yw = factor.whiten_vec(self.data.y());
        let xtx = xw.transpose() * &xw;
        let xty = xw.transpose() * &yw;
        let chol = Cholesky::new(xtx).ok_or_else(|| {
            Error::Numeric(
                "X' Sigma^-1 X is not positive definite; remove collinear \
                 fixed-effect columns"
                    .into(),
            )
        })?;
        let mu = chol.solve(&xty);
        Ok((mu, xw, yw))
    }

    /// Profile `-2 l(theta)`: the fixed effects are concentrated out at their
    /// GLS optimum before evaluation.
    pub fn profile_neg2_log_lik(&self, cov: &CovParams) -> Result<f64> {
        self.check_cov_shape(cov)?;
        cov.validate()?;
        Ok(self.profile_parts(cov)?.0)
    }

    /// Profile value together with the concentrated mean.
    pub fn profile_parts(&self, cov: &CovParams) -> Result<(f64, DVector<f64>)> {
        self.check_cov_shape(cov)?;
        let factor = self.factor_for(cov)?;
        let (mu, xw, yw) = self.gls_from_factor(&factor)?;
        let resid = yw - xw * &mu;
        let value = self.n() as f64 * LN_2PI + factor.log_det() + resid.norm_squared();
        Ok((value, mu))
    }

    /// Relaxed-domain profile evaluation for finite-difference probes.
    pub(crate) fn profile_neg2_relaxed(&self, cov: &CovParams) -> Result<f64> {
        self.check_cov_relaxed(cov)?;
        self.profile_parts(cov).map(|(v, _)| v)
    }

    /// Factorize `Sigma_Y(theta)` for downstream solves (prediction,
    /// effective degrees of freedom, whitening).
    pub(crate) fn factorize(&self, cov: &CovParams) -> Result<CovYFactor<'_>> {
        self.check_cov_shape(cov)?;
        cov.validate()?;
        self.factor_for(cov)
    }
}

#[derive(Debug)]
enum CovYRepr<'a> {
    Dense(DMatrix<f64>),
    Sparse(crate::sparse::SparseSym<'a>),
}

/// Assembled `Sigma_Y(theta)` with its factorization computed lazily on
/// first use.
#[derive(Debug)]
pub struct CovYMatrix<'a> {
    repr: CovYRepr<'a>,
    factor: OnceLock<CovYFactor<'a>>,
}

impl<'a> CovYMatrix<'a> {
    pub fn n(&self) -> usize {
        match &self.repr {
            CovYRepr::Dense(m) => m.nrows(),
            CovYRepr::Sparse(s) => s.template().n(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.repr, CovYRepr::Sparse(_))
    }

    /// Dense copy in the original observation order.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.repr {
            CovYRepr::Dense(m) => m.clone(),
            CovYRepr::Sparse(s) => s.to_dense(),
        }
    }

    /// Cholesky factor and log-determinant, computed on first call.
    pub fn factor(&self) -> Result<&CovYFactor<'a>> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let computed = self.compute_factor()?;
        Ok(self.factor.get_or_init(|| computed))
    }

    fn compute_factor(&self) -> Result<CovYFactor<'a>> {
        match &self.repr {
            CovYRepr::Dense(m) => dense_cholesky(m.clone()),
            CovYRepr::Sparse(s) => Ok(CovYFactor::Sparse(s.cholesky()?)),
        }
    }

    fn into_factor(self) -> Result<CovYFactor<'a>> {
        match self.repr {
            CovYRepr::Dense(m) => dense_cholesky(m),
            CovYRepr::Sparse(s) => Ok(CovYFactor::Sparse(s.cholesky()?)),
        }
    }
}

fn dense_cholesky(m: DMatrix<f64>) -> Result<CovYFactor<'static>> {
    let n = m.nrows();
    // keep the matrix only on the failure path, to name the failing pivot
    match Cholesky::new(m) {
        Some(c) => Ok(CovYFactor::Dense(c)),
        None => Err(Error::Numeric(format!(
            "dense Cholesky of Sigma_Y failed (matrix of order {n} is not \
             positive definite); this can only happen with a zero nugget"
        ))),
    }
}

/// Cholesky factorization of `Sigma_Y`, dense or sparse.
#[derive(Debug)]
pub enum CovYFactor<'a> {
    Dense(Cholesky<f64, Dyn>),
    Sparse(SparseChol<'a>),
}

impl CovYFactor<'_> {
    pub fn log_det(&self) -> f64 {
        match self {
            CovYFactor::Dense(c) => {
                2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
            }
            CovYFactor::Sparse(c) => c.log_det(),
        }
    }

    /// `Sigma^-1 b`.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            CovYFactor::Dense(c) => c.solve(b),
            CovYFactor::Sparse(c) => c.solve(b),
        }
    }

    /// `L^-1 b` (up to an internal row permutation on the sparse path);
    /// valid wherever only quadratic forms of the result are consumed.
    pub fn whiten_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            CovYFactor::Dense(c) => c.l_dirty().solve_lower_triangular(b).expect("nonsingular L"),
            CovYFactor::Sparse(c) => c.whiten(b),
        }
    }

    pub fn whiten_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            CovYFactor::Dense(c) => c.l_dirty().solve_lower_triangular(b).expect("nonsingular L"),
            CovYFactor::Sparse(c) => {
                let mut out = DMatrix::zeros(b.nrows(), b.ncols());
                for j in 0..b.ncols() {
                    let col = DVector::from_column_slice(b.column(j).as_slice());
                    out.set_column(j, &c.whiten(&col));
                }
                out
            }
        }
    }

    /// `tr Sigma^-1`.
    pub fn inv_trace(&self) -> f64 {
        match self {
            CovYFactor::Dense(c) => {
                // tr Sigma^-1 = sum of squared entries of L^-1
                let n = c.l_dirty().nrows();
                let inv_l = c
                    .l_dirty()
                    .solve_lower_triangular(&DMatrix::identity(n, n))
                    .expect("nonsingular L");
                inv_l.iter().map(|v| v * v).sum()
            }
            CovYFactor::Sparse(c) => c.inv_trace(),
        }
    }
}
