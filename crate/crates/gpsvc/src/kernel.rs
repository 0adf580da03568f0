//! Closed-form isotropic correlation and covariance functions, plus tapering.
//!
//! Every covariance factors as `c(u) = sigma2 * r(u / range)` with `r` one of
//! six correlation families. The spherical and both Wendland families are
//! compactly supported: `r(h) = 0` for all `h >= 1`, exactly.

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// The supported correlation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// `exp(-h)`, Matern with smoothness 1/2.
    Exp,
    /// `(1 + sqrt(3) h) exp(-sqrt(3) h)`, Matern with smoothness 3/2.
    Mat32,
    /// `(1 + sqrt(5) h + 5 h^2 / 3) exp(-sqrt(5) h)`, Matern with smoothness 5/2.
    Mat52,
    /// Spherical: `1 - 3h/2 + h^3/2` on `[0, 1)`, zero beyond.
    Sph,
    /// Wendland kappa = 1: `(1-h)^4 (4h + 1)` on `[0, 1)`, zero beyond.
    Wend1,
    /// Wendland kappa = 2: `(1-h)^6 (35h^2/3 + 6h + 1)` on `[0, 1)`, zero beyond.
    Wend2,
}

pub const ALL_KERNELS: [KernelKind; 6] = [
    KernelKind::Exp,
    KernelKind::Mat32,
    KernelKind::Mat52,
    KernelKind::Sph,
    KernelKind::Wend1,
    KernelKind::Wend2,
];

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Exp => "exp",
            KernelKind::Mat32 => "mat32",
            KernelKind::Mat52 => "mat52",
            KernelKind::Sph => "sph",
            KernelKind::Wend1 => "wend1",
            KernelKind::Wend2 => "wend2",
        }
    }

    /// Whether `r(h) = 0` for all `h >= 1`.
    pub fn is_compact(self) -> bool {
        matches!(self, KernelKind::Sph | KernelKind::Wend1 | KernelKind::Wend2)
    }

    /// Default taper family paired with this kernel. The taper must be at
    /// least as smooth at the origin as the base kernel, so the rougher
    /// families pair with Wendland kappa = 1 and the smoother Matern
    /// families with kappa = 2.
    pub fn default_taper(self) -> KernelKind {
        match self {
            KernelKind::Exp | KernelKind::Sph | KernelKind::Wend1 => KernelKind::Wend1,
            KernelKind::Mat32 | KernelKind::Mat52 | KernelKind::Wend2 => KernelKind::Wend2,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(KernelKind::Exp),
            "mat32" => Ok(KernelKind::Mat32),
            "mat52" => Ok(KernelKind::Mat52),
            "sph" => Ok(KernelKind::Sph),
            "wend1" => Ok(KernelKind::Wend1),
            "wend2" => Ok(KernelKind::Wend2),
            other => Err(Error::Domain(format!(
                "unknown kernel '{other}' (expected one of exp, mat32, mat52, sph, wend1, wend2)"
            ))),
        }
    }
}

/// Range and partial sill of one Gaussian process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Correlation range `rho > 0`, in the units of the locations.
    pub range: f64,
    /// Process variance `sigma2 >= 0`, in squared response units.
    pub variance: f64,
}

impl KernelParams {
    pub fn new(range: f64, variance: f64) -> Result<Self> {
        if !(range > 0.0) {
            return Err(Error::Domain(format!("kernel range must be > 0, got {range}")));
        }
        if !(variance >= 0.0) {
            return Err(Error::Domain(format!(
                "kernel variance must be >= 0, got {variance}"
            )));
        }
        Ok(Self { range, variance })
    }
}

/// A compactly supported taper: the base covariance is multiplied by
/// `r_taper(u / taper_range)`, which vanishes for `u >= taper_range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaperSpec {
    pub range: f64,
    pub kind: KernelKind,
}

impl TaperSpec {
    pub fn new(range: f64, kind: KernelKind) -> Result<Self> {
        if !(range > 0.0) {
            return Err(Error::Domain(format!("taper range must be > 0, got {range}")));
        }
        if !kind.is_compact() {
            return Err(Error::Domain(format!(
                "taper kernel must be compactly supported (sph, wend1, wend2), got {kind}"
            )));
        }
        Ok(Self { range, kind })
    }

    /// Taper with the default compact family paired to `base`.
    pub fn for_kernel(range: f64, base: KernelKind) -> Result<Self> {
        Self::new(range, base.default_taper())
    }
}

/// Correlation function on scaled distance `h >= 0`; hot path, no domain check.
#[inline]
pub(crate) fn corr_unchecked(kind: KernelKind, h: f64) -> f64 {
    debug_assert!(h >= 0.0);
    match kind {
        KernelKind::Exp => (-h).exp(),
        KernelKind::Mat32 => {
            let a = crate::SQRT_3 * h;
            (1.0 + a) * (-a).exp()
        }
        KernelKind::Mat52 => {
            let a = crate::SQRT_5 * h;
            (1.0 + a + 5.0 * h * h / 3.0) * (-a).exp()
        }
        KernelKind::Sph => {
            if h >= 1.0 {
                0.0
            } else {
                1.0 - 1.5 * h + 0.5 * h * h * h
            }
        }
        KernelKind::Wend1 => {
            if h >= 1.0 {
                0.0
            } else {
                let b = 1.0 - h;
                let b2 = b * b;
                b2 * b2 * (4.0 * h + 1.0)
            }
        }
        KernelKind::Wend2 => {
            if h >= 1.0 {
                0.0
            } else {
                let b = 1.0 - h;
                let b2 = b * b;
                b2 * b2 * b2 * (35.0 * h * h / 3.0 + 6.0 * h + 1.0)
            }
        }
    }
}

/// Correlation `r(h)` at scaled distance `h >= 0`.
pub fn correlation(kind: KernelKind, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::Domain(format!(
            "correlation distance must be >= 0, got {h}"
        )));
    }
    Ok(corr_unchecked(kind, h))
}

/// Covariance `c(u) = sigma2 * r(u / range)` at distance `u >= 0`.
pub fn covariance(kind: KernelKind, params: &KernelParams, u: f64) -> Result<f64> {
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
    Ok(params.variance * correlation(kind, u / params.range)?)
}

/// Tapered covariance `c(u) * r_taper(u / taper_range)`; exactly zero for
/// `u >= taper_range`.
pub fn tapered_covariance(
    kind: KernelKind,
    params: &KernelParams,
    taper: &TaperSpec,
    u: f64,
) -> Result<f64> {
    let base = covariance(kind, params, u)?;
    Ok(base * correlation(taper.kind, u / taper.range)?)
}
