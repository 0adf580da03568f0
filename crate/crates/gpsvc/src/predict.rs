//! Empirical best linear unbiased prediction of the latent coefficient
//! surfaces, the response, and plug-in predictive variances.
//!
//! For a new location `s*`, each zero-mean surface is predicted by
//! `eta_k(s*) = c_k' Sigma_Y^-1 (y - X mu)` with `c_k[i] = w_i^k c_k(|s* - s_i|)`.
//! When new design rows are supplied, the response prediction adds the mean
//! part, and the predictive variance is the simple-kriging expression
//! `sum_{k,k'} W*_k W*_k' (c_k(0) 1{k=k'} - c_k' Sigma^-1 c_k') + tau2`;
//! cross-covariances between different surfaces vanish by prior independence.
//! The same tapered covariances used by the fit apply to the `c_k` vectors.

use crate::error::{Error, Result};
use crate::likelihood::LikelihoodEngine;
use crate::model::{point_distance, ParamVector};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct PredictionResult {
    /// `m x q` matrix of predicted zero-mean coefficient surfaces; mean
    /// effects are NOT added.
    pub eta: DMatrix<f64>,
    /// Response prediction, present when new design rows were supplied.
    pub y_hat: Option<DVector<f64>>,
    /// Plug-in predictive variance, aligned with `y_hat`.
    pub pred_var: Option<DVector<f64>>,
}

/// Predict the latent surfaces at `newlocs`; `new_x` and `new_w` must be
/// supplied together to additionally predict the response and its variance.
pub fn predict_svc(
    engine: &LikelihoodEngine,
    omega: &ParamVector,
    newlocs: &DMatrix<f64>,
    new_x: Option<&DMatrix<f64>>,
    new_w: Option<&DMatrix<f64>>,
) -> Result<PredictionResult> {
    let data = engine.data();
    let (n, p, q) = (data.n(), data.p(), data.q());
    if omega.p() != p || omega.q() != q {
        return Err(Error::Domain(format!(
            "parameter dimensions (p={}, q={}) do not match the data (p={p}, q={q})",
            omega.p(),
            omega.q()
        )));
    }
    omega.validate()?;
    if newlocs.ncols() != data.dim() {
        return Err(Error::Domain(format!(
            "new locations have dimension {}, the fit used {}",
            newlocs.ncols(),
            data.dim()
        )));
    }
    let m = newlocs.nrows();
    match (new_x, new_w) {
        (None, None) => {}
        (Some(x), Some(w)) => {
            if x.nrows() != m || w.nrows() != m {
                return Err(Error::Domain(format!(
                    "new design rows ({} and {}) do not match the {m} new locations",
                    x.nrows(),
                    w.nrows()
                )));
            }
            if x.ncols() != p {
                return Err(Error::Domain(format!(
                    "new fixed-effect matrix has {} columns, expected {p}",
                    x.ncols()
                )));
            }
            if w.ncols() != q {
                return Err(Error::Domain(format!(
                    "new random-effect matrix has {} columns, expected {q}",
                    w.ncols()
                )));
            }
        }
        _ => {
            return Err(Error::Domain(
                "newX and newW must be provided together or not at all".into(),
            ))
        }
    }

    let factor = engine.factorize(&omega.cov)?;
    let mu = DVector::from_column_slice(&omega.mu);
    let resid = data.y() - data.x() * &mu;
    let alpha = factor.solve_vec(&resid);

    let w_obs = data.w();
    let mut eta = DMatrix::zeros(m, q);
    let mut y_hat = new_x.map(|_| DVector::zeros(m));
    let mut pred_var = new_x.map(|_| DVector::zeros(m));

    let mut point = vec![0.0; data.dim()];
    let mut dists = vec![0.0; n];
    let mut c_cols: Vec<DVector<f64>> = vec![DVector::zeros(n); q];

    for i in 0..m {
        for (d, v) in point.iter_mut().enumerate() {
            *v = newlocs[(i, d)];
        }
        for (j, dj) in dists.iter_mut().enumerate() {
            *dj = point_distance(&point, data.locs(), j);
        }
        for (k, gp) in omega.cov.gps.iter().enumerate() {
            let ck = &mut c_cols[k];
            for j in 0..n {
                ck[j] = w_obs[(j, k)] * engine.gp_cov(gp, dists[j]);
            }
            eta[(i, k)] = ck.dot(&alpha);
        }
        if let (Some(nx), Some(nw)) = (new_x, new_w) {
            let mut mean = 0.0;
            for j in 0..p {
                mean += nx[(i, j)] * omega.mu[j];
            }
            let mut resp = mean;
            for k in 0..q {
                resp += nw[(i, k)] * eta[(i, k)];
            }
            y_hat.as_mut().unwrap()[i] = resp;

            // q solves against the factor, then the quadratic correction
            let solved: Vec<DVector<f64>> =
                c_cols.iter().map(|c| factor.solve_vec(c)).collect();
            let mut var = omega.cov.nugget;
            for k in 0..q {
                let wk = nw[(i, k)];
                var += wk * wk * omega.cov.gps[k].variance;
                for k2 in 0..q {
                    var -= wk * nw[(i, k2)] * c_cols[k].dot(&solved[k2]);
                }
            }
            pred_var.as_mut().unwrap()[i] = var;
        }
    }

    Ok(PredictionResult { eta, y_hat, pred_var })
}

/// The latent surfaces evaluated at the observation locations themselves;
/// feeds the conditional residuals of the fit summary.
pub fn fitted_random_effects(
    engine: &LikelihoodEngine,
    omega: &ParamVector,
) -> Result<DMatrix<f64>> {
    Ok(predict_svc(engine, omega, engine.data().locs(), None, None)?.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use crate::likelihood::KernelSpec;
    use crate::model::{CovParams, GpParams, SvcData};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn small_engine(seed: u64, n: usize, q: usize, kind: KernelKind) -> LikelihoodEngine {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut norm = || -> f64 { StandardNormal.sample(&mut rng) };
        let locs = DMatrix::from_fn(n, 1, |i, _| i as f64 * 0.7 + 0.1 * norm());
        let x = DMatrix::from_fn(n, q, |_, c| if c == 0 { 1.0 } else { norm() });
        let y = DVector::from_fn(n, |_, _| norm());
        let data = SvcData::new(y, x, None, locs).unwrap();
        LikelihoodEngine::new(data, KernelSpec::new(kind)).unwrap()
    }

    fn params(q: usize, variance: f64, nugget: f64) -> ParamVector {
        ParamVector {
            mu: vec![0.5; q],
            cov: CovParams {
                gps: (0..q)
                    .map(|_| GpParams { range: 1.0, variance })
                    .collect(),
                nugget,
            },
        }
    }

    #[test]
    fn zero_prior_variance_gives_zero_surfaces() {
        let engine = small_engine(1, 8, 2, KernelKind::Mat32);
        let omega = params(2, 0.0, 0.5);
        let newlocs = DMatrix::from_row_slice(3, 1, &[0.3, 2.0, 100.0]);
        let nx = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let nw = nx.clone();
        let out = predict_svc(&engine, &omega, &newlocs, Some(&nx), Some(&nw)).unwrap();
        assert_eq!(out.eta, DMatrix::zeros(3, 2));
        let y_hat = out.y_hat.unwrap();
        for i in 0..3 {
            let want = nx[(i, 0)] * 0.5 + nx[(i, 1)] * 0.5;
            assert_relative_eq!(y_hat[i], want, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_point_hand_solve() {
        // n = 2, q = 1, exp kernel; solve the 2x2 system by hand
        let data = SvcData::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            None,
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let engine = LikelihoodEngine::new(data, KernelSpec::new(KernelKind::Exp)).unwrap();
        let omega = ParamVector {
            mu: vec![1.5],
            cov: CovParams {
                gps: vec![GpParams { range: 1.0, variance: 1.0 }],
                nugget: 0.5,
            },
        };
        // Sigma_Y = [[1.5, e^-1], [e^-1, 1.5]], r = y - X mu = (-0.5, 0.5)
        let e1 = (-1.0_f64).exp();
        let det = 1.5 * 1.5 - e1 * e1;
        let alpha0 = (1.5 * -0.5 - e1 * 0.5) / det;
        let alpha1 = (1.5 * 0.5 - e1 * -0.5) / det;
        // predict at s* = 0.25: c = (e^-0.25, e^-0.75)
        let newlocs = DMatrix::from_row_slice(1, 1, &[0.25]);
        let out = predict_svc(&engine, &omega, &newlocs, None, None).unwrap();
        let want = (-0.25_f64).exp() * alpha0 + (-0.75_f64).exp() * alpha1;
        assert_relative_eq!(out.eta[(0, 0)], want, epsilon = 1e-12);
        assert!(out.y_hat.is_none());
    }

    #[test]
    fn tapered_prediction_vanishes_beyond_support() {
        let data = SvcData::new(
            DVector::from_vec(vec![1.0, -1.0, 0.5]),
            DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]),
            None,
            DMatrix::from_row_slice(3, 1, &[0.0, 0.4, 0.9]),
        )
        .unwrap();
        let engine = LikelihoodEngine::new(
            data,
            KernelSpec::with_taper_range(KernelKind::Exp, 1.0).unwrap(),
        )
        .unwrap();
        let omega = ParamVector {
            mu: vec![0.2],
            cov: CovParams {
                gps: vec![GpParams { range: 2.0, variance: 1.0 }],
                nugget: 0.3,
            },
        };
        // distance >= 1.0 from every observation
        let newlocs = DMatrix::from_row_slice(2, 1, &[2.5, -1.2]);
        let nx = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let out = predict_svc(&engine, &omega, &newlocs, Some(&nx), Some(&nx)).unwrap();
        assert_eq!(out.eta[(0, 0)], 0.0);
        assert_eq!(out.eta[(1, 0)], 0.0);
        // far away the variance is the prior variance plus nugget
        let pv = out.pred_var.unwrap();
        assert_relative_eq!(pv[0], 1.0 + 0.3, epsilon = 1e-14);
    }

    #[test]
    fn fitted_effects_equal_prediction_at_observations() {
        let engine = small_engine(7, 10, 2, KernelKind::Mat52);
        let omega = params(2, 1.3, 0.4);
        let fitted = fitted_random_effects(&engine, &omega).unwrap();
        let direct = predict_svc(&engine, &omega, engine.data().locs(), None, None).unwrap();
        assert_eq!(fitted, direct.eta);
    }

    #[test]
    fn linear_in_residuals() {
        let engine = small_engine(3, 9, 1, KernelKind::Exp);
        let omega = params(1, 0.8, 0.2);
        let newlocs = DMatrix::from_row_slice(2, 1, &[1.1, 3.3]);
        let base = predict_svc(&engine, &omega, &newlocs, None, None).unwrap();

        // doubling the residuals doubles the prediction: y' = 2y - X mu
        let data = engine.data();
        let mu = DVector::from_column_slice(&omega.mu);
        let xmu = data.x() * &mu;
        let y2 = data.y() * 2.0 - &xmu;
        let doubled = SvcData::new(
            y2,
            data.x().clone(),
            Some(data.w().clone()),
            data.locs().clone(),
        )
        .unwrap();
        let engine2 = LikelihoodEngine::new(doubled, *engine.kernel()).unwrap();
        let out2 = predict_svc(&engine2, &omega, &newlocs, None, None).unwrap();
        for i in 0..2 {
            assert_relative_eq!(out2.eta[(i, 0)], 2.0 * base.eta[(i, 0)], max_relative = 1e-10);
        }
    }

    #[test]
    fn prediction_is_locally_lipschitz_for_smooth_kernels() {
        let engine = small_engine(11, 12, 2, KernelKind::Mat32);
        let omega = params(2, 1.0, 0.3);
        let at = DMatrix::from_row_slice(1, 1, &[2.0]);
        let nudged = DMatrix::from_row_slice(1, 1, &[2.0 + 1e-8]);
        let a = predict_svc(&engine, &omega, &at, None, None).unwrap();
        let b = predict_svc(&engine, &omega, &nudged, None, None).unwrap();
        for k in 0..2 {
            assert!((a.eta[(0, k)] - b.eta[(0, k)]).abs() <= 1e-6);
        }
    }

    #[test]
    fn predictive_variance_bounded_below_by_nugget() {
        let engine = small_engine(13, 10, 2, KernelKind::Mat32);
        let omega = params(2, 0.9, 0.35);
        let newlocs = DMatrix::from_fn(7, 1, |i, _| i as f64 * 1.3 - 1.0);
        let nx = DMatrix::from_fn(7, 2, |i, j| if j == 0 { 1.0 } else { 0.3 * i as f64 });
        let out = predict_svc(&engine, &omega, &newlocs, Some(&nx), Some(&nx)).unwrap();
        for v in out.pred_var.unwrap().iter() {
            assert!(*v >= 0.35 - 1e-10, "pred var {v} below nugget");
        }
    }

    #[test]
    fn mismatched_new_design_errors() {
        let engine = small_engine(5, 6, 2, KernelKind::Exp);
        let omega = params(2, 1.0, 0.2);
        let newlocs = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let nx = DMatrix::from_row_slice(2, 2, &[1.0; 4]);
        assert!(predict_svc(&engine, &omega, &newlocs, Some(&nx), None).is_err());
        let wrong_rows = DMatrix::from_row_slice(3, 2, &[1.0; 6]);
        assert!(predict_svc(&engine, &omega, &newlocs, Some(&wrong_rows), Some(&wrong_rows)).is_err());
        let wrong_cols = DMatrix::from_row_slice(2, 3, &[1.0; 6]);
        assert!(predict_svc(&engine, &omega, &newlocs, Some(&wrong_cols), Some(&wrong_cols)).is_err());
    }
}
