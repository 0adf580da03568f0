//! Cross-module behavior of the estimation pipeline.

use gpsvc::{
    fit_mle, pairwise_distances, sample_full_svc, sample_uniform_locs, CovParams, FdScheme,
    KernelKind, KernelSpec, LikelihoodEngine, MleControl, ParamVector, SvcData,
};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

fn paper_scale_instance(seed: u64, n: usize) -> gpsvc::SvcTruth {
    let locs = sample_uniform_locs(n, 1, 0.0, 10.0, seed).unwrap();
    sample_full_svc(
        &[1.0, 2.0],
        &[2.0, 1.0],
        &[0.5, 1.0],
        0.5,
        &locs,
        KernelKind::Mat32,
        seed,
    )
    .unwrap()
}

#[test]
fn covariance_matrices_admit_jitter_free_cholesky() {
    // spread random point sets, every kernel family, no jitter
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    for trial in 0..4 {
        let n = 8 + 3 * trial;
        let locs = DMatrix::from_fn(n, 2, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            3.0 * z
        });
        let dist = pairwise_distances(&locs);
        for kind in gpsvc::kernel::ALL_KERNELS {
            let m = DMatrix::from_fn(n, n, |i, j| {
                gpsvc::correlation(kind, dist.get(i, j) / 1.2).unwrap()
            });
            assert!(
                Cholesky::new(m).is_some(),
                "{kind} correlation matrix not PD at n={n}"
            );
        }
    }
}

#[test]
fn profile_and_full_likelihood_fits_agree() {
    let truth = paper_scale_instance(42, 80);
    let kernel = KernelSpec::new(KernelKind::Mat32);
    let profile_fit = {
        let control = MleControl { profile: true, ..MleControl::new(kernel) };
        fit_mle(truth.data.clone(), &control).unwrap().0
    };
    let full_fit = {
        let control = MleControl {
            profile: false,
            max_iter: 300,
            ..MleControl::new(kernel)
        };
        fit_mle(truth.data.clone(), &control).unwrap().0
    };
    assert_eq!(profile_fit.convergence, 0, "{}", profile_fit.message);
    assert_eq!(full_fit.convergence, 0, "{}", full_fit.message);

    let tp = profile_fit.estimates.cov.to_vec();
    let tf = full_fit.estimates.cov.to_vec();
    for i in 0..tp.len() {
        let denom = tp[i].abs().max(tf[i].abs()).max(1e-8);
        assert!(
            (tp[i] - tf[i]).abs() / denom <= 1e-2,
            "theta[{i}] differs: {} vs {}",
            tp[i],
            tf[i]
        );
    }
    assert!(
        (profile_fit.neg2_log_lik - full_fit.neg2_log_lik).abs() <= 1e-3,
        "-2logL differ: {} vs {}",
        profile_fit.neg2_log_lik,
        full_fit.neg2_log_lik
    );
}

#[test]
fn paper_shape_run_converges_within_budget() {
    // n = 300, Matern 3/2, profile likelihood: optimizer succeeds with
    // convergence code 0 in at most 200 objective evaluations
    let truth = paper_scale_instance(123, 300);
    let control = MleControl {
        profile: true,
        ..MleControl::new(KernelSpec::new(KernelKind::Mat32))
    };
    let (fit, _) = fit_mle(truth.data, &control).unwrap();
    assert_eq!(fit.convergence, 0, "{}", fit.message);
    assert!(
        fit.n_evals <= 200,
        "took {} objective evaluations",
        fit.n_evals
    );
    // reported parameters stay in plausible territory
    assert!(fit.estimates.cov.nugget > 0.0);
    assert!(fit.r_squared > 0.5);
}

#[test]
fn fit_is_bitwise_deterministic_across_thread_counts() {
    let truth = paper_scale_instance(7, 120);
    let run = |threads: usize, scheme: FdScheme| {
        let control = MleControl {
            profile: true,
            threads,
            scheme,
            ..MleControl::new(KernelSpec::new(KernelKind::Mat32))
        };
        fit_mle(truth.data.clone(), &control).unwrap().0
    };
    for scheme in [FdScheme::Central, FdScheme::Forward] {
        let a = run(1, scheme);
        let b = run(4, scheme);
        assert_eq!(a.estimates.mu, b.estimates.mu);
        assert_eq!(a.estimates.cov.to_vec(), b.estimates.cov.to_vec());
        assert_eq!(a.neg2_log_lik.to_bits(), b.neg2_log_lik.to_bits());
        assert_eq!(a.n_evals, b.n_evals);
    }
}

#[test]
fn tapered_fit_tracks_dense_fit_when_taper_exceeds_diameter() {
    let truth = paper_scale_instance(3, 60);
    let dense_engine =
        LikelihoodEngine::new(truth.data.clone(), KernelSpec::new(KernelKind::Mat32)).unwrap();
    let max_dist = dense_engine.dist().max();
    let omega = truth.params.clone();
    let dense_val = dense_engine.neg2_log_lik(&omega).unwrap();

    let taper_engine = LikelihoodEngine::new(
        truth.data.clone(),
        KernelSpec::with_taper_range(KernelKind::Mat32, max_dist * 1e9).unwrap(),
    )
    .unwrap();
    let taper_val = taper_engine.neg2_log_lik(&omega).unwrap();
    assert!(
        ((dense_val - taper_val) / dense_val).abs() <= 1e-8,
        "dense {dense_val} vs tapered {taper_val}"
    );
}

#[test]
fn relaxed_hessian_probe_handles_boundary_estimates() {
    // a fit whose variance lands at zero still produces a usable report:
    // absent standard errors rather than a panic
    let locs = sample_uniform_locs(50, 1, 0.0, 10.0, 31).unwrap();
    let truth =
        sample_full_svc(&[1.5], &[0.0], &[1.0], 0.2, &locs, KernelKind::Exp, 31).unwrap();
    let control = MleControl {
        profile: true,
        ..MleControl::new(KernelSpec::new(KernelKind::Exp))
    };
    let (fit, _) = fit_mle(truth.data, &control).unwrap();
    // the model cannot identify a range for a zero-variance process; either
    // the SE is absent or finite, but never NaN
    for se in fit.std_errors.ranges.iter().flatten() {
        assert!(se.is_finite());
    }
    for t in fit.tests.variances.iter().flatten() {
        assert!((0.0..=1.0).contains(&t.p_value));
    }
}

#[test]
fn engine_rejects_mismatched_parameter_shapes() {
    let truth = paper_scale_instance(9, 20);
    let engine =
        LikelihoodEngine::new(truth.data.clone(), KernelSpec::new(KernelKind::Mat32)).unwrap();
    // wrong q
    let bad = ParamVector {
        mu: truth.params.mu.clone(),
        cov: CovParams {
            gps: vec![truth.params.cov.gps[0]],
            nugget: 0.1,
        },
    };
    assert!(engine.neg2_log_lik(&bad).is_err());
    // wrong p
    let bad_p = ParamVector {
        mu: vec![1.0],
        cov: truth.params.cov.clone(),
    };
    assert!(engine.neg2_log_lik(&bad_p).is_err());
}

#[test]
fn validation_failures_surface_through_fit() {
    let y = DVector::from_vec(vec![1.0, 2.0, f64::NAN]);
    let x = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
    let locs = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
    let err = SvcData::new(y, x, None, locs).unwrap_err();
    assert!(err.to_string().contains("non-finite"));
}
