//! Deterministic generator of the bundled quarterly growth-rate data set
//! (`data/us_growth.csv`).
//!
//! The file is synthetic: 187 quarters (1970 Q1 through 2016 Q3) of
//! consumption, income, production, savings, and unemployment growth rates,
//! generated from a varying-coefficient model with a known sparse ground
//! truth. Production carries no effect at all (zero mean coefficient, no
//! varying part) and unemployment carries a constant coefficient (no
//! varying part); the remaining coefficients drift over time as
//! exponential-kernel Gaussian processes. Covariates share two latent
//! business-cycle factors so their cross-correlations resemble real
//! macroeconomic growth series.
//!
//! A test asserts the checked-in CSV byte-matches this generator, so the
//! data's provenance lives in the repository.

use gpsvc::{sample_gp, KernelKind, KernelParams};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

pub const GROWTH_SEED: u64 = 29;
pub const GROWTH_N: usize = 187;

pub const GROWTH_HEADERS: [&str; 6] = [
    "quarter",
    "Consumption",
    "Income",
    "Production",
    "Savings",
    "Unemployment",
];

/// True coefficient configuration behind the bundled data: means and
/// (range, variance) of the varying parts, in column order intercept,
/// Income, Production, Savings, Unemployment.
pub const GROWTH_TRUE_MEANS: [f64; 5] = [0.13, 1.01, 0.0, -0.085, -0.072];
pub const GROWTH_TRUE_RANGES: [f64; 5] = [2.0, 2.5, 5.0, 8.0, 3.2];
pub const GROWTH_TRUE_VARIANCES: [f64; 5] = [0.008, 0.005, 0.0, 0.0015, 0.0];
pub const GROWTH_NOISE_SD: f64 = 0.05;

fn noise(seed: u64, seed_stream: u64, n: usize) -> DVector<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(seed_stream);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

fn gp(locs: &DMatrix<f64>, range: f64, variance: f64, seed: u64) -> DVector<f64> {
    let params = KernelParams::new(range, variance).expect("valid kernel parameters");
    sample_gp(locs, KernelKind::Exp, &params, seed).expect("GP draw")
}

/// Quarterly time axis and the five series, row major with the time stamp
/// first; column order matches [`GROWTH_HEADERS`].
pub fn us_growth_rows() -> Vec<Vec<f64>> {
    us_growth_rows_seeded(GROWTH_SEED)
}

pub fn us_growth_rows_seeded(seed: u64) -> Vec<Vec<f64>> {
    let n = GROWTH_N;
    let locs = DMatrix::from_fn(n, 1, |i, _| 1970.0 + 0.25 * i as f64);

    // latent business-cycle factors shared by the covariates
    let fast = gp(&locs, 1.5, 1.0, seed ^ 0xA1);
    let slow = gp(&locs, 6.0, 1.0, seed ^ 0xA2);

    let e_income = noise(seed, 11, n);
    let e_production = noise(seed, 12, n);
    let e_savings = noise(seed, 13, n);
    let e_unemployment = noise(seed, 14, n);
    let e_consumption = noise(seed, 15, n);

    let mut income = DVector::zeros(n);
    let mut production = DVector::zeros(n);
    let mut savings = DVector::zeros(n);
    let mut unemployment = DVector::zeros(n);
    for i in 0..n {
        income[i] = 0.72 + 0.30 * fast[i] + 0.20 * slow[i] + 0.40 * e_income[i];
        production[i] = 0.56 - 0.10 * slow[i] + 1.05 * e_production[i];
        savings[i] = 0.80 + 1.80 * fast[i] + 4.80 * e_savings[i];
        unemployment[i] = 0.01 - 0.18 * fast[i] + 0.22 * e_unemployment[i];
    }

    // varying coefficient surfaces over time
    let beta_intercept = gp(
        &locs,
        GROWTH_TRUE_RANGES[0],
        GROWTH_TRUE_VARIANCES[0],
        seed ^ 0xB1,
    );
    let beta_income = gp(
        &locs,
        GROWTH_TRUE_RANGES[1],
        GROWTH_TRUE_VARIANCES[1],
        seed ^ 0xB2,
    );
    let beta_savings = gp(
        &locs,
        GROWTH_TRUE_RANGES[3],
        GROWTH_TRUE_VARIANCES[3],
        seed ^ 0xB4,
    );

    (0..n)
        .map(|i| {
            let b1 = GROWTH_TRUE_MEANS[0] + beta_intercept[i];
            let b2 = GROWTH_TRUE_MEANS[1] + beta_income[i];
            let b4 = GROWTH_TRUE_MEANS[3] + beta_savings[i];
            let b5 = GROWTH_TRUE_MEANS[4];
            let consumption = b1
                + b2 * income[i]
                + b4 * savings[i]
                + b5 * unemployment[i]
                + GROWTH_NOISE_SD * e_consumption[i];
            vec![
                locs[(i, 0)],
                consumption,
                income[i],
                production[i],
                savings[i],
                unemployment[i],
            ]
        })
        .collect()
}

/// The full CSV text of the bundled data set.
pub fn us_growth_csv() -> String {
    let mut out = GROWTH_HEADERS.join(",");
    out.push('\n');
    for row in us_growth_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
