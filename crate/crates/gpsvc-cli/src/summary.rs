//! Human-readable fit report printed on standard output.

use crate::commands::distinct_locations;
use crate::io::{quantile, render_table, FitDocument};
use gpsvc::{FitResult, LikelihoodEngine};
use std::fmt::Write;

fn fmt_or_na(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) => format!("{x:.digits$}"),
        None => "NA".to_string(),
    }
}

pub fn render_fit_summary(fit: &FitResult, engine: &LikelihoodEngine, doc: &FitDocument) -> String {
    let data = engine.data();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Fitting a GP-based SVC model with {} fixed effect(s) and {} SVC(s)",
        data.p(),
        data.q()
    );
    let _ = writeln!(
        out,
        "using {} observations at {} different locations / coordinates.\n",
        data.n(),
        distinct_locations(data.locs())
    );

    let mut sorted: Vec<f64> = fit.residuals.iter().copied().collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let _ = writeln!(out, "Residuals:");
    out.push_str(&render_table(&[
        ["Min.", "1st Qu.", "Median", "3rd Qu.", "Max."]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|p| format!("{:.6}", quantile(&sorted, *p)))
            .collect(),
    ]));
    let _ = writeln!(out, "\nResidual standard error: {:.4}", fit.residual_se);
    let _ = writeln!(
        out,
        "Multiple R-squared: {:.4}, BIC: {:.1}\n",
        fit.r_squared, fit.bic
    );

    let _ = writeln!(out, "Coefficients of fixed effect(s):");
    let mut rows = vec![["", "Estimate", "Std. Error", "Z value", "Pr(>|Z|)"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for (j, name) in doc.fixed_names.iter().enumerate() {
        let se = fit.std_errors.mu[j];
        let test = fit.tests.fixed[j];
        rows.push(vec![
            name.clone(),
            format!("{:.6}", fit.estimates.mu[j]),
            fmt_or_na(se, 6),
            fmt_or_na(test.map(|t| t.z), 3),
            fmt_or_na(test.map(|t| t.p_value), 5),
        ]);
    }
    out.push_str(&render_table(&rows));

    let _ = writeln!(out, "\nCovariance parameters of the SVC(s):");
    let mut rows = vec![["", "Estimate", "Std. Error", "W value", "Pr(>W)"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for (k, name) in doc.random_names.iter().enumerate() {
        let gp = &fit.estimates.cov.gps[k];
        rows.push(vec![
            format!("{name}.range"),
            format!("{:.6}", gp.range),
            fmt_or_na(fit.std_errors.ranges[k], 6),
            "NA".to_string(),
            "NA".to_string(),
        ]);
        let test = fit.tests.variances[k];
        rows.push(vec![
            format!("{name}.var"),
            format!("{:.6}", gp.variance),
            fmt_or_na(fit.std_errors.variances[k], 6),
            fmt_or_na(test.map(|t| t.w), 3),
            fmt_or_na(test.map(|t| t.p_value), 5),
        ]);
    }
    rows.push(vec![
        "nugget.var".to_string(),
        format!("{:.6}", fit.estimates.cov.nugget),
        fmt_or_na(fit.std_errors.nugget, 6),
        "NA".to_string(),
        "NA".to_string(),
    ]);
    out.push_str(&render_table(&rows));

    let _ = writeln!(
        out,
        "\nThe covariance parameters were estimated using\n{} covariance functions.",
        doc.kernel
    );
    match doc.taper_range {
        None => {
            let _ = writeln!(out, "No covariance tapering applied.");
        }
        Some(r) => {
            let _ = writeln!(out, "Covariance tapering applied with taper range {r}.");
        }
    }

    let _ = writeln!(out, "\nMLE:");
    let _ = writeln!(
        out,
        "The MLE terminated after {} function evaluations with convergence code {}",
        fit.n_evals, fit.convergence
    );
    let _ = writeln!(out, "(0 meaning that the optimization was successful).");
    let _ = writeln!(
        out,
        "The final {}log likelihood value is {:.1}.",
        if fit.profile { "profile " } else { "" },
        -0.5 * fit.neg2_log_lik
    );
    out
}
