//! Batch frontend: simulate | fit | predict | select.
//!
//! Every subcommand exits 0 on success and nonzero with a single
//! `error: ...` line on standard error otherwise.

use clap::{Args, Parser, Subcommand, ValueEnum};
use gpsvc::{IcType, KernelKind};
use gpsvc_cli::commands::{
    cmd_fit, cmd_predict, cmd_select, cmd_simulate, ColumnRoles, FitConfig, PredictConfig,
    SelectConfig, SelectMethod, SimulateConfig,
};
use gpsvc_cli::io::{parse_numeric_list, CliResult};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gpsvc",
    about = "Gaussian-process-based varying-coefficient regression",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Exp,
    Mat32,
    Mat52,
    Sph,
    Wend1,
    Wend2,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Exp => KernelKind::Exp,
            KernelArg::Mat32 => KernelKind::Mat32,
            KernelArg::Mat52 => KernelKind::Mat52,
            KernelArg::Sph => KernelKind::Sph,
            KernelArg::Wend1 => KernelKind::Wend1,
            KernelArg::Wend2 => KernelKind::Wend2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Grid,
    Mbo,
}

#[derive(Clone, Copy, ValueEnum)]
enum IcArg {
    Bic,
    Caic,
}

#[derive(Args)]
struct ModelArgs {
    /// Input data CSV
    #[arg(long)]
    data: PathBuf,
    /// Response column name
    #[arg(long)]
    response: String,
    /// Fixed-effect column names, comma separated
    #[arg(long, value_delimiter = ',')]
    fixed: Vec<String>,
    /// Random-effect column names; defaults to the fixed-effect list
    #[arg(long, value_delimiter = ',')]
    random: Option<Vec<String>>,
    /// Location column names, comma separated
    #[arg(long, value_delimiter = ',')]
    locs: Vec<String>,
    /// Covariance kernel
    #[arg(long, value_enum, default_value = "exp")]
    kernel: KernelArg,
    /// Taper range; enables the sparse covariance path
    #[arg(long)]
    taper: Option<f64>,
    /// Optimize the profile likelihood
    #[arg(long)]
    profile: bool,
    /// Worker threads (results are independent of this setting)
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Random seed (consumed by seeded subcommands)
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Optimizer iteration cap
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Lower bounds, comma separated (theta layout under --profile,
    /// means-then-theta otherwise)
    #[arg(long)]
    lower: Option<String>,
    /// Initial values, comma separated
    #[arg(long)]
    init: Option<String>,
    /// Upper bounds, comma separated
    #[arg(long)]
    upper: Option<String>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

impl ModelArgs {
    fn roles(&self) -> CliResult<ColumnRoles> {
        if self.fixed.is_empty() {
            return Err("at least one --fixed column is required".into());
        }
        if self.locs.is_empty() {
            return Err("at least one --locs column is required".into());
        }
        Ok(ColumnRoles {
            response: self.response.clone(),
            fixed: self.fixed.clone(),
            random: self.random.clone(),
            locs: self.locs.clone(),
        })
    }

    fn bound_list(&self, text: &Option<String>) -> CliResult<Option<Vec<f64>>> {
        text.as_ref().map(|t| parse_numeric_list(t)).transpose()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic SVC data set
    Simulate {
        /// Number of observations
        #[arg(long)]
        n: usize,
        /// Dimension of the location domain
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Uniform location domain as lo:hi
        #[arg(long, default_value = "0:10")]
        domain: String,
        /// True coefficient means, comma separated
        #[arg(long)]
        means: String,
        /// True process variances, comma separated
        #[arg(long)]
        variances: String,
        /// True process ranges, comma separated
        #[arg(long)]
        ranges: String,
        /// Noise standard deviation
        #[arg(long)]
        nugget_sd: f64,
        #[arg(long, value_enum, default_value = "exp")]
        kernel: KernelArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximum likelihood fit; writes fit.json and residuals.csv
    Fit(ModelArgs),
    /// EBLUP prediction at new locations from a stored fit
    Predict {
        /// CSV of new locations (same location column names as the fit);
        /// include the fit's covariate columns to also predict the response
        #[arg(long)]
        data: PathBuf,
        /// Path to fit.json written by the fit subcommand
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Penalized-likelihood variable selection over a shrinkage grid or by
    /// surrogate-model optimization
    Select {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "grid")]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "bic")]
        ic: IcArg,
        /// Lower edge of the shrinkage search box
        #[arg(long, default_value_t = 1e-3)]
        lambda_min: f64,
        /// Upper edge of the shrinkage search box
        #[arg(long, default_value_t = 1.0)]
        lambda_max: f64,
        /// Grid points per dimension (grid method)
        #[arg(long, default_value_t = 10)]
        n_per_dim: usize,
        /// Initial design size (mbo method)
        #[arg(long, default_value_t = 5)]
        n_init: usize,
        /// Surrogate iterations (mbo method)
        #[arg(long, default_value_t = 15)]
        n_iter: usize,
    },
}

fn parse_domain(text: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        return Err(format!("domain must be lo:hi, got '{text}'").into());
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("domain lower bound '{}' is not a number", parts[0]))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("domain upper bound '{}' is not a number", parts[1]))?;
    Ok((lo, hi))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate {
            n,
            dim,
            domain,
            means,
            variances,
            ranges,
            nugget_sd,
            kernel,
            seed,
            out,
        } => cmd_simulate(&SimulateConfig {
            n,
            dim,
            domain: parse_domain(&domain)?,
            means: parse_numeric_list(&means)?,
            variances: parse_numeric_list(&variances)?,
            ranges: parse_numeric_list(&ranges)?,
            nugget_sd,
            kernel: kernel.into(),
            seed,
            out,
        }),
        Command::Fit(model) => {
            let config = FitConfig {
                data: model.data.clone(),
                roles: model.roles()?,
                kernel: model.kernel.into(),
                taper: model.taper,
                profile: model.profile,
                threads: model.threads,
                max_iter: model.max_iter,
                lower: model.bound_list(&model.lower)?,
                init: model.bound_list(&model.init)?,
                upper: model.bound_list(&model.upper)?,
                out: model.out.clone(),
            };
            cmd_fit(&config)
        }
        Command::Predict { data, fit, out } => cmd_predict(&PredictConfig { data, fit, out }),
        Command::Select {
            model,
            method,
            ic,
            lambda_min,
            lambda_max,
            n_per_dim,
            n_init,
            n_iter,
        } => {
            let config = SelectConfig {
                data: model.data.clone(),
                roles: model.roles()?,
                kernel: model.kernel.into(),
                taper: model.taper,
                profile: model.profile,
                threads: model.threads,
                max_iter: model.max_iter,
                lower: model.bound_list(&model.lower)?,
                init: model.bound_list(&model.init)?,
                upper: model.bound_list(&model.upper)?,
                method: match method {
                    MethodArg::Grid => SelectMethod::Grid,
                    MethodArg::Mbo => SelectMethod::Mbo,
                },
                ic: match ic {
                    IcArg::Bic => IcType::Bic,
                    IcArg::Caic => IcType::CaicVb,
                },
                lambda_min,
                lambda_max,
                n_per_dim,
                n_init,
                n_iter,
                seed: model.seed,
                out: model.out.clone(),
            };
            cmd_select(&config)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
