//! CSV and JSON input/output for the command-line frontend.
//!
//! CSVs carry a header row, comma delimiters, `.` decimals, UTF-8, and
//! purely numeric payloads. JSON documents are versioned through a
//! `schema_version` field. All numbers are written in shortest round-trip
//! form so identical runs produce byte-identical files.

use gpsvc::{CovParams, FitResult, GpParams, ParamVector, SvcData};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;
pub type CliResult<T> = Result<T, BoxError>;

fn err(msg: impl Into<String>) -> BoxError {
    msg.into().into()
}

/// A fully numeric table read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    /// Row-major cells; every row has `headers.len()` entries.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| err(format!("column '{name}' not found in CSV header")))
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    /// Columns by name, as a dense matrix in the given order.
    pub fn matrix(&self, names: &[String]) -> CliResult<DMatrix<f64>> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<CliResult<_>>()?;
        Ok(DMatrix::from_fn(self.n_rows(), idx.len(), |r, c| {
            self.rows[r][idx[c]]
        }))
    }
}

/// Parse a numeric CSV from any reader. Errors name the offending row and
/// column; rows are 1-based counting the header.
pub fn read_table(reader: impl Read) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| err(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(err("CSV header is empty"));
    }
    let width = headers.len();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| err(format!("CSV row {}: {e}", i + 2)))?;
        if record.len() != width {
            return Err(err(format!(
                "CSV row {} has {} fields, header has {width}",
                i + 2,
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(width);
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                err(format!(
                    "CSV row {}, column '{}': cannot parse '{}' as a number",
                    i + 2,
                    headers[j],
                    field
                ))
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

pub fn read_table_file(path: &Path) -> CliResult<Table> {
    let file = std::fs::File::open(path)
        .map_err(|e| err(format!("cannot open {}: {e}", path.display())))?;
    read_table(file).map_err(|e| err(format!("{}: {e}", path.display())))
}

/// Comma-separated numeric list; `inf` and `-inf` are accepted for bounds.
pub fn parse_numeric_list(text: &str) -> CliResult<Vec<f64>> {
    if text.trim().is_empty() {
        return Err(err("empty numeric list"));
    }
    text.split(',')
        .enumerate()
        .map(|(i, tok)| {
            let tok = tok.trim();
            let value: f64 = tok
                .parse()
                .map_err(|_| err(format!("entry {} ('{tok}') is not a number", i + 1)))?;
            if value.is_nan() {
                return Err(err(format!("entry {} is NaN", i + 1)));
            }
            Ok(value)
        })
        .collect()
}

/// Shortest round-trip decimal form; keeps CSV output byte-deterministic.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_csv(path: &Path, headers: &[String], rows: &[Vec<f64>]) -> CliResult<()> {
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| err(format!("cannot write {}: {e}", path.display())))
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatesDoc {
    pub mu: Vec<f64>,
    pub ranges: Vec<f64>,
    pub variances: Vec<f64>,
    pub nugget: f64,
}

impl EstimatesDoc {
    pub fn from_params(p: &ParamVector) -> Self {
        Self {
            mu: p.mu.clone(),
            ranges: p.cov.gps.iter().map(|g| g.range).collect(),
            variances: p.cov.gps.iter().map(|g| g.variance).collect(),
            nugget: p.cov.nugget,
        }
    }

    pub fn to_params(&self) -> CliResult<ParamVector> {
        if self.ranges.len() != self.variances.len() {
            return Err(err("ranges and variances have different lengths"));
        }
        Ok(ParamVector {
            mu: self.mu.clone(),
            cov: CovParams {
                gps: self
                    .ranges
                    .iter()
                    .zip(&self.variances)
                    .map(|(r, v)| GpParams { range: *r, variance: *v })
                    .collect(),
                nugget: self.nugget,
            },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StdErrorsDoc {
    pub mu: Vec<Option<f64>>,
    pub ranges: Vec<Option<f64>>,
    pub variances: Vec<Option<f64>>,
    pub nugget: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZTestDoc {
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaldTestDoc {
    pub w: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestsDoc {
    pub fixed: Vec<Option<ZTestDoc>>,
    pub variances: Vec<Option<WaldTestDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingDoc {
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub locs: Vec<Vec<f64>>,
}

/// Everything a later `predict` invocation needs, written by `fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub kernel: String,
    pub taper_range: Option<f64>,
    pub profile: bool,
    pub response: String,
    pub fixed_names: Vec<String>,
    pub random_names: Vec<String>,
    pub loc_names: Vec<String>,
    pub estimates: EstimatesDoc,
    pub std_errors: StdErrorsDoc,
    pub tests: TestsDoc,
    pub neg2_log_lik: f64,
    pub log_lik: f64,
    pub n_evals: usize,
    pub n_grad_evals: usize,
    pub convergence_code: i32,
    pub residual_se: f64,
    pub r_squared: f64,
    pub bic: f64,
    pub training: TrainingDoc,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>], what: &str) -> CliResult<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(err(format!("{what} is empty")));
    }
    let cols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(err(format!("{what} row {i} has {} entries, expected {cols}", r.len())));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl FitDocument {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fit: &FitResult,
        data: &SvcData,
        kernel: &str,
        taper_range: Option<f64>,
        response: &str,
        fixed_names: &[String],
        random_names: &[String],
        loc_names: &[String],
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kernel: kernel.to_string(),
            taper_range,
            profile: fit.profile,
            response: response.to_string(),
            fixed_names: fixed_names.to_vec(),
            random_names: random_names.to_vec(),
            loc_names: loc_names.to_vec(),
            estimates: EstimatesDoc::from_params(&fit.estimates),
            std_errors: StdErrorsDoc {
                mu: fit.std_errors.mu.clone(),
                ranges: fit.std_errors.ranges.clone(),
                variances: fit.std_errors.variances.clone(),
                nugget: fit.std_errors.nugget,
            },
            tests: TestsDoc {
                fixed: fit
                    .tests
                    .fixed
                    .iter()
                    .map(|t| t.map(|t| ZTestDoc { z: t.z, p_value: t.p_value }))
                    .collect(),
                variances: fit
                    .tests
                    .variances
                    .iter()
                    .map(|t| t.map(|t| WaldTestDoc { w: t.w, p_value: t.p_value }))
                    .collect(),
            },
            neg2_log_lik: fit.neg2_log_lik,
            log_lik: -0.5 * fit.neg2_log_lik,
            n_evals: fit.n_evals,
            n_grad_evals: fit.n_grad_evals,
            convergence_code: fit.convergence,
            residual_se: fit.residual_se,
            r_squared: fit.r_squared,
            bic: fit.bic,
            training: TrainingDoc {
                y: data.y().iter().copied().collect(),
                x: matrix_rows(data.x()),
                w: matrix_rows(data.w()),
                locs: matrix_rows(data.locs()),
            },
        }
    }

    pub fn from_json(bytes: &[u8]) -> CliResult<Self> {
        let doc: FitDocument =
            serde_json::from_slice(bytes).map_err(|e| err(format!("invalid fit.json: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(err(format!(
                "fit.json has schema version {}, this build reads {SCHEMA_VERSION}",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn training_data(&self) -> CliResult<SvcData> {
        let y = DVector::from_vec(self.training.y.clone());
        let x = rows_matrix(&self.training.x, "training.x")?;
        let w = rows_matrix(&self.training.w, "training.w")?;
        let locs = rows_matrix(&self.training.locs, "training.locs")?;
        SvcData::new(y, x, Some(w), locs).map_err(|e| err(e.to_string()))
    }
}

/// Generating configuration persisted by `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateDocument {
    pub schema_version: u32,
    pub kernel: String,
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
    pub domain: [f64; 2],
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub ranges: Vec<f64>,
    pub nugget_sd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleAnchorDoc {
    pub estimates: EstimatesDoc,
    pub neg2_log_lik: f64,
    pub ic: f64,
}

/// Outcome of the shrinkage search, written by `select`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedDocument {
    pub schema_version: u32,
    pub method: String,
    pub ic_type: String,
    pub lambda_mu: f64,
    pub lambda_theta: f64,
    pub ic: f64,
    pub estimates: EstimatesDoc,
    pub mle: MleAnchorDoc,
    pub notes: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| err(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| err(format!("cannot write {}: {e}", path.display())))
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Render a padded text table; column 0 is left aligned, the rest right.
pub fn render_table(rows: &[Vec<String>]) -> String {
    if rows.is_empty() {
        return String::new();
    }
    let cols = rows[0].len();
    let mut widths = vec![0usize; cols];
    for row in rows {
        for (j, cell) in row.iter().enumerate() {
            widths[j] = widths[j].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        for (j, cell) in row.iter().enumerate() {
            if j == 0 {
                let _ = write!(out, "{cell:<width$}", width = widths[j]);
            } else {
                let _ = write!(out, "  {cell:>width$}", width = widths[j]);
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn read_simple_csv() {
        let csv = "y,x1,loc1\n1.0,2.0,0.5\n-3,4.5e-1,1.5\n";
        let t = read_table(csv.as_bytes()).unwrap();
        assert_eq!(t.headers, vec!["y", "x1", "loc1"]);
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.column(t.column_index("x1").unwrap()), vec![2.0, 0.45]);
    }

    #[test]
    fn csv_errors_name_row_and_column() {
        let ragged = "a,b\n1,2\n3\n";
        let e = read_table(ragged.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("row 3"), "{e}");

        let text = "a,b\n1,x\n";
        let e = read_table(text.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("column 'b'"), "{e}");
        assert!(e.contains("row 2"), "{e}");

        assert!(read_table("".as_bytes()).is_err());
    }

    #[test]
    fn numeric_list_parsing() {
        assert_eq!(parse_numeric_list("1, 2.5,3e-1").unwrap(), vec![1.0, 2.5, 0.3]);
        assert_eq!(
            parse_numeric_list("-inf,0,inf").unwrap(),
            vec![f64::NEG_INFINITY, 0.0, f64::INFINITY]
        );
        assert!(parse_numeric_list("").is_err());
        assert!(parse_numeric_list("1,,2").is_err());
        assert!(parse_numeric_list("1,nan").is_err());
        assert!(parse_numeric_list("1;2").is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456.789012345] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
    }
}
