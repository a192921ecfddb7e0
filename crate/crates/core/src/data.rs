//! Process data ingestion, z-score scaling and the second-order expansion.
//!
//! Matrices are stored variables × samples: column `i` is sample `x⁽ⁱ⁾`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{shape_mismatch, Result, ScaError};
use crate::linalg::all_finite;

/// Standard deviations below this are treated as constant columns.
pub const CONSTANT_STD_GUARD: f64 = 1e-12;

/// n variables × m samples of process measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    variable_names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(ScaError::InvalidArgument(
                "data matrix must have at least one variable and one sample".into(),
            ));
        }
        if !all_finite(&values) {
            return Err(ScaError::NonFinite("data matrix"));
        }
        Ok(Self {
            values,
            variable_names: None,
        })
    }

    /// Build from per-sample rows (each inner vector is one sample).
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let m = samples.len();
        let n = samples.first().map(Vec::len).unwrap_or(0);
        if let Some((row, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != n) {
            return Err(ScaError::Ragged {
                row,
                expected: n,
                got: s.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, m, |j, i| samples[i][j]))
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_vars() {
            return Err(ScaError::InvalidArgument(format!(
                "{} variable names for {} variables",
                names.len(),
                self.n_vars()
            )));
        }
        self.variable_names = Some(names);
        Ok(self)
    }

    pub fn n_vars(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn variable_names(&self) -> Option<&[String]> {
        self.variable_names.as_deref()
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.values.column(i).into_owned()
    }

    /// Samples `range` as a new matrix (variable names carried over).
    pub fn slice_samples(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.n_samples() {
            return Err(ScaError::InvalidArgument(format!(
                "sample range {start}..{} out of bounds for {} samples",
                start + len,
                self.n_samples()
            )));
        }
        Ok(Self {
            values: self.values.columns(start, len).into_owned(),
            variable_names: self.variable_names.clone(),
        })
    }
}

/// Per-variable mean and standard deviation of the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

impl Scaler {
    pub fn new(mean: DVector<f64>, std: DVector<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(shape_mismatch("scaler", (mean.len(), 1), (std.len(), 1)));
        }
        if std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || mean.iter().any(|v| !v.is_finite())
        {
            return Err(ScaError::InvalidArgument(
                "scaler std must be finite and strictly positive".into(),
            ));
        }
        Ok(Self { mean, std })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mean: DVector::zeros(n),
            std: DVector::from_element(n, 1.0),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.mean.len()
    }

    /// Per-variable sample mean and sample std (divisor m − 1).
    pub fn fit(x: &DataMatrix) -> Result<Self> {
        let m = x.n_samples();
        if m < 2 {
            return Err(ScaError::TooFewSamples { needed: 2, got: m });
        }
        let v = x.values();
        let mean = v.column_mean();
        let std = DVector::from_iterator(
            v.nrows(),
            v.row_iter().zip(mean.iter()).map(|(row, mu)| {
                let ss: f64 = row.iter().map(|a| (a - mu).powi(2)).sum();
                let s = (ss / (m - 1) as f64).sqrt();
                if s < CONSTANT_STD_GUARD {
                    1.0
                } else {
                    s
                }
            }),
        );
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if x.n_vars() != self.n_vars() {
            return Err(ScaError::DimensionMismatch {
                context: "apply_scaler",
                expected: format!("{} variables", self.n_vars()),
                actual: format!("{} variables", x.n_vars()),
            });
        }
        let mut out = x.values().clone();
        for (j, mut row) in out.row_iter_mut().enumerate() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            row.apply(|v| *v = (*v - mu) / sd);
        }
        Ok(DataMatrix {
            values: out,
            variable_names: x.variable_names.clone(),
        })
    }

    pub fn invert(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if x.n_vars() != self.n_vars() {
            return Err(shape_mismatch(
                "invert_scaler",
                (self.n_vars(), x.n_samples()),
                (x.n_vars(), x.n_samples()),
            ));
        }
        let mut out = x.values().clone();
        for (j, mut row) in out.row_iter_mut().enumerate() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            row.apply(|v| *v = *v * sd + mu);
        }
        DataMatrix::new(out)
    }
}

pub fn fit_scaler(x: &DataMatrix) -> Result<Scaler> {
    Scaler::fit(x)
}

pub fn apply_scaler(scaler: &Scaler, x: &DataMatrix) -> Result<DataMatrix> {
    scaler.apply(x)
}

/// Second-order expansion `[1, x₁..xₙ, x₁x₁, x₁x₂, …, xₙxₙ]` of every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedMatrix {
    values: DMatrix<f64>,
    source_n: usize,
}

/// Length of the expanded feature vector for `n` input variables.
pub const fn expanded_dim(n: usize) -> usize {
    1 + n + n * n
}

impl ExpandedMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn source_n(&self) -> usize {
        self.source_n
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }
}

/// Expand a single sample into `out` (length `1 + n + n²`).
pub fn expand_sample_into(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(out.len(), expanded_dim(n));
    out[0] = 1.0;
    out[1..=n].copy_from_slice(x);
    let products = &mut out[1 + n..];
    for j in 0..n {
        for k in 0..n {
            products[j * n + k] = x[j] * x[k];
        }
    }
}

pub fn expand_sample(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; expanded_dim(x.len())];
    expand_sample_into(x, &mut out);
    out
}

pub fn expand_second_order(x: &DataMatrix) -> Result<ExpandedMatrix> {
    let n = x.n_vars();
    let m = x.n_samples();
    let big_n = expanded_dim(n);
    let mut values = DMatrix::zeros(big_n, m);
    for (src, mut dst) in x.values().column_iter().zip(values.column_iter_mut()) {
        let s: Vec<f64> = src.iter().copied().collect();
        expand_sample_into(&s, dst.as_mut_slice());
    }
    if !all_finite(&values) {
        return Err(ScaError::NonFinite("second-order expansion"));
    }
    Ok(ExpandedMatrix {
        values,
        source_n: n,
    })
}

/// Whether each CSV record holds one sample or one variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleAxis {
    #[default]
    Rows,
    Cols,
}

impl std::str::FromStr for SampleAxis {
    type Err = ScaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows" => Ok(Self::Rows),
            "cols" | "columns" => Ok(Self::Cols),
            other => Err(ScaError::InvalidArgument(format!(
                "sample layout must be rows or cols, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    #[default]
    Comma,
    /// Runs of spaces/tabs, as in the classic TEP `.dat` dumps.
    Whitespace,
}

impl std::str::FromStr for Delimiter {
    type Err = ScaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comma" | "," => Ok(Self::Comma),
            "whitespace" | "ws" => Ok(Self::Whitespace),
            other => Err(ScaError::InvalidArgument(format!(
                "delimiter must be comma or whitespace, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvLayout {
    pub samples: SampleAxis,
    pub has_header: bool,
    pub delimiter: Delimiter,
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let trimmed = cell.trim();
    let v: f64 = trimmed.parse().map_err(|_| ScaError::Parse {
        row,
        column,
        message: format!("not a number: {trimmed:?}"),
    })?;
    if !v.is_finite() {
        return Err(ScaError::Parse {
            row,
            column,
            message: format!("non-finite value {trimmed:?}"),
        });
    }
    Ok(v)
}

/// Parse delimited text. Row and column numbers in errors are 1-based file positions.
pub fn parse_csv(text: &str, layout: CsvLayout) -> Result<DataMatrix> {
    let mut header: Option<Vec<String>> = None;
    let mut records: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;

    let mut push = |line_no: usize, fields: Vec<&str>| -> Result<()> {
        if layout.has_header && header.is_none() {
            header = Some(fields.iter().map(|s| s.trim().to_string()).collect());
            width = Some(fields.len());
            return Ok(());
        }
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(ScaError::Ragged {
                row: line_no,
                expected,
                got: fields.len(),
            });
        }
        let rec = fields
            .iter()
            .enumerate()
            .map(|(c, f)| parse_cell(f, line_no, c + 1))
            .collect::<Result<Vec<_>>>()?;
        records.push(rec);
        Ok(())
    };

    match layout.delimiter {
        Delimiter::Comma => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            for rec in rdr.records() {
                let rec = rec?;
                let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
                if rec.len() == 1 && rec[0].is_empty() {
                    continue;
                }
                push(line, rec.iter().collect())?;
            }
        }
        Delimiter::Whitespace => {
            for (i, line) in text.lines().enumerate() {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.is_empty() {
                    continue;
                }
                push(i + 1, fields)?;
            }
        }
    }

    if records.is_empty() {
        return Err(ScaError::InvalidArgument("no data rows".into()));
    }
    let r = records.len();
    let c = records[0].len();
    let values = match layout.samples {
        SampleAxis::Rows => DMatrix::from_fn(c, r, |j, i| records[i][j]),
        SampleAxis::Cols => DMatrix::from_fn(r, c, |j, i| records[j][i]),
    };
    let data = DataMatrix::new(values)?;
    match (header, layout.samples) {
        (Some(names), SampleAxis::Rows) => data.with_names(names),
        _ => Ok(data),
    }
}

pub fn load_csv(path: impl AsRef<Path>, layout: CsvLayout) -> Result<DataMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, layout)
}

/// Write samples as rows with an `x1..xn` (or stored names) header.
pub fn write_csv(path: impl AsRef<Path>, data: &DataMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let names: Vec<String> = match data.variable_names() {
        Some(n) => n.to_vec(),
        None => (1..=data.n_vars()).map(|j| format!("x{j}")).collect(),
    };
    writeln!(w, "{}", names.join(","))?;
    for col in data.values().column_iter() {
        let line: Vec<String> = col.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
