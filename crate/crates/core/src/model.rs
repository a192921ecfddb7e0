//! Method-agnostic fitted models and their on-disk format.
//!
//! A model file is UTF-8 text:
//!
//! ```text
//! sca-model 1
//! method sca
//! n 3
//! p 2
//! ...                      scalar fields, one `key value` per line
//! matrix w 13 2            `matrix <name> <rows> <cols>` followed by
//! 0.12 -0.5                `rows` lines of whitespace-separated values
//! ...
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every parameter bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::activation::{Activation, Activations};
use crate::baselines::{AeModel, AeParams, KpcaModel, PcaModel};
use crate::data::{DataMatrix, Scaler};
use crate::error::{Result, ScaError};
use crate::manifold::StiefelPoint;
use crate::monitor::{symmetrized, DetectionReport, T2Monitor};
use crate::sca::ScaModel;

pub const FORMAT_MAGIC: &str = "sca-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Pca,
    Kpca,
    Ae,
    Sae,
    Sca,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Pca, Method::Kpca, Method::Ae, Method::Sae, Method::Sca];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Kpca => "kpca",
            Method::Ae => "ae",
            Method::Sae => "sae",
            Method::Sca => "sca",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ScaError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| ScaError::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Any fitted monitoring model.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Pca(PcaModel),
    Kpca(KpcaModel),
    /// AE or SAE, distinguished by `second_order`.
    Ae(AeModel),
    Sca(ScaModel),
}

impl FittedModel {
    pub fn method(&self) -> Method {
        match self {
            FittedModel::Pca(_) => Method::Pca,
            FittedModel::Kpca(_) => Method::Kpca,
            FittedModel::Ae(m) if m.second_order => Method::Sae,
            FittedModel::Ae(_) => Method::Ae,
            FittedModel::Sca(_) => Method::Sca,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.scaler().n_vars()
    }

    pub fn scaler(&self) -> &Scaler {
        match self {
            FittedModel::Pca(m) => &m.scaler,
            FittedModel::Kpca(m) => &m.scaler,
            FittedModel::Ae(m) => &m.scaler,
            FittedModel::Sca(m) => &m.scaler,
        }
    }

    pub fn monitor(&self) -> &T2Monitor {
        match self {
            FittedModel::Pca(m) => &m.monitor,
            FittedModel::Kpca(m) => &m.monitor,
            FittedModel::Ae(m) => &m.monitor,
            FittedModel::Sca(m) => &m.monitor,
        }
    }

    pub fn p(&self) -> usize {
        self.monitor().feature_dim()
    }

    /// Features by the model's own map (p × m).
    pub fn features(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        match self {
            FittedModel::Pca(m) => m.features(x),
            FittedModel::Kpca(m) => m.features(x),
            FittedModel::Ae(m) => m.features(x),
            FittedModel::Sca(m) => m.features(x),
        }
    }

    /// Encode with the model, then apply the shared T² machinery.
    pub fn monitor_with(&self, x: &DataMatrix) -> Result<DetectionReport> {
        if x.n_vars() != self.n_vars() {
            return Err(ScaError::DimensionMismatch {
                context: "detect",
                expected: format!("{} variables", self.n_vars()),
                actual: format!("{} variables", x.n_vars()),
            });
        }
        self.monitor().report(&self.features(x)?)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FittedModel::Pca(m) => m.validate(),
            FittedModel::Kpca(m) => m.validate(),
            FittedModel::Ae(m) => m.validate(),
            FittedModel::Sca(m) => m.validate(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut f = Envelope::default();
        f.set("method", self.method().name());
        f.set("n", self.n_vars());
        f.set("p", self.p());
        let mon = self.monitor();
        f.set("zeta", fmt_f64(mon.zeta));
        f.set("rule", mon.rule.name());
        f.set("bandwidth", fmt_f64(mon.bandwidth));
        f.set("tau", fmt_f64(mon.tau));
        f.put_vector("scaler.mean", &self.scaler().mean);
        f.put_vector("scaler.std", &self.scaler().std);
        f.put_matrix("sigma_g_inv", mon.sigma_g_inv.clone());
        f.put_vector("t2_train", &DVector::from_column_slice(&mon.t2_train));
        match self {
            FittedModel::Pca(m) => {
                f.put_matrix("loading", m.loading.clone());
                f.put_vector("eigenvalues", &m.eigenvalues);
            }
            FittedModel::Kpca(m) => {
                f.set("width", fmt_f64(m.width));
                f.set("gram_mean", fmt_f64(m.gram_mean));
                f.put_matrix("train", m.train.clone());
                f.put_matrix("alpha", m.alpha.clone());
                f.put_vector("eigenvalues", &m.eigenvalues);
                f.put_vector("gram_col_means", &m.gram_col_means);
            }
            FittedModel::Ae(m) => {
                f.set("encoder", m.activations.encoder.name());
                f.set("decoder", m.activations.decoder.name());
                f.set("second_order", m.second_order);
                f.put_matrix("w", m.params.w.clone());
                f.put_vector("b", &m.params.b);
                f.put_matrix("w_dec", m.params.w_dec.clone());
                f.put_vector("b_dec", &m.params.b_dec);
            }
            FittedModel::Sca(m) => {
                f.set("encoder", m.activations.encoder.name());
                f.set("decoder", m.activations.decoder.name());
                f.put_matrix("w", m.w.clone());
                f.put_matrix("w_tilde", m.w_tilde.matrix().clone());
            }
        }
        f.render()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let f = Envelope::read(text)?;
        let method: Method = f.get("method")?.parse()?;
        let n: usize = f.parse("n")?;
        let scaler = Scaler::new(f.vector("scaler.mean")?, f.vector("scaler.std")?)?;
        if scaler.n_vars() != n {
            return Err(ScaError::ModelFormat("scaler length differs from n".into()));
        }
        let monitor = T2Monitor {
            sigma_g_inv: symmetrized(f.matrix("sigma_g_inv")?.clone()),
            t2_train: f.vector("t2_train")?.iter().copied().collect(),
            bandwidth: f.parse("bandwidth")?,
            tau: f.parse("tau")?,
            zeta: f.parse("zeta")?,
            rule: f.get("rule")?.parse()?,
        };
        let activations = || -> Result<Activations> {
            Ok(Activations {
                encoder: f.get("encoder")?.parse::<Activation>()?,
                decoder: f.get("decoder")?.parse::<Activation>()?,
            })
        };
        let model = match method {
            Method::Pca => FittedModel::Pca(PcaModel {
                scaler,
                loading: f.matrix("loading")?.clone(),
                eigenvalues: f.vector("eigenvalues")?,
                monitor,
            }),
            Method::Kpca => FittedModel::Kpca(KpcaModel {
                scaler,
                train: f.matrix("train")?.clone(),
                alpha: f.matrix("alpha")?.clone(),
                eigenvalues: f.vector("eigenvalues")?,
                width: f.parse("width")?,
                gram_col_means: f.vector("gram_col_means")?,
                gram_mean: f.parse("gram_mean")?,
                monitor,
            }),
            Method::Ae | Method::Sae => FittedModel::Ae(AeModel {
                scaler,
                params: AeParams {
                    w: f.matrix("w")?.clone(),
                    b: f.vector("b")?,
                    w_dec: f.matrix("w_dec")?.clone(),
                    b_dec: f.vector("b_dec")?,
                },
                activations: activations()?,
                second_order: f.parse("second_order")?,
                monitor,
            }),
            Method::Sca => FittedModel::Sca(ScaModel {
                scaler,
                w: f.matrix("w")?.clone(),
                w_tilde: StiefelPoint::new(f.matrix("w_tilde")?.clone())?,
                activations: activations()?,
                monitor,
            }),
        };
        if model.method() != method {
            return Err(ScaError::ModelFormat("method tag disagrees with contents".into()));
        }
        let p: usize = f.parse("p")?;
        if model.p() != p {
            return Err(ScaError::ModelFormat("p disagrees with stored matrices".into()));
        }
        model.validate()?;
        Ok(model)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Default)]
struct Envelope {
    scalars: Vec<(String, String)>,
    matrices: Vec<(String, DMatrix<f64>)>,
    scalar_index: BTreeMap<String, usize>,
    matrix_index: BTreeMap<String, usize>,
}

impl Envelope {
    fn set(&mut self, key: &str, value: impl ToString) {
        self.scalar_index.insert(key.into(), self.scalars.len());
        self.scalars.push((key.into(), value.to_string()));
    }

    fn put_matrix(&mut self, name: &str, m: DMatrix<f64>) {
        self.matrix_index.insert(name.into(), self.matrices.len());
        self.matrices.push((name.into(), m));
    }

    fn put_vector(&mut self, name: &str, v: &DVector<f64>) {
        self.put_matrix(name, DMatrix::from_column_slice(v.len(), 1, v.as_slice()));
    }

    fn render(&self) -> String {
        let mut s = format!("{FORMAT_MAGIC} {FORMAT_VERSION}\n");
        for (k, v) in &self.scalars {
            let _ = writeln!(s, "{k} {v}");
        }
        for (name, m) in &self.matrices {
            let _ = writeln!(s, "matrix {name} {} {}", m.nrows(), m.ncols());
            for row in m.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
                let _ = writeln!(s, "{}", cells.join(" "));
            }
        }
        s.push_str("end\n");
        s
    }

    fn read(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| ScaError::ModelFormat(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, head) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        let mut parts = head.split_whitespace();
        if parts.next() != Some(FORMAT_MAGIC) {
            return Err(bad(1, "not a model file"));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(1, "missing format version"))?;
        if version != FORMAT_VERSION {
            return Err(bad(1, &format!("unsupported format version {version}")));
        }
        let mut env = Envelope::default();
        let mut ended = false;
        while let Some((no, line)) = lines.next() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "end" {
                ended = true;
                break;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default();
            if key == "matrix" {
                let name = it.next().ok_or_else(|| bad(no, "matrix without name"))?;
                let rows: usize = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(no, "bad row count"))?;
                let cols: usize = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(no, "bad column count"))?;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (rno, row) = lines.next().ok_or_else(|| bad(no, "truncated matrix"))?;
                    let vals = row
                        .split_whitespace()
                        .map(|v| v.parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad(rno, "non-numeric matrix entry"))?;
                    if vals.len() != cols {
                        return Err(bad(rno, "wrong number of matrix entries"));
                    }
                    data.extend(vals);
                }
                env.put_matrix(name, DMatrix::from_row_slice(rows, cols, &data));
            } else {
                let value = it.collect::<Vec<_>>().join(" ");
                env.set(key, value);
            }
        }
        if !ended {
            return Err(ScaError::ModelFormat("missing end marker".into()));
        }
        Ok(env)
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.scalar_index
            .get(key)
            .map(|&i| self.scalars[i].1.as_str())
            .ok_or_else(|| ScaError::ModelFormat(format!("missing field {key:?}")))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .parse()
            .map_err(|_| ScaError::ModelFormat(format!("malformed field {key:?}")))
    }

    fn matrix(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.matrix_index
            .get(name)
            .map(|&i| &self.matrices[i].1)
            .ok_or_else(|| ScaError::ModelFormat(format!("missing matrix {name:?}")))
    }

    fn vector(&self, name: &str) -> Result<DVector<f64>> {
        let m = self.matrix(name)?;
        if m.ncols() != 1 {
            return Err(ScaError::ModelFormat(format!("{name:?} must be a column")));
        }
        Ok(DVector::from_column_slice(m.as_slice()))
    }
}
