//! Method fitting behind one interface, and the benchmark runner that
//! produces per-fault MDR/FAR tables, monitoring charts and traces.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::activation::Activations;
use crate::baselines::{ae_train, kpca_fit, pca_fit, sae_train, AeConfig, Components};
use crate::data::{load_csv, CsvLayout, DataMatrix, Scaler};
use crate::error::{Result, ScaError};
use crate::linalg::{sample_covariance, sym_eigen_desc};
use crate::baselines::components_for_energy;
use crate::model::{FittedModel, Method};
use crate::monitor::{DetectionReport, LimitRule, DEFAULT_ZETA};
use crate::optimizer::{CgConfig, CgTrace};
use crate::sca::{self, ScaOptions};

/// Everything needed to fit any of the five methods.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub components: Components,
    pub zeta: f64,
    pub rule: LimitRule,
    pub seed: u64,
    /// SCA and autoencoder activations.
    pub activations: Activations,
    pub cg: CgConfig,
    pub ae_epochs: usize,
    pub ae_learning_rate: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let ae = AeConfig::new(1);
        Self {
            components: Components::Energy(0.85),
            zeta: DEFAULT_ZETA,
            rule: LimitRule::Coverage,
            seed: 0,
            activations: Activations::default(),
            cg: CgConfig::default(),
            ae_epochs: ae.max_epochs,
            ae_learning_rate: ae.learning_rate,
        }
    }
}

/// Feature dimension for `components`: fixed, or from the energy rule on
/// the covariance of the scaled data.
pub fn resolve_p(x: &DataMatrix, components: Components) -> Result<usize> {
    match components {
        Components::Fixed(p) => Ok(p),
        Components::Energy(e) => {
            if !(e > 0.0 && e <= 1.0) {
                return Err(ScaError::InvalidArgument(format!(
                    "energy fraction must be in (0, 1], got {e}"
                )));
            }
            if x.n_samples() < 2 {
                return Err(ScaError::TooFewSamples { needed: 2, got: x.n_samples() });
            }
            let z = Scaler::fit(x)?.apply(x)?;
            let (vals, _) = sym_eigen_desc(&sample_covariance(z.values()));
            Ok(components_for_energy(vals.as_slice(), e))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: FittedModel,
    /// Optimizer trace, SCA only.
    pub trace: Option<CgTrace>,
    pub wall_time: f64,
}

/// Fit `method` on normal training data with feature dimension `p`.
pub fn fit(method: Method, x: &DataMatrix, p: usize, cfg: &FitConfig) -> Result<Fitted> {
    let start = Instant::now();
    let ae_cfg = || {
        let mut c = AeConfig::new(p);
        c.activations = cfg.activations;
        c.max_epochs = cfg.ae_epochs;
        c.learning_rate = cfg.ae_learning_rate;
        c.seed = cfg.seed;
        c.zeta = cfg.zeta;
        c.rule = cfg.rule;
        c
    };
    let (model, trace) = match method {
        Method::Pca => (
            FittedModel::Pca(pca_fit(x, Components::Fixed(p), cfg.zeta, cfg.rule)?),
            None,
        ),
        Method::Kpca => (FittedModel::Kpca(kpca_fit(x, p, cfg.zeta, cfg.rule)?), None),
        Method::Ae => (FittedModel::Ae(ae_train(x, &ae_cfg())?.0), None),
        Method::Sae => (FittedModel::Ae(sae_train(x, &ae_cfg())?.0), None),
        Method::Sca => {
            let opts = ScaOptions {
                p,
                activations: cfg.activations,
                cg: CgConfig { seed: cfg.seed, ..cfg.cg },
                zeta: cfg.zeta,
                rule: cfg.rule,
            };
            let (m, t) = sca::train(x, &opts)?;
            (FittedModel::Sca(m), Some(t))
        }
    };
    Ok(Fitted {
        model,
        trace,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// SplitMix64 finalizer; mixes the run seed with a method index.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchCase {
    pub test_path: PathBuf,
    pub normal_count: usize,
    pub fault_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub train_path: PathBuf,
    pub layout: CsvLayout,
    pub cases: Vec<BenchCase>,
    pub methods: Vec<Method>,
    pub fit: FitConfig,
    pub out_dir: PathBuf,
    pub svg: bool,
}

/// One cell of the metrics table; `None` when the method failed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub fault_id: String,
    pub method: Method,
    pub mdr: Option<f64>,
    pub far: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub p: usize,
    pub rows: Vec<MetricRow>,
    /// Methods that could not be fitted, with the reason.
    pub failures: Vec<(Method, String)>,
    pub files: Vec<PathBuf>,
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.2}"))
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("fault_id,method,mdr,far\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.fault_id, r.method, fmt_rate(r.mdr), fmt_rate(r.far));
    }
    s
}

/// Wide layout: one row per fault, an (MDR, FAR) column pair per method.
fn table_csv(rows: &[MetricRow], cases: &[BenchCase], methods: &[Method]) -> String {
    let mut s = String::from("fault_id");
    for m in methods {
        let _ = write!(s, ",{m}_mdr,{m}_far");
    }
    s.push('\n');
    for case in cases {
        s.push_str(&case.fault_id);
        for m in methods {
            let row = rows.iter().find(|r| r.fault_id == case.fault_id && r.method == *m);
            let (mdr, far) = row.map_or((None, None), |r| (r.mdr, r.far));
            let _ = write!(s, ",{},{}", fmt_rate(mdr), fmt_rate(far));
        }
        s.push('\n');
    }
    s
}

/// Minimal monitoring chart: T² per sample, the control limit, and a
/// boundary marker between normal and faulty samples.
pub fn chart_svg(report: &DetectionReport, normal_count: usize, title: &str) -> String {
    let (w, h, pad) = (800.0, 300.0, 40.0);
    let n = report.t2.len().max(2);
    let ymax = report
        .t2
        .iter()
        .copied()
        .fold(report.tau, f64::max)
        .max(f64::MIN_POSITIVE)
        * 1.05;
    let x = |i: usize| pad + (w - 2.0 * pad) * i as f64 / (n - 1) as f64;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (v / ymax).clamp(0.0, 1.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="20" font-family="sans-serif" font-size="13">{title}</text>"#
    );
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" points="{pad},{} {pad},{} {},{}"/>"#,
        pad,
        h - pad,
        w - pad,
        h - pad
    );
    for (i, v) in report.t2.iter().enumerate() {
        let color = if i < normal_count { "steelblue" } else { "firebrick" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{color}"/>"#,
            x(i),
            y(*v)
        );
    }
    let ty = y(report.tau);
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{ty:.2}" x2="{}" y2="{ty:.2}" stroke="darkorange" stroke-dasharray="6,3"/>"#,
        w - pad
    );
    if normal_count > 0 && normal_count < report.t2.len() {
        let bx = x(normal_count);
        let _ = writeln!(
            s,
            r#"<line x1="{bx:.2}" y1="{pad}" x2="{bx:.2}" y2="{}" stroke="gray" stroke-dasharray="2,2"/>"#,
            h - pad
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write_file(path: &Path, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(path, contents)?;
    files.push(path.to_path_buf());
    Ok(())
}

/// Run every method on every case. Methods are fitted once each, in
/// parallel, with seeds derived from the run seed and the method; a method
/// that fails to fit or score yields NA cells instead of aborting.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.methods.is_empty() {
        return Err(ScaError::InvalidArgument("no methods selected".into()));
    }
    if spec.cases.is_empty() {
        return Err(ScaError::InvalidArgument("no test cases given".into()));
    }
    let start = Instant::now();
    let train = load_csv(&spec.train_path, spec.layout)?;
    let tests = spec
        .cases
        .iter()
        .map(|c| {
            if c.normal_count == 0 {
                return Err(ScaError::InvalidArgument(format!(
                    "case {}: normal_count must be >= 1",
                    c.fault_id
                )));
            }
            load_csv(&c.test_path, spec.layout)
        })
        .collect::<Result<Vec<_>>>()?;
    let p = resolve_p(&train, spec.fit.components)?;
    fs::create_dir_all(&spec.out_dir)?;

    let fitted: Vec<(Method, Result<Fitted>)> = spec
        .methods
        .par_iter()
        .map(|&m| {
            let cfg = FitConfig {
                seed: derive_seed(spec.fit.seed, m as u64 + 1),
                ..spec.fit.clone()
            };
            (m, fit(m, &train, p, &cfg))
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut files = Vec::new();
    let mut meta = String::new();
    let _ = writeln!(meta, "train {}", spec.train_path.display());
    let _ = writeln!(meta, "seed {}", spec.fit.seed);
    let _ = writeln!(meta, "p {p}");
    let _ = writeln!(meta, "components {:?}", spec.fit.components);
    let _ = writeln!(meta, "zeta {}", spec.fit.zeta);
    let _ = writeln!(meta, "limit_rule {}", spec.fit.rule.name());
    let _ = writeln!(
        meta,
        "activations {}/{}",
        spec.fit.activations.encoder, spec.fit.activations.decoder
    );
    let _ = writeln!(meta, "cg {:?}", spec.fit.cg);
    let _ = writeln!(meta, "ae_epochs {}", spec.fit.ae_epochs);
    let _ = writeln!(meta, "ae_learning_rate {}", spec.fit.ae_learning_rate);
    let _ = writeln!(meta, "kpca_features whitened (1/sqrt(lambda))");

    for (case, test) in spec.cases.iter().zip(&tests) {
        for (method, result) in &fitted {
            let scored = result.as_ref().map_err(|e| e.to_string()).and_then(|f| {
                f.model
                    .monitor_with(test)
                    .and_then(|r| r.scored(case.normal_count))
                    .map_err(|e| e.to_string())
            });
            match scored {
                Ok(report) => {
                    let stem = format!("chart_{method}_fault{}", sanitize(&case.fault_id));
                    let path = spec.out_dir.join(format!("{stem}.csv"));
                    let mut w = BufWriter::new(fs::File::create(&path)?);
                    report.write_chart_csv(&mut w, case.normal_count)?;
                    drop(w);
                    files.push(path);
                    if spec.svg {
                        let title = format!("{method} fault {}", case.fault_id);
                        let svg = chart_svg(&report, case.normal_count, &title);
                        write_file(&spec.out_dir.join(format!("{stem}.svg")), &svg, &mut files)?;
                    }
                    rows.push(MetricRow {
                        fault_id: case.fault_id.clone(),
                        method: *method,
                        mdr: report.mdr,
                        far: report.far,
                    });
                }
                Err(msg) => {
                    let _ = writeln!(meta, "failed {method} fault {}: {msg}", case.fault_id);
                    rows.push(MetricRow {
                        fault_id: case.fault_id.clone(),
                        method: *method,
                        mdr: None,
                        far: None,
                    });
                }
            }
        }
    }

    for (method, result) in &fitted {
        match result {
            Ok(f) => {
                let _ = writeln!(meta, "fit_seconds {method} {:.3}", f.wall_time);
                if let Some(trace) = &f.trace {
                    let path = spec.out_dir.join(format!("trace_{method}.csv"));
                    trace.write_csv(&path)?;
                    files.push(path);
                    let _ = writeln!(
                        meta,
                        "trace {method} iterations {} stop {}",
                        trace.iterations,
                        trace.stop_reason.name()
                    );
                }
            }
            Err(e) => failures.push((*method, e.to_string())),
        }
    }

    write_file(&spec.out_dir.join("metrics.csv"), &metrics_csv(&rows), &mut files)?;
    write_file(
        &spec.out_dir.join("table.csv"),
        &table_csv(&rows, &spec.cases, &spec.methods),
        &mut files,
    )?;
    let _ = writeln!(meta, "total_seconds {:.3}", start.elapsed().as_secs_f64());
    write_file(&spec.out_dir.join("run_metadata.txt"), &meta, &mut files)?;

    Ok(BenchReport {
        p,
        rows,
        failures,
        files,
    })
}
