//! `sca`: train, score, and benchmark fault-detection models.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sca_core::baselines::Components;
use sca_core::bench::{fit, resolve_p, run_bench, BenchCase, BenchSpec, FitConfig};
use sca_core::data::write_csv;
use sca_core::process::{generate_toy, posterior_curve, GaussianPair, ToyConfig};
use sca_core::{
    load_csv, Activation, Activations, CsvLayout, Delimiter, FittedModel, LimitRule, Method, SampleAxis,
};

#[derive(Parser, Debug)]
#[command(name = "sca", version, about = "Second-order component analysis for fault detection")]
struct Cli {
    /// Flat key=value file; each key mirrors a flag of the chosen command.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model on normal training data and save it.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Score a data file with a saved model.
    #[command(args_override_self = true)]
    Detect(DetectArgs),
    /// Write training and test CSVs from the three-variable toy process.
    #[command(name = "gen-toy", args_override_self = true)]
    GenToy(GenToyArgs),
    /// Posterior P(y=0|x) of two 1-D Gaussian classes as CSV.
    #[command(name = "bayes-demo", args_override_self = true)]
    BayesDemo(BayesArgs),
    /// Compare methods over one or more test files.
    #[command(args_override_self = true)]
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct LayoutArgs {
    /// Whether samples are CSV rows or columns.
    #[arg(long, default_value = "rows")]
    samples: SampleAxis,
    /// First line holds variable names.
    #[arg(long)]
    header: bool,
    /// `comma` or `whitespace`.
    #[arg(long, default_value = "comma")]
    delimiter: Delimiter,
}

impl LayoutArgs {
    fn layout(&self) -> CsvLayout {
        CsvLayout {
            samples: self.samples,
            has_header: self.header,
            delimiter: self.delimiter,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    /// Feature dimension.
    #[arg(long, conflicts_with = "energy")]
    p: Option<usize>,
    /// Pick p as the smallest PCA dimension reaching this energy fraction.
    #[arg(long)]
    energy: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    zeta: f64,
    /// `coverage` (limit at the 1 - zeta quantile) or `literal` (at zeta).
    #[arg(long, default_value = "coverage")]
    limit_rule: LimitRule,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "tanh")]
    encoder: Activation,
    #[arg(long, default_value = "identity")]
    decoder: Activation,
    /// Conjugate-gradient iteration cap (SCA).
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Gradient-descent epochs (AE, SAE).
    #[arg(long, default_value_t = 2000)]
    ae_epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    ae_learning_rate: f64,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        let mut cfg = FitConfig::default();
        cfg.components = match (self.p, self.energy) {
            (Some(p), _) => Components::Fixed(p),
            (None, Some(e)) => Components::Energy(e),
            (None, None) => cfg.components,
        };
        cfg.zeta = self.zeta;
        cfg.rule = self.limit_rule;
        cfg.seed = self.seed;
        cfg.activations = Activations {
            encoder: self.encoder,
            decoder: self.decoder,
        };
        cfg.cg.max_iters = self.max_iters;
        cfg.ae_epochs = self.ae_epochs;
        cfg.ae_learning_rate = self.ae_learning_rate;
        cfg
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training CSV of normal operation.
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value = "sca")]
    method: Method,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    layout: LayoutArgs,
    /// Model file to write.
    #[arg(long, default_value = "model.sca")]
    out: PathBuf,
    /// Also write the SCA convergence trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Data to score.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    layout: LayoutArgs,
    /// The first N samples are normal; enables MDR/FAR.
    #[arg(long)]
    normal_count: Option<usize>,
    /// Write the monitoring chart CSV here instead of printing per-sample lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenToyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    train_m: usize,
    #[arg(long, default_value_t = 100)]
    normal_m: usize,
    #[arg(long, default_value_t = 400)]
    fault_m: usize,
    /// Noise variance for training data (standard deviation with --noise-as-sd).
    #[arg(long, default_value_t = 0.1)]
    train_noise: f64,
    #[arg(long, default_value_t = 0.5)]
    test_noise: f64,
    #[arg(long)]
    noise_as_sd: bool,
    /// Output directory for toy_train.csv and toy_test.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BayesArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu0: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    mu1: f64,
    #[arg(long, default_value_t = 1.0)]
    sd0: f64,
    #[arg(long, default_value_t = 2.0)]
    sd1: f64,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long, default_value = "posterior.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    train: PathBuf,
    /// Test case as PATH:NORMAL_COUNT:FAULT_ID; repeatable.
    #[arg(long = "case", value_name = "PATH:NORMAL:ID", required = true)]
    cases: Vec<String>,
    /// Comma-separated subset of pca,kpca,ae,sae,sca.
    #[arg(long, default_value = "pca,kpca,ae,sae,sca", value_delimiter = ',')]
    methods: Vec<Method>,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    layout: LayoutArgs,
    #[arg(long, default_value = "bench_out")]
    out: PathBuf,
    /// Also draw an SVG chart per (method, fault).
    #[arg(long)]
    svg: bool,
}

fn parse_case(s: &str) -> Result<BenchCase> {
    let mut parts = s.rsplitn(3, ':');
    let (id, normal, path) = match (parts.next(), parts.next(), parts.next()) {
        (Some(id), Some(n), Some(p)) if !p.is_empty() && !id.is_empty() => (id, n, p),
        _ => bail!("case {s:?} is not PATH:NORMAL_COUNT:FAULT_ID"),
    };
    let normal_count = normal
        .parse()
        .with_context(|| format!("case {s:?}: bad normal count {normal:?}"))?;
    Ok(BenchCase {
        test_path: PathBuf::from(path),
        normal_count,
        fault_id: id.to_string(),
    })
}

/// `key=value` lines to flags; `key=true` becomes a bare switch and
/// `key=false` is dropped. Blank lines and `#` comments are skipped.
fn config_args(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), i + 1);
        };
        let key = k.trim().replace('_', "-");
        match v.trim() {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => out.push(format!("--{key}={v}")),
        }
    }
    Ok(out)
}

/// Splice config-file flags in right after the subcommand so that explicit
/// command-line flags, appearing later, override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut config = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().context("--config needs a file")?);
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let extra = config_args(Path::new(&path))?;
    let names = ["train", "detect", "gen-toy", "bayes-demo", "bench"];
    let at = rest
        .iter()
        .position(|a| names.contains(&a.as_str()))
        .map_or(rest.len(), |i| i + 1);
    rest.splice(at..at, extra);
    Ok(rest)
}

fn train(a: TrainArgs) -> Result<()> {
    let x = load_csv(&a.train, a.layout.layout())
        .with_context(|| format!("loading {}", a.train.display()))?;
    let cfg = a.fit.config();
    let p = resolve_p(&x, cfg.components)?;
    let fitted = fit(a.method, &x, p, &cfg)?;
    fitted.model.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let monitor = fitted.model.monitor();
    println!(
        "method {} n {} p {} tau {:.6} bandwidth {:.6} seconds {:.3}",
        a.method,
        fitted.model.n_vars(),
        p,
        monitor.tau,
        monitor.bandwidth,
        fitted.wall_time
    );
    if let Some(t) = &fitted.trace {
        println!(
            "iterations {} final_cost {:.6e} stop {}",
            t.iterations,
            t.final_cost(),
            t.stop_reason.name()
        );
    }
    if let Some(path) = a.trace {
        match &fitted.trace {
            Some(t) => t.write_csv(&path)?,
            None => bail!("--trace is only available for sca"),
        }
    }
    Ok(())
}

fn detect(a: DetectArgs) -> Result<()> {
    let model = FittedModel::load(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let x = load_csv(&a.data, a.layout.layout()).with_context(|| format!("loading {}", a.data.display()))?;
    if x.n_vars() != model.n_vars() {
        bail!(
            "model expects {} variables but {} has {}",
            model.n_vars(),
            a.data.display(),
            x.n_vars()
        );
    }
    let mut report = model.monitor_with(&x)?;
    if let Some(nc) = a.normal_count {
        report = report.scored(nc)?;
    }
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match &a.out {
        Some(path) => {
            let mut w = BufWriter::new(fs::File::create(path)?);
            report.write_chart_csv(&mut w, a.normal_count.unwrap_or(0))?;
            w.flush()?;
        }
        None => {
            writeln!(out, "index,t2,flag")?;
            for (i, (t, f)) in report.t2.iter().zip(&report.flags).enumerate() {
                writeln!(out, "{i},{t:?},{}", u8::from(*f))?;
            }
        }
    }
    write!(out, "# tau {:.6} alarms {}/{}", report.tau, report.flags.iter().filter(|f| **f).count(), report.flags.len())?;
    if let (Some(mdr), Some(far)) = (report.mdr, report.far) {
        write!(out, " mdr {mdr:.2} far {far:.2}")?;
    }
    writeln!(out)?;
    Ok(())
}

fn gen_toy(a: GenToyArgs) -> Result<()> {
    let cfg = ToyConfig {
        seed: a.seed,
        train_m: a.train_m,
        normal_m: a.normal_m,
        fault_m: a.fault_m,
        train_noise: a.train_noise,
        test_noise: a.test_noise,
        noise_as_sd: a.noise_as_sd,
    };
    let data = generate_toy(&cfg)?;
    fs::create_dir_all(&a.out)?;
    let (tr, te) = (a.out.join("toy_train.csv"), a.out.join("toy_test.csv"));
    write_csv(&tr, &data.train)?;
    write_csv(&te, &data.test)?;
    println!("{} {} normal_count {}", tr.display(), te.display(), data.normal_count);
    Ok(())
}

fn bayes_demo(a: BayesArgs) -> Result<()> {
    let pair = GaussianPair::new(a.mu0, a.mu1, a.sd0, a.sd1)?;
    let curve = posterior_curve(&pair, a.lo, a.hi, a.points)?;
    let mut w = BufWriter::new(fs::File::create(&a.out)?);
    writeln!(w, "x,posterior0")?;
    for (x, p) in curve {
        writeln!(w, "{x:?},{p:?}")?;
    }
    w.flush()?;
    let (qa, qb, qc) = pair.quadratic_coefficients();
    println!("{} a {qa:?} b {qb:?} c {qc:?}", a.out.display());
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let cases = a.cases.iter().map(|c| parse_case(c)).collect::<Result<Vec<_>>>()?;
    let spec = BenchSpec {
        train_path: a.train,
        layout: a.layout.layout(),
        cases,
        methods: a.methods,
        fit: a.fit.config(),
        out_dir: a.out,
        svg: a.svg,
    };
    let report = run_bench(&spec)?;
    println!("p {}", report.p);
    for r in &report.rows {
        let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.2}"));
        println!("fault {} {} mdr {} far {}", r.fault_id, r.method, f(r.mdr), f(r.far));
    }
    for (m, e) in &report.failures {
        eprintln!("warning: {m} failed: {e}");
    }
    println!("wrote {} files to {}", report.files.len(), spec.out_dir.display());
    Ok(())
}

fn run() -> Result<()> {
    let args = expand_config(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Train(a) => train(a),
        Command::Detect(a) => detect(a),
        Command::GenToy(a) => gen_toy(a),
        Command::BayesDemo(a) => bayes_demo(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
