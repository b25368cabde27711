//! Command-line interface: `test`, `sample`, `bench` and `adjust`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bench::{by_correction, empirical_power, BenchConfig, TestDescriptor};
use crate::circ::{lag_pairs, wrap_angle, PairedSample};
use crate::error::{Error, Result};
use crate::models::{Interaction, ModelSpec};
use crate::omnibus::PermutationPlan;
use crate::result::TestResult;

const DEFAULT_BATTERY: [&str; 5] = ["cos:1,1", "cos:1,-1", "multi:1,-1,1,1", "omni:0.1", "omni:1"];

#[derive(Debug, Parser)]
#[command(name = "torus-indep", version, about = "Independence tests for toroidal data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run independence tests on a CSV of angle pairs.
    Test(TestArgs),
    /// Draw a sample from a toroidal model.
    Sample(SampleArgs),
    /// Run a size/power experiment from a TOML config.
    Bench(BenchArgs),
    /// Append Benjamini–Yekutieli adjusted p-values to a CSV column.
    Adjust(AdjustArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV with two angle columns, or one column together with --lag.
    #[arg(long)]
    pub input: PathBuf,
    /// Pair each value of the first column with the one k steps later.
    #[arg(long)]
    pub lag: Option<usize>,
    /// Input angles are in degrees.
    #[arg(long)]
    pub degrees: bool,
    /// Input angles are axial (defined modulo π) and get doubled.
    #[arg(long)]
    pub axial: bool,
    /// Cosine test frequencies `r1,r2`; repeatable.
    #[arg(long = "cos", value_name = "R1,R2", allow_hyphen_values = true)]
    pub cos: Vec<String>,
    /// Multi-order spec `cos pairs[/sin pairs]`, e.g. `1,-1,1,1`; repeatable.
    #[arg(long = "multi", value_name = "SPEC", allow_hyphen_values = true)]
    pub multi: Vec<String>,
    /// Omnibus kernel parameter; repeatable.
    #[arg(long = "lambda", value_name = "LAMBDA")]
    pub lambda: Vec<f64>,
    /// Permutations for the omnibus test.
    #[arg(long, default_value_t = 10_000)]
    pub perms: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip centring of the moment tests.
    #[arg(long)]
    pub no_center: bool,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Record the wall-clock time in the output.
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Pb,
    Bwc,
    Bcvm,
    Bvm,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub kappa2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa3: Option<f64>,
    #[arg(long, default_value = "positive")]
    pub interaction: String,
    #[arg(long, allow_hyphen_values = true)]
    pub mu_g: Option<f64>,
    #[arg(long)]
    pub kappa_g: Option<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for `<name>.csv` and `<name>.json`.
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    /// CSV whose first column holds p-values.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// One entry of the `results` array.
#[derive(Debug, Serialize)]
pub struct TestEntry {
    pub test: String,
    #[serde(flatten)]
    pub result: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// JSON document written by `test`.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: Vec<String>,
    pub input_sha256: String,
    pub seed: u64,
    pub version: String,
    pub timestamp: Option<u64>,
    pub n: usize,
    pub results: Vec<TestEntry>,
}

/// Parses and runs; returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli, &args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn run(cli: Cli, argv: &[String]) -> Result<i32> {
    match cli.command {
        Command::Test(a) => {
            set_threads(a.threads)?;
            cmd_test(&a, argv)
        }
        Command::Sample(a) => cmd_sample(&a).map(|_| 0),
        Command::Bench(a) => {
            set_threads(a.threads)?;
            cmd_bench(&a).map(|_| 0)
        }
        Command::Adjust(a) => cmd_adjust(&a).map(|_| 0),
    }
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| Error::invalid(e.to_string()))?;
    }
    Ok(())
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Numeric columns of a CSV. `#` starts a comment line; a first row that
/// does not parse as numbers is taken as a header.
pub fn read_columns(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line() as usize), msg: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(e) => return Err(Error::Parse { line, msg: e.to_string() }),
        };
        first = false;
        if cols.is_empty() {
            cols = vec![Vec::new(); values.len()];
        } else if values.len() != cols.len() {
            return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", cols.len(), values.len()) });
        }
        for (c, v) in cols.iter_mut().zip(values) {
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("non-finite value {v}") });
            }
            c.push(v);
        }
    }
    if cols.is_empty() || cols[0].is_empty() {
        return Err(Error::invalid("input has no data rows"));
    }
    Ok(cols)
}

/// Applies unit conversion, axial doubling and wrapping.
pub fn to_angles(raw: &[f64], degrees: bool, axial: bool) -> Result<Vec<f64>> {
    raw.iter()
        .map(|&x| {
            let mut t = if degrees { x * PI / 180.0 } else { x };
            if axial {
                t *= 2.0;
            }
            wrap_angle(t).map(f64::from)
        })
        .collect()
}

/// Builds the paired sample from raw CSV text.
pub fn ingest(text: &str, lag: Option<usize>, degrees: bool, axial: bool) -> Result<PairedSample> {
    let cols = read_columns(text)?;
    let s = match lag {
        Some(k) => {
            if cols.len() != 1 {
                return Err(Error::invalid(format!("--lag expects one column, found {}", cols.len())));
            }
            lag_pairs(&to_angles(&cols[0], degrees, axial)?, k)?
        }
        None => {
            if cols.len() != 2 {
                return Err(Error::invalid(format!(
                    "expected two angle columns, found {} (use --lag for a single series)",
                    cols.len()
                )));
            }
            PairedSample::new(to_angles(&cols[0], degrees, axial)?, to_angles(&cols[1], degrees, axial)?)?
        }
    };
    if s.len() < 2 {
        return Err(Error::invalid(format!("need at least two pairs, found {}", s.len())));
    }
    Ok(s)
}

fn battery(a: &TestArgs) -> Result<Vec<TestDescriptor>> {
    let mut out = Vec::new();
    for c in &a.cos {
        out.push(format!("cos:{c}").parse()?);
    }
    for m in &a.multi {
        out.push(format!("multi:{m}").parse()?);
    }
    for l in &a.lambda {
        out.push(format!("omni:{l}").parse()?);
    }
    if out.is_empty() {
        out = DEFAULT_BATTERY.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    Ok(out)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now_unix() -> Option<u64> {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).ok().map(|d| d.as_secs())
}

pub fn cmd_test(a: &TestArgs, argv: &[String]) -> Result<i32> {
    let bytes = fs::read(&a.input)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::invalid(format!("input is not UTF-8: {e}")))?;
    let s = ingest(&text, a.lag, a.degrees, a.axial)?;
    let tests = battery(a)?;
    let seed = a.seed.unwrap_or_else(rand::random);
    let plan = PermutationPlan::new(a.perms, seed)?;

    let mut code = 0;
    let mut results = Vec::new();
    for t in &tests {
        let entry = match t.run(&s, !a.no_center, Some(plan)) {
            Ok(r) => TestEntry { test: t.to_string(), result: Some(r), error: None },
            Err(e) => {
                code = code.max(exit_code(&e));
                TestEntry { test: t.to_string(), result: None, error: Some(e.to_string()) }
            }
        };
        results.push(entry);
    }
    let record = RunRecord {
        command: std::iter::once("torus-indep".to_string()).chain(argv.iter().skip(1).cloned()).collect(),
        input_sha256: sha256_hex(&bytes),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: if a.stamp { now_unix() } else { None },
        n: s.len(),
        results,
    };
    let mut json = serde_json::to_string_pretty(&record)?;
    json.push('\n');
    emit(&json, a.output.as_deref())?;
    Ok(code)
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::invalid(format!("--{name} is required for this model")))
}

pub fn model_from_args(a: &SampleArgs) -> Result<ModelSpec> {
    let m = match a.model {
        ModelKind::Pb => ModelSpec::Pb { p: need(a.p, "p")? },
        ModelKind::Bwc => {
            ModelSpec::Bwc { rho1: need(a.rho1, "rho1")?, rho2: need(a.rho2, "rho2")?, rho: need(a.rho, "rho")? }
        }
        ModelKind::Bcvm => ModelSpec::Bcvm {
            kappa1: need(a.kappa1, "kappa1")?,
            kappa2: need(a.kappa2, "kappa2")?,
            kappa3: need(a.kappa3, "kappa3")?,
            interaction: a.interaction.parse::<Interaction>()?,
        },
        ModelKind::Bvm => ModelSpec::Bvm {
            kappa1: need(a.kappa1, "kappa1")?,
            kappa2: need(a.kappa2, "kappa2")?,
            mu_g: a.mu_g.unwrap_or(0.0),
            kappa_g: need(a.kappa_g, "kappa_g")?,
        },
    };
    m.validate()?;
    Ok(m)
}

/// CSV text of a sample: a comment line naming the model, a header and
/// one row per pair in shortest round-trip notation.
pub fn sample_csv(model: &ModelSpec, s: &PairedSample, seed: u64) -> String {
    let mut out = format!("# model={model} n={} seed={seed}\ntheta1,theta2\n", s.len());
    for (a, b) in s.pairs() {
        let _ = writeln!(out, "{a:?},{b:?}");
    }
    out
}

pub fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let model = model_from_args(a)?;
    if a.n == 0 {
        return Err(Error::invalid("--n must be positive"));
    }
    let seed = a.seed.unwrap_or_else(rand::random);
    let s = model.sample(a.n, seed)?;
    emit(&sample_csv(&model, &s, seed), a.output.as_deref())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config)?;
    let cfg = BenchConfig::from_toml(&text)?;
    let name = cfg.name.clone().unwrap_or_else(|| {
        a.config.file_stem().map_or_else(|| "bench".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let table = empirical_power(&cfg)?;
    fs::create_dir_all(&a.output_dir)?;
    let csv = table.to_csv()?;
    fs::write(a.output_dir.join(format!("{name}.csv")), &csv)?;
    let mut json = table.to_json()?;
    json.push('\n');
    fs::write(a.output_dir.join(format!("{name}.json")), json)?;
    print!("{csv}");
    Ok(())
}

/// Reads the first column as p-values and appends the adjusted column.
pub fn adjust_csv(text: &str) -> Result<String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    let mut header: Option<csv::StringRecord> = None;
    let mut pvals = Vec::new();
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line() as usize), msg: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let Some(field) = rec.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(p) if (0.0..=1.0).contains(&p) => pvals.push(p),
            Ok(p) => return Err(Error::Parse { line, msg: format!("p-value {p} not in [0, 1]") }),
            Err(_) if header.is_none() && rows.is_empty() => {
                header = Some(rec);
                continue;
            }
            Err(e) => return Err(Error::Parse { line, msg: e.to_string() }),
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(Error::invalid("no p-values in input"));
    }
    let adjusted = by_correction(&pvals)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::invalid(e.to_string());
    if let Some(h) = header {
        let mut h: Vec<String> = h.iter().map(str::to_string).collect();
        h.push("by_adjusted".to_string());
        w.write_record(&h).map_err(fail)?;
    } else {
        w.write_record(["p_value", "by_adjusted"]).map_err(fail)?;
    }
    for (rec, adj) in rows.iter().zip(adjusted) {
        let mut r: Vec<String> = rec.iter().map(str::to_string).collect();
        r.push(format!("{adj:?}"));
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn cmd_adjust(a: &AdjustArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input)?;
    emit(&adjust_csv(&text)?, a.output.as_deref())
}
