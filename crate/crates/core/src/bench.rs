//! Monte Carlo size and power estimation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::circ::PairedSample;
use crate::cosine::{cosine_test, FrequencyPair};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::multi::{multi_test, MultiOrderSpec};
use crate::omnibus::{permutation_test, t_omnibus, PermutationPlan, PoissonKernel};
use crate::result::TestResult;
use crate::rng::{derive_seed, substream};

/// Smallest number of critical-value replicates accepted.
pub const MIN_CRITICAL_REPLICATES: usize = 50;

/// One test of the battery: `cos:1,-1`, `multi:1,-1,1,1[/r1,r2,…]` or `omni:0.5`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestDescriptor {
    Cosine(FrequencyPair),
    Multi(MultiOrderSpec),
    Omnibus(PoissonKernel),
}

impl TestDescriptor {
    /// Observed statistic, centring where the test centres.
    pub fn statistic(&self, s: &PairedSample) -> Result<f64> {
        match self {
            TestDescriptor::Cosine(f) => Ok(cosine_test(s, *f, true)?.statistic),
            TestDescriptor::Multi(spec) => Ok(multi_test(s, spec, true)?.statistic),
            TestDescriptor::Omnibus(k) => Ok(t_omnibus(s, *k)),
        }
    }

    pub fn is_omnibus(&self) -> bool {
        matches!(self, TestDescriptor::Omnibus(_))
    }

    /// Runs the test with its own calibration: χ² for the moment tests,
    /// permutations (`plan` required) for the omnibus test.
    pub fn run(&self, s: &PairedSample, center: bool, plan: Option<PermutationPlan>) -> Result<TestResult> {
        match self {
            TestDescriptor::Cosine(f) => cosine_test(s, *f, center),
            TestDescriptor::Multi(spec) => multi_test(s, spec, center),
            TestDescriptor::Omnibus(k) => {
                let plan = plan.ok_or_else(|| Error::invalid("omnibus test needs a permutation plan"))?;
                permutation_test(s, *k, plan)
            }
        }
    }

    /// Permutation p-value `#{T* > T} / B` for any test.
    pub fn permutation_p_value(&self, s: &PairedSample, plan: PermutationPlan) -> Result<f64> {
        if let TestDescriptor::Omnibus(k) = self {
            return Ok(permutation_test(s, *k, plan)?.p_value);
        }
        let observed = self.statistic(s)?;
        let identity: Vec<usize> = (0..s.len()).collect();
        let mut perm = identity.clone();
        let mut exceed = 0usize;
        for b in 0..plan.permutations as u64 {
            perm.copy_from_slice(&identity);
            perm.shuffle(&mut substream(plan.seed, b));
            if observed < self.statistic(&s.with_second_permuted(&perm))? {
                exceed += 1;
            }
        }
        Ok(exceed as f64 / plan.permutations as f64)
    }
}

impl fmt::Display for TestDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestDescriptor::Cosine(p) => write!(f, "cos:{p}"),
            TestDescriptor::Multi(spec) => write!(f, "multi:{spec}"),
            TestDescriptor::Omnibus(k) => write!(f, "omni:{}", k.lambda()),
        }
    }
}

impl FromStr for TestDescriptor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) =
            s.split_once(':').ok_or_else(|| Error::invalid(format!("test descriptor {s:?} lacks a ':'")))?;
        let arg = arg.trim();
        match kind.trim() {
            "cos" => {
                let nums: Vec<&str> = arg.split(',').collect();
                if nums.len() != 2 {
                    return Err(Error::invalid(format!("cosine test needs two frequencies, got {arg:?}")));
                }
                let parse =
                    |x: &str| x.trim().parse::<i64>().map_err(|_| Error::invalid(format!("bad frequency {x:?}")));
                Ok(TestDescriptor::Cosine(FrequencyPair::new(parse(nums[0])?, parse(nums[1])?)))
            }
            "multi" => Ok(TestDescriptor::Multi(arg.parse()?)),
            "omni" => {
                let lambda = arg.parse::<f64>().map_err(|_| Error::invalid(format!("bad lambda {arg:?}")))?;
                Ok(TestDescriptor::Omnibus(PoissonKernel::new(lambda)?))
            }
            other => Err(Error::invalid(format!("unknown test kind {other:?}"))),
        }
    }
}

impl Serialize for TestDescriptor {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TestDescriptor {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How rejection thresholds are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Calibration {
    /// Empirical quantile of the statistic over cross-paired samples;
    /// `critical_replicates` defaults to `max(M, 50)`.
    TwoSample { critical_replicates: Option<usize> },
    /// Permutation p-values for every test.
    Permutation { permutations: usize },
    /// χ² for the moment tests, permutations for the omnibus test.
    Native { permutations: usize },
}

/// A size/power experiment over a grid of dependence values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    /// Values of the model's dependence parameter.
    pub grid: Vec<f64>,
    pub n: usize,
    /// Monte Carlo replicates per grid point.
    pub replicates: usize,
    pub alpha: f64,
    pub tests: Vec<TestDescriptor>,
    pub calibration: Calibration,
    pub seed: u64,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: BenchConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.into_inner().message().trim()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        if self.replicates == 0 {
            return bad("replicates", "must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("{} not in (0, 1)", self.alpha));
        }
        if self.n < 2 {
            return bad("n", "at least two pairs are needed".into());
        }
        if self.grid.is_empty() {
            return bad("grid", "empty".into());
        }
        if self.tests.is_empty() {
            return bad("tests", "empty".into());
        }
        if let Err(e) = self.model.validate() {
            return bad("model", e.to_string());
        }
        for (i, &x) in self.grid.iter().enumerate() {
            if let Err(e) = self.model.with_dependence(x) {
                return bad(&format!("grid[{i}]"), e.to_string());
            }
        }
        match self.calibration {
            Calibration::TwoSample { critical_replicates: Some(mc) } if mc < MIN_CRITICAL_REPLICATES => {
                bad("calibration.critical_replicates", format!("{mc} below {MIN_CRITICAL_REPLICATES}"))
            }
            Calibration::Permutation { permutations: 0 } | Calibration::Native { permutations: 0 } => {
                bad("calibration.permutations", "must be at least 1".into())
            }
            _ => Ok(()),
        }
    }

    fn critical_replicates(&self) -> usize {
        match self.calibration {
            Calibration::TwoSample { critical_replicates } => {
                critical_replicates.unwrap_or(self.replicates.max(MIN_CRITICAL_REPLICATES))
            }
            _ => 0,
        }
    }
}

/// One (grid point, test) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub model: String,
    pub param: f64,
    pub test: String,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub cells: Vec<PowerCell>,
}

impl PowerTable {
    pub fn get(&self, param: f64, test: &str) -> Option<&PowerCell> {
        self.cells.iter().find(|c| c.param == param && c.test == test)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "param", "test", "n", "M", "rate", "wilson_lo", "wilson_hi"]).map_err(csv_err)?;
        for c in &self.cells {
            w.write_record([
                c.model.clone(),
                c.param.to_string(),
                c.test.clone(),
                c.n.to_string(),
                c.m.to_string(),
                sig6(c.rate),
                sig6(c.wilson_lo),
                sig6(c.wilson_hi),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// JSON mirror of the CSV, with the same rounding.
    pub fn to_json(&self) -> Result<String> {
        let rounded = PowerTable {
            cells: self
                .cells
                .iter()
                .map(|c| PowerCell {
                    rate: round6(c.rate),
                    wilson_lo: round6(c.wilson_lo),
                    wilson_hi: round6(c.wilson_hi),
                    ..c.clone()
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&rounded)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(e.to_string())
}

/// Decimal rendering with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn round6(x: f64) -> f64 {
    sig6(x).parse().unwrap_or(x)
}

/// Wilson score interval for `hits` successes out of `m` at confidence `level`.
pub fn wilson_ci(hits: usize, m: usize, level: f64) -> Result<(f64, f64)> {
    if m == 0 || hits > m {
        return Err(Error::invalid(format!("need 0 <= hits <= M with M > 0, got {hits}/{m}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level {level} not in (0, 1)")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let mf = m as f64;
    let p = hits as f64 / mf;
    let z2 = z * z;
    let denom = 1.0 + z2 / mf;
    let centre = (p + z2 / (2.0 * mf)) / denom;
    let half = z * (p * (1.0 - p) / mf + z2 / (4.0 * mf * mf)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == m { 1.0 } else { (centre + half).min(1.0) };
    Ok((lo, hi))
}

/// Benjamini–Yekutieli step-up adjusted p-values, in input order.
pub fn by_correction(pvals: &[f64]) -> Result<Vec<f64>> {
    for (i, &p) in pvals.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("p-value {p} at position {} not in [0, 1]", i + 1)));
        }
    }
    let m = pvals.len();
    let c: f64 = (1..=m).map(|k| 1.0 / k as f64).sum();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut out = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (1..=m).rev() {
        let idx = order[rank - 1];
        running = running.min((m as f64 * c * pvals[idx] / rank as f64).min(1.0));
        out[idx] = running;
    }
    Ok(out)
}

/// Empirical `(1 − α)` quantile: the `⌈(1 − α) m⌉`-th order statistic.
fn upper_quantile(mut xs: Vec<f64>, alpha: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = ((1.0 - alpha) * xs.len() as f64).ceil() as usize;
    xs[k.clamp(1, xs.len()) - 1]
}

fn wrap_replicate(replicate: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Replicate { replicate, source: Box::new(e) }
}

/// Critical values of several tests from the same `mc` cross-paired samples.
pub fn critical_values(
    model: &ModelSpec,
    tests: &[TestDescriptor],
    n: usize,
    mc: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if mc < MIN_CRITICAL_REPLICATES {
        return Err(Error::invalid(format!(
            "at least {MIN_CRITICAL_REPLICATES} critical-value replicates are required"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} not in (0, 1)")));
    }
    let stats = (0..mc)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let a = model.sample_with(&mut rng, n)?;
            let b = model.sample_with(&mut rng, n)?;
            let cross = a.cross_paired(&b)?;
            tests.iter().map(|t| t.statistic(&cross)).collect::<Result<Vec<f64>>>()
        })
        .enumerate()
        .map(|(i, r)| r.map_err(wrap_replicate(i)))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok((0..tests.len()).map(|t| upper_quantile(stats.iter().map(|row| row[t]).collect(), alpha)).collect())
}

/// Two-sample critical value of one test: the `(1 − α)` quantile of the
/// statistic over `mc` samples pairing the first margin of one draw with
/// the second margin of another.
pub fn critical_value_two_sample(
    model: &ModelSpec,
    test: &TestDescriptor,
    n: usize,
    mc: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    Ok(critical_values(model, std::slice::from_ref(test), n, mc, alpha, seed)?[0])
}

/// Rejection rates for every grid point and test of `cfg`.
pub fn empirical_power(cfg: &BenchConfig) -> Result<PowerTable> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &x in &cfg.grid {
        let model = cfg.model.with_dependence(x)?;
        // keyed by the parameter value so a cell does not depend on the rest of the grid
        let point_seed = derive_seed(cfg.seed, x.to_bits());
        let crits = match cfg.calibration {
            Calibration::TwoSample { .. } => Some(critical_values(
                &model,
                &cfg.tests,
                cfg.n,
                cfg.critical_replicates(),
                cfg.alpha,
                derive_seed(point_seed, 1),
            )?),
            _ => None,
        };
        let sample_seed = derive_seed(point_seed, 2);
        let perm_seed = derive_seed(point_seed, 3);
        let ntests = cfg.tests.len();
        let rejections = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| -> Result<Vec<bool>> {
                let s = model.sample_with(&mut substream(sample_seed, r as u64), cfg.n)?;
                cfg.tests
                    .iter()
                    .enumerate()
                    .map(|(t, test)| {
                        let plan = |b| PermutationPlan::new(b, derive_seed(perm_seed, (r * ntests + t) as u64));
                        match cfg.calibration {
                            Calibration::TwoSample { .. } => {
                                let crit = crits.as_ref().expect("critical values computed")[t];
                                Ok(test.statistic(&s)? > crit)
                            }
                            Calibration::Permutation { permutations } => {
                                Ok(test.permutation_p_value(&s, plan(permutations)?)? < cfg.alpha)
                            }
                            Calibration::Native { permutations } => {
                                Ok(test.run(&s, true, Some(plan(permutations)?))?.p_value < cfg.alpha)
                            }
                        }
                    })
                    .collect()
            })
            .enumerate()
            .map(|(r, res)| res.map_err(wrap_replicate(r)))
            .collect::<Result<Vec<Vec<bool>>>>()?;
        for (t, test) in cfg.tests.iter().enumerate() {
            let hits = rejections.iter().filter(|row| row[t]).count();
            let (lo, hi) = wilson_ci(hits, cfg.replicates, 0.95)?;
            cells.push(PowerCell {
                model: model.family().to_string(),
                param: x,
                test: test.to_string(),
                n: cfg.n,
                m: cfg.replicates,
                rate: hits as f64 / cfg.replicates as f64,
                wilson_lo: lo,
                wilson_hi: hi,
            });
        }
    }
    Ok(PowerTable { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Interaction;

    #[test]
    fn descriptor_round_trip() {
        for s in ["cos:1,1", "cos:1,-1", "multi:1,-1,1,1", "multi:1,-1,1,1/2,1", "omni:0.1", "omni:2"] {
            let d: TestDescriptor = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        for bad in ["cos:1", "omni:0", "omni:x", "foo:1", "cos1,1", "multi:0,0"] {
            assert!(bad.parse::<TestDescriptor>().is_err(), "{bad}");
        }
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_ci(0, 100, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_ci(100, 100, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo > 0.95);
        // closed formula written out independently, z = Φ⁻¹(0.975)
        let z = 1.959_963_984_540_054_f64;
        let (p, m) = (0.05, 1000.0);
        let c = (p + z * z / (2.0 * m)) / (1.0 + z * z / m);
        let h = z * (p * (1.0 - p) / m + z * z / (4.0 * m * m)).sqrt() / (1.0 + z * z / m);
        let (lo, hi) = wilson_ci(50, 1000, 0.95).unwrap();
        assert!((lo - (c - h)).abs() < 1e-10 && (hi - (c + h)).abs() < 1e-10);
        assert!(lo < p && p < hi);
        assert!(wilson_ci(5, 4, 0.95).is_err());
    }

    #[test]
    fn by_examples() {
        assert_eq!(by_correction(&[0.3]).unwrap(), vec![0.3]);
        let a = by_correction(&[0.01, 0.5]).unwrap();
        assert!((a[0] - 0.03).abs() < 1e-15 && (a[1] - 0.75).abs() < 1e-15);
        let a = by_correction(&[0.5, 0.01]).unwrap();
        assert!((a[1] - 0.03).abs() < 1e-15 && (a[0] - 0.75).abs() < 1e-15);
        let c3 = 1.0 + 0.5 + 1.0 / 3.0;
        for v in by_correction(&[0.2; 3]).unwrap() {
            assert!((v - (c3 * 0.2f64).min(1.0)).abs() < 1e-15);
        }
        assert!(by_correction(&[0.2, 1.2]).is_err());
        assert!(by_correction(&[]).unwrap().is_empty());
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(0.05), "0.0500000");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(0.123456789), "0.123457");
    }

    #[test]
    fn quantile_rule() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(upper_quantile(xs.clone(), 0.05), 95.0);
        assert_eq!(upper_quantile(xs, 0.5), 50.0);
    }

    fn pb_config(calibration: Calibration, replicates: usize) -> BenchConfig {
        BenchConfig {
            name: None,
            model: ModelSpec::Pb { p: 0.0 },
            grid: vec![0.0, 0.8],
            n: 20,
            replicates,
            alpha: 0.05,
            tests: vec!["cos:1,1".parse().unwrap(), "omni:1".parse().unwrap()],
            calibration,
            seed: 5,
        }
    }

    #[test]
    fn power_table_shape_and_determinism() {
        let cfg = pb_config(Calibration::TwoSample { critical_replicates: None }, 60);
        let a = empirical_power(&cfg).unwrap();
        let b = empirical_power(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 4);
        for c in &a.cells {
            assert!((0.0..=1.0).contains(&c.rate));
            assert!(c.wilson_lo <= c.rate && c.rate <= c.wilson_hi);
        }
        assert!(a.get(0.8, "omni:1").unwrap().rate > 0.5);
        let csv = a.to_csv().unwrap();
        assert!(csv.starts_with("model,param,test,n,M,rate,wilson_lo,wilson_hi\n"));
        assert_eq!(csv.lines().count(), 5);
        assert!(a.to_json().unwrap().contains("\"M\": 60"));
    }

    #[test]
    fn single_replicate_runs() {
        for cal in [
            Calibration::TwoSample { critical_replicates: None },
            Calibration::Permutation { permutations: 20 },
            Calibration::Native { permutations: 20 },
        ] {
            let t = empirical_power(&pb_config(cal, 1)).unwrap();
            assert!(t.cells.iter().all(|c| c.rate == 0.0 || c.rate == 1.0));
        }
    }

    #[test]
    fn config_errors_name_keys() {
        let ok = r#"
seed = 1
n = 20
replicates = 10
alpha = 0.05
grid = [0.0]
tests = ["cos:1,1"]
[model]
type = "pb"
p = 0.0
[calibration]
method = "two-sample"
"#;
        assert!(BenchConfig::from_toml(ok).is_ok());
        let missing = ok.replace("[model]\ntype = \"pb\"\np = 0.0\n", "");
        let e = BenchConfig::from_toml(&missing).unwrap_err().to_string();
        assert!(e.contains("model"), "{e}");
        let bad_alpha = ok.replace("alpha = 0.05", "alpha = 1.5");
        assert!(BenchConfig::from_toml(&bad_alpha).unwrap_err().to_string().contains("alpha"));
        let bad_test = ok.replace("cos:1,1", "cos:1");
        let e = BenchConfig::from_toml(&bad_test).unwrap_err().to_string();
        assert!(e.contains("tests"), "{e}");
        let bad_grid = ok.replace("grid = [0.0]", "grid = [0.0, 1.5]");
        assert!(BenchConfig::from_toml(&bad_grid).unwrap_err().to_string().contains("grid[1]"));
    }

    #[test]
    fn critical_value_near_chisq_quantile() {
        let m = ModelSpec::Bcvm { kappa1: 1.0, kappa2: 1.0, kappa3: 0.0, interaction: Interaction::Positive };
        let t: TestDescriptor = "cos:1,1".parse().unwrap();
        let c = critical_value_two_sample(&m, &t, 200, 1000, 0.05, 3).unwrap();
        assert!((c - 3.8415).abs() < 0.2 * 3.8415, "{c}");
        assert!(critical_value_two_sample(&m, &t, 200, 10, 0.05, 3).is_err());
    }
}
