//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::{PI, TAU};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use torus_indep::bench::{empirical_power, BenchConfig, Calibration, PowerTable, TestDescriptor};
use torus_indep::models::{
    bcvm_kernel, bcvm_normalizer, sample_bcvm, sample_bvm_with_link, sample_bwc, sample_vm, Interaction, ModelSpec,
    VonMises,
};
use torus_indep::omnibus::{series_truncation, t_omnibus, t_omnibus_series, PoissonKernel};
use torus_indep::{cosine_test, d_cos, multi_test, v_hat, FrequencyPair, MultiOrderSpec, PairedSample};

const ALPHA: f64 = 0.05;
const LAMBDAS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, start: Instant, o: &Outcome, failures: &mut Vec<u32>) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {name} ({:.1}s) {}", start.elapsed().as_secs_f64(), o.detail);
    if !o.pass {
        failures.push(id);
    }
}

fn reference_battery() -> Vec<TestDescriptor> {
    ["cos:1,1", "cos:1,-1", "multi:1,-1,1,1", "omni:0.1", "omni:0.5", "omni:1", "omni:2"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}

fn null_models() -> [ModelSpec; 4] {
    [
        ModelSpec::Pb { p: 0.0 },
        ModelSpec::Bwc { rho1: 0.1, rho2: 0.1, rho: 0.0 },
        ModelSpec::Bcvm { kappa1: 1.0, kappa2: 1.0, kappa3: 0.0, interaction: Interaction::Positive },
        ModelSpec::Bvm { kappa1: 1.0, kappa2: 1.0, mu_g: 0.0, kappa_g: 0.0 },
    ]
}

fn config(
    model: ModelSpec,
    grid: Vec<f64>,
    n: usize,
    m: usize,
    tests: Vec<TestDescriptor>,
    cal: Calibration,
    seed: u64,
) -> BenchConfig {
    BenchConfig { name: None, model, grid, n, replicates: m, alpha: ALPHA, tests, calibration: cal, seed }
}

fn rate(t: &PowerTable, param: f64, test: &str) -> f64 {
    t.get(param, test).expect("cell present").rate
}

fn two_sample(mc: usize) -> Calibration {
    Calibration::TwoSample { critical_replicates: Some(mc) }
}

/// Null size of all seven tests under each model's independence point,
/// calibrated by two-sample critical values as in the reference tables. The
/// native calibration (χ² for the moment tests, permutations for the
/// omnibus test) is reported alongside for information.
fn criterion_1() -> Outcome {
    let mut worst = (0.05, String::new());
    let mut pass = true;
    let mut native = Vec::new();
    for (i, model) in null_models().into_iter().enumerate() {
        let cfg = config(model, vec![0.0], 50, 2000, reference_battery(), two_sample(10_000), 100 + i as u64);
        let t = empirical_power(&cfg).expect("size run");
        for c in &t.cells {
            if !(0.035..=0.065).contains(&c.rate) {
                pass = false;
            }
            if (c.rate - 0.05).abs() >= (worst.0 - 0.05f64).abs() {
                worst = (c.rate, format!("{} {}", c.model, c.test));
            }
        }
        let moment_tests = reference_battery().into_iter().filter(|t| !t.is_omnibus()).collect();
        let cfg =
            config(model, vec![0.0], 50, 2000, moment_tests, Calibration::Native { permutations: 1 }, 110 + i as u64);
        let t = empirical_power(&cfg).expect("size run");
        native.extend(t.cells.iter().map(|c| format!("{} {} {:.4}", c.model, c.test, c.rate)));
    }
    println!("  info: asymptotic chi2 sizes at n=50: {}", native.join(", "));
    Outcome {
        pass,
        detail: format!(
            "two-sample calibration with 10^4 critical replicates, band [0.035, 0.065], 28 cells, worst {:.4} at {}",
            worst.0, worst.1
        ),
    }
}

/// Desk-scale power against the reference power tables.
fn criterion_2() -> Outcome {
    let omni = |l: &str| -> TestDescriptor { format!("omni:{l}").parse().unwrap() };
    let cos = |s: &str| -> TestDescriptor { format!("cos:{s}").parse().unwrap() };
    let run = |model, x: f64, tests, seed| {
        empirical_power(&config(model, vec![x], 50, 2000, tests, two_sample(2000), seed)).expect("power run")
    };
    let pb = run(ModelSpec::Pb { p: 0.0 }, 0.6, vec![omni("0.1")], 201);
    let pb4 = run(ModelSpec::Pb { p: 0.0 }, 0.4, vec![omni("1")], 202);
    let bwc = run(ModelSpec::Bwc { rho1: 0.1, rho2: 0.1, rho: 0.0 }, -0.4, vec![omni("0.1")], 203);
    let bcvm = run(null_models()[2], 1.0, vec![cos("1,-1"), cos("1,1")], 204);
    let bvm = run(null_models()[3], 1.0, vec![omni("1")], 205);

    let checks = [
        ("PB p=0.6 T0.1", rate(&pb, 0.6, "omni:0.1"), None, 0.99),
        ("PB p=0.4 T1.0", rate(&pb4, 0.4, "omni:1"), Some(0.8590), 0.0),
        ("BWC rho=0.4 T0.1", rate(&bwc, -0.4, "omni:0.1"), Some(0.9126), 0.0),
        ("BCvM k3=1 Tn(1,-1)", rate(&bcvm, 1.0, "cos:1,-1"), Some(0.8871), 0.0),
        ("BCvM k3=1 Tn(1,1)", rate(&bcvm, 1.0, "cos:1,1"), Some(0.2170), 0.0),
        ("BvM kg=1 T1.0", rate(&bvm, 1.0, "omni:1"), Some(0.9608), 0.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, got, target, floor) in checks {
        let ok = match target {
            Some(t) => (got - t).abs() <= 0.03,
            None => got >= floor,
        };
        pass &= ok;
        let want = match target {
            Some(t) => format!("{:.2}±3", 100.0 * t),
            None => format!(">={:.1}", 100.0 * floor),
        };
        parts.push(format!("{name} {:.2}% ({want}){}", 100.0 * got, if ok { "" } else { " !" }));
    }
    Outcome { pass, detail: parts.join("; ") }
}

/// Proposition 2 direction on positive and negative interaction.
fn criterion_3() -> Outcome {
    let tests: Vec<TestDescriptor> = vec!["cos:1,1".parse().unwrap(), "cos:1,-1".parse().unwrap()];
    let mut out = Vec::new();
    for (inter, seed) in [(Interaction::Positive, 301), (Interaction::Negative, 302)] {
        let model = ModelSpec::Bcvm { kappa1: 1.0, kappa2: 1.0, kappa3: 0.0, interaction: inter };
        let t = empirical_power(&config(model, vec![1.0], 50, 2000, tests.clone(), two_sample(2000), seed))
            .expect("power run");
        out.push((rate(&t, 1.0, "cos:1,1"), rate(&t, 1.0, "cos:1,-1")));
    }
    let pos_gap = out[0].1 - out[0].0;
    let neg_gap = out[1].0 - out[1].1;
    Outcome {
        pass: pos_gap > 0.40 && neg_gap > 0.0,
        detail: format!(
            "positive: (1,-1) - (1,1) = {:.1}pp (> 40); negative: (1,1) - (1,-1) = {:.1}pp (> 0)",
            100.0 * pos_gap,
            100.0 * neg_gap
        ),
    }
}

fn random_sample(rng: &mut ChaCha8Rng, n: usize) -> PairedSample {
    // mildly dependent pairs so the statistic is not trivially small
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let a = rng.gen_range(-PI..PI);
            let b = 0.5 * a + rng.gen_range(-PI..PI);
            (a, b)
        })
        .collect();
    PairedSample::from_pairs(&pairs).unwrap()
}

/// Closed form versus truncated frequency series.
fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=30);
        let s = random_sample(&mut rng, n);
        for lam in LAMBDAS {
            let k = PoissonKernel::new(lam).unwrap();
            let closed = t_omnibus(&s, k);
            let series = t_omnibus_series(&s, k, series_truncation(k, 1e-16)).unwrap();
            let rel = (closed - series).abs() / closed.abs().max(series.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
        }
    }
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("max relative difference {worst:.2e} (<= 1e-8) over 100 samples x 4 lambdas"),
    }
}

/// Rotation invariance of the omnibus and centred moment statistics.
fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let spec: MultiOrderSpec = "1,-1,1,1".parse().unwrap();
    let (mut w_omni, mut w_cos, mut w_q) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(10..=60);
        let s = random_sample(&mut rng, n);
        let r = s.rotated(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        for lam in LAMBDAS {
            let k = PoissonKernel::new(lam).unwrap();
            w_omni = w_omni.max((t_omnibus(&s, k) - t_omnibus(&r, k)).abs());
        }
        for f in [FrequencyPair::new(1, 1), FrequencyPair::new(1, -1)] {
            let a = cosine_test(&s, f, true).unwrap().statistic;
            let b = cosine_test(&r, f, true).unwrap().statistic;
            w_cos = w_cos.max((a - b).abs());
        }
        let a = multi_test(&s, &spec, true).unwrap().statistic;
        let b = multi_test(&r, &spec, true).unwrap().statistic;
        w_q = w_q.max((a - b).abs());
    }
    Outcome {
        pass: w_omni <= 1e-10 && w_cos <= 1e-6 && w_q <= 1e-6,
        detail: format!("T_lambda {w_omni:.2e} (<= 1e-10), T_n {w_cos:.2e} (<= 1e-6), Q {w_q:.2e} (<= 1e-6)"),
    }
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Null distributions of the standardised cosine difference and of Q.
fn criterion_6() -> Outcome {
    let (n, m) = (500, 2000);
    let f = FrequencyPair::new(1, 1);
    let spec: MultiOrderSpec = "1,-1,1,1".parse().unwrap();
    let mut z = Vec::with_capacity(m);
    let mut q = Vec::with_capacity(m);
    for r in 0..m as u64 {
        let a = sample_vm(n, 0.0, 1.0, 2 * r + 600_000).unwrap();
        let b = sample_vm(n, 0.0, 1.0, 2 * r + 600_001).unwrap();
        let s = PairedSample::new(a, b).unwrap();
        z.push((n as f64).sqrt() * d_cos(&s, f) / v_hat(&s, f).sqrt());
        q.push(multi_test(&s, &spec, false).unwrap().statistic);
    }
    let normal = Normal::standard();
    let chi2 = ChiSquared::new(2.0).unwrap();
    let ks_z = ks_distance(z, |x| normal.cdf(x));
    let ks_q = ks_distance(q, |x| chi2.cdf(x));
    Outcome {
        pass: ks_z < 0.05 && ks_q < 0.05,
        detail: format!("KS normal {ks_z:.4} (< 0.05), KS chi2_2 {ks_q:.4} (< 0.05)"),
    }
}

/// WC(0, ρ) distribution function by composite Simpson on the density.
fn wc_cdf_numeric(x: f64, rho: f64) -> f64 {
    let dens = |t: f64| (1.0 - rho * rho) / (TAU * (1.0 + rho * rho - 2.0 * rho * t.cos()));
    let m = 1000;
    let h = (x + PI) / m as f64;
    let mut s = dens(-PI) + dens(x);
    for i in 1..m {
        s += dens(-PI + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn power_series_bessel(nu: u32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(nu as i32) / (1..=nu).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200u32 {
        term *= (x / 2.0).powi(2) / (f64::from(k) * f64::from(k + nu));
        sum += term;
    }
    sum
}

/// Sampler checks for the four models and the von Mises margin.
fn criterion_7() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    // BCvM: 24 x 24 histogram against the numerically normalised density
    let (k1, k2, k3) = (1.0, 1.0, 1.0);
    let n = 100_000;
    let s = sample_bcvm(n, k1, k2, k3, Interaction::Positive, 700).unwrap();
    let bins = 24;
    let w = TAU / bins as f64;
    let mut counts = vec![0.0; bins * bins];
    for (a, b) in s.pairs() {
        let i = (((a + PI) / w) as usize).min(bins - 1);
        let j = (((b + PI) / w) as usize).min(bins - 1);
        counts[i * bins + j] += 1.0;
    }
    let z = bcvm_normalizer(k1, k2, k3, Interaction::Positive, 512);
    let sub = 6;
    let h = w / sub as f64;
    let mut chi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let mut mass = 0.0;
            for p in 0..sub {
                for q in 0..sub {
                    let a = -PI + i as f64 * w + (p as f64 + 0.5) * h;
                    let b = -PI + j as f64 * w + (q as f64 + 0.5) * h;
                    mass += bcvm_kernel(a, b, k1, k2, k3, Interaction::Positive);
                }
            }
            let e = mass * h * h / z * n as f64;
            chi += (counts[i * bins + j] - e).powi(2) / e;
        }
    }
    let crit = ChiSquared::new((bins * bins - 1) as f64).unwrap().inverse_cdf(0.99);
    let ok = chi < crit;
    pass &= ok;
    parts.push(format!("BCvM chi2 {chi:.1} < {crit:.1}: {ok}"));

    // BWC margins
    let (r1, r2) = (0.1, 0.1);
    let big = sample_bwc(100_000, r1, r2, -0.4, 701).unwrap();
    let mean_cos = |xs: &[f64]| xs.iter().map(|x| x.cos()).sum::<f64>() / xs.len() as f64;
    let (e1, e2) = (mean_cos(big.first()), mean_cos(big.second()));
    let small = sample_bwc(10_000, r1, r2, -0.4, 702).unwrap();
    let ks1 = ks_distance(small.first().to_vec(), |x| wc_cdf_numeric(x, r1));
    let ks2 = ks_distance(small.second().to_vec(), |x| wc_cdf_numeric(x, r2));
    let ks_crit = 1.628 / 100.0; // 1% level at n = 10^4
    let ok = (e1 - r1).abs() < 0.01 && (e2 - r2).abs() < 0.01 && ks1 < ks_crit && ks2 < ks_crit;
    pass &= ok;
    parts.push(format!("BWC E[cos] {e1:.4},{e2:.4} KS {ks1:.4},{ks2:.4}: {ok}"));

    // BvM link residual
    let (s, omegas) = sample_bvm_with_link(10_000, 1.0, 1.0, 0.0, 1.0, 703).unwrap();
    let f = VonMises::new(1.0).unwrap();
    let worst = s
        .pairs()
        .zip(&omegas)
        .map(|((a, b), &om)| {
            let d = (TAU * (f.cdf(a) - f.cdf(b)) - om).rem_euclid(TAU);
            d.min(TAU - d)
        })
        .fold(0.0, f64::max);
    let ok = worst <= 1e-6;
    pass &= ok;
    parts.push(format!("BvM residual {worst:.1e}: {ok}"));

    // von Mises mean resultant
    let xs = sample_vm(100_000, 0.0, 2.0, 704).unwrap();
    let rbar = xs.iter().map(|x| x.cos()).sum::<f64>() / xs.len() as f64;
    let target = power_series_bessel(1, 2.0) / power_series_bessel(0, 2.0);
    let ok = (rbar - target).abs() < 0.01;
    pass &= ok;
    parts.push(format!("vM rbar {rbar:.4} vs {target:.4}: {ok}"));

    Outcome { pass, detail: parts.join("; ") }
}

/// Two-sample versus permutation calibration of T_{n,0.5}.
fn criterion_8() -> Outcome {
    let tests: Vec<TestDescriptor> = vec!["omni:0.5".parse().unwrap()];
    let grid = vec![0.0, 0.4];
    let model = ModelSpec::Pb { p: 0.0 };
    let a = empirical_power(&config(model, grid.clone(), 20, 1000, tests.clone(), two_sample(1000), 800)).unwrap();
    let b = empirical_power(&config(
        model,
        grid.clone(),
        20,
        1000,
        tests,
        Calibration::Permutation { permutations: 200 },
        800,
    ))
    .unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for p in grid {
        let (x, y) = (rate(&a, p, "omni:0.5"), rate(&b, p, "omni:0.5"));
        pass &= (x - y).abs() < 0.05;
        parts.push(format!("p={p}: two-sample {:.2}% vs permutation {:.2}%", 100.0 * x, 100.0 * y));
    }
    Outcome { pass, detail: format!("{} (< 5pp)", parts.join(", ")) }
}

fn run_cli(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_torus-indep"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .expect("binary runs")
}

/// Byte-identical output for repeated seeded commands at 1 and many threads.
fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let data = p("data.csv");
    let cfg = p("bench.toml");
    std::fs::write(
        &cfg,
        "seed = 9\nn = 30\nreplicates = 40\nalpha = 0.05\ngrid = [0.0, 0.5]\n\
         tests = [\"cos:1,1\", \"multi:1,-1,1,1\", \"omni:1\"]\n\
         [model]\ntype = \"bvm\"\nkappa1 = 1.0\nkappa2 = 1.0\nmu_g = 0.0\nkappa_g = 0.0\n\
         [calibration]\nmethod = \"native\"\npermutations = 99\n",
    )
    .unwrap();
    let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
    for threads in ["1", "16", "1", "16"] {
        let mut run = Vec::new();
        let o = run_cli(
            &[
                "sample", "--model", "bcvm", "--kappa1", "1", "--kappa2", "1", "--kappa3", "1", "--n", "200", "--seed",
                "4", "--output", &data,
            ],
            threads,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        run.push(std::fs::read(&data).unwrap());
        let o = run_cli(
            &[
                "test", "--input", &data, "--perms", "999", "--seed", "11", "--lambda", "0.1", "--lambda", "1",
                "--cos", "1,-1", "--multi", "1,-1,1,1",
            ],
            threads,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        run.push(o.stdout);
        let out_dir = p(&format!("bench_{threads}"));
        let o = run_cli(&["bench", "--config", &cfg, "--output-dir", &out_dir], threads);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        run.push(std::fs::read(format!("{out_dir}/bench.json")).unwrap());
        outputs.push(run);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Outcome {
        pass: same,
        detail: "sample CSV, test JSON and bench JSON compared across 4 runs at 1 and 16 threads".into(),
    }
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "null size of the seven tests, n=50, M=2000", criterion_1),
        (2, "power reproduction at desk scale", criterion_2),
        (3, "optimality direction on cosine alternatives", criterion_3),
        (4, "closed-form omnibus equals frequency series", criterion_4),
        (5, "rotation invariance", criterion_5),
        (6, "asymptotic null distributions", criterion_6),
        (7, "sampler validation", criterion_7),
        (8, "two-sample vs permutation calibration", criterion_8),
        (9, "determinism of seeded commands", criterion_9),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = Vec::new();
    let total = Instant::now();
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        report(id, name, start, &o, &mut failures);
    }
    println!("acceptance: {} failed, total {:.1}s", failures.len(), total.elapsed().as_secs_f64());
    if !failures.is_empty() {
        std::process::exit(1);
    }
}
