use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torus-indep"))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn same_json(a: &Value, b: &Value, path: &str) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()), "{path}: {x} vs {y}");
        }
        (Value::Object(x), Value::Object(y)) => {
            let kx: Vec<_> = x.keys().collect();
            let ky: Vec<_> = y.keys().collect();
            assert_eq!(kx, ky, "{path}");
            for k in x.keys() {
                same_json(&x[k], &y[k], &format!("{path}.{k}"));
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{path}");
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                same_json(u, v, &format!("{path}[{i}]"));
            }
        }
        _ => assert_eq!(a, b, "{path}"),
    }
}

#[test]
fn golden_run_record() {
    let o = run_in(&data_dir(), &["test", "--input", "bcvm_k3_2.csv", "--seed", "7", "--perms", "999"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got: Value = serde_json::from_slice(&o.stdout).unwrap();
    let want: Value =
        serde_json::from_str(&std::fs::read_to_string(data_dir().join("golden_test_record.json")).unwrap()).unwrap();
    same_json(&got, &want, "$");
}

#[test]
fn dependent_sample_is_detected() {
    let o =
        run_in(&data_dir(), &["test", "--input", "bcvm_k3_2.csv", "--seed", "1", "--perms", "199", "--cos", "1,-1"]);
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    let results = rec["results"].as_array().unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0]["test"], "cos:1,-1");
    assert!(results[0]["p_value"].as_f64().unwrap() < 0.05);
}

#[test]
fn lag_zero_rejected_and_degrees_converted() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "series.csv", "10\n20\n35\n50\n80\n");
    let o = run(&["test", "--input", &f, "--lag", "0", "--cos", "1,1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lag"), "{}", stderr(&o));

    let o = run(&["test", "--input", &f, "--lag", "1", "--degrees", "--cos", "1,1", "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["n"], 4);

    let two = write(dir.path(), "two.csv", "a,b\n1,2\n");
    let o = run(&["test", "--input", &two, "--cos", "1,1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_row_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.csv", "theta1,theta2\n0.1,0.2\n0.3,0.4\n0.5,oops\n");
    let o = run(&["test", "--input", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn numerical_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "flat.csv", "0.1,0.5\n0.2,0.5\n0.3,0.5\n0.4,0.5\n");
    let o = run(&["test", "--input", &f, "--cos", "1,1", "--no-center", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rec["results"][0]["error"].as_str().unwrap().contains("degenerate"));
}

#[test]
fn sample_round_trip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let out_s = out.to_string_lossy().into_owned();
    let o = run(&[
        "sample", "--model", "bwc", "--rho1", "0.1", "--rho2", "0.1", "--rho", "-0.4", "--n", "25", "--seed", "3",
        "--output", &out_s,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# model=bwc(rho1=0.1,rho2=0.1,rho=-0.4) n=25 seed=3\ntheta1,theta2\n"));
    let s = torus_indep::cli::ingest(&text, None, false, false).unwrap();
    let direct = torus_indep::models::sample_bwc(25, 0.1, 0.1, -0.4, 3).unwrap();
    assert_eq!(s, direct);

    let o = run(&["sample", "--model", "pb", "--p", "0.5", "--n", "0", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["sample", "--model", "pb", "--p", "1.5", "--n", "10", "--seed", "1", "--output", &out_s]);
    assert_eq!(o.status.code(), Some(1));
    // nothing written on validation failure
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
    let o = run(&["sample", "--model", "bcvm", "--kappa1", "1", "--n", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kappa2"));
}

#[test]
fn seed_is_drawn_and_recorded_when_missing() {
    let o = run_in(&data_dir(), &["test", "--input", "bcvm_k3_2.csv", "--lambda", "1", "--perms", "99"]);
    assert!(o.status.success());
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    let seed = rec["seed"].as_u64().unwrap();
    assert_eq!(rec["results"][0]["params"]["seed"], seed.to_string());
}

#[test]
fn stamp_adds_timestamp() {
    let o = run_in(&data_dir(), &["test", "--input", "bcvm_k3_2.csv", "--cos", "1,1", "--seed", "1", "--stamp"]);
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rec["timestamp"].as_u64().unwrap() > 1_600_000_000);
}

#[test]
fn bench_config_errors_and_degenerate_budget() {
    let dir = tempfile::tempdir().unwrap();
    let body = "seed = 1\nn = 20\nreplicates = 1\nalpha = 0.05\ngrid = [0.0, 0.5]\ntests = [\"cos:1,1\", \"omni:1\"]\n\
                [calibration]\nmethod = \"two-sample\"\n";
    let cfg = write(dir.path(), "nomodel.toml", body);
    let o = run(&["bench", "--config", &cfg, "--output-dir", &dir.path().to_string_lossy()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("model"), "{}", stderr(&o));

    let cfg = write(
        dir.path(),
        "bad_kappa.toml",
        &format!("{body}[model]\ntype = \"bvm\"\nkappa1 = 1.0\nkappa2 = \"x\"\nmu_g = 0.0\nkappa_g = 0.0\n"),
    );
    let o = run(&["bench", "--config", &cfg, "--output-dir", &dir.path().to_string_lossy()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kappa2"), "{}", stderr(&o));

    let cfg = write(dir.path(), "one.toml", &format!("{body}[model]\ntype = \"pb\"\np = 0.0\n"));
    let o = run(&["bench", "--config", &cfg, "--output-dir", &dir.path().to_string_lossy()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "model,param,test,n,M,rate,wilson_lo,wilson_hi");
    for line in lines {
        let rate: f64 = line.rsplit(',').nth(2).unwrap().parse().unwrap();
        assert!(rate == 0.0 || rate == 1.0, "{line}");
    }
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("one.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn adjust_command() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.csv", "p\n0.01\n0.5\n");
    let o = run(&["adjust", "--input", &f]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout), "p,by_adjusted\n0.01,0.03\n0.5,0.75\n");
    let f = write(dir.path(), "one.csv", "0.01\n");
    assert_eq!(String::from_utf8_lossy(&run(&["adjust", "--input", &f]).stdout), "p_value,by_adjusted\n0.01,0.01\n");
    let f = write(dir.path(), "empty.csv", "");
    assert_eq!(run(&["adjust", "--input", &f]).status.code(), Some(1));
    let f = write(dir.path(), "bad.csv", "0.2\n0.3\n-0.1\n");
    let o = run(&["adjust", "--input", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"));
}

#[test]
fn null_pb_files_rarely_reject() {
    let dir = tempfile::tempdir().unwrap();
    let mut small = 0;
    for seed in 0..40 {
        let f = dir.path().join(format!("pb{seed}.csv")).to_string_lossy().into_owned();
        assert!(run(&[
            "sample",
            "--model",
            "pb",
            "--p",
            "0",
            "--n",
            "50",
            "--seed",
            &seed.to_string(),
            "--output",
            &f
        ])
        .status
        .success());
        let o = run(&["test", "--input", &f, "--lambda", "1", "--perms", "199", "--seed", "5"]);
        let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
        if rec["results"][0]["p_value"].as_f64().unwrap() < 0.05 {
            small += 1;
        }
    }
    // about 2 of 40 expected
    assert!(small <= 6, "{small} of 40 null files rejected");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["test"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
