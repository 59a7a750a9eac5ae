use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn renorm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_renorm"))
        .args(args)
        .current_dir(dir)
        .env_remove("RENORM_PRECISION")
        .output()
        .expect("spawn renorm")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &Value) -> f64 {
    match v {
        Value::String(s) => s.parse().unwrap(),
        v => v.as_f64().unwrap(),
    }
}

#[test]
fn solve_writes_a_solution() {
    let d = tempfile::tempdir().unwrap();
    let o = renorm(d.path(), &["solve", "--ell", "2", "--out", "s.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&d.path().join("s.json"));
    assert!((num(&s["tau"]) - 6.2645).abs() < 1e-3);
    assert_eq!(s["order_type"], serde_json::json!([1, 2]));
}

#[test]
fn solve_rejects_bad_input() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&renorm(d.path(), &["solve", "--ell", "1.0"])), 3);
    assert_eq!(code(&renorm(d.path(), &["solve", "--type", "[1,3,2,4]"])), 3);
    assert_eq!(code(&renorm(d.path(), &["solve", "--tol", "1e-3"])), 3);
    assert_eq!(code(&renorm(d.path(), &["solve", "--bogus"])), 3);
    assert_eq!(code(&renorm(d.path(), &["solve", "--out", "/nonexistent/dir/s.json"])), 3);
}

fn footer(csv: &str) -> f64 {
    csv.lines().find_map(|l| l.strip_prefix("tau_inf=")).unwrap().parse().unwrap()
}

#[test]
fn sweep_table_and_extrapolation() {
    let d = tempfile::tempdir().unwrap();
    let o = renorm(d.path(), &["sweep", "--ells", "2,4,8,16,32,64,128", "--out", "w.csv", "--solutions-dir", "sols"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.path().join("w.csv")).unwrap();
    assert!(csv.starts_with("ell,tau,alpha,residual,iters\n"));
    let taus: Vec<f64> = csv.lines().skip(1).take(7).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(taus.windows(2).all(|w| w[1] > w[0]));
    let t = footer(&csv);
    assert!((25.0..=35.0).contains(&t), "{t}");
    assert_eq!(std::fs::read_dir(d.path().join("sols")).unwrap().count(), 7);
    assert_eq!(code(&renorm(d.path(), &["sweep", "--ells", "4,2"])), 3);
}

#[test]
fn single_row_sweep_matches_solve() {
    let d = tempfile::tempdir().unwrap();
    let flags = ["--degree", "40", "--tol", "1e-11"];
    let mut a = vec!["solve", "--ell", "4", "--out", "s.json"];
    a.extend(flags);
    assert_eq!(code(&renorm(d.path(), &a)), 0);
    let mut b = vec!["sweep", "--ells", "4", "--out", "w.csv", "--solutions-dir", "sols"];
    b.extend(flags);
    assert_eq!(code(&renorm(d.path(), &b)), 0);
    let one = json(&d.path().join("s.json"));
    let sol_file = std::fs::read_dir(d.path().join("sols")).unwrap().next().unwrap().unwrap().path();
    assert_eq!(one["tau"], json(&sol_file)["tau"]);
}

#[test]
fn julia_defaults() {
    let d = tempfile::tempdir().unwrap();
    let o = renorm(d.path(), &["julia", "--width", "100", "--height", "80", "--out", "j.pgm"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let pgm = std::fs::read(d.path().join("j.pgm")).unwrap();
    let head = b"P5\n100 80\n255\n";
    assert!(pgm.starts_with(head));
    let px = &pgm[head.len()..];
    assert_eq!(px.len(), 8000);
    for j in 0..80 {
        assert_eq!(&px[j * 100..(j + 1) * 100], &px[(79 - j) * 100..(80 - j) * 100]);
    }
    let st = json(&d.path().join("j.json"));
    let s = &st["stats"];
    assert!(num(&s["mult_b"]) > 1.0 && num(&s["mult_z0"]) < 1.0);
    assert!(num(&s["unknown_fraction"]) <= 0.05);
}

#[test]
fn julia_without_attracting_fixed_point() {
    let d = tempfile::tempdir().unwrap();
    let o = renorm(d.path(), &["julia", "--a", "0.5", "--c", "0.2", "--width", "20", "--height", "20"]);
    assert_eq!(code(&o), 4);
    assert_eq!(code(&renorm(d.path(), &["julia", "--re-min", "1", "--re-max", "0"])), 3);
}

#[test]
fn verify_round_trip_and_corruption() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&renorm(d.path(), &["solve", "--out", "s.json"])), 0);
    let o = renorm(d.path(), &["verify", "--input", "s.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let mut s = json(&d.path().join("s.json"));
    s["tau"] = Value::String("6.3".into());
    std::fs::write(d.path().join("bad.json"), serde_json::to_string(&s).unwrap()).unwrap();
    assert_ne!(code(&renorm(d.path(), &["verify", "--input", "bad.json"])), 0);
    std::fs::write(d.path().join("junk.json"), "{").unwrap();
    assert_ne!(code(&renorm(d.path(), &["verify", "--input", "junk.json"])), 0);
}

#[test]
fn config_file_and_flag_precedence() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.json"), r#"{"ell": 4, "out": "from_file.json"}"#).unwrap();
    assert_eq!(code(&renorm(d.path(), &["--config", "c.json", "solve"])), 0);
    assert_eq!(num(&json(&d.path().join("from_file.json"))["ell"]), 4.0);
    assert_eq!(code(&renorm(d.path(), &["--config", "c.json", "solve", "--ell", "3", "--out", "flag.json"])), 0);
    assert_eq!(num(&json(&d.path().join("flag.json"))["ell"]), 3.0);
    std::fs::write(d.path().join("bad.json"), r#"{"elll": 4}"#).unwrap();
    assert_eq!(code(&renorm(d.path(), &["--config", "bad.json", "solve"])), 3);
}

#[test]
fn precision_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_renorm"))
            .args(["solve", "--out", "s.json"])
            .current_dir(d.path())
            .env("RENORM_PRECISION", v)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("dd")), 0);
    assert_eq!(json(&d.path().join("s.json"))["precision"], "dd");
    assert_eq!(code(&run("quad")), 3);
}

#[test]
fn runs_are_bit_reproducible() {
    let d = tempfile::tempdir().unwrap();
    for out in ["a.json", "b.json"] {
        assert_eq!(code(&renorm(d.path(), &["solve", "--ell", "6", "--out", out])), 0);
    }
    for out in ["a.pgm", "b.pgm"] {
        assert_eq!(code(&renorm(d.path(), &["julia", "--width", "60", "--height", "40", "--out", out])), 0);
    }
    let same = |a: &str, b: &str| std::fs::read(d.path().join(a)).unwrap() == std::fs::read(d.path().join(b)).unwrap();
    assert!(same("a.json", "b.json") && same("a.pgm", "b.pgm"));
}

#[test]
fn limit_estimate_and_too_few_rows() {
    let d = tempfile::tempdir().unwrap();
    let o = renorm(d.path(), &["limit", "--out", "l.json", "--diagnostics", "ld.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let l = json(&d.path().join("l.json"));
    assert!(num(&l["c0"]) < 0.0 && num(&l["epsilon"]) > 0.0 && num(&l["tau"]) > 1.0);
    let diag = std::fs::read_to_string(d.path().join("ld.csv")).unwrap();
    assert!(diag.starts_with("ell,x0,tau,C0,C1,C2,mult_measured,mult_predicted\n"));
    assert_eq!(diag.lines().count(), 9);
    assert_eq!(code(&renorm(d.path(), &["limit", "--ells", "2,4,8"])), 2);
}
