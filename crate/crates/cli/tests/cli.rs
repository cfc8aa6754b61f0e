use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nlsnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlsnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    let out = dir.to_str().unwrap();
    all.extend(["--out", out]);
    nlsnet(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

/// Every data field must carry 17 significant digits.
fn assert_full_precision(field: &str) {
    let mantissa = field.split('e').next().unwrap();
    let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
    assert!(field.contains('e') && digits == 17, "`{field}` is not printed to 17 digits");
}

#[test]
fn unknown_key_exits_with_config_status() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["forward", "--set", "learning_rate=0.1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"scenario": "example2", "stepz": 3}"#).unwrap();
    let o = run_in(dir.path(), &["forward", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("stepz"));
}

#[test]
fn malformed_inputs_are_config_errors() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["forward", "--set", "m"],
        vec!["forward", "--scenario", "example4"],
        vec!["forward", "--set", "m=1"],
        vec!["landscape", "--scenario", "example1"],
        vec!["verify", "--gates", "residual,bogus"],
        vec!["invert", "--set", "lr_decay=2"],
        vec!["invert", "--set", "library=[\"x^3\"]"],
    ] {
        assert_eq!(code(&run_in(dir.path(), &args)), 2, "{args:?}");
    }
}

#[test]
fn verify_passes_on_defaults() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rows = lines(&dir.path().join("verify.csv"));
    assert_eq!(rows[0], "scenario,gate,value,threshold,pass");
    assert_eq!(rows.len(), 1 + 3 * 4);
    assert!(rows[1..].iter().all(|r| r.ends_with(",true")));
}

#[test]
fn injected_sign_fault_fails_gates() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["verify", "--set", "inject_fault=nonlinear-sign"]);
    assert_eq!(code(&o), 5);
    let rows = lines(&dir.path().join("verify.csv"));
    assert!(rows.iter().any(|r| r.contains(",residual,") && r.ends_with(",false")));
}

#[test]
fn gate_subset_runs_only_that_gate() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["verify", "--gates", "gradient", "--scenario", "example3"]);
    assert_eq!(code(&o), 0);
    let rows = lines(&dir.path().join("verify.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("example3,gradient,"));
}

#[test]
fn runaway_training_exits_with_divergence_status() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["invert", "--set", "max_epochs=10", "--set", "lr=1e300"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn forward_schema() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["forward", "--scenario", "example2", "--set", "m=64"]);
    assert_eq!(code(&o), 0);
    let rows = lines(&dir.path().join("forward.csv"));
    assert_eq!(rows[0], "x,re_psi,im_psi,abs_psi,re_exact,im_exact");
    assert_eq!(rows.len(), 65);
    rows[1].split(',').for_each(assert_full_precision);

    let dir3 = TempDir::new().unwrap();
    let o = run_in(dir3.path(), &["forward", "--scenario", "example3", "--set", "m=128"]);
    assert_eq!(code(&o), 0);
    let rows = lines(&dir3.path().join("forward.csv"));
    assert_eq!(rows[0], "field,x,re_psi,im_psi,abs_psi,re_exact,im_exact");
    assert_eq!(rows.len(), 1 + 2 * 128);
}

#[test]
fn invert_schema() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["invert", "--scenario", "example2", "--set", "m=64", "--set", "max_epochs=7"]);
    assert_eq!(code(&o), 0);
    let hist = lines(&dir.path().join("history.csv"));
    assert_eq!(hist[0], "epoch,J,e_psi,e_V,lr");
    assert_eq!(hist.len(), 1 + 8);
    let coeffs = lines(&dir.path().join("coeffs.csv"));
    assert_eq!(coeffs[0], "name,c,truth");
    assert_eq!(coeffs.len(), 11);
    assert!(coeffs.iter().any(|r| r.starts_with("cos^2(x),") && r.ends_with(",-1.0000000000000000e0")));
    let pot = lines(&dir.path().join("potential.csv"));
    assert_eq!(pot[0], "x,V_num,V_exact");
    assert_eq!(pot.len(), 65);

    let dir3 = TempDir::new().unwrap();
    let o = run_in(dir3.path(), &["invert", "--scenario", "example3", "--set", "m=128", "--set", "max_epochs=3"]);
    assert_eq!(code(&o), 0);
    let hist = lines(&dir3.path().join("history.csv"));
    assert_eq!(hist[0], "epoch,J,e_psi,e_zeta1,e_zeta2,lr");
    assert_eq!(hist.len(), 1 + 4);
    assert_eq!(lines(&dir3.path().join("zetas.csv")).len(), 3);
}

#[test]
fn converge_and_landscape_schema() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["converge", "--set", "values=[10,20,40]", "--set", "m=256"]);
    assert_eq!(code(&o), 0);
    let rows = lines(&dir.path().join("convergence.csv"));
    assert_eq!(rows[0], "value,e_psi,l2_error");
    assert_eq!(rows.len(), 4);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let slope: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("l2_slope,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope - 2.0).abs() < 0.1, "observed order {slope}");

    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["landscape", "--set", "m=128", "--set", "n1=5", "--set", "n2=4"]);
    assert_eq!(code(&o), 0);
    let rows = lines(&dir.path().join("landscape.csv"));
    assert_eq!(rows[0], "zeta1,zeta2,J");
    assert_eq!(rows.len(), 1 + 20);
}

#[test]
fn outputs_are_deterministic_and_config_reproduces_run() {
    let args = ["landscape", "--set", "m=128", "--set", "n1=6", "--set", "n2=6"];
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&run_in(a.path(), &args)), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_nlsnet"))
        .args(args)
        .args(["--out", b.path().to_str().unwrap()])
        .env("NLS_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for f in ["landscape.csv", "summary.csv", "config.resolved.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }

    // Replaying the resolved copy gives the same files.
    let c = TempDir::new().unwrap();
    let resolved = a.path().join("config.resolved.json");
    assert_eq!(code(&run_in(c.path(), &["landscape", "--config", resolved.to_str().unwrap()])), 0);
    for f in ["landscape.csv", "config.resolved.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(c.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn example2_domain_note_is_printed() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["forward", "--scenario", "example2", "--set", "m=32"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("note: example2"));
}
