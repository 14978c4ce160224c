//! End-to-end tests of the `chmm` binary.

use std::path::Path;
use std::process::{Command, Output};

fn chmm(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chmm"));
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("EM_")) {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(text: &str, idx: usize) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn missing_machine_prints_usage() {
    let o = chmm(&["sample", "--length", "10"], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn zero_horizon_exits_one() {
    assert_eq!(chmm(&["curves", "--t-max", "0"], &[]).status.code(), Some(1));
    assert_eq!(chmm(&["curves", "--machine", "even", "--t-max", "0"], &[]).status.code(), Some(1));
}

#[test]
fn even_curves() {
    let o = chmm(&["curves", "--machine", "even", "--p", "0.5", "--t-max", "10"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("t,H_lower,H_upper,hmu_t_lower,hmu_t_upper,E_partial_lower,E_partial_upper,gap_sum_lower\n"));
    assert_eq!(text.lines().count(), 11);
    assert!(!text.contains('\r'));
    let hmu = column(&text, 4);
    assert!(hmu.windows(2).all(|w| w[1] <= w[0]));
    assert!(hmu.iter().all(|&h| h > 2.0 / 3.0));
}

#[test]
fn hpm_partial_excess_increases() {
    let o = chmm(&["curves", "--machine", "hpm", "--t-max", "30"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for idx in [5, 6] {
        let e = column(&text, idx);
        assert_eq!(e.len(), 30);
        assert!(e.windows(2).all(|w| w[1] > w[0]), "column {idx}");
    }
}

#[test]
fn env_vars_fill_in_and_flags_win() {
    let env = [("EM_MACHINE", "even"), ("EM_T_MAX", "3")];
    assert_eq!(stdout(&chmm(&["curves"], &env)).lines().count(), 4);
    assert_eq!(stdout(&chmm(&["curves", "--t-max", "5"], &env)).lines().count(), 6);
}

#[test]
fn jsonl_output() {
    let o = chmm(&["curves", "--machine", "bc", "--t-max", "4", "--format", "jsonl"], &[]);
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[3]["gap_sum_lower"].as_f64().unwrap() > 0.0);
}

#[test]
fn budget_exhaustion_exits_two_without_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let o = chmm(
        &["curves", "--machine", "bc", "--t-max", "8", "--word-cap", "5", "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn curves_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let o = chmm(&["curves", "--machine", "even", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 11);
}

#[test]
fn verify_suites_pass() {
    for args in [
        vec!["verify", "--machine", "even"],
        vec!["verify", "--machine", "hpm", "--t-max", "40"],
        vec!["verify", "--machine", "bc", "--t-max", "10"],
    ] {
        let o = chmm(&args, &[]);
        assert_eq!(o.status.code(), Some(0), "{args:?}\n{}", stdout(&o));
        assert!(stdout(&o).contains(", 0 failed"));
    }
}

#[test]
fn verify_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("even.csv");
    chmm(&["verify", "--machine", "even", "--out", out.to_str().unwrap()], &[]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("claim,t,value_lower,value_upper,relation,bound,pass,note\n"));
    assert!(text.lines().skip(1).all(|l| l.contains(",true,")));
}

fn sample_file(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let mut full = vec!["sample"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", out.to_str().unwrap()]);
    let o = chmm(&full, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn sampling_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--machine", "bc", "--length", "10000", "--seed", "7"];
    let a = sample_file(dir.path(), "a.txt", &args);
    let b = sample_file(dir.path(), "b.txt", &args);
    assert_eq!(a, b);
    assert_eq!(a.len(), 10_001);
    assert_eq!(*a.last().unwrap(), b'\n');
    let c = sample_file(dir.path(), "c.txt", &["--machine", "bc", "--length", "10000", "--seed", "8"]);
    assert_ne!(a, c);
}

#[test]
fn hpm_sample_is_eventually_periodic() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["1", "2", "3"] {
        let text = sample_file(dir.path(), "h.txt", &["--machine", "hpm", "--length", "100", "--seed", seed]);
        let s = &text[..100];
        let first_zero = s.iter().position(|&c| c == b'0');
        if let Some(z) = first_zero {
            let next = s[z + 1..].iter().position(|&c| c == b'0');
            if let Some(d) = next {
                let period = d + 1;
                assert!(s[z..].windows(period + 1).all(|w| w[0] == w[period]), "seed {seed}");
            }
        }
    }
}
