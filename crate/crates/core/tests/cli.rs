use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn pathreg(args: &[&str]) -> Output {
    pathreg_in(args, None)
}

fn pathreg_in(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pathreg"));
    cmd.args(args).env_remove("PATHREG_OUT_DIR");
    if let Some(d) = out_dir {
        cmd.env("PATHREG_OUT_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: impl Iterator<Item = String>) -> PathBuf {
    let p = dir.join(name);
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    fs::write(&p, s).unwrap();
    p
}

fn linear(dir: &Path, n: usize) -> PathBuf {
    write_csv(dir, "linear.csv", "t,v1", (0..=n).map(|i| {
        let t = i as f64 / n as f64;
        format!("{t},{t}")
    }))
}

#[test]
fn besov_norm_of_linear_path() {
    let dir = tempfile::tempdir().unwrap();
    let f = linear(dir.path(), 512);
    let o = pathreg(&["norm", "--kind", "besov", "--delta", "0.75", "--p", "2", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o)["result"]["value"].as_f64().unwrap();
    assert!((v / (8.0f64 / 3.0).sqrt() - 1.0).abs() < 0.01, "{v}");
}

#[test]
fn qvar_of_monotone_path_is_the_increment() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_csv(dir.path(), "m.csv", "t,v1", ["0,0", "0.25,0.5", "0.5,0.6", "1,2"].map(String::from).into_iter());
    for q in ["1", "1.5", "3"] {
        let o = pathreg(&["norm", "--kind", "qvar", "--q", q, f.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let doc = json(&o);
        assert!((doc["result"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(doc["command"], "norm");
        assert_eq!(doc["schema_version"], 1);
    }
}

#[test]
fn bad_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathreg(&["norm", "--kind", "sup", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let bad = write_csv(dir.path(), "bad.csv", "t,v1", ["0,0", "0.5,oops", "1,1"].map(String::from).into_iter());
    let o = pathreg(&["norm", "--kind", "sup", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = pathreg(&["norm", "--kind", "besov", "--p", "2", linear(dir.path(), 4).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(pathreg(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn verify_fixtures() {
    let fbm = fixture("fbm_cm_h025.csv");
    let fbm = fbm.to_str().unwrap();
    let o = pathreg(&["verify", "--theorem", "theorem2", "--delta", "0.7", "--p", "2", fbm]);
    assert_eq!(o.status.code(), Some(0));
    let doc = json(&o);
    assert_eq!(doc["pass"], true);
    assert!(doc["result"][0]["empirical_constant"].as_f64().unwrap() < 96.0);

    let ctl = fixture("sqrt_control.csv");
    let o = pathreg(&["verify", "--theorem", "superadditivity", "--control", ctl.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["pass"], false);

    let o = pathreg(&["verify", "--theorem", "theorem2", "--delta", "0.4", "--p", "2", fbm]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("α=δ−1/p>0"));

    let o = pathreg(&["verify", "--theorem", "superadditivity", "--control-kind", "besov", "--delta", "0.75", "--p", "2", fbm]);
    assert_eq!(o.status.code(), Some(0));
    let o = pathreg(&["verify", "--theorem", "ratio", "--source", "w1p:p=2", "--target", "holder:alpha=0.5", fbm]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn fbm_of_ones_splits_into_k1_and_k2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    let o = pathreg(&["fbm", "--H", "0.25", "--g", "ones", "--grid", "1024", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = &json(&o)["result"];
    let (h, k1, k2) = (r["h_end"].as_f64().unwrap(), r["k1_end"].as_f64().unwrap(), r["k2_end"].as_f64().unwrap());
    assert!((h - k1 - k2).abs() < 1e-12);
    assert!((k1 / (4.0 / 3.0) - 1.0).abs() < 5e-3);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,v1\n"));
    assert_eq!(text.lines().count(), 1026);
}

#[test]
fn stochastic_commands_need_a_seed_and_are_reproducible() {
    assert_eq!(pathreg(&["ebm-tail", "--delta", "0.4", "--p", "4", "--replicas", "20"]).status.code(), Some(2));
    let args = ["ebm-tail", "--delta", "0.4", "--p", "4", "--replicas", "40", "--steps", "64", "--bootstrap", "50", "--seed", "5"];
    let a = pathreg(&args);
    let b = pathreg(&args);
    assert_ne!(a.status.code(), Some(2));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["result"]["replicas"], 40);
}

#[test]
fn single_replica_runs_but_tail_fit_needs_samples() {
    let base = ["ebm-tail", "--delta", "0.4", "--p", "4", "--replicas", "1", "--steps", "32", "--seed", "1"];
    assert_ne!(pathreg(&base).status.code(), Some(2));
    let mut with_fit = base.to_vec();
    with_fit.push("--tail-fit");
    assert_eq!(pathreg(&with_fit).status.code(), Some(2));
}

#[test]
fn young_and_lift_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let n = 256;
    let f = linear(dir.path(), n);
    let g = write_csv(dir.path(), "sq.csv", "t,v1", (0..=n).map(|i| {
        let t = i as f64 / n as f64;
        format!("{t},{}", t * t)
    }));
    let o = pathreg_in(&["young", "--p", "1", "--q", "1", f.to_str().unwrap(), g.to_str().unwrap()], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let doc = json(&o);
    assert!((doc["result"]["integral"]["value"][0].as_f64().unwrap() - 2.0 / 3.0).abs() < 5e-3);
    assert!(dir.path().join("young_integral.csv").exists());

    let plane = write_csv(dir.path(), "plane.csv", "t,v1,v2", (0..=16).map(|i| {
        let t = i as f64 / 16.0;
        format!("{t},{},{}", (6.0 * t).cos(), (6.0 * t).sin())
    }));
    let o = pathreg_in(&["lift", "--q", "1", plane.to_str().unwrap()], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&o)["result"]["geometric_defect"].as_f64().unwrap() < 1e-12);
    let text = fs::read_to_string(dir.path().join("lift.csv")).unwrap();
    assert!(text.starts_with("t,a1,a2,A11,A12,A21,A22\n"));
    assert_eq!(pathreg(&["lift", "--q", "2.5", plane.to_str().unwrap()]).status.code(), Some(2));
}
