use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SOLVE: &str = r#"
[grid]
n_points = 128
length = 30.0

[equation]
beta = -1.0
gamma = 1.0
k = 5

[time]
dt = 0.002
t_end = 0.2
snapshot_every = 10

[initial]
kind = "gaussian"
amplitude = 0.5
width = 1.5
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ostrovsky"))
        .args(args)
        .env("OSTROVSKY_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_beta_is_a_named_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", &SOLVE.replace("beta = -1.0\n", ""));
    let out = run(&["solve", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn solve_writes_one_trace_row_per_snapshot_and_reruns_bit_identically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", SOLVE);
    let before = fs::read(&cfg).unwrap();
    let a = tmp.path().join("a");
    let out = run(&["solve", "--config", s(&cfg), "--out", s(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&cfg).unwrap(), before);

    let traces = fs::read_to_string(a.join("traces.csv")).unwrap();
    let rows = traces.lines().count() - 1;
    assert_eq!(rows, (0.2_f64 / 0.002 / 10.0).round() as usize + 1);
    assert_eq!(traces.lines().next().unwrap(), "t,l2,hamiltonian,hs,xs");
    for field in traces.lines().nth(1).unwrap().split(',') {
        let digits = field.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(digits.len(), 17, "{field}");
    }
    assert_eq!(fs::read_dir(a.join("snapshots")).unwrap().count(), rows);

    let manifest = a.join("manifest.json");
    assert_eq!(json(&manifest)["command"], "solve");
    let b = tmp.path().join("b");
    let out = run(&["solve", "--config", s(&manifest), "--out", s(&b)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(a.join("traces.csv")).unwrap(), fs::read(b.join("traces.csv")).unwrap());
}

#[test]
fn unstable_step_exits_with_blowup_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        r#"
[grid]
n_points = 64
length = 10.0
[equation]
beta = -1.0
gamma = 0.0
k = 5
[time]
dt = 0.15
t_end = 5.0
cfl_safety = 1e6
[initial]
kind = "gaussian"
amplitude = 3.0
width = 0.5
"#,
    );
    let out = run(&["solve", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blowup"));

    let guarded = write(tmp.path(), "g.toml", &fs::read_to_string(&cfg).unwrap().replace("cfl_safety = 1e6\n", ""));
    let out = run(&["solve", "--config", s(&guarded), "--out", s(&tmp.path().join("g"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CFL"));
}

#[test]
fn picard_on_zero_data_is_a_fixed_point() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "p.toml", "[initial]\nkind = \"zero\"\n");
    let o = tmp.path().join("o");
    let out = run(&["picard-check", "--config", s(&cfg), "--out", s(&o)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fixed point at iteration 1"));
    let r = json(&o.join("picard.json"));
    assert_eq!(r["fixed_point"], true);
    assert_eq!(r["iterations"], 1);
}

#[test]
fn picard_on_small_data_agrees_with_stepper() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().join("o");
    let out = run(&["picard-check", "--out", s(&o)]);
    assert!(out.status.success());
    let r = json(&o.join("picard.json"));
    assert_eq!(r["converged"], true);
    assert!(r["stepper_gap"].as_f64().unwrap() < 1e-6);
}

#[test]
fn default_sweep_reports_a_finite_slope() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().join("o");
    let out = run(&["sweep-gamma", "--out", s(&o)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let slope = json(&o.join("rate.json"))["slope"].as_f64().unwrap();
    assert!(slope.is_finite());
    assert!(fs::read_to_string(o.join("rate.svg")).unwrap().starts_with("<svg"));
    assert_eq!(fs::read_to_string(o.join("rate.csv")).unwrap().lines().count(), 6);
}

#[test]
fn unknown_estimate_tag_lists_the_valid_ones() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["probe-estimates", "--which", "2.99", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for tag in ["2.03", "2.027", "2.055", "3.03"] {
        assert!(err.contains(tag), "{err}");
    }
}

#[test]
fn estimate_probe_is_independent_of_worker_count() {
    let tmp = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for jobs in ["1", "3"] {
        let o = tmp.path().join(format!("o{jobs}"));
        let out = run(&[
            "probe-estimates", "--which", "2.027", "--seed", "11", "--draws", "6", "--jobs", jobs, "--out", s(&o),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let summary = json(&o.join("summary_2.027.json"));
        for key in ["max_ratio", "refinement_factor", "skipped"] {
            assert!(summary.get(key).is_some(), "{key}");
        }
        outputs.push(fs::read(o.join("ratios_2.027.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(String::from_utf8_lossy(&outputs[0]).lines().count(), 7);
}

#[test]
fn kernel_probe_writes_region_samples() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "k.toml",
        "n_blocks = [4.0, 8.0]\nsamples_per_region = 10\nfit_points = 4\nfit_range = [1.0, 8.0]\ngamma_exp = 0.0\n",
    );
    let o = tmp.path().join("o");
    let out = run(&["probe-kernel", "--config", s(&cfg), "--seed", "3", "--out", s(&o)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(o.join("kernel_regions.csv")).unwrap();
    assert!(csv.starts_with("n_block,region,x,t,abs_k,bound,ratio"));
    assert!(csv.lines().count() > 1);
    let k = json(&o.join("kernel.json"));
    assert!(k["omega3_exponent"].as_f64().unwrap().is_finite());
    assert_eq!(json(&o.join("manifest.json"))["seed"], 3);
}

#[test]
fn invariants_pass_on_a_solver_snapshot() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", SOLVE);
    let a = tmp.path().join("a");
    assert!(run(&["solve", "--config", s(&cfg), "--out", s(&a)]).status.success());
    let snap = a.join("snapshots/snap_00010.txt");
    let o = tmp.path().join("inv");
    let out = run(&["invariants", "--snapshot", s(&snap), "--out", s(&o)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&o.join("invariants.json"))["passed"], true);
    let manifests = fs::read_dir(&o)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name() == "manifest.json")
        .count();
    assert_eq!(manifests, 1);
}
