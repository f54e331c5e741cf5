use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use potapprox::report::CSV_HEADER;
use potapprox::{rng, tns, DenseTensor};
use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_potapprox")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn planted(dir: &Path) {
    ok(dir, &["generate", "--dims", "10,10,10", "--r", "3", "--s", "2", "--sigmas", "3,2,1", "--seed", "7", "--out", "inst"]);
}

fn gaussian_file(dir: &Path, name: &str, dims: &[usize], seed: u64) {
    let data = rng::gaussian_vec(&mut rng::stream(seed, &[1]), dims.iter().product());
    tns::write_file(dir.join(name), &DenseTensor::new(dims, data).unwrap()).unwrap();
}

#[test]
fn generate_is_deterministic() {
    let d = TempDir::new().unwrap();
    let args = ["generate", "--dims", "4,4,4", "--r", "2", "--s", "2", "--sigmas", "3,1", "--seed", "7"];
    ok(d.path(), &[&args[..], &["--out", "a"]].concat());
    ok(d.path(), &[&args[..], &["--out", "b"]].concat());
    for ext in ["tns", "json"] {
        let a = std::fs::read(d.path().join(format!("a.{ext}"))).unwrap();
        let b = std::fs::read(d.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b);
    }
    let t = tns::read_file(d.path().join("a.tns")).unwrap();
    assert_eq!(t.dims(), &[4, 4, 4]);
    assert_eq!(json(d.path().join("a.json"))["schema"], "potapprox/v1");
}

#[test]
fn generate_without_sigmas_is_a_usage_error() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["generate", "--dims", "4,4,4", "--r", "2", "--s", "1", "--out", "x"]);
    assert_eq!(code(&o), 2);
    let o = run(d.path(), &["generate", "--dims", "4,4,4", "--r", "2", "--s", "1", "--sigmas", "1", "--out", "x"]);
    assert_eq!(code(&o), 2);
    assert!(!d.path().join("x.tns").exists());
}

#[test]
fn generate_records_noise_level() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["generate", "--dims", "3,3,3", "--r", "1", "--s", "1", "--sigmas", "2", "--noise", "0.1", "--out", "n"]);
    let truth = json(d.path().join("n.json"));
    assert_eq!(truth["noise_level"].as_f64(), Some(0.1));
    assert_eq!(truth["seed"].as_u64(), Some(0));
}

#[test]
fn solve_recovers_planted_instance() {
    let d = TempDir::new().unwrap();
    planted(d.path());
    ok(d.path(), &["solve", "--input", "inst.tns", "--r", "3", "--s", "2", "--restarts", "5", "--result", "r.json"]);
    let r = json(d.path().join("r.json"));
    assert_eq!(r["status"], "converged");
    assert!(r["residual"].as_f64().unwrap() <= 1e-8 * r["norm_a"].as_f64().unwrap());
    assert_eq!(r["restarts"].as_u64(), Some(5));
    let lambdas: Vec<f64> = r["lambdas"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap().abs()).collect();
    let mut sorted = lambdas.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    for (got, want) in sorted.iter().zip([3.0, 2.0, 1.0]) {
        assert!((got - want).abs() <= 1e-8);
    }
}

#[test]
fn solve_rejects_zero_tensor() {
    let d = TempDir::new().unwrap();
    tns::write_file(d.path().join("z.tns"), &DenseTensor::zeros(&[3, 3, 3]).unwrap()).unwrap();
    let o = run(d.path(), &["solve", "--input", "z.tns", "--r", "1", "--s", "1"]);
    assert_eq!(code(&o), 3);
    let o = run(d.path(), &["solve", "--input", "missing.tns", "--r", "1", "--s", "1"]);
    assert_eq!(code(&o), 2);
    gaussian_file(d.path(), "g.tns", &[3, 3, 3], 1);
    let o = run(d.path(), &["solve", "--input", "g.tns", "--r", "4", "--s", "1"]);
    assert_eq!(code(&o), 2);
    let o = run(d.path(), &["solve", "--input", "g.tns", "--r", "1", "--s", "1", "--restarts", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn solve_is_byte_for_byte_reproducible() {
    let d = TempDir::new().unwrap();
    gaussian_file(d.path(), "g.tns", &[4, 5, 3], 2);
    let args = ["solve", "--input", "g.tns", "--r", "2", "--s", "2", "--restarts", "3", "--track-kkt", "--seed", "11"];
    ok(d.path(), &[&args[..], &["--log", "a.csv", "--result", "a.json"]].concat());
    ok(d.path(), &[&args[..], &["--log", "b.csv", "--result", "b.json"]].concat());
    let a = std::fs::read_to_string(d.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(d.path().join("b.csv")).unwrap());
    assert_eq!(std::fs::read(d.path().join("a.json")).unwrap(), std::fs::read(d.path().join("b.json")).unwrap());
    assert_eq!(a.lines().next(), Some(CSV_HEADER));
    assert!(a.lines().skip(1).all(|l| l.split(',').nth(3).is_some_and(|k| !k.is_empty())));
}

#[test]
fn thread_cap_does_not_change_output() {
    let d = TempDir::new().unwrap();
    gaussian_file(d.path(), "g.tns", &[4, 4, 4], 3);
    let args = ["solve", "--input", "g.tns", "--r", "2", "--s", "1", "--restarts", "4"];
    ok(d.path(), &[&args[..], &["--log", "a.csv"]].concat());
    let o = Command::new(env!("CARGO_BIN_EXE_potapprox"))
        .current_dir(d.path())
        .env("POTAPPROX_THREADS", "1")
        .args([&args[..], &["--log", "b.csv"]].concat())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(d.path().join("a.csv")).unwrap(), std::fs::read(d.path().join("b.csv")).unwrap());
    let o = Command::new(env!("CARGO_BIN_EXE_potapprox"))
        .current_dir(d.path())
        .env("POTAPPROX_THREADS", "zero")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_supplies_flags() {
    let d = TempDir::new().unwrap();
    gaussian_file(d.path(), "g.tns", &[4, 4, 4], 4);
    std::fs::write(d.path().join("cfg.json"), r#"{"input": "g.tns", "r": 2, "s": 1, "seed": 5, "max_sweeps": 3}"#).unwrap();
    ok(d.path(), &["solve", "--config", "cfg.json", "--result", "c.json"]);
    ok(d.path(), &["solve", "--input", "g.tns", "--r", "2", "--s", "1", "--seed", "5", "--max-sweeps", "3", "--result", "f.json"]);
    assert_eq!(std::fs::read(d.path().join("c.json")).unwrap(), std::fs::read(d.path().join("f.json")).unwrap());
    assert_eq!(json(d.path().join("c.json"))["status"], "cap");
    ok(d.path(), &["solve", "--config", "cfg.json", "--seed", "6", "--result", "o.json"]);
    assert_eq!(json(d.path().join("o.json"))["seed"].as_u64(), Some(6));
    std::fs::write(d.path().join("bad.json"), "[1]").unwrap();
    assert_eq!(code(&run(d.path(), &["solve", "--config", "bad.json"])), 2);
}

#[test]
fn verify_accepts_a_fresh_log() {
    let d = TempDir::new().unwrap();
    gaussian_file(d.path(), "g.tns", &[5, 4, 4], 5);
    ok(d.path(), &["solve", "--input", "g.tns", "--r", "2", "--s", "2", "--restarts", "2", "--log", "l.csv", "--result", "r.json"]);
    ok(d.path(), &["verify", "--input", "g.tns", "--log", "l.csv", "--result", "r.json", "--out", "v.json"]);
    let v = json(d.path().join("v.json"));
    assert_eq!(v["passed"], true);
    for key in ["sufficient_increase", "truncation_budget", "kkt", "lambda_chain", "replay", "feasibility"] {
        assert_eq!(v["checks"][key]["passed"], true, "{key}");
    }
}

#[test]
fn verify_rejects_an_injected_decrease() {
    let d = TempDir::new().unwrap();
    gaussian_file(d.path(), "g.tns", &[4, 4, 4], 6);
    ok(d.path(), &["solve", "--input", "g.tns", "--r", "2", "--s", "1", "--log", "l.csv", "--result", "r.json"]);
    let text = std::fs::read_to_string(d.path().join("l.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines.len() / 2;
    let mut cols: Vec<String> = lines[row].split(',').map(String::from).collect();
    let f: f64 = cols[1].parse().unwrap();
    cols[1] = format!("{:e}", f - 0.5);
    lines[row] = cols.join(",");
    std::fs::write(d.path().join("t.csv"), lines.join("\n") + "\n").unwrap();
    let o = run(d.path(), &["verify", "--input", "g.tns", "--log", "t.csv", "--result", "r.json", "--no-replay"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["checks"]["sufficient_increase"]["passed"], false);
    assert!(v["checks"].get("replay").is_none());
    let o = run(d.path(), &["verify", "--input", "g.tns", "--log", "t.csv", "--result", "r.json"]);
    assert_eq!(code(&o), 1);

    std::fs::write(d.path().join("m.csv"), "sweep,f\n0,1\n").unwrap();
    let o = run(d.path(), &["verify", "--input", "g.tns", "--log", "m.csv", "--result", "r.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_handles_truncation_logs() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["generate", "--dims", "5,5,5", "--r", "3", "--s", "1", "--sigmas", "3,1,0.01", "--noise", "0.01", "--seed", "1", "--out", "t"]);
    ok(d.path(), &["solve", "--input", "t.tns", "--r", "3", "--s", "1", "--kappa", "0.2", "--log", "l.csv", "--result", "r.json"]);
    let r = json(d.path().join("r.json"));
    let events = r["truncations"].as_array().unwrap();
    assert!(!events.is_empty());
    let o = ok(d.path(), &["verify", "--input", "t.tns", "--log", "l.csv", "--result", "r.json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let exempt: Vec<u64> =
        v["checks"]["sufficient_increase"]["exempt"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    let truncated: Vec<u64> = events.iter().map(|e| e["sweep"].as_u64().unwrap()).collect();
    assert_eq!(exempt, truncated);
    let budget = &v["checks"]["truncation_budget"];
    assert_eq!(budget["passed"], true);
    assert!(budget["total_truncated"].as_u64().unwrap() <= 3);
    assert!(budget["cumulative_drop"].as_f64().unwrap() <= budget["drop_bound"].as_f64().unwrap());
    assert!(budget["cumulative_drop"].as_f64().unwrap() > 0.0);
}

#[test]
fn rate_on_generic_log_is_linear() {
    let d = TempDir::new().unwrap();
    gaussian_file(d.path(), "g.tns", &[5, 5, 5], 9001);
    ok(d.path(), &["solve", "--input", "g.tns", "--r", "2", "--s", "2", "--stop-tol", "1e-14", "--log", "l.csv"]);
    ok(d.path(), &["rate", "--log", "l.csv", "--input", "g.tns", "--out", "rate.json"]);
    let r = json(d.path().join("rate.json"));
    assert_eq!(r["model"], "linear");
    assert!(r["fit_r2"].as_f64().unwrap() >= 0.95);
    assert_eq!(r["schema"], "potapprox/v1");
}

#[test]
fn rate_recovers_a_geometric_factor() {
    let d = TempDir::new().unwrap();
    let mut csv = format!("{CSV_HEADER}\n");
    for p in 0..=60 {
        csv += &format!("{p},{:e},1e-3,,2,,00,0\n", 1.0 - 0.5 * 0.7f64.powi(p));
    }
    std::fs::write(d.path().join("g.csv"), csv).unwrap();
    let o = ok(d.path(), &["rate", "--log", "g.csv", "--f-star", "1"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["model"], "linear");
    assert!((r["linear_factor"].as_f64().unwrap() - 0.7).abs() <= 1e-6);
}

#[test]
fn rate_uses_ground_truth_and_rejects_short_logs() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["generate", "--dims", "6,6,6", "--r", "3", "--s", "1", "--sigmas", "3,2.9,2.8", "--seed", "3", "--out", "p"]);
    ok(d.path(), &["solve", "--input", "p.tns", "--r", "3", "--s", "1", "--stop-tol", "1e-13", "--log", "l.csv"]);
    let o = ok(d.path(), &["rate", "--log", "l.csv", "--truth", "p.json"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["f_star"].as_f64().unwrap() - 25.25).abs() <= 1e-12);
    assert_eq!(code(&run(d.path(), &["rate", "--log", "l.csv", "--truth", "p.json", "--f-star", "1"])), 2);
    let mut short = format!("{CSV_HEADER}\n");
    for p in 0..5 {
        short += &format!("{p},{:e},1e-3,,1,,0,0\n", 1.0 - 0.5f64.powi(p));
    }
    std::fs::write(d.path().join("s.csv"), short).unwrap();
    assert_eq!(code(&run(d.path(), &["rate", "--log", "s.csv"])), 2);
}

#[test]
fn bench_reports_every_run() {
    let d = TempDir::new().unwrap();
    for mode in [&["--sequential"][..], &[]] {
        let out = if mode.is_empty() { "p.json" } else { "s.json" };
        ok(d.path(), &[&["bench", "--dims", "4,4,4", "--count", "3", "--max-sweeps", "50", "--out", out][..], mode].concat());
    }
    let (s, p) = (json(d.path().join("s.json")), json(d.path().join("p.json")));
    assert_eq!(s["mode"], "sequential");
    assert_eq!(s["runs"].as_array().unwrap().len(), 3);
    for i in 0..3 {
        assert_eq!(s["runs"][i]["objective"], p["runs"][i]["objective"]);
    }
}
