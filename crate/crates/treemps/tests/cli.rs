use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use treemps::format::{read_circuit, read_mps};
use treemps_core::learner::reconstruct_state;

fn treemps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treemps")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn gen_is_byte_identical_per_seed() {
    let t = TempDir::new().unwrap();
    let (a, b, c) = (path(t.path(), "a"), path(t.path(), "b"), path(t.path(), "c"));
    for (dir, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        assert_eq!(code(&treemps(&["gen", "--n", "7", "--bond", "3", "--seed", seed, "--out", dir])), 0);
    }
    let read = |d: &str, f: &str| fs::read(Path::new(d).join(f)).unwrap();
    assert_eq!(read(&a, "state.json"), read(&b, "state.json"));
    assert_eq!(read(&a, "manifest.json"), read(&b, "manifest.json"));
    assert_ne!(read(&a, "state.json"), read(&c, "state.json"));
}

#[test]
fn gen_reports_known_cut_ranks() {
    let t = TempDir::new().unwrap();
    let o = treemps(&["gen", "--n", "6", "--kind", "ghz", "--out", &path(t.path(), "g")]);
    assert_eq!(stdout(&o).trim(), "cut ranks [2, 2, 2, 2, 2]");
    let o = treemps(&["gen", "--n", "6", "--kind", "product", "--bond", "1", "--out", &path(t.path(), "p")]);
    assert_eq!(stdout(&o).trim(), "cut ranks [1, 1, 1, 1, 1]");
    let mps = read_mps(&t.path().join("g/state.json")).unwrap();
    assert_eq!((mps.n(), mps.max_bond()), (6, 2));
}

#[test]
fn gen_rejects_invalid_spec() {
    let t = TempDir::new().unwrap();
    let o = treemps(&["gen", "--kind", "ghz", "--bond", "1", "--out", &path(t.path(), "x")]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&treemps(&["gen", "--boundary", "twisted"])), 2);
}

#[test]
fn learn_exact_is_exact_and_reproducible() {
    let t = TempDir::new().unwrap();
    let (a, b) = (path(t.path(), "a"), path(t.path(), "b"));
    for dir in [&a, &b] {
        let o = treemps(&["learn", "--n", "12", "--seed", "2", "--audit", "--out", dir]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let report = json(Path::new(&a), "report.json");
    assert!(report["final_fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    assert_eq!(report["audit_masses"].as_array().unwrap().len(), report["depth"].as_u64().unwrap() as usize + 1);
    for f in ["circuit.json", "report.json", "summary.csv", "manifest.json"] {
        assert_eq!(fs::read(Path::new(&a).join(f)).unwrap(), fs::read(Path::new(&b).join(f)).unwrap(), "{f}");
    }
    let manifest = json(Path::new(&a), "manifest.json");
    assert!(manifest["deviations"][0].as_str().unwrap().contains("s1 raised"));
    let summary = fs::read_to_string(Path::new(&a).join("summary.csv")).unwrap();
    assert!(summary.starts_with("seed,n,d,D,epsilon,mode,fidelity,copies\n2,12,2,2,"));
}

#[test]
fn learned_circuit_file_reproduces_the_state() {
    let t = TempDir::new().unwrap();
    let dir = t.path();
    assert_eq!(code(&treemps(&["gen", "--n", "10", "--seed", "9", "--out", &path(dir, "g")])), 0);
    let o = treemps(&["learn", "--input", &path(dir, "g/state.json"), "--mode", "noise", "--out", &path(dir, "l")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let circuit = read_circuit(&dir.join("l/circuit.json")).unwrap();
    let phi = reconstruct_state(&circuit).unwrap();
    let psi = read_mps(&dir.join("g/state.json")).unwrap().expand().unwrap();
    let fidelity = psi.inner(&phi).norm_sqr();
    let reported = json(&dir.join("l"), "report.json")["final_fidelity"].as_f64().unwrap();
    assert!((fidelity - reported).abs() < 1e-12);
    assert!(fidelity >= 0.8);
}

#[test]
fn noisy_sweep_meets_the_target() {
    let t = TempDir::new().unwrap();
    let out = path(t.path(), "sweep");
    for seed in 0..5 {
        let s = seed.to_string();
        assert_eq!(code(&treemps(&["learn", "--n", "12", "--mode", "noise", "--seed", &s, "--out", &out])), 0);
    }
    let text = fs::read_to_string(t.path().join("sweep/summary.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let fids: Vec<f64> = rows.records().map(|r| r.unwrap()[6].parse().unwrap()).collect();
    assert_eq!(fids.len(), 5);
    assert!(fids.iter().all(|&f| f >= 0.8), "{fids:?}");
}

#[test]
fn exit_codes() {
    let t = TempDir::new().unwrap();
    let out = path(t.path(), "x");
    // p = 1 keeps two dimensions, fewer than D^2 = 4
    assert_eq!(code(&treemps(&["learn", "--block-size", "1", "--out", &out])), 3);
    assert_eq!(code(&treemps(&["learn", "--n", "24", "--out", &out])), 4);
    assert_eq!(code(&treemps(&["learn", "--mode", "fuzzy", "--out", &out])), 2);
    assert_eq!(code(&treemps(&["learn", "--epsilon", "1.5", "--out", &out])), 2);
    assert_eq!(code(&treemps(&["learn", "--input", &path(t.path(), "missing.json"), "--out", &out])), 2);
    assert_eq!(code(&treemps(&["verify", "nonsense"])), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let t = TempDir::new().unwrap();
    let cfg = t.path().join("run.toml");
    let out = path(t.path(), "o");
    fs::write(&cfg, format!("n = 10\nseed = 4\nepsilon = 0.3\nout = {out:?}\n")).unwrap();
    let o = treemps(&["--config", cfg.to_str().unwrap(), "learn", "--n", "9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(t.path().join("o/summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("4,9,2,2,2.9999999999999999e-1,"), "{summary}");

    fs::write(&cfg, "n = 10\nnot_a_key = 1\n").unwrap();
    assert_eq!(code(&treemps(&["--config", cfg.to_str().unwrap(), "learn"])), 2);
}

#[test]
fn budget_table_and_slopes() {
    let o = treemps(&["budget", "--n", "64,128,256,512,1024,2048,4096", "--epsilon", "0.1"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let (table, trailer) = text.split_once("\n\n").unwrap();
    assert!(table.starts_with("formula,n,d,D,epsilon,delta,value\n"));
    assert_eq!(table.lines().count(), 1 + 7 * 5);
    let mut rows = csv::Reader::from_reader(trailer.as_bytes());
    let slope = rows
        .records()
        .map(|r| r.unwrap())
        .find(|r| &r[0] == "exact_ours" && &r[1] == "n")
        .map(|r| r[5].parse::<f64>().unwrap())
        .unwrap();
    assert!((slope - 3.0).abs() < 0.05, "{slope}");
    assert_eq!(code(&treemps(&["budget", "--epsilon", "0"])), 2);
    assert_eq!(code(&treemps(&["budget", "--bond", "1"])), 2);
}

#[test]
fn verify_suites() {
    for suite in ["plan", "lambert", "dominance"] {
        let o = treemps(&["verify", suite]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        assert!(stdout(&o).lines().all(|l| !l.starts_with("FAIL")));
    }
    let t = TempDir::new().unwrap();
    let o = treemps(&["verify", "rank", "--trials", "10", "--out", &path(t.path(), "v")]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(t.path().join("v/manifest.json").exists());
}

#[test]
fn monotonicity_suite_reports_the_noisy_failure() {
    let o = treemps(&["verify", "monotonicity", "--trials", "3"]);
    let text = stdout(&o);
    assert_eq!(code(&o), 1, "{text}");
    assert!(text.contains("PASS monotonicity/exact oracle"), "{text}");
    assert!(text.contains("FAIL monotonicity/bounded noise"), "{text}");
    assert!(text.contains("PASS monotonicity/trace nonincreasing"), "{text}");
}
