use std::path::Path;
use std::process::{Command, Output};

use stresslab::io::{config_from_json, summary_from_json, trajectory_from_csv};
use stresslab_cli::bench::{rows_from_csv, runs_from_csv};

fn stresslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stresslab"))
        .args(args)
        .env("STRESSLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = stresslab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn help_and_usage_errors() {
    for sub in ["gen", "design", "usi", "partition", "simulate", "bench"] {
        let out = stresslab(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
    assert_eq!(stresslab(&["design", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(stresslab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one_with_json() {
    let out = stresslab(&["--error-json", "design", "-c", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "invalid-input");

    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "line.json");
    std::fs::write(&cfg, r#"{"dim": 2, "coords": [[0,0],[1,0],[2,0],[3,0]]}"#).unwrap();
    let out = stresslab(&["--error-json", "design", "-c", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["error"]["message"].as_str().unwrap().contains("rank"));
}

#[test]
fn gen_then_design_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "r8.json");
    ok(&["gen", "--kind", "random", "--n", "8", "--seed", "3", "-o", &cfg]);
    let config = config_from_json(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    assert_eq!((config.len(), config.dim()), (8, 2));

    let res = path(dir.path(), "r8-result.json");
    let csv = path(dir.path(), "r8.csv");
    ok(&["design", "-c", &cfg, "-o", &res, "--stress-csv", &csv, "--dense-csv", &path(dir.path(), "dense.csv")]);
    let summary = summary_from_json(&std::fs::read_to_string(&res).unwrap()).unwrap();
    assert!(summary.verification.overall);
    assert!(summary.usi.is_none());
    let stress = stresslab::io::stress_from_csv(&std::fs::read_to_string(&csv).unwrap(), 8).unwrap();
    assert_eq!(stress, summary.stress().unwrap());
}

#[test]
fn octagon_usi_design_has_four_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "octagon.json");
    ok(&["gen", "--kind", "polygon", "--n", "8", "-o", &cfg]);
    let out = ok(&["design", "-c", &cfg, "--usi"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["S"], 4);
    assert_eq!(v["classes"].as_array().unwrap().len(), 4);
    assert!(v["reduction_ratio"].as_f64().unwrap() < 0.15);

    let out = ok(&["usi", "-c", &cfg]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["S"], 4);
    assert_eq!(v["multiplicities"], serde_json::json!([8, 8, 8, 4]));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "r20.json");
    ok(&["gen", "--kind", "random", "--n", "20", "--seed", "5", "-o", &cfg]);
    let part = path(dir.path(), "part.json");
    std::fs::write(&part, r#"{"clusters": [[0,1,2,3,4,5,6,7,8,9,10,11,12], [7,8,9,10,11,12,13,14,15,16,17,18,19]]}"#)
        .unwrap();
    let run = |name: &str, seed: &str| {
        let out = path(dir.path(), name);
        ok(&["simulate", "-c", &cfg, "--partition", &part, "--seed", seed, "--horizon", "5", "-o", &out]);
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "7");
    let b = run("b.csv", "7");
    assert_eq!(a, b);
    assert_ne!(a, run("c.csv", "8"));
    let traj = trajectory_from_csv(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(traj.sample_count(), 51);
    assert_eq!(traj.choices.len(), 51);
}

#[test]
fn simulate_leaders_with_keyframes_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "r6.json");
    ok(&["gen", "--kind", "random", "--n", "6", "--seed", "2", "-o", &cfg]);
    let keys = path(dir.path(), "keys.json");
    std::fs::write(
        &keys,
        r#"[{"time": 0, "kind": "affine", "a": [[1,0],[0,1]], "b": [0,0]},
            {"time": 20, "kind": "affine", "a": [[2,0],[0,1]], "b": [1,1]}]"#,
    )
    .unwrap();
    let svg = path(dir.path(), "snap.svg");
    let out = ok(&[
        "simulate", "-c", &cfg, "--leaders", "0,1,2", "--keyframes", &keys, "--horizon", "200", "--record-stride", "100",
        "--svg", &svg, "--svg-times", "0,100,200",
    ]);
    let traj = trajectory_from_csv(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(traj.sample_count(), 21);
    let after_switch = traj.target_errors[traj.index_at(20.0)];
    assert!(*traj.target_errors.last().unwrap() < 0.25 * after_switch);
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<g ").count(), 3);
}

#[test]
fn partition_analysis_reports_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "r16.json");
    ok(&["gen", "--kind", "random", "--n", "16", "--seed", "4", "-o", &cfg]);
    let written = path(dir.path(), "split.json");
    let out = ok(&["partition", "-c", &cfg, "--split", "6", "--design", "--write-partition", &written]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["partition"]["overlap"], 6);
    assert_eq!(v["collective"]["overall"], true);
    let ens = &v["ensemble"];
    assert!(ens["lambda_d2"].as_f64().unwrap() > 0.0);
    assert_eq!(ens["bound"]["holds"], true);
    let file = stresslab::io::partition_from_json(&std::fs::read_to_string(written).unwrap()).unwrap();
    assert_eq!(file.clusters.len(), 2);
}

#[test]
fn letter_w_segments_partition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "w.json");
    let seg = path(dir.path(), "seg.json");
    ok(&["gen", "--kind", "letter-w", "--shape", "v", "--segments", &seg, "-o", &cfg]);
    let config = config_from_json(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    assert_eq!(config.len(), 220);
    let out = ok(&["partition", "-c", &cfg, "--partition", &seg]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["partition"]["cluster_sizes"], serde_json::json!([58, 58, 58, 58]));
}

#[test]
fn bench_alpha_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let suite = path(dir.path(), "suite.json");
    std::fs::write(
        &suite,
        r#"{"cases": [
            {"name": "Random-8", "generator": {"kind": "random", "n": 8, "dim": 2, "seed": 100},
             "params": [{"alpha": 0.5}, {"alpha": 1.5}, {"alpha": 5.0}], "repeats": 10},
            {"name": "Circular-10", "generator": {"kind": "polygon", "n": 10}, "usi": true}
        ]}"#,
    )
    .unwrap();
    let out_dir = path(dir.path(), "out");
    ok(&["bench", "--suite", &suite, "-o", &out_dir]);
    let rows = rows_from_csv(&std::fs::read_to_string(dir.path().join("out/bench.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].seeds, (100..110).collect::<Vec<_>>());
    assert!(rows.iter().all(|r| r.pass_rate == 1.0));
    let deg: Vec<f64> = rows[..3].iter().map(|r| r.average_degree.unwrap()).collect();
    assert!(deg[0] <= deg[1] && deg[1] <= deg[2], "{deg:?}");
    assert_eq!(rows[3].n, 10);
    assert!(rows[3].seeds.is_empty());
    let runs = runs_from_csv(&std::fs::read_to_string(dir.path().join("out/runs.csv")).unwrap()).unwrap();
    assert_eq!(runs.len(), 31);
    assert_eq!(runs[5].seed, Some(105));
}

#[test]
fn bundled_suite_is_valid() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/suites/table1.json")).unwrap();
    let suite: stresslab_cli::bench::BenchmarkSuite = serde_json::from_str(&text).unwrap();
    suite.validate().unwrap();
    assert_eq!(suite.cases.len(), 10);
    assert_eq!(suite.cases[1].params.len(), 3);
}
