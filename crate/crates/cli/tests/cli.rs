use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use spectradiag_core::spectral::{self, CenteringScheme};
use spectradiag_core::ScoreMatrix;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectradiag"))
        .args(args)
        .env_remove("SPECTRADIAG_THREADS")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ed_matches_library_and_centering_is_pure() {
    let dir = tempfile::tempdir().unwrap();
    let body = "task_id,a,b,c,d,e\nt1,1,0,0,0,0\nt2,0,1,0,0,0\nt3,0,0,1,0,0\nt4,0,0,0,1,0\nt5,0,0,0,0,1\n";
    let p = write(dir.path(), "eye.csv", body);
    let v = ok_json(&["ed", s(&p), "--iterations", "50"]);
    let m = ScoreMatrix::from_dense_auto(&nalgebra::DMatrix::identity(5, 5)).unwrap();
    let lib = spectral::matrix_ed(&m, CenteringScheme::TaskCenter).unwrap();
    assert!((v["report"]["ed"].as_f64().unwrap() - lib).abs() < 1e-12);
    assert!((lib - 4.0).abs() < 1e-9);

    let body2 = "task_id,a,b,c,d,e\nt1,1,0,0,1,1\nt2,0,1,0,1,0\nt3,0,0,1,1,1\nt4,1,1,0,0,0\nt5,1,1,1,0,1\n";
    let p2 = write(dir.path(), "m.csv", body2);
    let task = ok_json(&["ed", s(&p2), "--iterations", "50"]);
    let model = ok_json(&["ed", s(&p2), "--iterations", "50", "--centering", "model"]);
    assert_ne!(task["report"]["ed"], model["report"]["ed"]);
    assert_eq!(std::fs::read_to_string(&p2).unwrap(), body2);
}

#[test]
fn same_seed_gives_identical_bytes_across_thread_counts() {
    let m = data("toy_matrix.csv");
    let a = run(&["ed", s(&m), "--seed", "11", "--threads", "1", "--permutations", "10"]);
    let b = run(&["ed", s(&m), "--seed", "11", "--threads", "4", "--permutations", "10"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["ed", s(&m), "--seed", "12", "--threads", "1", "--permutations", "10"]);
    assert_ne!(a.stdout, c.stdout);
    let suite = data("toy_suite.csv");
    let w1 = run(&["suite", s(&suite), "--samples", "500", "--threads", "1"]);
    let w2 = run(&["suite", s(&suite), "--samples", "500", "--threads", "3"]);
    assert_eq!(w1.stdout, w2.stdout);
}

#[test]
fn workflow_on_the_toy_suite() {
    let v = ok_json(&[
        "workflow",
        "--suite",
        s(&data("toy_suite.csv")),
        "--series",
        s(&data("toy_ed_series.csv")),
        "--candidates",
        s(&data("toy_candidates.csv")),
    ]);
    let red = v["step1_redundancy"]["flags"]["redundant"].as_array().unwrap();
    assert_eq!(red.len(), 1);
    assert_eq!((red[0]["a"].as_str(), red[0]["b"].as_str()), (Some("reasoning"), Some("reasoning_v2")));
    assert_eq!(v["step2_dimensionality"]["verdict"], "multidimensional");
    assert_eq!(v["step3_trend"]["verdict"], "significant decline");
    let cands = v["step4_vetting"]["candidates"].as_array().unwrap();
    let clone = cands.iter().find(|c| c["candidate_id"] == "reasoning_plus").unwrap();
    assert_eq!(clone["passes"], false);
    assert_eq!(clone["most_similar"], "reasoning");
    let novel = cands.iter().find(|c| c["candidate_id"] == "safety").unwrap();
    assert_eq!(novel["passes"], true);
    assert_eq!(v["inputs"].as_array().unwrap().len(), 3);
    assert_eq!(v["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn workflow_verdicts_follow_embedded_numbers() {
    let v = ok_json(&["workflow", "--suite", s(&data("toy_suite.csv")), "--redundant", "0.6"]);
    let th = v["thresholds"]["redundant"].as_f64().unwrap();
    let c = &v["step1_redundancy"]["correlations"];
    let ids = c["ids"].as_array().unwrap();
    let mut expected = 0;
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            if c["values"][i][j].as_f64().is_some_and(|r| r > th) {
                expected += 1;
            }
        }
    }
    assert_eq!(v["step1_redundancy"]["flags"]["redundant"].as_array().unwrap().len(), expected);
    let d = &v["step2_dimensionality"];
    let min_ed = v["thresholds"]["min_ed"].as_f64().unwrap();
    let flagged = d["suite_ed"].as_f64().unwrap() < min_ed;
    assert_eq!(d["verdict"] == "effectively one-dimensional", flagged);
    assert_eq!(v["step3_trend"]["status"], "skipped");
    assert_eq!(v["step4_vetting"]["status"], "skipped");
}

#[test]
fn workflow_identical_benchmarks_are_one_dimensional() {
    let dir = tempfile::tempdir().unwrap();
    let row: Vec<String> = (0..12).map(|j| format!("{}", (j * 7 % 12) as f64 + 0.5)).collect();
    let header: Vec<String> = (0..12).map(|j| format!("m{j}")).collect();
    let body = format!(
        "benchmark_id,{}\nb1,{}\nb2,{}\nb3,{}\n",
        header.join(","),
        row.join(","),
        row.join(","),
        row.join(",")
    );
    let p = write(dir.path(), "same.csv", &body);
    let v = ok_json(&["workflow", "--suite", s(&p)]);
    let ed = v["step2_dimensionality"]["suite_ed"].as_f64().unwrap();
    assert!((ed - 1.0).abs() < 1e-9);
    assert_eq!(v["step2_dimensionality"]["verdict"], "effectively one-dimensional");
}

#[test]
fn workflow_without_inputs_skips_every_step() {
    let v = ok_json(&["workflow"]);
    for step in ["step1_redundancy", "step2_dimensionality", "step3_trend", "step4_vetting"] {
        assert_eq!(v[step]["status"], "skipped", "{step}");
    }
}

#[test]
fn ceiling_examples() {
    let v = ok_json(&["ceiling", "--rho", "-0.64"]);
    assert!((v["ceiling"].as_f64().unwrap() - 0.4243).abs() < 5e-5);
    assert_eq!(v["approximate"], false);
    let sp = ok_json(&["ceiling", "--suite", s(&data("toy_suite.csv")), "--pair", "reasoning,coding", "--method", "spearman"]);
    assert_eq!(sp["approximate"], true);
    assert_eq!(run(&["ceiling"]).status.code(), Some(2));
}

#[test]
fn select_greedy_first_pick_is_max_variance() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "m.csv", "task_id,a,b,c,d\nlow,0,0,0,1\nhigh,1,0,1,0\nmid,1,1,1,0\n");
    let v = ok_json(&["select", s(&p), "--method", "ed_greedy", "--k", "1"]);
    assert_eq!(v["selected"][0], "high");
    assert_eq!(v["trajectory"][0].as_f64(), Some(1.0));
}

#[test]
fn synth_then_ed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synth.csv");
    let gen = run(&["synth", "--k", "5", "--scale", "2", "--seed", "3", "--out", s(&out)]);
    assert_eq!(gen.status.code(), Some(0));
    let v = ok_json(&["ed", s(&out), "--iterations", "50"]);
    assert!(v["report"]["ed"].as_f64().unwrap() > 3.0);
    assert_eq!(v["tasks"], 300);
    let again = dir.path().join("again.csv");
    run(&["synth", "--k", "5", "--scale", "2", "--seed", "3", "--out", s(&again)]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "task_id,a,b\nt1,0,1\nt2,oops,1\n");
    let out = run(&["ed", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("t2") && err.contains("`a`"), "{err}");
    let falling = write(dir.path(), "pts.csv", "n,ed\n5,5\n10,4\n20,3\n");
    assert_eq!(run(&["saturate", "--points", s(&falling)]).status.code(), Some(1));
    let rising = write(dir.path(), "pts2.csv", "n,ed\n7,4.2\n14,5.6\n21,6.3\n");
    let v = ok_json(&["saturate", "--points", s(&rising)]);
    assert!((v["fit"]["ed_inf"].as_f64().unwrap() - 8.4).abs() < 1e-6);
    assert_eq!(run(&["ed", "/definitely/not/here.csv"]).status.code(), Some(2));
}

#[test]
fn trend_and_csv_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("series.csv");
    let v = ok_json(&["trend", "--series", s(&data("toy_ed_series.csv")), "--csv", s(&csv)]);
    assert!(v["mann_kendall"]["tau"].as_f64().unwrap() < 0.0);
    let written = std::fs::read_to_string(&csv).unwrap();
    assert!(written.starts_with("x,ed\n2015,4.8\n"));
    let w = ok_json(&["trend", "--suite", s(&data("toy_suite.csv")), "--window", "20", "--step", "5"]);
    assert_eq!(w["series"]["ed"].as_array().unwrap().len(), 5);
}

#[test]
fn corr_and_compress_run() {
    let v = ok_json(&["corr", s(&data("toy_suite.csv")), "--suite", "--groups", "3"]);
    assert_eq!(v["clusters"]["groups"].as_array().unwrap().len(), 3);
    assert_eq!(v["flags"]["redundant"].as_array().unwrap().len(), 1);
    let c = ok_json(&["compress", s(&data("toy_matrix.csv")), "--trials", "5"]);
    assert!(c["curve"].as_array().unwrap().len() > 10);
}
