use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn uygraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uygraph")).args(args).env("UYGRAPH_LOG", "error").output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn augment_matches_golden_files() {
    for name in ["toy2", "path4"] {
        let out = tempfile::tempdir().unwrap();
        let dir = out.path().to_str().unwrap();
        ok(&uygraph(&["augment", "--dataset", fixture(name).to_str().unwrap(), "--out", dir]));
        let edges = fs::read_to_string(out.path().join("augmented_edges.csv")).unwrap();
        assert_eq!(edges, golden(&format!("{name}_edges.csv")), "{name}");
    }
    let out = tempfile::tempdir().unwrap();
    ok(&uygraph(&["augment", "--dataset", fixture("path4").to_str().unwrap(), "--out", out.path().to_str().unwrap()]));
    assert_eq!(fs::read_to_string(out.path().join("connection.csv")).unwrap(), golden("path4_connection.csv"));
    let summary = json(&out.path().join("augment_summary.json"));
    // two CNs: one wrong-class link per train node plus the CN pair
    assert_eq!(summary["negative_edges"], 3);
    assert_eq!(summary["theorem_bound"], 1 + 2);
}

#[test]
fn augment_is_deterministic_on_sbm() {
    let run = || {
        let out = tempfile::tempdir().unwrap();
        ok(&uygraph(&["augment", "--sbm", "nodes_per_class=25,p_in=0.2,p_out=0.02", "--seeds", "3", "--out", out.path().to_str().unwrap()]));
        (
            fs::read(out.path().join("augmented_edges.csv")).unwrap(),
            fs::read(out.path().join("cn_features.csv")).unwrap(),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn multiplicity_five_gives_five_cns_per_class() {
    let out = tempfile::tempdir().unwrap();
    ok(&uygraph(&["augment", "--sbm", "num_classes=3,nodes_per_class=20,p_in=0.3,p_out=0.05", "--cn-mult", "5", "--out", out.path().to_str().unwrap()]));
    assert_eq!(json(&out.path().join("augment_summary.json"))["num_cns"], 15);
}

#[test]
fn empty_train_mask_is_a_data_error() {
    let data = tempfile::tempdir().unwrap();
    for f in ["edges.csv", "features.csv", "labels.csv"] {
        fs::copy(fixture("path4").join(f), data.path().join(f)).unwrap();
    }
    fs::write(data.path().join("splits.csv"), "node_id,split\n1,val\n2,test\n").unwrap();
    let out = tempfile::tempdir().unwrap();
    let res = uygraph(&["augment", "--dataset", data.path().to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn corrupt_rows_name_file_and_line() {
    let data = tempfile::tempdir().unwrap();
    for f in ["edges.csv", "labels.csv", "splits.csv"] {
        fs::copy(fixture("path4").join(f), data.path().join(f)).unwrap();
    }
    fs::write(data.path().join("features.csv"), "node_id,f0\n0,1.0\n1,abc\n2,0\n3,0\n").unwrap();
    let res = uygraph(&["train", "--dataset", data.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("features.csv:3"));
    let missing = uygraph(&["train", "--dataset", "/nonexistent/dir"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(uygraph(&["train", "--sbm", "p_in=0.1", "--model", "gin"]).status.code(), Some(1));
    assert_eq!(uygraph(&["train", "--set", "colour=red", "--sbm", "p_in=0.1"]).status.code(), Some(1));
    assert_eq!(uygraph(&["train"]).status.code(), Some(1));
    assert_eq!(uygraph(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(uygraph(&["train", "--cn-cn", "both"]).status.code(), Some(1));
}

#[test]
fn training_reruns_are_byte_identical() {
    // the output path is part of the echoed config, so both runs share it
    let out = tempfile::tempdir().unwrap();
    let run = || {
        let dir = out.path().to_str().unwrap();
        ok(&uygraph(&["train", "--sbm", "nodes_per_class=30,p_in=0.2,p_out=0.02", "--model", "uygat", "--epochs", "20", "--seeds", "0,1", "--out", dir]));
        ["train_report_uygat.json", "metrics_uygat_seed1.jsonl", "checkpoint_uygat_seed0.csv"]
            .map(|f| fs::read(out.path().join(f)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn config_file_is_overridden_by_flags_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "sbm = nodes_per_class=20,p_in=0.3,p_out=0.03\nmodel = gcn\nepochs = 7\nlr = 0.05\n").unwrap();
    let out = dir.path().join("out");
    ok(&uygraph(&["train", "--config", cfg.to_str().unwrap(), "--lr", "0.1", "--seeds", "0..2", "--out", out.to_str().unwrap()]));
    let report = json(&out.join("train_report_gcn.json"));
    assert_eq!(report["config"]["lr"], "0.1");
    assert_eq!(report["config"]["epochs"], "7");
    assert_eq!(report["lr"], 0.1);
    assert_eq!(report["seeds"], serde_json::json!([0, 1]));
    assert_eq!(report["runs"][0]["epochs_run"], 7);
    fs::write(&cfg, "learning_rate = 1\n").unwrap();
    assert_eq!(uygraph(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn lr_grid_picks_by_validation() {
    let out = tempfile::tempdir().unwrap();
    ok(&uygraph(&[
        "train", "--sbm", "nodes_per_class=30,p_in=0.2,p_out=0.02", "--model", "gcn", "--epochs", "30",
        "--set", "lr_grid=0.1,0.01", "--out", out.path().to_str().unwrap(),
    ]));
    let report = json(&out.path().join("train_report_gcn.json"));
    let search = report["lr_search"].as_array().unwrap();
    assert_eq!(search.len(), 2);
    let best = search.iter().map(|r| r["mean_val_accuracy"].as_f64().unwrap()).fold(0.0, f64::max);
    let chosen = search.iter().find(|r| r["lr"] == report["lr"]).unwrap();
    assert_eq!(chosen["mean_val_accuracy"].as_f64().unwrap(), best);
}

#[test]
fn all_positive_graph_has_no_negative_eigenvalues() {
    let out = tempfile::tempdir().unwrap();
    ok(&uygraph(&["diagnose", "--dataset", fixture("single_class").to_str().unwrap(), "--out", out.path().to_str().unwrap()]));
    let report = json(&out.path().join("diagnose_report.json"));
    assert_eq!(report["spectrum"]["negative_count"], 0);
    assert!(out.path().join("eigenvalues.csv").exists());
}

#[test]
fn diagnose_reports_match_the_toy_fixture() {
    let out = tempfile::tempdir().unwrap();
    ok(&uygraph(&["diagnose", "--dataset", fixture("path4").to_str().unwrap(), "--set", "sens_r=0", "--out", out.path().to_str().unwrap()]));
    let report = json(&out.path().join("diagnose_report.json"));
    for pair in report["sensitivity"]["pairs"].as_array().unwrap() {
        let same = pair["i"] == pair["s"];
        assert_eq!(pair["bound"].as_f64().unwrap(), if same { 1.0 } else { 0.0 });
        assert!((pair["empirical"].as_f64().unwrap() - if same { 1.0 } else { 0.0 }).abs() < 1e-9);
    }
    // train nodes 0 and 3 have no shared edge; edge (0,1) gains two one-sided CN links
    let edges = report["curvature"]["edges"].as_array().unwrap();
    let e01 = edges.iter().find(|e| e["i"] == 0 && e["j"] == 1).unwrap();
    assert_eq!(e01["delta"], -2.0);
    assert_eq!(report["osm"]["baseline"]["converged_to_constant"], true);
}

#[test]
fn grand_does_not_flock_and_uygat_does() {
    let base = ["simulate", "--sbm", "nodes_per_class=30,p_in=0.3,p_out=0.02,feature_dim=2,noise=0.25", "--seeds", "1", "--set", "cn_init=class_mean_linear"];
    let out = tempfile::tempdir().unwrap();
    let mut args = base.to_vec();
    args.extend(["--set", "variant=grand", "--out", out.path().to_str().unwrap()]);
    ok(&uygraph(&args));
    assert_eq!(json(&out.path().join("flocking_report.json"))["flocking"]["flocked"], false);
    let out = tempfile::tempdir().unwrap();
    let mut args = base.to_vec();
    args.extend(["--delta", "1", "--out", out.path().to_str().unwrap()]);
    ok(&uygraph(&args));
    let report = json(&out.path().join("flocking_report.json"));
    assert_eq!(report["flocking"]["flocked"], true);
    let traj = fs::read_to_string(out.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,node_id,component_id,value\n"));
}

#[test]
fn divergent_run_is_flagged_explosive() {
    let out = tempfile::tempdir().unwrap();
    ok(&uygraph(&[
        "simulate", "--sbm", "nodes_per_class=30,p_in=0.3,p_out=0.02", "--set", "variant=uygcn", "--cn-mult", "3",
        "--set", "horizon=200", "--set", "stride=50", "--out", out.path().to_str().unwrap(),
    ]));
    let report = json(&out.path().join("flocking_report.json"));
    assert_eq!(report["explosive"], true);
}

#[test]
fn sweep_honours_custom_multiplicities() {
    let out = tempfile::tempdir().unwrap();
    ok(&uygraph(&[
        "sweep", "--sbm", "nodes_per_class=20,p_in=0.3,p_out=0.03", "--epochs", "10", "--set", "cn_mults=1,3",
        "--out", out.path().to_str().unwrap(),
    ]));
    let csv = fs::read_to_string(out.path().join("sweep.csv")).unwrap();
    let ks: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ks, ["2", "6"]);
    assert_eq!(uygraph(&["sweep", "--sbm", "p_in=0.1", "--model", "gcn"]).status.code(), Some(1));
}
