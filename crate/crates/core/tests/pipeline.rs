mod common;

use anomix::graph::load_graph_with_report;
use anomix::pipeline::{prepare_graph, run, sweep, write_sweep, RunConfig};
use anomix::Error;

fn quick_config(data_dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::from_kv_str(
        "dataset = toy\ninject = false\nepochs = 3\ntest_rounds = 2\nbatch_size = 32\nhidden_dim = 8\nr = 0.5\n",
    )
    .unwrap();
    cfg.data_dir = data_dir.to_path_buf();
    cfg
}

#[test]
fn a_full_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    common::write_dataset(&common::planted_attribute_graph(60, 10, 6, 1), dir.path(), "toy");
    let mut cfg = quick_config(dir.path());
    cfg.out_dir = Some(dir.path().join("out"));
    let out = run(&cfg).unwrap();
    assert!((0.0..=1.0).contains(&out.auc));
    assert_eq!(out.history.len(), 3);
    assert!(out.summary.wall_clock_secs > 0.0);
    for stage in ["load", "reveal", "train", "score", "eval"] {
        assert!(out.summary.stage_secs.contains_key(stage), "missing stage {stage}");
    }
    let paths = out.paths.unwrap();
    for p in [&paths.scores, &paths.roc, &paths.summary] {
        assert!(p.exists(), "{}", p.display());
    }
    let out_dir = dir.path().join("out");
    for f in ["config.txt", "loss.csv", "params.bin"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let saved = RunConfig::from_file(out_dir.join("config.txt")).unwrap();
    assert_eq!(saved, cfg);
    let params = anomix::encoder::load_params(out_dir.join("params.bin")).unwrap();
    assert_eq!(params, out.params);
}

#[test]
fn reruns_with_the_same_seed_match() {
    let dir = tempfile::tempdir().unwrap();
    common::write_dataset(&common::planted_attribute_graph(50, 8, 5, 2), dir.path(), "toy");
    let cfg = quick_config(dir.path());
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.scores.scores, b.scores.scores);
    assert_eq!(a.auc, b.auc);
}

#[test]
fn an_alpha_sweep_gives_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    common::write_dataset(&common::planted_attribute_graph(40, 8, 4, 3), dir.path(), "toy");
    let mut cfg = quick_config(dir.path());
    cfg.epochs = 1;
    let values: Vec<String> = ["0", "0.2", "0.4", "0.6", "0.8", "1"].map(String::from).to_vec();
    let rows = sweep(&cfg, "alpha", &values).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows
        .iter()
        .zip(&values)
        .all(|(r, v)| &r.value == v && (0.0..=1.0).contains(&r.auc)));
    let path = dir.path().join("sweep.csv");
    write_sweep(&rows, "alpha", &path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().next(), Some("alpha,auc"));
    assert_eq!(text.lines().count(), 7);
    assert!(sweep(&cfg, "lr", &values).is_err());
}

#[test]
fn failures_name_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    match run(&cfg).unwrap_err() {
        Error::Stage { stage, .. } => assert_eq!(stage, "load"),
        other => panic!("unexpected {other:?}"),
    }
    // an unlabelled graph without injection has nothing to evaluate against
    common::write_dataset(&common::random_graph(20, 4, 0.2, 0), dir.path(), "toy");
    let err = run(&cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "reveal", .. }), "{err:?}");
    assert!(err.to_string().contains("reveal"), "{err}");
}

#[test]
fn injection_adds_the_requested_budget() {
    let dir = tempfile::tempdir().unwrap();
    common::write_dataset(&common::random_graph(300, 12, 0.02, 4), dir.path(), "toy");
    let mut cfg = quick_config(dir.path());
    cfg.set("inject", "true").unwrap();
    cfg.set("num_anomalies", "20").unwrap();
    cfg.set("clique_size", "5").unwrap();
    cfg.set("candidate_pool", "10").unwrap();
    let g = prepare_graph(&cfg).unwrap();
    assert_eq!(g.anomalies().len(), 20);
    assert_eq!(g.revealed_anomalies().len(), 10);
}

fn data_root() -> std::path::PathBuf {
    std::env::var_os("ANOMIX_DATA_DIR")
        .map(Into::into)
        .unwrap_or_else(|| std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

#[test]
fn cora_matches_its_published_size() {
    let root = data_root().join("cora");
    if !root.join("edges.txt").exists() {
        eprintln!("cora not found under {}, skipping", root.display());
        return;
    }
    let (g, report) = load_graph_with_report(root.join("edges.txt"), root.join("attrs.csv"), None).unwrap();
    assert_eq!(report.edge_lines, 5429);
    assert_eq!((g.num_nodes(), g.num_attrs(), g.num_edges()), (2708, 1433, 5278));
}

#[test]
fn citeseer_matches_its_published_size() {
    let root = data_root().join("citeseer");
    if !root.join("edges.txt").exists() {
        eprintln!("citeseer not found under {}, skipping", root.display());
        return;
    }
    let (g, _) = load_graph_with_report(root.join("edges.txt"), root.join("attrs.csv"), None).unwrap();
    assert_eq!((g.num_nodes(), g.num_attrs()), (3327, 3703));
}
