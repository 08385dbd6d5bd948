mod common;

use std::collections::BTreeMap;

use anomix::encoder::{Activation, ModelParams};
use anomix::evaluator::{auc, export_report, hardness_probe, roc_curve, trapezoid, ProbeConfig, Report, RunSummary};
use anomix::graph::reveal_labels;
use anomix::mixer::{MixConfig, MixStrategy};
use anomix::sampler::SamplerConfig;
use anomix::scorer::{score_all, ScoreConfig};
use rand::Rng;

/// O(P·N) pair counting with half credit for ties.
fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn random_instance(r: &mut impl Rng, max_n: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = r.random_range(2..=max_n);
        let p = r.random_range(0.02..0.98);
        // coarse grids produce plenty of ties
        let levels = [3u32, 10, 100, 0][r.random_range(0..4)];
        let scores: Vec<f64> = (0..n)
            .map(|_| match levels {
                0 => r.random::<f64>(),
                l => r.random_range(0..l) as f64 / l as f64,
            })
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| r.random::<f64>() < p).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

#[test]
fn auc_matches_pair_counting_on_200_random_scores() {
    let mut r = common::rng(200);
    let scores: Vec<f64> = (0..200).map(|_| r.random()).collect();
    let labels: Vec<bool> = (0..200).map(|i| i % 3 == 0).collect();
    assert!((auc(&scores, &labels).unwrap() - brute_force_auc(&scores, &labels)).abs() <= 1e-12);
}

#[test]
fn trapezoid_and_rank_auc_match_pair_counting_on_1000_instances() {
    let mut r = common::rng(1000);
    for case in 0..1000 {
        let (scores, labels) = random_instance(&mut r, 500);
        let oracle = brute_force_auc(&scores, &labels);
        let roc = roc_curve(&scores, &labels).unwrap();
        let area = trapezoid(&roc.points);
        assert!(
            (area - oracle).abs() <= 1e-12,
            "case {case}: trapezoid {area} vs {oracle}"
        );
        assert!((auc(&scores, &labels).unwrap() - oracle).abs() <= 1e-12, "case {case}");
        assert!((roc.auc - oracle).abs() <= 1e-12, "case {case}");
    }
}

#[test]
fn reversed_scores_fall_below_the_diagonal() {
    let labels: Vec<bool> = (0..40).map(|i| i < 10).collect();
    let scores: Vec<f64> = (0..40).map(|i| i as f64).collect();
    let roc = roc_curve(&scores, &labels).unwrap();
    assert_eq!(roc.auc, 0.0);
    assert!(roc.points.iter().all(|&(x, y)| y <= x));
}

fn probe_setup(gamma: f64, seed: u64) -> (anomix::AttributedGraph, ModelParams, SamplerConfig, MixConfig) {
    let g = common::offset_graph(200, 8, 20, 5.0, seed);
    let g = reveal_labels(&g, 1.0, seed).unwrap();
    let params = ModelParams::init(8, 16, Activation::Relu, seed);
    let sampler = SamplerConfig {
        subgraph_size: 8,
        seed,
        ..SamplerConfig::default()
    };
    let mix = MixConfig {
        gamma,
        tau: 0.5,
        strategy: MixStrategy::Labeled,
        seed,
    };
    (g, params, sampler, mix)
}

#[test]
fn zero_hardness_makes_mixed_and_unmixed_identical() {
    let (g, params, sampler, mix) = probe_setup(0.0, 1);
    let rep = hardness_probe(&g, &params, &sampler, &mix, &ProbeConfig { samples: 2, seed: 1 }).unwrap();
    assert_eq!(rep.mixed, rep.unmixed);
    assert_eq!(rep.ratio, 1.0);
}

#[test]
fn identical_attribute_rows_give_a_ratio_of_one() {
    // a blend of two equal rows is the row itself, so mixing changes nothing
    let g = common::offset_graph(200, 8, 20, 0.0, 4);
    let flat = anomix::linalg::Matrix::from_vec(200, 8, vec![0.25; 200 * 8]).unwrap();
    let g = reveal_labels(&g.with_attributes(flat).unwrap(), 1.0, 4).unwrap();
    let params = ModelParams::init(8, 16, Activation::Relu, 4);
    let sampler = SamplerConfig {
        subgraph_size: 8,
        ..SamplerConfig::default()
    };
    let mix = MixConfig {
        gamma: 0.5,
        tau: 0.5,
        strategy: MixStrategy::Labeled,
        seed: 4,
    };
    let rep = hardness_probe(&g, &params, &sampler, &mix, &ProbeConfig { samples: 3, seed: 4 }).unwrap();
    assert!(
        (rep.mixed - rep.unmixed).abs() <= 1e-12 * rep.unmixed.max(1.0),
        "{rep:?}"
    );
}

#[test]
fn mixing_pulls_offset_anomalies_towards_normal_embeddings() {
    for seed in 0..3 {
        let (g, params, sampler, mix) = probe_setup(0.5, seed);
        let rep = hardness_probe(&g, &params, &sampler, &mix, &ProbeConfig { samples: 3, seed }).unwrap();
        assert!(rep.mixed < rep.unmixed, "seed {seed}: {rep:?}");
        assert!(rep.ratio < 1.0);
    }
}

#[test]
fn probe_needs_anomalies() {
    let g = common::random_graph(30, 4, 0.2, 0);
    let params = ModelParams::init(4, 4, Activation::Relu, 0);
    let mix = MixConfig {
        gamma: 0.5,
        tau: 0.5,
        strategy: MixStrategy::Random,
        seed: 0,
    };
    assert!(hardness_probe(&g, &params, &SamplerConfig::default(), &mix, &ProbeConfig::default()).is_err());
}

#[test]
fn exported_report_round_trips() {
    let g = common::planted_attribute_graph(40, 12, 4, 9);
    let params = ModelParams::init(12, 8, Activation::Relu, 9);
    let cfg = ScoreConfig {
        test_rounds: 2,
        batch_size: 16,
        alpha: 0.4,
        seed: 9,
    };
    let scores = score_all(&g, &params, &SamplerConfig::default(), &cfg).unwrap();
    let labels = g.labels().unwrap();
    let roc = roc_curve(&scores.scores, labels).unwrap();
    let summary = RunSummary {
        auc: roc.auc,
        seed: 9,
        wall_clock_secs: 0.25,
        stage_secs: BTreeMap::from([("score".to_string(), 0.25)]),
        num_nodes: 40,
        num_anomalies: 4,
        config: BTreeMap::from([("seed".to_string(), "9".to_string())]),
    };
    let dir = tempfile::tempdir().unwrap();
    let paths = export_report(
        &Report {
            scores: &scores,
            roc: &roc,
            summary: &summary,
        },
        dir.path(),
    )
    .unwrap();

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths.summary).unwrap()).unwrap();
    assert_eq!(json["auc"].as_f64().unwrap(), roc.auc);
    assert_eq!(json["config"]["seed"], "9");
    let back: RunSummary = serde_json::from_value(json).unwrap();
    assert_eq!(back, summary);

    let roc_text = std::fs::read_to_string(&paths.roc).unwrap();
    assert_eq!(roc_text.lines().next(), Some("fpr,tpr"));
    assert_eq!(roc_text.lines().count(), roc.points.len() + 1);
    let score_text = std::fs::read_to_string(&paths.scores).unwrap();
    assert_eq!(score_text.lines().next(), Some("node_id,score,ts_nd,ts_sb"));
    assert_eq!(score_text.lines().count(), 41);
}
