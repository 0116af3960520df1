mod common;

use std::fs;

use common::*;
use graphpub::gnn::{load_checkpoint, save_checkpoint, train_model, Arch, TrainConfig};
use graphpub::reverse::{read_matrix, write_matrix, write_trace, SuppositionalAdjacency};
use graphpub::{load_dataset, make_splits, precision_recall, save_dataset, Error, Method, PublishedGraph};

fn write(dir: &std::path::Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn manifest(nodes: usize, classes: usize, features: usize) -> String {
    format!(r#"{{"name": "t", "num_nodes": {nodes}, "num_classes": {classes}, "num_features": {features}}}"#)
}

#[test]
fn dataset_round_trip() {
    let g = small_graph(11);
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&g, dir.path()).unwrap();
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded, g);
    let dir2 = tempfile::tempdir().unwrap();
    save_dataset(&loaded, dir2.path()).unwrap();
    for f in ["manifest.json", "nodes.tsv", "edges.tsv"] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(dir2.path().join(f)).unwrap());
    }
}

#[test]
fn featureless_nodes_get_one_hot_features() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "manifest.json", &manifest(4, 2, 4));
    write(dir.path(), "nodes.tsv", "0\t0\n1\t1\n2\t0\n3\t1\n");
    write(dir.path(), "edges.tsv", "0\t1\n2\t1\n1\t0\n3\t2\n");
    let g = load_dataset(dir.path()).unwrap();
    assert_eq!(g.feature_dim(), 4);
    assert_eq!(g.features().nnz(), 4);
    assert_eq!(g.features().row(2).collect::<Vec<_>>(), vec![(2, 1.0)]);
    assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3)]);
}

#[test]
fn sparse_feature_column_is_parsed() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "manifest.json", &manifest(2, 2, 5));
    write(dir.path(), "nodes.tsv", "0\t1\t0:1,4:0.5\n1\t0\t2:1\n");
    write(dir.path(), "edges.tsv", "0\t1\n");
    let g = load_dataset(dir.path()).unwrap();
    assert_eq!(g.features().row(0).collect::<Vec<_>>(), vec![(0, 1.0), (4, 0.5)]);
    assert_eq!(g.labels(), &[1, 0]);
}

#[test]
fn malformed_inputs_are_rejected() {
    let cases: [(&str, &str, &str); 5] = [
        ("0\t0\n1\t1\n", "1\t1\n", "self-loop"),
        ("0\t0\n1\t1\n", "0\t7\n", "node range"),
        ("0\t0\n1\t5\n", "0\t1\n", "label range"),
        ("0\t0\tx:1\n1\t1\t0:1\n", "0\t1\n", "feature token"),
        ("0\t0\n1\t1\n", "0 1\n", "edge separator"),
    ];
    for (nodes, edges, what) in cases {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "manifest.json", &manifest(2, 2, 2));
        write(dir.path(), "nodes.tsv", nodes);
        write(dir.path(), "edges.tsv", edges);
        let err = load_dataset(dir.path());
        assert!(err.is_err(), "{what} should fail");
        if what == "self-loop" {
            assert!(matches!(err, Err(Error::SelfLoop { node: 1, .. })));
        }
    }
    let missing = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(missing.path()), Err(Error::Io { .. })));
}

#[test]
fn published_graph_round_trip() {
    let p = PublishedGraph::new(5, [(3, 1), (0, 4), (1, 3)], Method::Dprr, 2.0, 0.1, 77).unwrap();
    assert_eq!(p.edges(), &[(0, 4), (1, 3)]);
    let dir = tempfile::tempdir().unwrap();
    p.save(dir.path()).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    for key in ["method", "epsilon", "degree_share", "seed", "num_edges", "elapsed_ms"] {
        assert!(meta.get(key).is_some(), "meta.json lacks {key}");
    }
    assert_eq!(meta["method"], "dprr");
    assert_eq!(PublishedGraph::load(dir.path(), 5).unwrap(), p);
    assert!(PublishedGraph::load(dir.path(), 3).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let g = small_graph(12);
    let splits = make_splits(&g, 0);
    for arch in [Arch::Gcn, Arch::Sage] {
        let model = train_model(g.structure(), g.features(), g.labels(), &splits, g.num_classes(), arch, &TrainConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&model, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.arch, arch);
        assert_eq!(back.weights, model.weights);
    }
}

#[test]
fn dense_adjacency_dump_round_trip() {
    let mut r = rng(5);
    let a = SuppositionalAdjacency::from_dense(random_fractional_adjacency(9, 0.0, 1.0, &mut r)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a_s.bin");
    write_matrix(&a, &path).unwrap();
    assert_eq!(fs::metadata(&path).unwrap().len(), 4 + 4 + 8 + 36 * 8);
    assert_eq!(read_matrix(&path).unwrap().matrix(), a.matrix());
    let trace = dir.path().join("trace.csv");
    write_trace(&[1.5, 1.25], &trace).unwrap();
    assert_eq!(fs::read_to_string(trace).unwrap(), "iteration,loss\n0,1.5\n1,1.25\n");
}

#[test]
fn precision_recall_identity() {
    let mut r = rng(9);
    for _ in 0..50 {
        let guessed = random_edges(15, 0.3, &mut r);
        let reference = random_edges(15, 0.2, &mut r);
        let (p, rc) = precision_recall(&guessed, &reference);
        if !guessed.is_empty() && !reference.is_empty() {
            assert!((p * guessed.len() as f64 - rc * reference.len() as f64).abs() < 1e-9);
        }
    }
}
