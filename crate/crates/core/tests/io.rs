use std::fs;

use dygmf::io::{read_dynamic_graph, read_partitions, write_dynamic_graph, write_predictions, LABELS, PREDICTIONS};
use dygmf::synthgen::{gen_green, GreenEvent, GreenParams};
use dygmf::{DynamicGraph, Error, Partition, Snapshot, BACKGROUND};

#[test]
fn generated_graph_round_trips() {
    let mut params = GreenParams::new(GreenEvent::Hide, 3);
    params.n = 300;
    params.tau = 4;
    params.avg_degree = 10.0;
    params.max_degree = 20;
    let graph = gen_green(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dynamic_graph(dir.path(), &graph).unwrap();
    assert!(dir.path().join("t0004.edges").exists() && dir.path().join("t0004.labels").exists());
    let back = read_dynamic_graph(dir.path()).unwrap();
    assert_eq!(back, graph);
    assert!(back.labels().unwrap().iter().any(|p| p.labels().contains(&BACKGROUND)));
    let truth = read_partitions(dir.path(), LABELS, graph.node_count()).unwrap();
    assert_eq!(truth.as_slice(), graph.labels().unwrap());
}

#[test]
fn isolated_trailing_nodes_survive() {
    let s = Snapshot::from_edges(6, 1, [(0, 1, 1.0), (1, 2, 2.5)]).unwrap();
    let graph = DynamicGraph::new(vec![s]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dynamic_graph(dir.path(), &graph).unwrap();
    assert_eq!(read_dynamic_graph(dir.path()).unwrap(), graph);
}

#[test]
fn predictions_round_trip() {
    let parts = vec![Partition::new(vec![0, 0, 1]), Partition::new(vec![2, 1, 1])];
    let dir = tempfile::tempdir().unwrap();
    write_predictions(dir.path(), &parts).unwrap();
    assert_eq!(read_partitions(dir.path(), PREDICTIONS, 3).unwrap(), parts);
}

#[test]
fn hand_written_files_parse() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t0001.edges"), "# a triangle\n0 1\n1 2 2.0\n0 2\n").unwrap();
    fs::write(dir.path().join("t0002.edges"), "0 1\n2 3\n").unwrap();
    let graph = read_dynamic_graph(dir.path()).unwrap();
    assert_eq!((graph.len(), graph.node_count()), (2, 4));
    assert_eq!(graph.snapshot(0).edge_count(), 3);
    assert!(graph.labels().is_none());
}

#[test]
fn broken_directories_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_dynamic_graph(dir.path()), Err(Error::NoSnapshots)));
    fs::write(dir.path().join("t0001.edges"), "0 1\n").unwrap();
    fs::write(dir.path().join("t0003.edges"), "0 1\n").unwrap();
    let err = read_dynamic_graph(dir.path()).unwrap_err();
    assert!(err.to_string().contains("t0002.edges"), "{err}");
    fs::write(dir.path().join("t0002.edges"), "0 0\n").unwrap();
    assert!(matches!(read_dynamic_graph(dir.path()), Err(Error::AtSnapshot { timestamp: 2, .. })));
    assert!(read_dynamic_graph(&dir.path().join("missing")).is_err());
}
