mod common;

use std::fs;

use lemp::experiment::{ingest, synth_dataset, write_bundle};
use lemp::graph::Split;
use lemp::Error;

#[test]
fn synthetic_bundle_round_trips() {
    let bundle = synth_dataset(&common::heterophilic_spec(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&bundle, dir.path()).unwrap();
    let back = ingest(dir.path()).unwrap();

    assert_eq!(back.node_ids, bundle.node_ids);
    assert_eq!(back.graph.edges(), bundle.graph.edges());
    assert_eq!(back.graph.labels(), bundle.graph.labels());
    assert_eq!(back.graph.splits(), bundle.graph.splits());
    assert_eq!(back.graph.num_classes(), bundle.graph.num_classes());
    assert_eq!(back.domain, bundle.domain);
    assert_eq!(back.texts, bundle.texts);
    // features pass through f32 on disk
    for (a, b) in back.features.as_slice().iter().zip(bundle.features.as_slice()) {
        assert_eq!(*a, f64::from(*b as f32));
    }
}

fn write_embeddings(dir: &std::path::Path, rows: usize, cols: usize) {
    let mut bytes = b"EMB1".to_vec();
    bytes.extend((rows as u32).to_le_bytes());
    bytes.extend((cols as u32).to_le_bytes());
    for i in 0..rows * cols {
        bytes.extend((i as f32).to_le_bytes());
    }
    fs::write(dir.join("embeddings.bin"), bytes).unwrap();
}

fn hand_written() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("nodes.jsonl"),
        concat!(
            r#"{"id": "a", "label": 0, "split": "train", "text": "alpha page"}"#,
            "\n",
            r#"{"id": 7, "label": 1, "split": "val", "text": "beta page"}"#,
            "\n\n",
            r#"{"id": "c", "split": "test", "text": "gamma page"}"#,
            "\n",
        ),
    )
    .unwrap();
    fs::write(dir.path().join("edges.csv"), "u,v\na,7\n7, c\nc,a\na,c\na,a\n").unwrap();
    write_embeddings(dir.path(), 3, 2);
    fs::write(dir.path().join("meta.json"), r#"{"domain": "webpage", "classes": 2}"#).unwrap();
    dir
}

#[test]
fn ingests_hand_written_directory() {
    let dir = hand_written();
    let b = ingest(dir.path()).unwrap();
    assert_eq!(b.node_ids, ["a", "7", "c"]);
    assert_eq!(b.graph.edges(), [(0, 1), (1, 2), (0, 2)]);
    assert_eq!(b.graph.labels(), [Some(0), Some(1), None]);
    assert_eq!(b.graph.splits(), [Split::Train, Split::Val, Split::Test]);
    assert_eq!(b.domain, "webpage");
    assert_eq!(b.features.row(2), [4.0, 5.0]);
    assert_eq!(b.node_texts()[1], "beta page");
}

#[test]
fn rejects_unknown_endpoint() {
    let dir = hand_written();
    fs::write(dir.path().join("edges.csv"), "a,zz\n").unwrap();
    assert!(matches!(ingest(dir.path()), Err(Error::Dataset(_))));
}

#[test]
fn rejects_duplicate_ids() {
    let dir = hand_written();
    fs::write(
        dir.path().join("nodes.jsonl"),
        "{\"id\": 1, \"split\": \"train\"}\n{\"id\": \"1\", \"split\": \"train\"}\n{\"id\": 2, \"split\": \"train\"}\n",
    )
    .unwrap();
    assert!(matches!(ingest(dir.path()), Err(Error::Dataset(_))));
}

#[test]
fn rejects_embedding_row_mismatch() {
    let dir = hand_written();
    write_embeddings(dir.path(), 4, 2);
    assert!(matches!(ingest(dir.path()), Err(Error::EmbeddingsFormat { .. })));
}

#[test]
fn rejects_bad_magic() {
    let dir = hand_written();
    fs::write(dir.path().join("embeddings.bin"), b"EMB2\x03\0\0\0\x02\0\0\0").unwrap();
    assert!(matches!(ingest(dir.path()), Err(Error::EmbeddingsFormat { .. })));
}

#[test]
fn missing_split_is_an_error() {
    let dir = hand_written();
    fs::write(dir.path().join("nodes.jsonl"), "{\"id\": 1}\n").unwrap();
    assert!(ingest(dir.path()).is_err());
}
