mod common;

use pathovox::architecture::{build_model, predict_file, ModelConfig};
use pathovox::nn::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, NnError, Rng};
use tempfile::TempDir;

fn encoded(cfg: &ModelConfig, seed: u64) -> (pathovox::nn::Model, Vec<u8>) {
    let model = build_model(cfg, &mut Rng::new(seed)).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(&model, &mut bytes).unwrap();
    (model, bytes)
}

#[test]
fn round_trip_preserves_model_and_predictions() {
    let tmp = TempDir::new().unwrap();
    let files = common::synthetic_files(tmp.path(), 2, 4);
    let segments = common::segmented(&files, 0..2);
    let cfg = common::tiny_model_config();
    let (model, _) = encoded(&cfg, 9);

    let path = tmp.path().join("m.pvox");
    save_checkpoint(&model, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, model);
    for file in &segments {
        let a = predict_file(&model, &file.segments).unwrap();
        let b = predict_file(&loaded, &file.segments).unwrap();
        assert_eq!(a.probabilities.map(f64::to_bits), b.probabilities.map(f64::to_bits));
    }
}

#[test]
fn reference_model_round_trips() {
    let (model, bytes) = encoded(&ModelConfig::default(), 1);
    assert_eq!(model.trainable_count(), 428_772);
    // Header, 11 layer records, and 8 bytes per parameter plus two stored dropout rates.
    assert!(bytes.len() > 8 * (428_772 + 2));
    assert_eq!(read_checkpoint(bytes.as_slice()).unwrap(), model);
}

#[test]
fn corrupt_headers_are_rejected() {
    let (_, bytes) = encoded(&common::tiny_model_config(), 2);
    let reject = |b: &[u8]| matches!(read_checkpoint(b), Err(NnError::Checkpoint(_)));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(reject(&magic));

    let mut version = bytes.clone();
    version[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert!(reject(&version));

    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(reject(&trailing));

    assert!(reject(&bytes[..bytes.len() - 3]));
    assert!(reject(&bytes[..6]));
    assert!(reject(&[]));

    let mut tag = bytes.clone();
    tag[12] = 99;
    assert!(reject(&tag));
}
