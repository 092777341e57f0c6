use ftn_core::neural::Mlp;
use ftn_harness::training::{train_detector, validation_loss};
use ftn_harness::weights::{decode_weights, encode_weights, load_weights, save_weights};
use ftn_harness::RunConfig;

#[test]
fn reloaded_weights_reproduce_the_validation_loss() {
    let mut cfg = RunConfig::default();
    cfg.train.symbols_total = 80_000;
    cfg.train.epochs = 3;
    let mut trace = Vec::new();
    let out = train_detector(&cfg, |e, l| trace.push((e, l))).unwrap();
    assert_eq!(trace.len(), 3);
    assert_eq!(out.loss_trace.len(), 3);
    assert!(out.loss_trace[2] < out.loss_trace[0]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("detector.ftnw");
    save_weights(&path, &out.net).unwrap();
    let reloaded = load_weights(&path).unwrap();
    assert_eq!(reloaded, out.net);
    assert_eq!(validation_loss(&cfg, &reloaded).unwrap(), out.validation_loss);
}

#[test]
fn weight_file_layout_is_bit_exact() {
    let net = Mlp::<f64>::new(&[3, 2, 1], 4).unwrap();
    let bytes = encode_weights(&net);
    assert_eq!(&bytes[0..4], b"FTNW");
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    assert_eq!(word(4), 1);
    assert_eq!(word(8), 2);
    assert_eq!((word(12), word(16)), (2, 3));
    let first = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    assert_eq!(first, net.layers()[0].weights[[0, 0]] as f32);
    let second = f32::from_le_bytes(bytes[24..28].try_into().unwrap());
    assert_eq!(second, net.layers()[0].weights[[0, 1]] as f32);
    // 12 header bytes, then per layer 8 + 4 * (rows * cols + rows).
    assert_eq!(bytes.len(), 12 + (8 + 4 * 8) + (8 + 4 * 3));
    assert_eq!(decode_weights(&bytes).unwrap(), net.cast::<f32>());
}

#[test]
fn corrupt_weight_files_are_rejected() {
    let net = Mlp::<f32>::new(&[4, 3, 2], 1).unwrap();
    let bytes = encode_weights(&net);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_weights(&bad).is_err());
    assert!(decode_weights(&bytes[..bytes.len() - 1]).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(decode_weights(&long).is_err());
    let mut version = bytes;
    version[4] = 2;
    assert!(decode_weights(&version).is_err());
}
