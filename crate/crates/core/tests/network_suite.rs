mod common;

use common::fixture;
use pwlcert::network::{load_csv, load_idx, Network};

fn reference(name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

fn as_vecs(v: &serde_json::Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v.clone()).unwrap()
}

fn assert_close(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 1e-9 * (1.0 + w.abs()), "{got:?} vs {want:?}");
    }
}

#[test]
fn digits_logits_match_reference() {
    let net = Network::load(fixture("digits_mlp_2x20.json")).unwrap();
    let lowered = net.lower();
    let samples = load_csv(fixture("digits-test.csv")).unwrap();
    let r = reference("digits_mlp_2x20_logits.json");
    let idx: Vec<usize> = serde_json::from_value(r["samples"].clone()).unwrap();
    for (i, want) in idx.into_iter().zip(as_vecs(&r["logits"])) {
        assert_close(&net.forward(&samples[i].input).unwrap(), &want);
        assert_close(&lowered.forward(&samples[i].input), &want);
    }
}

#[test]
fn conv_logits_match_reference() {
    let net = Network::load(fixture("conv_small.json")).unwrap();
    let lowered = net.lower();
    let r = reference("conv_small_logits.json");
    for (x, want) in as_vecs(&r["inputs"]).iter().zip(as_vecs(&r["logits"])) {
        assert_close(&net.forward(x).unwrap(), &want);
        assert_close(&lowered.forward(x), &want);
    }
}

#[test]
fn idx_and_csv_fixtures_agree() {
    let csv = load_csv(fixture("digits-test.csv")).unwrap();
    let idx = load_idx(fixture("digits-test-images.idx3-ubyte"), fixture("digits-test-labels.idx1-ubyte")).unwrap();
    assert_eq!(csv.len(), 100);
    assert_eq!(csv, idx);
}

#[test]
fn trained_fixtures_are_accurate() {
    for (net, data, min_acc) in [("digits_mlp_2x20.json", "digits-test.csv", 0.9), ("toy_2_4_2.json", "toy-2d.csv", 0.9)] {
        let net = Network::load(fixture(net)).unwrap();
        let samples = load_csv(fixture(data)).unwrap();
        let correct = samples.iter().filter(|s| net.predict(&s.input).unwrap() == s.label).count();
        assert!(correct as f64 >= min_acc * samples.len() as f64, "{correct} of {}", samples.len());
    }
}
