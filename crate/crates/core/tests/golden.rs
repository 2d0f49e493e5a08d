//! Golden vector shared with other front ends. Regenerate with
//! `cargo test --test golden -- --ignored`.

mod common;

use std::path::PathBuf;

use gram_ctc::decode::{beam_search, framewise_dump, greedy_decode};
use gram_ctc::{gram_ctc_loss_grad, log_softmax, GramVocab, LogitsMatrix, Matrix};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct Golden {
    units: String,
    grams: Vec<String>,
    label: String,
    logits: Vec<Vec<f64>>,
    loss: f64,
    grad: Vec<Vec<f64>>,
    greedy_framewise: String,
    greedy_label: String,
    beam_label: String,
    beam_log_prob: f64,
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_1.json")
}

fn compute(units: &str, grams: &[&str], label: &str, logits: Matrix) -> Golden {
    let base: Vec<char> = units.chars().collect();
    let vocab = GramVocab::build(grams, &base).unwrap();
    let logits = LogitsMatrix::new(logits).unwrap();
    let lg = gram_ctc_loss_grad(&logits, &common::label(label), &vocab).unwrap();
    let post = log_softmax(&logits);
    let greedy = greedy_decode(&post, &vocab);
    let top = beam_search(&post, &vocab, 64, 1).unwrap().remove(0);
    Golden {
        units: units.into(),
        grams: grams.iter().map(|g| g.to_string()).collect(),
        label: label.into(),
        logits: logits.values().to_rows(),
        loss: lg.loss,
        grad: lg.grad.to_rows(),
        greedy_framewise: framewise_dump(&greedy.framewise, &vocab),
        greedy_label: greedy.label.to_string(),
        beam_label: top.label.to_string(),
        beam_log_prob: top.log_prob,
    }
}

fn load() -> Golden {
    serde_json::from_str(&std::fs::read_to_string(fixture_path()).unwrap()).unwrap()
}

#[test]
#[ignore]
fn regenerate() {
    let (t, k) = (7, 6);
    let v: Vec<f64> = (0..t * k)
        .map(|n| (n as f64 * 1.7).sin() * 2.0 + if n % k == (n / k) % 3 + 1 { 1.5 } else { 0.0 })
        .collect();
    let g = compute(
        "abc",
        &["a", "b", "c", "ab", "bc"],
        "abcab",
        Matrix::from_vec(t, k, v).unwrap(),
    );
    std::fs::write(
        fixture_path(),
        serde_json::to_string_pretty(&g).unwrap() + "\n",
    )
    .unwrap();
}

#[test]
fn library_reproduces_golden() {
    let g = load();
    let grams: Vec<&str> = g.grams.iter().map(String::as_str).collect();
    let again = compute(
        &g.units,
        &grams,
        &g.label,
        Matrix::from_rows(&g.logits).unwrap(),
    );
    assert!((again.loss - g.loss).abs() <= 1e-12);
    let diff = Matrix::from_rows(&again.grad)
        .unwrap()
        .max_abs_diff(&Matrix::from_rows(&g.grad).unwrap());
    assert!(diff <= 1e-12, "grad diff {diff}");
    assert_eq!(again.greedy_framewise, g.greedy_framewise);
    assert_eq!(again.beam_label, g.beam_label);
    assert!((again.beam_log_prob - g.beam_log_prob).abs() <= 1e-12);
}

#[test]
fn golden_loss_matches_enumeration() {
    let g = load();
    let base: Vec<char> = g.units.chars().collect();
    let vocab = GramVocab::build(&g.grams, &base).unwrap();
    let probs = common::softmax_rows(&Matrix::from_rows(&g.logits).unwrap());
    let dist = common::enumerate_labels(&probs, &vocab);
    let p = dist[&g.label];
    assert!(((-g.loss).exp() - p).abs() / p <= 1e-9);
    let best = dist.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert_eq!(best.0, &g.beam_label);
}
