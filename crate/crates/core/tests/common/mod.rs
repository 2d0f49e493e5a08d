//! Test-side oracles, written without the library's DP or enumeration code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use gram_ctc::{gram_ctc_loss_grad, GramVocab, Label, LogitsMatrix, Matrix};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const UNITS: [char; 5] = ['a', 'b', 'c', 'd', 'e'];

/// Plain (non-log) softmax per row.
pub fn softmax_rows(logits: &Matrix) -> Vec<Vec<f64>> {
    (0..logits.rows())
        .map(|t| {
            let row = logits.row(t);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

/// Collapsed label of a path of output ids: drop repeats, drop blank (id 0),
/// spell out the grams.
pub fn spell(path: &[usize], vocab: &GramVocab) -> String {
    let mut s = String::new();
    let mut prev = usize::MAX;
    for &k in path {
        if k != prev && k != 0 {
            s.extend(vocab.units_of(k));
        }
        prev = k;
    }
    s
}

/// Probability of every label, by walking all `|G'|^T` paths recursively.
pub fn enumerate_labels(probs: &[Vec<f64>], vocab: &GramVocab) -> BTreeMap<String, f64> {
    fn walk(
        t: usize,
        path: &mut Vec<usize>,
        p: f64,
        probs: &[Vec<f64>],
        vocab: &GramVocab,
        out: &mut BTreeMap<String, f64>,
    ) {
        if t == probs.len() {
            *out.entry(spell(path, vocab)).or_default() += p;
            return;
        }
        for (k, &q) in probs[t].iter().enumerate() {
            path.push(k);
            walk(t + 1, path, p * q, probs, vocab, out);
            path.pop();
        }
    }
    let mut out = BTreeMap::new();
    walk(0, &mut Vec::new(), 1.0, probs, vocab, &mut out);
    out
}

pub fn label(s: &str) -> Label {
    Label::from_units(s.chars().collect())
}

pub fn gaussian_logits<R: Rng>(
    rng: &mut R,
    frames: usize,
    symbols: usize,
    sigma: f64,
) -> LogitsMatrix {
    let n = Normal::new(0.0, sigma).unwrap();
    let v = (0..frames * symbols).map(|_| n.sample(rng)).collect();
    LogitsMatrix::new(Matrix::from_vec(frames, symbols, v).unwrap()).unwrap()
}

/// Base units `UNITS[..n_units]` plus `extra` distinct random multi-unit grams
/// with lengths in `2..=max_len`.
pub fn random_vocab<R: Rng>(
    rng: &mut R,
    n_units: usize,
    extra: usize,
    max_len: usize,
) -> GramVocab {
    let base = &UNITS[..n_units];
    let mut grams: Vec<String> = base.iter().map(|c| c.to_string()).collect();
    let mut tries = 0;
    while grams.len() < n_units + extra && max_len >= 2 && tries < 1000 {
        tries += 1;
        let len = rng.random_range(2..=max_len);
        let g: String = (0..len)
            .map(|_| base[rng.random_range(0..n_units)])
            .collect();
        if !grams.contains(&g) {
            grams.push(g);
        }
    }
    GramVocab::build(&grams, base).unwrap()
}

/// A label made by concatenating random grams of the vocab, so multi-unit
/// grams actually occur in it.
pub fn label_from_grams<R: Rng>(rng: &mut R, vocab: &GramVocab, max_units: usize) -> String {
    let mut s = String::new();
    loop {
        let g = &vocab.grams()[rng.random_range(0..vocab.grams().len())];
        if s.chars().count() + g.units.len() > max_units {
            return s;
        }
        s.extend(g.units.iter());
        if rng.random_bool(0.3) {
            return s;
        }
    }
}

/// Fewest frames any path needs for `label` when only single units are used:
/// one per unit plus a blank between equal neighbours. An upper bound on the
/// gram lattice's minimum.
pub fn unigram_min_frames(label: &str) -> usize {
    let c: Vec<char> = label.chars().collect();
    c.len() + c.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Central differences of the Gram-CTC loss over every logit.
pub fn numeric_grad(logits: &LogitsMatrix, label: &Label, vocab: &GramVocab, h: f64) -> Matrix {
    let base = logits.values();
    let mut g = Matrix::zeros(base.rows(), base.cols());
    for t in 0..base.rows() {
        for k in 0..base.cols() {
            let at = |d: f64| {
                let mut m = base.clone();
                m.set(t, k, base.get(t, k) + d);
                gram_ctc_loss_grad(&LogitsMatrix::new(m).unwrap(), label, vocab)
                    .unwrap()
                    .loss
            };
            g.set(t, k, (at(h) - at(-h)) / (2.0 * h));
        }
    }
    g
}

/// Every substring of length `1..=max_len` of every word, where words are
/// maximal runs of base units.
pub fn naive_gram_counts(lines: &[String], max_len: usize, base: &[char]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for line in lines {
        let mut word: Vec<char> = Vec::new();
        for c in line.chars().chain(std::iter::once(' ')) {
            if base.contains(&c) {
                word.push(c);
                continue;
            }
            for i in 0..word.len() {
                for n in 1..=max_len {
                    if i + n <= word.len() {
                        *counts.entry(word[i..i + n].iter().collect()).or_insert(0) += 1;
                    }
                }
            }
            word.clear();
        }
    }
    counts
}

/// Corpus lines of short words where "th" is inserted into most words.
pub fn planted_corpus<R: Rng>(rng: &mut R, units: &[char], lines: usize) -> Vec<String> {
    (0..lines)
        .map(|_| {
            (0..rng.random_range(2..5))
                .map(|_| {
                    let mut w: String = (0..rng.random_range(1..4))
                        .map(|_| units[rng.random_range(0..units.len())])
                        .collect();
                    if rng.random_bool(0.7) {
                        let at = rng.random_range(0..=w.len());
                        w.insert_str(at, "th");
                    }
                    w
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Every uni- and bi-gram over `units`.
pub fn uni_bi_vocab(units: &[char]) -> GramVocab {
    let mut grams: Vec<String> = units.iter().map(|c| c.to_string()).collect();
    for a in units {
        for b in units {
            grams.push(format!("{a}{b}"));
        }
    }
    GramVocab::build(&grams, units).unwrap()
}
