//! Exhaustive reference: enumerate every path, collapse it, add up the
//! probabilities. Exponential in the number of frames; only for tiny inputs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::loss::PosteriorMatrix;
use crate::vocab::{GramVocab, Label, BLANK_ID};

pub const DEFAULT_PATH_CAP: u128 = 1_000_000;

/// One output symbol per frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub gram_ids: Vec<usize>,
}

impl Path {
    pub fn new(gram_ids: Vec<usize>) -> Self {
        Path { gram_ids }
    }
}

/// Merges adjacent identical gram ids, drops blanks and concatenates the
/// remaining grams' units.
pub fn collapse(path: &Path, vocab: &GramVocab) -> Label {
    collapse_ids(&path.gram_ids, vocab)
}

fn collapse_ids(ids: &[usize], vocab: &GramVocab) -> Label {
    let mut units = Vec::new();
    let mut prev = None;
    for &id in ids {
        if prev != Some(id) && id != BLANK_ID {
            units.extend_from_slice(vocab.units_of(id));
        }
        prev = Some(id);
    }
    Label::from_units(units)
}

fn path_count(symbols: usize, frames: usize, cap: u128) -> Result<u128> {
    let frames = u32::try_from(frames).unwrap_or(u32::MAX);
    match (symbols as u128).checked_pow(frames) {
        Some(n) if n <= cap => Ok(n),
        Some(n) => Err(Error::EnumerationCap { bound: n, cap }),
        None => Err(Error::EnumerationCap {
            bound: u128::MAX,
            cap,
        }),
    }
}

/// Calls `visit` with every path and its probability, in odometer order.
fn for_each_path<F>(post: &PosteriorMatrix, cap: u128, mut visit: F) -> Result<()>
where
    F: FnMut(&[usize], f64),
{
    let frames = post.frames();
    let symbols = post.symbols();
    path_count(symbols, frames, cap)?;
    let probs: Vec<Vec<f64>> = (0..frames)
        .map(|t| (0..symbols).map(|k| post.prob(t, k)).collect())
        .collect();

    let mut ids = vec![0usize; frames];
    loop {
        let p: f64 = ids.iter().enumerate().map(|(t, &k)| probs[t][k]).product();
        visit(&ids, p);

        let mut t = frames;
        loop {
            if t == 0 {
                return Ok(());
            }
            t -= 1;
            ids[t] += 1;
            if ids[t] < symbols {
                break;
            }
            ids[t] = 0;
        }
    }
}

/// `p(label)` as the literal sum over every path that collapses to it.
pub fn brute_force_likelihood(
    post: &PosteriorMatrix,
    label: &Label,
    vocab: &GramVocab,
    cap: u128,
) -> Result<f64> {
    let mut total = 0.0;
    for_each_path(post, cap, |ids, p| {
        if collapse_ids(ids, vocab) == *label {
            total += p;
        }
    })?;
    Ok(total)
}

/// Probability of every label reachable by collapsing some path.
pub fn brute_force_label_distribution(
    post: &PosteriorMatrix,
    vocab: &GramVocab,
    cap: u128,
) -> Result<BTreeMap<Label, f64>> {
    let mut dist = BTreeMap::new();
    for_each_path(post, cap, |ids, p| {
        *dist.entry(collapse_ids(ids, vocab)).or_insert(0.0) += p;
    })?;
    Ok(dist)
}
