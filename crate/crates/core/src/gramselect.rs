//! Gram selection: corpus frequency counts, cutoff policies, and refinement
//! from the grams a trained model actually emits.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::decode::{greedy_decode, parse_framewise};
use crate::error::{Error, Result};
use crate::loss::{log_softmax, LogitsMatrix};
use crate::toytrain::{self, LossSpec, Sample, SynthConfig, ToyModel, TrainConfig};
use crate::vocab::{GramVocab, Label, BLANK_ID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsSource {
    CorpusFrequency,
    DecodeUsage,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GramStats {
    pub counts: BTreeMap<String, u64>,
    pub source: StatsSource,
    /// Characters dropped because they are not base units.
    pub skipped_units: u64,
}

impl GramStats {
    pub fn new(source: StatsSource) -> Self {
        GramStats {
            counts: BTreeMap::new(),
            source,
            skipped_units: 0,
        }
    }

    pub fn count(&self, gram: &str) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Adds another shard's counts.
    pub fn merge(&mut self, other: &GramStats) {
        for (g, c) in &other.counts {
            *self.counts.entry(g.clone()).or_insert(0) += c;
        }
        self.skipped_units += other.skipped_units;
    }

    /// `(gram, count)` by descending count, ties in lexicographic order.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.counts.iter().map(|(g, &c)| (g.as_str(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Stats file: `count<TAB>gram` per line, descending by count.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (g, c) in self.ranked() {
            writeln!(w, "{c}\t{g}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, source: StatsSource) -> Result<Self> {
        let mut stats = GramStats::new(source);
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let (count, gram) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("stats line {}: missing tab", n + 1)))?;
            let count: u64 = count
                .parse()
                .map_err(|e| Error::Format(format!("stats line {}: {e}", n + 1)))?;
            if count == 0 {
                return Err(Error::Format(format!("stats line {}: zero count", n + 1)));
            }
            *stats.counts.entry(gram.to_string()).or_insert(0) += count;
        }
        Ok(stats)
    }
}

/// Splits a line into runs of base units. Whitespace and non-base units both
/// end a run; the second kind is tallied in `skipped`.
fn unit_runs(line: &str, base_units: &[char], skipped: &mut u64) -> Vec<Vec<char>> {
    let mut runs = Vec::new();
    let mut cur = Vec::new();
    for c in line.chars() {
        if c.is_whitespace() {
            if !cur.is_empty() {
                runs.push(std::mem::take(&mut cur));
            }
        } else if base_units.contains(&c) {
            cur.push(c);
        } else {
            *skipped += 1;
            if !cur.is_empty() {
                runs.push(std::mem::take(&mut cur));
            }
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs
}

/// Counts every substring of length `1..=max_len` inside each word.
pub fn count_corpus_grams<R: BufRead>(
    corpus: R,
    max_len: usize,
    base_units: &[char],
) -> Result<GramStats> {
    if max_len == 0 {
        return Err(Error::InvalidConfig(
            "max gram length must be at least 1".into(),
        ));
    }
    let mut stats = GramStats::new(StatsSource::CorpusFrequency);
    let mut gram = String::new();
    for line in corpus.lines() {
        let line = line?;
        for word in unit_runs(&line, base_units, &mut stats.skipped_units) {
            for start in 0..word.len() {
                gram.clear();
                for &c in word[start..].iter().take(max_len) {
                    gram.push(c);
                    match stats.counts.get_mut(gram.as_str()) {
                        Some(n) => *n += 1,
                        None => {
                            stats.counts.insert(gram.clone(), 1);
                        }
                    }
                }
            }
        }
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FilterPolicy {
    /// Keep grams seen at least this many times.
    MinCount(u64),
    /// For each listed gram length, keep the `k` most frequent grams.
    /// Lengths not listed keep nothing beyond the base units.
    TopKPerLength(BTreeMap<usize, usize>),
    KeepAll,
}

impl FilterPolicy {
    /// Default cutoff for rare grams.
    pub const DEFAULT_MIN_COUNT: u64 = 2;

    pub fn top_k(per_length: &[(usize, usize)]) -> Self {
        FilterPolicy::TopKPerLength(per_length.iter().copied().collect())
    }
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy::MinCount(Self::DEFAULT_MIN_COUNT)
    }
}

/// Selects grams under `policy`. Every base unit is always included, first
/// and in base-unit order; the rest follow by length, then descending count,
/// then lexicographically.
pub fn filter_grams(stats: &GramStats, policy: &FilterPolicy, base_units: &[char]) -> Vec<String> {
    let is_base = |g: &str| {
        let mut it = g.chars();
        matches!((it.next(), it.next()), (Some(c), None) if base_units.contains(&c))
    };
    let ranked = stats.ranked();
    let mut chosen: Vec<(&str, u64)> = match policy {
        FilterPolicy::KeepAll => ranked,
        FilterPolicy::MinCount(min) => ranked.into_iter().filter(|(_, c)| c >= min).collect(),
        FilterPolicy::TopKPerLength(per_len) => {
            let mut taken: BTreeMap<usize, usize> = BTreeMap::new();
            ranked
                .into_iter()
                .filter(|(g, _)| {
                    let len = g.chars().count();
                    let limit = per_len.get(&len).copied().unwrap_or(0);
                    let n = taken.entry(len).or_insert(0);
                    if *n < limit {
                        *n += 1;
                        true
                    } else {
                        false
                    }
                })
                .collect()
        }
    };
    chosen.retain(|(g, _)| !is_base(g));
    chosen.sort_by(|a, b| {
        a.0.chars()
            .count()
            .cmp(&b.0.chars().count())
            .then_with(|| b.1.cmp(&a.1))
            .then_with(|| a.0.cmp(b.0))
    });

    let mut out: Vec<String> = base_units.iter().map(|c| c.to_string()).collect();
    out.extend(chosen.into_iter().map(|(g, _)| g.to_string()));
    out
}

/// Counts gram emissions in framewise dumps, one line per utterance.
/// Adjacent repeats count once; blanks are ignored.
pub fn usage_from_decodes<R: BufRead>(dumps: R, vocab: &GramVocab) -> Result<GramStats> {
    let mut stats = GramStats::new(StatsSource::DecodeUsage);
    for line in dumps.lines() {
        let line = line?;
        let ids = parse_framewise(line.trim_end_matches('\r'), vocab)?;
        add_usage(&mut stats, &ids, vocab);
    }
    Ok(stats)
}

fn add_usage(stats: &mut GramStats, ids: &[usize], vocab: &GramVocab) {
    let mut prev = None;
    for &id in ids {
        if prev != Some(id) && id != BLANK_ID {
            let g: String = vocab.units_of(id).iter().collect();
            *stats.counts.entry(g).or_insert(0) += 1;
        }
        prev = Some(id);
    }
}

#[derive(Clone, Debug)]
pub struct RefineConfig {
    /// Rendering of corpus words into synthetic features; `num_samples` and
    /// the label-length bounds are ignored.
    pub synth: SynthConfig,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefineReport {
    pub initial: Vec<String>,
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
    pub skipped_samples: usize,
    pub epoch_losses: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub vocab: GramVocab,
    pub initial_vocab: GramVocab,
    pub corpus_stats: GramStats,
    pub usage: GramStats,
    pub report: RefineReport,
}

/// Corpus words as labels, split wherever a non-base unit or whitespace occurs.
pub fn corpus_words(lines: &[String], base_units: &[char]) -> Vec<Label> {
    let mut skipped = 0;
    lines
        .iter()
        .flat_map(|l| unit_runs(l, base_units, &mut skipped))
        .map(Label::from_units)
        .collect()
}

/// Count, filter, train a toy model on the corpus words, decode them, and
/// keep the grams the model actually emits (filtered by `refine_policy`).
pub fn refine_pipeline(
    corpus: &[String],
    max_len: usize,
    initial_policy: &FilterPolicy,
    config: &RefineConfig,
    refine_policy: &FilterPolicy,
) -> Result<RefineOutcome> {
    let base = config.synth.base_units.clone();
    let joined = corpus.join("\n");
    let corpus_stats = count_corpus_grams(joined.as_bytes(), max_len, &base)?;
    let initial = filter_grams(&corpus_stats, initial_policy, &base);
    let initial_vocab = GramVocab::build(&initial, &base)?;

    let labels = corpus_words(corpus, &base);
    let dataset: Vec<Sample> = toytrain::render_labels(&labels, &config.synth)?;
    let stride = config.train.stride;
    let input_dim = config.synth.feature_dim * stride;
    let model = ToyModel::new(
        config.train.window,
        input_dim,
        &[initial_vocab.total_symbols()],
        config.train.seed,
    )?;
    let spec = LossSpec::Gram(initial_vocab.clone());
    let outcome = toytrain::train(model, &dataset, &spec, &config.train)?;

    let mut usage = GramStats::new(StatsSource::DecodeUsage);
    for sample in &dataset {
        let feats = toytrain::apply_stride(&sample.features, stride);
        let logits = LogitsMatrix::new(outcome.model.logits(0, &feats))?;
        let decoded = greedy_decode(&log_softmax(&logits), &initial_vocab);
        add_usage(&mut usage, &decoded.framewise, &initial_vocab);
    }

    let refined: BTreeSet<String> = filter_grams(&usage, refine_policy, &base)
        .into_iter()
        .collect();
    let keep_all = matches!(refine_policy, FilterPolicy::KeepAll);
    let (kept, dropped): (Vec<String>, Vec<String>) = initial
        .iter()
        .cloned()
        .partition(|g| keep_all || refined.contains(g));
    let vocab = GramVocab::build(&kept, &base)?;

    Ok(RefineOutcome {
        vocab,
        initial_vocab,
        corpus_stats,
        usage,
        report: RefineReport {
            initial,
            kept,
            dropped,
            skipped_samples: outcome.skipped_total(),
            epoch_losses: outcome.history.iter().map(|e| e.loss).collect(),
        },
    })
}
