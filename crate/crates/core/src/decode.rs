//! Greedy and prefix-beam decoding over gram posteriors.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::logspace::{log_add, log_sum_exp};
use crate::loss::PosteriorMatrix;
use crate::oracle::{collapse, Path};
use crate::vocab::{GramVocab, Label, BLANK_ID};

/// Blank token in framewise dumps.
pub const BLANK_TOKEN: &str = "_";
pub const FRAME_SEPARATOR: char = '|';

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyDecode {
    /// Argmax gram id per frame, before collapsing.
    pub framewise: Vec<usize>,
    pub label: Label,
    /// Log probability of the argmax path.
    pub path_log_prob: f64,
}

/// Per-frame argmax (lowest index on ties) followed by collapse.
pub fn greedy_decode(post: &PosteriorMatrix, vocab: &GramVocab) -> GreedyDecode {
    let mut framewise = Vec::with_capacity(post.frames());
    let mut path_log_prob = 0.0;
    for t in 0..post.frames() {
        let row = post.log_values.row(t);
        let mut best = 0;
        for k in 1..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        path_log_prob += row[best];
        framewise.push(best);
    }
    let label = collapse(&Path::new(framewise.clone()), vocab);
    GreedyDecode {
        framewise,
        label,
        path_log_prob,
    }
}

/// Renders gram ids as `tok|tok|...`, blank as `_`.
pub fn framewise_dump(ids: &[usize], vocab: &GramVocab) -> String {
    let toks: Vec<String> = ids
        .iter()
        .map(|&id| {
            if id == BLANK_ID {
                BLANK_TOKEN.to_string()
            } else {
                vocab.units_of(id).iter().collect()
            }
        })
        .collect();
    toks.join(&FRAME_SEPARATOR.to_string())
}

/// Inverse of [`framewise_dump`].
pub fn parse_framewise(line: &str, vocab: &GramVocab) -> Result<Vec<usize>> {
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split(FRAME_SEPARATOR)
        .map(|tok| {
            if tok == BLANK_TOKEN {
                Ok(BLANK_ID)
            } else {
                vocab
                    .id_of_str(tok)
                    .ok_or_else(|| Error::UnknownToken(tok.to_string()))
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub label: Label,
    /// Log of the summed probability of every retained path producing the label.
    pub log_prob: f64,
}

#[derive(Clone, Debug, Default)]
struct PrefixScores {
    /// Last frame was blank, or nothing emitted yet.
    blank: f64,
    /// Last frame emitted this gram.
    by_gram: BTreeMap<usize, f64>,
}

impl PrefixScores {
    fn empty() -> Self {
        PrefixScores {
            blank: f64::NEG_INFINITY,
            by_gram: BTreeMap::new(),
        }
    }

    fn total(&self) -> f64 {
        log_add(self.blank, log_sum_exp(self.by_gram.values().copied()))
    }

    /// Score of continuing with a fresh emission of `gram`.
    fn extendable_by(&self, gram: usize) -> f64 {
        log_add(
            self.blank,
            log_sum_exp(
                self.by_gram
                    .iter()
                    .filter(|(&g, _)| g != gram)
                    .map(|(_, &v)| v),
            ),
        )
    }
}

fn rank(a: (&[char], f64), b: (&[char], f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.len().cmp(&b.0.len()))
        .then_with(|| a.0.cmp(b.0))
}

/// Prefix beam search over collapsed labels.
///
/// Scores are marginal: every gram decomposition and alignment of a retained
/// prefix contributes. Pruning keeps `beam_width` prefixes per frame, ranked
/// by score, then shorter label, then lexicographic order.
pub fn beam_search(
    post: &PosteriorMatrix,
    vocab: &GramVocab,
    beam_width: usize,
    n_best: usize,
) -> Result<Vec<Hypothesis>> {
    if beam_width == 0 {
        return Err(Error::InvalidConfig("beam width must be at least 1".into()));
    }
    if post.symbols() != vocab.total_symbols() {
        return Err(Error::DimensionMismatch {
            expected: vocab.total_symbols(),
            found: post.symbols(),
        });
    }

    let mut beam: Vec<(Vec<char>, PrefixScores)> = vec![(
        Vec::new(),
        PrefixScores {
            blank: 0.0,
            by_gram: BTreeMap::new(),
        },
    )];

    for t in 0..post.frames() {
        let y = post.log_values.row(t);
        let mut next: HashMap<Vec<char>, PrefixScores> = HashMap::with_capacity(beam.len() * 2);
        for (prefix, scores) in &beam {
            let entry = next
                .entry(prefix.clone())
                .or_insert_with(PrefixScores::empty);
            entry.blank = log_add(entry.blank, scores.total() + y[BLANK_ID]);
            for (&g, &v) in &scores.by_gram {
                let slot = entry.by_gram.entry(g).or_insert(f64::NEG_INFINITY);
                *slot = log_add(*slot, v + y[g]);
            }

            for (k, &log_y) in y.iter().enumerate().skip(1) {
                let base = scores.extendable_by(k);
                if base == f64::NEG_INFINITY {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.extend_from_slice(vocab.units_of(k));
                let entry = next.entry(extended).or_insert_with(PrefixScores::empty);
                let slot = entry.by_gram.entry(k).or_insert(f64::NEG_INFINITY);
                *slot = log_add(*slot, base + log_y);
            }
        }

        let mut ranked: Vec<(Vec<char>, PrefixScores)> = next.into_iter().collect();
        ranked.sort_by(|a, b| rank((&a.0[..], a.1.total()), (&b.0[..], b.1.total())));
        ranked.truncate(beam_width);
        beam = ranked;
    }

    let mut out: Vec<Hypothesis> = beam
        .into_iter()
        .map(|(p, s)| Hypothesis {
            log_prob: s.total(),
            label: Label::from_units(p),
        })
        .collect();
    out.sort_by(|a, b| rank((a.label.units(), a.log_prob), (b.label.units(), b.log_prob)));
    out.truncate(n_best);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::oracle::{brute_force_label_distribution, DEFAULT_PATH_CAP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_post(rng: &mut ChaCha8Rng, frames: usize, symbols: usize) -> PosteriorMatrix {
        let mut m = Matrix::zeros(frames, symbols);
        for t in 0..frames {
            let row: Vec<f64> = (0..symbols).map(|_| rng.random_range(-3.0..3.0)).collect();
            let z = log_sum_exp(row.iter().copied());
            for (k, &r) in row.iter().enumerate() {
                m.set(t, k, r - z);
            }
        }
        PosteriorMatrix::from_log_probs(m)
    }

    fn one_hot_post(ids: &[usize], symbols: usize) -> PosteriorMatrix {
        let mut m = Matrix::filled(ids.len(), symbols, (0.01f64).ln());
        for (t, &k) in ids.iter().enumerate() {
            m.set(t, k, (1.0 - 0.01 * (symbols - 1) as f64).ln());
        }
        PosteriorMatrix::from_log_probs(m)
    }

    fn th_vocab() -> GramVocab {
        GramVocab::build(&["t", "h", "e", "th"], &['t', 'h', 'e']).unwrap()
    }

    #[test]
    fn greedy_collapses_argmax() {
        let v = th_vocab();
        let th = v.id_of_str("th").unwrap();
        let e = v.id_of_str("e").unwrap();
        let d = greedy_decode(&one_hot_post(&[0, th, th, e], 5), &v);
        assert_eq!(d.framewise, vec![0, th, th, e]);
        assert_eq!(d.label.to_string(), "the");
        assert_eq!(framewise_dump(&d.framewise, &v), "_|th|th|e");

        let d = greedy_decode(&one_hot_post(&[0, 0, 0], 5), &v);
        assert!(d.label.is_empty());
    }

    #[test]
    fn greedy_ties_pick_lowest_index() {
        let v = th_vocab();
        let post = PosteriorMatrix::from_log_probs(Matrix::filled(2, 5, -(5f64).ln()));
        assert_eq!(greedy_decode(&post, &v).framewise, vec![0, 0]);
    }

    #[test]
    fn dump_round_trip_and_unknown_tokens() {
        let v = th_vocab();
        let ids = parse_framewise("_|th|th|e", &v).unwrap();
        assert_eq!(framewise_dump(&ids, &v), "_|th|th|e");
        assert!(parse_framewise("", &v).unwrap().is_empty());
        assert!(matches!(
            parse_framewise("_|xy", &v),
            Err(Error::UnknownToken(t)) if t == "xy"
        ));
    }

    #[test]
    fn single_frame_ranking_is_sorted_posteriors() {
        let v = th_vocab();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let post = random_post(&mut rng, 1, 5);
        let hyps = beam_search(&post, &v, 10, 10).unwrap();
        let mut expected: Vec<(String, f64)> = (0..5)
            .map(|k| (v.units_of(k).iter().collect(), post.log_prob(0, k)))
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        assert_eq!(hyps.len(), 5);
        for (h, (text, lp)) in hyps.iter().zip(&expected) {
            assert_eq!(&h.label.to_string(), text);
            assert!((h.log_prob - lp).abs() < 1e-15);
        }
    }

    #[test]
    fn wide_beam_is_exact() {
        let v = GramVocab::build(&["a", "b", "ab"], &['a', 'b']).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for frames in 1..=5 {
            let post = random_post(&mut rng, frames, 4);
            let dist = brute_force_label_distribution(&post, &v, DEFAULT_PATH_CAP).unwrap();
            let hyps = beam_search(&post, &v, 4usize.pow(frames as u32), usize::MAX).unwrap();
            assert_eq!(hyps.len(), dist.len());
            for h in &hyps {
                let p = dist[&h.label];
                assert!((h.log_prob.exp() - p).abs() <= 1e-12 * p.max(1e-300) + 1e-15);
            }
        }
    }

    #[test]
    fn narrow_beam_is_a_lower_bound() {
        let v = GramVocab::build(&["a", "b", "ab", "ba"], &['a', 'b']).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let post = random_post(&mut rng, 4, 5);
            let dist = brute_force_label_distribution(&post, &v, DEFAULT_PATH_CAP).unwrap();
            let best = &beam_search(&post, &v, 1, 1).unwrap()[0];
            assert!(best.log_prob.exp() <= dist[&best.label] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rejects_zero_width_and_bad_columns() {
        let v = th_vocab();
        let post = PosteriorMatrix::from_log_probs(Matrix::zeros(1, 5));
        assert!(beam_search(&post, &v, 0, 1).is_err());
        let post = PosteriorMatrix::from_log_probs(Matrix::zeros(1, 4));
        assert!(beam_search(&post, &v, 1, 1).is_err());
    }

    /// Textbook CTC prefix beam search over single units with the same pruning rule.
    fn classic_prefix_search(
        post: &PosteriorMatrix,
        units: &[char],
        width: usize,
    ) -> Vec<(Vec<char>, f64)> {
        let mut beam: Vec<(Vec<char>, f64, f64)> = vec![(Vec::new(), 0.0, f64::NEG_INFINITY)];
        for t in 0..post.frames() {
            let mut next: HashMap<Vec<char>, (f64, f64)> = HashMap::new();
            for (prefix, pb, pnb) in &beam {
                let total = log_add(*pb, *pnb);
                let e = next
                    .entry(prefix.clone())
                    .or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
                e.0 = log_add(e.0, total + post.log_prob(t, 0));
                for (i, &c) in units.iter().enumerate() {
                    let y = post.log_prob(t, i + 1);
                    let mut ext = prefix.clone();
                    ext.push(c);
                    if prefix.last() == Some(&c) {
                        let e = next.get_mut(prefix).unwrap();
                        e.1 = log_add(e.1, pnb + y);
                        let e = next
                            .entry(ext)
                            .or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
                        e.1 = log_add(e.1, pb + y);
                    } else {
                        let e = next
                            .entry(ext)
                            .or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
                        e.1 = log_add(e.1, total + y);
                    }
                }
            }
            let mut ranked: Vec<(Vec<char>, f64, f64)> =
                next.into_iter().map(|(p, (b, n))| (p, b, n)).collect();
            ranked
                .sort_by(|a, b| rank((&a.0[..], log_add(a.1, a.2)), (&b.0[..], log_add(b.1, b.2))));
            ranked.truncate(width);
            beam = ranked;
        }
        beam.into_iter()
            .map(|(p, b, n)| (p, log_add(b, n)))
            .collect()
    }

    #[test]
    fn unigram_vocab_matches_classic_prefix_search() {
        let units = ['a', 'b', 'c'];
        let v = GramVocab::unigram(&units).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..30 {
            let frames = rng.random_range(1..=8);
            let width = rng.random_range(1..=6);
            let post = random_post(&mut rng, frames, 4);
            let ours = beam_search(&post, &v, width, usize::MAX).unwrap();
            let classic = classic_prefix_search(&post, &units, width);
            assert_eq!(ours.len(), classic.len());
            for (h, (p, s)) in ours.iter().zip(&classic) {
                assert_eq!(h.label.units(), p.as_slice());
                assert!((h.log_prob - s).abs() < 1e-12);
            }
        }
    }
}
