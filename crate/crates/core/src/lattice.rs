//! State lattice for one target label.
//!
//! A state `(i, j)` means the first `i` label units have been emitted and the
//! most recent frame used a gram of length `j` ending at unit `i` (`j == 0` is
//! the blank). Transitions are stored as explicit predecessor and successor
//! lists in CSR form, so the forward and backward recursions are plain sums.
//! A gram may not directly follow an identical gram (the two frames would
//! collapse into one emission), so that edge is simply left out.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::vocab::{GramVocab, Label, BLANK_ID};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeState {
    /// Length of the emitted label prefix.
    pub i: usize,
    /// Length of the gram used in the current frame; 0 for blank.
    pub j: usize,
    pub gram_id: usize,
    /// The same gram also ends at `i - j`, so the direct edge from it is excluded.
    pub same_gram_pred: bool,
}

/// Compressed adjacency: neighbours of node `n` are `idx[off[n]..off[n + 1]]`.
#[derive(Clone, Debug, Default)]
struct Adjacency {
    off: Vec<usize>,
    idx: Vec<usize>,
}

impl Adjacency {
    fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut off = Vec::with_capacity(lists.len() + 1);
        let mut idx = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        off.push(0);
        for l in lists {
            idx.extend_from_slice(l);
            off.push(idx.len());
        }
        Adjacency { off, idx }
    }

    #[inline]
    fn of(&self, n: usize) -> &[usize] {
        &self.idx[self.off[n]..self.off[n + 1]]
    }
}

#[derive(Clone, Debug)]
pub struct Lattice {
    label: Label,
    states: Vec<LatticeState>,
    preds: Adjacency,
    succs: Adjacency,
    initials: Vec<usize>,
    finals: Vec<usize>,
    /// `by_gram[k]`: states whose gram is `k`.
    by_gram: Vec<Vec<usize>>,
    grams_text: Vec<String>,
}

impl Lattice {
    pub fn build(vocab: &GramVocab, label: &Label) -> Self {
        let n = label.len();

        // State indices per prefix length, each as (j, state index).
        let mut at: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n + 1);
        let mut states = vec![LatticeState {
            i: 0,
            j: 0,
            gram_id: BLANK_ID,
            same_gram_pred: false,
        }];
        at.push(vec![(0, 0)]);

        for i in 1..=n {
            let mut here = vec![(0, states.len())];
            states.push(LatticeState {
                i,
                j: 0,
                gram_id: BLANK_ID,
                same_gram_pred: false,
            });
            for (j, gram_id) in vocab.suffix_grams(label, i) {
                let same_gram_pred = i >= 2 * j && {
                    let u = label.units();
                    u[i - 2 * j..i - j] == u[i - j..i]
                };
                here.push((j, states.len()));
                states.push(LatticeState {
                    i,
                    j,
                    gram_id,
                    same_gram_pred,
                });
            }
            at.push(here);
        }

        let mut pred_lists: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
        for (s, st) in states.iter().enumerate() {
            let list = &mut pred_lists[s];
            if st.j == 0 {
                list.extend(at[st.i].iter().map(|&(_, idx)| idx));
            } else {
                list.push(s);
                for &(jp, idx) in &at[st.i - st.j] {
                    if st.same_gram_pred && jp == st.j {
                        continue;
                    }
                    list.push(idx);
                }
                list.sort_unstable();
            }
        }

        let mut succ_lists: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
        for (s, preds) in pred_lists.iter().enumerate() {
            for &p in preds {
                succ_lists[p].push(s);
            }
        }

        let initials: Vec<usize> = states
            .iter()
            .enumerate()
            .filter(|(_, st)| st.i == st.j)
            .map(|(s, _)| s)
            .collect();
        let finals: Vec<usize> = at[n].iter().map(|&(_, idx)| idx).collect();

        let mut by_gram = vec![Vec::new(); vocab.total_symbols()];
        for (s, st) in states.iter().enumerate() {
            by_gram[st.gram_id].push(s);
        }

        let grams_text = (0..vocab.total_symbols())
            .map(|k| vocab.units_of(k).iter().collect())
            .collect();

        Lattice {
            label: label.clone(),
            states,
            preds: Adjacency::from_lists(&pred_lists),
            succs: Adjacency::from_lists(&succ_lists),
            initials,
            finals,
            by_gram,
            grams_text,
        }
    }

    pub fn label(&self) -> &Label {
        &self.label
    }

    pub fn states(&self) -> &[LatticeState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Output columns the lattice was built for.
    pub fn symbols(&self) -> usize {
        self.by_gram.len()
    }

    #[inline]
    pub fn preds(&self, s: usize) -> &[usize] {
        self.preds.of(s)
    }

    #[inline]
    pub fn succs(&self, s: usize) -> &[usize] {
        self.succs.of(s)
    }

    pub fn initials(&self) -> &[usize] {
        &self.initials
    }

    pub fn finals(&self) -> &[usize] {
        &self.finals
    }

    /// States whose gram is `gram_id`.
    pub fn states_with_gram(&self, gram_id: usize) -> &[usize] {
        &self.by_gram[gram_id]
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        self.states.iter().position(|s| s.i == i && s.j == j)
    }

    /// Fewest frames of any path that collapses to the label.
    pub fn min_path_length(&self) -> usize {
        if self.label.is_empty() {
            return 0;
        }
        let mut dist = vec![usize::MAX; self.states.len()];
        let mut queue = VecDeque::new();
        for &s in &self.initials {
            dist[s] = 1;
            queue.push_back(s);
        }
        while let Some(s) = queue.pop_front() {
            for &n in self.succs(s) {
                if dist[n] == usize::MAX {
                    dist[n] = dist[s] + 1;
                    queue.push_back(n);
                }
            }
        }
        self.finals
            .iter()
            .map(|&f| dist[f])
            .min()
            .unwrap_or(usize::MAX)
    }

    fn describe(&self, s: usize) -> String {
        let st = &self.states[s];
        let gram = if st.j == 0 {
            "_"
        } else {
            &self.grams_text[st.gram_id]
        };
        format!("({},{},{})", st.i, st.j, gram)
    }

    /// One line per edge, `(i,j,gram) -> (i',j',gram')`, blank shown as `_`.
    pub fn edge_dump(&self) -> String {
        let mut out = String::new();
        for s in 0..self.states.len() {
            for &n in self.succs(s) {
                let _ = writeln!(out, "{} -> {}", self.describe(s), self.describe(n));
            }
        }
        out
    }

    /// Graphviz rendering of the same edges.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lattice {\n  rankdir=LR;\n");
        for s in 0..self.states.len() {
            let shape = if self.finals.contains(&s) {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(
                out,
                "  n{s} [label=\"{}\", shape={shape}];",
                self.describe(s)
            );
        }
        for s in 0..self.states.len() {
            for &n in self.succs(s) {
                let _ = writeln!(out, "  n{s} -> n{n};");
            }
        }
        out.push_str("}\n");
        out
    }
}
