//! Base units, the gram vocabulary and label encoding.
//!
//! Output column 0 is always the blank; grams occupy columns `1..=|G|` in the
//! order they were given. Every base unit is guaranteed to be present as a
//! length-1 gram so that any label over the base units has at least one
//! decomposition.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const BLANK_ID: usize = 0;

const UNITS_HEADER: &str = "#units:";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gram {
    pub units: Vec<char>,
    pub id: usize,
}

impl Gram {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn text(&self) -> String {
        self.units.iter().collect()
    }
}

/// Target sequence of base units.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Vec<char>);

impl Label {
    /// Wraps units without validating them against a vocabulary.
    pub fn from_units(units: Vec<char>) -> Self {
        Label(units)
    }

    pub fn units(&self) -> &[char] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

#[derive(Clone, Debug)]
pub struct GramVocab {
    base_units: Vec<char>,
    grams: Vec<Gram>,
    index: HashMap<Vec<char>, usize>,
    tau: usize,
    auto_added: Vec<char>,
}

impl GramVocab {
    /// Builds a vocabulary from gram strings in id order.
    ///
    /// Base units missing from `gram_strings` are appended as uni-grams and
    /// reported by [`GramVocab::auto_added`].
    pub fn build<S: AsRef<str>>(gram_strings: &[S], base_units: &[char]) -> Result<Self> {
        if gram_strings.is_empty() {
            return Err(Error::EmptyGramList);
        }
        let mut base = Vec::with_capacity(base_units.len());
        for &u in base_units {
            if !base.contains(&u) {
                base.push(u);
            }
        }

        let mut grams: Vec<Gram> = Vec::with_capacity(gram_strings.len() + base.len());
        let mut index = HashMap::new();
        for s in gram_strings {
            let s = s.as_ref();
            let units: Vec<char> = s.chars().collect();
            if units.is_empty() {
                return Err(Error::Format("empty gram".into()));
            }
            if let Some(&unit) = units.iter().find(|u| !base.contains(u)) {
                return Err(Error::UnitOutsideBase {
                    gram: s.to_string(),
                    unit,
                });
            }
            if index.contains_key(&units) {
                return Err(Error::DuplicateGram(s.to_string()));
            }
            let id = grams.len() + 1;
            index.insert(units.clone(), id);
            grams.push(Gram { units, id });
        }

        let mut auto_added = Vec::new();
        for &u in &base {
            let id = grams.len() + 1;
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(vec![u]) {
                e.insert(id);
                grams.push(Gram { units: vec![u], id });
                auto_added.push(u);
            }
        }

        let tau = grams.iter().map(Gram::len).max().unwrap_or(1);
        Ok(GramVocab {
            base_units: base,
            grams,
            index,
            tau,
            auto_added,
        })
    }

    /// Vocabulary containing only the base units, i.e. classic CTC outputs.
    pub fn unigram(base_units: &[char]) -> Result<Self> {
        let grams: Vec<String> = base_units.iter().map(|c| c.to_string()).collect();
        Self::build(&grams, base_units)
    }

    pub fn base_units(&self) -> &[char] {
        &self.base_units
    }

    /// Grams in id order; `grams()[k - 1].id == k`.
    pub fn grams(&self) -> &[Gram] {
        &self.grams
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn blank_id(&self) -> usize {
        BLANK_ID
    }

    /// Output columns including the blank.
    pub fn total_symbols(&self) -> usize {
        self.grams.len() + 1
    }

    /// Base units that were appended because the caller's list lacked them.
    pub fn auto_added(&self) -> &[char] {
        &self.auto_added
    }

    pub fn id_of(&self, units: &[char]) -> Option<usize> {
        self.index.get(units).copied()
    }

    pub fn id_of_str(&self, text: &str) -> Option<usize> {
        let units: Vec<char> = text.chars().collect();
        self.id_of(&units)
    }

    /// Units of gram `id`; empty for the blank.
    pub fn units_of(&self, id: usize) -> &[char] {
        if id == BLANK_ID {
            &[]
        } else {
            &self.grams[id - 1].units
        }
    }

    pub fn is_base_unit(&self, c: char) -> bool {
        self.base_units.contains(&c)
    }

    pub fn encode_label(&self, text: &str) -> Result<Label> {
        let mut units = Vec::with_capacity(text.len());
        for (i, c) in text.chars().enumerate() {
            if !self.is_base_unit(c) {
                return Err(Error::UnknownUnit {
                    unit: c,
                    position: i + 1,
                });
            }
            units.push(c);
        }
        Ok(Label(units))
    }

    /// Grams ending at 1-based position `i` of `label`, as `(length, id)`
    /// sorted by length.
    pub fn suffix_grams(&self, label: &Label, i: usize) -> Vec<(usize, usize)> {
        assert!(
            i >= 1 && i <= label.len(),
            "position {i} outside 1..={}",
            label.len()
        );
        let units = label.units();
        (1..=self.tau.min(i))
            .filter_map(|j| self.id_of(&units[i - j..i]).map(|id| (j, id)))
            .collect()
    }

    /// Reads the vocab file format: optional `#units: <C>` header, then one
    /// gram per line. Without a header the base units are the distinct units
    /// of all grams in order of appearance.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut base: Option<Vec<char>> = None;
        let mut grams = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if n == 0 {
                if let Some(rest) = line.strip_prefix(UNITS_HEADER) {
                    let rest = rest.strip_prefix(' ').unwrap_or(rest);
                    base = Some(rest.chars().collect());
                    continue;
                }
            }
            if line.is_empty() {
                continue;
            }
            grams.push(line.to_string());
        }
        let base = base.unwrap_or_else(|| {
            let mut seen = Vec::new();
            for c in grams.iter().flat_map(|g| g.chars()) {
                if !seen.contains(&c) {
                    seen.push(c);
                }
            }
            seen
        });
        Self::build(&grams, &base)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let units: String = self.base_units.iter().collect();
        writeln!(w, "{UNITS_HEADER} {units}")?;
        for g in &self.grams {
            writeln!(w, "{}", g.text())?;
        }
        Ok(())
    }
}
