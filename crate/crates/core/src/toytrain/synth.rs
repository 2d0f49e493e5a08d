use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::vocab::Label;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub base_units: Vec<char>,
    /// Frames emitted per label unit.
    pub frames_per_unit: usize,
    pub feature_dim: usize,
    pub noise_sigma: f64,
    pub num_samples: usize,
    pub seed: u64,
    pub min_label_len: usize,
    pub max_label_len: usize,
    /// Never repeat a unit back to back. Consecutive copies of one prototype
    /// carry no boundary cue, so repeats are unlearnable from these features.
    #[serde(default)]
    pub distinct_adjacent: bool,
    /// Multi-unit strings rendered as a single sound: each gets its own
    /// prototype (feature index `|base_units| + k`) spanning
    /// `frames_per_unit` frames, instead of one prototype per unit.
    #[serde(default)]
    pub fused_grams: Vec<String>,
}

impl SynthConfig {
    /// Five units, four frames each, noise 0.3.
    pub fn acceptance(num_samples: usize, seed: u64) -> Self {
        SynthConfig {
            base_units: vec!['a', 'b', 'c', 'd', 'e'],
            frames_per_unit: 4,
            feature_dim: 6,
            noise_sigma: 0.3,
            num_samples,
            seed,
            min_label_len: 2,
            max_label_len: 8,
            distinct_adjacent: true,
            fused_grams: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_units.is_empty() {
            return Err(Error::InvalidConfig("no base units".into()));
        }
        if self.frames_per_unit == 0 {
            return Err(Error::InvalidConfig("frames_per_unit must be >= 1".into()));
        }
        let prototypes = self.base_units.len() + self.fused_grams.len();
        if self.feature_dim < prototypes {
            return Err(Error::InvalidConfig(format!(
                "feature_dim {} is smaller than the {prototypes} prototypes",
                self.feature_dim,
            )));
        }
        for g in &self.fused_grams {
            if g.chars().count() < 2 || g.chars().any(|c| !self.base_units.contains(&c)) {
                return Err(Error::InvalidConfig(format!(
                    "fused gram {g:?} must be two or more base units"
                )));
            }
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig(
                "noise_sigma must be finite and >= 0".into(),
            ));
        }
        if self.distinct_adjacent && self.base_units.len() < 2 && self.max_label_len > 1 {
            return Err(Error::InvalidConfig(
                "distinct_adjacent needs at least two base units".into(),
            ));
        }
        if self.min_label_len > self.max_label_len {
            return Err(Error::InvalidConfig(
                "min_label_len exceeds max_label_len".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `T x feature_dim`.
    pub features: Matrix,
    pub label: Label,
}

/// Prototype index of each sound in `label`, matching fused grams greedily
/// (longest first) left to right.
fn sounds(label: &Label, cfg: &SynthConfig) -> Vec<usize> {
    let fused: Vec<Vec<char>> = cfg
        .fused_grams
        .iter()
        .map(|g| g.chars().collect())
        .collect();
    let units = label.units();
    let mut out = Vec::with_capacity(units.len());
    let mut i = 0;
    while i < units.len() {
        let hit = fused
            .iter()
            .enumerate()
            .filter(|(_, g)| units[i..].starts_with(g))
            .max_by_key(|(k, g)| (g.len(), std::cmp::Reverse(*k)));
        match hit {
            Some((k, g)) => {
                out.push(cfg.base_units.len() + k);
                i += g.len();
            }
            None => {
                out.push(
                    cfg.base_units
                        .iter()
                        .position(|u| *u == units[i])
                        .unwrap_or(0),
                );
                i += 1;
            }
        }
    }
    out
}

fn render(label: &Label, cfg: &SynthConfig, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Matrix {
    let sounds = sounds(label, cfg);
    let frames = sounds.len() * cfg.frames_per_unit;
    let mut m = Matrix::zeros(frames, cfg.feature_dim);
    for (pos, &unit) in sounds.iter().enumerate() {
        for f in 0..cfg.frames_per_unit {
            let row = m.row_mut(pos * cfg.frames_per_unit + f);
            for (d, v) in row.iter_mut().enumerate() {
                let proto = if d == unit { 1.0 } else { 0.0 };
                *v = proto + noise.sample(rng);
            }
        }
    }
    m
}

fn noise(cfg: &SynthConfig) -> Result<Normal<f64>> {
    Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Random labels rendered as one-hot unit prototypes plus Gaussian noise.
/// Fully determined by `cfg.seed`.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let noise = noise(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let units = cfg.base_units.len();
    Ok((0..cfg.num_samples)
        .map(|_| {
            let len = rng.random_range(cfg.min_label_len..=cfg.max_label_len);
            let mut ids: Vec<usize> = Vec::with_capacity(len);
            for _ in 0..len {
                let id = match ids.last() {
                    Some(&prev) if cfg.distinct_adjacent => {
                        // draw from the other units
                        let k = rng.random_range(0..units - 1);
                        if k >= prev {
                            k + 1
                        } else {
                            k
                        }
                    }
                    _ => rng.random_range(0..units),
                };
                ids.push(id);
            }
            let label = Label::from_units(ids.iter().map(|&i| cfg.base_units[i]).collect());
            let features = render(&label, cfg, &noise, &mut rng);
            Sample { features, label }
        })
        .collect())
}

/// Renders the given labels with the same generator as [`synth_dataset`].
pub fn render_labels(labels: &[Label], cfg: &SynthConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let noise = noise(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    labels
        .iter()
        .map(|label| {
            if let Some((i, &c)) = label
                .units()
                .iter()
                .enumerate()
                .find(|(_, c)| !cfg.base_units.contains(c))
            {
                return Err(Error::UnknownUnit {
                    unit: c,
                    position: i + 1,
                });
            }
            Ok(Sample {
                features: render(label, cfg, &noise, &mut rng),
                label: label.clone(),
            })
        })
        .collect()
}

/// Stacks `stride` consecutive frames into one, zero-padding the tail.
pub fn apply_stride(features: &Matrix, stride: usize) -> Matrix {
    assert!(stride >= 1, "stride must be at least 1");
    if stride == 1 {
        return features.clone();
    }
    let d = features.cols();
    let rows = features.rows().div_ceil(stride);
    let mut out = Matrix::zeros(rows, d * stride);
    for r in 0..features.rows() {
        let (o, slot) = (r / stride, r % stride);
        out.row_mut(o)[slot * d..(slot + 1) * d].copy_from_slice(features.row(r));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    features: Vec<Vec<f64>>,
    label: String,
}

/// JSON lines: `{"features": [[...]], "label": "..."}`.
pub fn write_dataset<W: Write>(samples: &[Sample], mut w: W) -> Result<()> {
    for s in samples {
        let rec = SampleRecord {
            features: s.features.to_rows(),
            label: s.label.to_string(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line)?;
        let features = if rec.features.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_rows(&rec.features)?
        };
        out.push(Sample {
            features,
            label: Label::from_units(rec.label.chars().collect()),
        });
    }
    Ok(out)
}
