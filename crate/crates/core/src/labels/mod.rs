//! Imprecise-label data model.
//!
//! A dataset is a list of samples (features plus the hidden true class) each
//! paired with the annotation the learner actually sees. True labels are
//! retained for evaluation and for replaying generators; the learning code
//! never reads them.

mod generate;
mod io;

pub use generate::{
    circular_pair_map, make_asymmetric_noise, make_mixed, make_partial, make_symmetric_noise,
    noisy_candidate_draw, select_labeled_subset, BlobSpec,
};
pub use io::{format_f64, read_dataset, read_dataset_with_classes, write_dataset};

use crate::error::{Error, Result};

/// A nonempty, sorted, duplicate-free set of class indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidateSet(Vec<usize>);

impl CandidateSet {
    pub fn new(mut classes: Vec<usize>) -> Result<Self> {
        classes.sort_unstable();
        classes.dedup();
        if classes.is_empty() {
            return Err(Error::contract("candidate set must be nonempty"));
        }
        Ok(CandidateSet(classes))
    }

    pub fn singleton(class: usize) -> Self {
        CandidateSet(vec![class])
    }

    pub fn all(classes: usize) -> Self {
        CandidateSet((0..classes).collect())
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0.binary_search(&class).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn max_class(&self) -> usize {
        *self.0.last().expect("nonempty")
    }

    pub fn mask(&self, classes: usize) -> Vec<bool> {
        let mut m = vec![false; classes];
        for &c in &self.0 {
            m[c] = true;
        }
        m
    }
}

/// What the learner observes about a sample's class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelInfo {
    Exact(usize),
    Candidates(CandidateSet),
    Unlabeled,
    Noisy(usize),
    NoisyCandidates(CandidateSet),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelKind {
    Exact,
    Partial,
    Unlabeled,
    Noisy,
    NoisyPartial,
}

impl LabelKind {
    pub const ALL: [LabelKind; 5] = [
        LabelKind::Exact,
        LabelKind::Partial,
        LabelKind::Unlabeled,
        LabelKind::Noisy,
        LabelKind::NoisyPartial,
    ];

    /// Tag used in the dataset file's `kind` column.
    pub fn tag(self) -> &'static str {
        match self {
            LabelKind::Exact => "exact",
            LabelKind::Partial => "partial",
            LabelKind::Unlabeled => "unlabeled",
            LabelKind::Noisy => "noisy",
            LabelKind::NoisyPartial => "noisy_partial",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        LabelKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// Whether the kind needs a noise transition model.
    pub fn is_noisy(self) -> bool {
        matches!(self, LabelKind::Noisy | LabelKind::NoisyPartial)
    }
}

impl LabelInfo {
    pub fn kind(&self) -> LabelKind {
        match self {
            LabelInfo::Exact(_) => LabelKind::Exact,
            LabelInfo::Candidates(_) => LabelKind::Partial,
            LabelInfo::Unlabeled => LabelKind::Unlabeled,
            LabelInfo::Noisy(_) => LabelKind::Noisy,
            LabelInfo::NoisyCandidates(_) => LabelKind::NoisyPartial,
        }
    }

    /// Classes the annotation admits as the true label when taken at face
    /// value; `None` means unconstrained.
    pub fn candidate_set(&self) -> Option<CandidateSet> {
        match self {
            LabelInfo::Exact(y) => Some(CandidateSet::singleton(*y)),
            LabelInfo::Candidates(s) | LabelInfo::NoisyCandidates(s) => Some(s.clone()),
            LabelInfo::Noisy(y) => Some(CandidateSet::singleton(*y)),
            LabelInfo::Unlabeled => None,
        }
    }

    /// The exact class when the annotation pins it down without any noise
    /// model: an exact label or a clean singleton candidate set.
    pub fn determined_class(&self) -> Option<usize> {
        match self {
            LabelInfo::Exact(y) => Some(*y),
            LabelInfo::Candidates(s) if s.len() == 1 => Some(s.as_slice()[0]),
            _ => None,
        }
    }

    /// Clean singleton candidate sets become exact labels.
    pub fn canonical(self) -> Self {
        match self {
            LabelInfo::Candidates(s) if s.len() == 1 => LabelInfo::Exact(s.as_slice()[0]),
            other => other,
        }
    }

    fn max_class(&self) -> Option<usize> {
        match self {
            LabelInfo::Exact(y) | LabelInfo::Noisy(y) => Some(*y),
            LabelInfo::Candidates(s) | LabelInfo::NoisyCandidates(s) => Some(s.max_class()),
            LabelInfo::Unlabeled => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub true_label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub sample: Sample,
    pub label: LabelInfo,
}

/// The corruption applied to a clean dataset, sufficient to replay it.
#[derive(Debug, Clone, PartialEq)]
pub enum Corruption {
    Partial { q: f64, seed: u64 },
    SymmetricNoise { eta: f64, seed: u64 },
    AsymmetricNoise { eta: f64, pair_map: Vec<usize>, seed: u64 },
    LabeledSubset { labels: usize, seed: u64 },
    Mixed { labels: usize, q: f64, eta: f64, seed: u64 },
}

impl Corruption {
    pub fn partial_ratio(&self) -> Option<f64> {
        match self {
            Corruption::Partial { q, .. } | Corruption::Mixed { q, .. } => Some(*q),
            _ => None,
        }
    }

    pub fn noise_ratio(&self) -> Option<f64> {
        match self {
            Corruption::SymmetricNoise { eta, .. }
            | Corruption::AsymmetricNoise { eta, .. }
            | Corruption::Mixed { eta, .. } => Some(*eta),
            _ => None,
        }
    }

    pub fn label_budget(&self) -> Option<usize> {
        match self {
            Corruption::LabeledSubset { labels, .. } | Corruption::Mixed { labels, .. } => Some(*labels),
            _ => None,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Corruption::Partial { seed, .. }
            | Corruption::SymmetricNoise { seed, .. }
            | Corruption::AsymmetricNoise { seed, .. }
            | Corruption::LabeledSubset { seed, .. }
            | Corruption::Mixed { seed, .. } => *seed,
        }
    }

    /// Re-applies the generator to `clean`.
    pub fn replay(&self, clean: &ImpreciseDataset) -> Result<ImpreciseDataset> {
        match self {
            Corruption::Partial { q, seed } => make_partial(clean, *q, *seed),
            Corruption::SymmetricNoise { eta, seed } => make_symmetric_noise(clean, *eta, *seed),
            Corruption::AsymmetricNoise {
                eta,
                pair_map,
                seed,
            } => make_asymmetric_noise(clean, *eta, pair_map, *seed),
            Corruption::LabeledSubset { labels, seed } => select_labeled_subset(clean, *labels, *seed),
            Corruption::Mixed {
                labels,
                q,
                eta,
                seed,
            } => make_mixed(clean, *labels, *q, *eta, *seed),
        }
    }

    /// The row-stochastic matrix `T[y][ŷ]` the generator flips labels with,
    /// when it flips any.
    pub fn true_transition(&self, classes: usize) -> Option<Vec<Vec<f64>>> {
        match self {
            Corruption::SymmetricNoise { eta, .. } | Corruption::Mixed { eta, .. } if *eta > 0.0 => {
                let off = eta / (classes - 1) as f64;
                Some(
                    (0..classes)
                        .map(|y| (0..classes).map(|k| if k == y { 1.0 - eta } else { off }).collect())
                        .collect(),
                )
            }
            Corruption::AsymmetricNoise { eta, pair_map, .. } if *eta > 0.0 => Some(
                (0..classes)
                    .map(|y| {
                        let mut row = vec![0.0; classes];
                        if pair_map[y] == y {
                            row[y] = 1.0;
                        } else {
                            row[y] = 1.0 - eta;
                            row[pair_map[y]] = *eta;
                        }
                        row
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpreciseDataset {
    classes: usize,
    entries: Vec<Entry>,
    corruption: Option<Corruption>,
}

impl ImpreciseDataset {
    pub fn new(classes: usize, entries: Vec<Entry>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::config(format!("need at least 2 classes, got {classes}")));
        }
        let dim = entries.first().map(|e| e.sample.features.len());
        for (i, e) in entries.iter().enumerate() {
            if Some(e.sample.features.len()) != dim {
                return Err(Error::Shape {
                    what: "sample features",
                    expected: dim.unwrap_or(0),
                    actual: e.sample.features.len(),
                });
            }
            if e.sample.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::contract(format!("sample {i} has non-finite features")));
            }
            if e.sample.true_label >= classes || e.label.max_class().is_some_and(|m| m >= classes) {
                return Err(Error::contract(format!("sample {i} has a class index >= {classes}")));
            }
        }
        Ok(ImpreciseDataset {
            classes,
            entries,
            corruption: None,
        })
    }

    /// A fully labeled dataset.
    pub fn from_samples(classes: usize, samples: Vec<Sample>) -> Result<Self> {
        let entries = samples
            .into_iter()
            .map(|s| Entry {
                label: LabelInfo::Exact(s.true_label),
                sample: s,
            })
            .collect();
        Self::new(classes, entries)
    }

    pub fn with_corruption(mut self, corruption: Corruption) -> Self {
        self.corruption = Some(corruption);
        self
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.entries.first().map_or(0, |e| e.sample.features.len())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn corruption(&self) -> Option<&Corruption> {
        self.corruption.as_ref()
    }

    pub fn labels(&self) -> impl Iterator<Item = &LabelInfo> {
        self.entries.iter().map(|e| &e.label)
    }

    pub fn has_noisy(&self) -> bool {
        self.labels().any(|l| l.kind().is_noisy())
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels().all(|l| matches!(l, LabelInfo::Exact(_)))
    }

    /// The same samples with every annotation replaced by the true label.
    pub fn to_clean(&self) -> ImpreciseDataset {
        ImpreciseDataset {
            classes: self.classes,
            entries: self
                .entries
                .iter()
                .map(|e| Entry {
                    sample: e.sample.clone(),
                    label: LabelInfo::Exact(e.sample.true_label),
                })
                .collect(),
            corruption: None,
        }
    }

    /// Keeps only entries whose annotation satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&LabelInfo) -> bool) -> ImpreciseDataset {
        ImpreciseDataset {
            classes: self.classes,
            entries: self.entries.iter().filter(|e| keep(&e.label)).cloned().collect(),
            corruption: None,
        }
    }

    pub(crate) fn require_exact(&self, op: &str) -> Result<()> {
        if self.is_fully_labeled() {
            Ok(())
        } else {
            Err(Error::contract(format!("{op} requires exact labels")))
        }
    }

    /// Per-feature standard deviation over all samples.
    pub fn feature_std(&self) -> Vec<f64> {
        let d = self.dim();
        let n = self.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for e in &self.entries {
            for (m, v) in mean.iter_mut().zip(&e.sample.features) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for e in &self.entries {
            for ((s, v), m) in var.iter_mut().zip(&e.sample.features).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.into_iter().map(|s| (s / n).sqrt()).collect()
    }
}
