//! Learning settings selectable by name.
//!
//! A task knows how to turn a clean dataset into its kind of imprecise
//! annotation, which annotation kinds it can train on, and how to build the
//! reduced dataset its natural baseline sees. Training itself is shared: the
//! batch loss dispatches on each sample's annotation, not on the task.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::labels::{
    circular_pair_map, make_asymmetric_noise, make_mixed, make_partial, make_symmetric_noise,
    select_labeled_subset, ImpreciseDataset, LabelInfo, LabelKind,
};

/// Corruption parameters a task may read. Unused fields are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionParams {
    /// Partial ratio.
    pub q: f64,
    /// Noise ratio.
    pub eta: f64,
    /// Total label budget; `None` keeps every label.
    pub labels: Option<usize>,
    /// Flip along `y → (y + 1) mod C` instead of uniformly.
    pub asymmetric: bool,
}

impl Default for CorruptionParams {
    fn default() -> Self {
        CorruptionParams {
            q: 0.0,
            eta: 0.0,
            labels: None,
            asymmetric: false,
        }
    }
}

/// Which corruption settings a task's protocol reads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Knobs {
    pub q: bool,
    pub eta: bool,
    pub labels: bool,
}

pub trait LearningTask: Send + Sync {
    fn name(&self) -> &'static str;

    fn knobs(&self) -> Knobs {
        Knobs::default()
    }

    fn description(&self) -> &'static str;

    fn accepts(&self, kind: LabelKind) -> bool;

    /// Applies the task's corruption protocol to a fully labeled dataset.
    fn corrupt(&self, clean: &ImpreciseDataset, params: &CorruptionParams, seed: u64) -> Result<ImpreciseDataset>;

    /// The dataset a baseline that ignores unlabeled samples would train on,
    /// for tasks where that baseline is meaningful.
    fn labeled_only(&self, _dataset: &ImpreciseDataset) -> Option<ImpreciseDataset> {
        None
    }

    fn check_compatible(&self, dataset: &ImpreciseDataset) -> Result<()> {
        match dataset.labels().map(LabelInfo::kind).find(|k| !self.accepts(*k)) {
            Some(kind) => Err(Error::config(format!(
                "task `{}` cannot train on `{}` annotations",
                self.name(),
                kind.tag()
            ))),
            None => Ok(()),
        }
    }
}

fn drop_unlabeled(dataset: &ImpreciseDataset) -> ImpreciseDataset {
    dataset.filter(|l| !matches!(l, LabelInfo::Unlabeled))
}

struct Supervised;

impl LearningTask for Supervised {
    fn name(&self) -> &'static str {
        "supervised"
    }

    fn description(&self) -> &'static str {
        "exact labels"
    }

    fn accepts(&self, kind: LabelKind) -> bool {
        kind == LabelKind::Exact
    }

    fn corrupt(&self, clean: &ImpreciseDataset, _: &CorruptionParams, _: u64) -> Result<ImpreciseDataset> {
        clean.require_exact("supervised task")?;
        Ok(clean.clone())
    }
}

struct PartialLabels;

impl LearningTask for PartialLabels {
    fn knobs(&self) -> Knobs {
        Knobs { q: true, ..Knobs::default() }
    }

    fn name(&self) -> &'static str {
        "pll"
    }

    fn description(&self) -> &'static str {
        "candidate sets containing the true label"
    }

    fn accepts(&self, kind: LabelKind) -> bool {
        matches!(kind, LabelKind::Exact | LabelKind::Partial)
    }

    fn corrupt(&self, clean: &ImpreciseDataset, p: &CorruptionParams, seed: u64) -> Result<ImpreciseDataset> {
        make_partial(clean, p.q, seed)
    }
}

struct SemiSupervised;

impl LearningTask for SemiSupervised {
    fn knobs(&self) -> Knobs {
        Knobs { labels: true, ..Knobs::default() }
    }

    fn name(&self) -> &'static str {
        "ssl"
    }

    fn description(&self) -> &'static str {
        "a class-balanced labeled subset, the rest unlabeled"
    }

    fn accepts(&self, kind: LabelKind) -> bool {
        matches!(kind, LabelKind::Exact | LabelKind::Unlabeled)
    }

    fn corrupt(&self, clean: &ImpreciseDataset, p: &CorruptionParams, seed: u64) -> Result<ImpreciseDataset> {
        select_labeled_subset(clean, p.labels.unwrap_or(clean.len()), seed)
    }

    fn labeled_only(&self, dataset: &ImpreciseDataset) -> Option<ImpreciseDataset> {
        Some(drop_unlabeled(dataset))
    }
}

struct NoisyLabels;

impl LearningTask for NoisyLabels {
    fn knobs(&self) -> Knobs {
        Knobs { eta: true, ..Knobs::default() }
    }

    fn name(&self) -> &'static str {
        "nll"
    }

    fn description(&self) -> &'static str {
        "labels flipped with a class-dependent transition"
    }

    fn accepts(&self, kind: LabelKind) -> bool {
        matches!(kind, LabelKind::Exact | LabelKind::Noisy)
    }

    fn corrupt(&self, clean: &ImpreciseDataset, p: &CorruptionParams, seed: u64) -> Result<ImpreciseDataset> {
        if p.asymmetric {
            make_asymmetric_noise(clean, p.eta, &circular_pair_map(clean.classes()), seed)
        } else {
            make_symmetric_noise(clean, p.eta, seed)
        }
    }
}

struct Mixed;

impl LearningTask for Mixed {
    fn knobs(&self) -> Knobs {
        Knobs { q: true, eta: true, labels: true }
    }

    fn name(&self) -> &'static str {
        "mixed"
    }

    fn description(&self) -> &'static str {
        "labeled subset with noisy candidate sets, the rest unlabeled"
    }

    fn accepts(&self, _kind: LabelKind) -> bool {
        true
    }

    fn corrupt(&self, clean: &ImpreciseDataset, p: &CorruptionParams, seed: u64) -> Result<ImpreciseDataset> {
        make_mixed(clean, p.labels.unwrap_or(clean.len()), p.q, p.eta, seed)
    }

    fn labeled_only(&self, dataset: &ImpreciseDataset) -> Option<ImpreciseDataset> {
        Some(drop_unlabeled(dataset))
    }
}

#[derive(Default)]
pub struct TaskRegistry {
    tasks: BTreeMap<&'static str, Box<dyn LearningTask>>,
}

impl TaskRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::new();
        r.register(Box::new(Supervised));
        r.register(Box::new(PartialLabels));
        r.register(Box::new(SemiSupervised));
        r.register(Box::new(NoisyLabels));
        r.register(Box::new(Mixed));
        r
    }

    /// Adds a task, replacing any task registered under the same name.
    pub fn register(&mut self, task: Box<dyn LearningTask>) {
        self.tasks.insert(task.name(), task);
    }

    pub fn get(&self, name: &str) -> Result<&dyn LearningTask> {
        self.tasks.get(name).map(|t| t.as_ref()).ok_or_else(|| {
            Error::config(format!(
                "unknown task `{name}` (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.tasks.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn LearningTask> + '_ {
        self.tasks.values().map(|t| t.as_ref())
    }
}

static BUILTIN: LazyLock<TaskRegistry> = LazyLock::new(TaskRegistry::with_builtin);

pub fn builtin() -> &'static TaskRegistry {
    &BUILTIN
}
