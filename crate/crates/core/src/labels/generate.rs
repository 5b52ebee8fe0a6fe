//! Seeded dataset construction and corruption protocols.
//!
//! Every generator is a pure function of `(dataset, params, seed)`. A noise
//! rate of zero produces no noisy kinds: the annotations are then exact (or,
//! for the mixed protocol, clean candidate sets in canonical form).

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{CandidateSet, Corruption, Entry, ImpreciseDataset, LabelInfo, Sample};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, stream_rng, Rng, Stream};

/// Isotropic Gaussian blobs around scaled simplex vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    /// Distance of every class center from the origin.
    pub separation: f64,
    pub std: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            classes: 10,
            dim: 16,
            separation: 3.0,
            std: 1.0,
        }
    }
}

impl BlobSpec {
    /// Class centers. With `C <= D` these are `separation · e_k`, the
    /// vertices of a scaled standard simplex; otherwise random directions
    /// drawn from `seed`.
    pub fn centers(&self, seed: u64) -> Vec<Vec<f64>> {
        if self.classes <= self.dim {
            return (0..self.classes)
                .map(|k| {
                    let mut c = vec![0.0; self.dim];
                    c[k] = self.separation;
                    c
                })
                .collect();
        }
        let mut rng = stream_rng(seed, Stream::Centers);
        (0..self.classes)
            .map(|_| {
                let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| self.separation * x / norm).collect()
            })
            .collect()
    }

    /// `n` samples with labels cycling through the classes, so every class
    /// receives `n / C` or `n / C + 1` samples.
    pub fn generate(&self, n: usize, seed: u64, stream: Stream) -> Result<ImpreciseDataset> {
        if self.classes < 2 || self.dim == 0 {
            return Err(Error::config("blobs need C >= 2 and D >= 1"));
        }
        if !(self.std >= 0.0 && self.separation.is_finite()) {
            return Err(Error::config("blob std and separation must be finite and nonnegative"));
        }
        let centers = self.centers(seed);
        let mut rng = stream_rng(seed, stream);
        let samples = (0..n)
            .map(|i| {
                let y = i % self.classes;
                let features = centers[y]
                    .iter()
                    .map(|&c| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        c + self.std * z
                    })
                    .collect();
                Sample {
                    features,
                    true_label: y,
                }
            })
            .collect();
        ImpreciseDataset::from_samples(self.classes, samples)
    }
}

fn check_ratio(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::config(format!("{name} = {value} outside [0, 1]")))
    }
}

/// `{anchor}` plus every other class independently with probability `q`,
/// drawn in ascending class order.
fn candidates_around(anchor: usize, classes: usize, q: f64, rng: &mut Rng) -> CandidateSet {
    let mut set = Vec::with_capacity(classes);
    for k in 0..classes {
        if k == anchor || rng.random::<f64>() < q {
            set.push(k);
        }
    }
    CandidateSet::new(set).expect("anchor is always present")
}

/// With probability `eta` replaces `y` by a uniform draw over the other
/// classes.
fn flip_uniform(y: usize, classes: usize, eta: f64, rng: &mut Rng) -> usize {
    if rng.random::<f64>() < eta {
        let r = rng.random_range(0..classes - 1);
        if r < y {
            r
        } else {
            r + 1
        }
    } else {
        y
    }
}

fn relabel(
    dataset: &ImpreciseDataset,
    corruption: Corruption,
    mut f: impl FnMut(&Sample) -> LabelInfo,
) -> Result<ImpreciseDataset> {
    let entries = dataset
        .entries()
        .iter()
        .map(|e| Entry {
            label: f(&e.sample),
            sample: e.sample.clone(),
        })
        .collect();
    Ok(ImpreciseDataset::new(dataset.classes(), entries)?.with_corruption(corruption))
}

pub fn make_partial(dataset: &ImpreciseDataset, q: f64, seed: u64) -> Result<ImpreciseDataset> {
    check_ratio("partial ratio q", q)?;
    dataset.require_exact("make_partial")?;
    let classes = dataset.classes();
    let mut rng = rng_from_seed(seed);
    relabel(dataset, Corruption::Partial { q, seed }, |s| {
        LabelInfo::Candidates(candidates_around(s.true_label, classes, q, &mut rng))
    })
}

pub fn make_symmetric_noise(dataset: &ImpreciseDataset, eta: f64, seed: u64) -> Result<ImpreciseDataset> {
    check_ratio("noise ratio eta", eta)?;
    dataset.require_exact("make_symmetric_noise")?;
    let classes = dataset.classes();
    let mut rng = rng_from_seed(seed);
    relabel(dataset, Corruption::SymmetricNoise { eta, seed }, |s| {
        let observed = flip_uniform(s.true_label, classes, eta, &mut rng);
        if eta == 0.0 {
            LabelInfo::Exact(observed)
        } else {
            LabelInfo::Noisy(observed)
        }
    })
}

/// The default pair map for asymmetric noise: `y → (y + 1) mod C`.
pub fn circular_pair_map(classes: usize) -> Vec<usize> {
    (0..classes).map(|y| (y + 1) % classes).collect()
}

pub fn make_asymmetric_noise(
    dataset: &ImpreciseDataset,
    eta: f64,
    pair_map: &[usize],
    seed: u64,
) -> Result<ImpreciseDataset> {
    check_ratio("noise ratio eta", eta)?;
    dataset.require_exact("make_asymmetric_noise")?;
    let classes = dataset.classes();
    if pair_map.len() != classes || pair_map.iter().any(|&t| t >= classes) {
        return Err(Error::config(format!("pair map must send each of {classes} classes into range")));
    }
    for (y, &t) in pair_map.iter().enumerate() {
        if t == y {
            log::warn!("pair map sends class {y} to itself; its labels are never flipped");
        }
    }
    let mut rng = rng_from_seed(seed);
    let corruption = Corruption::AsymmetricNoise {
        eta,
        pair_map: pair_map.to_vec(),
        seed,
    };
    relabel(dataset, corruption, |s| {
        let y = s.true_label;
        let observed = if rng.random::<f64>() < eta { pair_map[y] } else { y };
        if eta == 0.0 {
            LabelInfo::Exact(observed)
        } else {
            LabelInfo::Noisy(observed)
        }
    })
}

/// Indices of the samples that keep their label: `l / C` per class, chosen
/// uniformly with one draw sequence per class in class order.
fn labeled_indices(dataset: &ImpreciseDataset, labels: usize, rng: &mut Rng) -> Result<Vec<bool>> {
    let classes = dataset.classes();
    if !labels.is_multiple_of(classes) {
        return Err(Error::config(format!("label budget {labels} not divisible by C = {classes}")));
    }
    let per_class = labels / classes;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, e) in dataset.entries().iter().enumerate() {
        by_class[e.sample.true_label].push(i);
    }
    let mut keep = vec![false; dataset.len()];
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < per_class {
            return Err(Error::config(format!(
                "class {class} has {} samples, fewer than {per_class} requested",
                members.len()
            )));
        }
        for j in index::sample(rng, members.len(), per_class).into_iter() {
            keep[members[j]] = true;
        }
    }
    Ok(keep)
}

pub fn select_labeled_subset(dataset: &ImpreciseDataset, labels: usize, seed: u64) -> Result<ImpreciseDataset> {
    dataset.require_exact("select_labeled_subset")?;
    let mut rng = rng_from_seed(seed);
    let keep = labeled_indices(dataset, labels, &mut rng)?;
    let mut i = 0;
    relabel(dataset, Corruption::LabeledSubset { labels, seed }, |s| {
        let label = if keep[i] {
            LabelInfo::Exact(s.true_label)
        } else {
            LabelInfo::Unlabeled
        };
        i += 1;
        label
    })
}

/// One labeled draw of the mixed protocol: flip the true label to a uniform
/// other class with probability `eta` (the anchor), then grow a candidate
/// set around the anchor with partial ratio `q`.
pub fn noisy_candidate_draw(
    true_label: usize,
    classes: usize,
    q: f64,
    eta: f64,
    rng: &mut Rng,
) -> (usize, CandidateSet) {
    let anchor = flip_uniform(true_label, classes, eta, rng);
    (anchor, candidates_around(anchor, classes, q, rng))
}

pub fn make_mixed(
    dataset: &ImpreciseDataset,
    labels: usize,
    q: f64,
    eta: f64,
    seed: u64,
) -> Result<ImpreciseDataset> {
    check_ratio("partial ratio q", q)?;
    check_ratio("noise ratio eta", eta)?;
    dataset.require_exact("make_mixed")?;
    let classes = dataset.classes();
    let mut rng = rng_from_seed(seed);
    let keep = labeled_indices(dataset, labels, &mut rng)?;
    let mut i = 0;
    relabel(dataset, Corruption::Mixed { labels, q, eta, seed }, |s| {
        let labeled = keep[i];
        i += 1;
        if !labeled {
            return LabelInfo::Unlabeled;
        }
        let (_, set) = noisy_candidate_draw(s.true_label, classes, q, eta, &mut rng);
        if eta == 0.0 {
            LabelInfo::Candidates(set).canonical()
        } else {
            LabelInfo::NoisyCandidates(set)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean(n: usize, classes: usize) -> ImpreciseDataset {
        BlobSpec {
            classes,
            dim: 4,
            ..BlobSpec::default()
        }
        .generate(n, 11, Stream::TrainData)
        .unwrap()
    }

    #[test]
    fn partial_extremes() {
        let ds = clean(50, 5);
        let none = make_partial(&ds, 0.0, 1).unwrap();
        for e in none.entries() {
            assert_eq!(e.label, LabelInfo::Candidates(CandidateSet::singleton(e.sample.true_label)));
        }
        let all = make_partial(&ds, 1.0, 1).unwrap();
        for e in all.entries() {
            assert_eq!(e.label, LabelInfo::Candidates(CandidateSet::all(5)));
        }
        assert!(make_partial(&ds, 1.5, 1).is_err());
    }

    #[test]
    fn partial_mean_set_size() {
        let ds = clean(10_000, 10);
        let p = make_partial(&ds, 0.5, 3).unwrap();
        let mean = p
            .labels()
            .map(|l| l.candidate_set().unwrap().len() as f64)
            .sum::<f64>()
            / p.len() as f64;
        let analytic = 1.0 + 0.5 * 9.0;
        assert!((mean - analytic).abs() < 0.1, "{mean}");
    }

    #[test]
    fn symmetric_noise_extremes() {
        let ds = clean(40, 2);
        let clean_noise = make_symmetric_noise(&ds, 0.0, 5).unwrap();
        for e in clean_noise.entries() {
            assert_eq!(e.label, LabelInfo::Exact(e.sample.true_label));
        }
        let flipped = make_symmetric_noise(&ds, 1.0, 5).unwrap();
        for e in flipped.entries() {
            assert_eq!(e.label, LabelInfo::Noisy(1 - e.sample.true_label));
        }
        assert!(make_symmetric_noise(&ds, -0.1, 5).is_err());
    }

    #[test]
    fn symmetric_noise_rate() {
        let ds = clean(10_000, 10);
        let noisy = make_symmetric_noise(&ds, 0.4, 9).unwrap();
        let flipped = noisy
            .entries()
            .iter()
            .filter(|e| e.label != LabelInfo::Noisy(e.sample.true_label))
            .count() as f64
            / 10_000.0;
        assert!((flipped - 0.4).abs() < 0.015, "{flipped}");
    }

    #[test]
    fn asymmetric_circular() {
        let ds = clean(3, 3);
        let map = circular_pair_map(3);
        let out = make_asymmetric_noise(&ds, 1.0, &map, 2).unwrap();
        let observed: Vec<_> = out.labels().cloned().collect();
        assert_eq!(
            observed,
            vec![LabelInfo::Noisy(1), LabelInfo::Noisy(2), LabelInfo::Noisy(0)]
        );
        let same = make_asymmetric_noise(&ds, 0.0, &map, 2).unwrap();
        assert!(same.is_fully_labeled());
    }

    #[test]
    fn asymmetric_per_class_rate() {
        let ds = clean(10_000, 10);
        let out = make_asymmetric_noise(&ds, 0.4, &circular_pair_map(10), 4).unwrap();
        let mut flips = [0usize; 10];
        let mut totals = [0usize; 10];
        for e in out.entries() {
            let y = e.sample.true_label;
            totals[y] += 1;
            match e.label {
                LabelInfo::Noisy(l) if l == y => {}
                LabelInfo::Noisy(l) => {
                    assert_eq!(l, (y + 1) % 10);
                    flips[y] += 1;
                }
                _ => unreachable!(),
            }
        }
        for y in 0..10 {
            let rate = flips[y] as f64 / totals[y] as f64;
            assert!((rate - 0.4).abs() < 0.03, "class {y}: {rate}");
        }
    }

    #[test]
    fn asymmetric_self_map_is_not_an_error() {
        let ds = clean(6, 3);
        let out = make_asymmetric_noise(&ds, 1.0, &[0, 2, 1], 0).unwrap();
        assert_eq!(out.entries()[0].label, LabelInfo::Noisy(0));
    }

    #[test]
    fn subset_counts() {
        let ds = clean(200, 10);
        let full = select_labeled_subset(&ds, 200, 1).unwrap();
        assert!(full.is_fully_labeled());
        let one_each = select_labeled_subset(&ds, 10, 1).unwrap();
        let mut per = [0; 10];
        for e in one_each.entries() {
            if let LabelInfo::Exact(y) = e.label {
                per[y] += 1;
            }
        }
        assert_eq!(per, [1; 10]);
        let forty = select_labeled_subset(&ds, 40, 2).unwrap();
        let mut per = [0; 10];
        for e in forty.entries() {
            match e.label {
                LabelInfo::Exact(y) => per[y] += 1,
                LabelInfo::Unlabeled => {}
                _ => unreachable!(),
            }
        }
        assert_eq!(per, [4; 10]);
        assert!(select_labeled_subset(&ds, 45, 1).is_err());
        assert!(select_labeled_subset(&ds, 210, 1).is_err());
    }

    #[test]
    fn mixed_degenerate_cases() {
        let ds = clean(100, 5);
        let exact = make_mixed(&ds, 100, 0.0, 0.0, 3).unwrap();
        assert!(exact.is_fully_labeled());
        let clean_partial = make_mixed(&ds, 50, 0.4, 0.0, 3).unwrap();
        for e in clean_partial.entries() {
            if let Some(s) = e.label.candidate_set() {
                assert!(s.contains(e.sample.true_label));
                assert!(!e.label.kind().is_noisy());
            }
        }
    }

    #[test]
    fn mixed_missing_true_label_rate() {
        let ds = clean(4000, 10);
        let mixed = make_mixed(&ds, 1000, 0.3, 0.2, 8).unwrap();
        let labeled: Vec<_> = mixed
            .entries()
            .iter()
            .filter(|e| e.label != LabelInfo::Unlabeled)
            .collect();
        assert_eq!(labeled.len(), 1000);
        let missing = labeled
            .iter()
            .filter(|e| !e.label.candidate_set().unwrap().contains(e.sample.true_label))
            .count() as f64
            / 1000.0;
        assert!((missing - 0.2 * 0.7).abs() < 0.02, "{missing}");
    }

    #[test]
    fn noisy_draw_keeps_anchor() {
        let mut rng = rng_from_seed(1);
        for i in 0..500 {
            let (anchor, set) = noisy_candidate_draw(i % 7, 7, 0.3, 0.5, &mut rng);
            assert!(set.contains(anchor));
        }
    }

    #[test]
    fn generators_require_exact_input() {
        let ds = clean(20, 2);
        let noisy = make_symmetric_noise(&ds, 0.2, 1).unwrap();
        assert!(make_partial(&noisy, 0.2, 1).is_err());
    }

    #[test]
    fn replay_reproduces() {
        let ds = clean(300, 5);
        let gens = [
            make_partial(&ds, 0.3, 4).unwrap(),
            make_symmetric_noise(&ds, 0.3, 4).unwrap(),
            make_asymmetric_noise(&ds, 0.3, &circular_pair_map(5), 4).unwrap(),
            select_labeled_subset(&ds, 50, 4).unwrap(),
            make_mixed(&ds, 100, 0.3, 0.2, 4).unwrap(),
        ];
        for g in gens {
            let again = g.corruption().unwrap().replay(&g.to_clean()).unwrap();
            assert_eq!(again, g);
        }
    }

    #[test]
    fn blobs_are_balanced_and_centered() {
        let spec = BlobSpec::default();
        let ds = spec.generate(2000, 5, Stream::TrainData).unwrap();
        let mut counts = [0usize; 10];
        let mut mean0 = [0.0; 16];
        for e in ds.entries() {
            counts[e.sample.true_label] += 1;
            if e.sample.true_label == 0 {
                for (m, v) in mean0.iter_mut().zip(&e.sample.features) {
                    *m += v / 200.0;
                }
            }
        }
        assert_eq!(counts, [200; 10]);
        assert!((mean0[0] - 3.0).abs() < 0.25);
        assert!(mean0[1].abs() < 0.25);
    }
}
