use ill_core::automaton::{forward_backward, position_for, LabelNfa};
use ill_core::labels::{CandidateSet, LabelInfo};
use ill_core::noise::TransitionMatrix;
use ill_core::posterior::posterior;
use ill_core::rng::{rng_from_seed, Rng};
use ill_core::ProbVector;
use rand::Rng as _;

fn random_simplex(c: usize, rng: &mut Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 0.01).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn random_label(c: usize, rng: &mut Rng) -> LabelInfo {
    let set = |rng: &mut Rng| loop {
        let s: Vec<usize> = (0..c).filter(|_| rng.random::<f64>() < 0.5).collect();
        if !s.is_empty() {
            break CandidateSet::new(s).unwrap();
        }
    };
    match rng.random_range(0..5) {
        0 => LabelInfo::Exact(rng.random_range(0..c)),
        1 => LabelInfo::Candidates(set(rng)),
        2 => LabelInfo::Unlabeled,
        3 => LabelInfo::Noisy(rng.random_range(0..c)),
        _ => LabelInfo::NoisyCandidates(set(rng)),
    }
}

/// Per-sample weight of class `y` under annotation `label`, from first
/// principles: admissibility times the observation likelihood.
fn weight(label: &LabelInfo, y: usize, t: &[Vec<f64>]) -> f64 {
    match label {
        LabelInfo::Exact(k) => (y == *k) as u8 as f64,
        LabelInfo::Candidates(s) => s.contains(y) as u8 as f64,
        LabelInfo::Unlabeled => 1.0,
        LabelInfo::Noisy(o) => t[y][*o],
        LabelInfo::NoisyCandidates(s) => s.iter().map(|o| t[y][o]).sum(),
    }
}

/// Enumerates all `C^N` label sequences.
fn enumerate(emissions: &[Vec<f64>], labels: &[LabelInfo], t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = labels.len();
    let c = emissions[0].len();
    let mut marg = vec![vec![0.0; c]; n];
    let total = c.pow(n as u32);
    for code in 0..total {
        let seq: Vec<usize> = (0..n).map(|i| (code / c.pow(i as u32)) % c).collect();
        let mass: f64 = seq
            .iter()
            .enumerate()
            .map(|(i, &y)| emissions[i][y] * weight(&labels[i], y, t))
            .product();
        for (i, &y) in seq.iter().enumerate() {
            marg[i][y] += mass;
        }
    }
    for row in &mut marg {
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= z);
    }
    marg
}

fn random_transition(c: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..c).map(|_| random_simplex(c, rng)).collect()
}

#[test]
fn forward_backward_matches_enumeration() {
    let mut rng = rng_from_seed(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let c = rng.random_range(2..=4);
        let n = rng.random_range(1..=8);
        let t_rows = random_transition(c, &mut rng);
        let t = TransitionMatrix::from_rows(&t_rows).unwrap();
        let labels: Vec<LabelInfo> = (0..n).map(|_| random_label(c, &mut rng)).collect();
        let emissions: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(c, &mut rng)).collect();
        let positions = labels
            .iter()
            .zip(&emissions)
            .map(|(l, e)| position_for(l, ProbVector::new(e.clone()).unwrap(), Some(&t)).unwrap())
            .collect();
        let nfa = LabelNfa::new(c, positions).unwrap();
        let fb = forward_backward(&nfa).unwrap();
        let oracle = enumerate(&emissions, &labels, &t_rows);
        for (a, b) in fb.iter().zip(&oracle) {
            for (x, y) in a.probs.as_slice().iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    assert!(worst < 1e-10, "max deviation {worst:e}");
}

#[test]
fn single_position_matches_closed_forms() {
    let mut rng = rng_from_seed(77);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let c = rng.random_range(2..=10);
        let t = TransitionMatrix::from_rows(&random_transition(c, &mut rng)).unwrap();
        let label = loop {
            let l = random_label(c, &mut rng);
            if !matches!(l, LabelInfo::Exact(_)) || i % 5 == 0 {
                break l;
            }
        };
        let pred = ProbVector::new(random_simplex(c, &mut rng)).unwrap();
        let closed = posterior(&pred, &label, Some(&t)).unwrap();
        let nfa = LabelNfa::new(c, vec![position_for(&label, pred, Some(&t)).unwrap()]).unwrap();
        let fb = &forward_backward(&nfa).unwrap()[0];
        for (x, y) in fb.probs.as_slice().iter().zip(closed.probs.as_slice()) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(worst < 1e-12, "max deviation {worst:e}");
}

#[test]
fn unnormalized_emissions_scale_out() {
    // Long chains of small emissions stay finite and normalized.
    let c = 4;
    let label = LabelInfo::Candidates(CandidateSet::new(vec![0, 3]).unwrap());
    let pred = ProbVector::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap();
    let nfa = LabelNfa::new(c, vec![position_for(&label, pred, None).unwrap(); 20_000]).unwrap();
    for post in forward_backward(&nfa).unwrap() {
        let p = post.probs.as_slice();
        assert!((p[0] - 0.875).abs() < 1e-12 && (p[3] - 0.125).abs() < 1e-12);
    }
}
