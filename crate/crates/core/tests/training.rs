use ill_core::labels::{make_mixed, make_partial, BlobSpec, CandidateSet, Entry, ImpreciseDataset, LabelInfo, Sample};
use ill_core::model::{Architecture, Classifier};
use ill_core::noise::NoiseModel;
use ill_core::rng::{derive_seed, stream_rng, Stream};
use ill_core::task::{builtin, CorruptionParams};
use ill_core::trainer::{exact_em_check, train, EmCheckConfig, TrainConfig};
use ill_core::Error;

fn blobs(classes: usize, dim: usize, n: usize, seed: u64) -> ImpreciseDataset {
    BlobSpec {
        classes,
        dim,
        ..BlobSpec::default()
    }
    .generate(n, seed, Stream::TrainData)
    .unwrap()
}

fn config(task: &str, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        task: task.into(),
        epochs,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_returns_initialization() {
    let data = blobs(4, 3, 50, 1);
    for arch in [Architecture::Linear, Architecture::Mlp { hidden: 8 }] {
        let cfg = TrainConfig {
            arch,
            ..config("supervised", 0, 9)
        };
        let out = train(&data, &cfg, None).unwrap();
        let init = Classifier::init(arch, 3, 4, &mut stream_rng(9, Stream::Init)).unwrap();
        assert_eq!(out.classifier, init);
        assert!(out.metrics.is_empty());
    }
}

#[test]
fn separable_two_class_blobs() {
    let spec = BlobSpec {
        classes: 2,
        dim: 2,
        separation: 8.0,
        std: 1.0,
    };
    let train_set = spec.generate(400, 5, Stream::TrainData).unwrap();
    let test = spec.generate(400, 5, Stream::TestData).unwrap();
    let out = train(&train_set, &config("supervised", 50, 5), Some(&test)).unwrap();
    let acc = out.metrics.last().unwrap().test_acc.unwrap();
    assert!(acc >= 0.99, "accuracy {acc}");
}

#[test]
fn runs_are_deterministic() {
    let clean = blobs(5, 4, 300, 2);
    let data = make_mixed(&clean, 150, 0.3, 0.2, 17).unwrap();
    let cfg = TrainConfig {
        ema: Some(0.7),
        ..config("mixed", 4, 3)
    };
    let a = train(&data, &cfg, Some(&clean)).unwrap();
    let b = train(&data, &cfg, Some(&clean)).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.classifier, b.classifier);
    assert_eq!(a.noise, b.noise);
    let c = train(&data, &TrainConfig { seed: 4, ..cfg }, Some(&clean)).unwrap();
    assert_ne!(a.metrics, c.metrics);
}

#[test]
fn ema_changes_targets() {
    let clean = blobs(4, 4, 200, 6);
    let data = make_partial(&clean, 0.5, 8).unwrap();
    let plain = train(&data, &config("pll", 3, 1), None).unwrap();
    let ema = train(&data, &TrainConfig { ema: Some(0.9), ..config("pll", 3, 1) }, None).unwrap();
    assert_eq!(plain.metrics[0].loss_supervised, ema.metrics[0].loss_supervised);
    assert_ne!(plain.metrics, ema.metrics);
}

#[test]
fn degenerate_settings_reproduce_supervised_losses() {
    let clean = blobs(10, 16, 1000, 0);
    let reference = train(&clean, &config("supervised", 5, 12), None).unwrap().metrics;
    let n = clean.len();
    let params = CorruptionParams {
        q: 0.0,
        eta: 0.0,
        labels: Some(n),
        asymmetric: false,
    };
    for task in ["pll", "ssl", "nll", "mixed"] {
        let data = builtin().get(task).unwrap().corrupt(&clean, &params, 99).unwrap();
        let got = train(&data, &config(task, 5, 12), None).unwrap().metrics;
        let losses = |m: &[ill_core::trainer::MetricsRecord]| {
            m.iter()
                .map(|r| (r.loss_total, r.loss_consistency, r.loss_supervised, r.loss_entropy))
                .collect::<Vec<_>>()
        };
        assert_eq!(losses(&got), losses(&reference), "task {task}");
    }
}

#[test]
fn incompatible_annotations_are_rejected() {
    let clean = blobs(3, 2, 60, 0);
    let mixed = make_mixed(&clean, 30, 0.2, 0.2, 1).unwrap();
    assert!(matches!(train(&mixed, &config("pll", 1, 0), None), Err(Error::Config(_))));
    assert!(matches!(train(&clean, &config("nope", 1, 0), None), Err(Error::Config(_))));
}

#[test]
fn divergence_aborts_with_epoch() {
    let data = blobs(3, 2, 64, 0);
    let mut cfg = config("supervised", 3, 0);
    cfg.sgd.lr = f64::MAX;
    cfg.sgd.weight_decay = 0.0;
    match train(&data, &cfg, None) {
        Err(Error::Diverged { epoch, .. }) => assert_eq!(epoch, 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

fn em_dataset(task: &str, seed: u64) -> ImpreciseDataset {
    let clean = blobs(5, 4, 200, seed);
    let params = CorruptionParams {
        q: 0.5,
        eta: 0.3,
        labels: Some(50),
        asymmetric: false,
    };
    builtin()
        .get(task)
        .unwrap()
        .corrupt(&clean, &params, derive_seed(seed, Stream::Corruption))
        .unwrap()
}

#[test]
fn exact_em_is_monotone_for_every_task() {
    for task in ["pll", "ssl", "nll", "mixed"] {
        let data = em_dataset(task, 3);
        let mut classifier = Classifier::init(Architecture::Linear, 4, 5, &mut stream_rng(3, Stream::Init)).unwrap();
        let mut noise = data.has_noisy().then(|| NoiseModel::new(5, 1.0).unwrap());
        let trace = exact_em_check(&data, &mut classifier, noise.as_mut(), &EmCheckConfig::default()).unwrap();
        assert_eq!(trace.log_likelihood.len(), 51);
        assert!(trace.max_decrease() <= 1e-9, "{task}: drop {:e}", trace.max_decrease());
        let first = trace.log_likelihood[0];
        let last = *trace.log_likelihood.last().unwrap();
        assert!(last > first, "{task}: {first} -> {last}");
    }
}

#[test]
fn partial_trace_rises_strictly_before_plateau() {
    let data = em_dataset("pll", 8);
    let mut classifier = Classifier::zeros(Architecture::Linear, 4, 5).unwrap();
    let trace = exact_em_check(&data, &mut classifier, None, &EmCheckConfig::default()).unwrap();
    let l = &trace.log_likelihood;
    let gains: Vec<f64> = l.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gains[..10].iter().all(|g| *g > 0.0), "{gains:?}");
    assert!(gains.iter().all(|g| *g >= -1e-9));
    assert!(gains[0] > 10.0 * gains.last().unwrap().abs(), "no plateau: {gains:?}");
}

#[test]
fn one_sample_certain_partial_label_approaches_zero() {
    let data = ImpreciseDataset::new(
        3,
        vec![Entry {
            sample: Sample {
                features: vec![1.0, -1.0],
                true_label: 2,
            },
            label: LabelInfo::Candidates(CandidateSet::singleton(2)),
        }],
    )
    .unwrap();
    let mut classifier = Classifier::zeros(Architecture::Linear, 2, 3).unwrap();
    let cfg = EmCheckConfig {
        iterations: 200,
        ..EmCheckConfig::default()
    };
    let trace = exact_em_check(&data, &mut classifier, None, &cfg).unwrap();
    let last = *trace.log_likelihood.last().unwrap();
    assert!(last < 0.0 && last > -0.05, "final {last}");
    assert!(trace.log_likelihood.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn em_check_refuses_large_or_unmodelled_inputs() {
    let big = blobs(3, 2, 2001, 0);
    let mut c = Classifier::zeros(Architecture::Linear, 2, 3).unwrap();
    assert!(exact_em_check(&big, &mut c, None, &EmCheckConfig::default()).is_err());
    let noisy = em_dataset("nll", 0);
    let mut c = Classifier::zeros(Architecture::Linear, 4, 5).unwrap();
    assert!(matches!(
        exact_em_check(&noisy, &mut c, None, &EmCheckConfig::default()),
        Err(Error::Config(_))
    ));
}
