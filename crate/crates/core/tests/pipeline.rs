use mimo_align::channel::{sample_channel, sigma2_from_snr, SnrSpec};
use mimo_align::codec::{generate_synthetic, load_dataset, save_dataset, ChannelDims, SyntheticSpec, WhitenOptions};
use mimo_align::evalx::{self, Method, SweepConfig};
use mimo_align::linear_eq::{train_linear, AdmmConfig, ChannelKnowledge};
use mimo_align::model_io::{load_model, save_linear, save_neural, SavedModel};
use mimo_align::neural_eq::{train_neural, TrainConfig};

fn spec() -> SyntheticSpec {
    SyntheticSpec { d: 8, m: 12, n: 120, classes: 3, cluster_spread: 0.2, seed: 9, ..SyntheticSpec::default() }
}

#[test]
fn dataset_survives_disk() {
    let ds = generate_synthetic(&spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back.labels, ds.labels);
    // blobs are f32
    assert!((&back.tx - &ds.tx).amax() < 1e-5 * ds.tx.amax());
    assert!((&back.rx - &ds.rx).amax() < 1e-5 * ds.rx.amax());
}

#[test]
fn saved_models_score_like_the_originals() {
    let ds = generate_synthetic(&spec()).unwrap();
    let dims = ChannelDims::new(1, 2, 3).unwrap();
    let ch = sample_channel(dims, 4);
    let sigma2 = sigma2_from_snr(SnrSpec::new(15.0, 1.0).unwrap());
    let h = ch.lift();
    let dir = tempfile::tempdir().unwrap();

    let (lin, _) = train_linear(&ds, &ch, sigma2, &AdmmConfig::default(), Some(WhitenOptions::default()), ChannelKnowledge::Aware, 1).unwrap();
    save_linear(dir.path().join("lin"), &lin, &ch).unwrap();
    let SavedModel::Linear { eq, channel, .. } = load_model(dir.path().join("lin")).unwrap() else {
        panic!("expected a linear model");
    };
    assert_eq!(channel.dims, dims);
    let a = evalx::score(&lin, &ds, &h, sigma2, 7).unwrap();
    let b = evalx::score(&eq, &ds, &channel.lift(), sigma2, 7).unwrap();
    assert!((a.0 - b.0).abs() < 1e-4 * a.0.max(1.0), "{a:?} vs {b:?}");

    let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
    let (neu, _) = train_neural(&ds, &ch, sigma2, &cfg, Some(WhitenOptions::default()), ChannelKnowledge::Aware).unwrap();
    save_neural(dir.path().join("neu"), &neu, &ch).unwrap();
    let SavedModel::Neural { eq, channel, .. } = load_model(dir.path().join("neu")).unwrap() else {
        panic!("expected a neural model");
    };
    let a = evalx::score(&neu, &ds, &h, sigma2, 7).unwrap();
    let b = evalx::score(&eq, &ds, &channel.lift(), sigma2, 7).unwrap();
    assert!((a.0 - b.0).abs() < 1e-4 * a.0.max(1.0), "{a:?} vs {b:?}");
}

#[test]
fn sweep_csv_is_reproducible() {
    let ds = generate_synthetic(&spec()).unwrap();
    let cfg = SweepConfig {
        methods: Method::ALL.to_vec(),
        antennas: vec![ChannelDims::new(1, 1, 2).unwrap(), ChannelDims::new(2, 1, 1).unwrap()],
        snr_db: vec![5.0, 20.0],
        sparsity: vec![0.0, 10.0],
        n_realizations: 2,
        n_pilots: 60,
        neural: TrainConfig { epochs: 2, ..TrainConfig::default() },
        ..SweepConfig::default()
    };
    let a = evalx::monte_carlo(&cfg, &ds).unwrap();
    assert_eq!(a.len(), cfg.record_count());
    assert_eq!(evalx::to_csv(&a), evalx::to_csv(&evalx::monte_carlo(&cfg, &ds).unwrap()));
    let other = SweepConfig { base_seed: 1, ..cfg };
    assert_ne!(evalx::to_csv(&a), evalx::to_csv(&evalx::monte_carlo(&other, &ds).unwrap()));
}
