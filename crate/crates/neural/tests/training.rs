use tdekit_core::dataset::{
    generate_dataset, generate_room, read_dataset, GenerationConfig, RoomRecording, SourcePool,
};
use tdekit_neural::{
    train_epochs, train_on_dataset, AdamW, AdamWConfig, Checkpoint, Model, ModelConfig, PairSet, TrainConfig,
};

fn recordings(rooms: usize, mics: usize, seed: u64) -> Vec<RoomRecording> {
    let cfg = GenerationConfig {
        mics,
        movement: false,
        ..GenerationConfig::desk()
    };
    (0..rooms)
        .map(|i| generate_room(&cfg, seed, i, &SourcePool::Synthetic).unwrap().0)
        .collect()
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let mcfg = ModelConfig::desk();
    let set = PairSet::from_recordings(&mcfg, &recordings(1, 5, 1)).unwrap();
    assert_eq!(set.len(), 10);
    let init = Model::<f32>::init(&mcfg, 4).unwrap();
    let mut model = init.clone();
    let tcfg = TrainConfig {
        epochs: 1,
        batch_size: 4,
        optimizer: AdamWConfig {
            lr: 0.0,
            ..AdamWConfig::default()
        },
        ..TrainConfig::desk()
    };
    let mut opt = AdamW::new(tcfg.optimizer, &model.params);
    train_epochs(&mut model, &mut opt, &set, None, &tcfg, 343.0, &mut |_| {}).unwrap();
    // decay is lr * wd, so it vanishes with lr
    assert_eq!(model, init);
    assert_eq!(opt.step, 3);
}

#[test]
fn training_loss_decreases_on_small_subset() {
    let mcfg = ModelConfig::desk();
    let set = PairSet::from_recordings(&mcfg, &recordings(5, 7, 2)).unwrap();
    assert!(set.len() >= 100);
    let tcfg = TrainConfig {
        epochs: 10,
        batch_size: 20,
        max_train_pairs: Some(100),
        swap_augment: false,
        seed: 3,
        ..TrainConfig::desk()
    };
    let mut model = Model::<f32>::init(&mcfg, tcfg.seed).unwrap();
    let mut opt = AdamW::new(tcfg.optimizer, &model.params);
    let history = train_epochs(&mut model, &mut opt, &set, None, &tcfg, 343.0, &mut |_| {}).unwrap();
    let losses: Vec<f64> = history.iter().map(|m| m.train_loss).collect();
    println!("losses {losses:?}");
    assert_eq!(losses.len(), 10);
    assert!(losses[9] < losses[0], "{losses:?}");
    assert!(losses[0] < 1.1 * (1000f64).ln(), "{losses:?}");
}

#[test]
fn training_is_deterministic_and_checkpoint_stable() {
    let dir = tempfile::tempdir().unwrap();
    let gcfg = GenerationConfig {
        rooms: 3,
        mics: 4,
        movement: false,
        ..GenerationConfig::desk()
    };
    generate_dataset(&gcfg, 5, &SourcePool::Synthetic, &dir.path().join("data"), |_, _| {}).unwrap();
    let reader = read_dataset(&dir.path().join("data")).unwrap();
    let tcfg = TrainConfig {
        epochs: 2,
        batch_size: 8,
        validation_fraction: 0.34,
        seed: 11,
        ..TrainConfig::desk()
    };
    let run = || {
        let out = train_on_dataset(&reader, &ModelConfig::desk(), &tcfg, &mut |_| {}).unwrap();
        Checkpoint {
            model: out.model,
            optimizer: Some(out.optimizer),
            metadata: out.metadata,
        }
    };
    let a = run();
    let b = run();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(a.metadata.dataset_manifest_hash, reader.manifest_hash());
    assert_eq!(a.metadata.dataset_master_seed, 5);
    let path = dir.path().join("model.ckpt");
    a.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.to_bytes(), std::fs::read(&path).unwrap());
    assert_eq!(back.metadata, a.metadata);
}

#[test]
fn empty_training_set_is_an_error() {
    let mcfg = ModelConfig::desk();
    let set = PairSet::default();
    let mut model = Model::<f32>::init(&mcfg, 0).unwrap();
    let mut opt = AdamW::new(AdamWConfig::default(), &model.params);
    let err = train_epochs(
        &mut model,
        &mut opt,
        &set,
        None,
        &TrainConfig::desk(),
        343.0,
        &mut |_| {},
    );
    assert!(matches!(err, Err(tdekit_neural::Error::Training { .. })));
}
