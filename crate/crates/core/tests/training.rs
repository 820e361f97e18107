use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smtad_core::training::{train, Epochs, TrainConfig, TrainError};
use smtad_core::{Error, Matrix};

fn clustered(seed: u64, rows: usize, sites: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [0.25, 0.7];
    let data: Vec<f64> = (0..rows)
        .flat_map(|i| {
            let c = centers[i % 2];
            (0..sites).map(|_| (c + rng.random_range(-0.08..0.08f64)).clamp(0.0, 1.0)).collect::<Vec<_>>()
        })
        .collect();
    Matrix::from_vec(rows, sites, data).unwrap()
}

fn config(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig { seed, epochs: Epochs::Fixed(epochs), ..TrainConfig::default() }
}

#[test]
fn training_lowers_nll_on_clustered_data() {
    for seed in 0..20 {
        let data = clustered(1000 + seed, 500, 4);
        let out = train(&data, 4, 2, &config(seed, 200)).unwrap();
        let (first, last) = (out.history.first().unwrap(), out.history.last().unwrap());
        assert_eq!(out.history.len(), 200);
        assert!(last.nll < first.nll, "seed {seed}: {} -> {}", first.nll, last.nll);
    }
}

#[test]
fn identical_seeds_give_identical_histories() {
    let data = clustered(5, 120, 3);
    let a = train(&data, 3, 2, &config(9, 15)).unwrap();
    let b = train(&data, 3, 2, &config(9, 15)).unwrap();
    assert_eq!(a, b);
    let c = train(&data, 3, 2, &config(10, 15)).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn history_totals_decompose() {
    let data = clustered(6, 70, 3);
    let out = train(&data, 2, 2, &TrainConfig { batch_size: Some(16), ..config(1, 5) }).unwrap();
    assert_eq!(out.batch_size, 16);
    for e in &out.history {
        assert!((e.total - (e.nll + e.reg)).abs() < 1e-12);
    }
}

#[test]
fn auto_schedule_uses_epoch_budget() {
    let data = clustered(7, 3000, 2);
    let cfg = TrainConfig { epochs: Epochs::Auto, ..TrainConfig::default() };
    assert_eq!(cfg.resolved_batch_size(3000), 64);
    assert_eq!(cfg.resolved_epochs(3000), 320);
    assert_eq!(cfg.resolved_batch_size(20_000), 512);
    assert_eq!(cfg.resolved_epochs(20_000), 384);
    let _ = data;
}

#[test]
fn empty_training_set_is_rejected() {
    let data = Matrix::zeros(0, 3);
    assert_eq!(train(&data, 2, 2, &config(0, 1)), Err(TrainError::Core(Error::EmptyTraining)));
}
