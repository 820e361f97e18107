use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smtad::model_file::{ModelFile, Protocol};
use smtad_core::preprocess::{FitScope, RankNormalizer};
use smtad_core::training::{init_params, TrainConfig};
use smtad_core::Matrix;

fn model(seed: u64) -> (ModelFile, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = Matrix::from_vec(300, 6, (0..1800).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
    let normalizer = RankNormalizer::fit(&raw, 12).unwrap();
    let mut params = init_params(6, 3, 3, seed).unwrap();
    params.theta_mut().iter_mut().for_each(|t| *t += rng.random_range(-1.0..1.0));
    params.coeff_mut().iter_mut().for_each(|c| *c = rng.random_range(-1.0..1.0));
    let protocol = Protocol { label: None, split: 0.5, discrete_threshold: 12, fit_scope: FitScope::Full };
    let names = (1..=6).map(|j| format!("f{j}")).collect();
    let file = ModelFile::new(&params, normalizer, 6, names, None, TrainConfig { seed, ..TrainConfig::default() }, protocol);
    (file, raw)
}

#[test]
fn save_load_scores_are_bit_identical() {
    let (file, _) = model(4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    file.save(&path).unwrap();
    let loaded = ModelFile::load(&path).unwrap();
    assert_eq!(loaded, file);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rows = Matrix::from_vec(1000, 6, (0..6000).map(|_| rng.random_range(-6.0..6.0)).collect()).unwrap();
    let (a, b) = (file.normalize(&rows).unwrap(), loaded.normalize(&rows).unwrap());
    let (pa, pb) = (file.params().unwrap(), loaded.params().unwrap());
    for (x, y) in a.iter_rows().zip(b.iter_rows()) {
        let (sa, sb) = (pa.normality_score(x).unwrap(), pb.normality_score(y).unwrap());
        assert_eq!(sa.score.to_bits(), sb.score.to_bits());
        assert_eq!(sa.log_score.to_bits(), sb.log_score.to_bits());
    }
    // second save is byte-identical
    let again = dir.path().join("again.json");
    loaded.save(&again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn wrong_version_or_format_is_rejected() {
    let (file, _) = model(5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let mut bumped = file.clone();
    bumped.version = 99;
    std::fs::write(&path, bumped.to_json()).unwrap();
    assert!(ModelFile::load(&path).is_err());
    let mut other = file;
    other.format = "something-else".into();
    std::fs::write(&path, other.to_json()).unwrap();
    assert!(ModelFile::load(&path).is_err());
}

#[test]
fn normalize_applies_selection_to_full_rows() {
    let (mut file, raw) = model(6);
    file.normalizer = file.normalizer.select(&[1, 4]).unwrap();
    file.selection = Some(vec![2, 5]);
    file.sites = 2;
    let params = smtad_core::training::init_params(2, 3, 3, 0).unwrap();
    file.theta = params.theta().to_vec();
    let full = file.normalize(&raw).unwrap();
    let narrow = file.normalize(&raw.select_columns(&[1, 4])).unwrap();
    assert_eq!(full, narrow);
    assert!(file.normalize(&raw.select_columns(&[0, 1, 2])).is_err());
}

#[test]
fn parameters_survive_json_exactly() {
    let (mut file, _) = model(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut params = file.params().unwrap();
    params.theta_mut().iter_mut().for_each(|t| *t = rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-300..300)));
    file = ModelFile::new(
        &params,
        file.normalizer.clone(),
        file.input_features,
        file.feature_names.clone(),
        None,
        file.config.clone(),
        file.protocol.clone(),
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    file.save(&path).unwrap();
    let loaded = ModelFile::load(&path).unwrap().params().unwrap();
    for (a, b) in params.theta().iter().zip(loaded.theta()) {
        assert_eq!(a.to_bits(), b.to_bits(), "{a:e}");
    }
}
