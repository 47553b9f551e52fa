mod common;

use std::collections::HashSet;

use papa::datasets::{gen_swiss_roll, gen_zigzag};
use papa::pipeline::export_model;
use papa::{run_papa, LevelCount, PapaConfig, PapaError, PointCloud, RadiusPolicy, StopReason};

fn roll_config() -> PapaConfig<f64> {
    let mut config = PapaConfig::new(0.01, 200, LevelCount::Count(2));
    config.radius = RadiusPolicy::Fixed(0.55);
    config.seed = 8;
    config
}

#[test]
fn two_level_run_is_consistent_and_deterministic() {
    let data = gen_swiss_roll::<f64>(600, 0.0, 0.1, 2).unwrap();
    let config = roll_config();
    let model = run_papa(&data.cloud, &config).unwrap();
    assert_eq!(model, run_papa(&data.cloud, &config).unwrap());
    assert!(model.levels.len() <= 3);

    let mut dim = data.cloud.dim();
    let mut alive: HashSet<usize> = (0..data.cloud.len()).collect();
    for level in &model.levels {
        assert_eq!(level.residual.dim(), dim - 1);
        assert_eq!(level.coordinates.len(), level.point_indices.len());
        assert_eq!(level.residual.len(), level.point_indices.len());
        for i in level.point_indices.iter().chain(&level.failures) {
            assert!(alive.contains(i), "point {i} reappeared after failing");
        }
        assert_eq!(level.point_indices.len() + level.failures.len(), alive.len());
        alive = level.point_indices.iter().copied().collect();
        dim -= 1;
    }
}

#[test]
fn zigzag_coordinate_follows_arc_length() {
    let data = gen_zigzag::<f64>(800, 0.0, 6).unwrap();
    let mut config = PapaConfig::new(0.01, 300, LevelCount::Auto);
    config.radius = RadiusPolicy::Fixed(0.1);
    let model = run_papa(&data.cloud, &config).unwrap();
    assert_eq!(model.stop_reason, StopReason::RequestedLevelsReached);
    let level = &model.levels[0];
    let s: Vec<f64> = level.point_indices.iter().map(|&i| data.samples[i].params[0]).collect();
    let rho = common::spearman(&level.coordinates, &s).abs();
    assert!(rho > 0.99, "spearman {rho}");
}

#[test]
fn isotropic_blob_stops_at_level_zero() {
    let mut config = PapaConfig::new(0.01, 50, LevelCount::Auto);
    config.radius = RadiusPolicy::Fixed(0.1);
    let model = run_papa(&common::disk(5000, 1), &config).unwrap();
    assert_eq!(model.stop_reason, StopReason::IsotropicData);
    assert!(model.levels.is_empty());
}

#[test]
fn level_count_is_validated() {
    let data = gen_swiss_roll::<f64>(100, 0.0, 0.1, 2).unwrap();
    for bad in [0, 4, 5] {
        let config = PapaConfig::new(0.01, 10, LevelCount::Count(bad));
        assert!(matches!(
            run_papa(&data.cloud, &config),
            Err(PapaError::InvalidParameter { .. })
        ));
    }
    let line = PointCloud::from_flat((0..10).map(|i| i as f64).collect(), 1).unwrap();
    assert!(run_papa(&line, &PapaConfig::new(0.01, 10, LevelCount::Auto)).is_err());
}

#[test]
fn plane_missing_the_data_fails_level_zero() {
    let data = gen_zigzag::<f64>(200, 0.0, 6).unwrap();
    let mut config = PapaConfig::new(0.01, 50, LevelCount::Auto);
    config.radius = RadiusPolicy::Fixed(0.1);
    config.base_strategies = vec![papa::BaseStrategy::UserSupplied {
        anchor: vec![100.0, 0.0],
        normal: vec![1.0, 0.0],
    }];
    match run_papa(&data.cloud, &config) {
        Err(PapaError::LevelZeroFailed(inner)) => assert!(inner.is_numerical(), "{inner}"),
        other => panic!("expected level-zero failure, got {other:?}"),
    }
}

#[test]
fn f32_pipeline_runs() {
    let data = gen_zigzag::<f32>(400, 0.01, 6).unwrap();
    let mut config = PapaConfig::new(0.01f32, 300, LevelCount::Auto);
    config.radius = RadiusPolicy::Fixed(0.1);
    let model = run_papa(&data.cloud, &config).unwrap();
    assert_eq!(model.levels.len(), 1);
    let s: Vec<f64> = model.levels[0]
        .point_indices
        .iter()
        .map(|&i| data.samples[i].params[0] as f64)
        .collect();
    let c: Vec<f64> = model.levels[0].coordinates.iter().map(|&x| x as f64).collect();
    assert!(common::spearman(&c, &s).abs() > 0.95);
}

#[test]
fn export_writes_every_level() {
    let data = gen_swiss_roll::<f64>(400, 0.0, 0.1, 2).unwrap();
    let config = roll_config();
    let model = run_papa(&data.cloud, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_model(&model, &config, dir.path()).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["stop_reason"], model.stop_reason.as_str());
    assert_eq!(manifest["levels"].as_array().unwrap().len(), model.levels.len());
    for k in 0..model.levels.len() {
        let level = dir.path().join(format!("level_{k}"));
        let coords = std::fs::read_to_string(level.join("coordinates.csv")).unwrap();
        assert_eq!(coords.lines().count(), model.levels[k].coordinates.len() + 1);
        assert!(level.join("base.json").exists() && level.join("residual.csv").exists());
    }
}
