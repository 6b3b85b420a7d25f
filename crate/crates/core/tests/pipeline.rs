use mlgrowth::mechanistic::{
    tumor_area, BootstrapEnsemble, DecayForm, GrowthParams, NoiseModel, ReplicateDiagnostics,
};
use mlgrowth::phantom::{
    generate_phantom_series, write_phantom_series, Ellipse, Intensity, PhantomManifest,
    PhantomSeries, PhantomSpec, TumorSpec,
};
use mlgrowth::pipeline::{
    capped_targets, grid_search, predict_from_ensemble, run_dynamic_prediction,
    run_static_prediction, segment_tumor, LongitudinalPair, RunConfig,
};
use mlgrowth::Error;

fn growth() -> GrowthParams {
    GrowthParams {
        a0: 60.0,
        lambda: 0.03,
        survival: 0.7,
        lambda_decay: 0.03,
        delta: 5.0,
        slope: 0.2,
        t_rt_start: 20.0,
        decay_form: DecayForm::Gated,
    }
}

fn spec() -> PhantomSpec {
    PhantomSpec {
        width: 48,
        height: 48,
        pixel_spacing: 1.0,
        brain: Ellipse { cx: 24.0, cy: 24.0, semi_x: 21.0, semi_y: 19.0 },
        background_texture_seed: 5,
        tumor: TumorSpec {
            cx: 21.0,
            cy: 23.0,
            growth_direction: [1.0, 0.2],
            eccentricity: 0.4,
            directionality: 0.8,
        },
        growth: growth(),
        observation_times: vec![0.0, 10.0, 20.0, 30.0, 40.0, 55.0],
        intensity: Intensity {
            brain_mean: 0.3,
            tumor_mean: 0.85,
            noise_sigma: 0.01,
            texture_amplitude: 0.03,
            edge_blur: 0.7,
            infiltration: 0.25,
            infiltration_width: 3.0,
        },
    }
}

fn small_config(seed: u64) -> RunConfig {
    RunConfig { nl: 60, n_bootstrap: 12, seed, ..RunConfig::default() }
}

fn phantom() -> PhantomSeries {
    generate_phantom_series(&spec(), 3).unwrap()
}

#[test]
fn phantom_masks_follow_the_growth_curve() {
    let s = spec();
    let series = phantom();
    assert_eq!(series.frames.len(), 6);
    for f in &series.frames {
        let want = tumor_area(f.time, &s.growth);
        assert!((f.area_mm2 - want).abs() < 1e-9);
        assert!((f.mask_area_mm2 - want).abs() <= 2.0, "t={}: {} vs {want}", f.time, f.mask_area_mm2);
        assert!(series.brain_mask.is_superset_of(&f.mask));
        assert!(f.image.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert_eq!(series, generate_phantom_series(&s, 3).unwrap());
    assert_ne!(series.frames[0].image, generate_phantom_series(&s, 4).unwrap().frames[0].image);
}

#[test]
fn phantom_segmentation_recovers_the_tumor() {
    let series = phantom();
    for f in &series.frames {
        let seg = segment_tumor(&f.image, &series.brain_mask, 0.6).unwrap();
        assert!(seg.iou(&f.mask).unwrap() > 0.8, "t={}", f.time);
    }
}

#[test]
fn phantom_rejects_bad_specs() {
    let mut dark = spec();
    dark.intensity.tumor_mean = 0.2;
    assert!(matches!(generate_phantom_series(&dark, 0), Err(Error::InvalidSpec(_))));
    let mut huge = spec();
    huge.growth.a0 = 5000.0;
    assert!(matches!(generate_phantom_series(&huge, 0), Err(Error::InvalidSpec(_))));
}

#[test]
fn phantom_files_round_trip() {
    let series = phantom();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_phantom_series(&series, 20.0, dir.path()).unwrap();
    let read: PhantomManifest =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(read, manifest);
    let frame = mlgrowth::Image2D::load(dir.path().join(&manifest.frames[2].image)).unwrap();
    let expected = series.frames[2].image.map(|v| v as f32 as f64);
    assert_eq!(frame, expected);
    let areas = mlgrowth::mechanistic::AreaSeries::load(
        dir.path().join(&manifest.series_csv),
        dir.path().join(&manifest.series_meta),
    )
    .unwrap();
    assert_eq!(areas.len(), 6);
}

fn collapsed_ensemble(n: usize) -> BootstrapEnsemble {
    BootstrapEnsemble {
        replicates: vec![growth(); n],
        diagnostics: vec![ReplicateDiagnostics { converged: true, residual_sse: 0.0, n_iterations: 1 }; n],
        noise_sigma: 0.1,
        noise_model: NoiseModel::Multiplicative,
        seed: 0,
    }
}

#[test]
fn collapsed_ensemble_reduces_to_the_static_map() {
    let series = phantom();
    let reference = &series.frames[4].image;
    let cfg = small_config(8);
    let ens = collapsed_ensemble(6);
    let kept = capped_targets(&ens, 55.0, series.brain_mask.count(), 1.0, 90.0).unwrap();
    assert_eq!(kept.len(), 6);
    let target = kept[0].1;
    let dynamic = predict_from_ensemble(&ens, reference, &series.brain_mask, 55.0, &cfg).unwrap();
    let fixed = run_static_prediction(reference, &series.brain_mask, target, 6, &cfg).unwrap();
    assert_eq!(dynamic.map.values, fixed.map.values);
    assert_eq!(dynamic.predicted_mask, fixed.predicted_mask);
}

#[test]
fn cap_drops_the_upper_tail() {
    let mut ens = collapsed_ensemble(10);
    for (i, p) in ens.replicates.iter_mut().enumerate() {
        p.a0 = 40.0 + i as f64;
    }
    let kept = capped_targets(&ens, 30.0, 1000, 1.0, 90.0).unwrap();
    assert_eq!(kept.len(), 9);
    assert!(kept.iter().all(|&(i, _)| i != 9));
    assert!(matches!(capped_targets(&ens, 30.0, 0, 1.0, 90.0), Err(Error::InvalidInput(_))));
}

#[test]
fn single_replicate_gives_a_binary_map() {
    let series = phantom();
    let cfg = RunConfig { n_bootstrap: 1, ..small_config(1) };
    let areas = series.area_series(20.0).unwrap();
    let out = run_dynamic_prediction(&areas, &series.frames[4].image, &series.brain_mask, 55.0, &cfg).unwrap();
    assert_eq!(out.ensemble.len(), 1);
    assert_eq!(out.prediction.generated.len(), 1);
    assert!(out.prediction.map.values.iter().all(|&v| v == 0.0 || v == 1.0));

    // With this seed the lone replicate stalls before converging.
    let stalled = RunConfig { n_bootstrap: 1, ..small_config(2) };
    let err = run_dynamic_prediction(&areas, &series.frames[4].image, &series.brain_mask, 55.0, &stalled);
    assert!(matches!(err, Err(Error::Pipeline(_))));
}

#[test]
fn predictions_are_reproducible_across_thread_counts() {
    let series = phantom();
    let reference = &series.frames[4].image;
    let cfg = small_config(5);
    let a = run_static_prediction(reference, &series.brain_mask, 0.1, 4, &cfg).unwrap();
    let b = run_static_prediction(reference, &series.brain_mask, 0.1, 4, &RunConfig { workers: Some(1), ..cfg.clone() })
        .unwrap();
    assert_eq!(a, b);
    assert!(a.predicted_mask.is_superset_of(&segment_tumor(reference, &series.brain_mask, 0.6).unwrap()));
    assert!(matches!(
        run_static_prediction(reference, &series.brain_mask, 0.1, 0, &cfg),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn repeated_static_runs_agree() {
    let series = phantom();
    let reference = &series.frames[4].image;
    let target = series.frames[5].mask.count() as f64 / series.brain_mask.count() as f64;
    let a = run_static_prediction(reference, &series.brain_mask, target, 60, &small_config(11)).unwrap();
    let b = run_static_prediction(reference, &series.brain_mask, target, 60, &small_config(12)).unwrap();
    let n = a.map.values.len() as f64;
    let disagreement: f64 = a.map.values.iter().zip(&b.map.values).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    assert!(1.0 - disagreement > 0.9, "agreement {}", 1.0 - disagreement);
    let single = run_static_prediction(reference, &series.brain_mask, target, 1, &small_config(11)).unwrap();
    assert!(single.map.values.iter().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn grid_search_covers_every_cell() {
    let series = phantom();
    let pairs: Vec<LongitudinalPair> = series
        .frames
        .windows(2)
        .skip(3)
        .map(|w| LongitudinalPair {
            reference: w[0].image.clone(),
            follow_up: w[1].image.clone(),
            follow_up_mask: w[1].mask.clone(),
            brain_mask: series.brain_mask.clone(),
        })
        .collect();
    let cfg = small_config(1);
    let rows = grid_search(&pairs, &[10, 40, 100], &[0.0, 50_000.0], &cfg).unwrap();
    let cells: Vec<(usize, f64)> = rows.iter().map(|r| (r.nl, r.s_ct)).collect();
    assert_eq!(
        cells,
        vec![(10, 0.0), (10, 50_000.0), (40, 0.0), (40, 50_000.0), (100, 0.0), (100, 50_000.0)]
    );
    assert!(rows.iter().all(|r| r.ssim_tumor.abs() <= 1.0 && r.ssim_outside.abs() <= 1.0));
    // Fewer noising steps keep more of the reference outside the tumor.
    for s in 0..2 {
        let outside: Vec<f64> = rows.iter().skip(s).step_by(2).map(|r| r.ssim_outside).collect();
        assert!(outside.windows(2).all(|w| w[0] >= w[1]), "{outside:?}");
    }
    assert!(matches!(grid_search(&pairs, &[5000], &[0.0], &cfg), Err(Error::InvalidInput(_))));
    assert!(matches!(grid_search(&[], &[10], &[0.0], &cfg), Err(Error::InvalidInput(_))));
}

#[test]
fn run_config_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"nl": 100, "n_bootstrap": 5}"#).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!((cfg.nl, cfg.n_bootstrap, cfg.s_ct), (100, 5, 50_000.0));
    std::fs::write(&path, r#"{"nl": 100, "bootstraps": 5}"#).unwrap();
    assert!(RunConfig::load(&path).is_err());
    std::fs::write(&path, r#"{"nl": 0}"#).unwrap();
    assert!(matches!(RunConfig::load(&path), Err(Error::InvalidInput(_))));
}
