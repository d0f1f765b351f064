use super::*;
use crate::mono::MonoRangingModel;
use crate::mosaic::{evaluate, initialize, solve, BaConfig};
use crate::optim::RobustLoss;

fn mono_noise(pitch_deg: f64, pixel: f64, seed: u64) -> NoiseModel {
    NoiseModel {
        pixel_sigma_px: pixel,
        pitch_sigma_deg: pitch_deg,
        seed,
        ..Default::default()
    }
}

#[test]
fn zero_noise_observations_invert_through_locate() {
    let spec = SceneSpec::mono_target(8.24, 30.0, 1000.0);
    let obs = generate_observations(&spec, &NoiseModel::zero(3)).unwrap();
    let (k, pose) = spec.cameras().unwrap()[0];
    let model = MonoRangingModel::new(k, pose);
    let mut n = 0;
    for c in &obs.cameras {
        for (p, q) in c.observed.iter().zip(&c.truth) {
            assert!(model.locate(*p).unwrap().distance(q) < 1e-9);
            n += 1;
        }
    }
    assert_eq!(n, 25);
    let rep = evaluate_mono(&spec, &NoiseModel::zero(3), 4).unwrap();
    assert!(rep.abs.unwrap().max < 1e-9);
    assert_eq!(rep.failures, 0);
}

#[test]
fn pixel_noise_has_requested_spread() {
    let mut spec = SceneSpec::mono_target(10.0, 30.0, 1000.0);
    spec.point_layout = PointLayout::Random { count: 12_000 };
    let noise = mono_noise(0.0, 1.0, 21);
    let obs = generate_observations(&spec, &noise).unwrap();
    let (k, pose) = spec.cameras().unwrap()[0];
    let model = MonoRangingModel::new(k, pose);
    let mut res = Vec::new();
    for c in &obs.cameras {
        for (p, q) in c.observed.iter().zip(&c.truth) {
            let clean = model.project_to_pixel(*q).unwrap();
            res.push(p.u - clean.u);
            res.push(p.v - clean.v);
        }
    }
    assert!(res.len() >= 10_000);
    let n = res.len() as f64;
    let mean = res.iter().sum::<f64>() / n;
    let std = (res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((std - 1.0).abs() < 0.05, "std {std}");
}

#[test]
fn generators_are_deterministic() {
    let spec = SceneSpec::stereo_reservoir();
    let noise = NoiseModel {
        pixel_sigma_px: 0.5,
        yaw_sigma_deg: 0.05,
        outlier_fraction: 0.1,
        outlier_scale_px: 20.0,
        seed: 99,
        ..Default::default()
    };
    assert_eq!(
        generate_observations(&spec, &noise).unwrap(),
        generate_observations(&spec, &noise).unwrap()
    );
    assert_eq!(
        evaluate_stereo(&spec, &noise, 50).unwrap(),
        evaluate_stereo(&spec, &noise, 50).unwrap()
    );
    let other = NoiseModel { seed: 100, ..noise };
    assert_ne!(
        evaluate_stereo(&spec, &noise, 5).unwrap(),
        evaluate_stereo(&spec, &other, 5).unwrap()
    );
}

#[test]
fn trials_are_independent_of_trial_count() {
    let spec = SceneSpec::mono_target(8.24, 10.0, 1000.0);
    let noise = mono_noise(0.1, 1.0, 4);
    let short = evaluate_mono(&spec, &noise, 3).unwrap();
    let long = evaluate_mono(&spec, &noise, 10).unwrap();
    assert_eq!(short.records[..], long.records[..short.records.len()]);
}

#[test]
fn report_summary_is_consistent() {
    let spec = SceneSpec::mono_target(8.24, 10.0, 1000.0);
    let rep = evaluate_mono(&spec, &mono_noise(0.1, 1.0, 8), 40).unwrap();
    for s in [rep.abs.unwrap(), rep.rel.unwrap()] {
        assert!(s.median <= s.p95 && s.p95 <= s.max);
        assert_eq!(s.count, rep.records.len());
    }
    let (_, pose) = spec.cameras().unwrap()[0];
    for r in &rep.records {
        let rel = r.abs_error / r.truth.distance(&pose.position);
        assert_eq!(r.rel_error, rel);
    }
    assert_eq!(Summary::of(&[]), None);
    let s = Summary::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
    assert_eq!((s.median, s.max, s.mean), (2.5, 4.0, 2.5));
    let csv = rep.to_csv();
    assert_eq!(csv.lines().count(), rep.records.len() + 1);
    let v: serde_json::Value = serde_json::from_str(&rep.summary_json()).unwrap();
    assert_eq!(v["trials"], 40);
}

#[test]
fn mono_error_grows_as_target_pitch_drops() {
    let mut last = 0.0;
    for pitch in [30.0, 10.0, 5.0, 2.0] {
        let spec = SceneSpec::mono_target(8.24, pitch, 1000.0);
        let rep = evaluate_mono(&spec, &mono_noise(0.1, 1.0, 2024), 1000).unwrap();
        let m = rep.median_abs();
        assert!(m > last, "pitch {pitch}: {m} after {last}");
        last = m;
    }
}

#[test]
fn stereo_zero_noise_and_pitch_invariance() {
    let spec = SceneSpec::stereo_reservoir();
    let rep = evaluate_stereo(&spec, &NoiseModel::zero(1), 3).unwrap();
    assert!(rep.abs.unwrap().max < 1e-6);
    assert_eq!(rep.failures, 0);
    assert_eq!(rep.omitted, 0);

    let mut tilted = spec.clone();
    for (c, d) in tilted.cameras.iter_mut().zip([2.0, -2.0]) {
        c.pitch_deg += d;
    }
    let a = evaluate_stereo(&spec, &NoiseModel::zero(1), 1).unwrap();
    let b = evaluate_stereo(&tilted, &NoiseModel::zero(1), 1).unwrap();
    assert_eq!(a.records, b.records);
    // per-trial pitch noise as well
    let shaky = NoiseModel {
        pitch_sigma_deg: 2.0,
        seed: 1,
        ..Default::default()
    };
    let c = evaluate_stereo(&spec, &shaky, 1).unwrap();
    assert_eq!(a.records, c.records);
}

#[test]
fn stereo_yaw_noise_gives_decimeter_errors() {
    let noise = NoiseModel {
        yaw_sigma_deg: 0.01,
        seed: 5,
        ..Default::default()
    };
    let rep = evaluate_stereo(&SceneSpec::stereo_reservoir(), &noise, 200).unwrap();
    assert!(rep.median_abs() < 0.5, "{}", rep.median_abs());
    assert!(rep.median_abs() > 0.01);
    assert!(rep.median_rel() < 0.05);
}

#[test]
fn stereo_needs_two_cameras() {
    let spec = SceneSpec::mono_target(8.0, 30.0, 1000.0);
    let err = evaluate_stereo(&spec, &NoiseModel::zero(0), 1).unwrap_err();
    assert_eq!(err.kind(), "InvalidSpec");
}

#[test]
fn specs_and_noise_validate() {
    assert_eq!(
        NoiseModel {
            pixel_sigma_px: -1.0,
            ..Default::default()
        }
        .validate()
        .unwrap_err()
        .kind(),
        "InvalidNoise"
    );
    assert!(NoiseModel {
        outlier_fraction: 1.0,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(NoiseModel::from_json(r#"{"pixel_sigma_px": 1, "bogus": 2}"#).is_err());
    let n = NoiseModel::from_json(r#"{"yaw_sigma_deg": 0.01, "seed": 7}"#).unwrap();
    assert_eq!(n.seed, 7);

    let spec = SceneSpec::stereo_reservoir();
    assert_eq!(SceneSpec::from_json(&spec.to_json()).unwrap(), spec);
    assert!(SceneSpec::new(vec![]).validate().is_err());
    let mut bad = spec.clone();
    bad.plane_extent_m = [0.0, 10.0];
    assert_eq!(bad.validate().unwrap_err().kind(), "InvalidSpec");
    let text = r#"{"cameras": [{"fx": 1000, "fy": 1000, "u0": 960, "v0": 540,
        "height_m": 10, "pitch_deg": 20}], "point_layout": {"kind": "random", "count": 5}}"#;
    let s = SceneSpec::from_json(text).unwrap();
    assert_eq!(s.plane_extent_m, [220.0, 300.0]);
    assert_eq!(s.points(&NoiseModel::zero(1)).len(), 5);
    assert_eq!(
        SceneSpec::new(s.cameras.clone()).points(&NoiseModel::zero(0)).len(),
        165
    );
}

fn grid_40() -> SceneSpec {
    SceneSpec::camera_grid(5, 8, [27.5, 60.0], 30.0, 50.0, 1000.0)
}

#[test]
fn forty_camera_grid_is_connected() {
    let sc = generate_ba_graph(
        &grid_40(),
        &NoiseModel {
            pixel_sigma_px: 0.2,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(sc.graph.images.len(), 40);
    assert!(sc.graph.edges.len() >= 39);
    assert_eq!(sc.graph.controls.len(), 8);
    assert_eq!(sc.holdout.len(), 20);
    assert!(crate::mosaic::check_structure(&sc.graph).is_ok());
}

#[test]
fn scattered_cameras_report_no_overlap() {
    let mut spec = SceneSpec::camera_grid(1, 2, [300.0, 60.0], 30.0, 50.0, 1000.0);
    spec.control_point_count = 8;
    let err = generate_ba_graph(&spec, &NoiseModel::zero(0)).unwrap_err();
    assert_eq!(err.kind(), "NoOverlap");
    let flat = SceneSpec::camera_grid(1, 2, [20.0, 60.0], 30.0, 10.0, 1000.0);
    assert_eq!(
        generate_ba_graph(&flat, &NoiseModel::zero(0)).unwrap_err().kind(),
        "InvalidSpec"
    );
}

/// Height and pitch each off by exactly 2 %, with random sign.
fn two_percent_pose_error(sc: &mut BaScenario, seed: u64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for im in &mut sc.graph.images {
        let cam = im.camera.as_mut().unwrap();
        let s: [f64; 2] = [rng.random_bool(0.5), rng.random_bool(0.5)].map(|b| if b { 1.02 } else { 0.98 });
        cam.pose.height *= s[0];
        cam.pose.pitch *= s[1];
    }
}

#[test]
fn forty_camera_initialization_within_ten_percent() {
    let mut sc = generate_ba_graph(
        &grid_40(),
        &NoiseModel {
            pixel_sigma_px: 0.2,
            seed: 2,
            ..Default::default()
        },
    )
    .unwrap();
    two_percent_pose_error(&mut sc, 2);
    let init = initialize(&sc.graph).unwrap();
    for (i, im) in sc.graph.images.iter().enumerate() {
        let e = sc.relative_error(i, &init[&im.id], [1920.0, 1080.0]);
        assert!(e < 0.10, "{}: {e}", im.id);
    }
}

#[test]
fn forty_camera_solve_meets_accuracy() {
    let mut sc = generate_ba_graph(
        &grid_40(),
        &NoiseModel {
            pixel_sigma_px: 0.2,
            seed: 3,
            ..Default::default()
        },
    )
    .unwrap();
    two_percent_pose_error(&mut sc, 3);
    let sol = solve(&sc.graph, &BaConfig::default()).unwrap();
    assert!(sol.converged);
    assert!(sol.trace_is_monotone());
    assert!(sol.max_edge_rms() < 0.5, "{}", sol.max_edge_rms());
    let ev = evaluate(&sol, &sc.holdout).unwrap();
    assert!(ev.rms.unwrap() < 0.3, "{:?}", ev.rms);
}

#[test]
fn huber_beats_least_squares_under_outliers() {
    let spec = SceneSpec::camera_grid(3, 4, [27.5, 40.0], 30.0, 50.0, 1000.0);
    let plain = BaConfig::default();
    let mut huber = BaConfig::default();
    huber.lm.loss = RobustLoss::Huber { delta: 0.1 };
    let seeds = 20;
    let mut wins = 0;
    for seed in 0..seeds {
        let noise = NoiseModel {
            pixel_sigma_px: 0.2,
            outlier_fraction: 0.2,
            outlier_scale_px: 40.0,
            seed,
            ..Default::default()
        };
        let sc = generate_ba_graph(&spec, &noise).unwrap();
        let rms = |cfg: &BaConfig| {
            evaluate(&solve(&sc.graph, cfg).unwrap(), &sc.holdout)
                .unwrap()
                .rms
                .unwrap()
        };
        if rms(&huber) < rms(&plain) {
            wins += 1;
        }
    }
    assert!(wins * 10 >= seeds * 9, "{wins}/{seeds}");
}
