use super::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const DEG: f64 = PI / 180.0;
/// atan(0.25) in degrees, evaluated to 40 digits.
const ATAN_QUARTER_DEG: f64 = 14.036_243_467_926_479;
const SQRT_4000: f64 = 63.245_553_203_367_587;
const SQRT_4500: f64 = 67.082_039_324_993_69;

fn k() -> CameraIntrinsics {
    CameraIntrinsics::new(1000.0, 1000.0, 960.0, 540.0).unwrap()
}

fn pose(yaw_deg: f64, at: PlanePoint) -> CameraPose {
    CameraPose::new(10.0, AngleRad(20.0 * DEG))
        .unwrap()
        .with_yaw(AngleRad(yaw_deg * DEG))
        .at(at)
}

fn bearing_to(from: PlanePoint, to: PlanePoint) -> AngleRad {
    direction_heading(to.x - from.x, to.y - from.y)
}

#[test]
fn pixel_yaw_examples() {
    assert_eq!(pixel_yaw(&k(), PixelPoint::new(960.0, 100.0)).0, 0.0);
    assert!((pixel_yaw(&k(), PixelPoint::new(1960.0, 0.0)).0 - PI / 4.0).abs() < 1e-15);
    let y = pixel_yaw(&k(), PixelPoint::new(1210.0, 0.0)).0.to_degrees();
    assert!((y - ATAN_QUARTER_DEG).abs() < 1e-12);
}

#[test]
fn total_yaw_examples() {
    let p = pose(33.0, PlanePoint::default());
    assert!((total_yaw(&p, &k(), PixelPoint::new(960.0, 700.0)).0 - 33.0 * DEG).abs() < 1e-15);
    // a 10 deg offset to the left adds to the bearing, to the right subtracts
    let p0 = pose(0.0, PlanePoint::default());
    let off = 1000.0 * (10.0 * DEG).tan();
    let left = total_yaw(&p0, &k(), PixelPoint::new(960.0 - off, 540.0)).0;
    let right = total_yaw(&p0, &k(), PixelPoint::new(960.0 + off, 540.0)).0;
    assert!((left - 10.0 * DEG).abs() < 1e-12);
    assert!((right + 10.0 * DEG).abs() < 1e-12);
    // wraps across ±180
    let back = pose(179.0, PlanePoint::default());
    let y = total_yaw(&back, &k(), PixelPoint::new(960.0 - 1000.0 * (3.0 * DEG).tan(), 0.0)).0;
    assert!((y - (-178.0 * DEG)).abs() < 1e-12);
}

#[test]
fn total_yaw_matches_forward_projection() {
    let cam = PlanePoint::new(5.0, -3.0);
    let target = PlanePoint::new(
        cam.x + 80.0 * heading_direction(AngleRad(37.0 * DEG))[0],
        cam.y + 80.0 * heading_direction(AngleRad(37.0 * DEG))[1],
    );
    assert!((bearing_to(cam, target).0 - 37.0 * DEG).abs() < 1e-14);
    // camera aimed at the target: exact under the pinhole model
    let aimed = pose(37.0, cam);
    let p = MonoRangingModel::new(k(), aimed).project_to_pixel(target).unwrap();
    assert!((total_yaw(&aimed, &k(), p).0 - 37.0 * DEG).abs() < 1e-9);
    // off-axis: the column model is exact for its own column
    let off = pose(30.0, cam);
    let u = column_for_bearing(&off, &k(), AngleRad(37.0 * DEG)).unwrap();
    assert!((total_yaw(&off, &k(), PixelPoint::new(u, 400.0)).0 - 37.0 * DEG).abs() < 1e-9);
    // and the pinhole projection of an off-axis target differs from it
    let err = column_model_error(&k(), &off, target).unwrap().0;
    let p = MonoRangingModel::new(k(), off).project_to_pixel(target).unwrap();
    assert!((total_yaw(&off, &k(), p).0 - 37.0 * DEG - err).abs() < 1e-12);
    assert!(err.abs() > 1e-4);
}

#[test]
fn column_model_error_behaviour() {
    let cam = PlanePoint::default();
    let target = PlanePoint::new(-20.0, 60.0);
    let on_axis = pose(bearing_to(cam, target).0.to_degrees(), cam);
    assert!(column_model_error(&k(), &on_axis, target).unwrap().0.abs() < 1e-12);
    // vanishes as the camera drops toward the plane
    let mut last = f64::INFINITY;
    for h in [20.0, 5.0, 1.0, 0.1] {
        let depression = (h / 63.245_553_203_367_59f64).atan();
        let p = CameraPose::new(h, AngleRad(depression)).unwrap();
        let e = column_model_error(&k(), &p, target).unwrap().0.abs();
        assert!(e < last, "{h}: {e}");
        last = e;
    }
    assert!(last < 1e-4);
}

#[test]
fn solve_triangle_isosceles() {
    let s = solve_triangle(10.0, AngleRad(PI / 4.0), AngleRad(PI / 4.0)).unwrap();
    let expected = 10.0 / 2f64.sqrt();
    assert!((s.dist_a - expected).abs() < 1e-12);
    assert!((s.dist_b - expected).abs() < 1e-12);
    assert!((s.gamma - PI / 2.0).abs() < 1e-15);
    assert!((s.target.x - 5.0).abs() < 1e-12 && (s.target.y - 5.0).abs() < 1e-12);
}

#[test]
fn solve_triangle_euclidean_oracle() {
    let alpha = 60f64.atan2(20.0);
    let beta = 60f64.atan2(30.0);
    assert!((alpha.to_degrees() - 71.565_051_177_077_99).abs() < 1e-12);
    assert!((beta.to_degrees() - 63.434_948_822_922_01).abs() < 1e-12);
    let s = solve_triangle(50.0, AngleRad(alpha), AngleRad(beta)).unwrap();
    assert!((s.dist_a / SQRT_4000 - 1.0).abs() < 1e-9);
    assert!((s.dist_b / SQRT_4500 - 1.0).abs() < 1e-9);
    assert!(s.target.distance(&PlanePoint::new(20.0, 60.0)) < 1e-9);
}

#[test]
fn solve_triangle_errors() {
    let e = solve_triangle(10.0, AngleRad(90.0 * DEG), AngleRad(89.999 * DEG)).unwrap_err();
    assert_eq!(e.kind(), "DegenerateTriangle");
    assert!(solve_triangle(10.0, AngleRad(90.0 * DEG), AngleRad(89.98 * DEG)).is_ok());
    assert_eq!(
        solve_triangle(10.0, AngleRad(0.0), AngleRad(1.0)).unwrap_err().kind(),
        "InvalidAngle"
    );
    assert_eq!(
        solve_triangle(10.0, AngleRad(1.0), AngleRad(PI)).unwrap_err().kind(),
        "InvalidAngle"
    );
    assert_eq!(
        solve_triangle(0.0, AngleRad(1.0), AngleRad(1.0)).unwrap_err().kind(),
        "InvalidRig"
    );
    assert_eq!(
        solve_triangle(f64::NAN, AngleRad(1.0), AngleRad(1.0))
            .unwrap_err()
            .kind(),
        "NonFinite"
    );
}

fn oracle_rig() -> StereoRig {
    StereoRig::from_positions(
        (k(), pose(0.0, PlanePoint::new(0.0, 0.0))),
        (k(), pose(0.0, PlanePoint::new(50.0, 0.0))),
    )
    .unwrap()
}

#[test]
fn range_bearings_euclidean_oracle() {
    let rig = oracle_rig();
    let t = PlanePoint::new(20.0, 60.0);
    let s = rig
        .range_bearings(bearing_to(rig.cam_a.1.position, t), bearing_to(rig.cam_b.1.position, t))
        .unwrap();
    assert!((s.dist_a / SQRT_4000 - 1.0).abs() < 1e-9);
    assert!((s.dist_b / SQRT_4500 - 1.0).abs() < 1e-9);
    assert!(s.target.distance(&t) < 1e-9);
}

#[test]
fn range_target_round_trip_250m() {
    let pa = PlanePoint::new(0.0, 0.0);
    let pb = PlanePoint::new(220.0, 0.0);
    let dir = heading_direction(AngleRad(-30.0 * DEG));
    let t = PlanePoint::new(250.0 * dir[0], 250.0 * dir[1]);
    let cam_a = (k(), pose(bearing_to(pa, t).0.to_degrees(), pa));
    let cam_b = (k(), pose(bearing_to(pb, t).0.to_degrees(), pb));
    let rig = StereoRig::from_positions(cam_a, cam_b).unwrap();
    let project = |c: &(CameraIntrinsics, CameraPose)| MonoRangingModel::new(c.0, c.1).project_to_pixel(t).unwrap();
    let s = rig.range_target(project(&cam_a), project(&cam_b)).unwrap();
    assert!((s.dist_a - 250.0).abs() < 1e-6, "{}", s.dist_a);
    assert!((s.dist_b - pb.distance(&t)).abs() < 1e-6);
    assert!(s.target.distance(&t) < 1e-6);
}

#[test]
fn bisector_target_is_equidistant() {
    let rig = StereoRig::from_positions(
        (k(), pose(-20.0, PlanePoint::new(0.0, 0.0))),
        (k(), pose(25.0, PlanePoint::new(220.0, 0.0))),
    )
    .unwrap();
    let t = PlanePoint::new(110.0, 173.0);
    let ua = column_for_bearing(&rig.cam_a.1, &k(), bearing_to(rig.cam_a.1.position, t)).unwrap();
    let ub = column_for_bearing(&rig.cam_b.1, &k(), bearing_to(rig.cam_b.1.position, t)).unwrap();
    let s = rig
        .range_target(PixelPoint::new(ua, 500.0), PixelPoint::new(ub, 610.0))
        .unwrap();
    assert!((s.dist_a - s.dist_b).abs() < 1e-9);
    assert!(s.target.distance(&t) < 1e-9);
}

#[test]
fn bearing_side_checks() {
    let rig = oracle_rig();
    // both rays to the left of the baseline but crossing behind A
    let a = rig.range_bearings(AngleRad(-120.0 * DEG), AngleRad(60.0 * DEG));
    assert_eq!(a.unwrap_err().kind(), "BearingBehindBaseline");
    // rays on opposite sides of the baseline
    let b = rig.range_bearings(AngleRad(-45.0 * DEG), AngleRad(-135.0 * DEG));
    assert_eq!(b.unwrap_err().kind(), "BearingBehindBaseline");
    // target below the baseline is fine
    let t = PlanePoint::new(20.0, -60.0);
    let s = rig
        .range_bearings(bearing_to(rig.cam_a.1.position, t), bearing_to(rig.cam_b.1.position, t))
        .unwrap();
    assert!(s.target.distance(&t) < 1e-9);
}

#[test]
fn rig_validation() {
    let a = (k(), pose(0.0, PlanePoint::new(0.0, 0.0)));
    let b = (k(), pose(0.0, PlanePoint::new(50.0, 0.0)));
    assert!(StereoRig::new(a, b, 50.0, AngleRad(-90.0 * DEG)).is_ok());
    assert_eq!(
        StereoRig::new(a, b, 49.0, AngleRad(-90.0 * DEG)).unwrap_err().kind(),
        "InvalidRig"
    );
    assert_eq!(
        StereoRig::new(a, b, 50.0, AngleRad(90.0 * DEG)).unwrap_err().kind(),
        "InvalidRig"
    );
    assert_eq!(
        StereoRig::new(a, a, -1.0, AngleRad(0.0)).unwrap_err().kind(),
        "InvalidRig"
    );
    // unplaced B is put on the baseline
    let rig = StereoRig::new(a, a, 50.0, AngleRad(-90.0 * DEG)).unwrap();
    assert!(rig.cam_b.1.position.distance(&PlanePoint::new(50.0, 0.0)) < 1e-12);
}

#[test]
fn rig_file_round_trip() {
    let text = r#"{
        "camera_a": {"fx": 1000, "fy": 1000, "u0": 960, "v0": 540, "height_m": 10, "pitch_deg": 20},
        "camera_b": {"fx": 1000, "fy": 1000, "u0": 960, "v0": 540, "height_m": 10, "pitch_deg": 20,
                     "position_m": [50, 0]},
        "baseline_m": 50,
        "baseline_azimuth_deg": -90
    }"#;
    let file = RigFile::from_json(text).unwrap();
    let rig = file.rig(Path::new(".")).unwrap();
    assert_eq!(rig, oracle_rig());
    assert_eq!(RigFile::from_json(&file.to_json()).unwrap(), file);
    assert!(RigFile::from_json(r#"{"camera_a": "a.json", "camera_b": "b.json", "baseline_m": 1}"#).is_err());
    let missing = RigFile::from_json(
        r#"{"camera_a": "nope.json", "camera_b": "nope.json", "baseline_m": 1, "baseline_azimuth_deg": 0}"#,
    )
    .unwrap();
    assert_eq!(
        missing.rig(Path::new("/nonexistent")).unwrap_err().kind(),
        "InvalidRigFile"
    );
}

#[test]
fn yaw_noise_monte_carlo_within_five_percent() {
    let pa = PlanePoint::new(0.0, 0.0);
    let pb = PlanePoint::new(220.0, 0.0);
    let t = PlanePoint::new(80.0, 289.1);
    let truth = pa.distance(&t);
    assert!((truth - 300.0).abs() < 0.1);
    let cam_a = (k(), pose(bearing_to(pa, t).0.to_degrees(), pa));
    let cam_b = (k(), pose(bearing_to(pb, t).0.to_degrees(), pb));
    let rig = StereoRig::from_positions(cam_a, cam_b).unwrap();
    let noise = Normal::new(0.0, 0.05 * DEG).unwrap();
    let mut rel: Vec<f64> = (0..1000u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ya = AngleRad(bearing_to(pa, t).0 + noise.sample(&mut rng));
            let yb = AngleRad(bearing_to(pb, t).0 + noise.sample(&mut rng));
            (rig.range_bearings(ya, yb).unwrap().dist_a - truth).abs() / truth
        })
        .collect();
    rel.sort_by(f64::total_cmp);
    assert!(rel[500] < 0.05, "{}", rel[500]);
}

fn triangle_angles() -> impl Strategy<Value = (f64, f64)> {
    (0.01f64..3.0, 0.01f64..3.0).prop_filter("rays converge", |(a, b)| a + b < PI - 0.01)
}

proptest! {
    #[test]
    fn law_of_sines_holds(d in 0.1f64..1000.0, (a, b) in triangle_angles()) {
        let s = solve_triangle(d, AngleRad(a), AngleRad(b)).unwrap();
        prop_assert!((s.alpha + s.beta + s.gamma - PI).abs() < 1e-12);
        prop_assert!(s.gamma > 0.0 && s.gamma < PI);
        prop_assert!(s.law_of_sines_residual(d) < 1e-9);
    }

    #[test]
    fn scale_equivariance(d in 0.1f64..1000.0, kk in 0.01f64..100.0, (a, b) in triangle_angles()) {
        let s = solve_triangle(d, AngleRad(a), AngleRad(b)).unwrap();
        let t = solve_triangle(kk * d, AngleRad(a), AngleRad(b)).unwrap();
        prop_assert_eq!((s.alpha, s.beta, s.gamma), (t.alpha, t.beta, t.gamma));
        prop_assert!((t.dist_a - kk * s.dist_a).abs() <= 1e-13 * t.dist_a);
        prop_assert!((t.dist_b - kk * s.dist_b).abs() <= 1e-13 * t.dist_b);
    }

    #[test]
    fn swap_symmetry(x in -200.0f64..400.0, y in 20.0f64..400.0, az in -180.0f64..180.0, d in 10.0f64..300.0) {
        let pa = PlanePoint::new(3.0, -7.0);
        let rig = StereoRig::new((k(), pose(0.0, pa)), (k(), pose(0.0, pa)), d, AngleRad(az * DEG)).unwrap();
        // target expressed in the baseline frame, rotated into the world
        let [bx, by] = heading_direction(AngleRad(az * DEG));
        let t = PlanePoint::new(pa.x + x * bx - y * by, pa.y + x * by + y * bx);
        let ya = bearing_to(rig.cam_a.1.position, t);
        let yb = bearing_to(rig.cam_b.1.position, t);
        let s = rig.range_bearings(ya, yb);
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        let w = rig.swapped().range_bearings(yb, ya).unwrap();
        prop_assert!((s.dist_a - w.dist_b).abs() < 1e-9 * s.dist_a.max(1.0));
        prop_assert!((s.dist_b - w.dist_a).abs() < 1e-9 * s.dist_b.max(1.0));
        prop_assert!(s.target.distance(&w.target) < 1e-9 * s.dist_a.max(1.0));
        prop_assert!(s.target.distance(&t) < 1e-9 * s.dist_a.max(1.0));
    }

    #[test]
    fn pitch_does_not_enter(ua in 0.0f64..1920.0, ub in 0.0f64..1920.0, va in 0.0f64..1080.0, vb in 0.0f64..1080.0, dp in -2.0f64..2.0) {
        let rig = StereoRig::from_positions(
            (k(), pose(-30.0, PlanePoint::new(0.0, 0.0))),
            (k(), pose(30.0, PlanePoint::new(220.0, 0.0))),
        ).unwrap();
        let mut tilted = rig;
        tilted.cam_a.1.pitch += dp * DEG;
        tilted.cam_b.1.pitch -= dp * DEG;
        let (pa, pb) = (PixelPoint::new(ua, va), PixelPoint::new(ub, vb));
        prop_assert_eq!(rig.range_target(pa, pb), tilted.range_target(pa, pb));
    }
}
