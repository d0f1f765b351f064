use super::{PointLayout, SceneSpec};
use crate::geometry::{direction_heading, CameraConfig};

fn camera(f: f64, height: f64, pitch_deg: f64, yaw_deg: f64, position: [f64; 2]) -> CameraConfig {
    CameraConfig {
        fx: f,
        fy: f,
        u0: 960.0,
        v0: 540.0,
        pixel_aspect: 1.0,
        height_m: height,
        pitch_deg,
        yaw_deg,
        position_m: position,
    }
}

impl SceneSpec {
    /// One camera at the origin looking along `+Y`, pitched so the
    /// principal ray meets the plane at `target_pitch_deg`, with a 5 x 5
    /// grid of targets spanning ±10 % of that range around the hit point.
    pub fn mono_target(height: f64, target_pitch_deg: f64, f: f64) -> Self {
        let y0 = height / target_pitch_deg.to_radians().tan();
        let mut s = Self::new(vec![camera(f, height, target_pitch_deg, 0.0, [0.0, 0.0])]);
        s.plane_origin_m = [-0.1 * y0, 0.9 * y0];
        s.plane_extent_m = [0.2 * y0, 0.2 * y0];
        s.point_layout = PointLayout::Grid { nx: 5, ny: 5 };
        s
    }

    /// Two cameras 220 m apart on the near shore of a 220 x 300 m
    /// reservoir, each aimed at its center; targets cover the far 250 m.
    pub fn stereo_reservoir() -> Self {
        let center = [110.0, 150.0];
        let aim = |p: [f64; 2]| direction_heading(center[0] - p[0], center[1] - p[1]).0.to_degrees();
        let (a, b) = ([0.0, 0.0], [220.0, 0.0]);
        let mut s = Self::new(vec![
            camera(1000.0, 10.0, 5.0, aim(a), a),
            camera(1000.0, 10.0, 5.0, aim(b), b),
        ]);
        s.plane_origin_m = [10.0, 50.0];
        s.plane_extent_m = [200.0, 250.0];
        s.point_layout = PointLayout::Grid { nx: 8, ny: 10 };
        s
    }

    /// `rows` x `cols` downward-looking cameras on a regular grid, all
    /// facing `+Y`.
    pub fn camera_grid(rows: usize, cols: usize, spacing: [f64; 2], height: f64, pitch_deg: f64, f: f64) -> Self {
        let cameras = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| {
                    camera(
                        f,
                        height,
                        pitch_deg,
                        0.0,
                        [c as f64 * spacing[0], r as f64 * spacing[1]],
                    )
                })
            })
            .collect();
        let mut s = Self::new(cameras);
        s.plane_extent_m = [cols as f64 * spacing[0], rows as f64 * spacing[1]];
        s
    }
}
