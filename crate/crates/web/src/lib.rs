//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export returns a flat `Float64Array` and throws a string on invalid
//! input. The plain functions below carry the logic so they can be tested
//! natively.

use planar_ranging::mono::{sensitivity_sweep, MonoRangingModel};
use planar_ranging::stereo::solve_triangle;
use planar_ranging::{AngleRad, CameraIntrinsics, CameraPose, PixelPoint};
use wasm_bindgen::prelude::*;

/// `[alpha_deg, Y_m]` pairs, flattened.
pub fn sensitivity(height: f64, min_deg: f64, max_deg: f64, step_deg: f64) -> Result<Vec<f64>, String> {
    let curve = sensitivity_sweep(
        height,
        AngleRad(min_deg.to_radians()),
        AngleRad(max_deg.to_radians()),
        AngleRad(step_deg.to_radians()),
    )
    .map_err(|e| e.to_string())?;
    Ok(curve.samples.iter().flat_map(|&(a, y)| [a.to_degrees(), y]).collect())
}

/// `[x_m, y_m, slant_m, depression_deg, shallow]` for a level camera at the
/// origin looking along `+Y`.
#[allow(clippy::too_many_arguments)]
pub fn mono_locate(
    fx: f64,
    fy: f64,
    u0: f64,
    v0: f64,
    height: f64,
    pitch_deg: f64,
    u: f64,
    v: f64,
) -> Result<Vec<f64>, String> {
    let k = CameraIntrinsics::new(fx, fy, u0, v0).map_err(|e| e.to_string())?;
    let pose = CameraPose::new(height, AngleRad(pitch_deg.to_radians())).map_err(|e| e.to_string())?;
    let model = MonoRangingModel::new(k, pose);
    let p = PixelPoint::new(u, v);
    let q = model.locate(p).map_err(|e| e.to_string())?;
    let slant = model.slant_distance(p).map_err(|e| e.to_string())?;
    let dep = model.depression_angle(p).map_err(|e| e.to_string())?;
    let shallow = model.is_shallow(p).map_err(|e| e.to_string())?;
    Ok(vec![q.x, q.y, slant, dep.to_degrees(), f64::from(u8::from(shallow))])
}

/// `[dist_a_m, dist_b_m, gamma_deg, target_x_m, target_y_m]` with A at the
/// origin and B at `(baseline, 0)`.
pub fn triangle(baseline: f64, alpha_deg: f64, beta_deg: f64) -> Result<Vec<f64>, String> {
    let s = solve_triangle(
        baseline,
        AngleRad(alpha_deg.to_radians()),
        AngleRad(beta_deg.to_radians()),
    )
    .map_err(|e| e.to_string())?;
    Ok(vec![s.dist_a, s.dist_b, s.gamma.to_degrees(), s.target.x, s.target.y])
}

#[wasm_bindgen(js_name = sensitivity)]
pub fn sensitivity_js(height: f64, min_deg: f64, max_deg: f64, step_deg: f64) -> Result<Vec<f64>, JsValue> {
    sensitivity(height, min_deg, max_deg, step_deg).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = monoLocate)]
#[allow(clippy::too_many_arguments)]
pub fn mono_locate_js(
    fx: f64,
    fy: f64,
    u0: f64,
    v0: f64,
    height: f64,
    pitch_deg: f64,
    u: f64,
    v: f64,
) -> Result<Vec<f64>, JsValue> {
    mono_locate(fx, fy, u0, v0, height, pitch_deg, u, v).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = triangle)]
pub fn triangle_js(baseline: f64, alpha_deg: f64, beta_deg: f64) -> Result<Vec<f64>, JsValue> {
    triangle(baseline, alpha_deg, beta_deg).map_err(|e| JsValue::from_str(&e))
}
