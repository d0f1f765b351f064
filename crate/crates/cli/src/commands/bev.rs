use planar_ranging::homography::{bev_from_camera, warp_raster, Homography, Interpolation, Raster, Rect};
use planar_ranging::mono::MonoRangingModel;
use planar_ranging::{PixelPoint, PlanePoint};

use super::load_camera;
use crate::{BevArgs, CliError, Interp, Report};

/// Largest output side, pixels.
const MAX_SIDE: f64 = 20_000.0;

pub(super) fn bev(a: &BevArgs) -> Result<Report, CliError> {
    if !(a.scale.is_finite() && a.scale > 0.0) {
        return Err(CliError::Usage(format!("--scale {} must be positive", a.scale)));
    }
    if !(a.max_range.is_finite() && a.max_range > 0.0) {
        return Err(CliError::Usage(format!("--max-range {} must be positive", a.max_range)));
    }
    let (k, pose) = load_camera(&a.camera)?;
    let h = bev_from_camera(&k, &pose, a.scale)?;
    let model = MonoRangingModel::new(k, pose);

    if let Some(p) = a.pixel {
        // rejects rays at or above the horizon, which the homography would
        // send behind the camera
        model.locate(p)?;
        let q = h.apply_pixel(p)?;
        return Ok(Report::new()
            .m("x_m", q.x / a.scale)
            .m("y_m", q.y / a.scale)
            .px("raster_x_px", q.x)
            .px("raster_y_px", q.y));
    }

    let (input, output) = (a.image.as_ref().unwrap(), a.out.as_ref().unwrap());
    let img = image::open(input).map_err(|e| CliError::io(input, e))?;
    let (w, ht) = (img.width() as usize, img.height() as usize);
    let (channels, data) = match img.color().channel_count() {
        1 | 2 => (1, img.into_luma8().into_raw()),
        _ => (3, img.into_rgb8().into_raw()),
    };
    let src = Raster::new(w, ht, channels, data)?;

    // Image rows run downward while the model's v axis points toward the
    // horizon, so file row r is model row (height - 1 - r). The output is
    // north-up: raster row = -Y * scale.
    let flip_src = Homography::from_row_slice(&[1.0, 0.0, 0.0, 0.0, -1.0, ht as f64 - 1.0, 0.0, 0.0, 1.0])?;
    let flip_dst = Homography::from_row_slice(&[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0])?;
    let map = flip_dst.compose(&h)?.compose(&flip_src)?;

    let in_range = |q: PlanePoint| q.distance(&pose.position) <= a.max_range;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    const N: usize = 64;
    for i in 0..=N {
        for j in 0..=N {
            let p = PixelPoint::new(
                i as f64 / N as f64 * (w - 1) as f64,
                j as f64 / N as f64 * (ht - 1) as f64,
            );
            if let Ok(q) = model.locate(p) {
                if in_range(q) {
                    lo = [lo[0].min(q.x), lo[1].min(q.y)];
                    hi = [hi[0].max(q.x), hi[1].max(q.y)];
                }
            }
        }
    }
    if !lo[0].is_finite() {
        return Err(CliError::domain(
            "EmptyFootprint",
            format!("no ground within {} m is visible", a.max_range),
        ));
    }
    let s = a.scale;
    let x0 = (lo[0] * s).floor();
    let y0 = (-hi[1] * s).floor();
    let width = (hi[0] * s).ceil() - x0 + 1.0;
    let height = (-lo[1] * s).ceil() - y0 + 1.0;
    if width > MAX_SIDE || height > MAX_SIDE {
        return Err(CliError::domain(
            "RasterTooLarge",
            format!("{width} x {height} px; lower --scale or --max-range"),
        ));
    }
    let rect = Rect::new(x0 as i64, y0 as i64, width as usize, height as usize);
    let interp = match a.interp {
        Interp::Nearest => Interpolation::Nearest,
        Interp::Bilinear => Interpolation::Bilinear,
    };
    let mut raster = warp_raster(&map, &src, rect, interp, 0)?;

    // blank ground behind the camera and beyond the range limit
    for j in 0..rect.height {
        for i in 0..rect.width {
            let q = PlanePoint::new((rect.x0 + i as i64) as f64 / s, -((rect.y0 + j as i64) as f64) / s);
            if !(pose.world_to_local(q).y > 0.0 && in_range(q)) {
                let at = (j * rect.width + i) * channels;
                raster.data[at..at + channels].fill(0);
            }
        }
    }

    let color = if channels == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    image::save_buffer(output, &raster.data, rect.width as u32, rect.height as u32, color)
        .map_err(|e| CliError::io(output, e))?;

    Ok(Report::new()
        .int("width_px", rect.width)
        .int("height_px", rect.height)
        .int("channels", channels)
        .m("west_m", x0 / s)
        .m("north_m", -y0 / s)
        .num("scale_px_per_m", s, crate::Unit::Plain)
        .text("out", output.display().to_string())
        .extra("homography", map.to_row_array().to_vec().into()))
}
