use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::{Homography, HomographyError};

/// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, HomographyError> {
        if !(channels == 1 || channels == 3) {
            return Err(HomographyError::Raster(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(HomographyError::Raster(format!(
                "buffer holds {} bytes, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Integer window of the output frame: output pixel `(i, j)` sits at
/// destination coordinate `(x0 + i, y0 + j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x0: i64, y0: i64, width: usize, height: usize) -> Self {
        Self { x0, y0, width, height }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

fn sample(src: &Raster, x: f64, y: f64, interp: Interpolation, out: &mut [u8]) -> bool {
    let (w, h) = (src.width as f64, src.height as f64);
    match interp {
        Interpolation::Nearest => {
            let (xi, yi) = (x.round(), y.round());
            if xi < 0.0 || yi < 0.0 || xi >= w || yi >= h {
                return false;
            }
            out.copy_from_slice(src.pixel(xi as usize, yi as usize));
            true
        }
        Interpolation::Bilinear => {
            if !(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0) {
                return false;
            }
            let (xf, yf) = (x.floor(), y.floor());
            let (ax, ay) = (x - xf, y - yf);
            let (x0, y0) = (xf as usize, yf as usize);
            let x1 = (x0 + 1).min(src.width - 1);
            let y1 = (y0 + 1).min(src.height - 1);
            let (p00, p10, p01, p11) = (
                src.pixel(x0, y0),
                src.pixel(x1, y0),
                src.pixel(x0, y1),
                src.pixel(x1, y1),
            );
            for c in 0..src.channels {
                let top = p00[c] as f64 * (1.0 - ax) + p10[c] as f64 * ax;
                let bottom = p01[c] as f64 * (1.0 - ax) + p11[c] as f64 * ax;
                let v = top * (1.0 - ay) + bottom * ay;
                out[c] = v.round().clamp(0.0, 255.0) as u8;
            }
            true
        }
    }
}

fn warp_row(src: &Raster, inv: &Homography, bounds: &Rect, j: usize, interp: Interpolation, fill: u8, row: &mut [u8]) {
    let c = src.channels;
    let y = (bounds.y0 + j as i64) as f64;
    for i in 0..bounds.width {
        let x = (bounds.x0 + i as i64) as f64;
        let px = &mut row[i * c..(i + 1) * c];
        let ok = match inv.apply(Point2::new(x, y)) {
            Ok(p) => sample(src, p.x, p.y, interp, px),
            Err(_) => false,
        };
        if !ok {
            px.fill(fill);
        }
    }
}

/// Inverse-mapping warp of `src` by `h` (source → destination) into
/// `bounds`. Samples that fall outside the source get `fill`.
pub fn warp_raster(
    h: &Homography,
    src: &Raster,
    bounds: Rect,
    interp: Interpolation,
    fill: u8,
) -> Result<Raster, HomographyError> {
    if bounds.width == 0 || bounds.height == 0 {
        return Err(HomographyError::EmptyBounds);
    }
    let inv = h.inverse()?;
    let stride = bounds.width * src.channels;
    let mut data = vec![0u8; stride * bounds.height];

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(stride)
            .enumerate()
            .for_each(|(j, row)| warp_row(src, &inv, &bounds, j, interp, fill, row));
    }
    #[cfg(not(feature = "parallel"))]
    for (j, row) in data.chunks_mut(stride).enumerate() {
        warp_row(src, &inv, &bounds, j, interp, fill, row);
    }

    Ok(Raster {
        width: bounds.width,
        height: bounds.height,
        channels: src.channels,
        data,
    })
}
