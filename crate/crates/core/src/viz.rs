//! Color-wheel rendering of flow maps and grayscale error maps.
//!
//! Hue encodes direction and saturation encodes magnitude relative to the
//! largest valid flow, following the Middlebury color wheel. The
//! normalising magnitude is stored in a `max_magnitude` PNG text chunk.

use std::path::Path;

use png::{BitDepth, ColorType};

use crate::error::{Error, Result};
use crate::flow_models::FlowMap;

const SEGMENTS: [(usize, [u8; 3], [u8; 3]); 6] = [
    // (length, from, to)
    (15, [255, 0, 0], [255, 255, 0]),
    (6, [255, 255, 0], [0, 255, 0]),
    (4, [0, 255, 0], [0, 255, 255]),
    (11, [0, 255, 255], [0, 0, 255]),
    (13, [0, 0, 255], [255, 0, 255]),
    (6, [255, 0, 255], [255, 0, 0]),
];

fn color_wheel() -> Vec<[f64; 3]> {
    let mut wheel = Vec::with_capacity(55);
    for (len, from, to) in SEGMENTS {
        for i in 0..len {
            let t = i as f64 / len as f64;
            wheel.push(std::array::from_fn(|c| {
                from[c] as f64 + t * (to[c] as f64 - from[c] as f64)
            }));
        }
    }
    wheel
}

/// RGB color of a flow vector already divided by the normalising magnitude.
pub fn flow_color(wheel: &[[f64; 3]], fu: f64, fv: f64) -> [u8; 3] {
    let ncols = wheel.len();
    let rad = fu.hypot(fv);
    let a = (-fv).atan2(-fu) / std::f64::consts::PI;
    let fk = (a + 1.0) / 2.0 * (ncols - 1) as f64;
    let k0 = fk.floor() as usize % ncols;
    let k1 = (k0 + 1) % ncols;
    let f = fk - fk.floor();
    std::array::from_fn(|c| {
        let col = ((1.0 - f) * wheel[k0][c] + f * wheel[k1][c]) / 255.0;
        let col = if rad <= 1.0 {
            1.0 - rad * (1.0 - col)
        } else {
            col * 0.75
        };
        (255.0 * col).round().clamp(0.0, 255.0) as u8
    })
}

/// RGB8 visualisation; invalid pixels are black. Returns the pixel data and
/// the normalising magnitude.
pub fn flow_to_rgb(map: &FlowMap) -> (Vec<u8>, f64) {
    let wheel = color_wheel();
    let max = map.max_magnitude();
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let mut rgb = Vec::with_capacity(map.len() * 3);
    for i in 0..map.len() {
        if map.valid[i] {
            rgb.extend(flow_color(&wheel, map.fu[i] * scale, map.fv[i] * scale));
        } else {
            rgb.extend([0, 0, 0]);
        }
    }
    (rgb, max)
}

pub fn write_flow_png(map: &FlowMap, path: &Path) -> Result<()> {
    let (rgb, max) = flow_to_rgb(map);
    write_png(
        path,
        map.width,
        map.height,
        ColorType::Rgb,
        &rgb,
        &[
            ("max_magnitude", format!("{max}")),
            ("units", map.units.to_string()),
        ],
    )
}

/// Grayscale map of per-pixel absolute errors, scaled so that `max_error`
/// is white. Values are taken as given; NaN is drawn black.
pub fn write_error_png(
    errors: &[f64],
    width: usize,
    height: usize,
    max_error: f64,
    path: &Path,
) -> Result<()> {
    if errors.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: (width, height),
            actual: (errors.len(), 1),
        });
    }
    let scale = if max_error > 0.0 {
        255.0 / max_error
    } else {
        0.0
    };
    let gray: Vec<u8> = errors
        .iter()
        .map(|&e| {
            if e.is_finite() {
                (e * scale).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    write_png(
        path,
        width,
        height,
        ColorType::Grayscale,
        &gray,
        &[("max_error", format!("{max_error}"))],
    )
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: ColorType,
    data: &[u8],
    text: &[(&str, String)],
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(BitDepth::Eight);
    for (k, v) in text {
        enc.add_text_chunk(k.to_string(), v.clone())?;
    }
    enc.write_header()?.write_image_data(data)?;
    Ok(())
}
