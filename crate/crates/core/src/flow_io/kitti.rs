//! KITTI flow PNG: 16-bit RGB, `R = u * 64 + 2^15`, `G = v * 64 + 2^15`,
//! `B = valid`.

use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::flow_models::{FlowMap, Units};

const SCALE: f64 = 64.0;
const OFFSET: f64 = 32768.0;

pub fn decode_kitti_png(bytes: &[u8]) -> Result<FlowMap> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info()?;
    let (color, depth) = reader.output_color_type();
    if depth != BitDepth::Sixteen {
        return Err(Error::WrongBitDepth {
            expected: 16,
            found: depth as u8,
        });
    }
    if color != ColorType::Rgb {
        return Err(Error::WrongChannelCount {
            expected: 3,
            found: color.samples(),
        });
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    let (width, height) = (info.width as usize, info.height as usize);
    let mut map = FlowMap::new(width, height, Units::PixelsPerFrame);
    for v in 0..height {
        let row = &buf[v * info.line_size..(v + 1) * info.line_size];
        for u in 0..width {
            let px = &row[u * 6..u * 6 + 6];
            let ch = |c: usize| u16::from_be_bytes([px[2 * c], px[2 * c + 1]]);
            if ch(2) != 0 {
                let i = v * width + u;
                map.fu[i] = (ch(0) as f64 - OFFSET) / SCALE;
                map.fv[i] = (ch(1) as f64 - OFFSET) / SCALE;
                map.valid[i] = true;
            }
        }
    }
    Ok(map)
}

fn quantize(x: f64, saturated: &mut usize) -> u16 {
    let raw = (x * SCALE + OFFSET).round();
    if !(0.0..=65535.0).contains(&raw) {
        *saturated += 1;
    }
    // NaN maps to 0 under `as`
    raw.clamp(0.0, 65535.0) as u16
}

/// Encodes `map`; returns the PNG bytes and the number of saturated samples.
pub fn encode_kitti_png(map: &FlowMap) -> Result<(Vec<u8>, usize)> {
    let mut saturated = 0;
    let mut data = Vec::with_capacity(map.len() * 6);
    for i in 0..map.len() {
        let (r, g, b) = if map.valid[i] {
            (
                quantize(map.fu[i], &mut saturated),
                quantize(map.fv[i], &mut saturated),
                1u16,
            )
        } else {
            (OFFSET as u16, OFFSET as u16, 0)
        };
        for c in [r, g, b] {
            data.extend_from_slice(&c.to_be_bytes());
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, map.width as u32, map.height as u32);
        enc.set_color(ColorType::Rgb);
        enc.set_depth(BitDepth::Sixteen);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&data)?;
    }
    Ok((out, saturated))
}

pub fn read_kitti_png(path: &Path) -> Result<FlowMap> {
    decode_kitti_png(&read_file(path)?)
}

/// Writes `map` and returns the number of saturated samples, which are also
/// logged as a warning.
pub fn write_kitti_png(map: &FlowMap, path: &Path) -> Result<usize> {
    let (bytes, saturated) = encode_kitti_png(map)?;
    if saturated > 0 {
        log::warn!(
            "{saturated} flow samples outside the KITTI range were saturated in {}",
            path.display()
        );
    }
    write_file(path, &bytes)?;
    Ok(saturated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_models::FlowVector;

    fn raw_png(raw: [u16; 3]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 1, 1);
        enc.set_color(ColorType::Rgb);
        enc.set_depth(BitDepth::Sixteen);
        let data: Vec<u8> = raw.iter().flat_map(|c| c.to_be_bytes()).collect();
        enc.write_header().unwrap().write_image_data(&data).unwrap();
        out
    }

    #[test]
    fn format_zero_point_and_steps() {
        for (raw, expected) in [(32768, 0.0), (32832, 1.0), (32704, -1.0)] {
            let map = decode_kitti_png(&raw_png([raw, raw, 1])).unwrap();
            assert_eq!(map.get(0, 0), Some(FlowVector::new(expected, expected)));
        }
        let map = decode_kitti_png(&raw_png([32800, 32800, 0])).unwrap();
        assert_eq!(map.get(0, 0), None);
        // any nonzero third channel means valid
        let map = decode_kitti_png(&raw_png([32768, 32768, 7])).unwrap();
        assert!(map.valid[0]);
    }

    #[test]
    fn grid_round_trip_is_exact() {
        // every 1/64 step in [-512, 512); +512 itself would need raw 65536
        let n: usize = 512 * 64 * 2;
        let width = 257;
        let height = n.div_ceil(width);
        let mut map = FlowMap::new(width, height, Units::PixelsPerFrame);
        for i in 0..n {
            let x = (i as f64 - (512 * 64) as f64) / 64.0;
            map.fu[i] = x;
            map.fv[i] = ((n - 1 - i) as f64 - (512 * 64) as f64) / 64.0;
            map.valid[i] = true;
        }
        let (bytes, saturated) = encode_kitti_png(&map).unwrap();
        assert_eq!(saturated, 0);
        assert_eq!(decode_kitti_png(&bytes).unwrap(), map);

        map.fu[0] = 512.0;
        assert_eq!(encode_kitti_png(&map).unwrap().1, 1);
    }

    #[test]
    fn saturates_out_of_range() {
        let mut map = FlowMap::new(2, 1, Units::PixelsPerFrame);
        map.set(0, 0, Some(FlowVector::new(600.0, -600.0)));
        map.set(1, 0, Some(FlowVector::new(1.0, 0.0)));
        let (bytes, saturated) = encode_kitti_png(&map).unwrap();
        assert_eq!(saturated, 2);
        let back = decode_kitti_png(&bytes).unwrap();
        assert_eq!(back.fu[0], (65535.0 - 32768.0) / 64.0);
        assert_eq!(back.fv[0], -512.0);
    }

    #[test]
    fn rejects_wrong_layouts() {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 1, 1);
        enc.set_color(ColorType::Rgb);
        enc.set_depth(BitDepth::Eight);
        enc.write_header()
            .unwrap()
            .write_image_data(&[1, 2, 3])
            .unwrap();
        assert!(matches!(
            decode_kitti_png(&out),
            Err(Error::WrongBitDepth {
                expected: 16,
                found: 8
            })
        ));

        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 1, 1);
        enc.set_color(ColorType::Grayscale);
        enc.set_depth(BitDepth::Sixteen);
        enc.write_header()
            .unwrap()
            .write_image_data(&[1, 2])
            .unwrap();
        assert!(matches!(
            decode_kitti_png(&out),
            Err(Error::WrongChannelCount {
                expected: 3,
                found: 1
            })
        ));

        assert!(decode_kitti_png(b"not a png").is_err());
    }
}
