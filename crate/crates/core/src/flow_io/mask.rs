use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::fitting::FreespaceMask;

/// 8-bit single-channel PNG; any nonzero value is freespace.
pub fn decode_mask_png(bytes: &[u8]) -> Result<FreespaceMask> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info()?;
    let (color, depth) = reader.output_color_type();
    if depth != BitDepth::Eight {
        return Err(Error::WrongBitDepth {
            expected: 8,
            found: depth as u8,
        });
    }
    if color != ColorType::Grayscale {
        return Err(Error::WrongChannelCount {
            expected: 1,
            found: color.samples(),
        });
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    let (width, height) = (info.width as usize, info.height as usize);
    let mut mask = Vec::with_capacity(width * height);
    for v in 0..height {
        let row = &buf[v * info.line_size..v * info.line_size + width];
        mask.extend(row.iter().map(|&x| x != 0));
    }
    Ok(FreespaceMask {
        width,
        height,
        mask,
    })
}

/// Freespace is written as 255, everything else as 0.
pub fn encode_mask_png(mask: &FreespaceMask) -> Result<Vec<u8>> {
    let data: Vec<u8> = mask.mask.iter().map(|&b| if b { 255 } else { 0 }).collect();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, mask.width as u32, mask.height as u32);
        enc.set_color(ColorType::Grayscale);
        enc.set_depth(BitDepth::Eight);
        enc.write_header()?.write_image_data(&data)?;
    }
    Ok(out)
}

pub fn read_mask_png(path: &Path) -> Result<FreespaceMask> {
    decode_mask_png(&read_file(path)?)
}

pub fn write_mask_png(mask: &FreespaceMask, path: &Path) -> Result<()> {
    write_file(path, &encode_mask_png(mask)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(values: &[u8], width: u32, depth: BitDepth) -> Vec<u8> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, width, 1);
        enc.set_color(ColorType::Grayscale);
        enc.set_depth(depth);
        enc.write_header()
            .unwrap()
            .write_image_data(values)
            .unwrap();
        out
    }

    #[test]
    fn nonzero_is_freespace() {
        let m = decode_mask_png(&gray(&[255, 255, 255], 3, BitDepth::Eight)).unwrap();
        assert!(m.mask.iter().all(|&b| b));
        let m = decode_mask_png(&gray(&[0, 1, 17], 3, BitDepth::Eight)).unwrap();
        assert_eq!(m.mask, vec![false, true, true]);
    }

    #[test]
    fn round_trip() {
        let mask = FreespaceMask {
            width: 5,
            height: 3,
            mask: (0..15).map(|i| i % 4 == 1 || i == 14).collect(),
        };
        assert_eq!(
            decode_mask_png(&encode_mask_png(&mask).unwrap()).unwrap(),
            mask
        );
    }

    #[test]
    fn sixteen_bit_rejected() {
        let bytes = gray(&[0, 1, 0, 2], 2, BitDepth::Sixteen);
        assert!(matches!(
            decode_mask_png(&bytes),
            Err(Error::WrongBitDepth {
                expected: 8,
                found: 16
            })
        ));
    }
}
