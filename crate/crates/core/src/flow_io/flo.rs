//! Middlebury `.flo`: little-endian f32 magic `202021.25`, i32 width,
//! i32 height, then row-major interleaved f32 `(u, v)`. NaN marks invalid.

use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::flow_models::{FlowMap, Units};

pub const FLO_MAGIC: f32 = 202021.25;

pub fn encode_flo(map: &FlowMap) -> Result<Vec<u8>> {
    let w =
        i32::try_from(map.width).map_err(|_| Error::InvalidParameter("width too large".into()))?;
    let h = i32::try_from(map.height)
        .map_err(|_| Error::InvalidParameter("height too large".into()))?;
    let mut out = Vec::with_capacity(12 + map.len() * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for i in 0..map.len() {
        let (u, v) = if map.valid[i] {
            (map.fu[i] as f32, map.fv[i] as f32)
        } else {
            (f32::NAN, f32::NAN)
        };
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowMap> {
    let word = |i: usize| -> Result<[u8; 4]> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| [b[0], b[1], b[2], b[3]])
            .ok_or(Error::TruncatedFile)
    };
    if f32::from_le_bytes(word(0)?) != FLO_MAGIC {
        return Err(Error::BadMagic);
    }
    let w = i32::from_le_bytes(word(1)?);
    let h = i32::from_le_bytes(word(2)?);
    if w < 0 || h < 0 {
        return Err(Error::InvalidParameter(format!(
            "negative dimensions {w}x{h}"
        )));
    }
    let (w, h) = (w as usize, h as usize);
    let needed = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(12))
        .ok_or(Error::TruncatedFile)?;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile);
    }
    let mut map = FlowMap::new(w, h, Units::PixelsPerFrame);
    for (i, px) in bytes[12..needed].chunks_exact(8).enumerate() {
        let u = f32::from_le_bytes([px[0], px[1], px[2], px[3]]);
        let v = f32::from_le_bytes([px[4], px[5], px[6], px[7]]);
        if u.is_finite() && v.is_finite() {
            map.fu[i] = u as f64;
            map.fv[i] = v as f64;
            map.valid[i] = true;
        }
    }
    Ok(map)
}

pub fn read_flo(path: &Path) -> Result<FlowMap> {
    decode_flo(&read_file(path)?)
}

pub fn write_flo(map: &FlowMap, path: &Path) -> Result<()> {
    write_file(path, &encode_flo(map)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_models::FlowVector;

    #[test]
    fn single_pixel_layout() {
        let mut m = FlowMap::new(1, 1, Units::PixelsPerFrame);
        m.set(0, 0, Some(FlowVector::new(1.5, -2.0)));
        let bytes = encode_flo(&m).unwrap();
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[0..4], &202021.25f32.to_le_bytes());
        assert_eq!(&bytes[0..4], b"PIEH");
        assert_eq!(&bytes[4..8], &1i32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1i32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1.5f32.to_le_bytes());
        assert_eq!(&bytes[16..20], &(-2.0f32).to_le_bytes());
        assert_eq!(decode_flo(&bytes).unwrap(), m);
    }

    #[test]
    fn invalid_pixels_are_nan() {
        let m = FlowMap::new(2, 1, Units::PixelsPerFrame);
        let bytes = encode_flo(&m).unwrap();
        assert!(f32::from_le_bytes(bytes[12..16].try_into().unwrap()).is_nan());
        assert_eq!(decode_flo(&bytes).unwrap().valid_count(), 0);
    }

    #[test]
    fn bad_inputs() {
        let mut bytes = encode_flo(&FlowMap::new(2, 2, Units::PixelsPerFrame)).unwrap();
        assert!(matches!(
            decode_flo(&bytes[..bytes.len() - 1]),
            Err(Error::TruncatedFile)
        ));
        assert!(matches!(decode_flo(&bytes[..3]), Err(Error::TruncatedFile)));
        bytes[0] ^= 1;
        assert!(matches!(decode_flo(&bytes), Err(Error::BadMagic)));
        // absurd header must not allocate
        let mut huge = FLO_MAGIC.to_le_bytes().to_vec();
        huge.extend_from_slice(&i32::MAX.to_le_bytes());
        huge.extend_from_slice(&i32::MAX.to_le_bytes());
        assert!(matches!(decode_flo(&huge), Err(Error::TruncatedFile)));
    }
}
