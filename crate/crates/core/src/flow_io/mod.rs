//! Flow and mask file formats, plus the JSON configuration.
//!
//! | format          | layout                                                  |
//! |-----------------|---------------------------------------------------------|
//! | KITTI PNG       | 16-bit RGB; `flow = (raw - 32768) / 64`; B != 0 = valid |
//! | Middlebury .flo | f32 magic 202021.25, i32 width, i32 height, f32 (u, v)  |
//! | mask PNG        | 8-bit grayscale; nonzero = freespace                    |
//!
//! Neither flow format records units, so writers drop a `<file>.meta.json`
//! sidecar next to the flow file and readers honour it when present.

mod config;
mod flo;
mod kitti;
mod mask;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    CameraSection, Config, FitSection, MotionSection, MountSection, NoiseSection, SceneSection,
};
pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC};
pub use kitti::{decode_kitti_png, encode_kitti_png, read_kitti_png, write_kitti_png};
pub use mask::{decode_mask_png, encode_mask_png, read_mask_png, write_mask_png};

use crate::error::{Error, Result};
use crate::flow_models::{FlowMap, Units};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowFileFormat {
    KittiPng16,
    MiddleburyFlo,
    MaskPng8,
}

impl FlowFileFormat {
    /// Flow format implied by a file extension (`.png` or `.flo`).
    pub fn for_flow_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
        {
            Some(e) if e == "png" => Ok(FlowFileFormat::KittiPng16),
            Some(e) if e == "flo" => Ok(FlowFileFormat::MiddleburyFlo),
            _ => Err(Error::InvalidParameter(format!(
                "cannot infer flow format of {}: use .png or .flo",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    units: Units,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Reads a flow file by extension, applying the units sidecar if one exists.
pub fn read_flow(path: &Path) -> Result<FlowMap> {
    let mut map = match FlowFileFormat::for_flow_path(path)? {
        FlowFileFormat::KittiPng16 => read_kitti_png(path)?,
        _ => read_flo(path)?,
    };
    let side = sidecar_path(path);
    if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        map.units = serde_json::from_str::<Sidecar>(&text)?.units;
    }
    Ok(map)
}

/// Writes a flow file by extension plus its units sidecar. Returns the
/// number of saturated samples (KITTI only).
pub fn write_flow(map: &FlowMap, path: &Path) -> Result<usize> {
    let saturated = match FlowFileFormat::for_flow_path(path)? {
        FlowFileFormat::KittiPng16 => write_kitti_png(map, path)?,
        _ => {
            write_flo(map, path)?;
            0
        }
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&Sidecar { units: map.units })?;
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))?;
    Ok(saturated)
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
