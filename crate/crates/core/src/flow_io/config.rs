//! JSON run configuration.
//!
//! ```json
//! {
//!   "camera": {"fx": 721.5, "fy": 721.5, "u0": 609.6, "v0": 172.9},
//!   "mount":  {"h": 1.65, "theta": 0.0},
//!   "motion": {"kind": "displacement", "x_d": 0.0, "z_d": 1.0, "phi": 0.0},
//!   "scene":  {"width": 1242, "height": 375, "lateral_extent": 10.0,
//!              "longitudinal_extent": 50.0, "grid_step": 0.1},
//!   "noise":  {"sigma": 0.5, "seed": 1},
//!   "pso":    {"swarm_size": 50, "max_iterations": 200, "seed": 0},
//!   "fit":    {"bin_w": 0.25, "min_row_support": 10, "tau": 1.0,
//!              "kind": "rational-displacement"}
//! }
//! ```
//!
//! A velocity motion is `{"kind": "velocity", "v_r": .., "delta_f": ..,
//! "l": .., "heading": .., "dt": ..}`; `dt` (seconds, default 0.1) is only
//! used where a per-frame displacement is needed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::read_file;
use crate::error::{Error, Result};
use crate::fitting::{CurveKind, ProjectionParams};
use crate::flow_models::{FlowModel, PoseDelta, SimplestMotion, VelocityState};
use crate::geometry::{CameraIntrinsics, MountConfig};
use crate::pose_estimation::PoseSearchConfig;
use crate::scene_synth::{NoiseSpec, SceneSpec};

pub type CameraSection = CameraIntrinsics;
pub type MountSection = MountConfig;
pub type NoiseSection = NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionSection {
    Displacement {
        #[serde(default)]
        x_d: f64,
        #[serde(default)]
        z_d: f64,
        #[serde(default)]
        phi: f64,
    },
    Velocity {
        v_r: f64,
        #[serde(default)]
        delta_f: f64,
        l: f64,
        #[serde(default)]
        heading: f64,
        #[serde(default = "default_dt")]
        dt: f64,
    },
}

fn default_dt() -> f64 {
    0.1
}

impl MotionSection {
    /// Per-frame motion; velocity states are integrated over `dt`.
    pub fn pose_delta(&self) -> PoseDelta {
        match *self {
            MotionSection::Displacement { x_d, z_d, phi } => PoseDelta { x_d, z_d, phi },
            MotionSection::Velocity { dt, .. } => self.velocity_state().unwrap().pose_delta(dt),
        }
    }

    pub fn velocity_state(&self) -> Option<VelocityState> {
        match *self {
            MotionSection::Velocity {
                v_r,
                delta_f,
                l,
                heading,
                ..
            } => Some(VelocityState {
                v_r,
                delta_f,
                l,
                heading,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSection {
    pub width: usize,
    pub height: usize,
    pub lateral_extent: f64,
    pub longitudinal_extent: f64,
    pub grid_step: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            width: 1242,
            height: 375,
            lateral_extent: 10.0,
            longitudinal_extent: 50.0,
            grid_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSection {
    pub bin_w: f64,
    pub min_row_support: usize,
    pub tau: f64,
    pub kind: CurveKind,
}

impl Default for FitSection {
    fn default() -> Self {
        let p = ProjectionParams::default();
        Self {
            bin_w: p.bin_w,
            min_row_support: p.min_row_support,
            tau: 1.0,
            kind: CurveKind::default(),
        }
    }
}

impl FitSection {
    pub fn projection(&self) -> ProjectionParams {
        ProjectionParams {
            bin_w: self.bin_w,
            min_row_support: self.min_row_support,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub camera: CameraSection,
    pub mount: MountSection,
    #[serde(default)]
    pub motion: Option<MotionSection>,
    #[serde(default)]
    pub scene: SceneSection,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub pso: PoseSearchConfig,
    #[serde(default)]
    pub fit: FitSection,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.camera.validate()?;
        cfg.mount.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::InvalidParameter(format!("{} is not UTF-8", path.display())))?;
        Self::from_json(&text)
    }

    pub fn scene_spec(&self) -> SceneSpec {
        SceneSpec {
            intrinsics: self.camera,
            mount: self.mount,
            width: self.scene.width,
            height: self.scene.height,
            lateral_extent: self.scene.lateral_extent,
            longitudinal_extent: self.scene.longitudinal_extent,
            grid_step: self.scene.grid_step,
        }
    }

    pub fn motion(&self) -> Result<MotionSection> {
        self.motion
            .ok_or_else(|| Error::InvalidParameter("config has no motion section".into()))
    }

    /// Builds the named model (`full-disp`, `full-vel`, `simple-disp`,
    /// `simple-vel`, `simplest`) from the motion section.
    pub fn model(&self, name: &str) -> Result<FlowModel> {
        let motion = self.motion()?;
        let vel = motion.velocity_state();
        let need_vel = || {
            vel.ok_or_else(|| {
                Error::InvalidParameter(format!("model {name} needs a velocity motion"))
            })
        };
        Ok(match name {
            "full-disp" => FlowModel::FullDisp(motion.pose_delta()),
            "full-vel" => FlowModel::FullVel(need_vel()?),
            "simple-disp" => FlowModel::SimpleDisp {
                z_d: motion.pose_delta().z_d,
            },
            "simple-vel" => FlowModel::SimpleVel {
                v_r: need_vel()?.v_r,
            },
            "simplest" => FlowModel::Simplest(match vel {
                Some(s) => SimplestMotion::Velocity { v_r: s.v_r },
                None => SimplestMotion::Displacement {
                    z_d: motion.pose_delta().z_d,
                },
            }),
            other => {
                return Err(Error::InvalidParameter(format!("unknown model {other:?}")));
            }
        })
    }
}
