//! Closed-form optical flow of the road plane.
//!
//! Two families are provided. The displacement model gives the pixel motion
//! between two frames for a rigid vehicle motion `(x_d, z_d, phi)`. The
//! velocity model is its `dt -> 0` limit under Ackermann steering and gives
//! pixel velocities. Each family has simplified forms for straight driving
//! (`phi = 0`, `x_d = 0`, negligible steering) and a simplest form that also
//! drops the camera roll.
//!
//! Dense maps are rendered at integer pixel coordinates `(u, v)`; callers
//! that need sub-pixel sampling use the per-pixel functions directly.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::FreespaceMask;
use crate::geometry::{lambda12_sc, CameraIntrinsics, MountConfig, Pixel, EPS_HORIZON};

/// Inter-frame vehicle motion: translation `[x_d, 0, z_d]` (meters) and yaw
/// `phi` (radians).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseDelta {
    #[serde(default)]
    pub x_d: f64,
    #[serde(default)]
    pub z_d: f64,
    #[serde(default)]
    pub phi: f64,
}

impl PoseDelta {
    pub const ZERO: PoseDelta = PoseDelta {
        x_d: 0.0,
        z_d: 0.0,
        phi: 0.0,
    };

    pub const fn new(x_d: f64, z_d: f64, phi: f64) -> Self {
        Self { x_d, z_d, phi }
    }
}

/// Ackermann vehicle state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityState {
    /// Rear-axle speed, m/s.
    pub v_r: f64,
    /// Front-wheel steering angle, radians.
    #[serde(default)]
    pub delta_f: f64,
    /// Wheelbase, meters.
    pub l: f64,
    /// Current yaw in the world frame, radians.
    #[serde(default)]
    pub heading: f64,
}

impl VelocityState {
    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "wheelbase must be positive (l = {})",
                self.l
            )));
        }
        if !(self.delta_f.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "steering angle must satisfy |delta_f| < pi/2 (delta_f = {})",
                self.delta_f
            )));
        }
        if !(self.v_r.is_finite() && self.heading.is_finite()) {
            return Err(Error::InvalidParameter(
                "speed and heading must be finite".into(),
            ));
        }
        Ok(())
    }

    /// First-order motion over `dt` seconds, expressed in the vehicle frame
    /// at the start of the interval.
    ///
    /// The world-frame rear-axle velocity is rotated by `-heading`, so the
    /// result is `(0, v_r dt, phi_dot dt)` whatever the heading.
    pub fn pose_delta(&self, dt: f64) -> PoseDelta {
        let rates = ackermann_rates(self);
        let (s, c) = self.heading.sin_cos();
        PoseDelta {
            x_d: (rates.x_dot * c - rates.z_dot * s) * dt,
            z_d: (rates.x_dot * s + rates.z_dot * c) * dt,
            phi: rates.phi_dot * dt,
        }
    }
}

/// Output of the Ackermann kinematic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AckermannRates {
    /// rad/s
    pub phi_dot: f64,
    /// m/s
    pub x_dot: f64,
    /// m/s
    pub z_dot: f64,
}

/// Flow units: displacement maps are per frame, velocity maps per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Units {
    #[default]
    #[serde(rename = "px")]
    PixelsPerFrame,
    #[serde(rename = "px/s")]
    PixelsPerSecond,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::PixelsPerFrame => "px",
            Units::PixelsPerSecond => "px/s",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowVector {
    pub fu: f64,
    pub fv: f64,
}

impl FlowVector {
    pub const ZERO: FlowVector = FlowVector { fu: 0.0, fv: 0.0 };

    pub const fn new(fu: f64, fv: f64) -> Self {
        Self { fu, fv }
    }

    pub fn norm(&self) -> f64 {
        self.fu.hypot(self.fv)
    }

    pub fn is_finite(&self) -> bool {
        self.fu.is_finite() && self.fv.is_finite()
    }
}

/// Dense two-channel flow field with a validity mask, row-major.
///
/// Channel values of invalid pixels are kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub width: usize,
    pub height: usize,
    pub fu: Vec<f64>,
    pub fv: Vec<f64>,
    pub valid: Vec<bool>,
    pub units: Units,
}

impl FlowMap {
    /// All-invalid map.
    pub fn new(width: usize, height: usize, units: Units) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            fu: vec![0.0; n],
            fv: vec![0.0; n],
            valid: vec![false; n],
            units,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        debug_assert!(u < self.width && v < self.height);
        v * self.width + u
    }

    pub fn get(&self, u: usize, v: usize) -> Option<FlowVector> {
        let i = self.index(u, v);
        self.valid[i].then(|| FlowVector::new(self.fu[i], self.fv[i]))
    }

    pub fn set(&mut self, u: usize, v: usize, flow: Option<FlowVector>) {
        let i = self.index(u, v);
        match flow {
            Some(f) => {
                self.fu[i] = f.fu;
                self.fv[i] = f.fv;
                self.valid[i] = true;
            }
            None => {
                self.fu[i] = 0.0;
                self.fv[i] = 0.0;
                self.valid[i] = false;
            }
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn ensure_dims(&self, width: usize, height: usize) -> Result<()> {
        if (self.width, self.height) != (width, height) {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: self.dims(),
            });
        }
        Ok(())
    }

    pub fn ensure_compatible(&self, other: &FlowMap) -> Result<()> {
        other.ensure_dims(self.width, self.height)?;
        if self.units != other.units {
            return Err(Error::UnitsMismatch {
                left: self.units,
                right: other.units,
            });
        }
        Ok(())
    }

    /// Largest flow magnitude over valid pixels (0 for an empty map).
    pub fn max_magnitude(&self) -> f64 {
        (0..self.len())
            .filter(|&i| self.valid[i])
            .map(|i| self.fu[i].hypot(self.fv[i]))
            .fold(0.0, f64::max)
    }
}

/// Motion input of the simplest (no roll, straight driving) form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimplestMotion {
    Displacement { z_d: f64 },
    Velocity { v_r: f64 },
}

/// A flow model together with its motion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum FlowModel {
    FullDisp(PoseDelta),
    FullVel(VelocityState),
    SimpleDisp { z_d: f64 },
    SimpleVel { v_r: f64 },
    Simplest(SimplestMotion),
}

impl FlowModel {
    pub fn units(&self) -> Units {
        match self {
            FlowModel::FullDisp(_)
            | FlowModel::SimpleDisp { .. }
            | FlowModel::Simplest(SimplestMotion::Displacement { .. }) => Units::PixelsPerFrame,
            FlowModel::FullVel(_)
            | FlowModel::SimpleVel { .. }
            | FlowModel::Simplest(SimplestMotion::Velocity { .. }) => Units::PixelsPerSecond,
        }
    }

    /// Precomputes the trigonometry of the model for repeated evaluation.
    pub fn field(&self, k: &CameraIntrinsics, m: &MountConfig) -> Result<ModelField> {
        k.validate()?;
        m.validate()?;
        if let FlowModel::FullVel(s) = self {
            s.validate()?;
        }
        let (sin_t, cos_t) = m.theta.sin_cos();
        let common = Common {
            k: *k,
            h: m.h,
            sin_t,
            cos_t,
        };
        let kind = match *self {
            FlowModel::FullDisp(d) => {
                let (sin_p, cos_p) = d.phi.sin_cos();
                FieldKind::FullDisp {
                    x_d: d.x_d,
                    z_d: d.z_d,
                    sin_p,
                    cos_p,
                }
            }
            FlowModel::FullVel(s) => FieldKind::FullVel {
                v_r: s.v_r,
                steer: s.delta_f.tan() / s.l,
            },
            FlowModel::SimpleDisp { z_d } => FieldKind::SimpleDisp { z_d },
            FlowModel::SimpleVel { v_r } => FieldKind::SimpleVel { v_r },
            FlowModel::Simplest(motion) => FieldKind::Simplest(motion),
        };
        Ok(ModelField { common, kind })
    }
}

#[derive(Debug, Clone, Copy)]
struct Common {
    k: CameraIntrinsics,
    h: f64,
    sin_t: f64,
    cos_t: f64,
}

impl Common {
    #[inline]
    fn lambdas(&self, p: Pixel) -> Result<(f64, f64)> {
        let (l1, l2) = lambda12_sc(p, &self.k, self.sin_t, self.cos_t);
        if !(l1 > EPS_HORIZON) {
            return Err(Error::Horizon { lambda1: l1 });
        }
        Ok((l1, l2))
    }

    /// Applies `M = [[fx cos, fx sin], [-fy sin, fy cos]]`.
    #[inline]
    fn apply_m(&self, a: f64, b: f64) -> FlowVector {
        FlowVector::new(
            self.k.fx * (self.cos_t * a + self.sin_t * b),
            self.k.fy * (-self.sin_t * a + self.cos_t * b),
        )
    }
}

#[derive(Debug, Clone, Copy)]
enum FieldKind {
    FullDisp {
        x_d: f64,
        z_d: f64,
        sin_p: f64,
        cos_p: f64,
    },
    FullVel {
        v_r: f64,
        /// tan(delta_f) / l
        steer: f64,
    },
    SimpleDisp {
        z_d: f64,
    },
    SimpleVel {
        v_r: f64,
    },
    Simplest(SimplestMotion),
}

/// A [`FlowModel`] bound to a camera, ready for per-pixel evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ModelField {
    common: Common,
    kind: FieldKind,
}

impl ModelField {
    pub fn units(&self) -> Units {
        match self.kind {
            FieldKind::FullDisp { .. }
            | FieldKind::SimpleDisp { .. }
            | FieldKind::Simplest(SimplestMotion::Displacement { .. }) => Units::PixelsPerFrame,
            _ => Units::PixelsPerSecond,
        }
    }

    #[inline]
    pub fn flow_at(&self, p: Pixel) -> Result<FlowVector> {
        let c = &self.common;
        match self.kind {
            FieldKind::FullDisp {
                x_d,
                z_d,
                sin_p,
                cos_p,
            } => {
                let (l1, l2) = c.lambdas(p)?;
                let l3 = l2 * c.h - l1 * x_d;
                let l4 = c.h - l1 * z_d;
                let depth = l3 * sin_p + l4 * cos_p;
                if !(depth > 0.0) {
                    return Err(Error::BehindCamera { depth: depth / l1 });
                }
                let a = (l3 * cos_p - l4 * sin_p) / depth - l2;
                let b = l1 * c.h / depth - l1;
                Ok(c.apply_m(a, b))
            }
            FieldKind::FullVel { v_r, steer } => {
                let (l1, l2) = c.lambdas(p)?;
                let a = l1 * l2 - c.h * (1.0 + l2 * l2) * steer;
                let b = l1 * l1 - l1 * l2 * c.h * steer;
                let f = c.apply_m(a, b);
                let s = v_r / c.h;
                Ok(FlowVector::new(s * f.fu, s * f.fv))
            }
            FieldKind::SimpleDisp { z_d } => {
                let (l1, _) = c.lambdas(p)?;
                let denom = c.h - l1 * z_d;
                if !(denom > 0.0) {
                    return Err(Error::BehindCamera { depth: denom / l1 });
                }
                let s = l1 * z_d / denom;
                Ok(FlowVector::new(s * (p.u - c.k.u0), s * (p.v - c.k.v0)))
            }
            FieldKind::SimpleVel { v_r } => {
                let (l1, _) = c.lambdas(p)?;
                let s = v_r * l1 / c.h;
                Ok(FlowVector::new(s * (p.u - c.k.u0), s * (p.v - c.k.v0)))
            }
            FieldKind::Simplest(motion) => simplest_flows(p, &c.k, c.h, motion),
        }
    }
}

/// Displacement flow of the road pixel `p` for the motion `d`.
pub fn displacement_flow(
    p: Pixel,
    k: &CameraIntrinsics,
    m: &MountConfig,
    d: &PoseDelta,
) -> Result<FlowVector> {
    FlowModel::FullDisp(*d).field(k, m)?.flow_at(p)
}

/// Ackermann kinematics: yaw rate and world-frame rear-axle velocity.
pub fn ackermann_rates(s: &VelocityState) -> AckermannRates {
    let (sin_h, cos_h) = s.heading.sin_cos();
    AckermannRates {
        phi_dot: s.v_r * s.delta_f.tan() / s.l,
        x_dot: s.v_r * sin_h,
        z_dot: s.v_r * cos_h,
    }
}

/// Velocity flow (pixels/second) of the road pixel `p`, expressed in the
/// vehicle frame at the current instant.
pub fn velocity_flow(
    p: Pixel,
    k: &CameraIntrinsics,
    m: &MountConfig,
    s: &VelocityState,
) -> Result<FlowVector> {
    FlowModel::FullVel(*s).field(k, m)?.flow_at(p)
}

/// Displacement flow for straight driving (`phi = 0`, `x_d = 0`).
pub fn displacement_flow_simplified(
    p: Pixel,
    k: &CameraIntrinsics,
    m: &MountConfig,
    z_d: f64,
) -> Result<FlowVector> {
    FlowModel::SimpleDisp { z_d }.field(k, m)?.flow_at(p)
}

/// Velocity flow with negligible steering.
pub fn velocity_flow_simplified(
    p: Pixel,
    k: &CameraIntrinsics,
    m: &MountConfig,
    v_r: f64,
) -> Result<FlowVector> {
    FlowModel::SimpleVel { v_r }.field(k, m)?.flow_at(p)
}

/// Straight driving with no camera roll. The vertical component is a
/// function of the row only: rational in `v - v0` for displacements and
/// quadratic for velocities.
pub fn simplest_flows(
    p: Pixel,
    k: &CameraIntrinsics,
    h: f64,
    motion: SimplestMotion,
) -> Result<FlowVector> {
    let dv = p.v - k.v0;
    let du = p.u - k.u0;
    if !(dv / k.fy > EPS_HORIZON) {
        return Err(Error::Horizon { lambda1: dv / k.fy });
    }
    let s = match motion {
        SimplestMotion::Displacement { z_d } => {
            let denom = h * k.fy - z_d * dv;
            if !(denom > 0.0) {
                return Err(Error::BehindCamera { depth: denom / dv });
            }
            z_d * dv / denom
        }
        SimplestMotion::Velocity { v_r } => v_r * dv / (h * k.fy),
    };
    Ok(FlowVector::new(s * du, s * dv))
}

/// Evaluates `model` at every integer pixel of a `width x height` frame.
///
/// Pixels outside `region` or where the model is undefined (horizon, point
/// behind the camera) are left invalid.
pub fn render_flow_map(
    width: usize,
    height: usize,
    region: Option<&FreespaceMask>,
    model: &FlowModel,
    k: &CameraIntrinsics,
    m: &MountConfig,
) -> Result<FlowMap> {
    let field = model.field(k, m)?;
    let mut map = prepare(width, height, region, field.units())?;
    let FlowMap { fu, fv, valid, .. } = &mut map;
    for (v, ((fu_row, fv_row), valid_row)) in fu
        .chunks_mut(width.max(1))
        .zip(fv.chunks_mut(width.max(1)))
        .zip(valid.chunks_mut(width.max(1)))
        .enumerate()
    {
        render_row(&field, region, v, fu_row, fv_row, valid_row);
    }
    Ok(map)
}

/// Row-parallel variant of [`render_flow_map`] on the current rayon pool.
/// The output is bit-identical to the sequential renderer.
pub fn render_flow_map_par(
    width: usize,
    height: usize,
    region: Option<&FreespaceMask>,
    model: &FlowModel,
    k: &CameraIntrinsics,
    m: &MountConfig,
) -> Result<FlowMap> {
    let field = model.field(k, m)?;
    let mut map = prepare(width, height, region, field.units())?;
    let FlowMap { fu, fv, valid, .. } = &mut map;
    fu.par_chunks_mut(width.max(1))
        .zip(fv.par_chunks_mut(width.max(1)))
        .zip(valid.par_chunks_mut(width.max(1)))
        .enumerate()
        .for_each(|(v, ((fu_row, fv_row), valid_row))| {
            render_row(&field, region, v, fu_row, fv_row, valid_row)
        });
    Ok(map)
}

fn prepare(
    width: usize,
    height: usize,
    region: Option<&FreespaceMask>,
    units: Units,
) -> Result<FlowMap> {
    if let Some(r) = region {
        r.ensure_dims(width, height)?;
    }
    Ok(FlowMap::new(width, height, units))
}

#[inline]
fn render_row(
    field: &ModelField,
    region: Option<&FreespaceMask>,
    v: usize,
    fu: &mut [f64],
    fv: &mut [f64],
    valid: &mut [bool],
) {
    let width = fu.len();
    for u in 0..width {
        if let Some(r) = region {
            if !r.mask[v * width + u] {
                continue;
            }
        }
        if let Ok(f) = field.flow_at(Pixel::new(u as f64, v as f64)) {
            if f.is_finite() {
                fu[u] = f.fu;
                fv[u] = f.fv;
                valid[u] = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> (CameraIntrinsics, MountConfig) {
        (
            CameraIntrinsics::new(700.0, 700.0, 600.0, 200.0).unwrap(),
            MountConfig::new(1.5, 0.0).unwrap(),
        )
    }

    fn close(a: FlowVector, b: FlowVector, tol: f64) -> bool {
        (a.fu - b.fu).abs() <= tol && (a.fv - b.fv).abs() <= tol
    }

    #[test]
    fn zero_motion_gives_zero_flow() {
        let (k, m) = camera();
        let m = MountConfig { theta: 0.07, ..m };
        for v in (201..375).step_by(17) {
            for u in (0..1242).step_by(101) {
                let p = Pixel::new(u as f64, v as f64);
                if let Ok(f) = displacement_flow(p, &k, &m, &PoseDelta::ZERO) {
                    assert!(close(f, FlowVector::ZERO, 1e-12), "{f:?}");
                }
            }
        }
    }

    #[test]
    fn displacement_worked_example() {
        let (k, m) = camera();
        let p = Pixel::new(600.0, 300.0);
        let f = displacement_flow(p, &k, &m, &PoseDelta::new(0.0, 1.0, 0.0)).unwrap();
        // ground point (0, 1.5, 10.5) moves to depth 9.5: v' - v0 = 1050 / 9.5
        assert!(close(f, FlowVector::new(0.0, 1050.0 / 9.5 - 100.0), 1e-9));
        assert!((f.fv - 100.0 / 9.5).abs() < 1e-9);
        let s = displacement_flow_simplified(p, &k, &m, 1.0).unwrap();
        assert!(close(f, s, 1e-12));
        let t = simplest_flows(p, &k, 1.5, SimplestMotion::Displacement { z_d: 1.0 }).unwrap();
        assert!(close(f, t, 1e-12));
    }

    #[test]
    fn overtaken_point_is_behind_camera() {
        let (k, m) = camera();
        // ground depth 10.5 m
        let p = Pixel::new(600.0, 300.0);
        let r = displacement_flow(p, &k, &m, &PoseDelta::new(0.0, 11.0, 0.0));
        assert!(matches!(r, Err(Error::BehindCamera { .. })));
        // h / z_d == lambda1 exactly: denominator vanishes
        let r = displacement_flow_simplified(p, &k, &m, 10.5);
        assert!(matches!(r, Err(Error::BehindCamera { .. })));
    }

    #[test]
    fn horizon_pixels_rejected() {
        let (k, m) = camera();
        let p = Pixel::new(10.0, 200.0);
        assert!(matches!(
            displacement_flow(p, &k, &m, &PoseDelta::new(0.0, 1.0, 0.0)),
            Err(Error::Horizon { .. })
        ));
        let s = VelocityState {
            v_r: 3.0,
            delta_f: 0.1,
            l: 2.5,
            heading: 0.0,
        };
        assert!(velocity_flow(p, &k, &m, &s).is_err());
        assert!(velocity_flow_simplified(p, &k, &m, 3.0).is_err());
        assert!(simplest_flows(p, &k, 1.5, SimplestMotion::Velocity { v_r: 3.0 }).is_err());
    }

    #[test]
    fn ackermann_rate_examples() {
        let straight = VelocityState {
            v_r: 10.0,
            delta_f: 0.0,
            l: 2.5,
            heading: 0.0,
        };
        let r = ackermann_rates(&straight);
        assert_eq!((r.phi_dot, r.x_dot, r.z_dot), (0.0, 0.0, 10.0));

        let turning = VelocityState {
            delta_f: 0.25f64.atan(),
            ..straight
        };
        let r = ackermann_rates(&turning);
        assert!((r.phi_dot - 1.0).abs() < 1e-12);
        assert_eq!((r.x_dot, r.z_dot), (0.0, 10.0));

        let stopped = VelocityState {
            v_r: 0.0,
            ..turning
        };
        let r = ackermann_rates(&stopped);
        assert_eq!((r.phi_dot, r.x_dot, r.z_dot), (0.0, 0.0, 0.0));
    }

    #[test]
    fn pose_delta_is_heading_independent() {
        let s = VelocityState {
            v_r: 7.0,
            delta_f: 0.05,
            l: 2.7,
            heading: 0.9,
        };
        let d = s.pose_delta(0.1);
        assert!(d.x_d.abs() < 1e-15);
        assert!((d.z_d - 0.7).abs() < 1e-15);
        assert!((d.phi - 0.7 * 0.05f64.tan() / 2.7).abs() < 1e-15);
    }

    #[test]
    fn velocity_examples() {
        let (k, m) = camera();
        let p = Pixel::new(600.0, 300.0);
        let s = VelocityState {
            v_r: 0.0,
            delta_f: 0.2,
            l: 2.5,
            heading: 0.0,
        };
        assert_eq!(velocity_flow(p, &k, &m, &s).unwrap(), FlowVector::ZERO);

        let s = VelocityState {
            v_r: 10.0,
            delta_f: 0.0,
            ..s
        };
        let expected = FlowVector::new(0.0, 10.0 * 100.0 * 100.0 / 1050.0);
        assert!(close(velocity_flow(p, &k, &m, &s).unwrap(), expected, 1e-9));
        assert!(close(
            velocity_flow_simplified(p, &k, &m, 10.0).unwrap(),
            expected,
            1e-9
        ));
        let t = simplest_flows(p, &k, 1.5, SimplestMotion::Velocity { v_r: 10.0 }).unwrap();
        assert!(close(t, expected, 1e-9));
    }

    #[test]
    fn centre_column_has_no_horizontal_flow() {
        let (k, m) = camera();
        for v in 201..375 {
            let p = Pixel::new(k.u0, v as f64);
            assert_eq!(velocity_flow_simplified(p, &k, &m, 4.0).unwrap().fu, 0.0);
            for motion in [
                SimplestMotion::Velocity { v_r: 4.0 },
                SimplestMotion::Displacement { z_d: 0.4 },
            ] {
                assert_eq!(simplest_flows(p, &k, 1.5, motion).unwrap().fu, 0.0);
            }
        }
    }

    #[test]
    fn simplest_velocity_is_quadratic_in_row() {
        let (k, _) = camera();
        let (h, v_r) = (1.5, 10.0);
        let fv = |row: f64| {
            simplest_flows(
                Pixel::new(300.0, row),
                &k,
                h,
                SimplestMotion::Velocity { v_r },
            )
            .unwrap()
            .fv
        };
        // one pixel below the horizon
        assert!((fv(k.v0 + 1.0) - v_r / (h * k.fy)).abs() < 1e-12);
        let expected = 2.0 * v_r / (h * k.fy);
        for row in 202..374 {
            let r = row as f64;
            let second = fv(r + 1.0) - 2.0 * fv(r) + fv(r - 1.0);
            assert!((second - expected).abs() < 1e-9, "row {row}: {second}");
        }
    }

    #[test]
    fn zero_speed_simplified_forms() {
        let (k, m) = camera();
        let p = Pixel::new(100.0, 320.0);
        assert_eq!(
            displacement_flow_simplified(p, &k, &m, 0.0).unwrap(),
            FlowVector::ZERO
        );
        assert_eq!(
            velocity_flow_simplified(p, &k, &m, 0.0).unwrap(),
            FlowVector::ZERO
        );
    }

    #[test]
    fn render_zero_motion_and_region() {
        let (k, m) = camera();
        let map =
            render_flow_map(64, 48, None, &FlowModel::FullDisp(PoseDelta::ZERO), &k, &m).unwrap();
        assert!(map.fu.iter().chain(&map.fv).all(|&x| x == 0.0));
        let k_small = CameraIntrinsics::new(50.0, 50.0, 32.0, 20.0).unwrap();
        let mut region = FreespaceMask::new(64, 48, true);
        region.mask[40 * 64 + 10] = false;
        let model = FlowModel::SimpleDisp { z_d: 0.5 };
        let map = render_flow_map(64, 48, Some(&region), &model, &k_small, &m).unwrap();
        assert!(!map.valid[40 * 64 + 10]);
        assert!(map.valid[40 * 64 + 11]);
        // rows at/above the horizon are invalid
        assert!(map.valid[..21 * 64].iter().all(|&v| !v));
        assert_eq!(map.units, Units::PixelsPerFrame);
    }

    #[test]
    fn render_rejects_mismatched_region() {
        let (k, m) = camera();
        let region = FreespaceMask::new(10, 10, true);
        let r = render_flow_map(
            11,
            10,
            Some(&region),
            &FlowModel::SimpleVel { v_r: 1.0 },
            &k,
            &m,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn parallel_render_is_bit_identical() {
        let (k, _) = camera();
        let m = MountConfig::new(1.4, 0.03).unwrap();
        for model in [
            FlowModel::FullDisp(PoseDelta::new(0.1, 1.3, 0.02)),
            FlowModel::FullVel(VelocityState {
                v_r: 12.0,
                delta_f: -0.04,
                l: 2.6,
                heading: 0.0,
            }),
        ] {
            let a = render_flow_map(320, 240, None, &model, &k, &m).unwrap();
            let b = render_flow_map_par(320, 240, None, &model, &k, &m).unwrap();
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(3)
                .build()
                .unwrap();
            let c = pool
                .install(|| render_flow_map_par(320, 240, None, &model, &k, &m))
                .unwrap();
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
    }
}
