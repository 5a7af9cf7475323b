//! Camera and ground-plane geometry.
//!
//! Three frames are involved. The vehicle coordinate system (VCS) and the
//! camera coordinate system (CCS) share their origin at the optical centre;
//! the CCS is rolled by `theta` about the forward axis. Pixels live in the
//! pixel coordinate system (PCS).
//!
//! ```text
//!            Z (forward)
//!           /
//!          /
//!   O ----+------> X (right)
//!         |
//!         |
//!         v Y (down)
//!
//!   ground plane:  y = h   (h = camera height)
//!   p_ccs = R_theta * p_vcs
//!   z_c * [u, v, 1]^T = K * R_theta * p_vcs
//! ```
//!
//! Because `Y` points down, points on the road have `y = h > 0` and project
//! below the horizon row.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `lambda1` threshold under which a pixel is treated as being on or above the
/// horizon. Bounds ground depth at `1e6 * h`.
pub const EPS_HORIZON: f64 = 1e-6;

/// Pinhole intrinsics (matrix `K`), all in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, u0: f64, v0: f64) -> Result<Self> {
        let k = Self { fx, fy, u0, v0 };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive and finite (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(self.u0.is_finite() && self.v0.is_finite()) {
            return Err(Error::InvalidParameter(
                "principal point must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.u0, //
            0.0, self.fy, self.v0, //
            0.0, 0.0, 1.0,
        )
    }
}

/// Camera mounting: height above the road and roll about the forward axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountConfig {
    /// meters
    pub h: f64,
    /// radians
    #[serde(default)]
    pub theta: f64,
}

impl MountConfig {
    pub fn new(h: f64, theta: f64) -> Result<Self> {
        let m = Self { h, theta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "camera height must be positive (h = {})",
                self.h
            )));
        }
        if !(self.theta.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "roll angle must satisfy |theta| < pi/2 (theta = {})",
                self.theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// A 3D point in the vehicle frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GroundPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Auxiliary per-pixel terms of the closed-form flow models.
///
/// `lambda1` and `lambda2` depend on the pixel and the roll only; `lambda3`
/// and `lambda4` (meters) fold in the camera height and the translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaTerms {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl LambdaTerms {
    pub fn new(p: Pixel, k: &CameraIntrinsics, m: &MountConfig, x_d: f64, z_d: f64) -> Self {
        let (lambda1, lambda2) = lambda12(p, k, m.theta);
        Self {
            lambda1,
            lambda2,
            lambda3: lambda2 * m.h - lambda1 * x_d,
            lambda4: m.h - lambda1 * z_d,
        }
    }
}

/// Rotation about the forward (Z) axis taking vehicle coordinates into
/// camera coordinates.
pub fn roll_rotation(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(
        c, s, 0.0, //
        -s, c, 0.0, //
        0.0, 0.0, 1.0,
    )
}

/// Inter-frame yaw about the vertical (Y) axis.
pub fn yaw_rotation(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(
        c, 0.0, -s, //
        0.0, 1.0, 0.0, //
        s, 0.0, c,
    )
}

/// Returns `(lambda1, lambda2)` for a pixel.
///
/// `lambda1` is the Y component of the pixel's viewing ray expressed in the
/// vehicle frame (with unit Z); it is positive exactly below the horizon.
#[inline]
pub fn lambda12(p: Pixel, k: &CameraIntrinsics, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    lambda12_sc(p, k, s, c)
}

#[inline]
pub(crate) fn lambda12_sc(p: Pixel, k: &CameraIntrinsics, sin_t: f64, cos_t: f64) -> (f64, f64) {
    let a = (p.u - k.u0) / k.fx;
    let b = (p.v - k.v0) / k.fy;
    (a * sin_t + b * cos_t, a * cos_t - b * sin_t)
}

/// Intersects the viewing ray of `p` with the road plane `y = h`.
pub fn backproject_ground(p: Pixel, k: &CameraIntrinsics, m: &MountConfig) -> Result<GroundPoint> {
    let (l1, l2) = lambda12(p, k, m.theta);
    if !(l1 > EPS_HORIZON) {
        return Err(Error::Horizon { lambda1: l1 });
    }
    let z = m.h / l1;
    Ok(GroundPoint::new(l2 * z, m.h, z))
}

/// Pinhole projection of a vehicle-frame point.
pub fn project(q: GroundPoint, k: &CameraIntrinsics, theta: f64) -> Result<Pixel> {
    let cam = k.matrix() * roll_rotation(theta) * q.to_vector();
    let depth = cam.z;
    if !(depth > 0.0) {
        return Err(Error::BehindCamera { depth });
    }
    Ok(Pixel::new(cam.x / depth, cam.y / depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn kitti_like() -> CameraIntrinsics {
        CameraIntrinsics::new(700.0, 700.0, 600.0, 200.0).unwrap()
    }

    fn assert_mat_close(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= tol, "{a} != {b}");
        }
    }

    #[test]
    fn roll_rotation_special_angles() {
        assert_eq!(roll_rotation(0.0), Matrix3::identity());
        let r = roll_rotation(FRAC_PI_2);
        let expected = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_mat_close(&r, &expected, 1e-15);
    }

    #[test]
    fn yaw_rotation_special_angles() {
        assert_eq!(yaw_rotation(0.0), Matrix3::identity());
        let r = yaw_rotation(std::f64::consts::PI);
        assert_mat_close(
            &r,
            &Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0)),
            1e-15,
        );
    }

    #[test]
    fn rotations_are_orthonormal() {
        for i in 0..200 {
            let a = -1.5 + 3.0 * i as f64 / 199.0;
            for r in [roll_rotation(a), yaw_rotation(a * 2.0)] {
                assert_mat_close(&(r * r.transpose()), &Matrix3::identity(), 1e-12);
                assert!((r.determinant() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda12_examples() {
        let k = kitti_like();
        let (l1, l2) = lambda12(Pixel::new(600.0, 300.0), &k, 0.0);
        assert_eq!((l1, l2), (100.0 / 700.0, 0.0));

        for theta in [-0.3, 0.0, 0.7] {
            let (l1, l2) = lambda12(Pixel::new(k.u0, k.v0), &k, theta);
            assert_eq!(l1, 0.0);
            assert_eq!(l2, 0.0);
        }

        // direct scalar evaluation
        let theta: f64 = 0.1;
        let (l1, l2) = lambda12(Pixel::new(670.0, 340.0), &k, theta);
        let a = 70.0 / 700.0;
        let b = 140.0 / 700.0;
        assert!((l1 - (a * theta.sin() + b * theta.cos())).abs() < 1e-12);
        assert!((l2 - (a * theta.cos() - b * theta.sin())).abs() < 1e-12);
    }

    #[test]
    fn lambda12_without_roll_is_coordinate_ratio() {
        let k = CameraIntrinsics::new(710.0, 690.0, 610.0, 180.0).unwrap();
        let p = Pixel::new(123.25, 301.5);
        let (l1, l2) = lambda12(p, &k, 0.0);
        assert_eq!(l1, (p.v - k.v0) / k.fy);
        assert_eq!(l2, (p.u - k.u0) / k.fx);
    }

    #[test]
    fn backproject_worked_example() {
        let k = kitti_like();
        let m = MountConfig::new(1.5, 0.0).unwrap();
        let g = backproject_ground(Pixel::new(600.0, 300.0), &k, &m).unwrap();
        // ray (0, 100/700, 1) scaled so that y = 1.5
        assert!((g.x - 0.0).abs() < 1e-12);
        assert_eq!(g.y, 1.5);
        assert!((g.z - 10.5).abs() < 1e-12);
    }

    #[test]
    fn backproject_at_principal_point_is_horizon() {
        let k = kitti_like();
        let m = MountConfig::new(1.5, 0.0).unwrap();
        assert!(matches!(
            backproject_ground(Pixel::new(600.0, 200.0), &k, &m),
            Err(Error::Horizon { .. })
        ));
        // rows above the horizon as well
        assert!(backproject_ground(Pixel::new(600.0, 150.0), &k, &m).is_err());
    }

    #[test]
    fn project_examples() {
        let k = kitti_like();
        let p = project(GroundPoint::new(0.0, 1.5, 10.5), &k, 0.0).unwrap();
        assert!((p.u - 600.0).abs() < 1e-12 && (p.v - 300.0).abs() < 1e-12);
        let p = project(GroundPoint::new(0.0, 0.0, 1.0), &k, 0.0).unwrap();
        assert_eq!((p.u, p.v), (k.u0, k.v0));
        assert!(matches!(
            project(GroundPoint::new(0.0, 1.0, -1.0), &k, 0.0),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(CameraIntrinsics::new(0.0, 700.0, 1.0, 1.0).is_err());
        assert!(CameraIntrinsics::new(700.0, 700.0, f64::NAN, 1.0).is_err());
        assert!(MountConfig::new(-1.0, 0.0).is_err());
        assert!(MountConfig::new(1.0, FRAC_PI_2).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn backprojection_round_trips(
                u in 0.0f64..1242.0,
                v in 0.0f64..375.0,
                theta in -0.4f64..0.4,
                h in 0.5f64..2.5,
                f in 400.0f64..1200.0,
            ) {
                let k = CameraIntrinsics::new(f, f * 1.01, 621.0, 172.0).unwrap();
                let m = MountConfig::new(h, theta).unwrap();
                let p = Pixel::new(u, v);
                let (l1, _) = lambda12(p, &k, theta);
                match backproject_ground(p, &k, &m) {
                    Ok(g) => {
                        prop_assert!(l1 > EPS_HORIZON);
                        prop_assert_eq!(g.y, h);
                        prop_assert_eq!(g.z, h / l1);
                        let back = project(g, &k, theta).unwrap();
                        prop_assert!((back.u - u).abs() < 1e-9 && (back.v - v).abs() < 1e-9);
                    }
                    Err(Error::Horizon { .. }) => prop_assert!(l1 <= EPS_HORIZON),
                    Err(e) => prop_assert!(false, "unexpected error {e}"),
                }
            }
        }
    }
}
