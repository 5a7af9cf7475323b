//! Synthetic road scenes.
//!
//! [`flow_oracle`] computes flow the long way: cast the pixel's ray, hit the
//! road plane, move the point into the second camera frame and project it
//! again. It shares no algebra with the closed forms in
//! [`crate::flow_models`] and is what they are checked against.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::FreespaceMask;
use crate::flow_models::{FlowMap, FlowVector, PoseDelta, Units};
use crate::geometry::{
    roll_rotation, yaw_rotation, CameraIntrinsics, GroundPoint, MountConfig, Pixel, EPS_HORIZON,
};

/// Name of the noise generator, recorded alongside generated data.
pub const NOISE_ALGORITHM: &str = "ChaCha8 (stream = row) + ziggurat standard normal";

/// A camera looking at a bounded patch of flat road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub intrinsics: CameraIntrinsics,
    pub mount: MountConfig,
    pub width: usize,
    pub height: usize,
    /// Road patch spans `|x| <= lateral_extent`, meters.
    pub lateral_extent: f64,
    /// Road patch spans `0 < z <= longitudinal_extent`, meters.
    pub longitudinal_extent: f64,
    /// Grid spacing of the sampled road points, meters.
    pub grid_step: f64,
}

impl SceneSpec {
    pub fn new(
        intrinsics: CameraIntrinsics,
        mount: MountConfig,
        width: usize,
        height: usize,
    ) -> Self {
        Self {
            intrinsics,
            mount,
            width,
            height,
            lateral_extent: 10.0,
            longitudinal_extent: 50.0,
            grid_step: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.mount.validate()?;
        if !(self.lateral_extent > 0.0 && self.longitudinal_extent > 0.0 && self.grid_step > 0.0) {
            return Err(Error::InvalidParameter(
                "scene extents and grid step must be positive".into(),
            ));
        }
        Ok(())
    }

    fn contains(&self, g: &GroundPoint) -> bool {
        g.x.abs() <= self.lateral_extent && g.z > 0.0 && g.z <= self.longitudinal_extent
    }

    /// Uniform grid of road points `(x, h, z)` covering the patch.
    pub fn plane_samples(&self) -> Vec<GroundPoint> {
        let nx = (self.lateral_extent / self.grid_step).floor() as i64;
        let nz = (self.longitudinal_extent / self.grid_step).floor() as i64;
        let mut out = Vec::with_capacity(((2 * nx + 1) * nz.max(0)) as usize);
        for iz in 1..=nz {
            for ix in -nx..=nx {
                out.push(GroundPoint::new(
                    ix as f64 * self.grid_step,
                    self.mount.h,
                    iz as f64 * self.grid_step,
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation, pixels.
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub u: usize,
    pub v: usize,
    pub width: usize,
    pub height: usize,
}

fn ray_ground_point(p: Pixel, k: &CameraIntrinsics, m: &MountConfig) -> Result<Vector3<f64>> {
    let k_inv = k
        .matrix()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular intrinsics".into()))?;
    let ray = roll_rotation(m.theta).transpose() * (k_inv * Vector3::new(p.u, p.v, 1.0));
    let ray = ray / ray.z;
    if !(ray.y > EPS_HORIZON) {
        return Err(Error::Horizon { lambda1: ray.y });
    }
    Ok(ray * (m.h / ray.y))
}

fn project_camera(q: &Vector3<f64>, k: &CameraIntrinsics) -> Result<Pixel> {
    let img = k.matrix() * q;
    if !(q.z > 0.0) {
        return Err(Error::BehindCamera { depth: q.z });
    }
    Ok(Pixel::new(img.x / img.z, img.y / img.z))
}

/// Flow of `p` under motion `d`, by back-projection, rigid transform and
/// re-projection.
pub fn flow_oracle(
    p: Pixel,
    k: &CameraIntrinsics,
    m: &MountConfig,
    d: &PoseDelta,
) -> Result<FlowVector> {
    let ground = ray_ground_point(p, k, m)?;
    let first = project_camera(&(roll_rotation(m.theta) * ground), k)?;
    let moved =
        roll_rotation(m.theta) * yaw_rotation(d.phi) * (ground - Vector3::new(d.x_d, 0.0, d.z_d));
    let second = project_camera(&moved, k)?;
    Ok(FlowVector::new(second.u - first.u, second.v - first.v))
}

/// Dense displacement flow over every pixel whose ray lands inside the road
/// patch; other pixels are invalid.
pub fn synth_ground_truth(spec: &SceneSpec, d: &PoseDelta) -> Result<FlowMap> {
    spec.validate()?;
    let (k, m) = (&spec.intrinsics, &spec.mount);
    let mut map = FlowMap::new(spec.width, spec.height, Units::PixelsPerFrame);
    let w = spec.width.max(1);
    map.fu
        .par_chunks_mut(w)
        .zip(map.fv.par_chunks_mut(w))
        .zip(map.valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(v, ((fu, fv), valid))| {
            for u in 0..fu.len() {
                let p = Pixel::new(u as f64, v as f64);
                let Ok(g) = ray_ground_point(p, k, m) else {
                    continue;
                };
                if !spec.contains(&GroundPoint::from_vector(&g)) {
                    continue;
                }
                if let Ok(f) = flow_oracle(p, k, m, d) {
                    if f.is_finite() {
                        fu[u] = f.fu;
                        fv[u] = f.fv;
                        valid[u] = true;
                    }
                }
            }
        });
    Ok(map)
}

/// Projects the sampled road grid into both frames. Returns the first-frame
/// pixel and its flow for every grid point visible in both images.
pub fn synth_sparse(spec: &SceneSpec, d: &PoseDelta) -> Result<Vec<(Pixel, FlowVector)>> {
    spec.validate()?;
    let (k, m) = (&spec.intrinsics, &spec.mount);
    let r_theta = roll_rotation(m.theta);
    let r_phi = yaw_rotation(d.phi);
    let t = Vector3::new(d.x_d, 0.0, d.z_d);
    let inside = |p: &Pixel| {
        p.u >= 0.0
            && p.v >= 0.0
            && p.u <= (spec.width - 1) as f64
            && p.v <= (spec.height - 1) as f64
    };
    Ok(spec
        .plane_samples()
        .into_iter()
        .filter_map(|g| {
            let g = g.to_vector();
            let a = project_camera(&(r_theta * g), k).ok()?;
            let b = project_camera(&(r_theta * r_phi * (g - t)), k).ok()?;
            (inside(&a) && inside(&b)).then(|| (a, FlowVector::new(b.u - a.u, b.v - a.v)))
        })
        .collect())
}

/// Adds i.i.d. Gaussian noise to both channels of valid pixels.
///
/// Row `v` draws from its own ChaCha8 stream, two normals per pixel in
/// column order (`fu` then `fv`), whether or not the pixel is valid. The
/// output therefore depends only on `(seed, u, v, channel)`.
pub fn add_noise(f: &FlowMap, n: &NoiseSpec) -> Result<FlowMap> {
    if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be non-negative (sigma = {})",
            n.sigma
        )));
    }
    let mut out = f.clone();
    if n.sigma == 0.0 {
        return Ok(out);
    }
    let w = f.width.max(1);
    out.fu
        .par_chunks_mut(w)
        .zip(out.fv.par_chunks_mut(w))
        .zip(out.valid.par_chunks(w))
        .enumerate()
        .for_each(|(v, ((fu, fv), valid))| {
            let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
            rng.set_stream(v as u64);
            for u in 0..fu.len() {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                if valid[u] {
                    fu[u] += n.sigma * a;
                    fv[u] += n.sigma * b;
                }
            }
        });
    Ok(out)
}

/// Adds `offset` to the flow inside `rect` and returns the map together with
/// the ground-truth freespace mask (valid pixels outside the rectangle).
pub fn insert_obstacle(
    f: &FlowMap,
    rect: Rect,
    offset: FlowVector,
) -> Result<(FlowMap, FreespaceMask)> {
    let fits = rect.u.checked_add(rect.width).is_some_and(|e| e <= f.width)
        && rect
            .v
            .checked_add(rect.height)
            .is_some_and(|e| e <= f.height);
    if !fits {
        return Err(Error::OutOfBounds {
            rect: (rect.u, rect.v, rect.width, rect.height),
            width: f.width,
            height: f.height,
        });
    }
    let mut out = f.clone();
    let mut truth = FreespaceMask::from_valid(f);
    for v in rect.v..rect.v + rect.height {
        for u in rect.u..rect.u + rect.width {
            let i = v * f.width + u;
            truth.mask[i] = false;
            if out.valid[i] {
                out.fu[i] += offset.fu;
                out.fv[i] += offset.fv;
            }
        }
    }
    Ok((out, truth))
}
