//! Vehicle motion from road flow.
//!
//! The displacement model is inverted by global-best particle swarm
//! optimisation over `(x_d, z_d, phi)`, minimising the mean endpoint error
//! between the model and the observed flow on the freespace mask.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::FreespaceMask;
use crate::flow_models::{FlowMap, FlowModel, ModelField, PoseDelta};
use crate::geometry::{CameraIntrinsics, MountConfig, Pixel};
use crate::metrics::CompensatedSum;

/// Cost charged for a pixel where the candidate model is undefined.
pub const UNDEFINED_PENALTY: f64 = 1e3;

/// Iterations over which the best cost must improve by at least the
/// tolerance to count as still progressing.
pub const STALL_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn span(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseSearchConfig {
    /// meters
    pub x_d: Bounds,
    /// meters
    pub z_d: Bounds,
    /// radians
    pub phi: Bounds,
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Minimum best-cost improvement over [`STALL_WINDOW`] iterations, pixels.
    pub tolerance: f64,
    pub seed: u64,
    /// Upper bound on the observation pixels entering the cost; larger masks
    /// are thinned with a regular stride. `0` keeps every pixel.
    pub max_samples: usize,
    /// Polish the swarm's best pose with damped Gauss-Newton on the flow
    /// residuals; the polished pose is kept only if its cost is lower.
    pub refine: bool,
}

impl Default for PoseSearchConfig {
    fn default() -> Self {
        Self {
            x_d: Bounds::new(-1.0, 1.0),
            z_d: Bounds::new(0.0, 5.0),
            phi: Bounds::new(-10f64.to_radians(), 10f64.to_radians()),
            swarm_size: 50,
            max_iterations: 200,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            tolerance: 1e-12,
            seed: 0,
            max_samples: 4096,
            refine: true,
        }
    }
}

impl PoseSearchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("x_d", self.x_d), ("z_d", self.z_d), ("phi", self.phi)] {
            if !(b.lo < b.hi && b.lo.is_finite() && b.hi.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "bounds for {name} must satisfy lo < hi"
                )));
            }
        }
        if self.swarm_size < 2 {
            return Err(Error::InvalidParameter(
                "swarm size must be at least 2".into(),
            ));
        }
        if !(self.inertia > 0.0 && self.cognitive > 0.0 && self.social > 0.0) {
            return Err(Error::InvalidParameter(
                "PSO coefficients must be positive".into(),
            ));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter(
                "tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn bounds(&self) -> [Bounds; 3] {
        [self.x_d, self.z_d, self.phi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub pose: PoseDelta,
    /// Mean endpoint error of the best pose, pixels.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Observed flow at the masked pixels, flattened for fast cost evaluation.
#[derive(Debug, Clone)]
pub struct Observations {
    samples: Vec<(Pixel, f64, f64)>,
}

impl Observations {
    /// Collects pixels that are valid in `observed` and set in `mask`,
    /// keeping every `stride`-th one when `max_samples` would be exceeded.
    pub fn collect(
        observed: &FlowMap,
        mask: Option<&FreespaceMask>,
        max_samples: usize,
    ) -> Result<Self> {
        if let Some(m) = mask {
            m.ensure_dims(observed.width, observed.height)?;
        }
        let selected: Vec<usize> = (0..observed.len())
            .filter(|&i| observed.valid[i] && mask.is_none_or(|m| m.mask[i]))
            .collect();
        if selected.is_empty() {
            return Err(Error::EmptyOverlap);
        }
        let stride = if max_samples == 0 {
            1
        } else {
            selected.len().div_ceil(max_samples)
        };
        let samples = selected
            .into_iter()
            .step_by(stride)
            .map(|i| {
                let p = Pixel::new((i % observed.width) as f64, (i / observed.width) as f64);
                (p, observed.fu[i], observed.fv[i])
            })
            .collect();
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn cost(&self, field: &ModelField) -> f64 {
        let mut sum = CompensatedSum::default();
        for &(p, fu, fv) in &self.samples {
            sum.add(match field.flow_at(p) {
                Ok(f) if f.is_finite() => {
                    let (du, dv) = (f.fu - fu, f.fv - fv);
                    (du * du + dv * dv).sqrt()
                }
                _ => UNDEFINED_PENALTY,
            });
        }
        sum.value() / self.samples.len() as f64
    }
}

fn candidate_cost(
    obs: &Observations,
    d: PoseDelta,
    k: &CameraIntrinsics,
    m: &MountConfig,
) -> Result<f64> {
    Ok(obs.cost(&FlowModel::FullDisp(d).field(k, m)?))
}

/// Mean endpoint error between the displacement model at `candidate` and the
/// observed flow over `mask ∧ observed.valid`.
pub fn pose_cost(
    candidate: &PoseDelta,
    observed: &FlowMap,
    mask: Option<&FreespaceMask>,
    k: &CameraIntrinsics,
    m: &MountConfig,
) -> Result<f64> {
    let obs = Observations::collect(observed, mask, 0)?;
    candidate_cost(&obs, *candidate, k, m)
}

fn to_pose(x: &[f64; 3]) -> PoseDelta {
    PoseDelta::new(x[0], x[1], x[2])
}

/// Global-best PSO over `(x_d, z_d, phi)` inside the configured bounds.
///
/// Velocities are clamped to 20 % of each bound's span and positions to the
/// bounds. The search stops at the iteration cap or once the best cost has
/// improved by less than `tolerance` over the last [`STALL_WINDOW`]
/// iterations, which is what `converged` reports. With `cfg.refine` the best
/// pose is then polished locally (see [`PoseSearchConfig::refine`]).
pub fn estimate_pose(
    observed: &FlowMap,
    mask: Option<&FreespaceMask>,
    k: &CameraIntrinsics,
    m: &MountConfig,
    cfg: &PoseSearchConfig,
) -> Result<PoseEstimate> {
    cfg.validate()?;
    k.validate()?;
    m.validate()?;
    let obs = Observations::collect(observed, mask, cfg.max_samples)?;
    estimate_pose_from(&obs, k, m, cfg)
}

/// [`estimate_pose`] on pre-collected observations.
pub fn estimate_pose_from(
    obs: &Observations,
    k: &CameraIntrinsics,
    m: &MountConfig,
    cfg: &PoseSearchConfig,
) -> Result<PoseEstimate> {
    let mut history = Vec::new();
    run_swarm(obs, k, m, cfg, &mut history)
}

/// Same as [`estimate_pose_from`], also returning the best cost after
/// initialisation and after every iteration, plus one final entry when the
/// refinement improved on the swarm.
pub fn estimate_pose_traced(
    obs: &Observations,
    k: &CameraIntrinsics,
    m: &MountConfig,
    cfg: &PoseSearchConfig,
) -> Result<(PoseEstimate, Vec<f64>)> {
    let mut history = Vec::new();
    let est = run_swarm(obs, k, m, cfg, &mut history)?;
    Ok((est, history))
}

struct Particle {
    x: [f64; 3],
    vel: [f64; 3],
    best_x: [f64; 3],
    best_cost: f64,
}

fn run_swarm(
    obs: &Observations,
    k: &CameraIntrinsics,
    m: &MountConfig,
    cfg: &PoseSearchConfig,
    history: &mut Vec<f64>,
) -> Result<PoseEstimate> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let bounds = cfg.bounds();
    let vmax: [f64; 3] = std::array::from_fn(|j| 0.2 * bounds[j].span());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut swarm: Vec<Particle> = (0..cfg.swarm_size)
        .map(|_| {
            let x: [f64; 3] = std::array::from_fn(|j| rng.gen_range(bounds[j].lo..=bounds[j].hi));
            let vel: [f64; 3] = std::array::from_fn(|j| rng.gen_range(-vmax[j]..=vmax[j]));
            Particle {
                x,
                vel,
                best_x: x,
                best_cost: f64::INFINITY,
            }
        })
        .collect();

    let evaluate = |swarm: &mut Vec<Particle>| -> Result<()> {
        let costs: Vec<Result<f64>> = swarm
            .par_iter()
            .map(|p| candidate_cost(obs, to_pose(&p.x), k, m))
            .collect();
        for (p, c) in swarm.iter_mut().zip(costs) {
            let c = c?;
            if c < p.best_cost {
                p.best_cost = c;
                p.best_x = p.x;
            }
        }
        Ok(())
    };
    // lowest cost wins, ties go to the lowest index
    let global_best = |swarm: &[Particle]| -> Option<(f64, [f64; 3])> {
        swarm.iter().filter(|p| p.best_cost.is_finite()).fold(
            None,
            |acc: Option<(f64, [f64; 3])>, p| match acc {
                Some((c, _)) if c <= p.best_cost => acc,
                _ => Some((p.best_cost, p.best_x)),
            },
        )
    };

    evaluate(&mut swarm)?;
    let (mut best_cost, mut best_x) = global_best(&swarm).ok_or(Error::NonFinite)?;
    history.push(best_cost);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        for p in swarm.iter_mut() {
            for j in 0..3 {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = cfg.inertia * p.vel[j]
                    + cfg.cognitive * r1 * (p.best_x[j] - p.x[j])
                    + cfg.social * r2 * (best_x[j] - p.x[j]);
                p.vel[j] = v.clamp(-vmax[j], vmax[j]);
                p.x[j] = (p.x[j] + p.vel[j]).clamp(bounds[j].lo, bounds[j].hi);
            }
        }
        evaluate(&mut swarm)?;
        iterations += 1;
        if let Some((c, x)) = global_best(&swarm) {
            if c < best_cost {
                best_cost = c;
                best_x = x;
            }
        }
        history.push(best_cost);
        if history.len() > STALL_WINDOW {
            let before = history[history.len() - 1 - STALL_WINDOW];
            if before - best_cost < cfg.tolerance {
                converged = true;
                break;
            }
        }
    }

    if cfg.refine {
        let (x, c) = refine(obs, k, m, &bounds, best_x, best_cost)?;
        if c < best_cost {
            best_x = x;
            best_cost = c;
            history.push(best_cost);
        }
    }

    Ok(PoseEstimate {
        pose: to_pose(&best_x),
        cost: best_cost,
        iterations,
        converged,
    })
}

const REFINE_ITERATIONS: usize = 50;
const REFINE_STEPS: [f64; 3] = [1e-6, 1e-6, 1e-7];

/// Levenberg-Marquardt on the stacked `(fu, fv)` residuals, starting at the
/// swarm's best. Central-difference Jacobian; undefined pixels are charged
/// the squared penalty and left out of the normal equations.
fn refine(
    obs: &Observations,
    k: &CameraIntrinsics,
    m: &MountConfig,
    bounds: &[Bounds; 3],
    x0: [f64; 3],
    cost0: f64,
) -> Result<([f64; 3], f64)> {
    let clamp = |x: [f64; 3]| -> [f64; 3] {
        std::array::from_fn(|j| x[j].clamp(bounds[j].lo, bounds[j].hi))
    };
    let field = |x: &[f64; 3]| FlowModel::FullDisp(to_pose(x)).field(k, m);
    let sse = |x: &[f64; 3]| -> Result<f64> {
        let f = field(x)?;
        let mut s = CompensatedSum::default();
        for &(p, fu, fv) in &obs.samples {
            s.add(match f.flow_at(p) {
                Ok(g) if g.is_finite() => (g.fu - fu).powi(2) + (g.fv - fv).powi(2),
                _ => UNDEFINED_PENALTY * UNDEFINED_PENALTY,
            });
        }
        Ok(s.value())
    };

    let mut x = x0;
    let mut current = sse(&x)?;
    let mut lambda = 1e-3;
    for _ in 0..REFINE_ITERATIONS {
        let centre = field(&x)?;
        let probes: Vec<(ModelField, ModelField)> = (0..3)
            .map(|j| {
                let (mut hi, mut lo) = (x, x);
                hi[j] += REFINE_STEPS[j];
                lo[j] -= REFINE_STEPS[j];
                Ok((field(&hi)?, field(&lo)?))
            })
            .collect::<Result<_>>()?;
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for &(p, fu, fv) in &obs.samples {
            let Ok(g) = centre.flow_at(p) else { continue };
            let mut ju = Vector3::zeros();
            let mut jv = Vector3::zeros();
            let mut ok = g.is_finite();
            for (j, (hi, lo)) in probes.iter().enumerate() {
                match (hi.flow_at(p), lo.flow_at(p)) {
                    (Ok(a), Ok(b)) => {
                        ju[j] = (a.fu - b.fu) / (2.0 * REFINE_STEPS[j]);
                        jv[j] = (a.fv - b.fv) / (2.0 * REFINE_STEPS[j]);
                    }
                    _ => ok = false,
                }
            }
            if !ok {
                continue;
            }
            jtj += ju * ju.transpose() + jv * jv.transpose();
            jtr += ju * (g.fu - fu) + jv * (g.fv - fv);
        }
        if jtr.norm() == 0.0 {
            break;
        }
        let mut stepped = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for j in 0..3 {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = clamp(std::array::from_fn(|j| x[j] + delta[j]));
            let s = sse(&candidate)?;
            if s < current {
                let moved = (0..3).any(|j| candidate[j] != x[j]);
                x = candidate;
                current = s;
                lambda = (lambda / 10.0).max(1e-12);
                stepped = moved;
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            break;
        }
    }
    let cost = obs.cost(&field(&x)?);
    if cost < cost0 {
        Ok((x, cost))
    } else {
        Ok((x0, cost0))
    }
}
