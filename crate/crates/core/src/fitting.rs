//! Row-wise analysis of the vertical flow channel.
//!
//! On a flat road seen without roll, `F_v` depends on the image row only.
//! Each row is summarised by the mode of its `F_v` histogram (a V-Disparity
//! style projection), a one- or three-parameter curve is fitted to the row
//! representatives, and the fitted curve is broadcast back into a map.
//! Pixels whose observed `F_v` stays within `tau` of the fitted map are
//! labelled freespace.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_models::{FlowMap, Units};
use crate::geometry::CameraIntrinsics;

/// Per-pixel freespace labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreespaceMask {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
}

impl FreespaceMask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            mask: vec![value; width * height],
        }
    }

    /// Mask of the valid pixels of a flow map.
    pub fn from_valid(f: &FlowMap) -> Self {
        Self {
            width: f.width,
            height: f.height,
            mask: f.valid.clone(),
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.mask[v * self.width + u]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn ensure_dims(&self, width: usize, height: usize) -> Result<()> {
        if (self.width, self.height) != (width, height) {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (self.width, self.height),
            });
        }
        Ok(())
    }
}

/// Row histogram settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionParams {
    /// Histogram bin width, pixels.
    pub bin_w: f64,
    /// Rows with fewer valid samples get no representative.
    pub min_row_support: usize,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self {
            bin_w: 0.25,
            min_row_support: 10,
        }
    }
}

/// One representative `F_v` per image row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowProjection {
    pub width: usize,
    pub height: usize,
    pub units: Units,
    /// Indexed by row; `None` where support is below the threshold.
    pub representative: Vec<Option<f64>>,
    /// Number of valid (and unmasked) samples in each row.
    pub support: Vec<usize>,
}

impl RowProjection {
    /// `(row, representative)` of every populated row, top to bottom.
    pub fn populated(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.representative
            .iter()
            .enumerate()
            .filter_map(|(v, r)| r.map(|x| (v, x)))
    }

    /// First and last populated rows.
    pub fn row_range(&self) -> Option<(usize, usize)> {
        let mut it = self.populated().map(|(v, _)| v);
        let first = it.next()?;
        Some((first, it.last().unwrap_or(first)))
    }
}

/// Builds the row projection of `f.fv`, optionally restricted to `mask`.
pub fn row_projection(
    f: &FlowMap,
    mask: Option<&FreespaceMask>,
    params: &ProjectionParams,
) -> Result<RowProjection> {
    if !(params.bin_w > 0.0 && params.bin_w.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bin width must be positive (bin_w = {})",
            params.bin_w
        )));
    }
    if let Some(m) = mask {
        m.ensure_dims(f.width, f.height)?;
    }
    let mut representative = Vec::with_capacity(f.height);
    let mut support = Vec::with_capacity(f.height);
    let mut any = false;
    let mut row = Vec::with_capacity(f.width);
    for v in 0..f.height {
        row.clear();
        for u in 0..f.width {
            let i = v * f.width + u;
            if f.valid[i] && mask.is_none_or(|m| m.mask[i]) && f.fv[i].is_finite() {
                row.push(f.fv[i]);
            }
        }
        any |= !row.is_empty();
        support.push(row.len());
        if row.len() >= params.min_row_support.max(1) {
            representative.push(Some(row_mode(&mut row, params.bin_w)));
        } else {
            representative.push(None);
        }
    }
    if !any {
        return Err(Error::EmptyInput);
    }
    Ok(RowProjection {
        width: f.width,
        height: f.height,
        units: f.units,
        representative,
        support,
    })
}

/// Mode of a row's values: the fullest histogram bin (lowest bin on ties),
/// refined by a flat-kernel mean shift of half-width `bin_w`.
///
/// The values are sorted first, which makes the result independent of the
/// column order.
fn row_mode(values: &mut [f64], bin_w: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let bin = |x: f64| (x / bin_w).floor() as i64;
    let (mut best_bin, mut best_count) = (bin(values[0]), 0usize);
    let mut i = 0;
    while i < values.len() {
        let b = bin(values[i]);
        let start = i;
        while i < values.len() && bin(values[i]) == b {
            i += 1;
        }
        if i - start > best_count {
            best_count = i - start;
            best_bin = b;
        }
    }
    let mut centre = (best_bin as f64 + 0.5) * bin_w;
    for _ in 0..32 {
        let lo = values.partition_point(|&x| x < centre - bin_w);
        let hi = values.partition_point(|&x| x <= centre + bin_w);
        if lo == hi {
            break;
        }
        let window = &values[lo..hi];
        let next = window.iter().sum::<f64>() / window.len() as f64;
        let done = (next - centre).abs() <= 1e-12 * centre.abs().max(1.0);
        centre = next;
        if done {
            break;
        }
    }
    centre
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    /// `f(v) = k w^2 / (1 - k w)`, `w = v - v0`: straight-driving displacement.
    #[default]
    RationalDisplacement,
    /// `f(v) = a w^2`: straight-driving velocity.
    QuadraticVelocity,
    /// `f(v) = a v^2 + b v + c`, no intrinsics needed.
    GenericQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveParams {
    RationalDisplacement { k: f64, v0: f64 },
    QuadraticVelocity { a: f64, v0: f64 },
    GenericQuadratic { a: f64, b: f64, c: f64 },
}

impl CurveParams {
    pub fn kind(&self) -> CurveKind {
        match self {
            CurveParams::RationalDisplacement { .. } => CurveKind::RationalDisplacement,
            CurveParams::QuadraticVelocity { .. } => CurveKind::QuadraticVelocity,
            CurveParams::GenericQuadratic { .. } => CurveKind::GenericQuadratic,
        }
    }

    /// Curve value at row `v`, or `None` where the curve is undefined
    /// (above the horizon for the physical forms, past the pole of the
    /// rational form).
    pub fn eval(&self, v: f64) -> Option<f64> {
        match *self {
            CurveParams::RationalDisplacement { k, v0 } => {
                let w = v - v0;
                let denom = 1.0 - k * w;
                (w > 0.0 && denom > 0.0).then(|| k * w * w / denom)
            }
            CurveParams::QuadraticVelocity { a, v0 } => {
                let w = v - v0;
                (w > 0.0).then_some(a * w * w)
            }
            CurveParams::GenericQuadratic { a, b, c } => Some((a * v + b) * v + c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub params: CurveParams,
    /// Residual RMS over inlier rows, pixels.
    pub residual_rms: f64,
    pub inliers: usize,
    /// Rows that entered the fit.
    pub rows_used: usize,
    pub units: Units,
}

/// Least-squares fit of the row representatives, followed by one Tukey
/// reweighting pass (`c = 3 * RMS`) to drop rows dominated by obstacles.
pub fn fit_fv_curve(rp: &RowProjection, k: &CameraIntrinsics, kind: CurveKind) -> Result<CurveFit> {
    let needs_horizon = kind != CurveKind::GenericQuadratic;
    let samples: Vec<(f64, f64)> = rp
        .populated()
        .map(|(v, f)| (v as f64, f))
        .filter(|&(v, _)| !needs_horizon || v - k.v0 > 0.0)
        .collect();
    let needed = match kind {
        CurveKind::GenericQuadratic => 3,
        _ => 1,
    };
    if samples.len() < needed {
        return Err(Error::InsufficientRows {
            needed,
            got: samples.len(),
        });
    }

    let uniform = vec![1.0; samples.len()];
    let first = solve(&samples, &uniform, k, kind)?;
    let residuals = |p: &CurveParams| -> Vec<f64> {
        samples
            .iter()
            .map(|&(v, f)| p.eval(v).map_or(f64::INFINITY, |g| f - g))
            .collect()
    };
    let r0 = residuals(&first);
    let rms0 = rms(r0.iter().copied());

    let (params, res) = if rms0 > 0.0 && rms0.is_finite() {
        let c = 3.0 * rms0;
        let weights: Vec<f64> = r0
            .iter()
            .map(|r| {
                let t = r / c;
                if t.abs() < 1.0 {
                    (1.0 - t * t).powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        let used = weights.iter().filter(|&&w| w > 0.0).count();
        match (used >= needed).then(|| solve(&samples, &weights, k, kind)) {
            Some(Ok(p)) => {
                let r = residuals(&p);
                (
                    p,
                    r.into_iter()
                        .zip(weights)
                        .map(|(r, w)| (r, w > 0.0))
                        .collect(),
                )
            }
            _ => (first, r0.into_iter().map(|r| (r, true)).collect::<Vec<_>>()),
        }
    } else {
        (first, r0.into_iter().map(|r| (r, true)).collect::<Vec<_>>())
    };

    let inlier_res: Vec<f64> = res
        .iter()
        .filter(|(_, keep)| *keep)
        .map(|(r, _)| *r)
        .collect();
    Ok(CurveFit {
        params,
        residual_rms: rms(inlier_res.iter().copied()),
        inliers: inlier_res.len(),
        rows_used: samples.len(),
        units: rp.units,
    })
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), r| (s + r * r, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn solve(
    samples: &[(f64, f64)],
    weights: &[f64],
    k: &CameraIntrinsics,
    kind: CurveKind,
) -> Result<CurveParams> {
    match kind {
        CurveKind::QuadraticVelocity => {
            let (num, den) =
                samples
                    .iter()
                    .zip(weights)
                    .fold((0.0, 0.0), |(n, d), (&(v, f), &wt)| {
                        let w2 = (v - k.v0).powi(2);
                        (n + wt * f * w2, d + wt * w2 * w2)
                    });
            if !(den > 0.0) {
                return Err(Error::DegenerateFit(
                    "no weighted rows below the horizon".into(),
                ));
            }
            Ok(CurveParams::QuadraticVelocity {
                a: num / den,
                v0: k.v0,
            })
        }
        CurveKind::RationalDisplacement => fit_rational(samples, weights, k.v0),
        CurveKind::GenericQuadratic => {
            // centred and scaled abscissa for conditioning
            let total: f64 = weights.iter().sum();
            let mean = samples
                .iter()
                .zip(weights)
                .map(|(s, w)| s.0 * w)
                .sum::<f64>()
                / total;
            let scale = samples
                .iter()
                .map(|s| (s.0 - mean).abs())
                .fold(0.0, f64::max)
                .max(1.0);
            let n = samples.len();
            let mut a = DMatrix::<f64>::zeros(n, 3);
            let mut b = DVector::<f64>::zeros(n);
            for (i, (&(v, f), &wt)) in samples.iter().zip(weights).enumerate() {
                let s = (v - mean) / scale;
                let sw = wt.sqrt();
                a[(i, 0)] = sw * s * s;
                a[(i, 1)] = sw * s;
                a[(i, 2)] = sw;
                b[i] = sw * f;
            }
            let svd = a.svd(true, true);
            let sv = &svd.singular_values;
            let (smax, smin) = (sv.max(), sv.min());
            if !(smin > 1e-10 * smax) {
                return Err(Error::DegenerateFit(
                    "rows do not determine a quadratic".into(),
                ));
            }
            let x = svd
                .solve(&b, 0.0)
                .map_err(|e| Error::DegenerateFit(e.to_string()))?;
            // expand alpha s^2 + beta s + gamma with s = (v - mean) / scale
            let (al, be, ga) = (x[0] / (scale * scale), x[1] / scale, x[2]);
            Ok(CurveParams::GenericQuadratic {
                a: al,
                b: be - 2.0 * al * mean,
                c: al * mean * mean - be * mean + ga,
            })
        }
    }
}

/// Rational fit `f = k w^2 / (1 - k w)`.
///
/// Multiplying out gives `f = k (w^2 + f w)`, which is linear in `k` and
/// seeds a Gauss-Newton refinement on the actual residuals.
fn fit_rational(samples: &[(f64, f64)], weights: &[f64], v0: f64) -> Result<CurveParams> {
    let (num, den) = samples
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(n, d), (&(v, f), &wt)| {
            let w = v - v0;
            let g = w * w + f * w;
            (n + wt * f * g, d + wt * g * g)
        });
    if !(den > 0.0) {
        return Err(Error::DegenerateFit(
            "no weighted rows below the horizon".into(),
        ));
    }
    let w_max = samples
        .iter()
        .zip(weights)
        .filter(|(_, &wt)| wt > 0.0)
        .map(|(s, _)| s.0 - v0)
        .fold(0.0, f64::max);
    // keep 1 - k w > 0 over the fitted rows
    let k_limit = (1.0 - 1e-9) / w_max;
    let mut k = (num / den).min(k_limit);

    let objective = |k: f64| -> f64 {
        samples
            .iter()
            .zip(weights)
            .map(|(&(v, f), &wt)| {
                let w = v - v0;
                let r = f - k * w * w / (1.0 - k * w);
                wt * r * r
            })
            .sum()
    };
    let mut cost = objective(k);
    for _ in 0..50 {
        let (mut jtr, mut jtj) = (0.0, 0.0);
        for (&(v, f), &wt) in samples.iter().zip(weights) {
            let w = v - v0;
            let denom = 1.0 - k * w;
            let r = f - k * w * w / denom;
            let j = w * w / (denom * denom);
            jtr += wt * j * r;
            jtj += wt * j * j;
        }
        if !(jtj > 0.0) {
            break;
        }
        let mut step = jtr / jtj;
        // backtrack into the feasible region and onto a decrease
        let mut accepted = false;
        for _ in 0..40 {
            let cand = k + step;
            if cand < k_limit {
                let c = objective(cand);
                if c <= cost {
                    let small = (cand - k).abs() <= 1e-15 * k.abs().max(1e-12);
                    k = cand;
                    cost = c;
                    accepted = !small;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !k.is_finite() {
        return Err(Error::DegenerateFit("rational fit diverged".into()));
    }
    Ok(CurveParams::RationalDisplacement { k, v0 })
}

/// Broadcasts the fitted curve across each row. `fu` is zero; rows where
/// the curve is undefined are invalid.
pub fn render_fitted_fv(fit: &CurveFit, width: usize, height: usize) -> FlowMap {
    let mut map = FlowMap::new(width, height, fit.units);
    for v in 0..height {
        if let Some(f) = fit.params.eval(v as f64).filter(|f| f.is_finite()) {
            let row = v * width..(v + 1) * width;
            map.fv[row.clone()].fill(f);
            map.valid[row].fill(true);
        }
    }
    map
}

/// Freespace where both maps are valid and `|F_v - fitted F_v| <= tau`.
pub fn segment_freespace(observed: &FlowMap, fitted: &FlowMap, tau: f64) -> Result<FreespaceMask> {
    observed.ensure_compatible(fitted)?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must be non-negative (tau = {tau})"
        )));
    }
    let mask = (0..observed.len())
        .map(|i| {
            observed.valid[i] && fitted.valid[i] && (observed.fv[i] - fitted.fv[i]).abs() <= tau
        })
        .collect();
    Ok(FreespaceMask {
        width: observed.width,
        height: observed.height,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_models::{render_flow_map, FlowModel, SimplestMotion};
    use crate::geometry::MountConfig;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(700.0, 700.0, 600.0, 200.0).unwrap()
    }

    fn simplest_map(w: usize, h: usize, z_d: f64, height: f64) -> FlowMap {
        let m = MountConfig::new(height, 0.0).unwrap();
        render_flow_map(
            w,
            h,
            None,
            &FlowModel::Simplest(SimplestMotion::Displacement { z_d }),
            &camera(),
            &m,
        )
        .unwrap()
    }

    /// Analytic row value, evaluated independently of the renderer.
    fn analytic_fv(v: f64, z_d: f64, h: f64, fy: f64, v0: f64) -> f64 {
        let w = v - v0;
        z_d * w / (h * fy / w - z_d)
    }

    #[test]
    fn constant_map_projects_to_constant() {
        let mut f = FlowMap::new(40, 20, Units::PixelsPerFrame);
        f.fv.fill(3.0);
        f.valid.fill(true);
        let rp = row_projection(&f, None, &ProjectionParams::default()).unwrap();
        for (_, r) in rp.populated() {
            assert!((r - 3.0).abs() <= 0.125);
        }
        assert_eq!(rp.populated().count(), 20);
        assert_eq!(rp.row_range(), Some((0, 19)));
    }

    #[test]
    fn projection_tracks_analytic_curve() {
        let f = simplest_map(300, 375, 1.0, 1.5);
        let rp = row_projection(&f, None, &ProjectionParams::default()).unwrap();
        assert!(rp.populated().count() > 150);
        for (v, r) in rp.populated() {
            let expected = analytic_fv(v as f64, 1.0, 1.5, 700.0, 200.0);
            assert!((r - expected).abs() <= 0.125, "row {v}: {r} vs {expected}");
        }
    }

    #[test]
    fn projection_survives_constant_outliers() {
        let mut f = simplest_map(200, 375, 1.0, 1.5);
        // 40 % of each row replaced by a far-away constant
        for v in 0..f.height {
            for u in 0..80 {
                let i = v * f.width + u;
                f.fv[i] = 500.0;
                f.valid[i] = true;
            }
        }
        let rp = row_projection(&f, None, &ProjectionParams::default()).unwrap();
        for v in 201..375 {
            let r = rp.representative[v].unwrap();
            let expected = analytic_fv(v as f64, 1.0, 1.5, 700.0, 200.0);
            assert!((r - expected).abs() <= 0.125, "row {v}");
        }
    }

    #[test]
    fn sparse_rows_are_dropped() {
        let mut f = FlowMap::new(30, 3, Units::PixelsPerFrame);
        for u in 0..9 {
            f.set(u, 0, Some(crate::flow_models::FlowVector::new(0.0, 1.0)));
        }
        for u in 0..10 {
            f.set(u, 1, Some(crate::flow_models::FlowVector::new(0.0, 1.0)));
        }
        let rp = row_projection(&f, None, &ProjectionParams::default()).unwrap();
        assert_eq!(rp.representative[0], None);
        assert_eq!(rp.support[0], 9);
        assert!(rp.representative[1].is_some());
        assert_eq!(rp.representative[2], None);
    }

    #[test]
    fn empty_map_is_an_error() {
        let f = FlowMap::new(10, 10, Units::PixelsPerFrame);
        assert!(matches!(
            row_projection(&f, None, &ProjectionParams::default()),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn rational_fit_recovers_k() {
        let f = simplest_map(400, 375, 1.0, 1.5);
        let rp = row_projection(&f, None, &ProjectionParams::default()).unwrap();
        let fit = fit_fv_curve(&rp, &camera(), CurveKind::RationalDisplacement).unwrap();
        let CurveParams::RationalDisplacement { k, .. } = fit.params else {
            panic!()
        };
        let truth = 1.0 / 1050.0;
        assert!(((k - truth) / truth).abs() < 1e-6, "k = {k}");
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn zero_rows_fit_zero() {
        let mut f = FlowMap::new(50, 300, Units::PixelsPerFrame);
        f.valid.fill(true);
        let rp = row_projection(&f, None, &ProjectionParams::default()).unwrap();
        let fit = fit_fv_curve(&rp, &camera(), CurveKind::RationalDisplacement).unwrap();
        assert_eq!(
            fit.params,
            CurveParams::RationalDisplacement { k: 0.0, v0: 200.0 }
        );
        assert_eq!(fit.residual_rms, 0.0);
        let map = render_fitted_fv(&fit, 50, 300);
        assert!(map.fv.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn generic_quadratic_needs_three_rows() {
        let mut f = FlowMap::new(20, 10, Units::PixelsPerFrame);
        for v in [3, 7] {
            for u in 0..20 {
                f.set(
                    u,
                    v,
                    Some(crate::flow_models::FlowVector::new(0.0, v as f64)),
                );
            }
        }
        let rp = row_projection(&f, None, &ProjectionParams::default()).unwrap();
        assert!(matches!(
            fit_fv_curve(&rp, &camera(), CurveKind::GenericQuadratic),
            Err(Error::InsufficientRows { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn generic_quadratic_recovers_coefficients() {
        let mut f = FlowMap::new(20, 300, Units::PixelsPerSecond);
        let (a, b, c) = (2e-4, -0.03, 1.5);
        for v in 0..300 {
            let x = v as f64;
            for u in 0..20 {
                f.set(
                    u,
                    v,
                    Some(crate::flow_models::FlowVector::new(
                        0.0,
                        a * x * x + b * x + c,
                    )),
                );
            }
        }
        let rp = row_projection(&f, None, &ProjectionParams::default()).unwrap();
        let fit = fit_fv_curve(&rp, &camera(), CurveKind::GenericQuadratic).unwrap();
        let CurveParams::GenericQuadratic {
            a: fa,
            b: fb,
            c: fc,
        } = fit.params
        else {
            panic!()
        };
        assert!((fa - a).abs() < 1e-10 && (fb - b).abs() < 1e-8 && (fc - c).abs() < 1e-7);
        assert_eq!(fit.units, Units::PixelsPerSecond);
    }

    #[test]
    fn fitted_map_is_row_constant() {
        let fit = CurveFit {
            params: CurveParams::QuadraticVelocity { a: 0.01, v0: 200.0 },
            residual_rms: 0.0,
            inliers: 1,
            rows_used: 1,
            units: Units::PixelsPerSecond,
        };
        let map = render_fitted_fv(&fit, 17, 300);
        for v in 0..300 {
            let row = &map.fv[v * 17..(v + 1) * 17];
            assert!(row.iter().all(|&x| x == row[0]));
            assert_eq!(map.valid[v * 17], v > 200);
        }
    }

    #[test]
    fn segmentation_basics() {
        let f = simplest_map(100, 375, 1.0, 1.5);
        let mask = segment_freespace(&f, &f, 1.0).unwrap();
        assert_eq!(mask.mask, f.valid);

        let other = FlowMap::new(100, 374, Units::PixelsPerFrame);
        assert!(matches!(
            segment_freespace(&f, &other, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut vel = f.clone();
        vel.units = Units::PixelsPerSecond;
        assert!(matches!(
            segment_freespace(&f, &vel, 1.0),
            Err(Error::UnitsMismatch { .. })
        ));
    }

    #[test]
    fn rational_eval_domain() {
        let p = CurveParams::RationalDisplacement { k: 0.01, v0: 100.0 };
        assert_eq!(p.eval(100.0), None);
        assert_eq!(p.eval(200.0), None);
        assert!(p.eval(150.0).is_some());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn projection_ignores_column_order(
                values in proptest::collection::vec(-20.0f64..20.0, 30..80),
                seed in any::<u64>(),
            ) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let w = values.len();
                let mut f = FlowMap::new(w, 1, Units::PixelsPerFrame);
                f.fv.copy_from_slice(&values);
                f.valid.fill(true);
                let mut g = f.clone();
                g.fv.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let params = ProjectionParams::default();
                prop_assert_eq!(
                    row_projection(&f, None, &params).unwrap(),
                    row_projection(&g, None, &params).unwrap()
                );
            }

            #[test]
            fn rational_fit_recovers_any_valid_k(
                z_d in 0.05f64..2.5,
                h in 0.8f64..2.5,
                fy in 500.0f64..1000.0,
            ) {
                let k_cam = CameraIntrinsics::new(fy, fy, 600.0, 200.0).unwrap();
                let m = MountConfig::new(h, 0.0).unwrap();
                let f = render_flow_map(
                    200, 375, None,
                    &FlowModel::Simplest(SimplestMotion::Displacement { z_d }),
                    &k_cam, &m,
                ).unwrap();
                let rp = row_projection(&f, None, &ProjectionParams::default()).unwrap();
                let fit = fit_fv_curve(&rp, &k_cam, CurveKind::RationalDisplacement).unwrap();
                let CurveParams::RationalDisplacement { k, .. } = fit.params else { unreachable!() };
                let truth = z_d / (h * fy);
                prop_assert!(((k - truth) / truth).abs() < 1e-6, "k {} truth {}", k, truth);
            }
        }
    }
}
