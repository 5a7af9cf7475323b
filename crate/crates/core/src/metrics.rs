//! Flow-map error metrics: average angular error, average endpoint error and
//! the mean absolute error of each channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::FreespaceMask;
use crate::flow_models::{FlowMap, Units};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Average angular error, radians.
    #[serde(rename = "e_A")]
    pub e_a: f64,
    /// Average endpoint error.
    #[serde(rename = "e_E")]
    pub e_e: f64,
    #[serde(rename = "e_U")]
    pub e_u: f64,
    #[serde(rename = "e_V")]
    pub e_v: f64,
    pub n: usize,
    pub units: Units,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Angle between the 1-augmented vectors `(fu, fv, 1)`.
#[inline]
pub fn angular_error(gt: (f64, f64), est: (f64, f64)) -> f64 {
    let dot = gt.0 * est.0 + gt.1 * est.1 + 1.0;
    let n1 = gt.0 * gt.0 + gt.1 * gt.1 + 1.0;
    let n2 = est.0 * est.0 + est.1 * est.1 + 1.0;
    (dot / (n1 * n2).sqrt()).clamp(-1.0, 1.0).acos()
}

/// Compares `est` against `gt` over `mask ∧ gt.valid ∧ est.valid`; with no
/// mask, every pixel valid in both maps is evaluated.
pub fn evaluate(
    gt: &FlowMap,
    est: &FlowMap,
    mask: Option<&FreespaceMask>,
) -> Result<MetricsReport> {
    gt.ensure_compatible(est)?;
    if let Some(m) = mask {
        m.ensure_dims(gt.width, gt.height)?;
    }
    let (mut sa, mut se, mut su, mut sv) = Default::default();
    let mut n = 0usize;
    for i in 0..gt.len() {
        if !(gt.valid[i] && est.valid[i] && mask.is_none_or(|m| m.mask[i])) {
            continue;
        }
        let (du, dv) = (gt.fu[i] - est.fu[i], gt.fv[i] - est.fv[i]);
        CompensatedSum::add(
            &mut sa,
            angular_error((gt.fu[i], gt.fv[i]), (est.fu[i], est.fv[i])),
        );
        CompensatedSum::add(&mut se, du.hypot(dv));
        CompensatedSum::add(&mut su, du.abs());
        CompensatedSum::add(&mut sv, dv.abs());
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyOverlap);
    }
    let mean = |s: CompensatedSum| s.value() / n as f64;
    Ok(MetricsReport {
        e_a: mean(sa),
        e_e: mean(se),
        e_u: mean(su),
        e_v: mean(sv),
        n,
        units: gt.units,
    })
}
