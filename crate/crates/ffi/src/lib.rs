//! C ABI over `freespace-flow`.
//!
//! Conventions:
//! - every fallible function returns an [`FsofStatus`]; `FSOF_STATUS_OK` is 0;
//! - results are written through caller-provided out-pointers, which are left
//!   untouched on failure;
//! - flow maps and masks are opaque handles created by this library and
//!   released with [`fsof_flow_map_free`] / [`fsof_mask_free`];
//! - the message of the last failure on the calling thread is available from
//!   [`fsof_last_error_message`];
//! - panics never cross the boundary; they surface as `FSOF_STATUS_PANIC`.
//!
//! The C header is generated into `include/freespace_flow.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use freespace_flow::flow_io;
use freespace_flow::pose_estimation::Bounds;
use freespace_flow::{
    CameraIntrinsics, CurveFit, CurveKind, CurveParams, Error, FlowMap, FlowModel, FlowVector,
    FreespaceMask, MountConfig, Pixel, PoseDelta, PoseSearchConfig, ProjectionParams,
    SimplestMotion, Units, VelocityState,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsofStatus {
    Ok = 0,
    NullPointer,
    InvalidArgument,
    /// Pixel at or above the horizon.
    Horizon,
    BehindCamera,
    DimensionMismatch,
    UnitsMismatch,
    EmptyInput,
    EmptyOverlap,
    InsufficientRows,
    DegenerateFit,
    NonFinite,
    OutOfBounds,
    BadMagic,
    /// Unsupported PNG bit depth or channel count.
    WrongFormat,
    TruncatedFile,
    Png,
    Json,
    Io,
    Panic,
}

impl From<&Error> for FsofStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Horizon { .. } => Self::Horizon,
            Error::BehindCamera { .. } => Self::BehindCamera,
            Error::DimensionMismatch { .. } => Self::DimensionMismatch,
            Error::UnitsMismatch { .. } => Self::UnitsMismatch,
            Error::EmptyInput => Self::EmptyInput,
            Error::EmptyOverlap => Self::EmptyOverlap,
            Error::InsufficientRows { .. } => Self::InsufficientRows,
            Error::DegenerateFit(_) => Self::DegenerateFit,
            Error::NonFinite => Self::NonFinite,
            Error::OutOfBounds { .. } => Self::OutOfBounds,
            Error::InvalidParameter(_) => Self::InvalidArgument,
            Error::BadMagic => Self::BadMagic,
            Error::WrongBitDepth { .. } | Error::WrongChannelCount { .. } => Self::WrongFormat,
            Error::TruncatedFile => Self::TruncatedFile,
            Error::PngDecode(_) | Error::PngEncode(_) => Self::Png,
            Error::Json(_) => Self::Json,
            Error::Io { .. } => Self::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsofUnits {
    PixelsPerFrame = 0,
    PixelsPerSecond = 1,
}

impl From<Units> for FsofUnits {
    fn from(u: Units) -> Self {
        match u {
            Units::PixelsPerFrame => Self::PixelsPerFrame,
            Units::PixelsPerSecond => Self::PixelsPerSecond,
        }
    }
}

impl From<FsofUnits> for Units {
    fn from(u: FsofUnits) -> Self {
        match u {
            FsofUnits::PixelsPerFrame => Units::PixelsPerFrame,
            FsofUnits::PixelsPerSecond => Units::PixelsPerSecond,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FsofIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
}

/// Camera height above the road (meters) and roll (radians).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FsofMount {
    pub h: f64,
    pub theta: f64,
}

/// Inter-frame motion: lateral and longitudinal displacement (meters), yaw
/// (radians).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsofPose {
    pub x_d: f64,
    pub z_d: f64,
    pub phi: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FsofVelocityState {
    /// Rear-axle speed, m/s.
    pub v_r: f64,
    /// Front steering angle, radians.
    pub delta_f: f64,
    /// Wheelbase, meters.
    pub l: f64,
    pub heading: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsofFlow {
    pub fu: f64,
    pub fv: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsofModelKind {
    /// Uses `pose`.
    FullDisplacement = 0,
    /// Uses `state`.
    FullVelocity,
    /// Uses `z_d`.
    SimpleDisplacement,
    /// Uses `v_r`.
    SimpleVelocity,
    /// Uses `z_d`.
    SimplestDisplacement,
    /// Uses `v_r`.
    SimplestVelocity,
}

/// Flow model selector; only the fields named by `kind` are read.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FsofModel {
    pub kind: FsofModelKind,
    pub pose: FsofPose,
    pub state: FsofVelocityState,
    pub z_d: f64,
    pub v_r: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsofMetrics {
    /// Average angular error, radians.
    pub e_a: f64,
    pub e_e: f64,
    pub e_u: f64,
    pub e_v: f64,
    pub n: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsofCurveKind {
    /// `k w^2 / (1 - k w)`, `w = v - v0`.
    RationalDisplacement = 0,
    /// `a w^2`.
    QuadraticVelocity,
    /// `a v^2 + b v + c`.
    GenericQuadratic,
}

/// Fitted row profile. Coefficients by kind: rational `c0 = k, c1 = v0`;
/// velocity quadratic `c0 = a, c1 = v0`; generic `c0 = a, c1 = b, c2 = c`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsofCurveFit {
    pub kind: FsofCurveKind,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub residual_rms: f64,
    pub inliers: usize,
    pub rows_used: usize,
    pub units: FsofUnits,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsofPoseSearch {
    pub x_d_min: f64,
    pub x_d_max: f64,
    pub z_d_min: f64,
    pub z_d_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// 0 keeps every observed pixel.
    pub max_samples: usize,
    pub refine: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsofPoseEstimate {
    pub pose: FsofPose,
    /// Mean endpoint error at `pose`, pixels.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Opaque dense flow map.
pub struct FsofFlowMap(FlowMap);

/// Opaque freespace mask.
pub struct FsofMask(FreespaceMask);

impl From<FsofIntrinsics> for CameraIntrinsics {
    fn from(k: FsofIntrinsics) -> Self {
        CameraIntrinsics {
            fx: k.fx,
            fy: k.fy,
            u0: k.u0,
            v0: k.v0,
        }
    }
}

impl From<FsofMount> for MountConfig {
    fn from(m: FsofMount) -> Self {
        MountConfig {
            h: m.h,
            theta: m.theta,
        }
    }
}

impl From<FsofPose> for PoseDelta {
    fn from(p: FsofPose) -> Self {
        PoseDelta::new(p.x_d, p.z_d, p.phi)
    }
}

impl From<PoseDelta> for FsofPose {
    fn from(p: PoseDelta) -> Self {
        FsofPose {
            x_d: p.x_d,
            z_d: p.z_d,
            phi: p.phi,
        }
    }
}

impl From<FsofVelocityState> for VelocityState {
    fn from(s: FsofVelocityState) -> Self {
        VelocityState {
            v_r: s.v_r,
            delta_f: s.delta_f,
            l: s.l,
            heading: s.heading,
        }
    }
}

impl From<FlowVector> for FsofFlow {
    fn from(f: FlowVector) -> Self {
        FsofFlow { fu: f.fu, fv: f.fv }
    }
}

impl From<FsofModel> for FlowModel {
    fn from(m: FsofModel) -> Self {
        match m.kind {
            FsofModelKind::FullDisplacement => FlowModel::FullDisp(m.pose.into()),
            FsofModelKind::FullVelocity => FlowModel::FullVel(m.state.into()),
            FsofModelKind::SimpleDisplacement => FlowModel::SimpleDisp { z_d: m.z_d },
            FsofModelKind::SimpleVelocity => FlowModel::SimpleVel { v_r: m.v_r },
            FsofModelKind::SimplestDisplacement => {
                FlowModel::Simplest(SimplestMotion::Displacement { z_d: m.z_d })
            }
            FsofModelKind::SimplestVelocity => {
                FlowModel::Simplest(SimplestMotion::Velocity { v_r: m.v_r })
            }
        }
    }
}

impl From<FsofCurveKind> for CurveKind {
    fn from(k: FsofCurveKind) -> Self {
        match k {
            FsofCurveKind::RationalDisplacement => CurveKind::RationalDisplacement,
            FsofCurveKind::QuadraticVelocity => CurveKind::QuadraticVelocity,
            FsofCurveKind::GenericQuadratic => CurveKind::GenericQuadratic,
        }
    }
}

impl From<&CurveFit> for FsofCurveFit {
    fn from(f: &CurveFit) -> Self {
        let (kind, c0, c1, c2) = match f.params {
            CurveParams::RationalDisplacement { k, v0 } => {
                (FsofCurveKind::RationalDisplacement, k, v0, 0.0)
            }
            CurveParams::QuadraticVelocity { a, v0 } => {
                (FsofCurveKind::QuadraticVelocity, a, v0, 0.0)
            }
            CurveParams::GenericQuadratic { a, b, c } => (FsofCurveKind::GenericQuadratic, a, b, c),
        };
        FsofCurveFit {
            kind,
            c0,
            c1,
            c2,
            residual_rms: f.residual_rms,
            inliers: f.inliers,
            rows_used: f.rows_used,
            units: f.units.into(),
        }
    }
}

impl From<&FsofCurveFit> for CurveFit {
    fn from(f: &FsofCurveFit) -> Self {
        let params = match f.kind {
            FsofCurveKind::RationalDisplacement => {
                CurveParams::RationalDisplacement { k: f.c0, v0: f.c1 }
            }
            FsofCurveKind::QuadraticVelocity => {
                CurveParams::QuadraticVelocity { a: f.c0, v0: f.c1 }
            }
            FsofCurveKind::GenericQuadratic => CurveParams::GenericQuadratic {
                a: f.c0,
                b: f.c1,
                c: f.c2,
            },
        };
        CurveFit {
            params,
            residual_rms: f.residual_rms,
            inliers: f.inliers,
            rows_used: f.rows_used,
            units: f.units.into(),
        }
    }
}

impl From<PoseSearchConfig> for FsofPoseSearch {
    fn from(c: PoseSearchConfig) -> Self {
        FsofPoseSearch {
            x_d_min: c.x_d.lo,
            x_d_max: c.x_d.hi,
            z_d_min: c.z_d.lo,
            z_d_max: c.z_d.hi,
            phi_min: c.phi.lo,
            phi_max: c.phi.hi,
            swarm_size: c.swarm_size,
            max_iterations: c.max_iterations,
            inertia: c.inertia,
            cognitive: c.cognitive,
            social: c.social,
            tolerance: c.tolerance,
            seed: c.seed,
            max_samples: c.max_samples,
            refine: c.refine,
        }
    }
}

impl From<FsofPoseSearch> for PoseSearchConfig {
    fn from(c: FsofPoseSearch) -> Self {
        PoseSearchConfig {
            x_d: Bounds::new(c.x_d_min, c.x_d_max),
            z_d: Bounds::new(c.z_d_min, c.z_d_max),
            phi: Bounds::new(c.phi_min, c.phi_max),
            swarm_size: c.swarm_size,
            max_iterations: c.max_iterations,
            inertia: c.inertia,
            cognitive: c.cognitive,
            social: c.social,
            tolerance: c.tolerance,
            seed: c.seed,
            max_samples: c.max_samples,
            refine: c.refine,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(FsofStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(FsofStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and recording the
/// message for [`fsof_last_error_message`].
fn guard(f: impl FnOnce() -> Outcome) -> FsofStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FsofStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            FsofStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map(Path::new).map_err(|_| {
        Failure(
            FsofStatus::InvalidArgument,
            "path is not valid UTF-8".into(),
        )
    })
}

unsafe fn optional_mask<'a>(p: *const FsofMask) -> Option<&'a FreespaceMask> {
    p.as_ref().map(|m| &m.0)
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fsof_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn fsof_status_name(status: FsofStatus) -> *const c_char {
    let name: &'static CStr = match status {
        FsofStatus::Ok => c"ok",
        FsofStatus::NullPointer => c"null pointer",
        FsofStatus::InvalidArgument => c"invalid argument",
        FsofStatus::Horizon => c"pixel at or above the horizon",
        FsofStatus::BehindCamera => c"point behind the camera",
        FsofStatus::DimensionMismatch => c"dimension mismatch",
        FsofStatus::UnitsMismatch => c"units mismatch",
        FsofStatus::EmptyInput => c"empty input",
        FsofStatus::EmptyOverlap => c"empty overlap",
        FsofStatus::InsufficientRows => c"insufficient rows",
        FsofStatus::DegenerateFit => c"degenerate fit",
        FsofStatus::NonFinite => c"non-finite value",
        FsofStatus::OutOfBounds => c"out of bounds",
        FsofStatus::BadMagic => c"bad magic",
        FsofStatus::WrongFormat => c"unsupported image format",
        FsofStatus::TruncatedFile => c"truncated file",
        FsofStatus::Png => c"png error",
        FsofStatus::Json => c"json error",
        FsofStatus::Io => c"i/o error",
        FsofStatus::Panic => c"internal panic",
    };
    name.as_ptr()
}

// ---------------------------------------------------------------- point flow

/// Full displacement flow at pixel `(u, v)`.
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_displacement_flow(
    u: f64,
    v: f64,
    k: *const FsofIntrinsics,
    m: *const FsofMount,
    pose: *const FsofPose,
    flow: *mut FsofFlow,
) -> FsofStatus {
    guard(|| {
        let f = freespace_flow::displacement_flow(
            Pixel::new(u, v),
            &(*deref(k, "k")?).into(),
            &(*deref(m, "m")?).into(),
            &(*deref(pose, "pose")?).into(),
        )?;
        *out(flow, "flow")? = f.into();
        Ok(())
    })
}

/// Full velocity flow (pixels per second) at pixel `(u, v)`.
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_velocity_flow(
    u: f64,
    v: f64,
    k: *const FsofIntrinsics,
    m: *const FsofMount,
    state: *const FsofVelocityState,
    flow: *mut FsofFlow,
) -> FsofStatus {
    guard(|| {
        let f = freespace_flow::velocity_flow(
            Pixel::new(u, v),
            &(*deref(k, "k")?).into(),
            &(*deref(m, "m")?).into(),
            &(*deref(state, "state")?).into(),
        )?;
        *out(flow, "flow")? = f.into();
        Ok(())
    })
}

/// Flow of any model at pixel `(u, v)`.
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_model_flow(
    u: f64,
    v: f64,
    k: *const FsofIntrinsics,
    m: *const FsofMount,
    model: *const FsofModel,
    flow: *mut FsofFlow,
) -> FsofStatus {
    guard(|| {
        let model: FlowModel = (*deref(model, "model")?).into();
        let field = model.field(&(*deref(k, "k")?).into(), &(*deref(m, "m")?).into())?;
        *out(flow, "flow")? = field.flow_at(Pixel::new(u, v))?.into();
        Ok(())
    })
}

// ----------------------------------------------------------------- flow maps

/// New all-invalid map.
///
/// # Safety
/// `map` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsof_flow_map_new(
    width: usize,
    height: usize,
    units: FsofUnits,
    map: *mut *mut FsofFlowMap,
) -> FsofStatus {
    guard(|| {
        let slot = out(map, "map")?;
        if width.checked_mul(height).is_none() {
            return Err(Failure(
                FsofStatus::InvalidArgument,
                "map size overflows".into(),
            ));
        }
        *slot = boxed(FsofFlowMap(FlowMap::new(width, height, units.into())));
        Ok(())
    })
}

/// Releases a map; null is ignored.
///
/// # Safety
/// `map` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsof_flow_map_free(map: *mut FsofFlowMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_flow_map_info(
    map: *const FsofFlowMap,
    width: *mut usize,
    height: *mut usize,
    units: *mut FsofUnits,
) -> FsofStatus {
    guard(|| {
        let m = &deref(map, "map")?.0;
        *out(width, "width")? = m.width;
        *out(height, "height")? = m.height;
        *out(units, "units")? = m.units.into();
        Ok(())
    })
}

/// Flow at `(u, v)`; `valid` receives whether the pixel carries flow.
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_flow_map_get(
    map: *const FsofFlowMap,
    u: usize,
    v: usize,
    flow: *mut FsofFlow,
    valid: *mut bool,
) -> FsofStatus {
    guard(|| {
        let m = &deref(map, "map")?.0;
        let (flow, valid) = (out(flow, "flow")?, out(valid, "valid")?);
        if u >= m.width || v >= m.height {
            return Err(Failure(
                FsofStatus::OutOfBounds,
                format!("pixel ({u}, {v}) outside map"),
            ));
        }
        let i = m.index(u, v);
        *flow = FsofFlow {
            fu: m.fu[i],
            fv: m.fv[i],
        };
        *valid = m.valid[i];
        Ok(())
    })
}

/// Sets `(u, v)`; a null `flow` marks the pixel invalid.
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_flow_map_set(
    map: *mut FsofFlowMap,
    u: usize,
    v: usize,
    flow: *const FsofFlow,
) -> FsofStatus {
    guard(|| {
        let m = &mut out(map, "map")?.0;
        if u >= m.width || v >= m.height {
            return Err(Failure(
                FsofStatus::OutOfBounds,
                format!("pixel ({u}, {v}) outside map"),
            ));
        }
        m.set(u, v, flow.as_ref().map(|f| FlowVector::new(f.fu, f.fv)));
        Ok(())
    })
}

/// Copies the map out in row-major order. Each of `fu`, `fv`, `valid` may be
/// null; non-null buffers must hold `len >= width * height` elements.
///
/// # Safety
/// Non-null buffers must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fsof_flow_map_export(
    map: *const FsofFlowMap,
    fu: *mut f64,
    fv: *mut f64,
    valid: *mut u8,
    len: usize,
) -> FsofStatus {
    guard(|| {
        let m = &deref(map, "map")?.0;
        if len < m.len() {
            return Err(Failure(
                FsofStatus::DimensionMismatch,
                format!("buffer holds {len} elements, map has {}", m.len()),
            ));
        }
        if !fu.is_null() {
            std::slice::from_raw_parts_mut(fu, m.len()).copy_from_slice(&m.fu);
        }
        if !fv.is_null() {
            std::slice::from_raw_parts_mut(fv, m.len()).copy_from_slice(&m.fv);
        }
        if !valid.is_null() {
            for (d, &s) in std::slice::from_raw_parts_mut(valid, m.len())
                .iter_mut()
                .zip(&m.valid)
            {
                *d = u8::from(s);
            }
        }
        Ok(())
    })
}

/// Renders `model` over a `width x height` image, restricted to `region`
/// when it is non-null.
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_render_flow_map(
    width: usize,
    height: usize,
    region: *const FsofMask,
    model: *const FsofModel,
    k: *const FsofIntrinsics,
    m: *const FsofMount,
    map: *mut *mut FsofFlowMap,
) -> FsofStatus {
    guard(|| {
        let slot = out(map, "map")?;
        let rendered = freespace_flow::render_flow_map_par(
            width,
            height,
            optional_mask(region),
            &(*deref(model, "model")?).into(),
            &(*deref(k, "k")?).into(),
            &(*deref(m, "m")?).into(),
        )?;
        *slot = boxed(FsofFlowMap(rendered));
        Ok(())
    })
}

/// Reads a `.png` (KITTI 16-bit) or `.flo` file, with its units sidecar.
///
/// # Safety
/// `file` must be a NUL-terminated string; `map` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsof_read_flow(
    file: *const c_char,
    map: *mut *mut FsofFlowMap,
) -> FsofStatus {
    guard(|| {
        let slot = out(map, "map")?;
        *slot = boxed(FsofFlowMap(flow_io::read_flow(path(file)?)?));
        Ok(())
    })
}

/// Writes by extension; `saturated` (nullable) receives the number of KITTI
/// components clamped to the representable range.
///
/// # Safety
/// `file` must be a NUL-terminated string; other pointers null or valid.
#[no_mangle]
pub unsafe extern "C" fn fsof_write_flow(
    map: *const FsofFlowMap,
    file: *const c_char,
    saturated: *mut usize,
) -> FsofStatus {
    guard(|| {
        let n = flow_io::write_flow(&deref(map, "map")?.0, path(file)?)?;
        if let Some(s) = saturated.as_mut() {
            *s = n;
        }
        Ok(())
    })
}

// --------------------------------------------------------------------- masks

/// # Safety
/// `mask` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsof_mask_new(
    width: usize,
    height: usize,
    fill: bool,
    mask: *mut *mut FsofMask,
) -> FsofStatus {
    guard(|| {
        let slot = out(mask, "mask")?;
        if width.checked_mul(height).is_none() {
            return Err(Failure(
                FsofStatus::InvalidArgument,
                "mask size overflows".into(),
            ));
        }
        *slot = boxed(FsofMask(FreespaceMask::new(width, height, fill)));
        Ok(())
    })
}

/// Releases a mask; null is ignored.
///
/// # Safety
/// `mask` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsof_mask_free(mask: *mut FsofMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_mask_info(
    mask: *const FsofMask,
    width: *mut usize,
    height: *mut usize,
    count: *mut usize,
) -> FsofStatus {
    guard(|| {
        let m = &deref(mask, "mask")?.0;
        *out(width, "width")? = m.width;
        *out(height, "height")? = m.height;
        *out(count, "count")? = m.count();
        Ok(())
    })
}

/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_mask_get(
    mask: *const FsofMask,
    u: usize,
    v: usize,
    value: *mut bool,
) -> FsofStatus {
    guard(|| {
        let m = &deref(mask, "mask")?.0;
        let value = out(value, "value")?;
        if u >= m.width || v >= m.height {
            return Err(Failure(
                FsofStatus::OutOfBounds,
                format!("pixel ({u}, {v}) outside mask"),
            ));
        }
        *value = m.get(u, v);
        Ok(())
    })
}

/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_mask_set(
    mask: *mut FsofMask,
    u: usize,
    v: usize,
    value: bool,
) -> FsofStatus {
    guard(|| {
        let m = &mut out(mask, "mask")?.0;
        if u >= m.width || v >= m.height {
            return Err(Failure(
                FsofStatus::OutOfBounds,
                format!("pixel ({u}, {v}) outside mask"),
            ));
        }
        let i = v * m.width + u;
        m.mask[i] = value;
        Ok(())
    })
}

/// Reads an 8-bit grayscale PNG; nonzero is freespace.
///
/// # Safety
/// `file` must be a NUL-terminated string; `mask` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsof_read_mask(
    file: *const c_char,
    mask: *mut *mut FsofMask,
) -> FsofStatus {
    guard(|| {
        let slot = out(mask, "mask")?;
        *slot = boxed(FsofMask(flow_io::read_mask_png(path(file)?)?));
        Ok(())
    })
}

/// # Safety
/// `file` must be a NUL-terminated string; `mask` a live handle.
#[no_mangle]
pub unsafe extern "C" fn fsof_write_mask(mask: *const FsofMask, file: *const c_char) -> FsofStatus {
    guard(|| {
        flow_io::write_mask_png(&deref(mask, "mask")?.0, path(file)?)?;
        Ok(())
    })
}

// ----------------------------------------------------------------- pipeline

/// Scores `est` against `gt` on pixels valid in both and set in `mask`
/// (nullable).
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_evaluate(
    gt: *const FsofFlowMap,
    est: *const FsofFlowMap,
    mask: *const FsofMask,
    report: *mut FsofMetrics,
) -> FsofStatus {
    guard(|| {
        let r = freespace_flow::evaluate(
            &deref(gt, "gt")?.0,
            &deref(est, "est")?.0,
            optional_mask(mask),
        )?;
        *out(report, "report")? = FsofMetrics {
            e_a: r.e_a,
            e_e: r.e_e,
            e_u: r.e_u,
            e_v: r.e_v,
            n: r.n,
        };
        Ok(())
    })
}

/// Projects F_v row-wise (histogram bin `bin_w`, rows with fewer than
/// `min_row_support` samples skipped) and fits a curve of `kind`.
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_fit_fv_curve(
    map: *const FsofFlowMap,
    mask: *const FsofMask,
    k: *const FsofIntrinsics,
    kind: FsofCurveKind,
    bin_w: f64,
    min_row_support: usize,
    fit: *mut FsofCurveFit,
) -> FsofStatus {
    guard(|| {
        let params = ProjectionParams {
            bin_w,
            min_row_support,
        };
        let rp =
            freespace_flow::row_projection(&deref(map, "map")?.0, optional_mask(mask), &params)?;
        let f = freespace_flow::fit_fv_curve(&rp, &(*deref(k, "k")?).into(), kind.into())?;
        *out(fit, "fit")? = (&f).into();
        Ok(())
    })
}

/// Row-constant F_v map of a fitted curve (F_u is zero).
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_render_fitted_fv(
    fit: *const FsofCurveFit,
    width: usize,
    height: usize,
    map: *mut *mut FsofFlowMap,
) -> FsofStatus {
    guard(|| {
        let fit: CurveFit = deref(fit, "fit")?.into();
        let slot = out(map, "map")?;
        if width.checked_mul(height).is_none() {
            return Err(Failure(
                FsofStatus::InvalidArgument,
                "map size overflows".into(),
            ));
        }
        *slot = boxed(FsofFlowMap(freespace_flow::render_fitted_fv(
            &fit, width, height,
        )));
        Ok(())
    })
}

/// Freespace where `|F_v - fitted F_v| <= tau`.
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_segment_freespace(
    observed: *const FsofFlowMap,
    fitted: *const FsofFlowMap,
    tau: f64,
    mask: *mut *mut FsofMask,
) -> FsofStatus {
    guard(|| {
        let slot = out(mask, "mask")?;
        let m = freespace_flow::segment_freespace(
            &deref(observed, "observed")?.0,
            &deref(fitted, "fitted")?.0,
            tau,
        )?;
        *slot = boxed(FsofMask(m));
        Ok(())
    })
}

/// Default pose search settings.
///
/// # Safety
/// `cfg` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsof_pose_search_default(cfg: *mut FsofPoseSearch) -> FsofStatus {
    guard(|| {
        *out(cfg, "cfg")? = PoseSearchConfig::default().into();
        Ok(())
    })
}

/// Recovers `(x_d, z_d, phi)` from observed flow. `mask` and `cfg` may be
/// null (whole map, default settings).
///
/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn fsof_estimate_pose(
    observed: *const FsofFlowMap,
    mask: *const FsofMask,
    k: *const FsofIntrinsics,
    m: *const FsofMount,
    cfg: *const FsofPoseSearch,
    estimate: *mut FsofPoseEstimate,
) -> FsofStatus {
    guard(|| {
        let cfg: PoseSearchConfig = cfg
            .as_ref()
            .map_or_else(PoseSearchConfig::default, |c| (*c).into());
        let e = freespace_flow::estimate_pose(
            &deref(observed, "observed")?.0,
            optional_mask(mask),
            &(*deref(k, "k")?).into(),
            &(*deref(m, "m")?).into(),
            &cfg,
        )?;
        *out(estimate, "estimate")? = FsofPoseEstimate {
            pose: e.pose.into(),
            cost: e.cost,
            iterations: e.iterations,
            converged: e.converged,
        };
        Ok(())
    })
}
