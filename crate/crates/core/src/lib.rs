//! Closed-form optical flow of the drivable ground plane.
//!
//! Given camera intrinsics, the camera height and roll, and the vehicle
//! motion between two frames, [`flow_models`] predicts the optical flow of
//! every road pixel without looking at the images. The rest of the crate
//! builds on those closed forms:
//!
//! - [`scene_synth`] produces ground truth by explicit back-projection and
//!   re-projection, independently of the closed forms;
//! - [`fitting`] fits the row profile of the vertical flow and segments
//!   freespace from it;
//! - [`pose_estimation`] recovers the vehicle motion from observed flow with
//!   particle swarm optimisation;
//! - [`metrics`] scores flow maps against each other;
//! - [`flow_io`] reads and writes KITTI PNG, Middlebury `.flo` and mask
//!   files, and the JSON configuration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fitting;
pub mod flow_io;
pub mod flow_models;
pub mod geometry;
pub mod metrics;
pub mod pose_estimation;
pub mod scene_synth;
pub mod viz;

pub use error::{Error, Result};
pub use fitting::{
    fit_fv_curve, render_fitted_fv, row_projection, segment_freespace, CurveFit, CurveKind,
    CurveParams, FreespaceMask, ProjectionParams, RowProjection,
};
pub use flow_models::{
    ackermann_rates, displacement_flow, displacement_flow_simplified, render_flow_map,
    render_flow_map_par, simplest_flows, velocity_flow, velocity_flow_simplified, AckermannRates,
    FlowMap, FlowModel, FlowVector, PoseDelta, SimplestMotion, Units, VelocityState,
};
pub use geometry::{
    backproject_ground, lambda12, project, roll_rotation, yaw_rotation, CameraIntrinsics,
    GroundPoint, LambdaTerms, MountConfig, Pixel, EPS_HORIZON,
};
pub use metrics::{evaluate, MetricsReport};
pub use pose_estimation::{estimate_pose, pose_cost, PoseEstimate, PoseSearchConfig};
pub use scene_synth::{
    add_noise, flow_oracle, insert_obstacle, synth_ground_truth, NoiseSpec, Rect, SceneSpec,
};
