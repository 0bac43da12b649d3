//! Feature-tracking frontend for visual-inertial odometry driven by dense
//! optical flow.
//!
//! Sparse tracks are obtained by sampling a dense flow field at the feature
//! positions ([`flow`]), filtered by a KD-tree neighbor-consistency test
//! ([`reject`]), replenished with distance-masked Shi-Tomasi corners
//! ([`detect`]) and emitted as undistorted, velocity-annotated observations
//! ([`tracker`], [`camera`]). A pyramidal Lucas-Kanade tracker ([`pyrlk`])
//! can replace the flow step for comparison, and [`synth`] generates
//! sequences with known motion to score both.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod cli;
pub mod detect;
pub mod feature;
pub mod flow;
pub mod homography;
pub mod image;
pub mod pyrlk;
pub mod reject;
pub mod synth;
pub mod tracker;

pub use camera::PinholeRadTan;
pub use feature::{Feature, FeatureId, FeatureSet};
pub use flow::{FlowField, FlowProvider, FlowRequest};
pub use homography::Homography;
pub use image::{Grid, Image, Point2};
pub use reject::RejectionConfig;
pub use tracker::{FeatureFrameOutput, Tracker, TrackerConfig};
