//! Per-frame tracking pipeline.
//!
//! Each frame goes through: motion (dense flow sampled at the features, or
//! pyramidal LK) → border filter → neighbor-consistency rejection →
//! replenishment with masked Shi-Tomasi corners → undistortion and
//! velocities. The result is one [`FeatureFrameOutput`] per frame.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::camera::{CameraError, PinholeRadTan};
use crate::detect::{good_features_to_track, DetectError, GoodFeaturesParams};
use crate::feature::{Feature, FeatureId, FeatureSet};
use crate::flow::{track_with_flow, FlowError, FlowProvider, FlowRequest};
use crate::image::{DomainError, Image, Point2};
use crate::pyrlk::{build_pyramid, lk_track, LkParams, PyramidError};
use crate::reject::{reject_outliers, RejectError, RejectionConfig};

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("frame is {got_w}x{got_h} but the sequence is {want_w}x{want_h}")]
    Dimensions {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("timestamp {got} does not follow previous timestamp {previous}")]
    Timestamp { got: f64, previous: f64 },
    #[error("flow provider failed: {0}")]
    Flow(#[from] FlowError),
    #[error("feature outside flow domain: {0}")]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Reject(#[from] RejectError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Pyramid(#[from] PyramidError),
    #[error("invalid tracker config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub max_features: usize,
    /// Minimum distance between a new feature and any other feature, px.
    pub min_dist: f64,
    /// Features must stay within `[margin, dim-1-margin]`, px.
    pub border_margin: f64,
    pub quality_level: f64,
    /// Shi-Tomasi block radius.
    pub block_radius: usize,
    pub rejection: RejectionConfig,
    pub camera: PinholeRadTan,
}

impl TrackerConfig {
    pub fn new(camera: PinholeRadTan) -> Self {
        Self {
            max_features: 150,
            min_dist: 30.0,
            border_margin: 1.0,
            quality_level: 0.01,
            block_radius: 1,
            rejection: RejectionConfig::default(),
            camera,
        }
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        if self.max_features < 1 {
            return Err(TrackerError::Config(format!(
                "max_features must be >= 1, got {}",
                self.max_features
            )));
        }
        if !(self.min_dist >= 1.0) {
            return Err(TrackerError::Config(format!(
                "min_dist must be >= 1, got {}",
                self.min_dist
            )));
        }
        if !(self.border_margin >= 0.0 && self.border_margin.is_finite()) {
            return Err(TrackerError::Config(format!(
                "border_margin must be >= 0, got {}",
                self.border_margin
            )));
        }
        if !(self.quality_level > 0.0 && self.quality_level < 1.0) {
            return Err(TrackerError::Config(format!(
                "quality_level must lie in (0, 1), got {}",
                self.quality_level
            )));
        }
        self.rejection.validate()?;
        self.camera.validate()?;
        Ok(())
    }

    fn detector(&self, max_new: usize) -> GoodFeaturesParams {
        GoodFeaturesParams {
            max_new,
            quality_level: self.quality_level,
            min_dist: self.min_dist,
            block_radius: self.block_radius,
            border: self.border_margin.ceil() as usize,
        }
    }
}

/// One feature as handed to a state estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureObservation {
    pub id: FeatureId,
    pub track_count: u32,
    /// Pixel position.
    pub position: Point2,
    /// Undistorted normalized image-plane coordinates.
    pub x_un: f64,
    pub y_un: f64,
    /// Normalized velocity per second; zero for newly detected features.
    pub vx: f64,
    pub vy: f64,
}

/// Wall-clock time spent in each pipeline stage of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    /// Flow acquisition and sampling, or LK tracking.
    pub motion: Duration,
    pub border: Duration,
    pub reject: Duration,
    pub replenish: Duration,
    pub info: Duration,
    /// Everything after motion, through the state update.
    pub post_motion: Duration,
}

/// Bookkeeping of what happened to the features during one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameReport {
    pub frame_index: usize,
    /// Dropped for leaving the image (or failing LK).
    pub dropped_border: Vec<FeatureId>,
    /// Dropped by the outlier test.
    pub rejected: Vec<FeatureId>,
    pub added: Vec<FeatureId>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrameOutput {
    pub timestamp: f64,
    pub features: Vec<FeatureObservation>,
    pub report: FrameReport,
}

/// Where feature motion comes from.
#[derive(Clone, Copy)]
pub enum MotionSource<'a> {
    /// Dense flow sampled at the previous feature positions.
    Flow(&'a dyn FlowProvider),
    /// Sparse pyramidal Lucas-Kanade between the two frames.
    Lk(&'a LkParams),
}

/// State carried from frame `t-1` to frame `t`.
#[derive(Debug, Clone)]
pub struct TrackerState {
    image: Image,
    features: FeatureSet,
    undistorted: Vec<(f64, f64)>,
    frame_index: usize,
}

impl TrackerState {
    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn timestamp(&self) -> f64 {
        self.image.timestamp()
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    state: Option<TrackerState>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self, TrackerError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: None,
            next_id: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// `None` until the first frame has been processed.
    pub fn state(&self) -> Option<&TrackerState> {
        self.state.as_ref()
    }

    /// Tracks with dense flow from `provider`.
    pub fn process_frame(
        &mut self,
        image: Image,
        provider: &dyn FlowProvider,
    ) -> Result<FeatureFrameOutput, TrackerError> {
        self.process(image, MotionSource::Flow(provider))
    }

    /// Tracks with pyramidal LK instead of dense flow.
    pub fn process_frame_lk(
        &mut self,
        image: Image,
        params: &LkParams,
    ) -> Result<FeatureFrameOutput, TrackerError> {
        self.process(image, MotionSource::Lk(params))
    }

    /// Runs one frame. On error the tracker state is left untouched.
    pub fn process(
        &mut self,
        image: Image,
        source: MotionSource<'_>,
    ) -> Result<FeatureFrameOutput, TrackerError> {
        let Some(prev) = &self.state else {
            return self.first_frame(image);
        };
        if (image.width(), image.height()) != (prev.image.width(), prev.image.height()) {
            return Err(TrackerError::Dimensions {
                got_w: image.width(),
                got_h: image.height(),
                want_w: prev.image.width(),
                want_h: prev.image.height(),
            });
        }
        if !(image.timestamp() > prev.timestamp()) {
            return Err(TrackerError::Timestamp {
                got: image.timestamp(),
                previous: prev.timestamp(),
            });
        }
        let frame_index = prev.frame_index + 1;
        let mut timings = StageTimings::default();

        // 1. motion
        let started = Instant::now();
        let candidates: Vec<Option<Point2>> = match source {
            MotionSource::Flow(provider) => {
                let request = FlowRequest {
                    prev: &prev.image,
                    curr: &image,
                    frame_index,
                    features: &prev.features,
                };
                let flow = provider.flow(&request)?;
                flow.matches(&image)?;
                track_with_flow(&flow, &prev.features)?
                    .into_iter()
                    .map(|(p, _)| Some(p))
                    .collect()
            }
            MotionSource::Lk(params) => {
                let levels = params.levels.max(1);
                let prev_pyr = build_pyramid(&prev.image, levels)?;
                let next_pyr = build_pyramid(&image, levels)?;
                lk_track(&prev_pyr, &next_pyr, &prev.features.positions(), params)
                    .into_iter()
                    .map(|r| r.status.then_some(r.position))
                    .collect()
            }
        };
        let motion_done = Instant::now();
        timings.motion = motion_done - started;

        // 2. border filter
        let margin = self.cfg.border_margin;
        let (max_u, max_v) = (
            (image.width() - 1) as f64 - margin,
            (image.height() - 1) as f64 - margin,
        );
        let inside = |p: &Point2| p.u >= margin && p.v >= margin && p.u <= max_u && p.v <= max_v;
        let mut dropped_border = Vec::new();
        let mut survivors = Vec::with_capacity(candidates.len());
        for (i, (feature, cand)) in prev.features.iter().zip(&candidates).enumerate() {
            match cand {
                Some(p) if inside(p) => survivors.push((i, *p)),
                _ => dropped_border.push(feature.id),
            }
        }
        let t_border = Instant::now();
        timings.border = t_border - motion_done;

        // 3. outlier rejection
        let prev_pos: Vec<Point2> = survivors
            .iter()
            .map(|&(i, _)| prev.features.as_slice()[i].position)
            .collect();
        let curr_pos: Vec<Point2> = survivors.iter().map(|&(_, p)| p).collect();
        let keep = reject_outliers(&prev_pos, &curr_pos, &self.cfg.rejection)?;
        let mut rejected = Vec::new();
        let mut tracked = Vec::with_capacity(survivors.len());
        for (&(i, p), ok) in survivors.iter().zip(keep) {
            let old = &prev.features.as_slice()[i];
            if ok {
                // 4. survivors age by one frame
                tracked.push((
                    i,
                    Feature {
                        id: old.id,
                        position: p,
                        track_count: old.track_count + 1,
                    },
                ));
            } else {
                rejected.push(old.id);
            }
        }
        let t_reject = Instant::now();
        timings.reject = t_reject - t_border;

        // 5. replenish
        let need = self.cfg.max_features.saturating_sub(tracked.len());
        let new_points = if need > 0 {
            let occupied: Vec<Point2> = tracked.iter().map(|(_, f)| f.position).collect();
            good_features_to_track(&image, &self.cfg.detector(need), &occupied)?
        } else {
            Vec::new()
        };
        let t_replenish = Instant::now();
        timings.replenish = t_replenish - t_reject;

        // 6. feature info
        let dt = image.timestamp() - prev.timestamp();
        let mut features = Vec::with_capacity(tracked.len() + new_points.len());
        let mut observations = Vec::with_capacity(features.capacity());
        let mut undistorted = Vec::with_capacity(features.capacity());
        for (i, f) in &tracked {
            let (x, y) = self.cfg.camera.undistort_pixel(f.position)?;
            let (px, py) = prev.undistorted[*i];
            observations.push(FeatureObservation {
                id: f.id,
                track_count: f.track_count,
                position: f.position,
                x_un: x,
                y_un: y,
                vx: (x - px) / dt,
                vy: (y - py) / dt,
            });
            features.push(*f);
            undistorted.push((x, y));
        }
        let mut next_id = self.next_id;
        let mut added = Vec::with_capacity(new_points.len());
        for p in new_points {
            let (x, y) = self.cfg.camera.undistort_pixel(p)?;
            let id = FeatureId(next_id);
            next_id += 1;
            observations.push(FeatureObservation {
                id,
                track_count: 1,
                position: p,
                x_un: x,
                y_un: y,
                vx: 0.0,
                vy: 0.0,
            });
            features.push(Feature::new(id, p));
            undistorted.push((x, y));
            added.push(id);
        }
        let t_info = Instant::now();
        timings.info = t_info - t_replenish;

        // 7. commit
        let timestamp = image.timestamp();
        self.state = Some(TrackerState {
            image,
            features: FeatureSet::from_vec(features),
            undistorted,
            frame_index,
        });
        self.next_id = next_id;
        timings.post_motion = motion_done.elapsed();

        Ok(FeatureFrameOutput {
            timestamp,
            features: observations,
            report: FrameReport {
                frame_index,
                dropped_border,
                rejected,
                added,
                timings,
            },
        })
    }

    fn first_frame(&mut self, image: Image) -> Result<FeatureFrameOutput, TrackerError> {
        let started = Instant::now();
        let points =
            good_features_to_track(&image, &self.cfg.detector(self.cfg.max_features), &[])?;
        let mut features = Vec::with_capacity(points.len());
        let mut observations = Vec::with_capacity(points.len());
        let mut undistorted = Vec::with_capacity(points.len());
        let mut next_id = self.next_id;
        for p in points {
            let (x, y) = self.cfg.camera.undistort_pixel(p)?;
            let id = FeatureId(next_id);
            next_id += 1;
            features.push(Feature::new(id, p));
            observations.push(FeatureObservation {
                id,
                track_count: 1,
                position: p,
                x_un: x,
                y_un: y,
                vx: 0.0,
                vy: 0.0,
            });
            undistorted.push((x, y));
        }
        let added = features.iter().map(|f| f.id).collect();
        let timestamp = image.timestamp();
        self.state = Some(TrackerState {
            image,
            features: FeatureSet::from_vec(features),
            undistorted,
            frame_index: 0,
        });
        self.next_id = next_id;
        let elapsed = started.elapsed();
        Ok(FeatureFrameOutput {
            timestamp,
            features: observations,
            report: FrameReport {
                frame_index: 0,
                added,
                timings: StageTimings {
                    replenish: elapsed,
                    post_motion: elapsed,
                    ..Default::default()
                },
                ..Default::default()
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ConstantFlowProvider;
    use crate::synth::gen_texture;

    fn identity_camera() -> PinholeRadTan {
        PinholeRadTan::pinhole(1.0, 1.0, 0.0, 0.0).unwrap()
    }

    fn frame(seed: u64, t: f64) -> Image {
        gen_texture(320, 240, seed).with_timestamp(t).unwrap()
    }

    fn cfg(max_features: usize) -> TrackerConfig {
        TrackerConfig {
            max_features,
            min_dist: 15.0,
            ..TrackerConfig::new(identity_camera())
        }
    }

    #[test]
    fn first_frame_contract() {
        let mut tracker = Tracker::new(cfg(40)).unwrap();
        let out = tracker
            .process_frame(frame(1, 0.0), &ConstantFlowProvider { du: 0.0, dv: 0.0 })
            .unwrap();
        assert_eq!(out.features.len(), 40);
        assert!(out
            .features
            .iter()
            .all(|f| f.track_count == 1 && f.vx == 0.0 && f.vy == 0.0));
        assert_eq!(out.report.added.len(), 40);
    }

    #[test]
    fn constant_flow_velocity() {
        let mut tracker = Tracker::new(cfg(40)).unwrap();
        let flow = ConstantFlowProvider { du: 2.0, dv: 3.0 };
        let first = tracker.process_frame(frame(1, 0.0), &flow).unwrap();
        let second = tracker.process_frame(frame(1, 0.05), &flow).unwrap();
        let survivors: Vec<_> = second
            .features
            .iter()
            .filter(|f| f.track_count == 2)
            .collect();
        assert!(!survivors.is_empty());
        for s in survivors {
            let before = first.features.iter().find(|f| f.id == s.id).unwrap();
            assert_eq!(s.position, before.position + Point2::new(2.0, 3.0));
            assert!((s.vx - 40.0).abs() < 1e-9 && (s.vy - 60.0).abs() < 1e-9);
        }
    }

    #[test]
    fn errors_leave_state_untouched() {
        let mut tracker = Tracker::new(cfg(20)).unwrap();
        let flow = ConstantFlowProvider { du: 1.0, dv: 0.0 };
        tracker.process_frame(frame(2, 1.0), &flow).unwrap();
        let before = tracker.state().unwrap().features().clone();

        let err = tracker.process_frame(frame(2, 1.0), &flow).unwrap_err();
        assert!(matches!(err, TrackerError::Timestamp { .. }));
        let err = tracker
            .process_frame(gen_texture(64, 64, 2).with_timestamp(2.0).unwrap(), &flow)
            .unwrap_err();
        assert!(matches!(err, TrackerError::Dimensions { .. }));
        let missing = crate::flow::FileFlowProvider::new([]);
        assert!(matches!(
            tracker.process_frame(frame(2, 2.0), &missing).unwrap_err(),
            TrackerError::Flow(_)
        ));
        assert_eq!(tracker.state().unwrap().features(), &before);
        assert_eq!(tracker.state().unwrap().frame_index(), 0);
    }

    #[test]
    fn invalid_config() {
        let bad = TrackerConfig {
            max_features: 0,
            ..cfg(1)
        };
        assert!(matches!(Tracker::new(bad), Err(TrackerError::Config(_))));
    }
}
