//! Deterministic synthetic sequences with known motion.
//!
//! A blob texture is warped through a per-frame homography schedule, with
//! optional illumination steps. The ground-truth flow provider can overwrite
//! the flow around a fraction of the tracked features so rejection quality
//! can be scored against the recorded corrupted ids.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`) seeded through
//! [`stream_seed`], which makes outputs identical across platforms.

use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::feature::{FeatureId, FeatureSet};
use crate::flow::{flow_from_homography, FlowError, FlowField, FlowProvider, FlowRequest};
use crate::homography::Homography;
use crate::image::{Grid, Image, Point2};

/// Number of Gaussian blobs in a generated texture.
pub const TEXTURE_BLOBS: usize = 200;
/// Peak-to-peak amplitude of the uniform noise added to a texture.
pub const TEXTURE_NOISE: f64 = 10.0;
/// Side of the square flow patch overwritten around a corrupted feature.
pub const CORRUPTION_PATCH: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid sequence spec: {0}")]
    Spec(String),
    #[error("homography for frame {0} is degenerate")]
    Degenerate(usize),
}

/// Derives an independent stream seed (SplitMix64 finalizer over the pair).
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, stream))
}

const STREAM_TEXTURE: u64 = 1;
const STREAM_FILL: u64 = 1 << 32;
const STREAM_CORRUPT: u64 = 2 << 32;
const STREAM_REGIONS: u64 = 2;

/// Union of disks inside which texture blobs are placed.
#[derive(Debug, Clone, PartialEq, Default)]
struct TexturedRegions {
    disks: Vec<(Point2, f64)>,
}

impl TexturedRegions {
    fn contains(&self, p: Point2) -> bool {
        self.disks.iter().any(|(c, r)| c.dist_sq(&p) <= r * r)
    }

    /// Adds random disks until roughly `coverage` of the canvas is inside one.
    fn random(width: usize, height: usize, coverage: f64, seed: u64) -> Self {
        let mut rng = rng_for(seed, STREAM_REGIONS);
        let mut regions = TexturedRegions::default();
        let step = 4;
        let probes: Vec<Point2> = (0..height)
            .step_by(step)
            .flat_map(|y| {
                (0..width)
                    .step_by(step)
                    .map(move |x| Point2::new(x as f64, y as f64))
            })
            .collect();
        let mut covered = vec![false; probes.len()];
        let target = (coverage * probes.len() as f64).ceil() as usize;
        let mut count = 0;
        let scale = width.min(height) as f64;
        while count < target {
            let c = Point2::new(
                rng.gen_range(0.0..width as f64),
                rng.gen_range(0.0..height as f64),
            );
            let r = rng.gen_range(0.12 * scale..0.25 * scale);
            for (probe, hit) in probes.iter().zip(covered.iter_mut()) {
                if !*hit && probe.dist_sq(&c) <= r * r {
                    *hit = true;
                    count += 1;
                }
            }
            regions.disks.push((c, r));
        }
        regions
    }
}

/// Blob texture as reals before quantization, normalized to `[0, 255]`.
/// With `regions`, blob centers are confined to them and the rest of the
/// canvas only carries noise.
fn texture_field(
    width: usize,
    height: usize,
    blobs: usize,
    seed: u64,
    regions: Option<&TexturedRegions>,
) -> Grid {
    let mut rng = rng_for(seed, STREAM_TEXTURE);
    let mut field = Grid::filled(width, height, 0.0);
    for _ in 0..blobs {
        let (cx, cy) = loop {
            let c = Point2::new(
                rng.gen_range(0.0..width as f64),
                rng.gen_range(0.0..height as f64),
            );
            if regions.is_none_or(|r| r.contains(c)) {
                break (c.u, c.v);
            }
        };
        let sigma = rng.gen_range(2.0..8.0);
        let amp = rng.gen_range(-255.0..255.0);
        let reach = 4.0 * sigma;
        let x0 = (cx - reach).floor().max(0.0) as usize;
        let x1 = ((cx + reach).ceil() as usize).min(width - 1);
        let y0 = (cy - reach).floor().max(0.0) as usize;
        let y1 = ((cy + reach).ceil() as usize).min(height - 1);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let v = field.get(x, y) + amp * (-d2 * inv).exp();
                field.set(x, y, v);
            }
        }
    }
    for v in field.data_mut() {
        *v += rng.gen_range(-0.5..0.5) * TEXTURE_NOISE;
    }
    let (lo, hi) = field
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    for v in field.data_mut() {
        *v = (*v - lo) / span * 255.0;
    }
    field
}

/// Deterministic blob texture: [`TEXTURE_BLOBS`] Gaussian blobs with
/// σ ∈ [2, 8] and random signed amplitude, plus uniform noise, stretched to
/// the full 8-bit range. Timestamp is 0.
///
/// Panics if either side is below the minimum image size.
pub fn gen_texture(width: usize, height: usize, seed: u64) -> Image {
    gen_texture_with_blobs(width, height, TEXTURE_BLOBS, seed)
}

/// [`gen_texture`] with an explicit blob count.
pub fn gen_texture_with_blobs(width: usize, height: usize, blobs: usize, seed: u64) -> Image {
    let field = texture_field(width, height, blobs, seed, None);
    let data = field
        .data()
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    Image::new(width, height, data, 0.0).expect("texture dimensions")
}

/// Constant per-frame motion about the image center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSchedule {
    pub translation: (f64, f64),
    /// Radians per frame.
    pub rotation: f64,
    /// Scale factor per frame.
    pub scale: f64,
}

impl Default for MotionSchedule {
    fn default() -> Self {
        Self {
            translation: (0.0, 0.0),
            rotation: 0.0,
            scale: 1.0,
        }
    }
}

/// From `frame` on, intensities become `clamp(gain·v + bias)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminationStep {
    pub frame: usize,
    pub gain: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    /// Frame rate; frame `t` is stamped `t / fps`.
    pub fps: f64,
    pub motion: MotionSchedule,
    pub illumination: Vec<IlluminationStep>,
    /// Fraction of features per frame whose flow is overwritten.
    pub corruption_rate: f64,
    /// Range of the overwriting displacement magnitude, in pixels.
    pub corruption_magnitude: (f64, f64),
    /// Blob count of the base texture; `None` keeps the density of
    /// [`TEXTURE_BLOBS`] per 128×128 textured pixels.
    pub blobs: Option<usize>,
    /// Fraction of the scene carrying texture, in `(0, 1]`. Below 1 the
    /// blobs are confined to random disk-shaped regions and the remainder
    /// is textureless.
    pub texture_coverage: f64,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        Self {
            width: 752,
            height: 480,
            frames: 50,
            seed: 1,
            fps: 20.0,
            motion: MotionSchedule::default(),
            illumination: Vec::new(),
            corruption_rate: 0.0,
            corruption_magnitude: (10.0, 30.0),
            blobs: None,
            texture_coverage: 1.0,
        }
    }
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::Spec(msg));
        if self.width < crate::image::MIN_IMAGE_SIDE || self.height < crate::image::MIN_IMAGE_SIDE {
            return bad(format!(
                "frame size {}x{} too small",
                self.width, self.height
            ));
        }
        if self.frames < 2 {
            return bad(format!("need at least 2 frames, got {}", self.frames));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if !(0.0..=1.0).contains(&self.corruption_rate) {
            return bad(format!(
                "corruption_rate must lie in [0, 1], got {}",
                self.corruption_rate
            ));
        }
        let (lo, hi) = self.corruption_magnitude;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("corruption magnitude range [{lo}, {hi}] invalid"));
        }
        if !(self.texture_coverage > 0.0 && self.texture_coverage <= 1.0) {
            return bad(format!(
                "texture_coverage must lie in (0, 1], got {}",
                self.texture_coverage
            ));
        }
        if !(self.motion.scale > 0.0) {
            return bad(format!(
                "scale factor must be positive, got {}",
                self.motion.scale
            ));
        }
        if let Some(step) = self
            .illumination
            .iter()
            .find(|s| !(s.gain > 0.0) || !s.bias.is_finite())
        {
            return bad(format!(
                "illumination step at frame {} has gain {} bias {}",
                step.frame, step.gain, step.bias
            ));
        }
        Ok(())
    }

    pub fn timestamp(&self, frame: usize) -> f64 {
        frame as f64 / self.fps
    }

    /// Frame `t-1` to frame `t` pixel map; the same for every `t`.
    pub fn frame_homography(&self) -> Homography {
        let center = Point2::new(
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        );
        let (tx, ty) = self.motion.translation;
        Homography::similarity_about(center, self.motion.rotation, self.motion.scale, tx, ty)
    }

    /// Illumination `(gain, bias)` in effect at `frame`.
    pub fn illumination_at(&self, frame: usize) -> (f64, f64) {
        self.illumination
            .iter()
            .filter(|s| s.frame <= frame)
            .max_by_key(|s| s.frame)
            .map_or((1.0, 0.0), |s| (s.gain, s.bias))
    }

    fn blob_count(&self, width: usize, height: usize) -> usize {
        self.blobs.unwrap_or_else(|| {
            (TEXTURE_BLOBS as f64 * (width * height) as f64 * self.texture_coverage
                / (128.0 * 128.0))
                .round() as usize
        })
    }

    /// Texture margin so moderate motion stays on textured content.
    fn padding(&self) -> usize {
        self.width.max(self.height) / 4
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    /// `homographies[t-1]` maps frame `t-1` to frame `t`.
    pub homographies: Vec<Homography>,
    /// Corrupted feature ids per frame index.
    pub corrupted: BTreeMap<usize, Vec<FeatureId>>,
}

impl GroundTruth {
    pub fn homography(&self, frame: usize) -> Option<&Homography> {
        frame.checked_sub(1).and_then(|k| self.homographies.get(k))
    }
}

/// `dehomogenize(H_t · p)`: where a point of frame `t-1` lands in frame `t`.
pub fn true_position(gt: &GroundTruth, frame: usize, p: Point2) -> Option<Point2> {
    gt.homography(frame).map(|h| h.apply(p))
}

/// Renders every frame and records the per-frame homographies.
pub fn gen_sequence(spec: &SequenceSpec) -> Result<(Vec<Image>, GroundTruth), SynthError> {
    spec.validate()?;
    let pad = spec.padding();
    let (tw, th) = (spec.width + 2 * pad, spec.height + 2 * pad);
    let regions = (spec.texture_coverage < 1.0)
        .then(|| TexturedRegions::random(tw, th, spec.texture_coverage, spec.seed));
    let texture = texture_field(tw, th, spec.blob_count(tw, th), spec.seed, regions.as_ref())
        .data()
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0))
        .collect::<Vec<_>>();
    let texture = Grid::from_vec(tw, th, texture);

    let step = spec.frame_homography();
    let step_inv = step.inverse().ok_or(SynthError::Degenerate(1))?;
    let mut frames = Vec::with_capacity(spec.frames);
    let mut homographies = Vec::with_capacity(spec.frames - 1);
    // Maps frame-t pixels back to frame-0 pixels.
    let mut back = Homography::IDENTITY;
    for t in 0..spec.frames {
        if t > 0 {
            homographies.push(step);
            back = back.compose(&step_inv);
            if !back.determinant().is_finite() || back.determinant().abs() < 1e-12 {
                return Err(SynthError::Degenerate(t));
            }
        }
        frames.push(render_frame(spec, &texture, pad, &back, t));
    }
    Ok((
        frames,
        GroundTruth {
            homographies,
            corrupted: BTreeMap::new(),
        },
    ))
}

fn render_frame(
    spec: &SequenceSpec,
    texture: &Grid,
    pad: usize,
    back: &Homography,
    t: usize,
) -> Image {
    let mut fill = rng_for(spec.seed, STREAM_FILL + t as u64);
    let (gain, bias) = spec.illumination_at(t);
    let offset = pad as f64;
    let mut data = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let noise: f64 = fill.gen_range(0.0..256.0);
            let src = back.apply(Point2::new(x as f64, y as f64));
            let q = Point2::new(src.u + offset, src.v + offset);
            let value =
                if back.scale_at(Point2::new(x as f64, y as f64)) > 0.0 && texture.contains(q) {
                    texture.sample_clamped(q.u, q.v)
                } else {
                    noise.floor()
                };
            data.push((gain * value + bias).round().clamp(0.0, 255.0) as u8);
        }
    }
    Image::new(spec.width, spec.height, data, spec.timestamp(t)).expect("frame dimensions")
}

/// Ground-truth flow with seeded per-frame corruption around features.
///
/// For each frame, `round(ρ·n)` of the tracked features are chosen and the
/// flow in a 5×5 patch around each is replaced by one random displacement
/// with magnitude in the configured range. Every feature whose bilinear
/// footprint touches an overwritten pixel is recorded as corrupted.
#[derive(Debug)]
pub struct CorruptedFlowProvider {
    homographies: Vec<Homography>,
    seed: u64,
    rate: f64,
    magnitude: (f64, f64),
    log: Mutex<BTreeMap<usize, Vec<FeatureId>>>,
}

pub fn corrupted_gt_flow_provider(gt: &GroundTruth, spec: &SequenceSpec) -> CorruptedFlowProvider {
    CorruptedFlowProvider {
        homographies: gt.homographies.clone(),
        seed: spec.seed,
        rate: spec.corruption_rate,
        magnitude: spec.corruption_magnitude,
        log: Mutex::new(BTreeMap::new()),
    }
}

impl CorruptedFlowProvider {
    /// Flow for `frame_index` plus the ids it corrupted. Pure.
    pub fn corrupt(
        &self,
        frame_index: usize,
        width: usize,
        height: usize,
        features: &FeatureSet,
    ) -> Result<(FlowField, Vec<FeatureId>), FlowError> {
        let h = frame_index
            .checked_sub(1)
            .and_then(|k| self.homographies.get(k))
            .ok_or(FlowError::MissingFrame(frame_index))?;
        let mut flow = flow_from_homography(h, width, height)?;
        let n = features.len();
        let k = ((self.rate * n as f64).round() as usize).min(n);
        if k == 0 {
            return Ok((flow, Vec::new()));
        }
        let mut rng = rng_for(self.seed, STREAM_CORRUPT + frame_index as u64);
        let mut chosen = sample(&mut rng, n, k).into_vec();
        chosen.sort_unstable();

        let mut touched = vec![false; width * height];
        let half = (CORRUPTION_PATCH / 2) as isize;
        for i in chosen {
            let p = features.as_slice()[i].position;
            let (lo, hi) = self.magnitude;
            let mag = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let (du, dv) = (mag * angle.cos(), mag * angle.sin());
            let (cx, cy) = (p.u.round() as isize, p.v.round() as isize);
            for y in cy - half..=cy + half {
                for x in cx - half..=cx + half {
                    if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                        flow.set(x as usize, y as usize, du, dv);
                        touched[y as usize * width + x as usize] = true;
                    }
                }
            }
        }
        let corrupted = features
            .iter()
            .filter(|f| footprint(f.position, width, height).any(|(x, y)| touched[y * width + x]))
            .map(|f| f.id)
            .collect();
        Ok((flow, corrupted))
    }

    /// Everything corrupted so far through [`FlowProvider::flow`].
    pub fn corrupted(&self) -> BTreeMap<usize, Vec<FeatureId>> {
        self.log.lock().unwrap().clone()
    }
}

/// Grid cells read when bilinearly sampling at `p` (clamped to the image).
fn footprint(p: Point2, width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
    let x0 = (p.u.floor().max(0.0) as usize).min(width - 1);
    let y0 = (p.v.floor().max(0.0) as usize).min(height - 1);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    [(x0, y0), (x1, y0), (x0, y1), (x1, y1)].into_iter()
}

impl FlowProvider for CorruptedFlowProvider {
    fn flow(&self, request: &FlowRequest<'_>) -> Result<FlowField, FlowError> {
        let (flow, ids) = self.corrupt(
            request.frame_index,
            request.curr.width(),
            request.curr.height(),
            request.features,
        )?;
        self.log.lock().unwrap().insert(request.frame_index, ids);
        Ok(flow)
    }
}
