//! Dense optical flow: the field type, providers, the `.flo` file format and
//! the dense-to-sparse sampling step that turns a field into feature tracks.
//!
//! Flow is forward (frame `t-1` to frame `t`) and measured in pixels, so a
//! feature at `p` in the previous frame is expected at `p + flow(p)`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::feature::{FeatureId, FeatureSet};
use crate::homography::Homography;
use crate::image::{DomainError, Grid, Image, Point2};

/// Magic number opening every flow file; its bytes read "PIEH".
pub const FLO_MAGIC: f32 = 202021.25;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("flow file {path}: bad {field}: {detail}")]
    Format {
        path: PathBuf,
        field: &'static str,
        detail: String,
    },
    #[error("flow file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("homography is degenerate: homogeneous scale {scale:e} at pixel ({u}, {v})")]
    Degenerate { u: usize, v: usize, scale: f64 },
    #[error("flow field is {got_w}x{got_h} but images are {want_w}x{want_h}")]
    Dimensions {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("no flow available for frame {0}")]
    MissingFrame(usize),
}

/// Per-pixel `(du, dv)` displacement grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    u: Grid,
    v: Grid,
}

impl FlowField {
    /// Panics if the component grids differ in size or are empty.
    pub fn new(u: Grid, v: Grid) -> Self {
        assert_eq!(
            (u.width(), u.height()),
            (v.width(), v.height()),
            "flow components differ in size"
        );
        assert!(u.width() > 0 && u.height() > 0, "empty flow field");
        Self { u, v }
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn u_component(&self) -> &Grid {
        &self.u
    }

    pub fn v_component(&self) -> &Grid {
        &self.v
    }

    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        (self.u.get(x, y), self.v.get(x, y))
    }

    pub fn set(&mut self, x: usize, y: usize, du: f64, dv: f64) {
        self.u.set(x, y, du);
        self.v.set(x, y, dv);
    }

    pub fn matches(&self, image: &Image) -> Result<(), FlowError> {
        if self.width() != image.width() || self.height() != image.height() {
            return Err(FlowError::Dimensions {
                got_w: self.width(),
                got_h: self.height(),
                want_w: image.width(),
                want_h: image.height(),
            });
        }
        Ok(())
    }
}

/// Displacement at a subpixel point, interpolating each channel bilinearly.
pub fn flow_at(flow: &FlowField, p: Point2) -> Result<Point2, DomainError> {
    Ok(Point2::new(flow.u.sample(p)?, flow.v.sample(p)?))
}

/// Moves every feature along the flow. No filtering happens here: candidates
/// may land outside the image and it is up to the caller to drop them.
pub fn track_with_flow(
    flow: &FlowField,
    prev: &FeatureSet,
) -> Result<Vec<(Point2, FeatureId)>, DomainError> {
    prev.iter()
        .map(|f| Ok((f.position + flow_at(flow, f.position)?, f.id)))
        .collect()
}

pub fn constant_flow(width: usize, height: usize, du: f64, dv: f64) -> FlowField {
    FlowField::new(
        Grid::filled(width, height, du),
        Grid::filled(width, height, dv),
    )
}

/// Exact flow induced by a homography mapping frame `t-1` pixels to frame `t`.
pub fn flow_from_homography(
    h: &Homography,
    width: usize,
    height: usize,
) -> Result<FlowField, FlowError> {
    let mut u = Grid::filled(width, height, 0.0);
    let mut v = Grid::filled(width, height, 0.0);
    for y in 0..height {
        for x in 0..width {
            let p = Point2::new(x as f64, y as f64);
            let scale = h.scale_at(p);
            if scale <= 1e-12 {
                return Err(FlowError::Degenerate { u: x, v: y, scale });
            }
            let q = h.apply(p);
            u.set(x, y, q.u - p.u);
            v.set(x, y, q.v - p.v);
        }
    }
    Ok(FlowField::new(u, v))
}

/// Writes the little-endian Middlebury layout. Components are stored as
/// `f32`, so only fields of `f32`-representable values round-trip exactly.
pub fn write_flow_file(flow: &FlowField, path: impl AsRef<Path>) -> Result<(), FlowError> {
    let path = path.as_ref();
    let io_err = |source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let mut buf = Vec::with_capacity(12 + flow.width() * flow.height() * 8);
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    buf.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (du, dv) in flow.u.data().iter().zip(flow.v.data()) {
        buf.extend_from_slice(&(*du as f32).to_le_bytes());
        buf.extend_from_slice(&(*dv as f32).to_le_bytes());
    }
    out.write_all(&buf).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn load_flow_file(path: impl AsRef<Path>) -> Result<FlowField, FlowError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|source| FlowError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    decode_flow(&bytes, path)
}

fn decode_flow(bytes: &[u8], path: &Path) -> Result<FlowField, FlowError> {
    let format = |field: &'static str, detail: String| FlowError::Format {
        path: path.to_path_buf(),
        field,
        detail,
    };
    let word = |i: usize| -> Option<[u8; 4]> { bytes.get(i..i + 4).map(|b| b.try_into().unwrap()) };

    let magic = word(0).ok_or_else(|| format("magic", "file shorter than 4 bytes".into()))?;
    if f32::from_le_bytes(magic) != FLO_MAGIC {
        return Err(format(
            "magic",
            format!("expected PIEH, found {magic:02x?}"),
        ));
    }
    let width =
        i32::from_le_bytes(word(4).ok_or_else(|| format("width", "header truncated".into()))?);
    let height =
        i32::from_le_bytes(word(8).ok_or_else(|| format("height", "header truncated".into()))?);
    if width <= 0 {
        return Err(format("width", format!("must be positive, got {width}")));
    }
    if height <= 0 {
        return Err(format("height", format!("must be positive, got {height}")));
    }
    let (w, h) = (width as usize, height as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format("width", "dimensions overflow".into()))?;
    let payload = &bytes[12..];
    if payload.len() != expected {
        return Err(format(
            "payload",
            format!(
                "expected {expected} bytes for {w}x{h}, found {}",
                payload.len()
            ),
        ));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for px in payload.chunks_exact(8) {
        u.push(f32::from_le_bytes(px[0..4].try_into().unwrap()) as f64);
        v.push(f32::from_le_bytes(px[4..8].try_into().unwrap()) as f64);
    }
    Ok(FlowField::new(
        Grid::from_vec(w, h, u),
        Grid::from_vec(w, h, v),
    ))
}

/// Everything a provider may look at when producing the flow for one frame.
#[derive(Debug, Clone, Copy)]
pub struct FlowRequest<'a> {
    pub prev: &'a Image,
    pub curr: &'a Image,
    /// Index of `curr` in its sequence; the first frame is 0.
    pub frame_index: usize,
    /// Features tracked into `prev`.
    pub features: &'a FeatureSet,
}

/// Source of dense flow between consecutive frames.
///
/// The returned field must match the dimensions of the requested images.
pub trait FlowProvider {
    fn flow(&self, request: &FlowRequest<'_>) -> Result<FlowField, FlowError>;
}

impl<P: FlowProvider + ?Sized> FlowProvider for &P {
    fn flow(&self, request: &FlowRequest<'_>) -> Result<FlowField, FlowError> {
        (**self).flow(request)
    }
}

/// The same displacement everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantFlowProvider {
    pub du: f64,
    pub dv: f64,
}

impl FlowProvider for ConstantFlowProvider {
    fn flow(&self, request: &FlowRequest<'_>) -> Result<FlowField, FlowError> {
        Ok(constant_flow(
            request.curr.width(),
            request.curr.height(),
            self.du,
            self.dv,
        ))
    }
}

/// Exact flow from known per-frame homographies, indexed by frame.
#[derive(Debug, Clone)]
pub struct HomographyFlowProvider {
    homographies: BTreeMap<usize, Homography>,
}

impl HomographyFlowProvider {
    /// `homographies[k]` is the map from frame `k` to frame `k + 1`.
    pub fn new(homographies: &[Homography]) -> Self {
        Self {
            homographies: homographies
                .iter()
                .enumerate()
                .map(|(k, h)| (k + 1, *h))
                .collect(),
        }
    }
}

impl FlowProvider for HomographyFlowProvider {
    fn flow(&self, request: &FlowRequest<'_>) -> Result<FlowField, FlowError> {
        let h = self
            .homographies
            .get(&request.frame_index)
            .ok_or(FlowError::MissingFrame(request.frame_index))?;
        flow_from_homography(h, request.curr.width(), request.curr.height())
    }
}

/// Precomputed flow files, one per frame index. A missing entry is an error.
#[derive(Debug, Clone, Default)]
pub struct FileFlowProvider {
    files: BTreeMap<usize, PathBuf>,
}

impl FileFlowProvider {
    pub fn new(files: impl IntoIterator<Item = (usize, PathBuf)>) -> Self {
        Self {
            files: files.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl FlowProvider for FileFlowProvider {
    fn flow(&self, request: &FlowRequest<'_>) -> Result<FlowField, FlowError> {
        let path = self
            .files
            .get(&request.frame_index)
            .ok_or(FlowError::MissingFrame(request.frame_index))?;
        let flow = load_flow_file(path)?;
        flow.matches(request.curr)?;
        Ok(flow)
    }
}
