//! Shi-Tomasi corners and greedy, distance-masked feature replenishment.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::image::{Grid, Image, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("image {width}x{height} too small for block radius {block_radius} (needs {needed}x{needed})")]
    ImageTooSmall {
        width: usize,
        height: usize,
        block_radius: usize,
        needed: usize,
    },
    #[error("quality level must lie in (0, 1), got {0}")]
    QualityLevel(f64),
    #[error("minimum distance must be at least 1, got {0}")]
    MinDistance(f64),
}

/// Sobel products `gx²`, `gx·gy`, `gy²` of row `y`; the one-pixel frame is
/// left at zero. `smooth` and `diff` are scratch rows of width `w`.
fn sobel_products(
    image: &Image,
    y: usize,
    smooth: &mut [i32],
    diff: &mut [i32],
    out: &mut [Vec<f64>; 3],
) {
    let (w, h) = (image.width(), image.height());
    for c in out.iter_mut() {
        c.fill(0.0);
    }
    if y == 0 || y == h - 1 {
        return;
    }
    let px = image.data();
    let up = &px[(y - 1) * w..y * w];
    let mid = &px[y * w..(y + 1) * w];
    let down = &px[(y + 1) * w..(y + 2) * w];
    // separable passes: vertical [1 2 1] and [-1 0 1] first
    for (((s, d), (&u, &m)), &b) in smooth
        .iter_mut()
        .zip(diff.iter_mut())
        .zip(up.iter().zip(mid))
        .zip(down)
    {
        *s = u as i32 + 2 * m as i32 + b as i32;
        *d = b as i32 - u as i32;
    }
    let [xx, xy, yy] = out;
    let n = w - 2;
    let (s0, s2) = (&smooth[..n], &smooth[2..]);
    let (d0, d1, d2) = (&diff[..n], &diff[1..n + 1], &diff[2..]);
    for i in 0..n {
        let dx = (s2[i] - s0[i]) as f64;
        let dy = (d0[i] + 2 * d1[i] + d2[i]) as f64;
        xx[i + 1] = dx * dx;
        xy[i + 1] = dx * dy;
        yy[i + 1] = dy * dy;
    }
}

/// Streams the Shi-Tomasi response row by row, top to bottom, calling
/// `f(y, row)` for every `y`. Only a few rows are held at a time.
///
/// Gradients are integers below 2^11, so every product and block sum is an
/// integer far below 2^53 and the `f64` arithmetic here is exact in any
/// summation order.
fn response_rows(image: &Image, block_radius: usize, mut f: impl FnMut(usize, &[f64])) {
    let (w, h) = (image.width(), image.height());
    let r = block_radius;
    let k = 2 * r + 1;
    let channels = || [vec![0.0f64; w], vec![0.0f64; w], vec![0.0f64; w]];
    let mut prod = channels();
    let (mut smooth, mut diff) = (vec![0i32; w], vec![0i32; w]);
    // k rows of horizontal block sums per channel; entry x covers x-r..=x+r
    let mut ring = [
        vec![0.0f64; k * w],
        vec![0.0f64; k * w],
        vec![0.0f64; k * w],
    ];
    // vertical sum of the rows currently in the ring
    let mut window = channels();
    let mut row = vec![0.0f64; w];
    let zeros = vec![0.0f64; w];

    for yy in 0..h {
        sobel_products(image, yy, &mut smooth, &mut diff, &mut prod);
        let slot = (yy % k) * w;
        for c in 0..3 {
            let sums = &mut ring[c][slot + r..slot + w - r];
            sums.fill(0.0);
            for d in 0..k {
                for (s, p) in sums.iter_mut().zip(&prod[c][d..d + w - 2 * r]) {
                    *s += p;
                }
            }
            for (v, s) in window[c][r..w - r].iter_mut().zip(sums.iter()) {
                *v += s;
            }
        }
        if yy + 1 < k {
            if yy < r {
                f(yy, &zeros);
            }
            continue;
        }
        // window covers rows y-r..=y+r; emit, then drop row y-r
        let y = yy - r;
        let emit = y > r && y + r + 1 < h;
        if emit {
            let span = r + 1..w - r - 1;
            let [xx, xy, yy] = &window;
            for (((out, a), b), c) in row[span.clone()]
                .iter_mut()
                .zip(&xx[span.clone()])
                .zip(&xy[span.clone()])
                .zip(&yy[span])
            {
                *out = min_eigenvalue(*a, *b, *c);
            }
        }
        let old = ((yy + 1 - k) % k) * w;
        for c in 0..3 {
            for (v, o) in window[c][r..w - r]
                .iter_mut()
                .zip(&ring[c][old + r..old + w - r])
            {
                *v -= o;
            }
        }
        f(y, if emit { &row } else { &zeros });
    }
    for y in h - r..h {
        f(y, &zeros);
    }
}

/// Smaller eigenvalue of `[[gxx, gxy], [gxy, gyy]]`.
#[inline]
pub fn min_eigenvalue(gxx: f64, gxy: f64, gyy: f64) -> f64 {
    let half_diff = 0.5 * (gxx - gyy);
    0.5 * (gxx + gyy) - (half_diff * half_diff + gxy * gxy).sqrt()
}

/// Shi-Tomasi response at every pixel.
///
/// Sobel gradients are accumulated into the structure tensor over a
/// `(2·block_radius+1)²` block. Pixels whose block (plus the Sobel support)
/// does not fit inside the image get 0.
pub fn min_eig_response(image: &Image, block_radius: usize) -> Result<Grid, DetectError> {
    let (w, h) = (image.width(), image.height());
    let needed = 2 * block_radius + 3;
    if w < needed || h < needed {
        return Err(DetectError::ImageTooSmall {
            width: w,
            height: h,
            block_radius,
            needed,
        });
    }
    let mut out = Grid::filled(w, h, 0.0);
    let data = out.data_mut();
    response_rows(image, block_radius, |y, row| {
        data[y * w..(y + 1) * w].copy_from_slice(row)
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodFeaturesParams {
    pub max_new: usize,
    /// Fraction of the strongest response a corner must reach.
    pub quality_level: f64,
    /// Minimum Euclidean distance to occupied points and to each other.
    pub min_dist: f64,
    pub block_radius: usize,
    /// Candidates must satisfy `border <= x <= w-1-border`, same for y.
    pub border: usize,
}

impl Default for GoodFeaturesParams {
    fn default() -> Self {
        Self {
            max_new: 150,
            quality_level: 0.01,
            min_dist: 30.0,
            block_radius: 1,
            border: 0,
        }
    }
}

/// Uniform bucket grid over points, cell side = minimum distance, so a
/// conflicting point always lies in one of the 3×3 surrounding cells.
struct Occupancy {
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<Point2>>,
    min_dist_sq: f64,
}

impl Occupancy {
    fn new(width: usize, height: usize, min_dist: f64) -> Self {
        let cols = (width as f64 / min_dist).ceil().max(1.0) as usize;
        let rows = (height as f64 / min_dist).ceil().max(1.0) as usize;
        Self {
            cell: min_dist,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
            min_dist_sq: min_dist * min_dist,
        }
    }

    fn cell_of(&self, p: Point2) -> (usize, usize) {
        let cx = (p.u / self.cell).floor().clamp(0.0, (self.cols - 1) as f64) as usize;
        let cy = (p.v / self.cell).floor().clamp(0.0, (self.rows - 1) as f64) as usize;
        (cx, cy)
    }

    fn insert(&mut self, p: Point2) {
        let (cx, cy) = self.cell_of(p);
        self.buckets[cy * self.cols + cx].push(p);
    }

    fn is_free(&self, p: Point2) -> bool {
        let (cx, cy) = self.cell_of(p);
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1) {
                if self.buckets[y * self.cols + x]
                    .iter()
                    .any(|q| q.dist_sq(&p) < self.min_dist_sq)
                {
                    return false;
                }
            }
        }
        true
    }
}

/// Detects up to `max_new` integer-pixel corners at least `min_dist` away
/// from every `occupied` point and from each other.
///
/// Candidates are 3×3 local maxima of the Shi-Tomasi response at or above
/// `quality_level × max response`. They are visited strongest first, ties in
/// row-major order, and accepted greedily.
pub fn good_features_to_track(
    image: &Image,
    params: &GoodFeaturesParams,
    occupied: &[Point2],
) -> Result<Vec<Point2>, DetectError> {
    if !(params.quality_level > 0.0 && params.quality_level < 1.0) {
        return Err(DetectError::QualityLevel(params.quality_level));
    }
    if !(params.min_dist >= 1.0) {
        return Err(DetectError::MinDistance(params.min_dist));
    }
    if params.max_new == 0 {
        return Ok(Vec::new());
    }
    let mut candidates = corner_candidates(image, params)?;

    let mut mask = Occupancy::new(image.width(), image.height(), params.min_dist);
    for &p in occupied {
        mask.insert(p);
    }
    let mut accepted = Vec::with_capacity(params.max_new);
    while let Some(Candidate { index: idx, .. }) = candidates.pop() {
        let p = Point2::new((idx % image.width()) as f64, (idx / image.width()) as f64);
        if mask.is_free(p) {
            mask.insert(p);
            accepted.push(p);
            if accepted.len() == params.max_new {
                break;
            }
        }
    }
    Ok(accepted)
}

/// Maximum of two responses, which are never NaN.
#[inline]
fn fmax(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

/// A local maximum; the greatest is the strongest, ties going to the
/// lowest row-major index.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    response: f64,
    index: usize,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.response
            .total_cmp(&other.response)
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// Qualifying local maxima, popped strongest first. Usually only a small
/// prefix is consumed, so they are heaped rather than sorted.
fn corner_candidates(
    image: &Image,
    params: &GoodFeaturesParams,
) -> Result<BinaryHeap<Candidate>, DetectError> {
    let (w, h) = (image.width(), image.height());
    let needed = 2 * params.block_radius + 3;
    if w < needed || h < needed {
        return Err(DetectError::ImageTooSmall {
            width: w,
            height: h,
            block_radius: params.block_radius,
            needed,
        });
    }
    let lo = params.border.max(1);
    let (hi_x, hi_y) = ((w - 1).saturating_sub(lo), (h - 1).saturating_sub(lo));

    // One pass finds the 3x3 maxima while tracking the global maximum;
    // maxima under the running threshold are dropped early.
    let mut max = 0.0f64;
    let mut out = Vec::new();
    // ring of the last three rows, and of their horizontal 3-maxima
    let mut rows = vec![0.0f64; 3 * w];
    let mut hmax = vec![0.0f64; 3 * w];
    response_rows(image, params.block_radius, |y, row| {
        let slot = (y % 3) * w;
        rows[slot..slot + w].copy_from_slice(row);
        let hm = &mut hmax[slot..slot + w];
        hm[0] = fmax(row[0], row[1]);
        hm[w - 1] = fmax(row[w - 2], row[w - 1]);
        for (m, t) in hm[1..w - 1].iter_mut().zip(row.windows(3)) {
            *m = fmax(fmax(t[0], t[1]), t[2]);
        }
        // independent lanes so the reduction vectorizes
        let mut lanes = [max; 4];
        let chunks = hm.chunks_exact(4);
        for &v in chunks.remainder() {
            lanes[0] = fmax(lanes[0], v);
        }
        for c in chunks {
            for (l, &v) in lanes.iter_mut().zip(c) {
                *l = fmax(*l, v);
            }
        }
        max = fmax(fmax(lanes[0], lanes[1]), fmax(lanes[2], lanes[3]));
        // row y completes the neighborhood of row y-1
        let Some(cy) = y.checked_sub(1) else { return };
        if cy < lo || cy > hi_y {
            return;
        }
        let (a, c, b) = (((cy + 2) % 3) * w, (cy % 3) * w, slot);
        let center = &rows[c..c + w];
        let (above, mid, below) = (&hmax[a..a + w], &hmax[c..c + w], &hmax[b..b + w]);
        // the maximum only grows, so this never exceeds the final threshold
        let floor = params.quality_level * max;
        for x in lo..=hi_x {
            let v = center[x];
            if (v > 0.0) & (v >= floor) & (v >= above[x]) & (v >= mid[x]) & (v >= below[x]) {
                out.push(Candidate {
                    response: v,
                    index: cy * w + x,
                });
            }
        }
    });
    let threshold = params.quality_level * max;
    out.retain(|c| c.response >= threshold);
    Ok(BinaryHeap::from(out))
}
