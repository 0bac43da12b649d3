//! Pyramidal Lucas-Kanade sparse tracking, the classic KLT baseline.

use thiserror::Error;

use crate::image::{Grid, Image, ImageError, Point2, MIN_IMAGE_SIDE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PyramidError {
    #[error("pyramid needs at least one level")]
    NoLevels,
    #[error("{levels} levels would shrink a {width}x{height} image below {min}x{min}")]
    TooManyLevels {
        levels: usize,
        width: usize,
        height: usize,
        min: usize,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Level 0 is the input; each following level halves both sides (floor).
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<Image>,
}

impl Pyramid {
    pub fn levels(&self) -> &[Image] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &Image {
        &self.levels[k]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// 2×2 block mean rounded to the nearest intensity; odd trailing rows and
/// columns are dropped.
pub fn half_sample(data: &[u8], width: usize, height: usize) -> (Vec<u8>, usize, usize) {
    let (w2, h2) = (width / 2, height / 2);
    let mut out = Vec::with_capacity(w2 * h2);
    for y in 0..h2 {
        let r0 = &data[2 * y * width..];
        let r1 = &data[(2 * y + 1) * width..];
        for x in 0..w2 {
            let sum =
                r0[2 * x] as u32 + r0[2 * x + 1] as u32 + r1[2 * x] as u32 + r1[2 * x + 1] as u32;
            out.push(((sum + 2) / 4) as u8);
        }
    }
    (out, w2, h2)
}

pub fn build_pyramid(image: &Image, levels: usize) -> Result<Pyramid, PyramidError> {
    if levels == 0 {
        return Err(PyramidError::NoLevels);
    }
    let shrink = 1usize << (levels - 1);
    if image.width() / shrink < MIN_IMAGE_SIDE || image.height() / shrink < MIN_IMAGE_SIDE {
        return Err(PyramidError::TooManyLevels {
            levels,
            width: image.width(),
            height: image.height(),
            min: MIN_IMAGE_SIDE,
        });
    }
    let mut out = Vec::with_capacity(levels);
    out.push(image.clone());
    for _ in 1..levels {
        let prev = out.last().unwrap();
        let (data, w, h) = half_sample(prev.data(), prev.width(), prev.height());
        out.push(Image::new(w, h, data, image.timestamp())?);
    }
    Ok(Pyramid { levels: out })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkParams {
    /// Integration window is `(2r+1)²` pixels.
    pub window_radius: usize,
    pub levels: usize,
    pub max_iters: usize,
    /// Stop once an update is shorter than this, in pixels of the current level.
    pub eps: f64,
    /// Minimum eigenvalue of the structure tensor divided by the window area.
    /// Intensities are gray levels scaled by 1/32, which gives the threshold
    /// the same meaning as in OpenCV's `calcOpticalFlowPyrLK`.
    pub min_eig_threshold: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            window_radius: 10,
            levels: 3,
            max_iters: 30,
            eps: 0.01,
            min_eig_threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkResult {
    pub position: Point2,
    pub status: bool,
}

/// Per-level data of the reference frame: intensities and their gradients.
struct LevelGrids {
    intensity: Grid,
    grad_x: Grid,
    grad_y: Grid,
}

/// Central differences smoothed with the 3-10-3 Scharr taps across the
/// derivative direction; borders replicate.
pub fn scharr_gradients(img: &Grid) -> (Grid, Grid) {
    let (w, h) = (img.width(), img.height());
    let at = |x: isize, y: isize| {
        img.get(
            x.clamp(0, w as isize - 1) as usize,
            y.clamp(0, h as isize - 1) as usize,
        )
    };
    let mut gx = Grid::filled(w, h, 0.0);
    let mut gy = Grid::filled(w, h, 0.0);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = 3.0 * (at(x + 1, y - 1) - at(x - 1, y - 1))
                + 10.0 * (at(x + 1, y) - at(x - 1, y))
                + 3.0 * (at(x + 1, y + 1) - at(x - 1, y + 1));
            let dy = 3.0 * (at(x - 1, y + 1) - at(x - 1, y - 1))
                + 10.0 * (at(x, y + 1) - at(x, y - 1))
                + 3.0 * (at(x + 1, y + 1) - at(x + 1, y - 1));
            gx.set(x as usize, y as usize, dx / 32.0);
            gy.set(x as usize, y as usize, dy / 32.0);
        }
    }
    (gx, gy)
}

fn min_eigenvalue(gxx: f64, gxy: f64, gyy: f64) -> f64 {
    let half_trace = 0.5 * (gxx + gyy);
    let half_diff = 0.5 * (gxx - gyy);
    half_trace - (half_diff * half_diff + gxy * gxy).sqrt()
}

/// Tracks `points` from `prev` to `next`, coarse to fine.
///
/// Results come back in input order. A point fails when its structure
/// tensor is too weak, when it leaves the image at any level, or when an
/// update exceeds the window size.
pub fn lk_track(
    prev: &Pyramid,
    next: &Pyramid,
    points: &[Point2],
    params: &LkParams,
) -> Vec<LkResult> {
    let levels = params.levels.min(prev.len()).min(next.len()).max(1);
    let scale = 1.0 / 32.0;
    let reference: Vec<LevelGrids> = (0..levels)
        .map(|k| {
            let intensity = prev.level(k).to_grid(scale);
            let (grad_x, grad_y) = scharr_gradients(&intensity);
            LevelGrids {
                intensity,
                grad_x,
                grad_y,
            }
        })
        .collect();
    let targets: Vec<Grid> = (0..levels).map(|k| next.level(k).to_grid(scale)).collect();

    points
        .iter()
        .map(|&p| track_point(&reference, &targets, p, params))
        .collect()
}

fn track_point(
    reference: &[LevelGrids],
    targets: &[Grid],
    p: Point2,
    params: &LkParams,
) -> LkResult {
    let r = params.window_radius as isize;
    let side = (2 * r + 1) as usize;
    let area = (side * side) as f64;
    let failed = LkResult {
        position: p,
        status: false,
    };

    let mut guess = Point2::default();
    let mut patch = vec![(0.0, 0.0, 0.0); side * side];

    for level in (0..reference.len()).rev() {
        let refl = &reference[level];
        let target = &targets[level];
        let factor = (1u32 << level) as f64;
        let base = Point2::new(p.u / factor, p.v / factor);
        if !refl.intensity.contains(base) {
            return failed;
        }

        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        let mut idx = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                let (u, v) = (base.u + dx as f64, base.v + dy as f64);
                let i = refl.intensity.sample_clamped(u, v);
                let ix = refl.grad_x.sample_clamped(u, v);
                let iy = refl.grad_y.sample_clamped(u, v);
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
                patch[idx] = (i, ix, iy);
                idx += 1;
            }
        }
        if min_eigenvalue(gxx, gxy, gyy) / area < params.min_eig_threshold {
            return failed;
        }
        let det = gxx * gyy - gxy * gxy;

        let mut d = Point2::default();
        for _ in 0..params.max_iters {
            let q = base + guess + d;
            if !target.contains(q) {
                return failed;
            }
            let (mut bx, mut by) = (0.0, 0.0);
            let mut idx = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (i, ix, iy) = patch[idx];
                    let diff = i - target.sample_clamped(q.u + dx as f64, q.v + dy as f64);
                    bx += diff * ix;
                    by += diff * iy;
                    idx += 1;
                }
            }
            let step = Point2::new((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
            if !(step.norm() <= side as f64) {
                return failed;
            }
            d = d + step;
            if step.norm() < params.eps {
                break;
            }
        }

        guess = guess + d;
        if level > 0 {
            guess = Point2::new(2.0 * guess.u, 2.0 * guess.v);
        }
    }

    let position = p + guess;
    if !targets[0].contains(position) {
        return failed;
    }
    LkResult {
        position,
        status: true,
    }
}
