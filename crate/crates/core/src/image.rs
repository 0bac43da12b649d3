//! Grayscale frames, real-valued grids and subpixel sampling.
//!
//! Coordinates follow the pixel-center convention: `(u, v)` addresses the
//! center of column `u`, row `v`, so the sampling domain of a `w × h` grid is
//! `[0, w-1] × [0, h-1]`.

use thiserror::Error;

/// Smallest frame side accepted by [`Image::new`].
pub const MIN_IMAGE_SIDE: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image must be at least {min}x{min}, got {width}x{height}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("buffer holds {actual} values, expected {expected} ({width}x{height})")]
    BufferSize {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("timestamp must be finite, got {0}")]
    Timestamp(f64),
}

/// Sampling outside `[0, w-1] × [0, h-1]`.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("point ({u}, {v}) outside sampling domain [0, {max_u}] x [0, {max_v}]")]
pub struct DomainError {
    pub u: f64,
    pub v: f64,
    pub max_u: f64,
    pub max_v: f64,
}

/// A subpixel image-plane point in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
}

impl Point2 {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn dist_sq(&self, other: &Point2) -> f64 {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        du * du + dv * dv
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.u * self.u + self.v * self.v).sqrt()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.u + rhs.u, self.v + rhs.v)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.u - rhs.u, self.v - rhs.v)
    }
}

/// An 8-bit grayscale frame with its capture time in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
    timestamp: f64,
}

impl Image {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<u8>,
        timestamp: f64,
    ) -> Result<Self, ImageError> {
        if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
            return Err(ImageError::TooSmall {
                width,
                height,
                min: MIN_IMAGE_SIDE,
            });
        }
        if data.len() != width * height {
            return Err(ImageError::BufferSize {
                width,
                height,
                expected: width * height,
                actual: data.len(),
            });
        }
        if !timestamp.is_finite() {
            return Err(ImageError::Timestamp(timestamp));
        }
        Ok(Self {
            width,
            height,
            data,
            timestamp,
        })
    }

    /// A frame filled with a single intensity.
    pub fn filled(
        width: usize,
        height: usize,
        value: u8,
        timestamp: f64,
    ) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height], timestamp)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Same pixels, different capture time.
    pub fn with_timestamp(mut self, timestamp: f64) -> Result<Self, ImageError> {
        if !timestamp.is_finite() {
            return Err(ImageError::Timestamp(timestamp));
        }
        self.timestamp = timestamp;
        Ok(self)
    }

    pub fn mean_intensity(&self) -> f64 {
        self.data.iter().map(|&p| p as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Intensities promoted to reals, scaled by `scale`.
    pub fn to_grid(&self, scale: f64) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&p| p as f64 * scale).collect(),
        }
    }
}

/// A dense, row-major real-valued 2-D field.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    /// Panics if `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "grid buffer size mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.u >= 0.0
            && p.v >= 0.0
            && p.u <= (self.width - 1) as f64
            && p.v <= (self.height - 1) as f64
    }

    /// Bilinear interpolation at a subpixel point; errors outside the domain.
    pub fn sample(&self, p: Point2) -> Result<f64, DomainError> {
        bilinear_sample(self, p)
    }

    /// Bilinear interpolation with coordinates clamped to the domain.
    #[inline]
    pub fn sample_clamped(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, (self.width - 1) as f64);
        let v = v.clamp(0.0, (self.height - 1) as f64);
        interpolate(self, u, v)
    }
}

/// Standard bilinear interpolation of the four grid cells around `p`.
///
/// Exact grid nodes return the stored value; points outside
/// `[0, w-1] × [0, h-1]` are a [`DomainError`].
pub fn bilinear_sample(grid: &Grid, p: Point2) -> Result<f64, DomainError> {
    if !grid.contains(p) {
        return Err(DomainError {
            u: p.u,
            v: p.v,
            max_u: (grid.width - 1) as f64,
            max_v: (grid.height - 1) as f64,
        });
    }
    Ok(interpolate(grid, p.u, p.v))
}

// Caller guarantees (u, v) is in-domain.
#[inline]
fn interpolate(grid: &Grid, u: f64, v: f64) -> f64 {
    let x0 = (u.floor() as usize).min(grid.width - 1);
    let y0 = (v.floor() as usize).min(grid.height - 1);
    let fx = u - x0 as f64;
    let fy = v - y0 as f64;
    let x1 = (x0 + 1).min(grid.width - 1);
    let y1 = (y0 + 1).min(grid.height - 1);

    let top = grid.get(x0, y0) * (1.0 - fx) + grid.get(x1, y0) * fx;
    if fy == 0.0 {
        return if fx == 0.0 { grid.get(x0, y0) } else { top };
    }
    let bottom = grid.get(x0, y1) * (1.0 - fx) + grid.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_grid_samples_constant() {
        let g = Grid::filled(12, 12, 7.0);
        assert_eq!(g.sample(Point2::new(3.4, 9.9)).unwrap(), 7.0);
    }

    #[test]
    fn linear_midpoint() {
        let g = Grid::from_vec(2, 2, vec![0.0, 2.0, 0.0, 2.0]);
        assert_eq!(g.sample(Point2::new(0.5, 0.5)).unwrap(), 1.0);
    }

    #[test]
    fn nodes_return_stored_values() {
        let g = Grid::from_fn(5, 4, |x, y| (x * 31 + y * 7) as f64 * 0.37 - 3.0);
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(
                    g.sample(Point2::new(x as f64, y as f64)).unwrap(),
                    g.get(x, y)
                );
            }
        }
    }

    #[test]
    fn out_of_domain_is_error() {
        let g = Grid::filled(4, 4, 1.0);
        assert!(g.sample(Point2::new(-0.01, 1.0)).is_err());
        assert!(g.sample(Point2::new(1.0, 3.0001)).is_err());
        assert!(g.sample(Point2::new(3.0, 3.0)).is_ok());
    }

    #[test]
    fn image_rejects_bad_buffers() {
        assert!(matches!(
            Image::new(4, 8, vec![0; 32], 0.0),
            Err(ImageError::TooSmall { .. })
        ));
        assert!(matches!(
            Image::new(8, 8, vec![0; 63], 0.0),
            Err(ImageError::BufferSize { .. })
        ));
        assert!(Image::new(8, 8, vec![0; 64], f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn sampling_is_linear_in_grid_values(
            w in 2usize..10, h in 2usize..10,
            seed_a in proptest::collection::vec(-100.0f64..100.0, 100),
            seed_b in proptest::collection::vec(-100.0f64..100.0, 100),
            a in -5.0f64..5.0, b in -5.0f64..5.0,
            fu in 0.0f64..1.0, fv in 0.0f64..1.0,
        ) {
            let g1 = Grid::from_fn(w, h, |x, y| seed_a[y * 10 + x]);
            let g2 = Grid::from_fn(w, h, |x, y| seed_b[y * 10 + x]);
            let mix = Grid::from_fn(w, h, |x, y| a * g1.get(x, y) + b * g2.get(x, y));
            let p = Point2::new(fu * (w - 1) as f64, fv * (h - 1) as f64);
            let lhs = mix.sample(p).unwrap();
            let rhs = a * g1.sample(p).unwrap() + b * g2.sample(p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
