//! Planar projective maps between pixel coordinate frames.

use std::fmt;

use crate::image::Point2;

/// A 3×3 matrix acting on homogeneous pixel coordinates `[u, v, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(pub [[f64; 3]; 3]);

impl Homography {
    pub const IDENTITY: Homography =
        Homography([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])
    }

    pub fn scaling(sx: f64, sy: f64) -> Self {
        Homography([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Homography([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Similarity about `center`: scale and rotate around it, then translate.
    pub fn similarity_about(center: Point2, angle: f64, scale: f64, tx: f64, ty: f64) -> Self {
        Homography::translation(tx + center.u, ty + center.v)
            .compose(&Homography::rotation(angle))
            .compose(&Homography::scaling(scale, scale))
            .compose(&Homography::translation(-center.u, -center.v))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Homography {
        let a = &self.0;
        let b = &other.0;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Homography(out)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Option<Homography> {
        let det = self.determinant();
        if !det.is_finite() || det.abs() < 1e-15 {
            return None;
        }
        let m = &self.0;
        let inv = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = inv[i][j] / det;
            }
        }
        Some(Homography(out))
    }

    /// Homogeneous scale `w` of `H·[u, v, 1]`.
    #[inline]
    pub fn scale_at(&self, p: Point2) -> f64 {
        let m = &self.0;
        m[2][0] * p.u + m[2][1] * p.v + m[2][2]
    }

    /// `dehomogenize(H·[u, v, 1])`.
    #[inline]
    pub fn apply(&self, p: Point2) -> Point2 {
        let m = &self.0;
        let w = self.scale_at(p);
        Point2::new(
            (m[0][0] * p.u + m[0][1] * p.v + m[0][2]) / w,
            (m[1][0] * p.u + m[1][1] * p.v + m[1][2]) / w,
        )
    }

    pub fn is_affine(&self) -> bool {
        self.0[2][0] == 0.0 && self.0[2][1] == 0.0 && self.0[2][2] == 1.0
    }
}

impl Default for Homography {
    fn default() -> Self {
        Homography::IDENTITY
    }
}

/// Row-major, nine whitespace-separated values.
impl fmt::Display for Homography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for row in &self.0 {
            for v in row {
                if !first {
                    f.write_str(" ")?;
                }
                first = false;
                write!(f, "{v:e}")?;
            }
        }
        Ok(())
    }
}
