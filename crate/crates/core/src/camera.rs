//! Pinhole camera with four-coefficient radial-tangential distortion.

use thiserror::Error;

use crate::image::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("focal lengths must be positive, got fx={fx} fy={fy}")]
    FocalLength { fx: f64, fy: f64 },
    #[error("camera parameter {0} is not finite")]
    NotFinite(&'static str),
    #[error("undistortion did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Iterations allowed when inverting the distortion model.
pub const UNDISTORT_MAX_ITERS: usize = 100;
/// Stop once a fixed-point update is shorter than this (normalized units).
pub const UNDISTORT_TOL: f64 = 1e-14;
/// Largest reprojection residual (normalized units) accepted at the cap.
pub const UNDISTORT_MAX_RESIDUAL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeRadTan {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl PinholeRadTan {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        k1: f64,
        k2: f64,
        p1: f64,
        p2: f64,
    ) -> Result<Self, CameraError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            k1,
            k2,
            p1,
            p2,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Distortion-free intrinsics.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, CameraError> {
        Self::new(fx, fy, cx, cy, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let named = [
            ("fx", self.fx),
            ("fy", self.fy),
            ("cx", self.cx),
            ("cy", self.cy),
            ("k1", self.k1),
            ("k2", self.k2),
            ("p1", self.p1),
            ("p2", self.p2),
        ];
        if let Some((name, _)) = named.iter().find(|(_, v)| !v.is_finite()) {
            return Err(CameraError::NotFinite(name));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::FocalLength {
                fx: self.fx,
                fy: self.fy,
            });
        }
        Ok(())
    }

    #[inline]
    fn radial(&self, x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        1.0 + self.k1 * r2 + self.k2 * r2 * r2
    }

    #[inline]
    fn tangential(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        (
            2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x),
            self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y,
        )
    }

    /// Applies lens distortion in the normalized image plane.
    pub fn distort(&self, x: f64, y: f64) -> (f64, f64) {
        let radial = self.radial(x, y);
        let (tx, ty) = self.tangential(x, y);
        (x * radial + tx, y * radial + ty)
    }

    /// Normalized undistorted coordinates to pixels.
    pub fn project(&self, x: f64, y: f64) -> Point2 {
        let (xd, yd) = self.distort(x, y);
        Point2::new(self.fx * xd + self.cx, self.fy * yd + self.cy)
    }

    /// Pixels to normalized undistorted coordinates, inverting the distortion
    /// by fixed-point iteration `x ← (x_d − tangential(x)) / radial(x)`.
    pub fn undistort_pixel(&self, p: Point2) -> Result<(f64, f64), CameraError> {
        let xd = (p.u - self.cx) / self.fx;
        let yd = (p.v - self.cy) / self.fy;
        if self.k1 == 0.0 && self.k2 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0 {
            return Ok((xd, yd));
        }
        let (mut x, mut y) = (xd, yd);
        let mut iterations = 0;
        while iterations < UNDISTORT_MAX_ITERS {
            iterations += 1;
            let radial = self.radial(x, y);
            let (tx, ty) = self.tangential(x, y);
            let nx = (xd - tx) / radial;
            let ny = (yd - ty) / radial;
            let step = ((nx - x).powi(2) + (ny - y).powi(2)).sqrt();
            x = nx;
            y = ny;
            if !(step >= UNDISTORT_TOL) {
                break;
            }
        }
        let (rx, ry) = self.distort(x, y);
        let residual = ((rx - xd).powi(2) + (ry - yd).powi(2)).sqrt();
        if !(residual <= UNDISTORT_MAX_RESIDUAL) {
            return Err(CameraError::NoConvergence {
                iterations,
                residual,
            });
        }
        Ok((x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_examples() {
        let cam = PinholeRadTan::pinhole(100.0, 100.0, 50.0, 50.0).unwrap();
        assert_eq!(cam.project(1.0, 0.0), Point2::new(150.0, 50.0));

        let cam =
            PinholeRadTan::new(400.0, 410.0, 320.0, 240.0, -0.2, 0.05, 0.001, -0.002).unwrap();
        assert_eq!(cam.project(0.0, 0.0), Point2::new(320.0, 240.0));

        let cam = PinholeRadTan::new(1.0, 1.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0).unwrap();
        let p = cam.project(1.0, 0.0);
        assert!((p.u - 1.1).abs() < 1e-15 && p.v == 0.0);
    }

    #[test]
    fn zero_distortion_is_affine_inverse() {
        let cam = PinholeRadTan::pinhole(458.654, 457.296, 367.215, 248.375).unwrap();
        let (x, y) = cam.undistort_pixel(Point2::new(100.0, 400.0)).unwrap();
        assert_eq!(x, (100.0 - 367.215) / 458.654);
        assert_eq!(y, (400.0 - 248.375) / 457.296);
    }

    #[test]
    fn principal_point_maps_to_origin() {
        let cam = PinholeRadTan::new(300.0, 300.0, 160.0, 120.0, 0.3, -0.1, 0.01, 0.01).unwrap();
        assert_eq!(
            cam.undistort_pixel(Point2::new(160.0, 120.0)).unwrap(),
            (0.0, 0.0)
        );
    }

    #[test]
    fn invalid_intrinsics() {
        assert!(matches!(
            PinholeRadTan::pinhole(0.0, 1.0, 0.0, 0.0),
            Err(CameraError::FocalLength { .. })
        ));
        assert!(matches!(
            PinholeRadTan::new(1.0, 1.0, 0.0, 0.0, f64::NAN, 0.0, 0.0, 0.0),
            Err(CameraError::NotFinite("k1"))
        ));
    }

    #[test]
    fn divergent_model_reports_residual() {
        // Far outside the contractive range: radial term dominates.
        let cam = PinholeRadTan::new(1.0, 1.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0).unwrap();
        match cam.undistort_pixel(Point2::new(3.0, 0.0)) {
            Err(CameraError::NoConvergence { residual, .. }) => assert!(!(residual <= 1e-3)),
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn round_trip_in_validated_range(
            fx in 200.0f64..900.0, fy in 200.0f64..900.0,
            cx in 100.0f64..400.0, cy in 100.0f64..300.0,
            k1 in -0.3f64..0.3, k2 in -0.1f64..0.1,
            p1 in -0.01f64..0.01, p2 in -0.01f64..0.01,
            r in 0.0f64..0.8, theta in 0.0f64..std::f64::consts::TAU,
        ) {
            let cam = PinholeRadTan::new(fx, fy, cx, cy, k1, k2, p1, p2).unwrap();
            let (x, y) = (r * theta.cos(), r * theta.sin());
            let pix = cam.project(x, y);
            let (ux, uy) = cam.undistort_pixel(pix).unwrap();
            prop_assert!((ux - x).abs() < 1e-6 && (uy - y).abs() < 1e-6);
            prop_assert!(cam.project(ux, uy).dist(&pix) < 1e-6);
        }
    }
}
