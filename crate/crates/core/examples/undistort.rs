//! Undistort pixels with a radial-tangential camera and reproject them.

use flowtrack::{PinholeRadTan, Point2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cam = PinholeRadTan::new(460.0, 460.0, 376.0, 240.0, -0.28, 0.07, 0.0002, 0.00002)?;
    for (u, v) in [(376.0, 240.0), (10.0, 10.0), (700.0, 400.0), (200.0, 450.0)] {
        let (x, y) = cam.undistort_pixel(Point2::new(u, v))?;
        let back = cam.project(x, y);
        println!(
            "({u:>5}, {v:>5}) -> ({x:+.6}, {y:+.6}) -> ({:.9}, {:.9})",
            back.u, back.v
        );
    }
    Ok(())
}
