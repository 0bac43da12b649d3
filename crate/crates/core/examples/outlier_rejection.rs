//! Neighbor-median outlier rejection on a grid with a few corrupted vectors.

use flowtrack::reject::reject_outliers;
use flowtrack::{Point2, RejectionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut prev = Vec::new();
    for y in 0..6 {
        for x in 0..8 {
            prev.push(Point2::new(40.0 + 20.0 * x as f64, 40.0 + 20.0 * y as f64));
        }
    }
    let corrupted = [5usize, 20, 33];
    let curr: Vec<Point2> = prev
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (du, dv) = if corrupted.contains(&i) {
                (-14.0, 9.0)
            } else {
                (3.0, 1.5)
            };
            Point2::new(p.u + du, p.v + dv)
        })
        .collect();

    let keep = reject_outliers(&prev, &curr, &RejectionConfig::default())?;
    let rejected: Vec<usize> = keep
        .iter()
        .enumerate()
        .filter(|(_, k)| !**k)
        .map(|(i, _)| i)
        .collect();
    println!("corrupted {corrupted:?}");
    println!("rejected  {rejected:?}");
    Ok(())
}
