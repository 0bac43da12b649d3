//! Sample a dense flow field at sparse feature positions.

use flowtrack::flow::{flow_from_homography, track_with_flow};
use flowtrack::{Feature, FeatureId, FeatureSet, Homography, Point2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (320, 240);
    let center = Point2::new((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let hom = Homography::similarity_about(center, 0.01, 1.002, 2.0, -1.0);
    let flow = flow_from_homography(&hom, w, h)?;

    let features = FeatureSet::from_vec(
        [(40.0, 30.0), (160.5, 120.25), (300.0, 200.0)]
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| Feature::new(FeatureId(i as u64), Point2::new(u, v)))
            .collect(),
    );
    for ((moved, id), f) in track_with_flow(&flow, &features)?
        .into_iter()
        .zip(features.iter())
    {
        let exact = hom.apply(f.position);
        println!(
            "{id}: ({:.3}, {:.3}) -> ({:.3}, {:.3})  exact ({:.3}, {:.3})",
            f.position.u, f.position.v, moved.u, moved.v, exact.u, exact.v
        );
    }
    Ok(())
}
