//! Shi-Tomasi corners on a synthetic texture, masked around existing features.

use flowtrack::detect::{good_features_to_track, GoodFeaturesParams};
use flowtrack::synth::gen_texture;
use flowtrack::Point2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = gen_texture(256, 192, 7);
    let occupied = [Point2::new(128.0, 96.0)];
    let params = GoodFeaturesParams {
        max_new: 40,
        min_dist: 20.0,
        border: 2,
        ..GoodFeaturesParams::default()
    };
    let corners = good_features_to_track(&image, &params, &occupied)?;
    println!("{} corners (strongest first)", corners.len());
    for p in corners.iter().take(10) {
        println!(
            "  ({}, {})  {:.1} px from the occupied point",
            p.u,
            p.v,
            p.dist(&occupied[0])
        );
    }
    Ok(())
}
