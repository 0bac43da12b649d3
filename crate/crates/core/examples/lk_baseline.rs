//! Pyramidal Lucas-Kanade on a shifted texture.

use flowtrack::detect::{good_features_to_track, GoodFeaturesParams};
use flowtrack::pyrlk::{build_pyramid, lk_track, LkParams};
use flowtrack::synth::gen_texture;
use flowtrack::Image;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h, sx, sy) = (200, 160, 3, 2);
    let big = gen_texture(w + sx, h + sy, 11);
    let crop = |ox: usize, oy: usize| {
        let data = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| big.get(x + ox, y + oy))
            .collect();
        Image::new(w, h, data, 0.0)
    };
    // Content moves by (+sx, +sy) from prev to next.
    let prev = crop(sx, sy)?;
    let next = crop(0, 0)?;

    let params = LkParams::default();
    let points = good_features_to_track(
        &prev,
        &GoodFeaturesParams {
            max_new: 20,
            border: 20,
            ..GoodFeaturesParams::default()
        },
        &[],
    )?;
    let results = lk_track(
        &build_pyramid(&prev, params.levels)?,
        &build_pyramid(&next, params.levels)?,
        &points,
        &params,
    );
    for (p, r) in points.iter().zip(&results) {
        println!(
            "({:>3}, {:>3})  status {}  displacement ({:+.3}, {:+.3})",
            p.u,
            p.v,
            r.status,
            r.position.u - p.u,
            r.position.v - p.v
        );
    }
    Ok(())
}
