mod common;

use flowtrack::detect::{good_features_to_track, min_eig_response, GoodFeaturesParams};
use flowtrack::synth::{gen_texture, gen_texture_with_blobs};
use flowtrack::{Image, Point2};
use proptest::prelude::*;

fn white_square(size: usize, lo: usize, hi: usize) -> Image {
    let data = (0..size * size)
        .map(|i| {
            let (x, y) = (i % size, i / size);
            if (lo..=hi).contains(&x) && (lo..=hi).contains(&y) {
                255
            } else {
                0
            }
        })
        .collect();
    Image::new(size, size, data, 0.0).unwrap()
}

#[test]
fn white_square_yields_its_four_corners() {
    let img = white_square(64, 20, 43);
    let params = GoodFeaturesParams {
        max_new: 10,
        min_dist: 10.0,
        ..GoodFeaturesParams::default()
    };
    let corners = good_features_to_track(&img, &params, &[]).unwrap();
    assert_eq!(corners.len(), 4, "{corners:?}");
    for truth in [(20.0, 20.0), (43.0, 20.0), (20.0, 43.0), (43.0, 43.0)] {
        let truth = Point2::new(truth.0, truth.1);
        assert!(
            corners.iter().any(|c| c.dist(&truth) <= 1.5),
            "no corner near {truth:?}: {corners:?}"
        );
    }
}

#[test]
fn white_square_matches_oracle() {
    let img = white_square(64, 20, 43);
    let params = GoodFeaturesParams {
        max_new: 10,
        min_dist: 10.0,
        ..GoodFeaturesParams::default()
    };
    assert_eq!(
        good_features_to_track(&img, &params, &[]).unwrap(),
        common::reference_corners(&img, &params, &[])
    );
}

#[test]
fn occupied_point_suppresses_nearby_corner() {
    let img = white_square(64, 20, 43);
    let params = GoodFeaturesParams {
        max_new: 10,
        min_dist: 10.0,
        ..GoodFeaturesParams::default()
    };
    let occupied = [Point2::new(21.0, 21.0)];
    let corners = good_features_to_track(&img, &params, &occupied).unwrap();
    assert_eq!(corners.len(), 3);
    assert!(corners.iter().all(|c| c.dist(&occupied[0]) >= 10.0));
}

#[test]
fn response_is_symmetric_under_transpose() {
    let img = gen_texture(48, 48, 4);
    let transposed: Vec<u8> = (0..48 * 48).map(|i| img.get(i / 48, i % 48)).collect();
    let t = Image::new(48, 48, transposed, 0.0).unwrap();
    let (a, b) = (
        min_eig_response(&img, 2).unwrap(),
        min_eig_response(&t, 2).unwrap(),
    );
    for y in 0..48 {
        for x in 0..48 {
            assert_eq!(a.get(x, y), b.get(y, x));
        }
    }
}

fn params_strategy() -> impl Strategy<Value = GoodFeaturesParams> {
    (
        1usize..60,
        0.001f64..0.5,
        1.0f64..20.0,
        1usize..4,
        0usize..8,
    )
        .prop_map(|(max_new, quality_level, min_dist, block_radius, border)| {
            GoodFeaturesParams {
                max_new,
                quality_level,
                min_dist,
                block_radius,
                border,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_oracle(
        w in 24usize..80,
        h in 24usize..80,
        blobs in 1usize..60,
        seed in any::<u64>(),
        params in params_strategy(),
        occupied in proptest::collection::vec((0.0f64..80.0, 0.0f64..80.0), 0..6),
    ) {
        let img = gen_texture_with_blobs(w, h, blobs, seed);
        let occupied: Vec<Point2> = occupied.into_iter().map(|(u, v)| Point2::new(u, v)).collect();
        let got = good_features_to_track(&img, &params, &occupied).unwrap();
        prop_assert_eq!(got, common::reference_corners(&img, &params, &occupied));
    }

    #[test]
    fn output_respects_budget_spacing_and_border(
        seed in any::<u64>(),
        params in params_strategy(),
    ) {
        let img = gen_texture(96, 72, seed);
        let occupied = [Point2::new(48.0, 36.0), Point2::new(10.5, 60.25)];
        let got = good_features_to_track(&img, &params, &occupied).unwrap();
        prop_assert!(got.len() <= params.max_new);
        let b = params.border as f64;
        for (i, p) in got.iter().enumerate() {
            prop_assert!(p.u >= b && p.v >= b && p.u <= 95.0 - b && p.v <= 71.0 - b);
            prop_assert_eq!(p.u.fract(), 0.0);
            prop_assert_eq!(p.v.fract(), 0.0);
            for q in got[..i].iter().chain(&occupied) {
                prop_assert!(p.dist(q) >= params.min_dist);
            }
        }
    }
}
