use std::collections::{BTreeSet, HashMap};

use flowtrack::flow::ConstantFlowProvider;
use flowtrack::synth::gen_texture;
use flowtrack::tracker::{FeatureObservation, TrackerError};
use flowtrack::{PinholeRadTan, Point2, RejectionConfig, Tracker, TrackerConfig};
use proptest::prelude::*;

const W: usize = 96;
const H: usize = 80;

fn camera() -> PinholeRadTan {
    PinholeRadTan::new(90.0, 92.0, 47.5, 39.5, -0.1, 0.02, 0.0005, -0.0003).unwrap()
}

#[derive(Debug, Clone)]
struct Scenario {
    cfg: TrackerConfig,
    /// `(texture seed, time step, du, dv)` per frame after the first.
    steps: Vec<(u64, f64, f64, f64)>,
    first_seed: u64,
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        1usize..60,
        4.0f64..25.0,
        0.0f64..8.0,
        1usize..4,
        any::<u64>(),
        proptest::collection::vec(
            (any::<u64>(), 0.001f64..0.5, -6.0f64..6.0, -6.0f64..6.0),
            1..6,
        ),
    )
        .prop_map(
            |(max_features, min_dist, border_margin, block_radius, first_seed, steps)| {
                let mut cfg = TrackerConfig::new(camera());
                cfg.max_features = max_features;
                cfg.min_dist = min_dist;
                cfg.border_margin = border_margin;
                cfg.block_radius = block_radius;
                Scenario {
                    cfg,
                    steps,
                    first_seed,
                }
            },
        )
}

fn by_id(features: &[FeatureObservation]) -> HashMap<u64, FeatureObservation> {
    features.iter().map(|f| (f.id.0, *f)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_invariants_hold(s in scenario()) {
        let cfg = s.cfg;
        let mut tracker = Tracker::new(cfg).unwrap();
        let mut t = 0.0;
        let first = tracker.process_frame(gen_texture(W, H, s.first_seed), &ConstantFlowProvider { du: 0.0, dv: 0.0 }).unwrap();
        let mut prev = first.features.clone();
        let mut max_id = prev.iter().map(|f| f.id.0).max();
        prop_assert!(prev.iter().all(|f| f.track_count == 1 && f.vx == 0.0 && f.vy == 0.0));

        for &(seed, dt, du, dv) in &s.steps {
            let prev_t = t;
            t += dt;
            let image = gen_texture(W, H, seed).with_timestamp(t).unwrap();
            let out = tracker.process_frame(image, &ConstantFlowProvider { du, dv }).unwrap();
            let before = by_id(&prev);
            let ids: Vec<u64> = out.features.iter().map(|f| f.id.0).collect();
            let unique: BTreeSet<u64> = ids.iter().copied().collect();
            prop_assert_eq!(unique.len(), ids.len());
            prop_assert!(out.features.len() <= cfg.max_features);
            prop_assert_eq!(out.timestamp, t);

            // Every previous feature is accounted for exactly once.
            let mut fate: Vec<u64> = out.report.dropped_border.iter().chain(&out.report.rejected).map(|i| i.0).collect();
            fate.extend(ids.iter().filter(|i| before.contains_key(i)));
            fate.sort_unstable();
            let mut expected: Vec<u64> = before.keys().copied().collect();
            expected.sort_unstable();
            prop_assert_eq!(fate, expected);

            let added: BTreeSet<u64> = out.report.added.iter().map(|i| i.0).collect();
            let (max_u, max_v) = ((W - 1) as f64 - cfg.border_margin, (H - 1) as f64 - cfg.border_margin);
            for f in &out.features {
                let p = f.position;
                prop_assert!(p.u >= cfg.border_margin && p.v >= cfg.border_margin && p.u <= max_u && p.v <= max_v);
                let (x, y) = camera().undistort_pixel(p).unwrap();
                prop_assert_eq!((f.x_un, f.y_un), (x, y));
                match before.get(&f.id.0) {
                    Some(old) => {
                        prop_assert!(!added.contains(&f.id.0));
                        prop_assert_eq!(f.track_count, old.track_count + 1);
                        // Bilinear weights sum to one only up to rounding.
                        prop_assert!(p.dist(&Point2::new(old.position.u + du, old.position.v + dv)) < 1e-12);
                        prop_assert_eq!(f.vx, (f.x_un - old.x_un) / (t - prev_t));
                        prop_assert_eq!(f.vy, (f.y_un - old.y_un) / (t - prev_t));
                    }
                    None => {
                        prop_assert!(added.contains(&f.id.0));
                        prop_assert!(Some(f.id.0) > max_id);
                        prop_assert_eq!(f.track_count, 1);
                        prop_assert_eq!((f.vx, f.vy), (0.0, 0.0));
                        for g in out.features.iter().filter(|g| g.id != f.id) {
                            prop_assert!(p.dist(&g.position) >= cfg.min_dist);
                        }
                    }
                }
            }
            prop_assert_eq!(added.len(), out.report.added.len());
            max_id = ids.iter().copied().max().max(max_id);
            prev = out.features;
        }
    }
}

#[test]
fn feature_pushed_past_the_border_is_replaced() {
    let mut cfg = TrackerConfig::new(camera());
    cfg.max_features = 40;
    cfg.min_dist = 8.0;
    cfg.rejection = RejectionConfig {
        tau_abs: f64::INFINITY,
        ..RejectionConfig::default()
    };
    let mut tracker = Tracker::new(cfg).unwrap();
    let first = tracker
        .process_frame(
            gen_texture(W, H, 1),
            &ConstantFlowProvider { du: 0.0, dv: 0.0 },
        )
        .unwrap();
    let edge = (W - 1) as f64 - cfg.border_margin;
    let doomed: BTreeSet<u64> = first
        .features
        .iter()
        .filter(|f| f.position.u + 5.0 > edge)
        .map(|f| f.id.0)
        .collect();
    assert!(!doomed.is_empty());

    let out = tracker
        .process_frame(
            gen_texture(W, H, 1).with_timestamp(0.05).unwrap(),
            &ConstantFlowProvider { du: 5.0, dv: 0.0 },
        )
        .unwrap();
    let dropped: BTreeSet<u64> = out.report.dropped_border.iter().map(|i| i.0).collect();
    assert_eq!(dropped, doomed);
    assert!(out.report.rejected.is_empty());
    assert!(!out.report.added.is_empty());
    assert!(out.features.iter().all(|f| !doomed.contains(&f.id.0)));
}

#[test]
fn rejected_timestamp_keeps_state() {
    let mut tracker = Tracker::new(TrackerConfig::new(camera())).unwrap();
    let zero = ConstantFlowProvider { du: 0.0, dv: 0.0 };
    tracker
        .process_frame(gen_texture(W, H, 1).with_timestamp(1.0).unwrap(), &zero)
        .unwrap();
    let snapshot = tracker.state().unwrap().features().clone();
    let err = tracker
        .process_frame(gen_texture(W, H, 2).with_timestamp(1.0).unwrap(), &zero)
        .unwrap_err();
    assert!(matches!(err, TrackerError::Timestamp { .. }));
    assert_eq!(tracker.state().unwrap().features(), &snapshot);
    assert_eq!(tracker.state().unwrap().frame_index(), 0);
    tracker
        .process_frame(gen_texture(W, H, 2).with_timestamp(1.5).unwrap(), &zero)
        .unwrap();
    assert_eq!(tracker.state().unwrap().frame_index(), 1);
}
