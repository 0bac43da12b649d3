use flowtrack::detect::min_eig_response;
use flowtrack::synth::{
    gen_sequence, gen_texture, stream_seed, true_position, IlluminationStep, MotionSchedule,
    SequenceSpec,
};
use flowtrack::Point2;
use proptest::prelude::*;

fn small(seed: u64) -> SequenceSpec {
    SequenceSpec {
        width: 120,
        height: 90,
        frames: 4,
        seed,
        ..SequenceSpec::default()
    }
}

#[test]
fn sequences_are_deterministic() {
    let spec = SequenceSpec {
        motion: MotionSchedule {
            translation: (0.7, -1.3),
            rotation: 0.01,
            scale: 1.01,
        },
        ..small(42)
    };
    let (a, ga) = gen_sequence(&spec).unwrap();
    let (b, gb) = gen_sequence(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(ga, gb);
    let (c, _) = gen_sequence(&small(43)).unwrap();
    assert_ne!(a[0], c[0]);
}

#[test]
fn integer_translation_shifts_pixels_exactly() {
    let spec = SequenceSpec {
        motion: MotionSchedule {
            translation: (2.0, 1.0),
            ..MotionSchedule::default()
        },
        ..small(7)
    };
    let (frames, gt) = gen_sequence(&spec).unwrap();
    for t in 1..frames.len() {
        let p = true_position(&gt, t, Point2::new(10.0, 20.0)).unwrap();
        assert_eq!(p, Point2::new(12.0, 21.0));
        for y in 0..spec.height - 1 {
            for x in 0..spec.width - 2 {
                assert_eq!(
                    frames[t].get(x + 2, y + 1),
                    frames[t - 1].get(x, y),
                    "t={t} ({x},{y})"
                );
            }
        }
    }
}

#[test]
fn timestamps_follow_fps() {
    let spec = SequenceSpec {
        fps: 25.0,
        ..small(1)
    };
    let (frames, gt) = gen_sequence(&spec).unwrap();
    for (t, f) in frames.iter().enumerate() {
        assert_eq!(f.timestamp(), t as f64 / 25.0);
    }
    assert_eq!(gt.homographies.len(), frames.len() - 1);
    assert!(gt.homography(0).is_none());
    assert_eq!(gt.homography(1), Some(&spec.frame_homography()));
}

#[test]
fn illumination_step_changes_brightness_from_its_frame() {
    let spec = SequenceSpec {
        illumination: vec![IlluminationStep {
            frame: 2,
            gain: 1.0,
            bias: 60.0,
        }],
        ..small(3)
    };
    let (frames, _) = gen_sequence(&spec).unwrap();
    assert_eq!(frames[0], frames[1].clone().with_timestamp(0.0).unwrap());
    for (a, b) in frames[1].data().iter().zip(frames[2].data()) {
        assert_eq!(*b as u16, (*a as u16 + 60).min(255));
    }
    assert_eq!(frames[2].data(), frames[3].data());
}

#[test]
fn partial_coverage_leaves_weak_texture() {
    let flat_fraction = |coverage: f64| {
        let spec = SequenceSpec {
            texture_coverage: coverage,
            width: 200,
            height: 160,
            ..small(5)
        };
        let f = &gen_sequence(&spec).unwrap().0[0];
        let r = min_eig_response(f, 2).unwrap();
        let max = r.data().iter().copied().fold(0.0, f64::max);
        r.data().iter().filter(|&&v| v < 0.01 * max).count() as f64 / r.data().len() as f64
    };
    assert!(flat_fraction(0.3) > flat_fraction(1.0) + 0.1);
}

#[test]
fn invalid_spec_is_rejected() {
    for spec in [
        SequenceSpec {
            frames: 1,
            ..small(1)
        },
        SequenceSpec {
            texture_coverage: 0.0,
            ..small(1)
        },
        SequenceSpec {
            corruption_rate: 1.5,
            ..small(1)
        },
        SequenceSpec {
            fps: 0.0,
            ..small(1)
        },
    ] {
        assert!(gen_sequence(&spec).is_err(), "{spec:?}");
    }
}

proptest! {
    #[test]
    fn stream_seeds_separate_streams(seed in any::<u64>(), a in 0u64..16, b in 0u64..16) {
        prop_assume!(a != b);
        prop_assert_ne!(stream_seed(seed, a), stream_seed(seed, b));
        prop_assert_eq!(stream_seed(seed, a), stream_seed(seed, a));
    }

    #[test]
    fn texture_depends_only_on_its_inputs(seed in any::<u64>()) {
        prop_assert_eq!(gen_texture(40, 32, seed), gen_texture(40, 32, seed));
    }
}
