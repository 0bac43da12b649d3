//! Generate a sequence with known motion and corrupted ground-truth flow.

use flowtrack::synth::{
    corrupted_gt_flow_provider, gen_sequence, IlluminationStep, MotionSchedule, SequenceSpec,
};
use flowtrack::{Feature, FeatureId, FeatureSet, Point2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SequenceSpec {
        width: 320,
        height: 240,
        frames: 6,
        seed: 5,
        motion: MotionSchedule {
            translation: (1.5, -0.5),
            rotation: 0.003,
            scale: 1.0,
        },
        illumination: vec![IlluminationStep {
            frame: 3,
            gain: 1.0,
            bias: 40.0,
        }],
        corruption_rate: 0.25,
        ..SequenceSpec::default()
    };
    let (frames, gt) = gen_sequence(&spec)?;
    for (t, f) in frames.iter().enumerate() {
        println!(
            "frame {t}  t={:.3}s  mean intensity {:.2}",
            f.timestamp(),
            f.mean_intensity()
        );
    }
    println!("per-frame homography:\n{}", gt.homographies[0]);

    let provider = corrupted_gt_flow_provider(&gt, &spec);
    let features = FeatureSet::from_vec(
        (0..40)
            .map(|i| {
                Feature::new(
                    FeatureId(i),
                    Point2::new(20.0 + 7.0 * i as f64, 30.0 + 4.0 * i as f64),
                )
            })
            .collect(),
    );
    let (_, corrupted) = provider.corrupt(1, spec.width, spec.height, &features)?;
    println!(
        "frame 1: {} of {} features corrupted",
        corrupted.len(),
        features.len()
    );
    Ok(())
}
