//! Run the tracker over a synthetic sequence with corrupted flow and score
//! the rejection against the known corruption.

use std::collections::BTreeSet;

use flowtrack::synth::{
    corrupted_gt_flow_provider, gen_sequence, true_position, MotionSchedule, SequenceSpec,
};
use flowtrack::{PinholeRadTan, Tracker, TrackerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SequenceSpec {
        frames: 15,
        motion: MotionSchedule {
            translation: (1.5, 1.0),
            rotation: 0.002,
            scale: 1.0,
        },
        corruption_rate: 0.1,
        ..SequenceSpec::default()
    };
    let (frames, gt) = gen_sequence(&spec)?;
    let provider = corrupted_gt_flow_provider(&gt, &spec);
    let camera = PinholeRadTan::new(460.0, 460.0, 376.0, 240.0, -0.28, 0.07, 0.0002, 0.00002)?;
    let mut tracker = Tracker::new(TrackerConfig::new(camera))?;

    for (t, image) in frames.into_iter().enumerate() {
        let before: Vec<_> = tracker
            .state()
            .map(|s| s.features().iter().copied().collect())
            .unwrap_or_default();
        let out = tracker.process_frame(image, &provider)?;
        let corrupted: BTreeSet<_> = provider
            .corrupted()
            .get(&t)
            .cloned()
            .unwrap_or_default()
            .into_iter()
            .collect();
        let rejected: BTreeSet<_> = out.report.rejected.iter().copied().collect();
        let epe = out
            .features
            .iter()
            .filter(|o| o.track_count > 1 && !corrupted.contains(&o.id))
            .filter_map(|o| {
                let prev = before.iter().find(|f| f.id == o.id)?;
                Some(true_position(&gt, t, prev.position)?.dist(&o.position))
            })
            .fold(0.0f64, f64::max);
        println!(
            "frame {t:>2}: {:>3} features, +{:>3} new, {:>2} border, {:>2} rejected ({} of {} corrupted), max clean EPE {epe:.2e}",
            out.features.len(),
            out.report.added.len(),
            out.report.dropped_border.len(),
            rejected.len(),
            rejected.intersection(&corrupted).count(),
            corrupted.len()
        );
    }
    Ok(())
}
