//! Evaluation of a tracking run against synthetic ground truth.
//!
//! Metrics CSV columns, one row per frame:
//!
//! | column | meaning |
//! |---|---|
//! | `frame`, `timestamp` | frame index and its time |
//! | `features` | features output at this frame |
//! | `survivors` | features with `track_count > 1` |
//! | `survival` | survivors / features of the previous frame |
//! | `epe_mean`, `epe_median` | endpoint error of survivors vs. the true position, px |
//! | `dropped_border`, `rejected` | drops per stage |
//! | `corrupted` | recorded corrupted ids that reached the outlier test |
//! | `true_positives` | rejected ∩ corrupted |
//! | `precision`, `recall` | of the outlier test |
//! | `*_ms` | stage wall-clock |
//!
//! The final `summary` row holds totals for the count columns, the minimum
//! per-frame survival, pooled EPE mean and median, micro-averaged precision
//! and recall, and the per-frame maximum of each timing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::time::Duration;

use super::tracks::{fmt_decimal, EventRow, EventStage, TimingRow, TrackRow};
use super::CliError;
use crate::feature::FeatureId;
use crate::image::Point2;
use crate::synth::{true_position, GroundTruth};
use crate::tracker::StageTimings;

pub const METRICS_HEADER: &str = "frame,timestamp,features,survivors,survival,epe_mean,epe_median,dropped_border,rejected,corrupted,true_positives,precision,recall,motion_ms,border_ms,reject_ms,replenish_ms,info_ms,post_motion_ms";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMetrics {
    pub frame: usize,
    pub timestamp: f64,
    pub features: usize,
    pub survivors: usize,
    /// `None` on the first frame.
    pub survival: Option<f64>,
    pub epe_mean: Option<f64>,
    pub epe_median: Option<f64>,
    pub dropped_border: usize,
    pub rejected: usize,
    pub corrupted: usize,
    pub true_positives: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub timings: Option<StageTimings>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub frames: usize,
    pub features: usize,
    pub survivors: usize,
    pub min_survival: Option<f64>,
    pub mean_survival: Option<f64>,
    pub epe_mean: Option<f64>,
    pub epe_median: Option<f64>,
    pub epe_max: Option<f64>,
    pub dropped_border: usize,
    pub rejected: usize,
    pub corrupted: usize,
    pub true_positives: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Per-stage maximum over frames after the first.
    pub max_timings: Option<StageTimings>,
    pub mean_post_motion: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub frames: Vec<FrameMetrics>,
    pub summary: Summary,
    /// Final length of every track → number of tracks.
    pub track_lengths: BTreeMap<u32, usize>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}

impl Metrics {
    /// `timings` may be empty. Tracks must be ordered by frame.
    pub fn compute(
        tracks: &[TrackRow],
        events: &[EventRow],
        timings: &[TimingRow],
        gt: &GroundTruth,
    ) -> Result<Self, CliError> {
        let mut by_frame: BTreeMap<usize, Vec<&TrackRow>> = BTreeMap::new();
        for row in tracks {
            by_frame.entry(row.frame).or_default().push(row);
        }
        let timing_of: HashMap<usize, StageTimings> =
            timings.iter().map(|t| (t.frame, t.timings)).collect();

        let mut frames = Vec::with_capacity(by_frame.len());
        let mut all_errors = Vec::new();
        let mut survivals = Vec::new();
        let mut lengths: HashMap<FeatureId, u32> = HashMap::new();
        let mut prev: Option<(usize, HashMap<FeatureId, Point2>)> = None;

        for (&frame, rows) in &by_frame {
            let border: HashSet<FeatureId> = events
                .iter()
                .filter(|e| e.frame == frame && e.stage == EventStage::Border)
                .map(|e| e.id)
                .collect();
            let rejected: HashSet<FeatureId> = events
                .iter()
                .filter(|e| e.frame == frame && e.stage == EventStage::Outlier)
                .map(|e| e.id)
                .collect();
            let corrupted: HashSet<FeatureId> = gt
                .corrupted
                .get(&frame)
                .into_iter()
                .flatten()
                .filter(|id| !border.contains(id))
                .copied()
                .collect();
            let true_positives = rejected.intersection(&corrupted).count();

            let mut errors = Vec::new();
            let mut survivors = 0;
            for row in rows {
                let len = lengths.entry(row.id).or_default();
                *len = (*len).max(row.track_count);
                if row.track_count <= 1 {
                    continue;
                }
                survivors += 1;
                let before = prev
                    .as_ref()
                    .filter(|(f, _)| *f + 1 == frame)
                    .and_then(|(_, m)| m.get(&row.id))
                    .ok_or_else(|| {
                        CliError::Data(format!(
                            "frame {frame}: feature {} continues a track missing from frame {}",
                            row.id,
                            frame.wrapping_sub(1)
                        ))
                    })?;
                let truth = true_position(gt, frame, *before).ok_or_else(|| {
                    CliError::Data(format!("no ground-truth homography for frame {frame}"))
                })?;
                errors.push(Point2::new(row.u, row.v).dist(&truth));
            }
            let survival = prev
                .as_ref()
                .filter(|(f, _)| *f + 1 == frame)
                .and_then(|(_, m)| ratio(survivors, m.len()));
            survivals.extend(survival);
            all_errors.extend_from_slice(&errors);

            frames.push(FrameMetrics {
                frame,
                timestamp: rows[0].timestamp,
                features: rows.len(),
                survivors,
                survival,
                epe_mean: mean(&errors),
                epe_median: median(&errors),
                dropped_border: border.len(),
                rejected: rejected.len(),
                corrupted: corrupted.len(),
                true_positives,
                precision: ratio(true_positives, rejected.len()),
                recall: ratio(true_positives, corrupted.len()),
                timings: timing_of.get(&frame).copied(),
            });
            prev = Some((
                frame,
                rows.iter().map(|r| (r.id, Point2::new(r.u, r.v))).collect(),
            ));
        }

        let mut track_lengths = BTreeMap::new();
        for len in lengths.values() {
            *track_lengths.entry(*len).or_default() += 1;
        }

        let later: Vec<StageTimings> = frames.iter().skip(1).filter_map(|f| f.timings).collect();
        let max_timings = (!later.is_empty()).then(|| {
            later
                .iter()
                .fold(StageTimings::default(), |m, t| StageTimings {
                    motion: m.motion.max(t.motion),
                    border: m.border.max(t.border),
                    reject: m.reject.max(t.reject),
                    replenish: m.replenish.max(t.replenish),
                    info: m.info.max(t.info),
                    post_motion: m.post_motion.max(t.post_motion),
                })
        });
        let mean_post_motion = (!later.is_empty())
            .then(|| later.iter().map(|t| t.post_motion).sum::<Duration>() / later.len() as u32);

        let total = |f: fn(&FrameMetrics) -> usize| frames.iter().map(f).sum::<usize>();
        let (rejected, corrupted, true_positives) = (
            total(|f| f.rejected),
            total(|f| f.corrupted),
            total(|f| f.true_positives),
        );
        let summary = Summary {
            frames: frames.len(),
            features: total(|f| f.features),
            survivors: total(|f| f.survivors),
            min_survival: survivals.iter().copied().reduce(f64::min),
            mean_survival: mean(&survivals),
            epe_mean: mean(&all_errors),
            epe_median: median(&all_errors),
            epe_max: all_errors.iter().copied().reduce(f64::max),
            dropped_border: total(|f| f.dropped_border),
            rejected,
            corrupted,
            true_positives,
            precision: ratio(true_positives, rejected),
            recall: ratio(true_positives, corrupted),
            max_timings,
            mean_post_motion,
        };
        Ok(Self {
            frames,
            summary,
            track_lengths,
        })
    }

    pub fn frame(&self, frame: usize) -> Option<&FrameMetrics> {
        self.frames.iter().find(|f| f.frame == frame)
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_decimal).unwrap_or_default();
        let ms = |t: Option<StageTimings>| match t {
            Some(t) => [
                t.motion,
                t.border,
                t.reject,
                t.replenish,
                t.info,
                t.post_motion,
            ]
            .map(|d| format!("{:.6}", d.as_secs_f64() * 1e3))
            .join(","),
            None => ",,,,,".to_string(),
        };
        let mut out = format!("{METRICS_HEADER}\n");
        for f in &self.frames {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                f.frame,
                fmt_decimal(f.timestamp),
                f.features,
                f.survivors,
                opt(f.survival),
                opt(f.epe_mean),
                opt(f.epe_median),
                f.dropped_border,
                f.rejected,
                f.corrupted,
                f.true_positives,
                opt(f.precision),
                opt(f.recall),
                ms(f.timings)
            );
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "summary,,{},{},{},{},{},{},{},{},{},{},{},{}",
            s.features,
            s.survivors,
            opt(s.min_survival),
            opt(s.epe_mean),
            opt(s.epe_median),
            s.dropped_border,
            s.rejected,
            s.corrupted,
            s.true_positives,
            opt(s.precision),
            opt(s.recall),
            ms(s.max_timings)
        );
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("track_length,count\n");
        for (len, count) in &self.track_lengths {
            let _ = writeln!(out, "{len},{count}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homography::Homography;

    fn row(frame: usize, id: u64, track_count: u32, u: f64, v: f64) -> TrackRow {
        TrackRow {
            frame,
            timestamp: frame as f64 * 0.05,
            id: FeatureId(id),
            track_count,
            u,
            v,
            x_un: 0.0,
            y_un: 0.0,
            vx: 0.0,
            vy: 0.0,
        }
    }

    fn gt() -> GroundTruth {
        GroundTruth {
            homographies: vec![Homography::translation(1.0, 0.0); 2],
            corrupted: BTreeMap::from([(1, vec![FeatureId(1), FeatureId(2)])]),
        }
    }

    #[test]
    fn perfect_tracks_and_exact_rejection() {
        let tracks = vec![
            row(0, 0, 1, 10.0, 10.0),
            row(0, 1, 1, 20.0, 10.0),
            row(0, 2, 1, 30.0, 10.0),
            row(1, 0, 2, 11.0, 10.0),
            row(1, 3, 1, 5.0, 5.0),
            row(1, 4, 1, 6.0, 6.0),
            row(2, 0, 3, 12.5, 10.0),
            row(2, 3, 2, 6.0, 5.0),
            row(2, 4, 2, 7.0, 6.0),
        ];
        let events = vec![
            EventRow {
                frame: 1,
                id: FeatureId(1),
                stage: EventStage::Outlier,
            },
            EventRow {
                frame: 1,
                id: FeatureId(2),
                stage: EventStage::Outlier,
            },
        ];
        let m = Metrics::compute(&tracks, &events, &[], &gt()).unwrap();
        let f1 = m.frame(1).unwrap();
        assert_eq!((f1.survivors, f1.survival), (1, Some(1.0 / 3.0)));
        assert_eq!((f1.precision, f1.recall), (Some(1.0), Some(1.0)));
        assert_eq!(f1.epe_mean, Some(0.0));
        let f2 = m.frame(2).unwrap();
        assert_eq!(f2.survival, Some(1.0));
        assert_eq!(f2.epe_median, Some(0.0));
        assert_eq!(f2.epe_mean, Some(0.5 / 3.0));
        assert_eq!(m.summary.min_survival, Some(1.0 / 3.0));
        assert_eq!(m.track_lengths, BTreeMap::from([(1, 2), (2, 2), (3, 1)]));
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().last().unwrap().starts_with("summary,,9,4,"));
    }

    #[test]
    fn border_drops_leave_recall_denominator() {
        let tracks = vec![
            row(0, 1, 1, 0.0, 0.0),
            row(0, 2, 1, 1.0, 0.0),
            row(1, 9, 1, 3.0, 3.0),
        ];
        let events = vec![
            EventRow {
                frame: 1,
                id: FeatureId(1),
                stage: EventStage::Border,
            },
            EventRow {
                frame: 1,
                id: FeatureId(5),
                stage: EventStage::Outlier,
            },
        ];
        let m = Metrics::compute(&tracks, &events, &[], &gt()).unwrap();
        let f1 = m.frame(1).unwrap();
        assert_eq!((f1.corrupted, f1.true_positives), (1, 0));
        assert_eq!((f1.precision, f1.recall), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn broken_track_is_a_data_error() {
        let tracks = vec![row(0, 0, 1, 0.0, 0.0), row(1, 7, 2, 1.0, 0.0)];
        let err = Metrics::compute(&tracks, &[], &[], &gt()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
