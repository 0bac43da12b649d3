use std::fmt::Write as _;
use std::path::Path;

use super::config::{parse_config, ProviderKind, RunConfig};
use super::dataset::{
    dump_sequence_spec, flow_file_name, format_corrupted, format_homographies, frame_file_name,
    parse_sequence_spec, write_pgm, Dataset, CORRUPTED_FILE, HOMOGRAPHIES_FILE, MANIFEST_FILE,
    TIMES_FILE,
};
use super::metrics::Metrics;
use super::tracks::{
    events_path, fmt_decimal, read_events, read_timings, read_tracks, timing_path, write_events,
    write_timings, write_tracks, EventRow, EventStage, TimingRow, TrackRow,
};
use super::{write_text, CliError};
use crate::camera::PinholeRadTan;
use crate::flow::{
    write_flow_file, FlowError, FlowField, FlowProvider, FlowRequest, HomographyFlowProvider,
};
use crate::image::Grid;
use crate::synth::{corrupted_gt_flow_provider, gen_sequence, CorruptedFlowProvider, SynthError};
use crate::tracker::{FeatureFrameOutput, MotionSource, Tracker, TrackerError};

fn tracker_error(frame: usize, e: TrackerError) -> CliError {
    let msg = format!("frame {frame}: {e}");
    match e {
        TrackerError::Config(_) | TrackerError::Pyramid(_) => CliError::Config {
            origin: "tracker".into(),
            message: msg,
        },
        TrackerError::Flow(_)
        | TrackerError::Dimensions { .. }
        | TrackerError::Timestamp { .. }
        | TrackerError::Camera(_) => CliError::Data(msg),
        TrackerError::Domain(_) | TrackerError::Detect(_) | TrackerError::Reject(_) => {
            CliError::Internal(msg)
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn synth_error(origin: &Path, e: SynthError) -> CliError {
    CliError::Config {
        origin: origin.display().to_string(),
        message: e.to_string(),
    }
}

/// Corrupted ground-truth flow rounded to the `f32` precision of the flow
/// file, written to disk as it is handed out. Tracking from the written
/// files afterwards sees exactly the same flow.
struct RecordingProvider<'a> {
    inner: CorruptedFlowProvider,
    dir: &'a Path,
}

impl FlowProvider for RecordingProvider<'_> {
    fn flow(&self, request: &FlowRequest<'_>) -> Result<FlowField, FlowError> {
        let flow = self.inner.flow(request)?;
        let round = |g: &Grid| {
            Grid::from_vec(
                g.width(),
                g.height(),
                g.data().iter().map(|&x| x as f32 as f64).collect(),
            )
        };
        let flow = FlowField::new(round(flow.u_component()), round(flow.v_component()));
        write_flow_file(&flow, self.dir.join(flow_file_name(request.frame_index)))?;
        Ok(flow)
    }
}

/// Camera used by `gen` when no config is given: distortion-free, focal
/// length equal to the larger image side, centered.
fn default_gen_config(width: usize, height: usize) -> RunConfig {
    let f = width.max(height) as f64;
    let cam = PinholeRadTan::pinhole(
        f,
        f,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
    )
    .expect("positive focal length");
    RunConfig::new(cam)
}

/// Renders the sequence described by `spec_file` into `out_dir`.
///
/// Flow files come from running the tracker (with `config`, or a default
/// pinhole setup) on corrupted ground-truth flow, so `corrupted.txt` refers
/// to the feature ids of that run. Track with the same config to reproduce
/// those ids.
pub fn cmd_gen(spec_file: &Path, out_dir: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let spec = parse_sequence_spec(spec_file)?;
    let cfg = match config {
        Some(path) => parse_config(path)?,
        None => default_gen_config(spec.width, spec.height),
    };
    let (frames, mut gt) = gen_sequence(&spec).map_err(|e| synth_error(spec_file, e))?;
    create_dir(out_dir)?;

    let mut times = String::new();
    for (t, img) in frames.iter().enumerate() {
        write_pgm(img, &out_dir.join(frame_file_name(t)))?;
        let _ = writeln!(times, "{}", fmt_decimal(img.timestamp()));
    }
    write_text(&out_dir.join(TIMES_FILE), &times)?;
    write_text(
        &out_dir.join(HOMOGRAPHIES_FILE),
        &format_homographies(&gt.homographies),
    )?;

    let provider = RecordingProvider {
        inner: corrupted_gt_flow_provider(&gt, &spec),
        dir: out_dir,
    };
    let mut tracker = Tracker::new(cfg.tracker).map_err(|e| tracker_error(0, e))?;
    for (t, img) in frames.into_iter().enumerate() {
        tracker
            .process_frame(img, &provider)
            .map_err(|e| tracker_error(t, e))?;
    }
    gt.corrupted = provider.inner.corrupted();
    write_text(
        &out_dir.join(CORRUPTED_FILE),
        &format_corrupted(&gt.corrupted),
    )?;
    write_text(
        &out_dir.join(MANIFEST_FILE),
        &format!(
            "# sequence spec used to render this dataset\n{}",
            dump_sequence_spec(&spec)
        ),
    )?;
    Ok(())
}

/// Runs the tracker over every frame of `dataset`.
pub fn run_tracker(
    cfg: &RunConfig,
    dataset: &Dataset,
    provider: ProviderKind,
) -> Result<Vec<(usize, FeatureFrameOutput)>, CliError> {
    let homography_provider;
    let file_provider;
    let source = match provider {
        ProviderKind::Gt => {
            homography_provider =
                HomographyFlowProvider::new(&dataset.ground_truth()?.homographies);
            MotionSource::Flow(&homography_provider)
        }
        ProviderKind::Files => {
            file_provider = dataset.flow_files();
            MotionSource::Flow(&file_provider)
        }
        ProviderKind::Lk => MotionSource::Lk(&cfg.lk),
    };
    let mut tracker = Tracker::new(cfg.tracker).map_err(|e| tracker_error(0, e))?;
    let mut outputs = Vec::with_capacity(dataset.len());
    for t in 0..dataset.len() {
        let out = tracker
            .process(dataset.frame(t)?, source)
            .map_err(|e| tracker_error(t, e))?;
        outputs.push((t, out));
    }
    Ok(outputs)
}

/// Tracks `dataset_dir` and writes the tracks CSV to `out` with its
/// `.events.csv` and `.timing.csv` sidecars. `provider` overrides the
/// config's choice.
pub fn cmd_track(
    config_file: &Path,
    dataset_dir: &Path,
    provider: Option<ProviderKind>,
    out: &Path,
) -> Result<Vec<(usize, FeatureFrameOutput)>, CliError> {
    let cfg = parse_config(config_file)?;
    let dataset = Dataset::open(dataset_dir)?;
    let outputs = run_tracker(&cfg, &dataset, provider.unwrap_or(cfg.provider))?;
    write_tracks(&outputs, out)?;
    write_events(&outputs, &events_path(out))?;
    write_timings(&outputs, &timing_path(out))?;
    Ok(outputs)
}

/// Scores a tracks CSV (plus sidecars, when present) against the dataset's
/// ground truth. Writes the metrics CSV to `out` and the track-length
/// histogram to `<out>.hist.csv`.
pub fn cmd_eval(tracks_path: &Path, dataset_dir: &Path, out: &Path) -> Result<Metrics, CliError> {
    let dataset = Dataset::open(dataset_dir)?;
    let gt = dataset.ground_truth()?;
    let tracks = read_tracks(tracks_path)?;
    let events_file = events_path(tracks_path);
    let events = if events_file.is_file() {
        read_events(&events_file)?
    } else {
        Vec::new()
    };
    let timing_file = timing_path(tracks_path);
    let timings = if timing_file.is_file() {
        read_timings(&timing_file)?
    } else {
        Vec::new()
    };
    let metrics = Metrics::compute(&tracks, &events, &timings, &gt)?;
    write_text(out, &metrics.to_csv())?;
    let mut hist = out.as_os_str().to_owned();
    hist.push(".hist.csv");
    write_text(Path::new(&hist), &metrics.histogram_csv())?;
    Ok(metrics)
}

pub(crate) fn rows_of(
    outputs: &[(usize, FeatureFrameOutput)],
) -> (Vec<TrackRow>, Vec<EventRow>, Vec<TimingRow>) {
    let mut tracks = Vec::new();
    let mut events = Vec::new();
    let mut timings = Vec::new();
    for (frame, o) in outputs {
        let frame = *frame;
        tracks.extend(o.features.iter().map(|f| TrackRow {
            frame,
            timestamp: o.timestamp,
            id: f.id,
            track_count: f.track_count,
            u: f.position.u,
            v: f.position.v,
            x_un: f.x_un,
            y_un: f.y_un,
            vx: f.vx,
            vy: f.vy,
        }));
        let stage = |stage| move |&id| EventRow { frame, id, stage };
        events.extend(
            o.report
                .dropped_border
                .iter()
                .map(stage(EventStage::Border)),
        );
        events.extend(o.report.rejected.iter().map(stage(EventStage::Outlier)));
        timings.push(TimingRow {
            frame,
            timings: o.report.timings,
        });
    }
    (tracks, events, timings)
}

/// Side-by-side metrics of a dense-flow run and the LK baseline.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub primary: ProviderKind,
    pub primary_metrics: Metrics,
    pub lk_metrics: Metrics,
    /// Frames where an illumination step starts (from the manifest).
    pub step_frames: Vec<usize>,
}

impl CompareReport {
    /// `metric,<primary>,lk` rows.
    pub fn table(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_decimal).unwrap_or_else(|| "-".into());
        let ms = |m: &Metrics| {
            opt(m
                .summary
                .max_timings
                .map(|t| t.post_motion.as_secs_f64() * 1e3))
        };
        let mean_ms = |m: &Metrics| opt(m.summary.mean_post_motion.map(|d| d.as_secs_f64() * 1e3));
        let (p, l) = (&self.primary_metrics, &self.lk_metrics);
        let mut rows: Vec<(String, String, String)> = vec![
            (
                "frames".into(),
                p.summary.frames.to_string(),
                l.summary.frames.to_string(),
            ),
            (
                "epe_mean".into(),
                opt(p.summary.epe_mean),
                opt(l.summary.epe_mean),
            ),
            (
                "epe_median".into(),
                opt(p.summary.epe_median),
                opt(l.summary.epe_median),
            ),
            (
                "survival_min".into(),
                opt(p.summary.min_survival),
                opt(l.summary.min_survival),
            ),
            (
                "survival_mean".into(),
                opt(p.summary.mean_survival),
                opt(l.summary.mean_survival),
            ),
            (
                "dropped_border".into(),
                p.summary.dropped_border.to_string(),
                l.summary.dropped_border.to_string(),
            ),
            (
                "rejected".into(),
                p.summary.rejected.to_string(),
                l.summary.rejected.to_string(),
            ),
            (
                "precision".into(),
                opt(p.summary.precision),
                opt(l.summary.precision),
            ),
            (
                "recall".into(),
                opt(p.summary.recall),
                opt(l.summary.recall),
            ),
            ("post_motion_ms_max".into(), ms(p), ms(l)),
            ("post_motion_ms_mean".into(), mean_ms(p), mean_ms(l)),
        ];
        for &f in &self.step_frames {
            let at = |m: &Metrics| opt(m.frame(f).and_then(|x| x.survival));
            rows.push((format!("survival_at_step_{f}"), at(p), at(l)));
        }
        let mut out = format!("metric,{},lk\n", self.primary);
        for (name, a, b) in rows {
            let _ = writeln!(out, "{name},{a},{b}");
        }
        out
    }

    /// Survival of (primary, lk) at frame `f`.
    pub fn survival_at(&self, f: usize) -> (Option<f64>, Option<f64>) {
        (
            self.primary_metrics.frame(f).and_then(|x| x.survival),
            self.lk_metrics.frame(f).and_then(|x| x.survival),
        )
    }
}

/// Runs the config's dense provider (`gt` when the config asks for `lk`)
/// and the LK baseline over the same dataset and writes the table to `out`.
pub fn cmd_compare(
    config_file: &Path,
    dataset_dir: &Path,
    out: &Path,
) -> Result<CompareReport, CliError> {
    let cfg = parse_config(config_file)?;
    let dataset = Dataset::open(dataset_dir)?;
    let gt = dataset.ground_truth()?;
    let primary = match cfg.provider {
        ProviderKind::Lk => ProviderKind::Gt,
        other => other,
    };
    let score = |kind| -> Result<Metrics, CliError> {
        let (tracks, events, timings) = rows_of(&run_tracker(&cfg, &dataset, kind)?);
        Metrics::compute(&tracks, &events, &timings, &gt)
    };
    let mut step_frames: Vec<usize> = dataset
        .manifest()?
        .map(|spec| spec.illumination.iter().map(|s| s.frame).collect())
        .unwrap_or_default();
    step_frames.sort_unstable();
    step_frames.dedup();
    let report = CompareReport {
        primary,
        primary_metrics: score(primary)?,
        lk_metrics: score(ProviderKind::Lk)?,
        step_frames,
    };
    write_text(out, &report.table())?;
    Ok(report)
}
