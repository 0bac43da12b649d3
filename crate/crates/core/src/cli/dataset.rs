//! Dataset directories and the files inside them.
//!
//! ```text
//! frame_000000.pgm ...   binary 8-bit PGM (P5), one per frame
//! times.txt              one timestamp in seconds per frame
//! homographies.txt       frames t >= 1: 9 values, row-major, frame t-1 -> t
//! flow_000001.flo ...    dense flow into frame t (t >= 1)
//! corrupted.txt          `frame_index feature_id` per corrupted feature
//! manifest.txt           the normalized sequence spec
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::kv::{parse_entries, reject_duplicates};
use super::{read_text, CliError};
use crate::feature::FeatureId;
use crate::flow::FileFlowProvider;
use crate::homography::Homography;
use crate::image::Image;
use crate::synth::{GroundTruth, IlluminationStep, MotionSchedule, SequenceSpec};

pub const TIMES_FILE: &str = "times.txt";
pub const HOMOGRAPHIES_FILE: &str = "homographies.txt";
pub const CORRUPTED_FILE: &str = "corrupted.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:06}.pgm")
}

pub fn flow_file_name(t: usize) -> String {
    format!("flow_{t:06}.flo")
}

pub fn write_pgm(image: &Image, path: &Path) -> Result<(), CliError> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    bytes.extend_from_slice(image.data());
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Reads a binary PGM with maxval 255. Header comments are allowed.
pub fn read_pgm(path: &Path, timestamp: f64) -> Result<Image, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: &str| CliError::Data(format!("{}: {msg}", path.display()));
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("malformed header"));
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(bad("only 8-bit PGM (maxval 255) is supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = bytes.get(pos + 1..).unwrap_or(&[]);
    if data.len() != width * height {
        return Err(bad(&format!(
            "raster has {} bytes, expected {}",
            data.len(),
            width * height
        )));
    }
    Image::new(width, height, data.to_vec(), timestamp).map_err(|e| bad(&e.to_string()))
}

pub fn parse_sequence_spec(path: impl AsRef<Path>) -> Result<SequenceSpec, CliError> {
    let path = path.as_ref();
    parse_sequence_spec_str(&read_text(path)?, &path.display().to_string())
}

/// Sequence description for `gen`. Every key is optional:
///
/// ```text
/// width = 752
/// height = 480
/// frames = 50
/// seed = 1
/// fps = 20
/// translation = 1.5 1.0      # px/frame
/// rotation = 0.002           # rad/frame about the image center
/// scale = 1
/// illum_step = 10 1.0 60     # frame gain bias, repeatable
/// corruption_rate = 0.1
/// corruption_magnitude = 10 30
/// texture_coverage = 1
/// blobs = 4000               # omit for the default density
/// ```
pub fn parse_sequence_spec_str(text: &str, origin: &str) -> Result<SequenceSpec, CliError> {
    let entries = parse_entries(text, origin)?;
    reject_duplicates(&entries, origin, &["illum_step"])?;
    let mut spec = SequenceSpec::default();
    for e in &entries {
        match e.key.as_str() {
            "width" => spec.width = e.parse(origin)?,
            "height" => spec.height = e.parse(origin)?,
            "frames" => spec.frames = e.parse(origin)?,
            "seed" => spec.seed = e.parse(origin)?,
            "fps" => spec.fps = e.real(origin)?,
            "translation" => {
                let [tx, ty] = e.reals(origin)?;
                spec.motion.translation = (tx, ty);
            }
            "rotation" => spec.motion.rotation = e.real(origin)?,
            "scale" => spec.motion.scale = e.real(origin)?,
            "illum_step" => {
                let [frame, gain, bias] = e.reals(origin)?;
                if frame < 0.0 || frame.fract() != 0.0 {
                    return Err(e.error(
                        origin,
                        format!("illumination frame must be a non-negative integer, got {frame}"),
                    ));
                }
                spec.illumination.push(IlluminationStep {
                    frame: frame as usize,
                    gain,
                    bias,
                });
            }
            "corruption_rate" => spec.corruption_rate = e.real(origin)?,
            "corruption_magnitude" => {
                let [lo, hi] = e.reals(origin)?;
                spec.corruption_magnitude = (lo, hi);
            }
            "texture_coverage" => spec.texture_coverage = e.real(origin)?,
            "blobs" => spec.blobs = Some(e.parse(origin)?),
            other => return Err(e.error(origin, format!("unknown key `{other}`"))),
        }
    }
    spec.validate().map_err(|e| CliError::Config {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    Ok(spec)
}

/// A sequence spec with every key spelled out; reads back unchanged.
pub fn dump_sequence_spec(spec: &SequenceSpec) -> String {
    let MotionSchedule {
        translation: (tx, ty),
        rotation,
        scale,
    } = spec.motion;
    let mut out = format!(
        "width = {}\nheight = {}\nframes = {}\nseed = {}\nfps = {}\ntranslation = {tx} {ty}\nrotation = {rotation}\nscale = {scale}\n",
        spec.width, spec.height, spec.frames, spec.seed, spec.fps
    );
    for s in &spec.illumination {
        out.push_str(&format!("illum_step = {} {} {}\n", s.frame, s.gain, s.bias));
    }
    let (lo, hi) = spec.corruption_magnitude;
    out.push_str(&format!(
        "corruption_rate = {}\ncorruption_magnitude = {lo} {hi}\ntexture_coverage = {}\n",
        spec.corruption_rate, spec.texture_coverage
    ));
    if let Some(b) = spec.blobs {
        out.push_str(&format!("blobs = {b}\n"));
    }
    out
}

pub(crate) fn format_homographies(homographies: &[Homography]) -> String {
    homographies.iter().map(|h| format!("{h}\n")).collect()
}

pub(crate) fn format_corrupted(corrupted: &BTreeMap<usize, Vec<FeatureId>>) -> String {
    let mut out = String::new();
    for (frame, ids) in corrupted {
        for id in ids {
            out.push_str(&format!("{frame} {id}\n"));
        }
    }
    out
}

/// A dataset directory written by `gen` (or assembled by hand: only frames
/// and `times.txt` are mandatory).
#[derive(Debug, Clone)]
pub struct Dataset {
    dir: PathBuf,
    times: Vec<f64>,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, CliError> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(TIMES_FILE);
        let text = read_text(&path)?;
        let mut times = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let t: f64 = line
                .parse()
                .ok()
                .filter(|t: &f64| t.is_finite())
                .ok_or_else(|| {
                    CliError::Data(format!(
                        "{}:{}: bad timestamp `{line}`",
                        path.display(),
                        i + 1
                    ))
                })?;
            times.push(t);
        }
        if times.is_empty() {
            return Err(CliError::Data(format!(
                "{}: no frames listed",
                path.display()
            )));
        }
        Ok(Self { dir, times })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frame(&self, t: usize) -> Result<Image, CliError> {
        read_pgm(&self.dir.join(frame_file_name(t)), self.times[t])
    }

    /// Provider over `flow_NNNNNN.flo` for every frame after the first.
    pub fn flow_files(&self) -> FileFlowProvider {
        FileFlowProvider::new((1..self.len()).map(|t| (t, self.dir.join(flow_file_name(t)))))
    }

    pub fn has_flow_files(&self) -> bool {
        (1..self.len()).all(|t| self.dir.join(flow_file_name(t)).is_file())
    }

    pub fn manifest(&self) -> Result<Option<SequenceSpec>, CliError> {
        let path = self.dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        parse_sequence_spec(&path)
            .map(Some)
            .map_err(|e| CliError::Data(format!("bad manifest: {e}")))
    }

    /// Homographies and corrupted ids. Homographies are required, one per
    /// frame after the first; a missing `corrupted.txt` means none.
    pub fn ground_truth(&self) -> Result<GroundTruth, CliError> {
        let path = self.dir.join(HOMOGRAPHIES_FILE);
        let text = read_text(&path)?;
        let mut homographies = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || {
                CliError::Data(format!(
                    "{}:{}: expected 9 finite values",
                    path.display(),
                    i + 1
                ))
            };
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(bad)?;
            if vals.len() != 9 {
                return Err(bad());
            }
            let mut m = [[0.0; 3]; 3];
            for (k, v) in vals.into_iter().enumerate() {
                m[k / 3][k % 3] = v;
            }
            homographies.push(Homography(m));
        }
        if homographies.len() + 1 != self.len() {
            return Err(CliError::Data(format!(
                "{}: {} homographies for {} frames (expected {})",
                path.display(),
                homographies.len(),
                self.len(),
                self.len() - 1
            )));
        }

        let mut corrupted: BTreeMap<usize, Vec<FeatureId>> = BTreeMap::new();
        let path = self.dir.join(CORRUPTED_FILE);
        if path.is_file() {
            for (i, line) in read_text(&path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = line.split_once(char::is_whitespace).and_then(|(a, b)| {
                    Some((
                        a.trim().parse::<usize>().ok()?,
                        b.trim().parse::<u64>().ok()?,
                    ))
                });
                let (frame, id) = parsed.ok_or_else(|| {
                    CliError::Data(format!(
                        "{}:{}: expected `frame_index feature_id`",
                        path.display(),
                        i + 1
                    ))
                })?;
                corrupted.entry(frame).or_default().push(FeatureId(id));
            }
        }
        Ok(GroundTruth {
            homographies,
            corrupted,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_texture;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = gen_texture(33, 17, 4).with_timestamp(0.25).unwrap();
        let path = dir.path().join("a.pgm");
        write_pgm(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n33 17\n255\n"));
        assert_eq!(read_pgm(&path, 0.25).unwrap(), img);
    }

    #[test]
    fn pgm_with_comment_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        let mut bytes = b"P5\n# made by hand\n8 8\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(7u8, 64));
        std::fs::write(&path, &bytes).unwrap();
        assert_eq!(read_pgm(&path, 0.0).unwrap().data(), &[7u8; 64][..]);

        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert_eq!(read_pgm(&path, 0.0).unwrap_err().exit_code(), 3);
        std::fs::write(&path, b"P2\n8 8\n255\n").unwrap();
        assert!(read_pgm(&path, 0.0).unwrap_err().to_string().contains("P5"));
    }

    #[test]
    fn sequence_spec_round_trip() {
        let text = "width = 320\nheight = 240\nframes = 12\nseed = 7\ntranslation = 1.5 -0.25\nrotation = 0.002\n\
                    illum_step = 5 1.2 10\nillum_step = 8 1 -30\ncorruption_rate = 0.1\nblobs = 900\n";
        let spec = parse_sequence_spec_str(text, "s").unwrap();
        assert_eq!(spec.illumination.len(), 2);
        assert_eq!(spec.motion.translation, (1.5, -0.25));
        assert_eq!(spec.blobs, Some(900));
        assert_eq!(
            parse_sequence_spec_str(&dump_sequence_spec(&spec), "d").unwrap(),
            spec
        );
    }

    #[test]
    fn sequence_spec_errors() {
        let err = parse_sequence_spec_str("frames = 1\n", "s").unwrap_err();
        assert!(err.to_string().contains("at least 2 frames"));
        let err = parse_sequence_spec_str("frames = 3\nillum_step = 1 2\n", "s").unwrap_err();
        assert!(err.to_string().starts_with("s:2:"));
        let err = parse_sequence_spec_str("colour = red\n", "s").unwrap_err();
        assert_eq!(err.to_string(), "s:1: unknown key `colour`");
    }
}
