//! Tracks CSV and its sidecars.
//!
//! `<tracks>` holds `frame,timestamp,id,track_count,u,v,x_un,y_un,vx,vy`,
//! one row per feature per frame. Reals are written with at least nine
//! significant digits and always parse back to the identical `f64`.
//! `<tracks>.events.csv` lists `frame,id,stage` for every feature dropped at
//! the border (`border`) or by the outlier test (`outlier`), and
//! `<tracks>.timing.csv` the per-frame stage timings in milliseconds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{read_text, write_text, CliError};
use crate::feature::FeatureId;
use crate::tracker::{FeatureFrameOutput, StageTimings};

pub const TRACKS_HEADER: &str = "frame,timestamp,id,track_count,u,v,x_un,y_un,vx,vy";
pub const EVENTS_HEADER: &str = "frame,id,stage";
pub const TIMING_HEADER: &str =
    "frame,motion_ms,border_ms,reject_ms,replenish_ms,info_ms,post_motion_ms";

const MIN_SIGNIFICANT: usize = 9;

/// Positional decimal with the shortest digits that round-trip, padded
/// with zeros to at least nine significant digits.
pub fn fmt_decimal(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return format!(
            "{}0.{}",
            if x.is_sign_negative() { "-" } else { "" },
            "0".repeat(MIN_SIGNIFICANT - 1)
        );
    }
    let sci = format!("{:e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i64 = exp.parse().expect("integer exponent");
    let mut digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    while digits.len() < MIN_SIGNIFICANT {
        digits.push('0');
    }
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{digits}", "0".repeat((-point) as usize))
    } else if point as usize >= digits.len() {
        format!("{digits}{}.0", "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    if x < 0.0 {
        format!("-{body}")
    } else {
        body
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub frame: usize,
    pub timestamp: f64,
    pub id: FeatureId,
    pub track_count: u32,
    pub u: f64,
    pub v: f64,
    pub x_un: f64,
    pub y_un: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventStage {
    Border,
    Outlier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRow {
    pub frame: usize,
    pub id: FeatureId,
    pub stage: EventStage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub frame: usize,
    pub timings: StageTimings,
}

pub(crate) fn events_path(tracks: &Path) -> PathBuf {
    sidecar(tracks, "events.csv")
}

pub(crate) fn timing_path(tracks: &Path) -> PathBuf {
    sidecar(tracks, "timing.csv")
}

fn sidecar(tracks: &Path, suffix: &str) -> PathBuf {
    let mut name = tracks.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

pub fn write_tracks(outputs: &[(usize, FeatureFrameOutput)], path: &Path) -> Result<(), CliError> {
    let mut out = String::from(TRACKS_HEADER);
    out.push('\n');
    for (frame, o) in outputs {
        let ts = fmt_decimal(o.timestamp);
        for f in &o.features {
            let _ = writeln!(
                out,
                "{frame},{ts},{},{},{},{},{},{},{},{}",
                f.id,
                f.track_count,
                fmt_decimal(f.position.u),
                fmt_decimal(f.position.v),
                fmt_decimal(f.x_un),
                fmt_decimal(f.y_un),
                fmt_decimal(f.vx),
                fmt_decimal(f.vy)
            );
        }
    }
    write_text(path, &out)
}

pub fn write_events(outputs: &[(usize, FeatureFrameOutput)], path: &Path) -> Result<(), CliError> {
    let mut out = format!("{EVENTS_HEADER}\n");
    for (frame, o) in outputs {
        for id in &o.report.dropped_border {
            let _ = writeln!(out, "{frame},{id},border");
        }
        for id in &o.report.rejected {
            let _ = writeln!(out, "{frame},{id},outlier");
        }
    }
    write_text(path, &out)
}

pub fn write_timings(outputs: &[(usize, FeatureFrameOutput)], path: &Path) -> Result<(), CliError> {
    let ms = |d: std::time::Duration| format!("{:.6}", d.as_secs_f64() * 1e3);
    let mut out = format!("{TIMING_HEADER}\n");
    for (frame, o) in outputs {
        let t = &o.report.timings;
        let _ = writeln!(
            out,
            "{frame},{},{},{},{},{},{}",
            ms(t.motion),
            ms(t.border),
            ms(t.reject),
            ms(t.replenish),
            ms(t.info),
            ms(t.post_motion)
        );
    }
    write_text(path, &out)
}

/// Data rows with their 1-based line numbers, after checking the header.
fn csv_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>, CliError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => {
            return Err(CliError::Data(format!(
                "{}: expected header `{header}`",
                path.display()
            )))
        }
    }
    let columns = header.split(',').count();
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != columns {
            return Err(CliError::Data(format!(
                "{}:{}: expected {columns} columns, got {}",
                path.display(),
                i + 1,
                fields.len()
            )));
        }
        out.push((i + 1, fields));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    name: &str,
    value: &str,
) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Data(format!("{}:{line}: bad {name} `{value}`", path.display())))
}

pub fn read_tracks(path: &Path) -> Result<Vec<TrackRow>, CliError> {
    csv_rows(path, TRACKS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let real = |k: usize, name: &str| field::<f64>(path, line, name, &f[k]);
            Ok(TrackRow {
                frame: field(path, line, "frame", &f[0])?,
                timestamp: real(1, "timestamp")?,
                id: FeatureId(field(path, line, "id", &f[2])?),
                track_count: field(path, line, "track_count", &f[3])?,
                u: real(4, "u")?,
                v: real(5, "v")?,
                x_un: real(6, "x_un")?,
                y_un: real(7, "y_un")?,
                vx: real(8, "vx")?,
                vy: real(9, "vy")?,
            })
        })
        .collect()
}

pub fn read_events(path: &Path) -> Result<Vec<EventRow>, CliError> {
    csv_rows(path, EVENTS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let stage = match f[2].as_str() {
                "border" => EventStage::Border,
                "outlier" => EventStage::Outlier,
                other => {
                    return Err(CliError::Data(format!(
                        "{}:{line}: bad stage `{other}`",
                        path.display()
                    )))
                }
            };
            Ok(EventRow {
                frame: field(path, line, "frame", &f[0])?,
                id: FeatureId(field(path, line, "id", &f[1])?),
                stage,
            })
        })
        .collect()
}

pub fn read_timings(path: &Path) -> Result<Vec<TimingRow>, CliError> {
    csv_rows(path, TIMING_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let d = |k: usize| -> Result<std::time::Duration, CliError> {
                let ms: f64 = field(path, line, "duration", &f[k])?;
                std::time::Duration::try_from_secs_f64(ms / 1e3).map_err(|_| {
                    CliError::Data(format!(
                        "{}:{line}: bad duration `{}`",
                        path.display(),
                        f[k]
                    ))
                })
            };
            Ok(TimingRow {
                frame: field(path, line, "frame", &f[0])?,
                timings: StageTimings {
                    motion: d(1)?,
                    border: d(2)?,
                    reject: d(3)?,
                    replenish: d(4)?,
                    info: d(5)?,
                    post_motion: d(6)?,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimal_examples() {
        assert_eq!(fmt_decimal(0.05), "0.0500000000");
        assert_eq!(fmt_decimal(1.0), "1.00000000");
        assert_eq!(fmt_decimal(-376.25), "-376.250000");
        assert_eq!(fmt_decimal(0.0), "0.00000000");
        assert_eq!(fmt_decimal(1e12), "1000000000000.0");
        assert_eq!(fmt_decimal(0.1 + 0.2), "0.30000000000000004");
    }

    proptest! {
        #[test]
        fn decimal_is_lossless(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let s = fmt_decimal(x);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{}", s);
            let significant = s.trim_start_matches('-').chars().filter(|c| c.is_ascii_digit()).collect::<String>();
            prop_assert!(significant.trim_start_matches('0').len() >= 9 || x == 0.0, "{}", s);
        }

        #[test]
        fn decimal_is_lossless_at_pixel_scale(x in -2000.0f64..2000.0) {
            prop_assert_eq!(fmt_decimal(x).parse::<f64>().unwrap(), x);
        }
    }
}
