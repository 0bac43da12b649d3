//! Tracker run configuration files.
//!
//! ```text
//! # camera intrinsics are required
//! fx = 458.654
//! fy = 457.296
//! cx = 367.215
//! cy = 248.375
//! k1 = -0.28
//! max_features = 150
//! provider = gt
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::kv::{parse_entries, reject_duplicates, Entry};
use super::{read_text, CliError};
use crate::camera::PinholeRadTan;
use crate::pyrlk::LkParams;
use crate::tracker::TrackerConfig;

/// Where per-frame motion comes from in `track` and `compare`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProviderKind {
    /// Precomputed `.flo` files in the dataset.
    Files,
    /// Exact flow from the dataset's homographies.
    #[default]
    Gt,
    /// Pyramidal LK baseline.
    Lk,
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "files" => Ok(ProviderKind::Files),
            "gt" => Ok(ProviderKind::Gt),
            "lk" => Ok(ProviderKind::Lk),
            other => Err(format!(
                "unknown provider `{other}` (expected files, gt or lk)"
            )),
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Files => "files",
            ProviderKind::Gt => "gt",
            ProviderKind::Lk => "lk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub lk: LkParams,
    pub provider: ProviderKind,
}

impl RunConfig {
    pub fn new(camera: PinholeRadTan) -> Self {
        Self {
            tracker: TrackerConfig::new(camera),
            lk: LkParams::default(),
            provider: ProviderKind::default(),
        }
    }
}

const CAMERA_KEYS: [&str; 4] = ["fx", "fy", "cx", "cy"];

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig, CliError> {
    let path = path.as_ref();
    parse_config_str(&read_text(path)?, &path.display().to_string())
}

/// Parses config text; `origin` names the source in error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let entries = parse_entries(text, origin)?;
    reject_duplicates(&entries, origin, &[])?;

    let find = |key: &str| entries.iter().find(|e| e.key == key);
    let mut intrinsics = [0.0; 4];
    for (slot, key) in intrinsics.iter_mut().zip(CAMERA_KEYS) {
        let entry = find(key).ok_or_else(|| CliError::Config {
            origin: origin.to_string(),
            message: format!("missing required camera key `{key}`"),
        })?;
        *slot = entry.real(origin)?;
    }
    let [fx, fy, cx, cy] = intrinsics;
    let mut cfg = RunConfig::new(PinholeRadTan {
        fx,
        fy,
        cx,
        cy,
        k1: 0.0,
        k2: 0.0,
        p1: 0.0,
        p2: 0.0,
    });

    for e in &entries {
        apply(&mut cfg, e, origin)?;
    }
    validate(&cfg, &entries, origin)?;
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, e: &Entry, origin: &str) -> Result<(), CliError> {
    let t = &mut cfg.tracker;
    match e.key.as_str() {
        "fx" | "fy" | "cx" | "cy" => {}
        "k1" => t.camera.k1 = e.real(origin)?,
        "k2" => t.camera.k2 = e.real(origin)?,
        "p1" => t.camera.p1 = e.real(origin)?,
        "p2" => t.camera.p2 = e.real(origin)?,
        "max_features" => t.max_features = e.parse(origin)?,
        "min_dist" => t.min_dist = e.real(origin)?,
        "border_margin" => t.border_margin = e.real(origin)?,
        "quality_level" => t.quality_level = e.real(origin)?,
        "block_radius" => t.block_radius = e.parse(origin)?,
        "n_neighbors" => t.rejection.n_neighbors = e.parse(origin)?,
        "radius" => t.rejection.radius = e.real(origin)?,
        "min_neighbors" => t.rejection.min_neighbors = e.parse(origin)?,
        // infinity is meaningful here: it disables rejection
        "tau_abs" => {
            t.rejection.tau_abs = e.parse(origin)?;
        }
        "tau_rel" => t.rejection.tau_rel = e.real(origin)?,
        "lk_window_radius" => cfg.lk.window_radius = e.parse(origin)?,
        "lk_levels" => cfg.lk.levels = e.parse(origin)?,
        "lk_max_iters" => cfg.lk.max_iters = e.parse(origin)?,
        "lk_eps" => cfg.lk.eps = e.real(origin)?,
        "lk_min_eig" => cfg.lk.min_eig_threshold = e.real(origin)?,
        "provider" => {
            cfg.provider = e
                .value
                .parse()
                .map_err(|msg: String| e.error(origin, msg))?
        }
        other => return Err(e.error(origin, format!("unknown key `{other}`"))),
    }
    Ok(())
}

fn validate(cfg: &RunConfig, entries: &[Entry], origin: &str) -> Result<(), CliError> {
    let lk = &cfg.lk;
    let lk_problem = if lk.window_radius < 1 {
        Some(format!(
            "lk_window_radius must be >= 1, got {}",
            lk.window_radius
        ))
    } else if lk.levels < 1 {
        Some(format!("lk_levels must be >= 1, got {}", lk.levels))
    } else if lk.max_iters < 1 {
        Some(format!("lk_max_iters must be >= 1, got {}", lk.max_iters))
    } else if !(lk.eps > 0.0) {
        Some(format!("lk_eps must be > 0, got {}", lk.eps))
    } else if !(lk.min_eig_threshold >= 0.0) {
        Some(format!(
            "lk_min_eig must be >= 0, got {}",
            lk.min_eig_threshold
        ))
    } else {
        None
    };
    let message = match (lk_problem, cfg.tracker.validate()) {
        (_, Err(e)) => e.to_string(),
        (Some(msg), Ok(())) => msg,
        (None, Ok(())) => return Ok(()),
    };
    // Point at the line of the first key the message mentions.
    let culprit = entries
        .iter()
        .filter_map(|e| message.find(e.key.as_str()).map(|pos| (pos, e)))
        .min_by_key(|(pos, _)| *pos);
    Err(match culprit {
        Some((_, e)) => e.error(origin, message),
        None => CliError::Config {
            origin: origin.to_string(),
            message,
        },
    })
}

/// Every setting, one per line, in a form [`parse_config_str`] reads back
/// to an identical [`RunConfig`].
pub fn dump_config(cfg: &RunConfig) -> String {
    let t = &cfg.tracker;
    let c = &t.camera;
    let r = &t.rejection;
    let lines: Vec<(&str, String)> = vec![
        ("fx", c.fx.to_string()),
        ("fy", c.fy.to_string()),
        ("cx", c.cx.to_string()),
        ("cy", c.cy.to_string()),
        ("k1", c.k1.to_string()),
        ("k2", c.k2.to_string()),
        ("p1", c.p1.to_string()),
        ("p2", c.p2.to_string()),
        ("max_features", t.max_features.to_string()),
        ("min_dist", t.min_dist.to_string()),
        ("border_margin", t.border_margin.to_string()),
        ("quality_level", t.quality_level.to_string()),
        ("block_radius", t.block_radius.to_string()),
        ("n_neighbors", r.n_neighbors.to_string()),
        ("radius", r.radius.to_string()),
        ("min_neighbors", r.min_neighbors.to_string()),
        ("tau_abs", r.tau_abs.to_string()),
        ("tau_rel", r.tau_rel.to_string()),
        ("lk_window_radius", cfg.lk.window_radius.to_string()),
        ("lk_levels", cfg.lk.levels.to_string()),
        ("lk_max_iters", cfg.lk.max_iters.to_string()),
        ("lk_eps", cfg.lk.eps.to_string()),
        ("lk_min_eig", cfg.lk.min_eig_threshold.to_string()),
        ("provider", cfg.provider.to_string()),
    ];
    lines
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAMERA: &str = "fx = 460\nfy = 460\ncx = 376\ncy = 240\n";

    #[test]
    fn defaults_fill_the_rest() {
        let cfg = parse_config_str(&format!("{CAMERA}max_features = 150\n"), "t").unwrap();
        let expected = RunConfig::new(PinholeRadTan::pinhole(460.0, 460.0, 376.0, 240.0).unwrap());
        assert_eq!(cfg, expected);
    }

    #[test]
    fn zero_features_cites_invariant_and_line() {
        let err = parse_config_str(&format!("{CAMERA}max_features = 0\n"), "t").unwrap_err();
        match &err {
            CliError::ConfigLine { line, message, .. } => {
                assert_eq!(*line, 5);
                assert!(message.contains("max_features must be >= 1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config_str(
            &format!("# comment\n{CAMERA}\nmax_featurs = 3\n"),
            "cfg.txt",
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "cfg.txt:7: unknown key `max_featurs`");
    }

    #[test]
    fn missing_camera_key() {
        let err = parse_config_str("fx = 1\nfy = 1\ncx = 0\n", "t").unwrap_err();
        assert!(err.to_string().contains("`cy`"));
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        let err = parse_config_str(&format!("{CAMERA}radius = 5\nradius = 6\n"), "t").unwrap_err();
        assert!(err.to_string().starts_with("t:6: duplicate key"));
        let err = parse_config_str(&format!("{CAMERA}radius 5\n"), "t").unwrap_err();
        assert!(err.to_string().starts_with("t:5:"));
        let err = parse_config_str(&format!("{CAMERA}provider = raft\n"), "t").unwrap_err();
        assert!(err.to_string().contains("unknown provider"));
    }

    #[test]
    fn k1_round_trips_through_dump() {
        let cfg =
            parse_config_str(&format!("{CAMERA}k1 = 0.05 # radial\nprovider = lk\n"), "t").unwrap();
        assert_eq!(cfg.tracker.camera.k1, 0.05);
        assert_eq!(parse_config_str(&dump_config(&cfg), "dump").unwrap(), cfg);
    }

    #[test]
    fn odd_values_round_trip() {
        let mut cfg = RunConfig::new(
            PinholeRadTan::new(
                458.654,
                457.296,
                367.215,
                248.375,
                -0.28340811,
                0.07395907,
                0.00019359,
                1.76187114e-05,
            )
            .unwrap(),
        );
        cfg.tracker.rejection.tau_abs = f64::INFINITY;
        cfg.tracker.min_dist = 0.1 + 0.2 + 1.0;
        cfg.lk.eps = 1e-300;
        assert_eq!(parse_config_str(&dump_config(&cfg), "dump").unwrap(), cfg);
    }
}
