#![allow(dead_code)]

use std::path::Path;

use flowtrack::detect::GoodFeaturesParams;
use flowtrack::{Image, Point2};

/// EuRoC-like intrinsics with noticeable radial distortion.
pub const CAMERA_CONFIG: &str = "\
fx = 460
fy = 460
cx = 376
cy = 240
k1 = -0.28
k2 = 0.07
p1 = 0.0002
p2 = 0.00002
";

/// 752x480, 50 frames, translation plus rotation (under 3 px/frame everywhere).
pub const BASE_SEQUENCE: &str = "\
width = 752
height = 480
frames = 50
seed = 1
fps = 20
translation = 1.5 1.0
rotation = 0.002
";

pub fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

pub fn config_with(dir: &Path, name: &str, extra: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    write(&path, &format!("{CAMERA_CONFIG}{extra}"));
    path
}

/// Base sequence with the keys set in `extra` replaced.
pub fn sequence_with(dir: &Path, name: &str, extra: &str) -> std::path::PathBuf {
    let key = |line: &str| line.split('=').next().unwrap_or("").trim().to_string();
    let overridden: Vec<String> = extra.lines().map(key).collect();
    let mut text: String = BASE_SEQUENCE
        .lines()
        .filter(|l| !overridden.contains(&key(l)))
        .map(|l| format!("{l}\n"))
        .collect();
    text.push_str(extra);
    let path = dir.join(name);
    write(&path, &text);
    path
}

/// Shi-Tomasi by definition: direct block sums of integer Sobel products,
/// 3x3 maxima, exhaustive greedy distance check against `occupied` and the
/// corners chosen so far.
pub fn reference_corners(
    img: &Image,
    params: &GoodFeaturesParams,
    occupied: &[Point2],
) -> Vec<Point2> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let px = |x: i64, y: i64| img.get(x as usize, y as usize) as i64;
    let grad = |x: i64, y: i64| -> (i64, i64) {
        if x < 1 || y < 1 || x > w - 2 || y > h - 2 {
            return (0, 0);
        }
        let gx = px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)
            - px(x - 1, y - 1)
            - 2 * px(x - 1, y)
            - px(x - 1, y + 1);
        let gy = px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)
            - px(x - 1, y - 1)
            - 2 * px(x, y - 1)
            - px(x + 1, y - 1);
        (gx, gy)
    };
    let r = params.block_radius as i64;
    let mut resp = vec![0.0f64; (w * h) as usize];
    for y in r + 1..h - r - 1 {
        for x in r + 1..w - r - 1 {
            let (mut a, mut b, mut c) = (0i64, 0i64, 0i64);
            for yy in y - r..=y + r {
                for xx in x - r..=x + r {
                    let (gx, gy) = grad(xx, yy);
                    a += gx * gx;
                    b += gx * gy;
                    c += gy * gy;
                }
            }
            let (a, b, c) = (a as f64, b as f64, c as f64);
            let half_diff = 0.5 * (a - c);
            resp[(y * w + x) as usize] = 0.5 * (a + c) - (half_diff * half_diff + b * b).sqrt();
        }
    }
    let max = resp.iter().copied().fold(0.0, f64::max);
    let lo = params.border.max(1) as i64;
    let mut cands = Vec::new();
    for y in lo..=h - 1 - lo {
        for x in lo..=w - 1 - lo {
            let v = resp[(y * w + x) as usize];
            if v <= 0.0 || v < params.quality_level * max {
                continue;
            }
            let mut local_max = true;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if (dx, dy) != (0, 0) && resp[((y + dy) * w + x + dx) as usize] > v {
                        local_max = false;
                    }
                }
            }
            if local_max {
                cands.push((v, y, x));
            }
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut chosen: Vec<Point2> = Vec::new();
    for (_, y, x) in cands {
        let p = Point2::new(x as f64, y as f64);
        if chosen
            .iter()
            .chain(occupied)
            .all(|q| q.dist_sq(&p) >= params.min_dist * params.min_dist)
        {
            chosen.push(p);
            if chosen.len() == params.max_new {
                break;
            }
        }
    }
    chosen
}
