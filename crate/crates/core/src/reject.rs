//! Neighbor-consistency outlier rejection over a 2-D KD-tree.
//!
//! A feature whose displacement disagrees with the median displacement of its
//! spatial neighbors (found with an exact bounded k-NN query) is flagged.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::image::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    index: usize,
    axis: u8,
    split: f64,
    left: Option<u32>,
    right: Option<u32>,
}

/// Balanced 2-D KD-tree over point indices.
///
/// Axes alternate by depth (x at even depth) and each node splits at the
/// median of its subset. Left-subtree coordinates are `<=` the split value,
/// right-subtree coordinates are strictly greater.
#[derive(Debug, Clone)]
pub struct KdTree2 {
    points: Vec<Point2>,
    nodes: Vec<Node>,
    root: Option<u32>,
}

#[inline]
fn coord(p: &Point2, axis: u8) -> f64 {
    if axis == 0 {
        p.u
    } else {
        p.v
    }
}

/// Panics if a point is not finite.
pub fn build_kdtree(points: &[Point2]) -> KdTree2 {
    assert!(
        points.iter().all(|p| p.u.is_finite() && p.v.is_finite()),
        "non-finite point"
    );
    let mut tree = KdTree2 {
        points: points.to_vec(),
        nodes: Vec::with_capacity(points.len()),
        root: None,
    };
    let mut indices: Vec<usize> = (0..points.len()).collect();
    tree.root = tree.build(&mut indices, 0);
    tree
}

impl KdTree2 {
    fn build(&mut self, indices: &mut [usize], depth: usize) -> Option<u32> {
        if indices.is_empty() {
            return None;
        }
        let axis = (depth % 2) as u8;
        let pts = &self.points;
        indices.sort_by(|&a, &b| {
            coord(&pts[a], axis)
                .total_cmp(&coord(&pts[b], axis))
                .then(a.cmp(&b))
        });
        // Median, pushed right past equal coordinates so the right side stays strict.
        let split = coord(&pts[indices[(indices.len() - 1) / 2]], axis);
        let mut m = (indices.len() - 1) / 2;
        while m + 1 < indices.len() && coord(&pts[indices[m + 1]], axis) == split {
            m += 1;
        }
        let index = indices[m];
        let (left, rest) = indices.split_at_mut(m);
        let right = &mut rest[1..];

        let slot = self.nodes.len() as u32;
        self.nodes.push(Node {
            index,
            axis,
            split,
            left: None,
            right: None,
        });
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[slot as usize].left = l;
        self.nodes[slot as usize].right = r;
        Some(slot)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Index of the point stored at the root.
    pub fn root_index(&self) -> Option<usize> {
        self.root.map(|r| self.nodes[r as usize].index)
    }

    /// Checks every structural invariant; returns a description of the first
    /// violation.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = vec![false; self.points.len()];
        if let Some(root) = self.root {
            self.validate_node(root, 0, &mut seen)?;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(format!("index {missing} missing from tree"));
        }
        Ok(())
    }

    fn validate_node(
        &self,
        slot: u32,
        depth: usize,
        seen: &mut [bool],
    ) -> Result<Vec<usize>, String> {
        let node = &self.nodes[slot as usize];
        if node.axis as usize != depth % 2 {
            return Err(format!(
                "node {} at depth {depth} has axis {}",
                node.index, node.axis
            ));
        }
        if std::mem::replace(&mut seen[node.index], true) {
            return Err(format!("index {} appears twice", node.index));
        }
        if coord(&self.points[node.index], node.axis) != node.split {
            return Err(format!(
                "node {} split value differs from its point",
                node.index
            ));
        }
        let left = match node.left {
            Some(l) => self.validate_node(l, depth + 1, seen)?,
            None => Vec::new(),
        };
        let right = match node.right {
            Some(r) => self.validate_node(r, depth + 1, seen)?,
            None => Vec::new(),
        };
        if let Some(&bad) = left
            .iter()
            .find(|&&i| coord(&self.points[i], node.axis) > node.split)
        {
            return Err(format!(
                "left point {bad} above split of node {}",
                node.index
            ));
        }
        if let Some(&bad) = right
            .iter()
            .find(|&&i| coord(&self.points[i], node.axis) <= node.split)
        {
            return Err(format!(
                "right point {bad} not above split of node {}",
                node.index
            ));
        }
        let diff = left.len().abs_diff(right.len());
        let dupes = left
            .iter()
            .filter(|&&i| coord(&self.points[i], node.axis) == node.split)
            .count();
        if diff > 1 + 2 * dupes {
            return Err(format!(
                "node {} unbalanced: {} vs {}",
                node.index,
                left.len(),
                right.len()
            ));
        }
        let mut all = left;
        all.extend(right);
        all.push(node.index);
        Ok(all)
    }

    /// Up to `n` points within distance `r` of point `query_index`, nearest
    /// first, excluding the query itself. Equal distances order by index.
    ///
    /// Panics if `query_index` is out of range.
    pub fn knn_within_radius(&self, query_index: usize, n: usize, r: f64) -> Vec<(usize, f64)> {
        let query = self.points[query_index];
        let mut best = BinaryHeap::with_capacity(n + 1);
        if n > 0 {
            if let Some(root) = self.root {
                self.search(root, &query, query_index, n, r * r, &mut best);
            }
        }
        let mut out: Vec<Candidate> = best.into_vec();
        out.sort();
        out.into_iter()
            .map(|c| (c.index, c.dist_sq.sqrt()))
            .collect()
    }

    fn search(
        &self,
        slot: u32,
        query: &Point2,
        exclude: usize,
        n: usize,
        r_sq: f64,
        best: &mut BinaryHeap<Candidate>,
    ) {
        let node = &self.nodes[slot as usize];
        if node.index != exclude {
            let dist_sq = self.points[node.index].dist_sq(query);
            if dist_sq <= r_sq {
                let cand = Candidate {
                    dist_sq,
                    index: node.index,
                };
                if best.len() < n {
                    best.push(cand);
                } else if cand < *best.peek().unwrap() {
                    best.pop();
                    best.push(cand);
                }
            }
        }
        let delta = coord(query, node.axis) - node.split;
        let (near, far) = if delta <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(c) = near {
            self.search(c, query, exclude, n, r_sq, best);
        }
        if let Some(c) = far {
            let bound = if best.len() < n {
                r_sq
            } else {
                best.peek().unwrap().dist_sq.min(r_sq)
            };
            if delta * delta <= bound {
                self.search(c, query, exclude, n, r_sq, best);
            }
        }
    }
}

/// Max-heap entry ordered by `(distance², index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RejectError {
    #[error("{prev} previous positions but {curr} current positions")]
    LengthMismatch { prev: usize, curr: usize },
    #[error("invalid rejection config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionConfig {
    /// Neighbors consulted per feature.
    pub n_neighbors: usize,
    /// Neighbor search radius in pixels.
    pub radius: f64,
    /// Below this many neighbors a feature is kept unconditionally.
    pub min_neighbors: usize,
    /// Absolute deviation allowance in pixels.
    pub tau_abs: f64,
    /// Allowance proportional to the neighborhood's median motion.
    pub tau_rel: f64,
}

impl Default for RejectionConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 8,
            radius: 50.0,
            min_neighbors: 3,
            tau_abs: 3.0,
            tau_rel: 0.5,
        }
    }
}

impl RejectionConfig {
    pub fn validate(&self) -> Result<(), RejectError> {
        if self.min_neighbors < 1 || self.n_neighbors < self.min_neighbors {
            return Err(RejectError::Config(format!(
                "need n_neighbors >= min_neighbors >= 1, got n_neighbors={} min_neighbors={}",
                self.n_neighbors, self.min_neighbors
            )));
        }
        if !(self.radius > 0.0) {
            return Err(RejectError::Config(format!(
                "radius must be > 0, got {}",
                self.radius
            )));
        }
        if !(self.tau_abs > 0.0) {
            return Err(RejectError::Config(format!(
                "tau_abs must be > 0, got {}",
                self.tau_abs
            )));
        }
        if !(self.tau_rel >= 0.0) {
            return Err(RejectError::Config(format!(
                "tau_rel must be >= 0, got {}",
                self.tau_rel
            )));
        }
        Ok(())
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Keep flags, one per feature, for tracks `prev[i] -> curr[i]`.
///
/// Neighborhoods come from a KD-tree over the previous positions. Feature `i`
/// is kept when it has fewer than `min_neighbors` neighbors, or when
/// `|d_i - m_i| <= tau_abs + tau_rel·|m_i|`, where `d_i` is its displacement
/// and `m_i` the component-wise median of its neighbors' displacements.
pub fn reject_outliers(
    prev: &[Point2],
    curr: &[Point2],
    cfg: &RejectionConfig,
) -> Result<Vec<bool>, RejectError> {
    if prev.len() != curr.len() {
        return Err(RejectError::LengthMismatch {
            prev: prev.len(),
            curr: curr.len(),
        });
    }
    cfg.validate()?;
    let tree = build_kdtree(prev);
    let disp: Vec<Point2> = prev.iter().zip(curr).map(|(p, c)| *c - *p).collect();

    let mut du = Vec::with_capacity(cfg.n_neighbors);
    let mut dv = Vec::with_capacity(cfg.n_neighbors);
    Ok((0..prev.len())
        .map(|i| {
            let neighbors = tree.knn_within_radius(i, cfg.n_neighbors, cfg.radius);
            if neighbors.len() < cfg.min_neighbors {
                return true;
            }
            du.clear();
            dv.clear();
            for &(j, _) in &neighbors {
                du.push(disp[j].u);
                dv.push(disp[j].v);
            }
            let m = Point2::new(median(&mut du), median(&mut dv));
            (disp[i] - m).norm() <= cfg.tau_abs + cfg.tau_rel * m.norm()
        })
        .collect())
}
