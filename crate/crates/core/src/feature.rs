//! Tracked sparse features.

use std::fmt;

use crate::image::Point2;

/// Identifier handed out by a tracker; never reused within its lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(pub u64);

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub id: FeatureId,
    pub position: Point2,
    /// Consecutive frames this feature has been observed in, at least 1.
    pub track_count: u32,
}

impl Feature {
    pub fn new(id: FeatureId, position: Point2) -> Self {
        Self {
            id,
            position,
            track_count: 1,
        }
    }
}

/// Ordered features with distinct ids. Filtering keeps relative order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    features: Vec<Feature>,
}

impl FeatureSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on duplicate ids.
    pub fn from_vec(features: Vec<Feature>) -> Self {
        let mut ids: Vec<_> = features.iter().map(|f| f.id).collect();
        ids.sort_unstable();
        assert!(ids.windows(2).all(|w| w[0] != w[1]), "duplicate feature id");
        Self { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Feature> {
        self.features.iter()
    }

    pub fn as_slice(&self) -> &[Feature] {
        &self.features
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.features.iter().map(|f| f.position).collect()
    }

    /// Keeps features whose flag is true.
    ///
    /// Panics if `keep.len() != self.len()`.
    pub fn retain_flags(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.features.len());
        let mut flags = keep.iter();
        self.features.retain(|_| *flags.next().unwrap());
    }

    /// Appends a feature; its id must not already be present.
    pub fn push(&mut self, feature: Feature) {
        debug_assert!(self.features.iter().all(|f| f.id != feature.id));
        self.features.push(feature);
    }
}

impl<'a> IntoIterator for &'a FeatureSet {
    type Item = &'a Feature;
    type IntoIter = std::slice::Iter<'a, Feature>;
    fn into_iter(self) -> Self::IntoIter {
        self.features.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(id: u64, u: f64) -> Feature {
        Feature::new(FeatureId(id), Point2::new(u, 0.0))
    }

    #[test]
    fn retain_preserves_order() {
        let mut set = FeatureSet::from_vec((0..6).map(|i| feat(i, i as f64)).collect());
        set.retain_flags(&[true, false, true, true, false, true]);
        let ids: Vec<u64> = set.iter().map(|f| f.id.0).collect();
        assert_eq!(ids, vec![0, 2, 3, 5]);
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn duplicate_ids_rejected() {
        FeatureSet::from_vec(vec![feat(1, 0.0), feat(1, 2.0)]);
    }
}
