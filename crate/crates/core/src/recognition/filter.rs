use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kmeans::TouchpointMap;
use crate::model::KeyId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    /// Events that passed both checks.
    pub keep: Vec<bool>,
    /// Majority label of every cluster, `None` for empty clusters.
    pub majority: Vec<Option<KeyId>>,
    /// Clusters dropped by the cross-cluster check.
    pub rejected_clusters: Vec<usize>,
}

impl FilterOutcome {
    pub fn pass_count(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }
}

/// Distance unit for the cross-cluster check when no key pitch is known.
fn median_nearest_centroid(centroids: &[[f64; 2]]) -> f64 {
    let mut d: Vec<f64> = centroids
        .iter()
        .enumerate()
        .filter_map(|(i, a)| {
            centroids
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
                .min_by(f64::total_cmp)
        })
        .collect();
    if d.is_empty() {
        return f64::INFINITY;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Within-cluster majority check followed by the cross-cluster check.
///
/// Thumb clusters are exempt from the cross-cluster check: their touch points
/// come from whichever finger moved most and are spread across the hand.
pub fn consistency_filter(map: &TouchpointMap, decoded: &[KeyId], key_pitch: Option<f64>) -> FilterOutcome {
    assert_eq!(map.points.len(), decoded.len(), "decoded labels must align with events");
    let k = map.k();
    let mut votes: Vec<BTreeMap<KeyId, usize>> = vec![BTreeMap::new(); k];
    for (&c, &label) in map.assignment.iter().zip(decoded) {
        *votes[c].entry(label).or_default() += 1;
    }
    let majority: Vec<Option<KeyId>> = votes
        .iter()
        .map(|v| v.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(k, _)| *k))
        .collect();
    let sizes = map.sizes();
    let unit = key_pitch.unwrap_or_else(|| median_nearest_centroid(&map.centroids));

    let mut by_label: BTreeMap<KeyId, Vec<usize>> = BTreeMap::new();
    for (c, m) in majority.iter().enumerate() {
        if let Some(m) = m {
            if !map.thumb[c] {
                by_label.entry(*m).or_default().push(c);
            }
        }
    }
    let mut rejected = vec![false; k];
    for clusters in by_label.values() {
        let mut sorted = clusters.clone();
        sorted.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
        let anchor = map.centroids[sorted[0]];
        for &c in &sorted[1..] {
            let p = map.centroids[c];
            let d = ((p[0] - anchor[0]).powi(2) + (p[1] - anchor[1]).powi(2)).sqrt();
            if d > unit {
                rejected[c] = true;
            }
        }
    }
    let keep = map
        .assignment
        .iter()
        .zip(decoded)
        .map(|(&c, &label)| !rejected[c] && majority[c] == Some(label))
        .collect();
    FilterOutcome {
        keep,
        majority,
        rejected_clusters: (0..k).filter(|&c| rejected[c]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(c: char) -> KeyId {
        KeyId::from_char(c).unwrap()
    }

    fn map(groups: &[([f64; 2], usize)]) -> TouchpointMap {
        let mut points = Vec::new();
        let mut assignment = Vec::new();
        for (c, (p, n)) in groups.iter().enumerate() {
            for _ in 0..*n {
                points.push(*p);
                assignment.push(c);
            }
        }
        TouchpointMap {
            points,
            assignment,
            centroids: groups.iter().map(|g| g.0).collect(),
            thumb: vec![false; groups.len()],
        }
    }

    #[test]
    fn consistent_input_is_untouched() {
        let m = map(&[([0.0, 0.0], 3), ([0.02, 0.0], 2)]);
        let labels = [key('a'), key('a'), key('a'), key('s'), key('s')];
        let out = consistency_filter(&m, &labels, Some(0.019));
        assert_eq!(out.pass_count(), 5);
        assert!(out.rejected_clusters.is_empty());
    }

    #[test]
    fn distant_duplicate_cluster_is_dropped() {
        let pitch = 0.019;
        let m = map(&[([0.0, 0.0], 40), ([3.0 * pitch, 0.0], 7)]);
        let labels = vec![key('e'); 47];
        let out = consistency_filter(&m, &labels, Some(pitch));
        assert_eq!(out.rejected_clusters, vec![1]);
        assert_eq!(out.pass_count(), 40);
    }

    #[test]
    fn minority_labels_are_dropped() {
        let m = map(&[([0.0, 0.0], 12)]);
        let mut labels = vec![key('e'); 10];
        labels.extend([key('r'), key('r')]);
        let out = consistency_filter(&m, &labels, Some(0.019));
        assert_eq!(out.pass_count(), 10);
        assert!(!out.keep[10] && !out.keep[11]);
    }
}
