use serde::{Deserialize, Serialize};

use super::kmeans::TouchpointMap;
use crate::model::KeyId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackspaceParams {
    /// Size of a corner region as a fraction of the touch point bounding box, per axis.
    pub corner_fraction: f64,
    /// Minimum share of presses in a cluster that are followed by another press in it.
    pub min_repeat_ratio: f64,
}

impl Default for BackspaceParams {
    fn default() -> Self {
        BackspaceParams {
            corner_fraction: 0.15,
            min_repeat_ratio: 0.15,
        }
    }
}

/// Share of presses in each cluster immediately followed by a press in the same cluster.
pub fn repeat_ratios(map: &TouchpointMap) -> Vec<f64> {
    let k = map.k();
    let mut repeats = vec![0usize; k];
    let mut total = vec![0usize; k];
    for w in map.assignment.windows(2) {
        total[w[0]] += 1;
        if w[0] == w[1] {
            repeats[w[0]] += 1;
        }
    }
    (0..k)
        .map(|c| {
            if total[c] == 0 {
                0.0
            } else {
                repeats[c] as f64 / total[c] as f64
            }
        })
        .collect()
}

/// Clusters whose centroid lies in a corner region of the bounding box of the
/// non-thumb touch points.
pub fn corner_clusters(map: &TouchpointMap, corner_fraction: f64) -> Vec<usize> {
    let regular: Vec<[f64; 2]> = map
        .points
        .iter()
        .zip(&map.assignment)
        .filter(|(_, &c)| !map.thumb[c])
        .map(|(p, _)| *p)
        .collect();
    if regular.is_empty() {
        return Vec::new();
    }
    let lo = [0, 1].map(|k| regular.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min));
    let hi = [0, 1].map(|k| regular.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max));
    let near = |v: f64, k: usize| {
        let margin = corner_fraction * (hi[k] - lo[k]);
        v - lo[k] <= margin || hi[k] - v <= margin
    };
    (0..map.k())
        .filter(|&c| !map.thumb[c])
        .filter(|&c| near(map.centroids[c][0], 0) && near(map.centroids[c][1], 1))
        .collect()
}

/// The corner cluster with the highest repeat ratio, if it clears the floor.
pub fn find_backspace_cluster(map: &TouchpointMap, params: &BackspaceParams) -> Option<usize> {
    if map.k() < 4 {
        return None;
    }
    let ratios = repeat_ratios(map);
    corner_clusters(map, params.corner_fraction)
        .into_iter()
        .filter(|&c| ratios[c] >= params.min_repeat_ratio)
        .max_by(|&a, &b| ratios[a].total_cmp(&ratios[b]).then(b.cmp(&a)))
}

/// Relabels the backspace cluster's events as backspace and applies deletions:
/// each backspace removes the previous surviving key.
pub fn resolve_backspaces(map: &TouchpointMap, decoded: &[KeyId], backspace: Option<usize>) -> Vec<KeyId> {
    let mut out: Vec<KeyId> = Vec::with_capacity(decoded.len());
    for (&label, &c) in decoded.iter().zip(&map.assignment) {
        if Some(c) == backspace || label.is_backspace() {
            out.pop();
        } else {
            out.push(label);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(c: char) -> KeyId {
        KeyId::from_char(c).unwrap()
    }

    fn grid_map(sequence: &[usize]) -> TouchpointMap {
        // Four corner clusters and one in the middle.
        let centroids = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]];
        TouchpointMap {
            points: sequence.iter().map(|&c| centroids[c]).collect(),
            assignment: sequence.to_vec(),
            thumb: vec![false; centroids.len()],
            centroids,
        }
    }

    #[test]
    fn repeated_corner_cluster_is_backspace() {
        let seq = [4, 0, 3, 3, 4, 1, 3, 3, 3, 2, 4, 0];
        let map = grid_map(&seq);
        assert_eq!(find_backspace_cluster(&map, &BackspaceParams::default()), Some(3));
    }

    #[test]
    fn no_repeats_no_backspace() {
        let seq = [4, 0, 1, 2, 3, 4, 0, 1, 2, 3];
        let map = grid_map(&seq);
        let labels: Vec<KeyId> = "abcdeabcde".chars().map(key).collect();
        let bs = find_backspace_cluster(&map, &BackspaceParams::default());
        assert_eq!(bs, None);
        assert_eq!(resolve_backspaces(&map, &labels, bs), labels);
    }

    #[test]
    fn consecutive_backspaces_remove_two_keys() {
        let seq = [0, 1, 2, 3, 3, 4];
        let map = grid_map(&seq);
        let labels: Vec<KeyId> = "abcxxd".chars().map(key).collect();
        let out = resolve_backspaces(&map, &labels, Some(3));
        assert_eq!(out, vec![key('a'), key('d')]);
    }
}
