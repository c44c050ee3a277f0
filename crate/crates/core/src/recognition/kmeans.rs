use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::KeystrokeEvent;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    /// Clusters for non-thumb presses.
    pub k: usize,
    /// Extra clusters reserved for thumb presses.
    pub thumb_k: usize,
    pub max_iter: usize,
    /// Independent k-means++ starts; the lowest inertia wins.
    pub starts: usize,
    pub seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            k: 38,
            thumb_k: 4,
            max_iter: 300,
            starts: 8,
            seed: 0,
        }
    }
}

/// Touch points of all events and their cluster assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchpointMap {
    pub points: Vec<[f64; 2]>,
    pub assignment: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    /// Whether each cluster holds thumb presses.
    pub thumb: Vec<bool>,
}

impl TouchpointMap {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(p, *c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus(points: &[[f64; 2]], k: usize, r: &mut impl Rng) -> Vec<[f64; 2]> {
    let mut centroids = vec![points[r.random_range(0..points.len())]];
    let mut d: Vec<f64> = points.iter().map(|p| dist2(*p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut pick = r.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, w) in d.iter().enumerate() {
                if pick < *w {
                    chosen = i;
                    break;
                }
                pick -= w;
            }
            chosen
        } else {
            r.random_range(0..points.len())
        };
        let c = points[next];
        centroids.push(c);
        for (di, p) in d.iter_mut().zip(points) {
            *di = di.min(dist2(*p, c));
        }
    }
    centroids
}

fn lloyd(points: &[[f64; 2]], mut centroids: Vec<[f64; 2]>, max_iter: usize) -> (Vec<usize>, Vec<[f64; 2]>, f64) {
    let k = centroids.len();
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(*p, &centroids).0).collect();
    for _ in 0..max_iter {
        let mut sum = vec![[0.0; 2]; k];
        let mut count = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sum[a][0] += p[0];
            sum[a][1] += p[1];
            count[a] += 1;
        }
        for j in 0..k {
            if count[j] > 0 {
                centroids[j] = [sum[j][0] / count[j] as f64, sum[j][1] / count[j] as f64];
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(*p, &centroids).0).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| dist2(*p, centroids[a]))
        .sum();
    (assignment, centroids, inertia)
}

/// K-means with k-means++ seeding; `k` is capped at the number of distinct points.
pub fn kmeans(
    points: &[[f64; 2]],
    k: usize,
    max_iter: usize,
    starts: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<[f64; 2]>)> {
    if k == 0 || points.len() < k {
        return Err(Error::TooFewEvents {
            events: points.len(),
            k,
        });
    }
    let mut distinct: Vec<[f64; 2]> = points.to_vec();
    distinct.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    distinct.dedup();
    let k = k.min(distinct.len());
    let mut best: Option<(Vec<usize>, Vec<[f64; 2]>, f64)> = None;
    for start in 0..starts.max(1) {
        let mut r = rng::stream(seed, &format!("kmeans/start-{start}"));
        let init = plus_plus(points, k, &mut r);
        let run = lloyd(points, init, max_iter);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (assignment, centroids, _) = best.expect("at least one start");
    Ok((assignment, centroids))
}

/// Clusters touch points; thumb presses go to their own clusters.
pub fn cluster_touchpoints(events: &[KeystrokeEvent], params: &ClusterParams) -> Result<TouchpointMap> {
    let points: Vec<[f64; 2]> = events
        .iter()
        .map(|e| {
            e.touchpoint
                .ok_or_else(|| Error::InvalidArgument(format!("event at frame {} has no touch point", e.frame_idx)))
        })
        .collect::<Result<_>>()?;
    if events.len() < params.k {
        return Err(Error::TooFewEvents {
            events: events.len(),
            k: params.k,
        });
    }
    let regular: Vec<usize> = (0..events.len()).filter(|&i| !events[i].thumb).collect();
    let thumbs: Vec<usize> = (0..events.len()).filter(|&i| events[i].thumb).collect();

    let mut assignment = vec![0; events.len()];
    let mut centroids = Vec::new();
    let mut thumb_flags = Vec::new();
    for (members, k, is_thumb, name) in [
        (&regular, params.k, false, "regular"),
        (&thumbs, params.thumb_k, true, "thumb"),
    ] {
        if members.is_empty() || k == 0 {
            continue;
        }
        let pts: Vec<[f64; 2]> = members.iter().map(|&i| points[i]).collect();
        let k = k.min(pts.len());
        let seed = rng::derive_seed(params.seed, name);
        let (a, c) = kmeans(&pts, k, params.max_iter, params.starts, seed)?;
        let offset = centroids.len();
        for (&i, &ai) in members.iter().zip(&a) {
            assignment[i] = offset + ai;
        }
        thumb_flags.extend(std::iter::repeat_n(is_thumb, c.len()));
        centroids.extend(c);
    }
    if !thumbs.is_empty() && params.thumb_k == 0 {
        return Err(Error::InvalidArgument(
            "thumb presses present but no thumb clusters".into(),
        ));
    }
    Ok(TouchpointMap {
        points,
        assignment,
        centroids,
        thumb: thumb_flags,
    })
}
