//! Classifiers that relabel keystrokes from raw telemetry windows, trained on
//! labels that survived the consistency filters.
//!
//! The default [`CentroidRefiner`] flattens the fingertip trajectories of the
//! 16-frame window, scales every feature by its pooled within-class spread and
//! assigns the nearest class centroid. Mixup and label bootstrapping are
//! optional dataset transforms applied before fitting.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JointId, KeyId, KeystrokeEvent, Session};
use crate::rng;

const CLASSES: usize = KeyId::ALPHABET;

/// Any classifier from window features to a distribution over the 29 keys.
pub trait Refiner {
    fn predict(&self, features: &[f64]) -> Vec<f64>;

    fn classify(&self, features: &[f64]) -> KeyId {
        let p = self.predict(features);
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        KeyId::from_index(best).expect("class index within alphabet")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinerSample {
    pub event: usize,
    pub features: Vec<f64>,
    /// Target distribution over the 29 keys.
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RefinerDataset {
    pub samples: Vec<RefinerSample>,
}

impl RefinerDataset {
    /// One-hot samples for the events selected by `keep`, labelled with `labels`.
    pub fn from_labels(s: &Session, events: &[KeystrokeEvent], labels: &[KeyId], keep: &[bool]) -> RefinerDataset {
        let fx = FeatureExtractor::new(s);
        let samples = events
            .iter()
            .zip(labels)
            .zip(keep)
            .enumerate()
            .filter(|(_, ((_, l), k))| **k && !l.is_backspace())
            .map(|(i, ((e, l), _))| {
                let mut target = vec![0.0; CLASSES];
                target[l.index()] = 1.0;
                RefinerSample {
                    event: i,
                    features: fx.features(s, e),
                    target,
                }
            })
            .collect();
        RefinerDataset { samples }
    }

    fn distinct_labels(&self) -> usize {
        let mut seen = [false; CLASSES];
        for s in &self.samples {
            seen[argmax(&s.target)] = true;
        }
        seen.iter().filter(|x| **x).count()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Fingertip coordinates over an event window relative to their session means.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    tips: Vec<JointId>,
    means: Vec<[f64; 3]>,
}

impl FeatureExtractor {
    pub fn new(s: &Session) -> Self {
        let tips = s.layout.fingertips();
        let n = s.len().max(1) as f64;
        let means = tips
            .iter()
            .map(|&tip| {
                let mut m = [0.0; 3];
                for i in 0..s.len() {
                    let p = s.joint(i, tip);
                    for k in 0..3 {
                        m[k] += p[k] / n;
                    }
                }
                m
            })
            .collect();
        FeatureExtractor { tips, means }
    }

    pub fn features(&self, s: &Session, e: &KeystrokeEvent) -> Vec<f64> {
        let mut f = Vec::with_capacity(e.window.len() * self.tips.len() * 3);
        for &frame in &e.window {
            for (tip, m) in self.tips.iter().zip(&self.means) {
                let p = s.joint(frame, *tip);
                f.extend([p[0] - m[0], p[1] - m[1], p[2] - m[2]]);
            }
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixup {
    /// Beta distribution parameter for the mixing weight.
    pub alpha: f64,
    /// Synthetic samples added, as a multiple of the dataset size.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinerOptions {
    pub mixup: Option<Mixup>,
    /// Weight of the given labels when blended with the model's own predictions.
    pub bootstrap: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidRefiner {
    /// Class centroids in scaled feature space; `None` for classes without samples.
    pub centroids: Vec<Option<Vec<f64>>>,
    pub scale: Vec<f64>,
}

impl CentroidRefiner {
    fn fit(samples: &[RefinerSample]) -> CentroidRefiner {
        let dim = samples[0].features.len();
        let mut sums = vec![vec![0.0; dim]; CLASSES];
        let mut weight = vec![0.0; CLASSES];
        for s in samples {
            for (c, w) in s.target.iter().enumerate() {
                if *w > 0.0 {
                    weight[c] += w;
                    for (acc, x) in sums[c].iter_mut().zip(&s.features) {
                        *acc += w * x;
                    }
                }
            }
        }
        let raw: Vec<Option<Vec<f64>>> = sums
            .into_iter()
            .zip(&weight)
            .map(|(s, &w)| (w > 0.0).then(|| s.into_iter().map(|v| v / w).collect()))
            .collect();
        let mut var = vec![0.0; dim];
        let mut total = 0.0;
        for s in samples {
            for (c, w) in s.target.iter().enumerate() {
                if let (true, Some(mu)) = (*w > 0.0, &raw[c]) {
                    total += w;
                    for ((v, x), m) in var.iter_mut().zip(&s.features).zip(mu) {
                        *v += w * (x - m).powi(2);
                    }
                }
            }
        }
        let mut scale: Vec<f64> = var.iter().map(|v| (v / total.max(1e-300)).sqrt()).collect();
        let mut sorted = scale.clone();
        sorted.sort_by(f64::total_cmp);
        let floor = (0.05 * sorted[sorted.len() / 2]).max(1e-12);
        scale.iter_mut().for_each(|s| *s = s.max(floor));
        let centroids = raw
            .into_iter()
            .map(|c| c.map(|mu| mu.iter().zip(&scale).map(|(m, s)| m / s).collect()))
            .collect();
        CentroidRefiner { centroids, scale }
    }
}

impl Refiner for CentroidRefiner {
    fn predict(&self, features: &[f64]) -> Vec<f64> {
        let d2: Vec<f64> = self
            .centroids
            .iter()
            .map(|c| match c {
                Some(mu) => features
                    .iter()
                    .zip(&self.scale)
                    .zip(mu)
                    .map(|((x, s), m)| (x / s - m).powi(2))
                    .sum(),
                None => f64::INFINITY,
            })
            .collect();
        let best = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = d2.iter().map(|d| (-(d - best) / 2.0).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }
}

fn mixup(samples: &mut Vec<RefinerSample>, m: &Mixup, seed: u64) -> Result<()> {
    let beta = Beta::new(m.alpha, m.alpha).map_err(|e| Error::InvalidArgument(format!("mixup alpha: {e}")))?;
    let mut r = rng::stream(seed, "refiner/mixup");
    let n = samples.len();
    let extra = (m.ratio * n as f64).round() as usize;
    for _ in 0..extra {
        let i = r.random_range(0..n);
        let j = r.random_range(0..n);
        let lambda: f64 = beta.sample(&mut r);
        let (a, b) = (&samples[i], &samples[j]);
        let features = a
            .features
            .iter()
            .zip(&b.features)
            .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
            .collect();
        let target = a
            .target
            .iter()
            .zip(&b.target)
            .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
            .collect();
        samples.push(RefinerSample {
            event: a.event,
            features,
            target,
        });
    }
    Ok(())
}

pub fn train_refiner(ds: &RefinerDataset, opts: &RefinerOptions) -> Result<CentroidRefiner> {
    if ds.samples.is_empty() || ds.distinct_labels() < 2 {
        return Err(Error::SingleClass);
    }
    let mut samples = ds.samples.clone();
    if let Some(beta) = opts.bootstrap {
        let first = CentroidRefiner::fit(&samples);
        for s in &mut samples {
            let p = first.predict(&s.features);
            for (t, q) in s.target.iter_mut().zip(p) {
                *t = beta * *t + (1.0 - beta) * q;
            }
        }
    }
    if let Some(m) = &opts.mixup {
        mixup(&mut samples, m, opts.seed)?;
    }
    Ok(CentroidRefiner::fit(&samples))
}

/// Relabels every event with the refiner's decision.
pub fn refine(r: &dyn Refiner, events: &[KeystrokeEvent], s: &Session) -> Vec<KeyId> {
    let fx = FeatureExtractor::new(s);
    events.iter().map(|e| r.classify(&fx.features(s, e))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(event: usize, features: Vec<f64>, class: usize) -> RefinerSample {
        let mut target = vec![0.0; CLASSES];
        target[class] = 1.0;
        RefinerSample {
            event,
            features,
            target,
        }
    }

    fn toy() -> RefinerDataset {
        RefinerDataset {
            samples: vec![
                sample(0, vec![0.0, 0.0], 0),
                sample(1, vec![0.1, 0.0], 0),
                sample(2, vec![5.0, 5.0], 4),
                sample(3, vec![5.1, 4.9], 4),
            ],
        }
    }

    #[test]
    fn separable_training_set_is_reproduced() {
        let ds = toy();
        let r = train_refiner(&ds, &RefinerOptions::default()).unwrap();
        for s in &ds.samples {
            assert_eq!(r.classify(&s.features).index(), argmax(&s.target));
        }
    }

    #[test]
    fn one_label_is_rejected() {
        let ds = RefinerDataset {
            samples: vec![sample(0, vec![0.0], 3), sample(1, vec![1.0], 3)],
        };
        assert!(matches!(
            train_refiner(&ds, &RefinerOptions::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn mixup_and_bootstrap_keep_separable_data_separable() {
        let ds = toy();
        let opts = RefinerOptions {
            mixup: Some(Mixup { alpha: 0.2, ratio: 1.0 }),
            bootstrap: Some(0.8),
            seed: 3,
        };
        let r = train_refiner(&ds, &opts).unwrap();
        for s in &ds.samples {
            assert_eq!(r.classify(&s.features).index(), argmax(&s.target));
        }
    }

    #[test]
    fn predictions_are_distributions() {
        let r = train_refiner(&toy(), &RefinerOptions::default()).unwrap();
        let p = r.predict(&[2.0, 2.0]);
        assert_eq!(p.len(), CLASSES);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
