//! Keystroke detection from fingertip height.
//!
//! A press shows up as a positive peak in the second derivative of the
//! pressing fingertip's height. Peaks from all fingertips are pooled, a
//! two-component Gaussian mixture over log amplitudes separates real presses
//! from noise, and the equal-error point of the mixture becomes the detection
//! threshold. Heavy per-frame noise hides presses at the base smoothing, so
//! wider smoothing and a three-component mixture are tried before giving up.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::{JointId, KeystrokeEvent, Sample, Session, SpaceKind};
use crate::rng;

const EM_MAX_ITER: usize = 500;
const EM_TOL: f64 = 1e-8;
/// Seeded k-means++ initialisations; the fit with the highest likelihood wins.
const EM_STARTS: usize = 8;
const SIGMA_FLOOR: f64 = 1e-6;
const MIN_GMM_SAMPLES: usize = 10;
/// A wider smoothing step that keeps at least this share of the base peaks
/// found no noise to remove, so the base peaks are kept instead.
const KEEP_BASE_SHARE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    /// Minimum distance between peaks of one fingertip, frames.
    pub min_separation: usize,
    /// Peaks of different fingertips closer than this are one press, frames.
    pub merge_window: usize,
    /// Std of the Gaussian smoothing applied to heights before differencing, seconds.
    pub smoothing: f64,
    /// Mixture components whose typical amplitudes differ by less than this
    /// factor are treated as one population of real presses.
    pub min_component_ratio: f64,
    /// Multiples of `smoothing` tried in order until presses separate from noise.
    pub smoothing_steps: Vec<f64>,
    /// Largest mixture tried when two components do not separate.
    pub fallback_components: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            min_separation: 4,
            merge_window: 2,
            smoothing: 0.025,
            min_component_ratio: 2.5,
            smoothing_steps: vec![1.0, 2.0, 3.0],
            fallback_components: 3,
        }
    }
}

/// Peaks per fingertip as `(frame_idx, amplitude)`.
pub type PeakSeries = Vec<(JointId, Vec<(usize, f64)>)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub stds: [f64; 2],
    pub threshold: f64,
    pub iterations: usize,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub events: Vec<KeystrokeEvent>,
    /// Amplitude threshold, m/s².
    pub threshold: f64,
    /// Mixture fitted to log amplitudes.
    pub fit: GmmFit,
    pub peak_count: usize,
    /// Smoothing that produced the events, seconds.
    pub smoothing: f64,
    /// Mixture size that set the threshold; 1 when every peak was kept.
    pub components: usize,
}

/// Central second differences, one value per interior sample.
pub fn depth_acceleration(series: &[Sample], fps: f64) -> Result<Vec<f64>> {
    if series.len() < 3 {
        return Err(Error::TooFewFrames {
            needed: 3,
            got: series.len(),
        });
    }
    check_uniform(series.iter().map(|s| s.t), fps)?;
    let y: Vec<f64> = series.iter().map(|s| s.y).collect();
    Ok(second_difference(&y, fps))
}

fn second_difference(y: &[f64], fps: f64) -> Vec<f64> {
    let f2 = fps * fps;
    y.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]) * f2).collect()
}

fn check_uniform(times: impl Iterator<Item = f64>, fps: f64) -> Result<()> {
    let step = 1.0 / fps;
    let mut prev: Option<f64> = None;
    for (i, t) in times.enumerate() {
        if let Some(p) = prev {
            if ((t - p) - step).abs() > 1e-6 * step.max(1.0) {
                return Err(Error::NonUniform { index: i });
            }
        }
        prev = Some(t);
    }
    Ok(())
}

/// Gaussian smoothing with reflected edges; `sigma` in samples.
pub fn smooth(y: &[f64], sigma: f64) -> Vec<f64> {
    if sigma < 0.1 || y.len() < 2 {
        return y.to_vec();
    }
    let half = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = y.len() as isize;
    let at = |i: isize| {
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i } else { 2 * (n - 1) - i };
        }
        y[i as usize]
    };
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * at(i + k as isize - half))
                .sum::<f64>()
                / norm
        })
        .collect()
}

/// Positive local maxima; within `min_separation` frames only the largest survives.
pub fn find_peaks(a: &[f64], min_separation: usize) -> Vec<(usize, f64)> {
    let min_separation = min_separation.max(1);
    let mut maxima: Vec<(usize, f64)> = (1..a.len().saturating_sub(1))
        .filter(|&i| a[i] > 0.0 && a[i] > a[i - 1] && a[i] >= a[i + 1])
        .map(|i| (i, a[i]))
        .collect();
    if maxima.len() < 2 {
        return maxima;
    }
    let mut order: Vec<usize> = (0..maxima.len()).collect();
    order.sort_by(|&x, &y| maxima[y].1.total_cmp(&maxima[x].1).then(maxima[x].0.cmp(&maxima[y].0)));
    let mut keep = vec![false; maxima.len()];
    let mut taken: Vec<usize> = Vec::new();
    for k in order {
        let idx = maxima[k].0;
        if taken.iter().all(|&t| t.abs_diff(idx) >= min_separation) {
            keep[k] = true;
            taken.push(idx);
        }
    }
    let mut i = 0;
    maxima.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    maxima
}

fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Upper tail `P(X > x)` of `N(mu, sigma)`.
fn upper_tail(x: f64, mu: f64, sigma: f64) -> f64 {
    0.5 * erfc((x - mu) / (sigma * std::f64::consts::SQRT_2))
}

/// A one-dimensional Gaussian mixture, components sorted by mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl Mixture {
    /// Posterior probability of each component at `x`.
    pub fn posterior(&self, x: f64) -> Vec<f64> {
        let p: Vec<f64> = (0..self.means.len())
            .map(|c| self.weights[c] * normal_pdf(x, self.means[c], self.stds[c]))
            .collect();
        let tot: f64 = p.iter().sum();
        if tot > 0.0 {
            p.into_iter().map(|v| v / tot).collect()
        } else {
            let nearest = (0..self.means.len())
                .min_by(|&a, &b| (x - self.means[a]).abs().total_cmp(&(x - self.means[b]).abs()))
                .unwrap_or(0);
            (0..self.means.len())
                .map(|c| if c == nearest { 1.0 } else { 0.0 })
                .collect()
        }
    }
}

/// k-means++ seeds drawn from a stream keyed by the data and `start`.
fn seed_means(samples: &[f64], k: usize, start: usize) -> Vec<f64> {
    let mut r = rng::stream(rng::data_seed(samples), &format!("detection/gmm-init-{start}"));
    let mut seeds = vec![samples[r.random_range(0..samples.len())]];
    while seeds.len() < k {
        let d2: Vec<f64> = samples
            .iter()
            .map(|x| seeds.iter().map(|m| (x - m).powi(2)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let mut pick = r.random::<f64>() * total;
        let mut next = *samples.last().expect("non-empty samples");
        for (x, d) in samples.iter().zip(&d2) {
            if pick < *d {
                next = *x;
                break;
            }
            pick -= d;
        }
        seeds.push(next);
    }
    seeds.sort_by(f64::total_cmp);
    seeds
}

fn em(samples: &[f64], k: usize, floor: f64, start: usize) -> Mixture {
    let n = samples.len() as f64;
    let mean_all = samples.iter().sum::<f64>() / n;
    let std_all = (samples.iter().map(|x| (x - mean_all).powi(2)).sum::<f64>() / n)
        .sqrt()
        .max(floor);
    let mut m = Mixture {
        weights: vec![1.0 / k as f64; k],
        means: seed_means(samples, k, start),
        stds: vec![std_all; k],
        iterations: 0,
        log_likelihood: f64::NEG_INFINITY,
    };
    let mut resp = vec![vec![0.0; k]; samples.len()];
    let mut ll_prev = f64::NEG_INFINITY;
    for it in 1..=EM_MAX_ITER {
        m.iterations = it;
        let mut ll = 0.0;
        for (x, g) in samples.iter().zip(resp.iter_mut()) {
            let mut tot = 0.0;
            for c in 0..k {
                g[c] = m.weights[c] * normal_pdf(*x, m.means[c], m.stds[c]);
                tot += g[c];
            }
            if tot > 0.0 {
                g.iter_mut().for_each(|v| *v /= tot);
                ll += tot.ln();
            } else {
                let nearest = (0..k)
                    .min_by(|&a, &b| (x - m.means[a]).abs().total_cmp(&(x - m.means[b]).abs()))
                    .expect("k > 0");
                g.iter_mut()
                    .enumerate()
                    .for_each(|(c, v)| *v = (c == nearest) as u8 as f64);
                ll += -745.0;
            }
        }
        for c in 0..k {
            let nc: f64 = resp.iter().map(|g| g[c]).sum();
            if nc > 0.0 {
                let mu = samples.iter().zip(&resp).map(|(x, g)| g[c] * x).sum::<f64>() / nc;
                let var = samples
                    .iter()
                    .zip(&resp)
                    .map(|(x, g)| g[c] * (x - mu).powi(2))
                    .sum::<f64>()
                    / nc;
                m.means[c] = mu;
                m.stds[c] = var.sqrt().max(floor);
            }
            m.weights[c] = nc / n;
        }
        m.log_likelihood = ll;
        if (ll - ll_prev).abs() < EM_TOL {
            break;
        }
        ll_prev = ll;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| m.means[a].total_cmp(&m.means[b]));
    Mixture {
        weights: order.iter().map(|&c| m.weights[c]).collect(),
        means: order.iter().map(|&c| m.means[c]).collect(),
        stds: order.iter().map(|&c| m.stds[c]).collect(),
        ..m
    }
}

/// Best of several seeded EM runs for a `k`-component mixture. Constant data
/// yields one component carrying all the weight.
pub fn fit_mixture(samples: &[f64], k: usize) -> Result<Mixture> {
    if samples.len() < MIN_GMM_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_GMM_SAMPLES,
            got: samples.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("mixture needs at least one component".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        let floor = f64::MIN_POSITIVE.max(lo.abs() * SIGMA_FLOOR);
        let mut weights = vec![0.0; k];
        weights[0] = 1.0;
        return Ok(Mixture {
            weights,
            means: vec![lo; k],
            stds: vec![floor; k],
            iterations: 0,
            log_likelihood: 0.0,
        });
    }
    let floor = SIGMA_FLOOR * range;
    let mut best: Option<Mixture> = None;
    for start in 0..EM_STARTS {
        let m = em(samples, k, floor, start);
        if best.as_ref().is_none_or(|b| m.log_likelihood > b.log_likelihood) {
            best = Some(m);
        }
    }
    Ok(best.expect("at least one start"))
}

pub fn fit_two_gaussians(samples: &[f64]) -> Result<GmmFit> {
    let m = fit_mixture(samples, 2)?;
    let (w, mu, sd) = (
        [m.weights[0], m.weights[1]],
        [m.means[0], m.means[1]],
        [m.stds[0], m.stds[1]],
    );
    let threshold = if m.iterations == 0 {
        mu[0]
    } else {
        equal_error_point(w, mu, sd)
    };
    Ok(GmmFit {
        weights: w,
        means: mu,
        stds: sd,
        threshold,
        iterations: m.iterations,
        log_likelihood: m.log_likelihood,
    })
}

/// Point in `[mu1, mu2]` where the mass of component 1 above it equals the mass
/// of component 2 below it.
fn equal_error_point(w: [f64; 2], mu: [f64; 2], sd: [f64; 2]) -> f64 {
    let f = |t: f64| w[0] * upper_tail(t, mu[0], sd[0]) - w[1] * (1.0 - upper_tail(t, mu[1], sd[1]));
    let (mut lo, mut hi) = (mu[0], mu[1]);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo <= 0.0 {
        return lo;
    }
    if f_hi >= 0.0 {
        return hi;
    }
    while hi - lo > 1e-9 * (1.0 + hi.abs().max(lo.abs())) {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Peaks of every fingertip, with frame indices into the session.
pub fn fingertip_peaks(s: &Session, params: &DetectionParams) -> Result<PeakSeries> {
    s.require_space(SpaceKind::Original)?;
    if s.len() < 3 {
        return Err(Error::TooFewFrames {
            needed: 3,
            got: s.len(),
        });
    }
    check_uniform(s.frames.iter().map(|f| f.t), s.nominal_fps)?;
    let sigma = params.smoothing * s.nominal_fps;
    Ok(s.layout
        .fingertips()
        .into_iter()
        .map(|tip| {
            let y: Vec<f64> = (0..s.len()).map(|i| s.joint(i, tip)[1]).collect();
            let a = second_difference(&smooth(&y, sigma), s.nominal_fps);
            let peaks = find_peaks(&a, params.min_separation)
                .into_iter()
                .map(|(i, amp)| (i + 1, amp))
                .collect();
            (tip, peaks)
        })
        .collect())
}

/// Peaks of all fingertips in frame order; peaks closer than `merge_window`
/// frames collapse into the largest of them.
pub fn pool_peaks(peaks: &PeakSeries, merge_window: usize) -> Vec<(usize, f64)> {
    let mut pooled: Vec<(usize, f64)> = peaks.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    pooled.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for (i, a) in pooled {
        match merged.last_mut() {
            Some(last) if i - last.0 <= merge_window => {
                if a > last.1 {
                    *last = (i, a);
                }
            }
            _ => merged.push((i, a)),
        }
    }
    merged
}

/// Events at every pooled peak with amplitude at least `threshold`.
pub fn events_above(s: &Session, pooled: &[(usize, f64)], threshold: f64) -> Vec<KeystrokeEvent> {
    pooled
        .iter()
        .filter(|(_, a)| *a >= threshold)
        .map(|&(i, a)| KeystrokeEvent::new(s, i, a))
        .collect()
}

fn separated(fit: &GmmFit, min_ratio: f64) -> bool {
    fit.weights[0] > 0.0 && fit.weights[1] > 0.0 && fit.means[1] - fit.means[0] >= min_ratio.ln()
}

/// Log-amplitude threshold from a `k`-component fit. Components within
/// `min_ratio` of the loudest one are presses; `None` when every component is.
pub fn mixture_threshold(logs: &[f64], k: usize, min_ratio: f64) -> Result<Option<f64>> {
    if k == 2 {
        let fit = fit_two_gaussians(logs)?;
        return Ok(separated(&fit, min_ratio).then_some(fit.threshold));
    }
    let m = fit_mixture(logs, k)?;
    let top = m.means[k - 1];
    let press: Vec<bool> = (0..k).map(|c| m.means[c] >= top - min_ratio.ln()).collect();
    let Some(hi_noise) = (0..k).rev().find(|&c| !press[c] && m.weights[c] > 0.0) else {
        return Ok(None);
    };
    let lo_press = (0..k).find(|&c| press[c]).expect("loudest component is a press");
    let p_press = |x: f64| -> f64 {
        m.posterior(x)
            .iter()
            .zip(&press)
            .filter(|(_, p)| **p)
            .map(|(v, _)| v)
            .sum()
    };
    let (mut lo, mut hi) = (m.means[hi_noise], m.means[lo_press]);
    if p_press(lo) >= 0.5 || p_press(hi) <= 0.5 {
        return Ok(Some(0.5 * (lo + hi)));
    }
    while hi - lo > 1e-9 * (1.0 + hi.abs().max(lo.abs())) {
        let mid = 0.5 * (lo + hi);
        if p_press(mid) > 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

fn log_amplitudes(pooled: &[(usize, f64)]) -> Vec<f64> {
    pooled.iter().map(|p| p.1.max(f64::MIN_POSITIVE).ln()).collect()
}

/// Detects presses, widening the smoothing when no mixture separates presses
/// from noise at the base level.
pub fn detect_keystrokes(s: &Session, params: &DetectionParams) -> Result<Detection> {
    let mut base: Option<(Vec<(usize, f64)>, GmmFit)> = None;
    let steps: &[f64] = if params.smoothing_steps.is_empty() {
        &[1.0]
    } else {
        &params.smoothing_steps
    };
    for &step in steps {
        let p = DetectionParams {
            smoothing: params.smoothing * step,
            ..params.clone()
        };
        let pooled = pool_peaks(&fingertip_peaks(s, &p)?, params.merge_window);
        let logs = log_amplitudes(&pooled);
        let fit = fit_two_gaussians(&logs)?;
        let mut found = separated(&fit, params.min_component_ratio).then_some((fit.threshold, 2));
        for k in 3..=params.fallback_components {
            if found.is_some() {
                break;
            }
            found = mixture_threshold(&logs, k, params.min_component_ratio)?.map(|t| (t, k));
        }
        if let Some((t, components)) = found {
            let threshold = t.exp();
            let events = events_above(s, &pooled, threshold);
            if let Some((base_peaks, _)) = &base {
                if events.len() as f64 >= KEEP_BASE_SHARE * base_peaks.len() as f64 {
                    break;
                }
            }
            return Ok(Detection {
                events,
                threshold,
                fit,
                peak_count: pooled.len(),
                smoothing: p.smoothing,
                components,
            });
        }
        if base.is_none() {
            base = Some((pooled, fit));
        }
    }
    let (pooled, fit) = base.expect("at least one smoothing step");
    let threshold = pooled.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(Detection {
        events: events_above(s, &pooled, threshold),
        threshold,
        fit,
        peak_count: pooled.len(),
        smoothing: params.smoothing * steps[0],
        components: 1,
    })
}
