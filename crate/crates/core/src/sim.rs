//! Synthetic typing sessions with a tunable hand-tracking noise model.
//!
//! The clean trajectory keeps every fingertip at its home position, lifted
//! above the keyboard plane. A press moves the assigned fingertip laterally to
//! the key and dips it onto the plane along a raised-cosine profile, so the
//! contact point has zero vertical velocity. A space press dips the thumb while
//! the other four fingers of that hand ride down part of the way with it.
//!
//! Noise (all depth terms in key heights):
//!
//! * a per-user constant height bias on every joint,
//! * a slow height drift shared by all joints of a hand,
//! * a per-press error on how far the pressing fingertip is reported to descend,
//! * a slow per-fingertip jitter that fades out while that fingertip presses,
//! * a per-press `(x, z)` offset of the touch point,
//! * white per-frame measurement noise on every coordinate.
//!
//! The drift and the press error together give the depth error of the pressing
//! fingertip, whose standard deviation is `depth_std`; `drift_share` splits the
//! variance between them.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyboard;
use crate::model::{
    Finger, GroundTruth, GroundTruthEvent, Hand, HandLayout, JointId, KeyId, KeyboardModel, Session, Space, SpaceKind,
    TelemetryFrame,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TypistParams {
    pub layout: HandLayout,
    pub finger_map: BTreeMap<KeyId, JointId>,
    /// Home `(x, z)` of each fingertip.
    pub rest_pose: BTreeMap<JointId, [f64; 2]>,
    /// Height of a resting fingertip above the keyboard plane, key heights.
    pub press_depth_amplitude: f64,
    /// Per-finger scale of `press_depth_amplitude`, thumb to pinky.
    pub lift_profile: [f64; 5],
    /// Duration of the vertical dip, seconds.
    pub press_duration: f64,
    /// Half-width of the lateral reach towards a key, seconds.
    pub reach_time: f64,
    /// Median of the log-normal inter-key interval, seconds.
    pub interval_median: f64,
    pub interval_sigma: f64,
    pub min_interval: f64,
    pub max_interval: f64,
    /// Fraction of the thumb dip followed by the other fingers of that hand.
    pub tandem_fraction: f64,
    /// Probability of hitting a neighboring key instead of the intended one.
    pub error_rate: f64,
    /// A typo is noticed after up to this many further characters, all of
    /// which are then erased with backspace.
    pub max_late_notice: usize,
    /// Idle time before the first and after the last press, seconds.
    pub lead_in: f64,
}

impl Default for TypistParams {
    fn default() -> Self {
        let layout = HandLayout::STANDARD;
        TypistParams {
            finger_map: keyboard::touch_typing_fingers(&layout),
            rest_pose: keyboard::home_positions(&layout),
            layout,
            press_depth_amplitude: 4.0,
            lift_profile: [0.6, 1.0, 0.95, 0.85, 0.75],
            press_duration: 0.15,
            reach_time: 0.16,
            interval_median: 0.18,
            interval_sigma: 0.35,
            min_interval: 0.09,
            max_interval: 1.2,
            tandem_fraction: 0.5,
            error_rate: 0.02,
            max_late_notice: 2,
            lead_in: 0.5,
        }
    }
}

impl TypistParams {
    fn check(&self) -> Result<()> {
        let ok = self.press_duration > 0.0
            && self.press_depth_amplitude > 0.0
            && self.lift_profile.iter().all(|&l| l > 0.0)
            && self.reach_time > 0.0
            && self.interval_median > 0.0
            && self.interval_sigma >= 0.0
            && self.min_interval > 0.0
            && self.max_interval >= self.min_interval
            && (0.0..=1.0).contains(&self.error_rate)
            && (0.0..=1.0).contains(&self.tandem_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("typist parameters out of range".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// Std of the pressing fingertip's depth error, key heights.
    pub depth_std: f64,
    /// Constant height offset, key heights.
    pub depth_bias: f64,
    /// Fraction of the depth-error variance carried by the slow hand drift.
    pub drift_share: f64,
    /// Std of the slow per-fingertip jitter, key heights.
    pub jitter_std: f64,
    /// Std of the per-press touch point offset, meters.
    pub xz_std: f64,
    /// Std of white per-frame measurement noise, key heights.
    pub white_std: f64,
    /// Correlation time of the hand drift, seconds.
    pub drift_time: f64,
    /// Correlation time of the fingertip jitter, seconds.
    pub jitter_time: f64,
    /// When set, press error, jitter and touch point noise only affect these fingertips.
    pub only_fingertips: Option<Vec<JointId>>,
    pub fps: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            depth_std: 1.639,
            depth_bias: 0.5,
            drift_share: 0.6,
            jitter_std: 1.4,
            xz_std: 0.002,
            white_std: 0.03,
            drift_time: 0.8,
            jitter_time: 0.4,
            only_fingertips: None,
            fps: 60.0,
            seed: 1,
        }
    }
}

impl NoiseParams {
    /// All noise switched off.
    pub fn zero(seed: u64) -> Self {
        NoiseParams {
            depth_std: 0.0,
            depth_bias: 0.0,
            jitter_std: 0.0,
            xz_std: 0.0,
            white_std: 0.0,
            seed,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<()> {
        let stds = [self.depth_std, self.jitter_std, self.xz_std, self.white_std];
        if stds.iter().any(|s| !(*s >= 0.0))
            || !(0.0..=1.0).contains(&self.drift_share)
            || !(self.fps > 0.0)
            || !(self.drift_time > 0.0 && self.jitter_time > 0.0)
        {
            return Err(Error::InvalidArgument("noise parameters out of range".into()));
        }
        Ok(())
    }

    fn affects(&self, tip: JointId) -> bool {
        self.only_fingertips.as_ref().is_none_or(|tips| tips.contains(&tip))
    }
}

/// A scheduled key press.
#[derive(Debug, Clone)]
struct Press {
    t: f64,
    key: KeyId,
    finger: JointId,
    /// Lateral target of the fingertip.
    target: [f64; 2],
    /// Reported height above the plane at contact, relative to drift and bias, meters.
    contact: f64,
    /// Half-width of the lateral reach, seconds; the finger is home again by the neighboring presses.
    reach: f64,
}

/// Key sequence actually typed for `text`, including typos and corrections.
fn typed_keys(text: &str, kb: &KeyboardModel, tp: &TypistParams, rng: &mut impl Rng) -> Result<Vec<KeyId>> {
    let intended: Vec<KeyId> = text
        .chars()
        .map(|c| match KeyId::from_char(c) {
            Some(k)
                if !k.is_backspace()
                    && c == k.to_char()
                    && tp.finger_map.contains_key(&k)
                    && kb.keys.contains_key(&k) =>
            {
                Ok(k)
            }
            _ => Err(Error::UnmappedKey(c)),
        })
        .collect::<Result<_>>()?;
    if tp.error_rate > 0.0 && !tp.finger_map.contains_key(&KeyId::BACKSPACE) {
        return Err(Error::UnmappedKey('\u{8}'));
    }
    let mut out = Vec::with_capacity(intended.len() + intended.len() / 10);
    for (i, &key) in intended.iter().enumerate() {
        // Draws happen unconditionally so the typo pattern does not depend on text content.
        let roll: f64 = rng.random();
        let pick: f64 = rng.random();
        let late: usize = rng.random_range(0..=tp.max_late_notice);
        let candidates: Vec<KeyId> = if key == KeyId::SPACE {
            Vec::new()
        } else {
            keyboard::neighbors(kb, key)
                .into_iter()
                .filter(|k| tp.finger_map.contains_key(k))
                .collect()
        };
        if roll < tp.error_rate && !candidates.is_empty() {
            let wrong = candidates[((pick * candidates.len() as f64) as usize).min(candidates.len() - 1)];
            out.push(wrong);
            let late = late.min(intended.len() - i - 1);
            out.extend_from_slice(&intended[i + 1..i + 1 + late]);
            out.extend(std::iter::repeat_n(KeyId::BACKSPACE, late + 1));
        }
        out.push(key);
    }
    Ok(out)
}

fn schedule(
    keys: &[KeyId],
    kb: &KeyboardModel,
    tp: &TypistParams,
    np: &NoiseParams,
    typist_rng: &mut impl Rng,
    noise_rng: &mut impl Rng,
) -> Vec<Press> {
    let fps = np.fps;
    let snap = |t: f64| (t * fps).round() / fps;
    let mut t = tp.lead_in;
    let mut last_finger: Option<JointId> = None;
    let mut out = Vec::with_capacity(keys.len());
    for &key in keys {
        let finger = tp.finger_map[&key];
        let interval_draw: f64 = typist_rng.sample(StandardNormal);
        let depth_draw: f64 = noise_rng.sample(StandardNormal);
        let dx: f64 = noise_rng.sample(StandardNormal);
        let dz: f64 = noise_rng.sample(StandardNormal);
        if !out.is_empty() {
            let mut gap = (tp.interval_median.ln() + tp.interval_sigma * interval_draw)
                .exp()
                .clamp(tp.min_interval, tp.max_interval);
            if last_finger == Some(finger) {
                gap = gap.max(tp.press_duration + 2.0 / fps);
            }
            t += gap;
        }
        let noisy = np.affects(finger);
        let center = kb.keys[&key];
        let (target, contact) = if noisy {
            let press_sd = np.depth_std * (1.0 - np.drift_share).sqrt();
            (
                [center[0] + np.xz_std * dx, center[1] + np.xz_std * dz],
                press_sd * depth_draw * kb.key_height,
            )
        } else {
            (center, 0.0)
        };
        out.push(Press {
            t: snap(t),
            key,
            finger,
            target,
            contact,
            reach: tp.reach_time,
        });
        last_finger = Some(finger);
    }
    for i in 0..out.len() {
        let before = if i > 0 { out[i].t - out[i - 1].t } else { f64::INFINITY };
        let after = out.get(i + 1).map_or(f64::INFINITY, |n| n.t - out[i].t);
        out[i].reach = out[i].reach.min(before).min(after);
    }
    out
}

/// Unit-variance smooth Gaussian process sampled at `n` frames.
fn smooth_process(n: usize, corr_frames: f64, rng: &mut impl Rng) -> Vec<f64> {
    let sigma = corr_frames.max(0.5);
    let half = (3.0 * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|k| {
            let d = k as f64 - half as f64;
            (-0.5 * d * d / (sigma * sigma)).exp()
        })
        .collect();
    let norm = kernel.iter().map(|k| k * k).sum::<f64>().sqrt();
    let white: Vec<f64> = (0..n + 2 * half).map(|_| rng.sample(StandardNormal)).collect();
    (0..n)
        .map(|i| {
            white[i..i + kernel.len()]
                .iter()
                .zip(&kernel)
                .map(|(w, k)| w * k)
                .sum::<f64>()
                / norm
        })
        .collect()
}

fn raised_cosine(dt: f64, width: f64) -> f64 {
    if dt.abs() >= width / 2.0 {
        0.0
    } else {
        0.5 * (1.0 + (2.0 * std::f64::consts::PI * dt / width).cos())
    }
}

/// Resting skeleton of one hand, joint index → position.
fn rest_skeleton(layout: &HandLayout, hand: Hand, tips: &BTreeMap<Finger, [f64; 3]>, plane_y: f64) -> Vec<[f64; 3]> {
    let side = match hand {
        Hand::Left => -1.0,
        Hand::Right => 1.0,
    };
    let index_tip = tips[&Finger::Index];
    let pinky_tip = tips[&Finger::Pinky];
    let cx = 0.5 * (index_tip[0] + pinky_tip[0]);
    let home_z = index_tip[2];
    (0..layout.joints_per_hand)
        .map(|j| match layout.chain_position(j) {
            Some((finger, pos)) => {
                let tip = tips[&finger];
                let back = (HandLayout::CHAIN_LEN - 1 - pos) as f64;
                if finger == Finger::Thumb {
                    [
                        tip[0] - side * 0.012 * back,
                        tip[1] + 0.008 * back,
                        tip[2] - 0.016 * back,
                    ]
                } else {
                    [tip[0], tip[1] + 0.010 * back, tip[2] - 0.022 * back]
                }
            }
            None => match j {
                0 => [cx, plane_y + 0.045, home_z - 0.11],
                1 => [cx, plane_y + 0.040, home_z - 0.06],
                _ => [cx, plane_y + 0.050, home_z - 0.25],
            },
        })
        .collect()
}

const CHAIN_WEIGHTS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Generates telemetry and ground truth for typing `text`.
pub fn synth_session(
    text: &str,
    kb: &KeyboardModel,
    tp: &TypistParams,
    np: &NoiseParams,
) -> Result<(Session, GroundTruth)> {
    tp.check()?;
    np.check()?;
    let layout = tp.layout;
    let mut typist_rng = rng::stream(np.seed, "sim/typist");
    let mut press_rng = rng::stream(np.seed, "sim/press");
    let keys = typed_keys(text, kb, tp, &mut typist_rng)?;
    let presses = schedule(&keys, kb, tp, np, &mut typist_rng, &mut press_rng);

    let fps = np.fps;
    let end = presses.last().map_or(0.0, |p| p.t) + tp.lead_in.max(1.0 / fps);
    let n = (end * fps).round() as usize + 1;
    let kh = kb.key_height;

    let mut noise_rng = rng::stream(np.seed, "sim/noise");
    let drift: Vec<Vec<f64>> = Hand::BOTH
        .iter()
        .map(|_| smooth_process(n, np.drift_time * fps, &mut noise_rng))
        .collect();
    let tips = layout.fingertips();
    let jitter: Vec<Vec<f64>> = tips
        .iter()
        .map(|_| smooth_process(n, np.jitter_time * fps, &mut noise_rng))
        .collect();
    let mut white_rng = rng::stream(np.seed, "sim/white");

    // Presses per fingertip, plus ride-along dips of the other fingers during thumb presses.
    let mut own: BTreeMap<JointId, Vec<&Press>> = BTreeMap::new();
    let mut rides: BTreeMap<Hand, Vec<&Press>> = BTreeMap::new();
    for p in &presses {
        own.entry(p.finger).or_default().push(p);
        if layout.finger_of_tip(p.finger) == Some(Finger::Thumb) {
            rides.entry(p.finger.hand).or_default().push(p);
        }
    }

    let rest_y = |tip: JointId| {
        let f = layout.finger_of_tip(tip).expect("fingertip");
        kb.plane_y + tp.press_depth_amplitude * tp.lift_profile[f as usize] * kh
    };
    let mut rest_tips: BTreeMap<Hand, BTreeMap<Finger, [f64; 3]>> = BTreeMap::new();
    for &tip in &tips {
        let home = tp
            .rest_pose
            .get(&tip)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no rest pose for fingertip {tip}")))?;
        rest_tips
            .entry(tip.hand)
            .or_default()
            .insert(layout.finger_of_tip(tip).unwrap(), [home[0], rest_y(tip), home[1]]);
    }
    let skeletons: Vec<Vec<[f64; 3]>> = Hand::BOTH
        .iter()
        .map(|&h| rest_skeleton(&layout, h, &rest_tips[&h], kb.plane_y))
        .collect();

    let d = tp.press_duration;
    let r = tp.reach_time;
    let press_sd_drift = np.depth_std * np.drift_share.sqrt();
    let empty: Vec<&Press> = Vec::new();
    let mut frames = Vec::with_capacity(n);
    let mut tip_offsets = vec![[0.0f64; 3]; tips.len()];
    for i in 0..n {
        let t = i as f64 / fps;
        for (slot, &tip) in tips.iter().enumerate() {
            let home = rest_tips[&tip.hand][&layout.finger_of_tip(tip).unwrap()];
            let list = own.get(&tip).unwrap_or(&empty);
            let mut lateral = [0.0, 0.0];
            let mut best_reach = 0.0;
            let mut dy = 0.0f64;
            let mut own_env = 0.0f64;
            for p in nearby(list, t, r.max(d)) {
                let reach = raised_cosine(t - p.t, 2.0 * p.reach);
                if reach > best_reach {
                    best_reach = reach;
                    lateral = [reach * (p.target[0] - home[0]), reach * (p.target[1] - home[2])];
                }
                let env = raised_cosine(t - p.t, d);
                own_env = own_env.max(env);
                dy = dy.min(env * (kb.plane_y + p.contact - home[1]));
            }
            if layout.finger_of_tip(tip) != Some(Finger::Thumb) {
                for p in nearby(rides.get(&tip.hand).unwrap_or(&empty), t, d) {
                    let env = raised_cosine(t - p.t, d);
                    let thumb_home = rest_tips[&tip.hand][&Finger::Thumb][1];
                    let thumb_dip = thumb_home - (kb.plane_y + p.contact);
                    dy = dy.min(-tp.tandem_fraction * thumb_dip * env);
                }
            }
            let jit = if np.affects(tip) {
                np.jitter_std * kh * jitter[slot][i] * (1.0 - own_env)
            } else {
                0.0
            };
            tip_offsets[slot] = [lateral[0], dy + jit, lateral[1]];
        }
        let mut coords = Vec::with_capacity(layout.joint_count());
        for (h_idx, &hand) in Hand::BOTH.iter().enumerate() {
            let hand_dy = (np.depth_bias + press_sd_drift * drift[h_idx][i]) * kh;
            for (j, rest) in skeletons[h_idx].iter().enumerate() {
                let mut p = *rest;
                if let Some((finger, pos)) = layout.chain_position(j) {
                    let slot = tips
                        .iter()
                        .position(|&tp| tp == layout.fingertip(hand, finger))
                        .unwrap();
                    let w = CHAIN_WEIGHTS[pos];
                    for k in 0..3 {
                        p[k] += w * tip_offsets[slot][k];
                    }
                }
                p[1] += hand_dy;
                for v in &mut p {
                    let e: f64 = white_rng.sample(StandardNormal);
                    *v += np.white_std * kh * e;
                }
                coords.push(p);
            }
        }
        frames.push(TelemetryFrame { t, coords });
    }

    let session = Session {
        frames,
        space: Space::Original,
        nominal_fps: fps,
        layout,
        has_depth: true,
    };
    let truth = GroundTruth {
        text: text.to_string(),
        events: presses
            .iter()
            .map(|p| GroundTruthEvent {
                t: p.t,
                key: p.key,
                finger: p.finger,
            })
            .collect(),
    };
    Ok((session, truth))
}

/// Presses whose influence window `[t - half, t + half]` may cover `t`.
fn nearby<'a>(list: &'a [&'a Press], t: f64, half: f64) -> impl Iterator<Item = &'a Press> + 'a {
    let start = list.partition_point(|p| p.t < t - half);
    list[start..].iter().take_while(move |p| p.t <= t + half).copied()
}

/// Measured noise statistics of a session against its ground truth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseReport {
    /// Std of the pressing fingertip's height above the plane at each press, key heights.
    pub measured_depth_std: f64,
    pub measured_depth_mean: f64,
    /// Fraction of presses where some other fingertip reads lower than the pressing one.
    pub inversion_rate: f64,
    /// RMS distance of the pressing fingertip from the key center, per key, meters.
    pub xz_scatter: BTreeMap<KeyId, f64>,
    pub events: usize,
}

pub fn noise_stats(s: &Session, gt: &GroundTruth, kb: &KeyboardModel) -> Result<NoiseReport> {
    s.require_space(SpaceKind::Original)?;
    if s.is_empty() {
        return Err(Error::EmptySession);
    }
    let t0 = s.frames[0].t;
    let tips = s.layout.fingertips();
    let mut depth = Vec::with_capacity(gt.events.len());
    let mut inversions = 0usize;
    let mut scatter: BTreeMap<KeyId, (f64, usize)> = BTreeMap::new();
    for e in &gt.events {
        let i = ((e.t - t0) * s.nominal_fps).round();
        if i < 0.0 || i as usize >= s.len() {
            return Err(Error::InvalidArgument(format!(
                "ground-truth event at t={} lies outside the session",
                e.t
            )));
        }
        let i = i as usize;
        let p = s.joint(i, e.finger);
        depth.push((p[1] - kb.plane_y) / kb.key_height);
        if tips.iter().any(|&f| f != e.finger && s.joint(i, f)[1] < p[1]) {
            inversions += 1;
        }
        if let Some(c) = kb.center(e.key) {
            let entry = scatter.entry(e.key).or_default();
            entry.0 += (p[0] - c[0]).powi(2) + (p[2] - c[1]).powi(2);
            entry.1 += 1;
        }
    }
    let n = depth.len();
    let (mean, std) = mean_std(&depth);
    Ok(NoiseReport {
        measured_depth_std: std,
        measured_depth_mean: mean,
        inversion_rate: if n == 0 { 0.0 } else { inversions as f64 / n as f64 },
        xz_scatter: scatter
            .into_iter()
            .map(|(k, (sum, c))| (k, (sum / c as f64).sqrt()))
            .collect(),
        events: n,
    })
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Fixed inputs used to measure candidate noise parameters during calibration.
#[derive(Debug, Clone)]
pub struct CalibrationSetup {
    pub text: String,
    pub keyboard: KeyboardModel,
    pub typist: TypistParams,
}

const CALIBRATION_TOLERANCE: f64 = 0.10;
const MAX_STD: f64 = 8.0;

/// Tunes `depth_std` and then `jitter_std` by bisection so that a session
/// generated with the result reproduces the target depth std and inversion rate.
pub fn calibrate(np: &NoiseParams, targets: &NoiseReport, setup: &CalibrationSetup) -> Result<NoiseParams> {
    if !(0.0..=1.0).contains(&targets.inversion_rate) {
        return Err(Error::Unreachable(format!(
            "inversion rate {} is not a probability",
            targets.inversion_rate
        )));
    }
    if !(targets.measured_depth_std >= 0.0) {
        return Err(Error::Unreachable("negative depth std".into()));
    }
    let measure = |p: &NoiseParams| -> Result<NoiseReport> {
        let (s, gt) = synth_session(&setup.text, &setup.keyboard, &setup.typist, p)?;
        noise_stats(&s, &gt, &setup.keyboard)
    };
    let mut out = np.clone();
    if targets.measured_depth_std == 0.0 && targets.inversion_rate == 0.0 {
        out.depth_std = 0.0;
        out.jitter_std = 0.0;
        out.white_std = 0.0;
        out.xz_std = 0.0;
        return Ok(out);
    }

    out.depth_std = bisect(0.0, MAX_STD, targets.measured_depth_std, |v| {
        let mut p = out.clone();
        p.depth_std = v;
        Ok(measure(&p)?.measured_depth_std)
    })?;
    out.jitter_std = bisect(0.0, MAX_STD, targets.inversion_rate, |v| {
        let mut p = out.clone();
        p.jitter_std = v;
        Ok(measure(&p)?.inversion_rate)
    })?;

    let got = measure(&out)?;
    let close = |got: f64, want: f64| (got - want).abs() <= CALIBRATION_TOLERANCE * want.abs().max(1e-9);
    if !close(got.measured_depth_std, targets.measured_depth_std) || !close(got.inversion_rate, targets.inversion_rate)
    {
        return Err(Error::Unreachable(format!(
            "best parameters give depth std {:.3} and inversion rate {:.3}",
            got.measured_depth_std, got.inversion_rate
        )));
    }
    Ok(out)
}

/// Bisection on a non-decreasing response; returns the parameter whose
/// response is closest to `target`.
fn bisect(mut lo: f64, mut hi: f64, target: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let f_hi = f(hi)?;
    if f_hi < target * (1.0 - CALIBRATION_TOLERANCE) {
        return Err(Error::Unreachable(format!(
            "response reaches only {f_hi:.3} of target {target:.3}"
        )));
    }
    let mut best = (hi, (f_hi - target).abs());
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if (v - target).abs() < best.1 {
            best = (mid, (v - target).abs());
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-4 {
            break;
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_typist() -> TypistParams {
        TypistParams {
            error_rate: 0.0,
            ..Default::default()
        }
    }

    fn local_minima(series: &[f64]) -> Vec<usize> {
        (1..series.len() - 1)
            .filter(|&i| series[i] < series[i - 1] && series[i] <= series[i + 1])
            .collect()
    }

    #[test]
    fn zero_noise_double_press_dips_only_the_left_pinky() {
        let kb = keyboard::qwerty();
        let tp = quiet_typist();
        let (s, gt) = synth_session("aa", &kb, &tp, &NoiseParams::zero(1)).unwrap();
        let pinky = tp.layout.fingertip(Hand::Left, Finger::Pinky);
        let ys: Vec<f64> = (0..s.len()).map(|i| s.joint(i, pinky)[1]).collect();
        let minima = local_minima(&ys);
        assert_eq!(minima.len(), 2);
        for &m in &minima {
            assert!((ys[m] - kb.plane_y).abs() < 1e-12);
        }
        for (e, &m) in gt.events.iter().zip(&minima) {
            assert!(((e.t * s.nominal_fps).round() as i64 - m as i64).abs() <= 1);
        }
        for tip in tp.layout.fingertips() {
            if tip == pinky {
                continue;
            }
            let first = s.joint(0, tip);
            assert!((0..s.len()).all(|i| s.joint(i, tip) == first), "{tip} moved");
        }
    }

    #[test]
    fn the_is_typed_with_expected_fingers() {
        let kb = keyboard::qwerty();
        let tp = quiet_typist();
        let (_, gt) = synth_session("the", &kb, &tp, &NoiseParams::zero(3)).unwrap();
        let fingers: Vec<JointId> = gt.events.iter().map(|e| e.finger).collect();
        let l = tp.layout;
        assert_eq!(
            fingers,
            vec![
                l.fingertip(Hand::Left, Finger::Index),
                l.fingertip(Hand::Right, Finger::Index),
                l.fingertip(Hand::Left, Finger::Middle),
            ]
        );
    }

    #[test]
    fn unmapped_characters_are_rejected() {
        let kb = keyboard::qwerty();
        let err = synth_session("a1", &kb, &quiet_typist(), &NoiseParams::zero(1)).unwrap_err();
        assert!(matches!(err, Error::UnmappedKey('1')));
    }

    #[test]
    fn zero_noise_pressing_tip_is_unique_minimum() {
        let kb = keyboard::qwerty();
        let tp = quiet_typist();
        let (s, gt) = synth_session("the quick brown fox, jumps.", &kb, &tp, &NoiseParams::zero(2)).unwrap();
        let tips = tp.layout.fingertips();
        for e in &gt.events {
            let i = (e.t * s.nominal_fps).round() as usize;
            let y = s.joint(i, e.finger)[1];
            for &f in &tips {
                if f != e.finger {
                    assert!(s.joint(i, f)[1] > y);
                }
            }
        }
        let report = noise_stats(&s, &gt, &kb).unwrap();
        assert!(report.measured_depth_std.abs() < 1e-9);
        assert_eq!(report.inversion_rate, 0.0);
        assert!(report.xz_scatter.values().all(|v| *v < 1e-12));
    }

    #[test]
    fn typos_are_corrected_with_backspace() {
        let kb = keyboard::qwerty();
        let tp = TypistParams {
            error_rate: 0.3,
            ..Default::default()
        };
        let text = "we are typing some text with errors, and fixing them.";
        let (_, gt) = synth_session(text, &kb, &tp, &NoiseParams::zero(5)).unwrap();
        assert!(gt.events.iter().any(|e| e.key.is_backspace()));
        assert_eq!(gt.replay(), text);
    }

    #[test]
    fn sessions_are_deterministic() {
        let kb = keyboard::qwerty();
        let tp = TypistParams::default();
        let np = NoiseParams::default();
        let a = synth_session("some text to type.", &kb, &tp, &np).unwrap();
        let b = synth_session("some text to type.", &kb, &tp, &np).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn touch_point_noise_only_on_selected_finger() {
        let kb = keyboard::qwerty();
        let tp = quiet_typist();
        let pinky = tp.layout.fingertip(Hand::Left, Finger::Pinky);
        let np = NoiseParams {
            xz_std: 0.004,
            only_fingertips: Some(vec![pinky]),
            ..NoiseParams::zero(4)
        };
        let (s, gt) = synth_session("a quiet zebra sat at a desk", &kb, &tp, &np).unwrap();
        let report = noise_stats(&s, &gt, &kb).unwrap();
        for (key, scatter) in &report.xz_scatter {
            if tp.finger_map[key] == pinky {
                assert!(*scatter > 1e-4, "{key}");
            } else {
                assert!(*scatter < 1e-12, "{key}");
            }
        }
    }

    #[test]
    fn smooth_process_has_unit_variance() {
        let mut r = rng::stream(9, "test");
        let v = smooth_process(20_000, 10.0, &mut r);
        let (m, s) = mean_std(&v);
        assert!(m.abs() < 0.15, "{m}");
        assert!((s - 1.0).abs() < 0.1, "{s}");
    }

    #[test]
    fn calibration_rejects_impossible_rates() {
        let setup = CalibrationSetup {
            text: "abc".into(),
            keyboard: keyboard::qwerty(),
            typist: quiet_typist(),
        };
        let targets = NoiseReport {
            inversion_rate: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            calibrate(&NoiseParams::default(), &targets, &setup),
            Err(Error::Unreachable(_))
        ));
    }

    #[test]
    fn calibration_to_zero_noise_is_a_fixed_point() {
        let setup = CalibrationSetup {
            text: "abc".into(),
            keyboard: keyboard::qwerty(),
            typist: quiet_typist(),
        };
        let p = calibrate(&NoiseParams::default(), &NoiseReport::default(), &setup).unwrap();
        assert_eq!(p.depth_std, 0.0);
        assert_eq!(p.jitter_std, 0.0);
    }
}
