//! Which fingertip pressed each detected key, and whether it was a thumb press.

use std::collections::BTreeMap;

use crate::detection::fit_two_gaussians;
use crate::error::{Error, Result};
use crate::model::{Finger, Hand, JointId, KeystrokeEvent, Session, SpaceKind, WINDOW_LEN};

/// Tandem scores above this are never thumb presses, whatever the fitted threshold.
const TANDEM_CAP: f64 = 1.5;
/// Threshold used when there are too few events to fit a mixture.
const TANDEM_FALLBACK: f64 = 1.0;

pub fn mean_fingertip_positions(s: &Session) -> Result<BTreeMap<JointId, [f64; 3]>> {
    if s.is_empty() {
        return Err(Error::EmptySession);
    }
    let n = s.len() as f64;
    Ok(s.layout
        .fingertips()
        .into_iter()
        .map(|tip| {
            let mut sum = [0.0; 3];
            for i in 0..s.len() {
                let p = s.joint(i, tip);
                for k in 0..3 {
                    sum[k] += p[k];
                }
            }
            (tip, sum.map(|v| v / n))
        })
        .collect())
}

/// Non-thumb fingertip farthest from its session mean at the press frame;
/// ties go to the fingertip closer to the keyboard.
pub fn identify_finger(e: &KeystrokeEvent, s: &Session, means: &BTreeMap<JointId, [f64; 3]>) -> JointId {
    let mut best: Option<(JointId, f64, f64)> = None;
    for tip in s.layout.non_thumb_fingertips() {
        let p = s.joint(e.frame_idx, tip);
        let m = means[&tip];
        let d = ((p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2) + (p[2] - m[2]).powi(2)).sqrt();
        let better = match best {
            None => true,
            Some((_, bd, by)) => d > bd || (d == bd && p[1] < by),
        };
        if better {
            best = Some((tip, d, p[1]));
        }
    }
    best.expect("layout has non-thumb fingertips").0
}

/// Descent of each non-thumb fingertip of `hand` at the press frame,
/// relative to the ends of the event window.
fn descents(e: &KeystrokeEvent, s: &Session, hand: Hand) -> [f64; 4] {
    let first = e.window[0];
    let last = e.window[WINDOW_LEN - 1];
    Finger::NON_THUMB.map(|f| {
        let tip = s.layout.fingertip(hand, f);
        0.5 * (s.joint(first, tip)[1] + s.joint(last, tip)[1]) - s.joint(e.frame_idx, tip)[1]
    })
}

/// How much the four non-thumb fingertips of `hand` descend together around
/// the press: `var(d) / mean(d)^2` over their descents `d`. Near zero when
/// they move as one, up to 3 when a single finger moves.
pub fn tandem_score(e: &KeystrokeEvent, s: &Session, hand: Hand) -> f64 {
    let d = descents(e, s, hand);
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if mean <= 0.0 {
        return 3.0;
    }
    (var / (mean * mean)).min(3.0)
}

/// Hand whose non-thumb fingertips descend most on average around the press.
pub fn pressing_hand(e: &KeystrokeEvent, s: &Session) -> Hand {
    let descent = |h: Hand| descents(e, s, h).iter().sum::<f64>();
    if descent(Hand::Right) > descent(Hand::Left) {
        Hand::Right
    } else {
        Hand::Left
    }
}

/// Indices of events where the fingers of the pressing hand descend together,
/// which happens when the thumb presses.
pub fn detect_thumb_events(events: &[KeystrokeEvent], s: &Session) -> Vec<usize> {
    if events.is_empty() {
        return Vec::new();
    }
    let scores: Vec<f64> = events.iter().map(|e| tandem_score(e, s, pressing_hand(e, s))).collect();
    let threshold = match fit_two_gaussians(&scores) {
        Ok(fit) if fit.weights[0] > 0.0 && fit.weights[1] > 0.0 => fit.threshold.min(TANDEM_CAP),
        Ok(_) => 0.0,
        Err(_) => TANDEM_FALLBACK,
    };
    scores
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Fills in finger, touch point and thumb flag of every event.
pub fn assign_fingers(events: &mut [KeystrokeEvent], s: &Session) -> Result<()> {
    s.require_space(SpaceKind::Original)?;
    let means = mean_fingertip_positions(s)?;
    for e in events.iter_mut() {
        if e.frame_idx >= s.len() {
            return Err(Error::InvalidArgument(format!(
                "event frame {} outside session of {} frames",
                e.frame_idx,
                s.len()
            )));
        }
        let tip = identify_finger(e, s, &means);
        let p = s.joint(e.frame_idx, tip);
        e.finger = Some(tip);
        e.touchpoint = Some([p[0], p[2]]);
        e.thumb = false;
    }
    for i in detect_thumb_events(events, s) {
        events[i].thumb = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HandLayout, Space, TelemetryFrame};

    fn constant_session(n: usize) -> Session {
        let layout = HandLayout::STANDARD;
        let mut s = Session::new(Space::Original, 60.0, layout);
        for i in 0..n {
            let coords = (0..layout.joint_count())
                .map(|j| [j as f64 * 0.01, 0.1, -(j as f64) * 0.02])
                .collect();
            s.frames.push(TelemetryFrame {
                t: i as f64 / 60.0,
                coords,
            });
        }
        s
    }

    #[test]
    fn means_of_constant_session_are_the_constants() {
        let s = constant_session(5);
        let m = mean_fingertip_positions(&s).unwrap();
        for (tip, mean) in m {
            let c = s.joint(0, tip);
            assert!((0..3).all(|k| (mean[k] - c[k]).abs() < 1e-12));
        }
    }

    #[test]
    fn means_average_frames() {
        let mut s = constant_session(2);
        let tip = s.layout.fingertip(Hand::Left, Finger::Ring);
        let k = s.layout.flat_index(tip);
        s.frames[0].coords[k][0] = 0.0;
        s.frames[1].coords[k][0] = 2.0;
        assert_eq!(mean_fingertip_positions(&s).unwrap()[&tip][0], 1.0);
    }

    #[test]
    fn empty_session_has_no_means() {
        let mut s = constant_session(1);
        s.frames.clear();
        assert!(matches!(mean_fingertip_positions(&s), Err(Error::EmptySession)));
    }

    #[test]
    fn displaced_fingertip_is_identified() {
        let mut s = constant_session(20);
        let means = mean_fingertip_positions(&s).unwrap();
        let tip = s.layout.fingertip(Hand::Right, Finger::Index);
        let k = s.layout.flat_index(tip);
        s.frames[10].coords[k][2] += 0.02;
        let e = KeystrokeEvent::new(&s, 10, 1.0);
        assert_eq!(identify_finger(&e, &s, &means), tip);
    }

    #[test]
    fn ties_go_to_the_lower_fingertip() {
        let mut s = constant_session(20);
        let means = mean_fingertip_positions(&s).unwrap();
        let a = s.layout.fingertip(Hand::Left, Finger::Index);
        let b = s.layout.fingertip(Hand::Right, Finger::Pinky);
        let (ka, kb) = (s.layout.flat_index(a), s.layout.flat_index(b));
        s.frames[10].coords[ka][1] += 0.01;
        s.frames[10].coords[kb][1] -= 0.01;
        let e = KeystrokeEvent::new(&s, 10, 1.0);
        assert_eq!(identify_finger(&e, &s, &means), b);
    }

    #[test]
    fn no_events_no_thumbs() {
        assert!(detect_thumb_events(&[], &constant_session(3)).is_empty());
    }
}
