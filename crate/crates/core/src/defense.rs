//! Server-side defenses applied to telemetry before it leaves the platform.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{KeyboardModel, Session};
use crate::rng;

/// Adds i.i.d. Gaussian noise of std `std_keywidths * key_width` to the y
/// coordinate of every joint in every frame. x and z are untouched.
pub fn perturb_depth(s: &Session, std_keywidths: f64, kb: &KeyboardModel, seed: u64) -> Result<Session> {
    if !(std_keywidths >= 0.0 && std_keywidths.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise std must be finite and non-negative, got {std_keywidths}"
        )));
    }
    let mut out = s.clone();
    if std_keywidths == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, std_keywidths * kb.key_width).expect("positive finite std");
    let mut r = rng::stream(seed, "defense/depth");
    for frame in &mut out.frames {
        for c in &mut frame.coords {
            c[1] += normal.sample(&mut r);
        }
    }
    Ok(out)
}

/// Keeps every `round(nominal / target)`-th frame starting with the first.
pub fn downsample(s: &Session, target_fps: f64) -> Result<Session> {
    if !(target_fps > 0.0 && target_fps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target fps must be positive, got {target_fps}"
        )));
    }
    if target_fps > s.nominal_fps {
        return Err(Error::UpsampleRequested {
            target: target_fps,
            nominal: s.nominal_fps,
        });
    }
    let step = (s.nominal_fps / target_fps).round().max(1.0) as usize;
    let mut out = s.clone_header();
    out.nominal_fps = s.nominal_fps / step as f64;
    out.frames = s.frames.iter().step_by(step).cloned().collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyboard::qwerty;
    use crate::model::{HandLayout, Space, TelemetryFrame};

    fn session(n: usize) -> Session {
        let layout = HandLayout::STANDARD;
        let mut s = Session::new(Space::Original, 60.0, layout);
        for i in 0..n {
            s.frames.push(TelemetryFrame {
                t: i as f64 / 60.0,
                coords: (0..layout.joint_count())
                    .map(|j| [j as f64, 0.5, -(i as f64)])
                    .collect(),
            });
        }
        s
    }

    #[test]
    fn zero_noise_is_identity() {
        let s = session(10);
        assert_eq!(perturb_depth(&s, 0.0, &qwerty(), 1).unwrap(), s);
    }

    #[test]
    fn noise_touches_y_only() {
        let s = session(20);
        let p = perturb_depth(&s, 0.3, &qwerty(), 1).unwrap();
        let mut changed = false;
        for (a, b) in s.frames.iter().zip(&p.frames) {
            for (ca, cb) in a.coords.iter().zip(&b.coords) {
                assert_eq!(ca[0].to_bits(), cb[0].to_bits());
                assert_eq!(ca[2].to_bits(), cb[2].to_bits());
                changed |= ca[1] != cb[1];
            }
        }
        assert!(changed);
    }

    #[test]
    fn decimation_by_four() {
        let s = session(240);
        let d = downsample(&s, 15.0).unwrap();
        assert_eq!(d.len(), 60);
        assert_eq!(d.nominal_fps, 15.0);
        assert_eq!(d.frames[1], s.frames[4]);
        assert_eq!(downsample(&s, 60.0).unwrap(), s);
    }

    #[test]
    fn upsampling_is_rejected() {
        let d = downsample(&session(10), 15.0).unwrap();
        assert!(matches!(downsample(&d, 60.0), Err(Error::UpsampleRequested { .. })));
    }
}
