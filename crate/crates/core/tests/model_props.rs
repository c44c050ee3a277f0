mod common;

use keytrace::keyboard::qwerty;
use keytrace::sim::{synth_session, NoiseParams, TypistParams};
use keytrace::{apply_backspaces, fingertip_series, resample_uniform, Hand, HandLayout, JointId, KeyId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z]{1,7}", 1..8).prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn replaying_typos_and_backspaces_gives_the_text(text in words(), seed in 0u64..1000) {
        let tp = TypistParams { error_rate: 0.3, ..Default::default() };
        let (_, gt) = synth_session(&text, &qwerty(), &tp, &NoiseParams::zero(seed)).unwrap();
        prop_assert_eq!(gt.replay(), gt.text.clone());
        prop_assert_eq!(gt.text, text);
    }

    #[test]
    fn backspace_removes_the_previous_key(text in "[a-z ]{0,20}", cut in 0usize..25) {
        let mut keys: Vec<KeyId> = text.chars().map(|c| KeyId::from_char(c).unwrap()).collect();
        let cut = cut.min(keys.len());
        keys.extend(std::iter::repeat_n(KeyId::BACKSPACE, cut));
        prop_assert_eq!(apply_backspaces(keys), text[..text.len() - cut].to_string());
    }

    #[test]
    fn resampling_twice_changes_nothing(seed in 0u64..1000, frames in 3usize..40, fps in 10.0f64..90.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut s = random_session(&mut r, frames);
        let mut t = 0.0;
        for f in &mut s.frames {
            f.t = t;
            t += r.random_range(0.005..0.05);
        }
        let once = resample_uniform(&s, fps).unwrap();
        prop_assume!(once.len() >= 2);
        let twice = resample_uniform(&once, fps).unwrap();
        prop_assert_eq!(once.len(), twice.len());
        prop_assert!(max_abs_diff(&once, &twice) <= 1e-12);
        for (a, b) in once.frames.iter().zip(&twice.frames) {
            prop_assert!((a.t - b.t).abs() <= 1e-12);
        }
    }

    #[test]
    fn fingertip_series_covers_every_frame(seed in 0u64..1000, frames in 1usize..30) {
        let s = random_session(&mut ChaCha8Rng::seed_from_u64(seed), frames);
        for tip in s.layout.fingertips() {
            let series = fingertip_series(&s, tip).unwrap();
            prop_assert_eq!(series.len(), s.len());
            for (i, p) in series.iter().enumerate() {
                prop_assert_eq!([p.x, p.y, p.z], s.joint(i, tip));
            }
        }
    }
}

#[test]
fn fingertip_series_rejects_inner_joints() {
    let s = random_session(&mut ChaCha8Rng::seed_from_u64(3), 5);
    let inner = JointId::new(Hand::Left, 1);
    assert!(!HandLayout::STANDARD.is_fingertip(inner));
    assert!(fingertip_series(&s, inner).is_err());
}

#[test]
fn resampling_needs_two_frames() {
    let s = random_session(&mut ChaCha8Rng::seed_from_u64(3), 1);
    assert!(resample_uniform(&s, 60.0).is_err());
}
