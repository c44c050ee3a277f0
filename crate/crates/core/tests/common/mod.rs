//! Oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use keytrace::pipeline::RunConfig;
use keytrace::{HandLayout, Session, Space, TelemetryFrame};
use rand::Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// 500-word session drawn from a seed-dependent window of the typing text.
pub fn seeded_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        seed,
        ..Default::default()
    };
    cfg.input.text = Some(data_path("typing.txt"));
    cfg.input.corpus = Some(data_path("corpus.txt"));
    cfg.input.words = Some(500);
    cfg.input.offset = (seed as usize - 1) * 350;
    cfg
}

/// Edit distance straight from its recursive definition, memoised on suffix
/// positions.
pub fn edit_distance_recursive<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

pub fn random_stochastic(r: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let row: Vec<f64> = (0..cols).map(|_| r.random::<f64>() + 1e-3).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|v| v / total).collect()
        })
        .collect()
}

/// Highest-scoring state path by enumerating every path.
pub fn exhaustive_path(pi: &[f64], a: &[Vec<f64>], b: &[Vec<f64>], seq: &[usize]) -> (Vec<usize>, f64) {
    let n = pi.len();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut path = Vec::with_capacity(seq.len());
    fn walk(
        t: usize,
        score: f64,
        path: &mut Vec<usize>,
        best: &mut (Vec<usize>, f64),
        ctx: (&[f64], &[Vec<f64>], &[Vec<f64>], &[usize], usize),
    ) {
        let (pi, a, b, seq, n) = ctx;
        if t == seq.len() {
            if score > best.1 {
                *best = (path.clone(), score);
            }
            return;
        }
        for s in 0..n {
            let step = if t == 0 { pi[s].ln() } else { a[path[t - 1]][s].ln() };
            path.push(s);
            walk(t + 1, score + step + b[s][seq[t]].ln(), path, best, ctx);
            path.pop();
        }
    }
    walk(0, 0.0, &mut path, &mut best, (pi, a, b, seq, n));
    best
}

/// Log probability of a state path.
pub fn path_score(pi: &[f64], a: &[Vec<f64>], b: &[Vec<f64>], seq: &[usize], path: &[usize]) -> f64 {
    path.iter()
        .enumerate()
        .map(|(t, &s)| {
            let step = if t == 0 { pi[s] } else { a[path[t - 1]][s] };
            step.ln() + b[s][seq[t]].ln()
        })
        .sum()
}

/// Random original-space session with joints scattered around the keyboard.
pub fn random_session(r: &mut impl Rng, frames: usize) -> Session {
    let layout = HandLayout::STANDARD;
    let mut s = Session::new(Space::Original, 60.0, layout);
    for i in 0..frames {
        s.frames.push(TelemetryFrame {
            t: i as f64 / 60.0,
            coords: (0..layout.joint_count())
                .map(|_| {
                    [
                        r.random_range(-0.25..0.25),
                        r.random_range(-0.42..-0.30),
                        r.random_range(-0.35..0.10),
                    ]
                })
                .collect(),
        });
    }
    s
}

pub fn max_abs_diff(a: &Session, b: &Session) -> f64 {
    a.frames
        .iter()
        .zip(&b.frames)
        .flat_map(|(fa, fb)| fa.coords.iter().zip(&fb.coords))
        .flat_map(|(p, q)| (0..3).map(move |k| (p[k] - q[k]).abs()))
        .fold(0.0, f64::max)
}

/// The first `words` words of the bundled typing text starting at `offset`.
pub fn typing_text(offset: usize, words: usize) -> String {
    let raw = std::fs::read_to_string(data_path("typing.txt")).expect("typing text");
    keytrace::pipeline::select_words(&raw, offset, Some(words)).expect("enough words")
}

/// Ground-truth key of each detected event: the nearest press within `tol` seconds.
pub fn match_events(
    s: &Session,
    events: &[keytrace::KeystrokeEvent],
    gt: &keytrace::GroundTruth,
    tol: f64,
) -> Vec<Option<keytrace::KeyId>> {
    events
        .iter()
        .map(|e| {
            let t = s.frames[e.frame_idx].t;
            gt.events
                .iter()
                .map(|g| ((g.t - t).abs(), g.key))
                .filter(|(d, _)| *d <= tol)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, k)| k)
        })
        .collect()
}
