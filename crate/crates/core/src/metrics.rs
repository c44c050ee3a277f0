//! Character and word error rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-cost edit distance between two sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn cer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<char> = reference.chars().collect();
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    let h: Vec<char> = hypothesis.chars().collect();
    Ok(levenshtein(&r, &h) as f64 / r.len() as f64)
}

pub fn wer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    Ok(levenshtein(&r, &h) as f64 / r.len() as f64)
}

/// F1 of the word multisets of reference and hypothesis. Not an edit distance:
/// word order is ignored.
pub fn token_f1(reference: &str, hypothesis: &str) -> f64 {
    let count = |s: &str| {
        let mut m: BTreeMap<String, usize> = BTreeMap::new();
        for w in s.split_whitespace() {
            *m.entry(w.to_string()).or_default() += 1;
        }
        m
    };
    let r = count(reference);
    let h = count(hypothesis);
    let overlap: usize = r.iter().map(|(w, c)| (*c).min(h.get(w).copied().unwrap_or(0))).sum();
    let nr: usize = r.values().sum();
    let nh: usize = h.values().sum();
    if overlap == 0 || nr == 0 || nh == 0 {
        return 0.0;
    }
    let p = overlap as f64 / nh as f64;
    let rc = overlap as f64 / nr as f64;
    2.0 * p * rc / (p + rc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextScores {
    pub cer: f64,
    pub wer: f64,
    pub token_f1: f64,
}

pub fn score(reference: &str, hypothesis: &str) -> Result<TextScores> {
    Ok(TextScores {
        cer: cer(reference, hypothesis)?,
        wer: wer(reference, hypothesis)?,
        token_f1: token_f1(reference, hypothesis),
    })
}
