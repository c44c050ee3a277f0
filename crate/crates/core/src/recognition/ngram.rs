//! Character n-gram model and cluster-level label polishing.
//!
//! A bigram HMM cannot tell apart keys that occur in the same bigram contexts,
//! such as period and comma. Polishing revisits the decoded labels one cluster
//! at a time and keeps relabelings or swaps that make the decoded text more
//! likely under a longer-context character model.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::filter::consistency_filter;
use super::kmeans::TouchpointMap;
use crate::error::{Error, Result};
use crate::model::{normalize_text, KeyId};

const SYMBOLS: usize = KeyId::ALPHABET;
const DISCOUNT: f64 = 0.75;

/// Interpolated absolute-discounting character model over the 29 keys.
#[derive(Debug, Clone)]
pub struct CharNgram {
    order: usize,
    /// Count of each sequence (context followed by symbol).
    counts: HashMap<u64, u32>,
    /// Per context: total continuations and distinct continuations.
    contexts: HashMap<u64, (u32, u32)>,
    unigram: Vec<f64>,
}

fn code(seq: &[usize]) -> u64 {
    seq.iter()
        .fold(0u64, |acc, &s| acc * (SYMBOLS as u64 + 1) + s as u64 + 1)
}

impl CharNgram {
    pub fn new(corpus: &str, order: usize) -> Result<CharNgram> {
        let order = order.clamp(1, 8);
        let syms: Vec<usize> = normalize_text(corpus)
            .chars()
            .filter_map(KeyId::from_char)
            .map(KeyId::index)
            .collect();
        if syms.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut counts: HashMap<u64, u32> = HashMap::new();
        let mut contexts: HashMap<u64, (u32, u32)> = HashMap::new();
        let mut uni = vec![1.0; SYMBOLS];
        for (i, &s) in syms.iter().enumerate() {
            uni[s] += 1.0;
            for k in 1..order {
                if i < k {
                    break;
                }
                let ctx = &syms[i - k..i];
                let c = counts.entry(code(&syms[i - k..=i])).or_default();
                *c += 1;
                let entry = contexts.entry(code(ctx)).or_default();
                entry.0 += 1;
                if *c == 1 {
                    entry.1 += 1;
                }
            }
        }
        let total: f64 = uni.iter().sum();
        Ok(CharNgram {
            order,
            counts,
            contexts,
            unigram: uni.into_iter().map(|u| u / total).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `log P(sym | history)`, using at most `order - 1` trailing history symbols.
    pub fn log_prob(&self, history: &[usize], sym: usize) -> f64 {
        let mut p = self.unigram[sym];
        let max_k = history.len().min(self.order - 1);
        let mut seq = [0usize; 8];
        for k in 1..=max_k {
            let ctx = &history[history.len() - k..];
            let Some(&(total, distinct)) = self.contexts.get(&code(ctx)) else {
                break;
            };
            seq[..k].copy_from_slice(ctx);
            seq[k] = sym;
            let c = self.counts.get(&code(&seq[..=k])).copied().unwrap_or(0) as f64;
            let total = total as f64;
            p = (c - DISCOUNT).max(0.0) / total + DISCOUNT * distinct as f64 / total * p;
        }
        p.ln()
    }

    pub fn log_likelihood(&self, text: &[usize]) -> f64 {
        (0..text.len())
            .map(|i| self.log_prob(&text[i.saturating_sub(self.order - 1)..i], text[i]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolishParams {
    pub enabled: bool,
    pub max_sweeps: usize,
}

impl Default for PolishParams {
    fn default() -> Self {
        PolishParams {
            enabled: true,
            max_sweeps: 30,
        }
    }
}

/// Candidate moves checked against the consistency filter per cluster.
const MAX_CHECKS: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Move {
    Relabel { to: usize },
    Swap { other_cluster: usize, other: usize },
}

/// Hill-climbs over cluster relabelings and pairwise label swaps.
///
/// A move changes the label of every event in a cluster that currently carries
/// the cluster's majority label. Moves must raise the likelihood of the decoded
/// text under `lm` without lowering the consistency-filter pass count.
/// Backspace events are left alone and skipped when scoring.
pub fn polish_labels(
    map: &TouchpointMap,
    labels: &[KeyId],
    lm: &CharNgram,
    max_sweeps: usize,
    key_pitch: Option<f64>,
) -> Vec<KeyId> {
    let labels = labels.to_vec();
    let positions: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_backspace()).collect();
    if positions.is_empty() {
        return labels;
    }
    let mut text: Vec<usize> = positions.iter().map(|&i| labels[i].index()).collect();
    let k = map.k();
    // Text positions of each cluster's events.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (p, &i) in positions.iter().enumerate() {
        members[map.assignment[i]].push(p);
    }
    let span = lm.order();
    let len = text.len();
    let score_at = |text: &[usize], p: usize| lm.log_prob(&text[p.saturating_sub(span - 1)..p], text[p]);
    let affected = |clusters: &[usize]| {
        let mut ps: Vec<usize> = clusters
            .iter()
            .flat_map(|&c| members[c].iter().flat_map(|&p| p..(p + span).min(len)))
            .collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    };
    let majority = |text: &[usize], c: usize| -> Option<usize> {
        let mut votes = [0usize; SYMBOLS];
        for &p in &members[c] {
            votes[text[p]] += 1;
        }
        let best = (0..SYMBOLS).max_by(|&a, &b| votes[a].cmp(&votes[b]).then(b.cmp(&a)))?;
        (votes[best] > 0).then_some(best)
    };
    let apply = |text: &mut [usize], c: usize, from: usize, mv: Move| match mv {
        Move::Relabel { to } => {
            for &p in &members[c] {
                if text[p] == from {
                    text[p] = to;
                }
            }
        }
        Move::Swap { other_cluster, other } => {
            for &p in &members[c] {
                if text[p] == from {
                    text[p] = other;
                }
            }
            for &p in &members[other_cluster] {
                if text[p] == other {
                    text[p] = from;
                }
            }
        }
    };
    let full = |text: &[usize]| -> Vec<KeyId> {
        let mut out = labels.clone();
        for (p, &i) in positions.iter().enumerate() {
            out[i] = KeyId::from_index(text[p]).expect("symbol within alphabet");
        }
        out
    };
    let pass = |text: &[usize]| consistency_filter(map, &full(text), key_pitch).pass_count();

    let active: Vec<usize> = (0..k).filter(|&c| !members[c].is_empty()).collect();
    let mut current_pass = pass(&text);
    for _ in 0..max_sweeps {
        let mut improved = false;
        for &c in &active {
            let Some(from) = majority(&text, c) else { continue };
            let mut candidates: Vec<(f64, Move)> = Vec::new();
            let ps = affected(&[c]);
            let base: f64 = ps.iter().map(|&p| score_at(&text, p)).sum();
            for to in (0..SYMBOLS).filter(|&s| s != from) {
                let mut trial = text.clone();
                apply(&mut trial, c, from, Move::Relabel { to });
                let gain = ps.iter().map(|&p| score_at(&trial, p)).sum::<f64>() - base;
                if gain > 1e-9 {
                    candidates.push((gain, Move::Relabel { to }));
                }
            }
            for &d in active.iter().filter(|&&d| d != c) {
                let Some(other) = majority(&text, d) else { continue };
                if other == from {
                    continue;
                }
                let mv = Move::Swap {
                    other_cluster: d,
                    other,
                };
                let ps2 = affected(&[c, d]);
                let base2: f64 = ps2.iter().map(|&p| score_at(&text, p)).sum();
                let mut trial = text.clone();
                apply(&mut trial, c, from, mv);
                let gain = ps2.iter().map(|&p| score_at(&trial, p)).sum::<f64>() - base2;
                if gain > 1e-9 {
                    candidates.push((gain, mv));
                }
            }
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
            for &(_, mv) in candidates.iter().take(MAX_CHECKS) {
                let mut trial = text.clone();
                apply(&mut trial, c, from, mv);
                let p = pass(&trial);
                if p >= current_pass {
                    text = trial;
                    current_pass = p;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    full(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms(s: &str) -> Vec<usize> {
        s.chars().map(|c| KeyId::from_char(c).unwrap().index()).collect()
    }

    #[test]
    fn probabilities_normalize() {
        let lm = CharNgram::new("the cat sat on the mat, then the dog ran.", 4).unwrap();
        for hist in [syms(""), syms("th"), syms("the "), syms("zzz")] {
            let total: f64 = (0..SYMBOLS).map(|s| lm.log_prob(&hist, s).exp()).sum();
            assert!((total - 1.0).abs() < 1e-9, "{total}");
        }
    }

    #[test]
    fn seen_text_beats_scrambled_text() {
        let lm = CharNgram::new(&"the cat sat on the mat. ".repeat(20), 5).unwrap();
        assert!(lm.log_likelihood(&syms("the cat sat")) > lm.log_likelihood(&syms("tha cet sat")));
    }

    #[test]
    fn swapped_clusters_are_restored() {
        let corpus = "one, two. three, four. five, six. ".repeat(30);
        let lm = CharNgram::new(&corpus, 5).unwrap();
        let truth = "one, two. three, four. ";
        // One cluster per distinct symbol.
        let mut ids: Vec<char> = truth.chars().collect();
        ids.sort();
        ids.dedup();
        let assignment: Vec<usize> = truth
            .chars()
            .map(|c| ids.iter().position(|&x| x == c).unwrap())
            .collect();
        let map = TouchpointMap {
            points: vec![[0.0, 0.0]; assignment.len()],
            assignment,
            centroids: vec![[0.0, 0.0]; ids.len()],
            thumb: vec![false; ids.len()],
        };
        let scrambled: Vec<KeyId> = truth
            .chars()
            .map(|c| match c {
                ',' => '.',
                '.' => ',',
                c => c,
            })
            .map(|c| KeyId::from_char(c).unwrap())
            .collect();
        let fixed = polish_labels(&map, &scrambled, &lm, 10, None);
        let text: String = fixed.iter().map(|k| k.to_char()).collect();
        assert_eq!(text, truth);
    }
}
