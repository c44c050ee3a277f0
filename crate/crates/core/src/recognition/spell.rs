//! Dictionary spell correction with a word bigram model.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::metrics::levenshtein;
use crate::model::normalize_text;

const MAX_EDITS: usize = 2;
/// Weight of the bigram estimate against the unigram estimate.
const BIGRAM_WEIGHT: f64 = 0.7;

fn words(text: &str) -> Vec<String> {
    normalize_text(text)
        .split(' ')
        .map(|w| w.trim_matches(|c| c == '.' || c == ',').to_string())
        .filter(|w| !w.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Lexicon {
    pub words: BTreeSet<String>,
}

impl Lexicon {
    pub fn from_text(text: &str) -> Lexicon {
        Lexicon {
            words: words(text).into_iter().collect(),
        }
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Interpolated word bigram model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WordBigram {
    unigrams: BTreeMap<String, usize>,
    bigrams: BTreeMap<(String, String), usize>,
    total: usize,
}

impl WordBigram {
    pub fn from_text(text: &str) -> WordBigram {
        let ws = words(text);
        let mut m = WordBigram {
            total: ws.len(),
            ..Default::default()
        };
        for w in &ws {
            *m.unigrams.entry(w.clone()).or_default() += 1;
        }
        for pair in ws.windows(2) {
            *m.bigrams.entry((pair[0].clone(), pair[1].clone())).or_default() += 1;
        }
        m
    }

    fn unigram(&self, w: &str) -> f64 {
        let v = self.unigrams.len() as f64 + 1.0;
        (self.unigrams.get(w).copied().unwrap_or(0) as f64 + 1.0) / (self.total as f64 + v)
    }

    /// `log P(next | prev)`.
    pub fn log_prob(&self, prev: Option<&str>, next: &str) -> f64 {
        let uni = self.unigram(next);
        let Some(prev) = prev else {
            return uni.ln();
        };
        let c_prev = self.unigrams.get(prev).copied().unwrap_or(0);
        if c_prev == 0 {
            return uni.ln();
        }
        let c = self
            .bigrams
            .get(&(prev.to_string(), next.to_string()))
            .copied()
            .unwrap_or(0);
        (BIGRAM_WEIGHT * c as f64 / c_prev as f64 + (1.0 - BIGRAM_WEIGHT) * uni).ln()
    }
}

/// Splits a token into its word and trailing punctuation.
fn split_token(t: &str) -> (&str, &str) {
    let end = t.trim_end_matches(['.', ',']).len();
    t.split_at(end)
}

/// Replaces every word missing from `lexicon` by the lexicon word within two
/// edits that best fits its neighbors under `lm`. Words already in the
/// lexicon, and words without a candidate, are left alone.
pub fn spell_correct(text: &str, lexicon: &Lexicon, lm: &WordBigram) -> String {
    if lexicon.is_empty() {
        return text.to_string();
    }
    let tokens: Vec<&str> = text.split(' ').collect();
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    let mut prev: Option<String> = None;
    for (i, tok) in tokens.iter().enumerate() {
        let (word, punct) = split_token(tok);
        if word.is_empty() || lexicon.contains(word) {
            out.push(tok.to_string());
            prev = (!word.is_empty()).then(|| word.to_string());
            continue;
        }
        let next = tokens[i + 1..].iter().map(|t| split_token(t).0).find(|w| !w.is_empty());
        let chars: Vec<char> = word.chars().collect();
        let mut best: Option<(f64, usize, &str)> = None;
        for cand in &lexicon.words {
            if cand.len().abs_diff(word.len()) > MAX_EDITS {
                continue;
            }
            let cc: Vec<char> = cand.chars().collect();
            let d = levenshtein(&chars, &cc);
            if d > MAX_EDITS {
                continue;
            }
            let mut score = lm.log_prob(prev.as_deref(), cand);
            if let Some(n) = next {
                score += lm.log_prob(Some(cand), n);
            }
            let better = match best {
                None => true,
                Some((bs, bd, _)) => score > bs || (score == bs && d < bd),
            };
            if better {
                best = Some((score, d, cand));
            }
        }
        match best {
            Some((_, _, cand)) => {
                out.push(format!("{cand}{punct}"));
                prev = Some(cand.to_string());
            }
            None => {
                out.push(tok.to_string());
                prev = Some(word.to_string());
            }
        }
    }
    out.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> (Lexicon, WordBigram) {
        let text = "the cat sat on the mat. the dog ate the bone, then the cat slept.";
        (Lexicon::from_text(text), WordBigram::from_text(text))
    }

    #[test]
    fn transposed_word_is_fixed() {
        let (lex, lm) = model();
        assert_eq!(spell_correct("hte cat", &lex, &lm), "the cat");
    }

    #[test]
    fn valid_text_is_unchanged() {
        let (lex, lm) = model();
        let s = "the dog sat on the cat.";
        assert_eq!(spell_correct(s, &lex, &lm), s);
    }

    #[test]
    fn far_words_are_unchanged() {
        let (lex, lm) = model();
        assert_eq!(spell_correct("the xyzzyq", &lex, &lm), "the xyzzyq");
    }

    #[test]
    fn punctuation_is_kept() {
        let (lex, lm) = model();
        assert_eq!(spell_correct("the dgo, sat", &lex, &lm), "the dog, sat");
    }
}
