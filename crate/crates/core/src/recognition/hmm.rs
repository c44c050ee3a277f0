//! Hidden Markov model over the 29 keys with cluster ids as observations.
//!
//! The transition matrix comes from a text corpus and stays fixed; only the
//! emission matrix and the initial distribution are learned.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalize_text, KeyId};
use crate::rng;

pub type Matrix = Vec<Vec<f64>>;

const N: usize = KeyId::ALPHABET;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    /// Transition probabilities, `a[from][to]`.
    pub a: Matrix,
    /// Emission probabilities, `b[key][cluster]`.
    pub b: Matrix,
    pub pi: Vec<f64>,
}

impl HmmParams {
    pub fn clusters(&self) -> usize {
        self.b.first().map_or(0, |r| r.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaumWelchParams {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the log-likelihood improves by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for BaumWelchParams {
    fn default() -> Self {
        BaumWelchParams {
            restarts: 10,
            max_iter: 200,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Outcome of one Baum-Welch restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub score: usize,
}

fn symbols(corpus: &str) -> Vec<usize> {
    normalize_text(corpus)
        .chars()
        .filter_map(KeyId::from_char)
        .map(KeyId::index)
        .collect()
}

/// Bigram transition probabilities with add-one smoothing.
pub fn build_transition_matrix(corpus: &str) -> Result<Matrix> {
    let s = symbols(corpus);
    if s.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts = vec![vec![1.0; N]; N];
    for w in s.windows(2) {
        counts[w[0]][w[1]] += 1.0;
    }
    for row in &mut counts {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(counts)
}

/// Symbol frequencies with add-one smoothing.
pub fn unigram_distribution(corpus: &str) -> Result<Vec<f64>> {
    let s = symbols(corpus);
    if s.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts = vec![1.0; N];
    for &k in &s {
        counts[k] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    Ok(counts.into_iter().map(|c| c / total).collect())
}

/// Scaled forward-backward. Returns state posteriors and the log-likelihood.
fn posteriors(pi: &[f64], a: &Matrix, b: &Matrix, seq: &[usize]) -> (Vec<Vec<f64>>, f64) {
    let n = pi.len();
    let t_len = seq.len();
    let mut alpha = vec![vec![0.0; n]; t_len];
    let mut scale = vec![0.0; t_len];
    for i in 0..n {
        alpha[0][i] = pi[i] * b[i][seq[0]];
    }
    for t in 0..t_len {
        if t > 0 {
            let (prev, cur) = alpha.split_at_mut(t);
            let prev = &prev[t - 1];
            let cur = &mut cur[0];
            for (i, p) in prev.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                for (c, aij) in cur.iter_mut().zip(&a[i]) {
                    *c += p * aij;
                }
            }
            for (j, c) in cur.iter_mut().enumerate() {
                *c *= b[j][seq[t]];
            }
        }
        let s: f64 = alpha[t].iter().sum();
        let s = if s > 0.0 { s } else { f64::MIN_POSITIVE };
        scale[t] = s;
        alpha[t].iter_mut().for_each(|v| *v /= s);
    }
    let mut beta = vec![1.0; n];
    let mut gamma = vec![vec![0.0; n]; t_len];
    for t in (0..t_len).rev() {
        let g = &mut gamma[t];
        let mut norm = 0.0;
        for i in 0..n {
            g[i] = alpha[t][i] * beta[i];
            norm += g[i];
        }
        if norm > 0.0 {
            g.iter_mut().for_each(|v| *v /= norm);
        }
        if t > 0 {
            let obs = seq[t];
            let weighted: Vec<f64> = (0..n).map(|j| b[j][obs] * beta[j]).collect();
            let next: Vec<f64> = (0..n)
                .map(|i| a[i].iter().zip(&weighted).map(|(x, y)| x * y).sum::<f64>() / scale[t])
                .collect();
            beta = next;
        }
    }
    let ll = scale.iter().map(|s| s.ln()).sum();
    (gamma, ll)
}

/// Baum-Welch with `a` frozen. Returns the fitted `(b, pi)`, the
/// log-likelihood of the returned parameters and the number of iterations.
pub fn baum_welch(
    a: &Matrix,
    pi: Vec<f64>,
    b: Matrix,
    seq: &[usize],
    max_iter: usize,
    tol: f64,
) -> (Matrix, Vec<f64>, f64, usize, Vec<f64>) {
    let m = b.first().map_or(0, |r| r.len());
    let mut b = b;
    let mut pi = pi;
    let mut trace = Vec::new();
    let (mut gamma, mut ll) = posteriors(&pi, a, &b, seq);
    trace.push(ll);
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let n = pi.len();
        let mut num = vec![vec![0.0; m]; n];
        let mut den = vec![0.0; n];
        for (g, &o) in gamma.iter().zip(seq) {
            for i in 0..n {
                num[i][o] += g[i];
                den[i] += g[i];
            }
        }
        for i in 0..n {
            if den[i] > 0.0 {
                for o in 0..m {
                    b[i][o] = num[i][o] / den[i];
                }
            }
        }
        pi = gamma[0].clone();
        let (g2, ll2) = posteriors(&pi, a, &b, seq);
        gamma = g2;
        let gain = ll2 - ll;
        ll = ll2;
        trace.push(ll);
        if gain.abs() < tol {
            break;
        }
    }
    (b, pi, ll, iterations, trace)
}

fn random_emissions(n: usize, m: usize, r: &mut impl Rng) -> Matrix {
    (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..m).map(|_| r.random::<f64>() + 0.1).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|v| v / total).collect()
        })
        .collect()
}

/// Learns emissions with `a` frozen over several random restarts and keeps the
/// restart with the highest `score`, breaking ties by log-likelihood.
pub fn learn_emissions<F>(
    a: &Matrix,
    pi: &[f64],
    seq: &[usize],
    m: usize,
    params: &BaumWelchParams,
    score: F,
) -> Result<(HmmParams, Vec<RestartSummary>)>
where
    F: Fn(&HmmParams) -> usize + Sync,
{
    if seq.is_empty() {
        return Err(Error::InvalidArgument("empty observation sequence".into()));
    }
    if params.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    if let Some(&bad) = seq.iter().find(|&&o| o >= m) {
        return Err(Error::UnknownCluster { id: bad, width: m });
    }
    let n = a.len();
    let run = |restart: usize| {
        let mut r = rng::stream(params.seed, &format!("hmm/restart-{restart}"));
        let b0 = random_emissions(n, m, &mut r);
        let (b, pi_fit, ll, iterations, _) = baum_welch(a, pi.to_vec(), b0, seq, params.max_iter, params.tol);
        let hmm = HmmParams {
            a: a.clone(),
            b,
            pi: pi_fit,
        };
        let s = score(&hmm);
        (
            hmm,
            RestartSummary {
                restart,
                log_likelihood: ll,
                iterations,
                score: s,
            },
        )
    };
    let workers = std::thread::available_parallelism()
        .map_or(1, |p| p.get())
        .min(params.restarts);
    let mut results: Vec<Option<(HmmParams, RestartSummary)>> = (0..params.restarts).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<Vec<usize>> = (0..workers)
            .map(|w| (w..params.restarts).step_by(workers).collect())
            .collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|ids| {
                let run = &run;
                scope.spawn(move || ids.into_iter().map(|i| (i, run(i))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, res) in h.join().expect("restart worker panicked") {
                results[i] = Some(res);
            }
        }
    });
    let results: Vec<(HmmParams, RestartSummary)> = results.into_iter().map(|r| r.expect("all restarts ran")).collect();
    let best = results
        .iter()
        .enumerate()
        .max_by(|(i, x), (j, y)| {
            x.1.score
                .cmp(&y.1.score)
                .then(x.1.log_likelihood.total_cmp(&y.1.log_likelihood))
                .then(j.cmp(i))
        })
        .map(|(i, _)| i)
        .expect("at least one restart");
    let summaries = results.iter().map(|r| r.1.clone()).collect();
    Ok((results[best].0.clone(), summaries))
}

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Most probable state path; ties go to the lower state index.
pub fn viterbi_path(pi: &[f64], a: &Matrix, b: &Matrix, seq: &[usize]) -> Vec<usize> {
    if seq.is_empty() {
        return Vec::new();
    }
    let n = pi.len();
    let la: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|&v| ln(v)).collect()).collect();
    let mut delta: Vec<f64> = (0..n).map(|i| ln(pi[i]) + ln(b[i][seq[0]])).collect();
    let mut back = vec![vec![0usize; n]; seq.len()];
    for t in 1..seq.len() {
        let mut next = vec![f64::NEG_INFINITY; n];
        for j in 0..n {
            let mut best = (0, f64::NEG_INFINITY);
            for i in 0..n {
                let v = delta[i] + la[i][j];
                if v > best.1 {
                    best = (i, v);
                }
            }
            back[t][j] = best.0;
            next[j] = best.1 + ln(b[j][seq[t]]);
        }
        delta = next;
    }
    let mut last = 0;
    for i in 1..n {
        if delta[i] > delta[last] {
            last = i;
        }
    }
    let mut path = vec![last; seq.len()];
    for t in (1..seq.len()).rev() {
        path[t - 1] = back[t][path[t]];
    }
    path
}

pub fn viterbi_decode(params: &HmmParams, seq: &[usize]) -> Result<Vec<KeyId>> {
    let m = params.clusters();
    if let Some(&bad) = seq.iter().find(|&&o| o >= m) {
        return Err(Error::UnknownCluster { id: bad, width: m });
    }
    Ok(viterbi_path(&params.pi, &params.a, &params.b, seq)
        .into_iter()
        .map(|i| KeyId::from_index(i).expect("state index within alphabet"))
        .collect())
}
