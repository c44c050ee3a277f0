//! The full keystroke inference attack on an original-space session.

use serde::{Deserialize, Serialize};

use crate::detection::{detect_keystrokes, DetectionParams, GmmFit};
use crate::error::{Error, Result};
use crate::fingerid::assign_fingers;
use crate::model::{resample_uniform, KeyId, KeystrokeEvent, Session, SpaceKind};
use crate::recognition::hmm::RestartSummary;
use crate::recognition::{
    build_transition_matrix, cluster_touchpoints, consistency_filter, find_backspace_cluster, learn_emissions,
    polish_labels, refiner, resolve_backspaces, spell_correct, train_refiner, unigram_distribution, viterbi_decode,
    BackspaceParams, BaumWelchParams, CharNgram, ClusterParams, HmmParams, Lexicon, Matrix, PolishParams,
    RefinerDataset, RefinerOptions, TouchpointMap, WordBigram,
};

const CHAR_ORDER: usize = 5;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackParams {
    pub detection: DetectionParams,
    pub clustering: ClusterParams,
    pub backspace: BackspaceParams,
    pub hmm: BaumWelchParams,
    pub polish: PolishParams,
    pub refiner: RefinerParams,
    /// Key pitch used by the cross-cluster check; falls back to centroid spacing.
    pub key_pitch: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinerParams {
    pub enabled: bool,
    pub options: RefinerOptions,
}

impl Default for RefinerParams {
    fn default() -> Self {
        RefinerParams {
            enabled: true,
            options: RefinerOptions::default(),
        }
    }
}

/// Language data the attacker brings: a corpus for key transitions and a
/// word list plus text for spell correction.
#[derive(Debug, Clone)]
pub struct Language {
    pub transitions: Matrix,
    pub initial: Vec<f64>,
    pub chars: CharNgram,
    pub lexicon: Lexicon,
    pub bigram: WordBigram,
}

impl Language {
    pub fn new(corpus: &str, lexicon_text: &str) -> Result<Language> {
        Ok(Language {
            transitions: build_transition_matrix(corpus)?,
            initial: unigram_distribution(corpus)?,
            chars: CharNgram::new(corpus, CHAR_ORDER)?,
            lexicon: Lexicon::from_text(lexicon_text),
            bigram: WordBigram::from_text(&format!("{corpus} {lexicon_text}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub events: Vec<KeystrokeEvent>,
    pub threshold: f64,
    pub fit: GmmFit,
    pub map: TouchpointMap,
    pub backspace_cluster: Option<usize>,
    pub hmm: HmmParams,
    pub restarts: Vec<RestartSummary>,
    /// Labels from the HMM, backspace included.
    pub decoded: Vec<KeyId>,
    /// HMM labels after cluster-level polishing.
    pub polished: Vec<KeyId>,
    pub filter_pass: usize,
    /// Labels after the refiner gate.
    pub refined: Vec<KeyId>,
    pub refined_pass: usize,
    pub refiner_used: bool,
    pub text_stats: String,
    pub text_refined: String,
    pub text_spell: String,
}

/// Cluster ids with the backspace cluster removed, so ids stay contiguous.
fn observation(map: &TouchpointMap, backspace: Option<usize>) -> (Vec<Option<usize>>, usize) {
    let mut remap = vec![None; map.k()];
    let mut next = 0;
    for (c, slot) in remap.iter_mut().enumerate() {
        if Some(c) != backspace {
            *slot = Some(next);
            next += 1;
        }
    }
    (map.assignment.iter().map(|&c| remap[c]).collect(), next)
}

fn keys_to_text(keys: &[KeyId]) -> String {
    keys.iter().map(|k| k.to_char()).collect()
}

/// Runs detection, finger identification, clustering, HMM decoding, the
/// refiner and spell correction.
pub fn run_attack(s: &Session, lang: &Language, params: &AttackParams) -> Result<AttackOutcome> {
    s.require_space(SpaceKind::Original)?;
    let s = &resample_uniform(s, s.nominal_fps)?;
    let detection = stage("detect", detect_keystrokes(s, &params.detection))?;
    let mut events = detection.events;
    stage("fingerid", assign_fingers(&mut events, s))?;
    let map = stage("cluster", cluster_touchpoints(&events, &params.clustering))?;
    let backspace = find_backspace_cluster(&map, &params.backspace);

    let (obs, m) = observation(&map, backspace);
    let seq: Vec<usize> = obs.iter().filter_map(|o| *o).collect();
    let assemble = |labels: &[KeyId]| -> Vec<KeyId> {
        let mut it = labels.iter();
        obs.iter()
            .map(|o| match o {
                Some(_) => *it.next().expect("one label per observation"),
                None => KeyId::BACKSPACE,
            })
            .collect()
    };
    let pass_count = |full: &[KeyId]| consistency_filter(&map, full, params.key_pitch).pass_count();

    let (hmm, restarts) = stage(
        "hmm",
        learn_emissions(&lang.transitions, &lang.initial, &seq, m, &params.hmm, |h| {
            viterbi_decode(h, &seq).map_or(0, |d| pass_count(&assemble(&d)))
        }),
    )?;
    let decoded = assemble(&stage("decode", viterbi_decode(&hmm, &seq))?);
    let polished = if params.polish.enabled {
        polish_labels(&map, &decoded, &lang.chars, params.polish.max_sweeps, params.key_pitch)
    } else {
        decoded.clone()
    };
    let filter = consistency_filter(&map, &polished, params.key_pitch);
    let filter_pass = filter.pass_count();
    let text_stats = keys_to_text(&resolve_backspaces(&map, &polished, backspace));

    let (refined, refined_pass, refiner_used) = if params.refiner.enabled {
        let ds = RefinerDataset::from_labels(s, &events, &polished, &filter.keep);
        match train_refiner(&ds, &params.refiner.options) {
            Ok(r) => {
                let relabeled = refiner::refine(&r, &events, s);
                let candidate: Vec<KeyId> = relabeled
                    .into_iter()
                    .zip(&polished)
                    .map(|(new, old)| if old.is_backspace() { *old } else { new })
                    .collect();
                let pass = pass_count(&candidate);
                if pass >= filter_pass {
                    (candidate, pass, true)
                } else {
                    (polished.clone(), filter_pass, false)
                }
            }
            Err(Error::SingleClass) => (polished.clone(), filter_pass, false),
            Err(e) => return Err(e),
        }
    } else {
        (polished.clone(), filter_pass, false)
    };
    let text_refined = keys_to_text(&resolve_backspaces(&map, &refined, backspace));
    let text_spell = spell_correct(&text_refined, &lang.lexicon, &lang.bigram);
    Ok(AttackOutcome {
        events,
        threshold: detection.threshold,
        fit: detection.fit,
        map,
        backspace_cluster: backspace,
        hmm,
        restarts,
        decoded,
        polished,
        filter_pass,
        refined,
        refined_pass,
        refiner_used,
        text_stats,
        text_refined,
        text_spell,
    })
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}
