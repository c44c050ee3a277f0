//! Shared fixtures for the criterion benchmarks.

use std::path::PathBuf;

use keytrace::attack::Language;
use keytrace::keyboard::qwerty;
use keytrace::pipeline::select_words;
use keytrace::sim::{synth_session, NoiseParams, TypistParams};
use keytrace::{GroundTruth, Session};

fn data(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn typing_text(words: usize) -> String {
    select_words(&data("typing.txt"), 0, Some(words)).expect("bundled text is long enough")
}

/// Calibrated-noise session typing the first `words` words of the bundled text.
pub fn session(words: usize) -> (Session, GroundTruth) {
    synth_session(
        &typing_text(words),
        &qwerty(),
        &TypistParams::default(),
        &NoiseParams::default(),
    )
    .expect("default parameters are valid")
}

pub fn language() -> Language {
    let corpus = data("corpus.txt");
    Language::new(&corpus, &corpus).expect("bundled corpus is non-empty")
}
