//! End-to-end runs driven by a TOML config.
//!
//! A run simulates a session, optionally moves it through an attack surface
//! (observed, single-camera 2D or two-camera 2D), applies defenses, runs the
//! attack and scores the result. Every stage writes its outputs into its own
//! subdirectory of the run directory; `report.json` and `report.txt` sit at
//! the top.
//!
//! All randomness derives from the master `seed` through named sub-seeds, so
//! a config fully determines every artifact. Only the timings in the report
//! vary between runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attack::{run_attack, AttackOutcome, AttackParams, Language};
use crate::defense::{downsample, perturb_depth};
use crate::error::{Error, Result};
use crate::formats;
use crate::keyboard;
use crate::metrics;
use crate::model::{normalize_text, GroundTruth, KeyboardModel, PoV, Session};
use crate::rng::derive_seed;
use crate::sim::{noise_stats, synth_session, NoiseParams, NoiseReport, TypistParams};
use crate::transforms::{
    add_screen_noise, invert_flat, invert_observed, project_2d, stereo_reconstruct, to_observed, CameraModel,
};

pub const SINGLE_CAMERA_NOTE: &str = "single-camera attack expected ineffective";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub input: InputConfig,
    pub typist: TypistParams,
    pub noise: NoiseSection,
    pub surface: SurfaceConfig,
    pub defense: DefenseConfig,
    pub attack: AttackParams,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Text the simulated user types.
    pub text: Option<PathBuf>,
    /// Attacker corpus for key transitions and the word model.
    pub corpus: Option<PathBuf>,
    /// Word list for spell correction; the corpus when absent.
    pub lexicon: Option<PathBuf>,
    /// Number of words typed, starting at `offset`; all words when absent.
    pub words: Option<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePreset {
    #[default]
    Calibrated,
    Zero,
}

/// Noise settings: a preset plus optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub preset: NoisePreset,
    pub depth_std: Option<f64>,
    pub depth_bias: Option<f64>,
    pub drift_share: Option<f64>,
    pub jitter_std: Option<f64>,
    pub xz_std: Option<f64>,
    pub white_std: Option<f64>,
    pub drift_time: Option<f64>,
    pub jitter_time: Option<f64>,
    pub fps: Option<f64>,
}

impl NoiseSection {
    pub fn params(&self, seed: u64) -> NoiseParams {
        let mut p = match self.preset {
            NoisePreset::Calibrated => NoiseParams {
                seed,
                ..Default::default()
            },
            NoisePreset::Zero => NoiseParams::zero(seed),
        };
        let fields = [
            (self.depth_std, &mut p.depth_std),
            (self.depth_bias, &mut p.depth_bias),
            (self.drift_share, &mut p.drift_share),
            (self.jitter_std, &mut p.jitter_std),
            (self.xz_std, &mut p.xz_std),
            (self.white_std, &mut p.white_std),
            (self.drift_time, &mut p.drift_time),
            (self.jitter_time, &mut p.jitter_time),
            (self.fps, &mut p.fps),
        ];
        for (v, slot) in fields {
            if let Some(v) = v {
                *slot = v;
            }
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SurfaceKind {
    #[default]
    #[serde(rename = "original")]
    Original,
    #[serde(rename = "observed")]
    Observed,
    #[serde(rename = "2d-single")]
    SingleCamera,
    #[serde(rename = "2d-stereo")]
    Stereo,
}

impl SurfaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Original => "original",
            SurfaceKind::Observed => "observed",
            SurfaceKind::SingleCamera => "2d-single",
            SurfaceKind::Stereo => "2d-stereo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: SurfaceKind,
    /// `(horizontal, vertical)` degrees of the first camera.
    pub pov: [f64; 2],
    /// Second camera for the stereo surface.
    pub pov_b: [f64; 2],
    /// Camera distance from the hands, meters.
    pub distance: f64,
    pub focal: f64,
    /// Std of 2D keypoint noise in screen units.
    pub screen_noise: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            kind: SurfaceKind::Original,
            pov: [0.0, 0.0],
            pov_b: [0.0, 45.0],
            distance: 0.6,
            focal: 1.0,
            screen_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    /// Std of the y noise in key widths; zero disables it.
    pub noise_std_keywidths: f64,
    /// Frame rate after decimation; unchanged when absent.
    pub fps: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(raw: &str) -> Result<RunConfig> {
        toml::from_str(raw).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .map_or_else(|| "config".to_string(), str::to_string);
            Error::config(field, e.message().trim().to_string())
        })
    }

    /// Loads a config file, resolving relative input paths against its directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let raw = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_toml(&raw)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.input.text, &mut cfg.input.corpus, &mut cfg.input.lexicon]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let require = |p: &Option<PathBuf>, field: &str| -> Result<()> {
            match p {
                None => Err(Error::config(field, "required path is missing")),
                Some(p) if !p.is_file() => Err(Error::config(field, format!("{} does not exist", p.display()))),
                Some(_) => Ok(()),
            }
        };
        require(&self.input.text, "input.text")?;
        require(&self.input.corpus, "input.corpus")?;
        if self.input.lexicon.is_some() {
            require(&self.input.lexicon, "input.lexicon")?;
        }
        if self.input.words == Some(0) {
            return Err(Error::config("input.words", "must be positive"));
        }
        if !(self.surface.distance > 0.0) {
            return Err(Error::config("surface.distance", "must be positive"));
        }
        if !(self.surface.focal > 0.0) {
            return Err(Error::config("surface.focal", "must be positive"));
        }
        if !(self.surface.screen_noise >= 0.0) {
            return Err(Error::config("surface.screen_noise", "must be non-negative"));
        }
        if !(self.defense.noise_std_keywidths >= 0.0) {
            return Err(Error::config("defense.noise_std_keywidths", "must be non-negative"));
        }
        if let Some(f) = self.defense.fps {
            if !(f > 0.0) {
                return Err(Error::config("defense.fps", "must be positive"));
            }
        }
        Ok(())
    }

    /// Named sub-seeds for every stage.
    pub fn seeds(&self) -> BTreeMap<String, u64> {
        ["simulate", "transform", "defend", "cluster", "hmm", "refiner"]
            .into_iter()
            .map(|n| (n.to_string(), derive_seed(self.seed, n)))
            .collect()
    }

    pub fn noise_params(&self) -> NoiseParams {
        self.noise.params(derive_seed(self.seed, "simulate"))
    }

    /// Attack parameters with stage seeds and the keyboard pitch filled in.
    pub fn attack_params(&self) -> AttackParams {
        let mut p = self.attack.clone();
        p.clustering.seed = derive_seed(self.seed, "cluster");
        p.hmm.seed = derive_seed(self.seed, "hmm");
        p.refiner.options.seed = derive_seed(self.seed, "refiner");
        p.key_pitch.get_or_insert(keyboard::KEY_PITCH);
        p
    }
}

/// Typed text and language data named by a config.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub text: String,
    pub corpus: String,
    pub lexicon: String,
}

fn read_input(p: &Option<PathBuf>, field: &str) -> Result<String> {
    let p = p
        .as_ref()
        .ok_or_else(|| Error::config(field, "required path is missing"))?;
    formats::read_text(p).map_err(|e| Error::config(field, format!("{}: {e}", p.display())))
}

/// The `words` words of `raw` starting at `offset`, normalized to the key alphabet.
pub fn select_words(raw: &str, offset: usize, words: Option<usize>) -> Result<String> {
    let normalized = normalize_text(raw);
    let all: Vec<&str> = normalized.split(' ').filter(|w| !w.is_empty()).collect();
    if offset >= all.len() {
        return Err(Error::config(
            "input.offset",
            format!("offset {offset} exceeds the {} words of the text", all.len()),
        ));
    }
    let end = words.map_or(all.len(), |n| (offset + n).min(all.len()));
    Ok(all[offset..end].join(" "))
}

/// The typed text named by a config.
pub fn load_text(cfg: &RunConfig) -> Result<String> {
    let raw = read_input(&cfg.input.text, "input.text")?;
    select_words(&raw, cfg.input.offset, cfg.input.words)
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let text = load_text(cfg)?;
    let corpus = read_input(&cfg.input.corpus, "input.corpus")?;
    let lexicon = match &cfg.input.lexicon {
        Some(_) => read_input(&cfg.input.lexicon, "input.lexicon")?,
        None => corpus.clone(),
    };
    Ok(Inputs { text, corpus, lexicon })
}

/// Attack-surface session plus the camera views that produced it.
#[derive(Debug, Clone)]
pub struct SurfaceOutput {
    pub session: Session,
    pub cameras: Vec<CameraModel>,
    /// Named intermediate sessions.
    pub views: Vec<(String, Session)>,
}

fn camera(pov: [f64; 2], cfg: &SurfaceConfig, s: &Session) -> CameraModel {
    let mut c = CameraModel::aimed_at(PoV::new(pov[0], pov[1], cfg.distance), s);
    c.focal = cfg.focal;
    c
}

/// Moves an original-space session through the configured attack surface and
/// back into original space as the attacker reconstructs it.
pub fn apply_surface(s: &Session, cfg: &SurfaceConfig, seed: u64) -> Result<SurfaceOutput> {
    let flat = |cam: &CameraModel, name: &str| -> Result<(Session, Session)> {
        let observed = to_observed(s, cam)?;
        let mut projected = project_2d(&observed)?;
        if cfg.screen_noise > 0.0 {
            projected = add_screen_noise(&projected, cfg.screen_noise, derive_seed(seed, name))?;
        }
        Ok((observed, projected))
    };
    match cfg.kind {
        SurfaceKind::Original => Ok(SurfaceOutput {
            session: s.clone(),
            cameras: Vec::new(),
            views: Vec::new(),
        }),
        SurfaceKind::Observed => {
            let cam = camera(cfg.pov, cfg, s);
            let observed = to_observed(s, &cam)?;
            Ok(SurfaceOutput {
                session: invert_observed(&observed, &cam)?,
                cameras: vec![cam],
                views: vec![("observed".into(), observed)],
            })
        }
        SurfaceKind::SingleCamera => {
            let cam = camera(cfg.pov, cfg, s);
            let (observed, projected) = flat(&cam, "camera-a")?;
            Ok(SurfaceOutput {
                session: invert_flat(&projected, &cam)?,
                cameras: vec![cam],
                views: vec![("observed_a".into(), observed), ("projected_a".into(), projected)],
            })
        }
        SurfaceKind::Stereo => {
            let cam_a = camera(cfg.pov, cfg, s);
            let cam_b = camera(cfg.pov_b, cfg, s);
            let (oa, pa) = flat(&cam_a, "camera-a")?;
            let (ob, pb) = flat(&cam_b, "camera-b")?;
            Ok(SurfaceOutput {
                session: stereo_reconstruct(&pa, &cam_a, &pb, &cam_b)?,
                cameras: vec![cam_a, cam_b],
                views: vec![
                    ("observed_a".into(), oa),
                    ("projected_a".into(), pa),
                    ("observed_b".into(), ob),
                    ("projected_b".into(), pb),
                ],
            })
        }
    }
}

pub fn apply_defense(s: &Session, cfg: &DefenseConfig, kb: &KeyboardModel, seed: u64) -> Result<Session> {
    let noisy = perturb_depth(s, cfg.noise_std_keywidths, kb, seed)?;
    match cfg.fps {
        Some(fps) => downsample(&noisy, fps),
        None => Ok(noisy),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis_path: Option<PathBuf>,
    pub reference: String,
    pub hypothesis: String,
    pub cer: f64,
    pub wer: f64,
    /// Word-multiset F1; ignores word order.
    pub token_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub surface: String,
    pub words: usize,
    pub true_presses: usize,
    pub detected_events: usize,
    pub threshold: f64,
    pub filter_pass: usize,
    pub refiner_used: bool,
    /// Statistical attack only: HMM, polishing and filters.
    pub cer_stats: f64,
    pub wer_stats: f64,
    /// Full attack before spell correction.
    pub cer: f64,
    pub wer: f64,
    pub cer_spell: f64,
    pub wer_spell: f64,
    pub token_f1_spell: f64,
    pub notes: Vec<String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("surface          {}\n", self.surface));
        out.push_str(&format!("seed             {}\n", self.seed));
        out.push_str(&format!("words            {}\n", self.words));
        out.push_str(&format!(
            "presses          {} true, {} detected\n",
            self.true_presses, self.detected_events
        ));
        out.push_str(&format!("refiner used     {}\n", self.refiner_used));
        out.push_str(&format!(
            "stats only       CER {:.4}  WER {:.4}\n",
            self.cer_stats, self.wer_stats
        ));
        out.push_str(&format!("attack           CER {:.4}  WER {:.4}\n", self.cer, self.wer));
        out.push_str(&format!(
            "spell corrected  CER {:.4}  WER {:.4}\n",
            self.cer_spell, self.wer_spell
        ));
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        for (stage, t) in &self.timings {
            out.push_str(&format!("time {stage:<12}{t:.3} s\n"));
        }
        out
    }
}

/// Stage names in execution order; each has its own artifact subdirectory.
pub const STAGES: [&str; 5] = ["simulate", "transform", "defend", "attack", "eval"];

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } | Error::Config { .. } => e,
        other => Error::Stage {
            stage: name.to_string(),
            source: Box::new(other),
        },
    })
}

pub fn write_attack_outputs(dir: &Path, out: &AttackOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    formats::write_json(&dir.join("events.json"), formats::EVENTS, &out.events)?;
    formats::write_json(&dir.join("attack.json"), formats::ATTACK, out)?;
    formats::write_text(&dir.join("text_stats.txt"), &out.text_stats)?;
    formats::write_text(&dir.join("text_refined.txt"), &out.text_refined)?;
    formats::write_text(&dir.join("text_spell.txt"), &out.text_spell)?;
    Ok(())
}

pub fn evaluate(reference: &str, hypothesis: &str) -> Result<EvalReport> {
    let s = metrics::score(reference, hypothesis)?;
    Ok(EvalReport {
        reference_path: None,
        hypothesis_path: None,
        reference: reference.to_string(),
        hypothesis: hypothesis.to_string(),
        cer: s.cer,
        wer: s.wer,
        token_f1: s.token_f1,
    })
}

/// Simulates the configured session.
pub fn simulate(cfg: &RunConfig, inputs: &Inputs) -> Result<(Session, GroundTruth, KeyboardModel)> {
    let kb = keyboard::qwerty();
    let (s, gt) = synth_session(&inputs.text, &kb, &cfg.typist, &cfg.noise_params())?;
    Ok((s, gt, kb))
}

/// Runs every stage, writing artifacts under `run_dir`. On a stage failure
/// the artifacts of earlier stages stay on disk.
pub fn run_pipeline(cfg: &RunConfig, run_dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let report = execute(cfg, &inputs, Some(run_dir))?;
    formats::write_json(&run_dir.join("report.json"), formats::RUN_REPORT, &report)?;
    fs::write(run_dir.join("report.txt"), report.to_text())?;
    Ok(report)
}

/// Runs every stage on already loaded inputs without touching the disk.
pub fn run_in_memory(cfg: &RunConfig, inputs: &Inputs) -> Result<RunReport> {
    execute(cfg, inputs, None)
}

fn execute(cfg: &RunConfig, inputs: &Inputs, run_dir: Option<&Path>) -> Result<RunReport> {
    let seeds = cfg.seeds();
    let mut timings = BTreeMap::new();
    let dir = |name: &str| -> Result<Option<PathBuf>> {
        run_dir
            .map(|r| {
                let d = r.join(name);
                fs::create_dir_all(&d)?;
                Ok(d)
            })
            .transpose()
    };

    let t = Instant::now();
    let (s, gt, kb) = stage("simulate", simulate(cfg, inputs))?;
    if let Some(d) = dir("simulate")? {
        stage("simulate", formats::write_session(&d.join("session.jsonl"), &s))?;
        stage(
            "simulate",
            formats::write_json(&d.join("ground_truth.json"), formats::GROUND_TRUTH, &gt),
        )?;
        stage(
            "simulate",
            formats::write_json(&d.join("keyboard.json"), formats::KEYBOARD, &kb),
        )?;
    }
    timings.insert("simulate".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let surface = stage("transform", apply_surface(&s, &cfg.surface, seeds["transform"]))?;
    if let Some(d) = dir("transform")? {
        stage(
            "transform",
            formats::write_json(&d.join("cameras.json"), formats::CAMERAS, &surface.cameras),
        )?;
        for (name, view) in &surface.views {
            stage(
                "transform",
                formats::write_session(&d.join(format!("{name}.jsonl")), view),
            )?;
        }
        stage(
            "transform",
            formats::write_session(&d.join("session.jsonl"), &surface.session),
        )?;
    }
    timings.insert("transform".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let defended = stage(
        "defend",
        apply_defense(&surface.session, &cfg.defense, &kb, seeds["defend"]),
    )?;
    if let Some(d) = dir("defend")? {
        stage("defend", formats::write_session(&d.join("session.jsonl"), &defended))?;
    }
    timings.insert("defend".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let lang = stage("attack", Language::new(&inputs.corpus, &inputs.lexicon))?;
    let out = stage("attack", run_attack(&defended, &lang, &cfg.attack_params()))?;
    if let Some(d) = dir("attack")? {
        stage("attack", write_attack_outputs(&d, &out))?;
    }
    timings.insert("attack".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let stats = stage("eval", evaluate(&gt.text, &out.text_stats))?;
    let refined = stage("eval", evaluate(&gt.text, &out.text_refined))?;
    let spell = stage("eval", evaluate(&gt.text, &out.text_spell))?;
    if let Some(d) = dir("eval")? {
        for (name, r) in [("stats", &stats), ("refined", &refined), ("spell", &spell)] {
            stage(
                "eval",
                formats::write_json(&d.join(format!("{name}.json")), formats::EVAL, r),
            )?;
        }
    }
    timings.insert("eval".to_string(), t.elapsed().as_secs_f64());

    let mut notes = Vec::new();
    if cfg.surface.kind == SurfaceKind::SingleCamera {
        notes.push(SINGLE_CAMERA_NOTE.to_string());
    }
    Ok(RunReport {
        seed: cfg.seed,
        seeds,
        surface: cfg.surface.kind.name().to_string(),
        words: inputs.text.split(' ').count(),
        true_presses: gt.events.len(),
        detected_events: out.events.len(),
        threshold: out.threshold,
        filter_pass: out.filter_pass,
        refiner_used: out.refiner_used,
        cer_stats: stats.cer,
        wer_stats: stats.wer,
        cer: refined.cer,
        wer: refined.wer,
        cer_spell: spell.cer,
        wer_spell: spell.wer,
        token_f1_spell: spell.token_f1,
        notes,
        timings,
    })
}

/// Accepted range for each calibration statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub depth_std: f64,
    pub depth_std_tolerance: f64,
    pub inversion_min: f64,
    pub inversion_max: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            depth_std: 1.639,
            depth_std_tolerance: 0.10,
            inversion_min: 0.27,
            inversion_max: 0.40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub seeds: Vec<u64>,
    pub per_seed: Vec<NoiseReport>,
    pub median_depth_std: f64,
    pub median_inversion_rate: f64,
    pub targets: CalibrationTargets,
    pub depth_std_met: bool,
    pub inversion_met: bool,
}

impl CalibrationReport {
    pub fn met(&self) -> bool {
        self.depth_std_met && self.inversion_met
    }

    pub fn to_text(&self) -> String {
        let t = &self.targets;
        let mark = |ok: bool| if ok { "met" } else { "UNMET" };
        format!(
            "statistic        measured  target\n\
             depth std        {:8.4}  {:.3} +/- {:.0}%  {}\n\
             inversion rate   {:8.4}  [{:.2}, {:.2}]  {}\n",
            self.median_depth_std,
            t.depth_std,
            t.depth_std_tolerance * 100.0,
            mark(self.depth_std_met),
            self.median_inversion_rate,
            t.inversion_min,
            t.inversion_max,
            mark(self.inversion_met),
        )
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}

/// Measures the configured simulator's noise statistics over `seeds` runs
/// (sub-seeds of the master seed) and compares their medians with `targets`.
pub fn calibration_report(cfg: &RunConfig, seeds: usize, targets: &CalibrationTargets) -> Result<CalibrationReport> {
    let text = load_text(cfg)?;
    let kb = keyboard::qwerty();
    let seeds: Vec<u64> = (0..seeds.max(1))
        .map(|i| derive_seed(cfg.seed, &format!("calibrate/{i}")))
        .collect();
    let per_seed = seeds
        .iter()
        .map(|&seed| {
            let (s, gt) = synth_session(&text, &kb, &cfg.typist, &cfg.noise.params(seed))?;
            noise_stats(&s, &gt, &kb)
        })
        .collect::<Result<Vec<_>>>()?;
    let std = median(&per_seed.iter().map(|r| r.measured_depth_std).collect::<Vec<_>>());
    let inv = median(&per_seed.iter().map(|r| r.inversion_rate).collect::<Vec<_>>());
    Ok(CalibrationReport {
        depth_std_met: (std - targets.depth_std).abs() <= targets.depth_std_tolerance * targets.depth_std,
        inversion_met: (targets.inversion_min..=targets.inversion_max).contains(&inv),
        seeds,
        per_seed,
        median_depth_std: std,
        median_inversion_rate: inv,
        targets: targets.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_corpus_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let text = dir.path().join("t.txt");
        fs::write(&text, "hello world").unwrap();
        let cfg = RunConfig {
            input: InputConfig {
                text: Some(text),
                ..Default::default()
            },
            ..Default::default()
        };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "input.corpus"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let err = RunConfig::from_toml("seed = 1\n[surface]\nkindd = \"original\"\n").unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(err.to_string().contains("kindd"), "{err}");
    }

    #[test]
    fn surface_names_parse() {
        let cfg = RunConfig::from_toml("[surface]\nkind = \"2d-stereo\"\npov_b = [0.0, 30.0]\n").unwrap();
        assert_eq!(cfg.surface.kind, SurfaceKind::Stereo);
        assert_eq!(cfg.surface.pov_b, [0.0, 30.0]);
    }

    #[test]
    fn noise_overrides_apply_on_top_of_preset() {
        let n = NoiseSection {
            preset: NoisePreset::Zero,
            depth_std: Some(0.5),
            ..Default::default()
        };
        let p = n.params(3);
        assert_eq!(p.depth_std, 0.5);
        assert_eq!(p.jitter_std, 0.0);
        assert_eq!(p.seed, 3);
    }

    #[test]
    fn seeds_differ_per_stage() {
        let cfg = RunConfig::default();
        let s = cfg.seeds();
        let mut v: Vec<u64> = s.values().copied().collect();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), s.len());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
