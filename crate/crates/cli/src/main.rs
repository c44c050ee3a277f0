//! `keytrace` command line: every pipeline stage as a subcommand plus `run`
//! for the whole chain and `calibrate` for the simulator statistics.
//!
//! Exit status is 0 on success, 1 when a stage fails and 2 for configuration
//! or usage errors.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use keytrace::attack::{run_attack, Language};
use keytrace::detection::detect_keystrokes;
use keytrace::formats;
use keytrace::keyboard;
use keytrace::pipeline::{
    apply_defense, calibration_report, evaluate, run_pipeline, select_words, write_attack_outputs, CalibrationTargets,
    DefenseConfig, NoisePreset, RunConfig,
};
use keytrace::rng::derive_seed;
use keytrace::sim::synth_session;
use keytrace::transforms::{
    add_screen_noise, invert_flat, invert_observed, project_2d, stereo_reconstruct, to_observed, CameraModel,
};
use keytrace::{resample_uniform, GroundTruth, KeyboardModel, PoV, Session};

/// Bad flags or unusable input files.
#[derive(Debug)]
struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Parser)]
#[command(
    name = "keytrace",
    version,
    about = "Keystroke inference from hand-tracking telemetry"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a typing session from a text file.
    Simulate(SimulateArgs),
    /// Move a session between original, observed and 2D spaces.
    Transform(TransformArgs),
    /// Apply depth noise and frame-rate reduction to a session.
    Defend(DefendArgs),
    /// Detect key presses in an original-space session.
    Detect(DetectArgs),
    /// Run the keystroke inference attack on a session.
    Attack(AttackArgs),
    /// Score a hypothesis text against a reference.
    Eval(EvalArgs),
    /// Run every stage from a config file.
    Run(RunArgs),
    /// Measure simulator noise statistics against their targets.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Text to type; overrides `input.text` of the config.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Keyboard file; the built-in QWERTY layout when absent.
    #[arg(long)]
    keyboard: Option<PathBuf>,
    /// Config file supplying `[typist]` and `[noise]` parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of words to type.
    #[arg(long)]
    words: Option<usize>,
    #[arg(long)]
    offset: Option<usize>,
    /// Switch all simulator noise off.
    #[arg(long)]
    zero_noise: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformOp {
    /// Original to observed telemetry for one camera.
    Observe,
    /// Observed telemetry to 2D handpose.
    Project,
    /// Observed telemetry back to original space.
    Invert,
    /// 2D handpose back to original space, assuming constant depth.
    InvertFlat,
    /// Two 2D handposes to original space.
    Stereo,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long, value_enum)]
    op: TransformOp,
    #[arg(long)]
    input: PathBuf,
    /// Second camera's 2D session for `stereo`.
    #[arg(long)]
    input_b: Option<PathBuf>,
    /// Camera file: written by `observe`, read by the inverse operations.
    #[arg(long)]
    cameras: Option<PathBuf>,
    /// Camera file of the second view for `stereo`; defaults to the second
    /// entry of `--cameras`.
    #[arg(long)]
    cameras_b: Option<PathBuf>,
    /// Horizontal and vertical camera angles in degrees.
    #[arg(long, num_args = 2, value_names = ["H", "V"], allow_negative_numbers = true, default_values_t = [0.0, 0.0])]
    pov: Vec<f64>,
    /// Camera distance from the hands, meters.
    #[arg(long, default_value_t = 0.6)]
    distance: f64,
    #[arg(long, default_value_t = 1.0)]
    focal: f64,
    /// Std of keypoint noise added by `project`, screen units.
    #[arg(long, default_value_t = 0.0)]
    screen_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DefendArgs {
    #[arg(long)]
    input: PathBuf,
    /// Std of the y noise in key widths.
    #[arg(long, default_value_t = 0.0)]
    noise_std_keywidths: f64,
    /// Target frame rate.
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    keyboard: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    /// Config file supplying `[attack.detection]`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    input: PathBuf,
    /// Attacker corpus; overrides `input.corpus` of the config.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Word list for spell correction; the corpus when absent.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Config file supplying `[attack]` parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Reference text or ground-truth file.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    hypothesis: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of seeds whose medians are compared with the targets.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Exit with status 1 unless every target is met.
    #[arg(long)]
    require_calibrated: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config_error(format!("{what} {} does not exist", path.display())))
    }
}

fn read_session(path: &Path) -> Result<Session> {
    require_file(path, "session")?;
    Ok(formats::read_session(path)?)
}

fn read_keyboard(path: Option<&Path>) -> Result<KeyboardModel> {
    let Some(p) = path else {
        return Ok(keyboard::qwerty());
    };
    require_file(p, "keyboard")?;
    let kb: KeyboardModel = formats::read_json(p, formats::KEYBOARD)?;
    kb.check().map_err(|e| config_error(format!("{}: {e}", p.display())))?;
    Ok(kb)
}

fn read_cameras(path: Option<&Path>) -> Result<Vec<CameraModel>> {
    let p = path.ok_or_else(|| config_error("--cameras is required for this operation"))?;
    require_file(p, "camera file")?;
    let cams: Vec<CameraModel> = formats::read_json(p, formats::CAMERAS)?;
    if cams.is_empty() {
        return Err(config_error(format!("{} holds no camera", p.display())));
    }
    Ok(cams)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if a.zero_noise {
        cfg.noise.preset = NoisePreset::Zero;
    }
    let text_path = a
        .text
        .or(cfg.input.text.clone())
        .ok_or_else(|| config_error("a text file is required (--text or input.text)"))?;
    require_file(&text_path, "text")?;
    let raw = formats::read_text(&text_path)?;
    let text = select_words(&raw, a.offset.unwrap_or(cfg.input.offset), a.words.or(cfg.input.words))?;
    let kb = read_keyboard(a.keyboard.as_deref())?;
    let (s, gt) = synth_session(&text, &kb, &cfg.typist, &cfg.noise_params()).context("simulation failed")?;
    create_dir(&a.out)?;
    formats::write_session(&a.out.join("session.jsonl"), &s)?;
    formats::write_json(&a.out.join("ground_truth.json"), formats::GROUND_TRUTH, &gt)?;
    formats::write_json(&a.out.join("keyboard.json"), formats::KEYBOARD, &kb)?;
    println!(
        "simulated {} frames, {} presses, {} words -> {}",
        s.len(),
        gt.events.len(),
        text.split(' ').count(),
        a.out.display()
    );
    Ok(())
}

fn transform(a: TransformArgs) -> Result<()> {
    let s = read_session(&a.input)?;
    let out = match a.op {
        TransformOp::Observe => {
            let path = a
                .cameras
                .as_deref()
                .ok_or_else(|| config_error("--cameras is required to record the camera"))?;
            let mut cam = CameraModel::aimed_at(PoV::new(a.pov[0], a.pov[1], a.distance), &s);
            cam.focal = a.focal;
            let observed = to_observed(&s, &cam)?;
            formats::write_json(path, formats::CAMERAS, &vec![cam])?;
            observed
        }
        TransformOp::Project => {
            let flat = project_2d(&s)?;
            if a.screen_noise > 0.0 {
                add_screen_noise(&flat, a.screen_noise, derive_seed(a.seed, "camera-a"))?
            } else {
                flat
            }
        }
        TransformOp::Invert => invert_observed(&s, &read_cameras(a.cameras.as_deref())?[0])?,
        TransformOp::InvertFlat => invert_flat(&s, &read_cameras(a.cameras.as_deref())?[0])?,
        TransformOp::Stereo => {
            let b_path = a
                .input_b
                .as_deref()
                .ok_or_else(|| config_error("--input-b is required for stereo"))?;
            let b = read_session(b_path)?;
            let cams = read_cameras(a.cameras.as_deref())?;
            let cam_b = match a.cameras_b.as_deref() {
                Some(p) => read_cameras(Some(p))?[0],
                None => *cams
                    .get(1)
                    .ok_or_else(|| config_error("stereo needs --cameras-b or a second camera in --cameras"))?,
            };
            stereo_reconstruct(&s, &cams[0], &b, &cam_b)?
        }
    };
    formats::write_session(&a.out, &out)?;
    println!(
        "{} frames in {} space -> {}",
        out.len(),
        out.space.kind(),
        a.out.display()
    );
    Ok(())
}

fn defend(a: DefendArgs) -> Result<()> {
    let s = read_session(&a.input)?;
    let kb = read_keyboard(a.keyboard.as_deref())?;
    if !(a.noise_std_keywidths >= 0.0 && a.noise_std_keywidths.is_finite()) {
        return Err(config_error("--noise-std-keywidths must be finite and non-negative"));
    }
    if a.fps.is_some_and(|f| !(f > 0.0 && f.is_finite())) {
        return Err(config_error("--fps must be positive"));
    }
    let cfg = DefenseConfig {
        noise_std_keywidths: a.noise_std_keywidths,
        fps: a.fps,
    };
    let out = apply_defense(&s, &cfg, &kb, derive_seed(a.seed, "defend"))?;
    formats::write_session(&a.out, &out)?;
    println!("{} frames at {} fps -> {}", out.len(), out.nominal_fps, a.out.display());
    Ok(())
}

fn detect(a: DetectArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let s = read_session(&a.input)?;
    let s = resample_uniform(&s, s.nominal_fps)?;
    let d = detect_keystrokes(&s, &cfg.attack.detection)?;
    formats::write_json(&a.out, formats::EVENTS, &d.events)?;
    println!(
        "{} events from {} peaks, threshold {:.4} m/s^2 -> {}",
        d.events.len(),
        d.peak_count,
        d.threshold,
        a.out.display()
    );
    Ok(())
}

fn attack(a: AttackArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let corpus_path = a
        .corpus
        .or(cfg.input.corpus.clone())
        .ok_or_else(|| config_error("a corpus is required (--corpus or input.corpus)"))?;
    require_file(&corpus_path, "corpus")?;
    let corpus = formats::read_text(&corpus_path)?;
    let lexicon = match a.lexicon.or(cfg.input.lexicon.clone()) {
        Some(p) => {
            require_file(&p, "lexicon")?;
            formats::read_text(&p)?
        }
        None => corpus.clone(),
    };
    let s = read_session(&a.input)?;
    let lang = Language::new(&corpus, &lexicon)?;
    let out = run_attack(&s, &lang, &cfg.attack_params())?;
    write_attack_outputs(&a.out, &out)?;
    println!(
        "{} events, {} pass the consistency filter, refiner {}",
        out.events.len(),
        out.filter_pass,
        if out.refiner_used { "used" } else { "not used" }
    );
    println!("{}", out.text_refined);
    Ok(())
}

fn read_reference(path: &Path) -> Result<String> {
    require_file(path, "reference")?;
    if formats::peek_format(path).ok().as_deref() == Some(formats::GROUND_TRUTH.format) {
        let gt: GroundTruth = formats::read_json(path, formats::GROUND_TRUTH)?;
        return Ok(gt.text);
    }
    Ok(formats::read_text(path)?)
}

fn eval(a: EvalArgs) -> Result<()> {
    let reference = read_reference(&a.reference)?;
    require_file(&a.hypothesis, "hypothesis")?;
    let hypothesis = formats::read_text(&a.hypothesis)?;
    let mut report = evaluate(reference.trim(), hypothesis.trim())?;
    report.reference_path = Some(a.reference);
    report.hypothesis_path = Some(a.hypothesis);
    if let Some(out) = &a.out {
        formats::write_json(out, formats::EVAL, &report)?;
    }
    println!(
        "CER {:.4}  WER {:.4}  token-F1 {:.4}",
        report.cer, report.wer, report.token_f1
    );
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    create_dir(&a.out)?;
    let report = run_pipeline(&cfg, &a.out)?;
    print!("{}", report.to_text());
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<ExitCode> {
    let cfg = RunConfig::load(&a.config)?;
    let report = calibration_report(&cfg, a.seeds, &CalibrationTargets::default())?;
    if let Some(out) = &a.out {
        formats::write_json(out, formats::CALIBRATION, &report)?;
    }
    print!("{}", report.to_text());
    if a.require_calibrated && !report.met() {
        eprintln!("error: calibration targets not met");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_status(err: &anyhow::Error) -> u8 {
    let config = err.chain().any(|c| {
        c.downcast_ref::<ConfigError>().is_some()
            || c.downcast_ref::<keytrace::Error>()
                .is_some_and(keytrace::Error::is_config)
    });
    if config {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a).map(|_| ExitCode::SUCCESS),
        Command::Transform(a) => transform(a).map(|_| ExitCode::SUCCESS),
        Command::Defend(a) => defend(a).map(|_| ExitCode::SUCCESS),
        Command::Detect(a) => detect(a).map(|_| ExitCode::SUCCESS),
        Command::Attack(a) => attack(a).map(|_| ExitCode::SUCCESS),
        Command::Eval(a) => eval(a).map(|_| ExitCode::SUCCESS),
        Command::Run(a) => run(a).map(|_| ExitCode::SUCCESS),
        Command::Calibrate(a) => calibrate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors_map_to_two() {
        assert_eq!(exit_status(&config_error("bad")), 2);
        let wrapped = config_error("bad").context("while loading");
        assert_eq!(exit_status(&wrapped), 2);
        let stage: anyhow::Error = keytrace::Error::EmptyReference.into();
        assert_eq!(exit_status(&stage), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
