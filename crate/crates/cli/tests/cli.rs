use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn keytrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_keytrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    repo().join("crates/core/data").join(name).display().to_string()
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = d.join("sim");
    ok(&keytrace(&[
        "simulate",
        "--text",
        &data("typing.txt"),
        "--words",
        "250",
        "--seed",
        "3",
        "--zero-noise",
        "--out",
        p(&sim),
    ]));
    for f in ["session.jsonl", "ground_truth.json", "keyboard.json"] {
        assert!(sim.join(f).is_file(), "{f}");
    }
    let session = sim.join("session.jsonl");

    let observed = d.join("observed.jsonl");
    let cameras = d.join("cameras.json");
    ok(&keytrace(&[
        "transform",
        "--op",
        "observe",
        "--input",
        p(&session),
        "--pov",
        "30",
        "-15",
        "--cameras",
        p(&cameras),
        "--out",
        p(&observed),
    ]));
    let back = d.join("back.jsonl");
    ok(&keytrace(&[
        "transform",
        "--op",
        "invert",
        "--input",
        p(&observed),
        "--cameras",
        p(&cameras),
        "--out",
        p(&back),
    ]));

    let defended = d.join("defended.jsonl");
    ok(&keytrace(&[
        "defend",
        "--input",
        p(&back),
        "--noise-std-keywidths",
        "0.05",
        "--seed",
        "1",
        "--out",
        p(&defended),
    ]));

    let events = d.join("events.json");
    ok(&keytrace(&["detect", "--input", p(&defended), "--out", p(&events)]));
    assert!(fs::read_to_string(&events).unwrap().contains("frame_idx"));

    let attack = d.join("attack");
    ok(&keytrace(&[
        "attack",
        "--input",
        p(&back),
        "--corpus",
        &data("corpus.txt"),
        "--out",
        p(&attack),
    ]));
    let hypothesis = attack.join("text_refined.txt");
    assert!(hypothesis.is_file());

    let report = d.join("eval.json");
    let out = keytrace(&[
        "eval",
        "--reference",
        p(&sim.join("ground_truth.json")),
        "--hypothesis",
        p(&hypothesis),
        "--out",
        p(&report),
    ]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("CER"));
    let raw = fs::read_to_string(&report).unwrap();
    let (header, body) = raw.split_once('\n').unwrap();
    assert!(header.contains("eval"), "{header}");
    let json: serde_json::Value = serde_json::from_str(body).unwrap();
    let cer = json["cer"].as_f64().expect("cer field");
    assert!((0.0..0.1).contains(&cer), "cer {cer}");
}

#[test]
fn missing_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        keytrace(&["run", "--config", p(&missing), "--out", p(dir.path())])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        keytrace(&["detect", "--input", p(&missing), "--out", p(&dir.path().join("e.json"))])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(keytrace(&["simulate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn run_without_corpus_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "seed = 2\n[input]\ntext = {:?}\ncorpus = \"absent.txt\"\nwords = 40\n",
            data("typing.txt")
        ),
    )
    .unwrap();
    let out = keytrace(&["run", "--config", p(&cfg), "--out", p(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input.corpus"));
}

#[test]
fn run_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "seed = 2\n[input]\ntext = {:?}\ncorpus = {:?}\nwords = 40\n",
            data("typing.txt"),
            data("corpus.txt")
        ),
    )
    .unwrap();
    let run = dir.path().join("run");
    ok(&keytrace(&["run", "--config", p(&cfg), "--out", p(&run)]));
    assert!(run.join("report.json").is_file());
    assert!(run.join("simulate/session.jsonl").is_file());
}

#[test]
fn uncalibrated_noise_fails_calibration() {
    let out = keytrace(&[
        "calibrate",
        "--config",
        p(&repo().join("configs/zero.toml")),
        "--require-calibrated",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = keytrace(&[
        "calibrate",
        "--config",
        p(&repo().join("configs/calibrated.toml")),
        "--require-calibrated",
    ]);
    ok(&out);
}
