use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use keytrace::attack::{run_attack, AttackParams};
use keytrace::defense::{downsample, perturb_depth};
use keytrace::detection::{detect_keystrokes, DetectionParams};
use keytrace::keyboard::qwerty;
use keytrace::metrics::{cer, levenshtein};
use keytrace::recognition::viterbi_path;
use keytrace::transforms::{invert_observed, project_2d, stereo_reconstruct, to_observed, CameraModel};
use keytrace::PoV;
use keytrace_bench::{language, session, typing_text};
use std::hint::black_box;

fn transforms(c: &mut Criterion) {
    let (s, _) = session(100);
    let cam = CameraModel::aimed_at(PoV::new(30.0, 20.0, 0.6), &s);
    let cam_b = CameraModel::aimed_at(PoV::new(-30.0, 20.0, 0.6), &s);
    let observed = to_observed(&s, &cam).unwrap();
    let flat_a = project_2d(&observed).unwrap();
    let flat_b = project_2d(&to_observed(&s, &cam_b).unwrap()).unwrap();
    c.bench_function("to_observed/100w", |b| {
        b.iter(|| to_observed(black_box(&s), &cam).unwrap())
    });
    c.bench_function("invert_observed/100w", |b| {
        b.iter(|| invert_observed(black_box(&observed), &cam).unwrap())
    });
    c.bench_function("stereo_reconstruct/100w", |b| {
        b.iter(|| stereo_reconstruct(black_box(&flat_a), &cam, &flat_b, &cam_b).unwrap())
    });
}

fn defenses(c: &mut Criterion) {
    let (s, _) = session(100);
    let kb = qwerty();
    c.bench_function("perturb_depth/100w", |b| {
        b.iter(|| perturb_depth(black_box(&s), 0.3, &kb, 7).unwrap())
    });
    c.bench_function("downsample_15fps/100w", |b| {
        b.iter(|| downsample(black_box(&s), 15.0).unwrap())
    });
}

fn detection(c: &mut Criterion) {
    let (s, _) = session(200);
    let p = DetectionParams::default();
    c.bench_function("detect_keystrokes/200w", |b| {
        b.iter(|| detect_keystrokes(black_box(&s), &p).unwrap())
    });
}

fn decoding(c: &mut Criterion) {
    let lang = language();
    let n = lang.initial.len();
    let m = 30;
    let b: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|o| if o == i % m { 0.5 } else { 0.5 / (m - 1) as f64 })
                .collect()
        })
        .collect();
    let seq: Vec<usize> = (0..2000).map(|t| (t * 7 + t / 3) % m).collect();
    c.bench_function("viterbi/2000x29", |bench| {
        bench.iter(|| viterbi_path(&lang.initial, &lang.transitions, &b, black_box(&seq)))
    });

    let (s, _) = session(150);
    let params = AttackParams::default();
    let mut group = c.benchmark_group("attack");
    group.sample_size(10);
    group.bench_function("run_attack/150w", |bench| {
        bench.iter_batched(
            || s.clone(),
            |s| run_attack(&s, &lang, &params).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let reference = typing_text(500);
    let hypothesis: String = reference
        .chars()
        .enumerate()
        .map(|(i, ch)| if i % 11 == 0 { 'x' } else { ch })
        .collect();
    let a: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    c.bench_function("levenshtein/500w", |b| {
        b.iter(|| levenshtein(black_box(&a), black_box(&h)))
    });
    c.bench_function("cer/500w", |b| {
        b.iter(|| cer(black_box(&reference), black_box(&hypothesis)).unwrap())
    });
}

criterion_group!(benches, transforms, defenses, detection, decoding, metrics);
criterion_main!(benches);
