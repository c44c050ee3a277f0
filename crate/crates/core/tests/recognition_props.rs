mod common;

use keytrace::attack::{run_attack, Language};
use keytrace::pipeline::{load_inputs, median, simulate};
use keytrace::recognition::hmm::baum_welch;
use keytrace::recognition::{consistency_filter, viterbi_path, TouchpointMap};
use keytrace::KeyId;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn viterbi_finds_the_best_path(seed in any::<u64>(), n in 1usize..5, m in 1usize..5, len in 1usize..5) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let pi = random_stochastic(&mut r, 1, n).remove(0);
        let a = random_stochastic(&mut r, n, n);
        let b = random_stochastic(&mut r, n, m);
        let seq: Vec<usize> = (0..len).map(|_| r.random_range(0..m)).collect();
        let path = viterbi_path(&pi, &a, &b, &seq);
        let (_, best) = exhaustive_path(&pi, &a, &b, &seq);
        let got = path_score(&pi, &a, &b, &seq, &path);
        prop_assert!((got - best).abs() <= 1e-9 * best.abs().max(1.0), "{got} vs {best}");
    }

    #[test]
    fn baum_welch_never_lowers_the_likelihood(seed in any::<u64>(), n in 2usize..6, m in 2usize..6, len in 5usize..60) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let pi = random_stochastic(&mut r, 1, n).remove(0);
        let a = random_stochastic(&mut r, n, n);
        let b = random_stochastic(&mut r, n, m);
        let seq: Vec<usize> = (0..len).map(|_| r.random_range(0..m)).collect();
        let (_, _, ll, _, trace) = baum_welch(&a, pi, b, &seq, 40, 0.0);
        for w in trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{trace:?}");
        }
        prop_assert_eq!(*trace.last().unwrap(), ll);
    }

    #[test]
    fn filter_keeps_only_majority_labels(seed in any::<u64>(), n in 1usize..80, k in 1usize..8) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let assignment: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let centroids: Vec<[f64; 2]> = (0..k).map(|c| [0.02 * c as f64, 0.0]).collect();
        let map = TouchpointMap {
            points: assignment.iter().map(|&c| centroids[c]).collect(),
            assignment,
            centroids,
            thumb: vec![false; k],
        };
        let labels: Vec<KeyId> = (0..n).map(|_| KeyId::from_index(r.random_range(0..4)).unwrap()).collect();
        let out = consistency_filter(&map, &labels, Some(0.02));
        prop_assert_eq!(out.keep.len(), n);
        prop_assert!(out.pass_count() <= n);
        for i in (0..n).filter(|&i| out.keep[i]) {
            prop_assert_eq!(out.majority[map.assignment[i]], Some(labels[i]));
        }
    }
}

#[test]
fn filter_improves_label_accuracy_and_gates_the_refiner() {
    let mut all = Vec::new();
    let mut kept = Vec::new();
    for seed in 1..=5 {
        let mut cfg = seeded_config(seed);
        cfg.input.words = Some(200);
        let inputs = load_inputs(&cfg).unwrap();
        let (s, gt, _) = simulate(&cfg, &inputs).unwrap();
        let lang = Language::new(&inputs.corpus, &inputs.lexicon).unwrap();
        let params = cfg.attack_params();
        let out = run_attack(&s, &lang, &params).unwrap();

        if out.refiner_used {
            assert!(out.refined_pass >= out.filter_pass);
        } else {
            assert_eq!(out.refined, out.polished);
        }

        let truth = match_events(&s, &out.events, &gt, 0.05);
        let filter = consistency_filter(&out.map, &out.polished, params.key_pitch);
        assert_eq!(filter.pass_count(), out.filter_pass);
        let accuracy = |keep: &dyn Fn(usize) -> bool| {
            let idx: Vec<usize> = (0..truth.len()).filter(|&i| truth[i].is_some() && keep(i)).collect();
            idx.iter().filter(|&&i| truth[i] == Some(out.polished[i])).count() as f64 / idx.len().max(1) as f64
        };
        all.push(accuracy(&|_| true));
        kept.push(accuracy(&|i| filter.keep[i]));
    }
    assert!(median(&kept) >= median(&all), "filtered {kept:?} unfiltered {all:?}");
}
