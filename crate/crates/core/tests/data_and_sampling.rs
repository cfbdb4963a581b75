mod common;

use std::collections::HashSet;

use amlbfgs::batching::{overlap_of, overlap_size, OverlapSampler};
use amlbfgs::config::ExperimentConfig;
use amlbfgs::data::{split, standardize, SplitSpec};
use amlbfgs::harness::monte_carlo;
use amlbfgs::optim::Method;
use amlbfgs::RngState;
use common::*;
use proptest::prelude::*;

#[test]
fn bundled_cancer_shape() {
    let ds = load_cancer();
    assert_eq!(ds.len(), 569);
    assert_eq!(ds.n_features, 30);
    assert_eq!(ds.class_count, 2);
    ds.validate().unwrap();
    let benign = ds.labels.iter().filter(|&&l| ds.class_names[l] == "benign").count();
    assert_eq!(benign, 357);
}

#[test]
fn cancer_split_sizes() {
    let ds = load_cancer();
    let s = split(&ds, 85, &SplitSpec::default()).unwrap();
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (436, 48, 85));
    let all: HashSet<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
    assert_eq!(all.len(), 569);
}

#[test]
fn standardization_ignores_held_out_rows() {
    let ds = load_cancer();
    let s = split(&ds, 85, &SplitSpec::default()).unwrap();
    let a = standardize(&ds, &s.train).unwrap();
    let mut perturbed = ds.clone();
    for &row in s.test.iter().chain(&s.validation) {
        for f in &mut perturbed.features[row * 30..(row + 1) * 30] {
            *f = *f * 7.0 + 100.0;
        }
    }
    let b = standardize(&perturbed, &s.train).unwrap();
    for &row in &s.train {
        assert_eq!(a.row(row), b.row(row));
    }
}

#[test]
fn methods_see_identical_data() {
    let ds = load_cancer();
    let mut cfg = ExperimentConfig::default();
    cfg.lbfgs.iterations = 2;
    cfg.adam.iterations = 2;
    cfg.run.repetitions = 2;
    cfg.run.record_test_metrics = false;
    let report = monte_carlo(&ds, &cfg).unwrap();
    for rep in &report.runs {
        let prints: HashSet<u64> = rep.iter().map(|r| r.data_fingerprint).collect();
        assert_eq!(prints.len(), 1);
        let methods: Vec<Method> = rep.iter().map(|r| r.method).collect();
        assert_eq!(methods, Method::ALL);
    }
}

#[test]
fn overlap_exact_at_experiment_scale() {
    let mut sampler = OverlapSampler::new(436, 256, 0.45, RngState::new(1)).unwrap();
    let mut prev = sampler.next_batch();
    for _ in 0..1000 {
        let curr = sampler.next_batch();
        assert_eq!(overlap_of(&prev, &curr).len(), 115);
        prev = curr;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn batches_have_exact_overlap_and_no_repeats(
        n in 20usize..400,
        r_frac in 0.05f64..0.5,
        o in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let r = ((n as f64 * r_frac) as usize).max(1);
        let mut sampler = OverlapSampler::new(n, r, o, RngState::new(seed)).unwrap();
        let mut prev = sampler.next_batch();
        for _ in 0..30 {
            let curr = sampler.next_batch();
            prop_assert_eq!(curr.len(), r);
            prop_assert_eq!(curr.iter().collect::<HashSet<_>>().len(), r);
            prop_assert!(curr.iter().all(|&i| i < n));
            prop_assert_eq!(overlap_of(&prev, &curr).len(), overlap_size(r, o));
            prev = curr;
        }
    }

    #[test]
    fn splits_partition_rows(n in 10usize..300, test_frac in 0.0f64..0.5, vf in 0.0f64..0.9, seed in any::<u64>()) {
        let ds = amlbfgs::data::synth_gaussian_blobs(2, n / 2, 2, 1.0, seed);
        let test_count = (ds.len() as f64 * test_frac) as usize;
        let s = split(&ds, test_count, &SplitSpec { validation_fraction: vf, split_seed: seed }).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        prop_assert_eq!(s.test.len(), test_count);
    }
}
