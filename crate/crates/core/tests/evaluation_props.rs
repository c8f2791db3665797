mod common;

use linkpred::evaluation::{auroc, f1_accuracy, lda_probe};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn labelled(n: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..2, n).prop_filter("both classes", |l| l.contains(&0) && l.contains(&1))
}

fn case() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..=200).prop_flat_map(|n| {
        // coarse grid of values so that ties are common
        (proptest::collection::vec((0i32..20).prop_map(|v| f64::from(v) / 4.0), n), labelled(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn rank_auroc_equals_pair_count((scores, labels) in case()) {
        let a = auroc(&scores, &labels).unwrap();
        prop_assert!((a - common::brute_auroc(&scores, &labels)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        let (f1, acc) = f1_accuracy(&scores, &labels, 2.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&f1) && (0.0..=1.0).contains(&acc));
    }

    #[test]
    fn auroc_invariant_under_increasing_maps(
        raw in proptest::collection::vec(-5.0f64..5.0, 2..100),
        seed in any::<u64>(),
        scale in 0.01f64..100.0,
        shift in -100.0f64..100.0,
    ) {
        let mut r = common::rng(seed);
        let mut labels: Vec<u8> = raw.iter().map(|_| r.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let base = auroc(&raw, &labels).unwrap();
        let exp: Vec<f64> = raw.iter().map(|s| s.exp()).collect();
        let affine: Vec<f64> = raw.iter().map(|s| scale * s + shift).collect();
        prop_assert!((auroc(&exp, &labels).unwrap() - base).abs() <= 1e-12);
        prop_assert!((auroc(&affine, &labels).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn negated_scores_complement(seed in any::<u64>(), n in 2usize..150) {
        let mut r = common::rng(seed);
        let scores: Vec<f64> = (0..n).map(|i| i as f64 + r.random::<f64>() * 0.5).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        labels[0] = 1;
        labels[n - 1] = 0;
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let sum = auroc(&scores, &labels).unwrap() + auroc(&neg, &labels).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn lda_recovers_the_informative_coordinate() {
    for seed in 0..5 {
        let mut r = common::rng(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..600 {
            let l = (i % 2) as u8;
            let mut row: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut r)).collect();
            row[2] += if l == 1 { 2.0 } else { -2.0 };
            rows.push(row);
            labels.push(l);
        }
        let p = lda_probe(&common::matrix_n(rows, labels), 600, seed).unwrap();
        let cos = p.direction[2].abs() / p.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(cos >= 0.99, "seed {seed}: cosine {cos}");
        assert!(p.train_accuracy > 0.95);
    }
}

#[test]
fn lda_handles_duplicated_columns() {
    let mut r = common::rng(1);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let l = (i % 2) as u8;
        let x: f64 = StandardNormal.sample(&mut r);
        let x = x + f64::from(l) * 3.0;
        rows.push(vec![x, x, 1.0]);
        labels.push(l);
    }
    let p = lda_probe(&common::matrix_n(rows, labels), 200, 0).unwrap();
    assert!(p.train_accuracy > 0.85);
    assert!(p.direction.iter().all(|v| v.is_finite()));
}
