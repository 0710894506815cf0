//! Statistical behaviour of the permutation tests that single runs
//! cannot show: stability of the permutation law across seed batches,
//! and recovery of a planted factorisation from the rejection pattern.

use hoi_core::estimator::EvalSession;
use hoi_core::hypothesis::{run_test, TestConfig, TestKind};
use hoi_core::kernel::{Dataset, GramSet, VariableSamples};
use hoi_core::lattice::{expansion_for, product_terms, LatticeKind};
use hoi_core::streams::replicate_rng;
use hoi_core::synth::{equicorrelated_covariance, gen_gaussian_from_covariance, gen_null};
use hoi_core::Partition;
use rand::seq::SliceRandom;

fn two_sample_ks(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst = 0.0_f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// The permuted-statistic distribution is a property of the data, not
/// of the seed stream: two disjoint batches of replicate streams must
/// produce indistinguishable samples of the permuted statistic.
#[test]
fn permuted_statistic_law_is_stable_across_seed_batches() {
    let data = gen_null(30, 3, 4242).unwrap();
    let grams = GramSet::gaussian(&data).unwrap();
    let expansion = expansion_for(&LatticeKind::Lancaster, 3, true).unwrap();
    let terms = product_terms(&expansion);
    let mut session = EvalSession::from_gram_set(&grams, true).unwrap();
    let n = data.n();

    let mut draw_batch = |stream: u32| -> Vec<f64> {
        (0..300u32)
            .map(|replicate| {
                let mut rng = replicate_rng(904_217, stream, replicate);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                session.permute(&[0], &perm).unwrap();
                let value = session.evaluate_terms(&terms).unwrap();
                session.clear_permutation();
                value
            })
            .collect()
    };
    let mut first = draw_batch(0);
    let mut second = draw_batch(1);
    let ks = two_sample_ks(&mut first, &mut second);
    assert!(ks < 0.15, "KS distance {ks} between disjoint seed batches");
}

/// A strongly equicorrelated triple next to an independent variable:
/// the factorisation-detector composite must reject exactly the six
/// bipartitions that cut through the triple, decline overall, and
/// report the surviving candidates — the true split and the top.
#[test]
fn planted_factorisation_is_recovered() {
    let cov = equicorrelated_covariance(4, &[vec![1, 2, 3]], 0.9).unwrap();
    let data = gen_gaussian_from_covariance(&cov, 200, 310_001).unwrap();
    let config = TestConfig {
        permutations: 200,
        seed: 1,
        ..TestConfig::new(TestKind::ModifiedDhsic)
    };
    let report = run_test(&data, &config).unwrap();
    assert!(!report.composite_rejected);

    let true_split = Partition::from_blocks(4, &[vec![0], vec![1, 2, 3]]).unwrap();
    for sr in &report.sub_results {
        assert_eq!(sr.rejected, sr.partition != true_split, "{}", sr.partition);
    }

    let survivors = report.surviving_partitions.unwrap();
    assert_eq!(survivors.len(), 2, "{survivors:?}");
    assert!(survivors.contains(&Partition::one_block(4).unwrap()));
    assert!(survivors.contains(&true_split));

    // The interaction composite also declines: a factorisation exists,
    // so its own sub-null for the true split holds.
    let s_config = TestConfig {
        permutations: 60,
        seed: 7,
        ..TestConfig::new(TestKind::Streitberg)
    };
    assert!(!run_test(&data, &s_config).unwrap().composite_rejected);
}

/// The joint-independence test has power against plain pairwise
/// dependence and calibrates under the null.
#[test]
fn joint_independence_detects_dependence_and_calibrates() {
    let config = TestConfig {
        permutations: 60,
        ..TestConfig::new(TestKind::JointIndependence)
    };

    let base = gen_null(40, 2, 99).unwrap();
    let x: Vec<f64> = base.variable(0).values().iter().copied().collect();
    let dependent = Dataset::new(vec![
        VariableSamples::scalar("a", x.clone()).unwrap(),
        VariableSamples::scalar("b", x).unwrap(),
    ])
    .unwrap();
    let report = run_test(&dependent, &config).unwrap();
    assert!(report.composite_rejected);

    // Under the null, over repeated datasets, rejections stay near the
    // level; with 40 trials a rate above 0.25 would be far outside
    // Monte-Carlo noise for a calibrated 5% test.
    let mut rejections = 0;
    for t in 0..40 {
        let null = gen_null(24, 3, 7000 + t).unwrap();
        if run_test(&null, &config).unwrap().composite_rejected {
            rejections += 1;
        }
    }
    assert!(rejections <= 10, "{rejections} rejections in 40 null trials");
}
