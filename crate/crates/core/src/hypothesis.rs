//! Composite permutation tests for factorisation and joint independence.
//!
//! The composite null "the joint law factorises in some way" is the
//! union of one sub-null per two-block factorisation; it is rejected
//! only when **every** sub-null is rejected. Each sub-null "the two
//! blocks are independent" is tested by a Monte-Carlo permutation test:
//! the samples of the smaller block are re-indexed by a fresh random
//! permutation, shared by all variables of that block so that
//! within-block dependence survives while cross-block dependence is
//! destroyed — exactly the law the sub-null asserts. The single
//! joint-independence hypothesis instead permutes every variable but
//! the first independently, which induces the fully factorised law.
//!
//! All randomness flows through counter-based streams keyed by
//! `(seed, sub-test, replicate)`, so a report is a pure function of
//! the data and its [`TestConfig`] and partial runs agree with full
//! runs wherever they overlap.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimator::EvalSession;
use crate::kernel::{block_kernel, Dataset, GramSet};
use crate::lattice::{
    expansion_for, product_terms, prune_candidates, second_level, LatticeKind, ProductTerm,
};
use crate::partition::Partition;
use crate::streams::{derive_seed, replicate_rng};
use crate::{Result, MAX_FULL_LATTICE_STAT};

/// Which test to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    /// Composite factorisation test over every two-block partition,
    /// driven by the full-lattice interaction statistic.
    Streitberg,
    /// Composite test over the singleton two-block partitions, driven
    /// by the top-partition interaction statistic.
    Lancaster,
    /// The single joint-independence hypothesis (dHSIC statistic by
    /// default; see [`joint_independence_test`] for other statistics).
    JointIndependence,
    /// Baseline composite that tests each two-block partition with a
    /// two-variable dHSIC between the merged block kernels.
    ModifiedDhsic,
}

/// Which interaction measure drives the permutation distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Dhsic,
    Lancaster,
    Streitberg,
}

/// Multiplicity handling for the per-sub-test rejection level.
///
/// The composite decision is an intersection test — it rejects only
/// when every sub-test rejects — so running each sub-test at the full
/// level `alpha` already keeps the composite level at or below `alpha`.
/// [`Correction::None`] is therefore the default; Bonferroni division
/// is available for callers who also want family-wise control over the
/// individual sub-test decisions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    #[default]
    None,
    Bonferroni,
}

/// Parameters shared by every test in this module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub kind: TestKind,
    /// Rejection level of the composite decision, in `(0, 1)`.
    pub alpha: f64,
    /// Monte-Carlo replicates per sub-test; at least 20. The smallest
    /// attainable p-value is `1 / (permutations + 1)`.
    pub permutations: usize,
    pub seed: u64,
    /// Stop after the first non-rejected sub-test. The composite
    /// decision is unchanged (it is already determined); only the
    /// remaining sub-test diagnostics are skipped.
    pub early_exit: bool,
    pub correction: Correction,
}

impl TestConfig {
    /// A config with conventional defaults: `alpha` 0.05, 500
    /// permutations, seed 0, full runs, no correction.
    pub fn new(kind: TestKind) -> Self {
        Self {
            kind,
            alpha: 0.05,
            permutations: 500,
            seed: 0,
            early_exit: false,
            correction: Correction::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie strictly between 0 and 1, got {}",
                self.alpha
            )));
        }
        if self.permutations < 20 {
            return Err(Error::InvalidParameter(format!(
                "at least 20 permutations are needed for a meaningful p-value, got {}",
                self.permutations
            )));
        }
        Ok(())
    }

    fn corrected_level(&self, subtests: usize) -> f64 {
        match self.correction {
            Correction::None => self.alpha,
            Correction::Bonferroni => self.alpha / subtests as f64,
        }
    }
}

/// Outcome of one sub-hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubTestResult {
    /// The two-block partition tested (all singletons for the joint-
    /// independence hypothesis).
    pub partition: Partition,
    /// The variables whose samples were re-indexed in each replicate.
    pub permuted_block: Vec<usize>,
    /// Observed statistic the permutation distribution is compared to.
    pub statistic: f64,
    /// Monte-Carlo p-value, in `[1/(P+1), 1]`.
    pub p_value: f64,
    pub rejected: bool,
}

/// Full outcome of a test run, serializable as a stable JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    /// The measure that drove the permutation distributions (for
    /// [`TestKind::ModifiedDhsic`], the per-pair dHSIC).
    pub statistic: Statistic,
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    pub correction: Correction,
    /// Level each sub-test was compared against after correction.
    pub corrected_level: f64,
    pub permutations: usize,
    pub seed: u64,
    pub early_exit: bool,
    /// The statistic of the composite measure on the unpermuted data;
    /// absent for [`TestKind::ModifiedDhsic`], whose sub-tests have no
    /// shared statistic.
    pub observed_statistic: Option<f64>,
    /// True exactly when every sub-hypothesis ran and was rejected.
    pub composite_rejected: bool,
    pub sub_results: Vec<SubTestResult>,
    /// Factorisation candidates not ruled out by the rejected
    /// sub-hypotheses: a partition survives unless it refines a
    /// rejected two-block partition. Filled only when every sub-test
    /// ran and the lattice is small enough to enumerate (d ≤ 8).
    pub surviving_partitions: Option<Vec<Partition>>,
}

/// Computes Gaussian-kernel grams with median-heuristic bandwidths and
/// runs the configured test.
pub fn run_test(data: &Dataset, config: &TestConfig) -> Result<TestReport> {
    let grams = GramSet::gaussian(data)?;
    run_test_on_grams(&grams, config)
}

/// Runs the configured test on precomputed gram matrices.
pub fn run_test_on_grams(grams: &GramSet, config: &TestConfig) -> Result<TestReport> {
    config.validate()?;
    match config.kind {
        TestKind::JointIndependence => {
            joint_independence_test(grams, Statistic::Dhsic, config)
        }
        TestKind::Streitberg | TestKind::Lancaster | TestKind::ModifiedDhsic => {
            composite_test(grams, config)
        }
    }
}

/// Tests the single hypothesis of joint independence of all variables,
/// using any of the three interaction measures as the test statistic.
///
/// Each replicate independently permutes every variable except the
/// first; `config.kind` is ignored and the report's kind is always
/// [`TestKind::JointIndependence`].
pub fn joint_independence_test(
    grams: &GramSet,
    statistic: Statistic,
    config: &TestConfig,
) -> Result<TestReport> {
    config.validate()?;
    let (d, n) = (grams.d(), grams.n());
    let corrected = config.corrected_level(1);
    let seed = derive_seed(
        config.seed,
        stream_tag(TestKind::JointIndependence, statistic),
    );

    let mut engine = Engine::new(grams, statistic)?;
    let observed = engine.observed()?;
    let mut exceed = 0usize;
    let mut perms: Vec<(usize, Vec<usize>)> = (1..d).map(|v| (v, Vec::new())).collect();
    for r in 0..config.permutations {
        let mut rng = replicate_rng(seed, 0, r as u32);
        for (_, perm) in perms.iter_mut() {
            *perm = random_permutation(n, &mut rng);
        }
        if engine.permuted_per_variable(&perms)? >= observed {
            exceed += 1;
        }
    }

    let p_value = mc_p_value(exceed, config.permutations);
    let rejected = p_value <= corrected;
    let partition = Partition::singletons(d)?;
    let surviving = if d <= MAX_FULL_LATTICE_STAT {
        let ruled_out: &[Partition] = if rejected {
            std::slice::from_ref(&partition)
        } else {
            &[]
        };
        Some(prune_candidates(ruled_out, d)?)
    } else {
        None
    };
    Ok(TestReport {
        kind: TestKind::JointIndependence,
        statistic,
        d,
        n,
        alpha: config.alpha,
        correction: config.correction,
        corrected_level: corrected,
        permutations: config.permutations,
        seed: config.seed,
        early_exit: config.early_exit,
        observed_statistic: Some(observed),
        composite_rejected: rejected,
        sub_results: vec![SubTestResult {
            partition,
            permuted_block: (1..d).collect(),
            statistic: observed,
            p_value,
            rejected,
        }],
        surviving_partitions: surviving,
    })
}

fn composite_test(grams: &GramSet, config: &TestConfig) -> Result<TestReport> {
    let (d, n) = (grams.d(), grams.n());
    let statistic = match config.kind {
        TestKind::Streitberg => Statistic::Streitberg,
        TestKind::Lancaster => Statistic::Lancaster,
        TestKind::ModifiedDhsic => Statistic::Dhsic,
        TestKind::JointIndependence => unreachable!("handled by run_test_on_grams"),
    };
    let sub_lattice = match config.kind {
        TestKind::Lancaster => LatticeKind::Lancaster,
        _ => LatticeKind::Streitberg,
    };
    let bipartitions = second_level(&sub_lattice, d)?;
    let m = bipartitions.len();
    let corrected = config.corrected_level(m);
    let seed = derive_seed(config.seed, stream_tag(config.kind, statistic));

    // The full-lattice and top-partition statistics are properties of
    // the whole dataset: one engine and one observed value serve every
    // sub-test. The modified-dHSIC baseline instead builds a fresh
    // two-variable problem per bipartition.
    let mut shared = match config.kind {
        TestKind::ModifiedDhsic => None,
        _ => {
            let mut engine = Engine::new(grams, statistic)?;
            let observed = engine.observed()?;
            Some((engine, observed))
        }
    };

    let mut sub_results: Vec<SubTestResult> = Vec::with_capacity(m);
    for (s, bipart) in bipartitions.iter().enumerate() {
        let (observed, permuted_block, exceed) = match &mut shared {
            Some((engine, observed)) => {
                let block = smaller_block(bipart);
                let mut exceed = 0usize;
                for r in 0..config.permutations {
                    let mut rng = replicate_rng(seed, s as u32, r as u32);
                    let perm = random_permutation(n, &mut rng);
                    if engine.permuted(&block, &perm)? >= *observed {
                        exceed += 1;
                    }
                }
                engine.clear();
                (*observed, block, exceed)
            }
            None => {
                let blocks = bipart.blocks();
                let pair = GramSet::from_grams(vec![
                    block_kernel(grams, &blocks[0])?,
                    block_kernel(grams, &blocks[1])?,
                ])?;
                let mut engine = Engine::new(&pair, Statistic::Dhsic)?;
                let observed = engine.observed()?;
                let mut exceed = 0usize;
                for r in 0..config.permutations {
                    let mut rng = replicate_rng(seed, s as u32, r as u32);
                    let perm = random_permutation(n, &mut rng);
                    // The second block plays the role of the permuted
                    // variable of a two-variable independence test.
                    if engine.permuted(&[1], &perm)? >= observed {
                        exceed += 1;
                    }
                }
                (observed, blocks[1].clone(), exceed)
            }
        };

        let p_value = mc_p_value(exceed, config.permutations);
        let rejected = p_value <= corrected;
        sub_results.push(SubTestResult {
            partition: bipart.clone(),
            permuted_block,
            statistic: observed,
            p_value,
            rejected,
        });
        if !rejected && config.early_exit {
            break;
        }
    }

    let completed_all = sub_results.len() == m;
    let composite_rejected = completed_all && sub_results.iter().all(|sr| sr.rejected);
    let surviving_partitions = if completed_all && d <= MAX_FULL_LATTICE_STAT {
        let ruled_out: Vec<Partition> = sub_results
            .iter()
            .filter(|sr| sr.rejected)
            .map(|sr| sr.partition.clone())
            .collect();
        Some(prune_candidates(&ruled_out, d)?)
    } else {
        None
    };
    Ok(TestReport {
        kind: config.kind,
        statistic,
        d,
        n,
        alpha: config.alpha,
        correction: config.correction,
        corrected_level: corrected,
        permutations: config.permutations,
        seed: config.seed,
        early_exit: config.early_exit,
        observed_statistic: shared.map(|(_, observed)| observed),
        composite_rejected,
        sub_results,
        surviving_partitions,
    })
}

/// One statistic evaluator bound to a set of grams. All three measures
/// reduce to a signed sum of embedding inner products, so a single
/// session-backed engine serves every kind and keeps its memoized
/// pieces valid across permutation replicates.
struct Engine {
    session: EvalSession,
    terms: Vec<ProductTerm>,
}

impl Engine {
    fn new(grams: &GramSet, statistic: Statistic) -> Result<Self> {
        let d = grams.d();
        let (centred, terms) = match statistic {
            Statistic::Streitberg => {
                if d > MAX_FULL_LATTICE_STAT {
                    return Err(Error::ResourceGuard(format!(
                        "full-lattice statistic is limited to {MAX_FULL_LATTICE_STAT} \
                         variables, got {d}"
                    )));
                }
                let expansion = expansion_for(&LatticeKind::Streitberg, d, true)?;
                (true, product_terms(&expansion))
            }
            Statistic::Lancaster => {
                let expansion = expansion_for(&LatticeKind::Lancaster, d, true)?;
                (true, product_terms(&expansion))
            }
            Statistic::Dhsic => {
                let expansion = expansion_for(&LatticeKind::JointIndependence, d, false)?;
                (false, product_terms(&expansion))
            }
        };
        Ok(Self {
            session: EvalSession::from_gram_set(grams, centred)?,
            terms,
        })
    }

    fn observed(&mut self) -> Result<f64> {
        self.session.clear_permutation();
        self.session.evaluate_terms(&self.terms)
    }

    fn permuted(&mut self, vars: &[usize], perm: &[usize]) -> Result<f64> {
        self.session.permute(vars, perm)?;
        self.session.evaluate_terms(&self.terms)
    }

    fn permuted_per_variable(&mut self, perms: &[(usize, Vec<usize>)]) -> Result<f64> {
        self.session.permute_per_variable(perms)?;
        self.session.evaluate_terms(&self.terms)
    }

    fn clear(&mut self) {
        self.session.clear_permutation();
    }
}

/// The block whose samples get permuted: the smaller side, with ties
/// going to the side containing the lowest variable index. `blocks()`
/// lists the block of variable 0 first, so ties pick `blocks()[0]`.
fn smaller_block(bipartition: &Partition) -> Vec<usize> {
    let mut blocks = bipartition.blocks();
    debug_assert_eq!(blocks.len(), 2);
    let b1 = blocks.pop().unwrap();
    let b0 = blocks.pop().unwrap();
    if b0.len() <= b1.len() {
        b0
    } else {
        b1
    }
}

fn mc_p_value(exceed: usize, permutations: usize) -> f64 {
    (exceed + 1) as f64 / (permutations + 1) as f64
}

fn random_permutation(n: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Stable stream separation between test kinds and statistics sharing
/// one user seed.
fn stream_tag(kind: TestKind, statistic: Statistic) -> u64 {
    let k = match kind {
        TestKind::Streitberg => 1u64,
        TestKind::Lancaster => 2,
        TestKind::JointIndependence => 3,
        TestKind::ModifiedDhsic => 4,
    };
    let s = match statistic {
        Statistic::Dhsic => 1u64,
        Statistic::Lancaster => 2,
        Statistic::Streitberg => 3,
    };
    (k << 8) | s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::VariableSamples;
    use crate::synth::gen_null;

    fn quick_config(kind: TestKind, permutations: usize, seed: u64) -> TestConfig {
        TestConfig {
            permutations,
            seed,
            ..TestConfig::new(kind)
        }
    }

    /// Three exact copies of one uniform variable: every bipartition
    /// splits two copies apart, so all factorisation sub-nulls are
    /// false.
    fn copied_variable_data(n: usize, seed: u64) -> Dataset {
        let base = gen_null(n, 2, seed).unwrap();
        let x: Vec<f64> = base.variable(0).values().iter().copied().collect();
        Dataset::new(vec![
            VariableSamples::scalar("x", x.clone()).unwrap(),
            VariableSamples::scalar("y", x.clone()).unwrap(),
            VariableSamples::scalar("z", x).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn config_validation_enforces_bounds() {
        let mut config = TestConfig::new(TestKind::Lancaster);
        assert!(config.validate().is_ok());
        config.alpha = 0.0;
        assert!(config.validate().is_err());
        config.alpha = 1.0;
        assert!(config.validate().is_err());
        config.alpha = 0.05;
        config.permutations = 19;
        assert!(config.validate().is_err());
        config.permutations = 20;
        assert!(config.validate().is_ok());
    }

    #[test]
    fn sub_test_counts_follow_the_kind() {
        let data = gen_null(12, 4, 1).unwrap();
        for (kind, expect) in [
            (TestKind::Streitberg, 7usize),
            (TestKind::Lancaster, 4),
            (TestKind::ModifiedDhsic, 7),
            (TestKind::JointIndependence, 1),
        ] {
            let report = run_test(&data, &quick_config(kind, 20, 0)).unwrap();
            assert_eq!(report.sub_results.len(), expect, "{kind:?}");
            assert_eq!(report.d, 4);
            assert_eq!(report.n, 12);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let data = gen_null(14, 3, 2).unwrap();
        let config = quick_config(TestKind::Streitberg, 25, 7);
        let a = run_test(&data, &config).unwrap();
        let b = run_test(&data, &config).unwrap();
        assert_eq!(a, b);
        let c = run_test(&data, &quick_config(TestKind::Streitberg, 25, 8)).unwrap();
        assert!(
            a.sub_results.iter().zip(&c.sub_results).any(|(x, y)| x.p_value != y.p_value)
                || a.composite_rejected != c.composite_rejected
                || a == c, // seeds may tie on tiny data, but never by stream reuse
        );
    }

    #[test]
    fn p_values_stay_in_monte_carlo_range() {
        let data = gen_null(12, 4, 3).unwrap();
        for kind in [
            TestKind::Streitberg,
            TestKind::Lancaster,
            TestKind::ModifiedDhsic,
            TestKind::JointIndependence,
        ] {
            let report = run_test(&data, &quick_config(kind, 24, 1)).unwrap();
            for sr in &report.sub_results {
                assert!(sr.p_value >= 1.0 / 25.0 && sr.p_value <= 1.0);
            }
        }
    }

    #[test]
    fn constant_data_gives_p_value_one() {
        // Constant variables have zero-variance grams: the statistic
        // and every permuted statistic are identical, so the p-value
        // hits the upper boundary exactly.
        let data = Dataset::new(vec![
            VariableSamples::scalar("a", vec![1.0; 10]).unwrap(),
            VariableSamples::scalar("b", vec![2.0; 10]).unwrap(),
            VariableSamples::scalar("c", vec![3.0; 10]).unwrap(),
        ])
        .unwrap();
        for kind in [TestKind::Streitberg, TestKind::JointIndependence] {
            let report = run_test(&data, &quick_config(kind, 30, 0)).unwrap();
            for sr in &report.sub_results {
                assert_eq!(sr.p_value, 1.0);
                assert!(!sr.rejected);
            }
            assert!(!report.composite_rejected);
        }
    }

    #[test]
    fn copied_variable_rejects_all_bipartitions() {
        let data = copied_variable_data(40, 5);
        let report = run_test(&data, &quick_config(TestKind::Streitberg, 60, 0)).unwrap();
        assert!(report.composite_rejected);
        assert!(report.sub_results.iter().all(|sr| sr.rejected));
        // Every proper factorisation refines a rejected bipartition,
        // so only the trivial no-factorisation candidate survives.
        assert_eq!(
            report.surviving_partitions.as_deref(),
            Some(&[Partition::one_block(3).unwrap()][..])
        );
    }

    #[test]
    fn early_exit_agrees_with_the_full_run() {
        for (data, seed) in [
            (gen_null(16, 3, 11), 0u64),
            (Ok(copied_variable_data(24, 6)), 1),
        ] {
            let data = data.unwrap();
            let full = quick_config(TestKind::Streitberg, 30, seed);
            let eager = TestConfig {
                early_exit: true,
                ..full.clone()
            };
            let full = run_test(&data, &full).unwrap();
            let eager = run_test(&data, &eager).unwrap();
            assert_eq!(full.composite_rejected, eager.composite_rejected);
            // The sub-tests that did run saw identical streams.
            for (a, b) in eager.sub_results.iter().zip(&full.sub_results) {
                assert_eq!(a.p_value, b.p_value);
                assert_eq!(a.statistic, b.statistic);
            }
            if !eager.composite_rejected {
                assert!(eager.sub_results.len() <= full.sub_results.len());
            }
        }
    }

    #[test]
    fn modified_dhsic_permutes_the_complement_of_variable_zero() {
        let data = gen_null(12, 4, 4).unwrap();
        let report = run_test(&data, &quick_config(TestKind::ModifiedDhsic, 20, 0)).unwrap();
        assert_eq!(report.observed_statistic, None);
        assert_eq!(report.statistic, Statistic::Dhsic);
        for sr in &report.sub_results {
            assert!(!sr.permuted_block.contains(&0));
            let blocks = sr.partition.blocks();
            assert_eq!(sr.permuted_block, blocks[1]);
        }
    }

    #[test]
    fn joint_independence_runs_one_sub_test() {
        let grams = GramSet::gaussian(&gen_null(15, 4, 9).unwrap()).unwrap();
        let config = quick_config(TestKind::JointIndependence, 20, 0);
        for statistic in [Statistic::Dhsic, Statistic::Lancaster, Statistic::Streitberg] {
            let report = joint_independence_test(&grams, statistic, &config).unwrap();
            assert_eq!(report.sub_results.len(), 1);
            assert_eq!(report.statistic, statistic);
            let sr = &report.sub_results[0];
            assert_eq!(sr.partition, Partition::singletons(4).unwrap());
            assert_eq!(sr.permuted_block, vec![1, 2, 3]);
            assert_eq!(report.observed_statistic, Some(sr.statistic));
        }
    }

    #[test]
    fn bonferroni_divides_the_level() {
        let data = gen_null(12, 4, 12).unwrap();
        let config = TestConfig {
            correction: Correction::Bonferroni,
            ..quick_config(TestKind::Streitberg, 20, 0)
        };
        let report = run_test(&data, &config).unwrap();
        assert!((report.corrected_level - 0.05 / 7.0).abs() < 1e-15);
        let plain = run_test(&data, &quick_config(TestKind::Streitberg, 20, 0)).unwrap();
        assert_eq!(plain.corrected_level, 0.05);
    }

    #[test]
    fn reports_serialize_round_trip() {
        let data = gen_null(12, 3, 13).unwrap();
        let report = run_test(&data, &quick_config(TestKind::Lancaster, 20, 0)).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: TestReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }
}
