//! V-statistic estimators of the interaction measures.
//!
//! Each measure is a squared norm of a signed combination of partition
//! embeddings, so its plug-in estimator is a signed sum of pairwise
//! embedding inner products evaluated on Gram matrices. The fast path
//! ([`EvalSession`]) factorises every inner product over the join of
//! the two partitions, contracts each factor with the cheapest
//! available strategy, and caches factor values so that permutation
//! replicates pay only for what a permutation actually changes.
//!
//! [`generic_norm`] is the deliberately naive alternative: it evaluates
//! the defining sums index tuple by index tuple. It exists to
//! cross-check the fast path and is guarded against large inputs.

use std::collections::HashMap;

use ndarray::Array2;

use crate::contraction::{factor_value, iter_bits, Stamp, Workspace};
use crate::error::Error;
use crate::kernel::GramSet;
use crate::lattice::{expansion_for, product_terms, LatticeKind, ProductTerm, SignedExpansion};
use crate::partition::Partition;
use crate::util::pairwise_sum;
use crate::{Result, MAX_FULL_LATTICE_STAT, MAX_VARIABLES};

/// Packs a partition's canonical block assignment into nibbles, for use
/// as a cache key (at most 12 variables, 4 bits each).
fn pack_partition(p: &Partition) -> u64 {
    let mut key = 0u64;
    for (i, &label) in p.assignment().iter().enumerate() {
        key |= (label as u64) << (4 * i);
    }
    key
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct FactorKey {
    vars: u16,
    left: u64,
    right: u64,
}

/// Cache of join-factor values keyed by the variables involved and the
/// two restricted partitions.
///
/// Entries carry the same validity stamps as the workspace memos:
/// factors that avoid every permuted variable survive across
/// permutation replicates, everything else is valid for one replicate.
#[derive(Default)]
pub struct InnerProductCache {
    entries: HashMap<FactorKey, (f64, Stamp)>,
    hits: u64,
    misses: u64,
}

impl InnerProductCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lookups answered from the cache.
    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// Lookups that had to be computed.
    pub fn misses(&self) -> u64 {
        self.misses
    }

    fn get(&mut self, ws: &Workspace, key: FactorKey) -> Option<f64> {
        if let Some(&(value, stamp)) = self.entries.get(&key) {
            if ws.is_valid(key.vars, stamp) {
                self.hits += 1;
                return Some(value);
            }
        }
        self.misses += 1;
        None
    }

    fn put(&mut self, ws: &Workspace, key: FactorKey, value: f64) {
        self.entries.insert(key, (value, ws.stamp_for(key.vars)));
    }
}

/// Gram matrices plus all memoized state needed to evaluate statistics
/// repeatedly, in particular across permutation replicates.
///
/// The matrices handed in are used as-is: pass centred grams for the
/// centred expansions (Streitberg, Lancaster) and uncentred ones for
/// joint independence.
pub struct EvalSession {
    ws: Workspace,
    cache: InnerProductCache,
}

impl EvalSession {
    pub fn new(grams: Vec<Array2<f64>>) -> Result<Self> {
        let d = grams.len();
        if !(2..=MAX_VARIABLES).contains(&d) {
            return Err(Error::DimensionOutOfRange {
                what: "evaluation session",
                d,
                min: 2,
                max: MAX_VARIABLES,
            });
        }
        let n = grams[0].nrows();
        if n == 0 {
            return Err(Error::Data("empty gram matrices".into()));
        }
        for g in &grams {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::Data(format!(
                    "gram matrix is {}x{}, expected {n}x{n}",
                    g.nrows(),
                    g.ncols()
                )));
            }
        }
        Ok(Self {
            ws: Workspace::new(grams),
            cache: InnerProductCache::new(),
        })
    }

    /// Session over a gram set, centred or uncentred.
    pub fn from_gram_set(grams: &GramSet, centred: bool) -> Result<Self> {
        let mats = if centred {
            grams.centred_grams().to_vec()
        } else {
            grams.grams().to_vec()
        };
        Self::new(mats)
    }

    pub fn d(&self) -> usize {
        self.ws.d()
    }

    pub fn n(&self) -> usize {
        self.ws.n()
    }

    /// (hits, misses) of the factor cache.
    pub fn cache_stats(&self) -> (u64, u64) {
        (self.cache.hits(), self.cache.misses())
    }

    fn vars_mask(&self, vars: &[usize]) -> Result<u16> {
        let mut mask = 0u16;
        for &v in vars {
            if v >= self.d() {
                return Err(Error::InvalidParameter(format!(
                    "variable index {v} out of range for {} variables",
                    self.d()
                )));
            }
            if mask & (1 << v) != 0 {
                return Err(Error::DuplicateElements);
            }
            mask |= 1 << v;
        }
        Ok(mask)
    }

    fn check_perm(&self, perm: &[usize]) -> Result<()> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::InvalidParameter(format!(
                "permutation has length {}, expected {n}",
                perm.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidParameter(
                    "index list is not a permutation".into(),
                ));
            }
            seen[p] = true;
        }
        Ok(())
    }

    /// Re-indexes the grams of `vars` by one shared sample permutation;
    /// in effect the samples of those variables are jointly shuffled
    /// against the remaining ones.
    pub fn permute(&mut self, vars: &[usize], perm: &[usize]) -> Result<()> {
        let mask = self.vars_mask(vars)?;
        self.check_perm(perm)?;
        self.ws.permute(mask, perm);
        Ok(())
    }

    /// Re-indexes each listed variable by its own permutation.
    pub fn permute_per_variable(&mut self, perms: &[(usize, Vec<usize>)]) -> Result<()> {
        let vars: Vec<usize> = perms.iter().map(|(v, _)| *v).collect();
        let mask = self.vars_mask(&vars)?;
        for (_, p) in perms {
            self.check_perm(p)?;
        }
        let by_var: HashMap<usize, &[usize]> =
            perms.iter().map(|(v, p)| (*v, p.as_slice())).collect();
        self.ws.permute_each(mask, |v| by_var[&v]);
        Ok(())
    }

    /// Restores the unpermuted grams.
    pub fn clear_permutation(&mut self) {
        self.ws.clear_permutation();
    }

    /// Inner product of two partition embeddings, factorised over their
    /// join and served from the factor cache where possible.
    pub fn inner_product(&mut self, left: &Partition, right: &Partition) -> Result<f64> {
        if left.d() != self.d() {
            return Err(Error::DimensionMismatch {
                left: self.d(),
                right: left.d(),
            });
        }
        let join = left.join(right)?;
        let mut result = 1.0;
        for jb in join.block_masks() {
            let vars: Vec<usize> = iter_bits(jb).collect();
            let lkey = pack_partition(&left.restrict(&vars));
            let rkey = pack_partition(&right.restrict(&vars));
            // The factor is symmetric in its two sides.
            let (lo, hi) = if lkey <= rkey {
                (lkey, rkey)
            } else {
                (rkey, lkey)
            };
            let key = FactorKey {
                vars: jb,
                left: lo,
                right: hi,
            };
            let value = match self.cache.get(&self.ws, key) {
                Some(v) => v,
                None => {
                    let lm = split_masks(left, jb);
                    let rm = split_masks(right, jb);
                    let v = factor_value(&mut self.ws, &lm, &rm);
                    self.cache.put(&self.ws, key, v);
                    v
                }
            };
            result *= value;
        }
        Ok(result)
    }

    /// Signed sum of inner products; the squared norm of an expansion
    /// when given its merged product terms.
    pub fn evaluate_terms(&mut self, terms: &[ProductTerm]) -> Result<f64> {
        let mut parts = Vec::with_capacity(terms.len());
        for t in terms {
            parts.push(t.coefficient as f64 * self.inner_product(&t.left, &t.right)?);
        }
        Ok(pairwise_sum(&parts))
    }
}

/// Blocks of a partition that live inside one join block, as variable
/// masks.
fn split_masks(part: &Partition, join_block: u16) -> Vec<u16> {
    part.block_masks()
        .into_iter()
        .filter(|m| m & join_block != 0)
        .collect()
}

/// How one join factor of an inner product will be contracted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContractionStrategy {
    /// One block on the smaller side: product of row-sum vectors.
    RowSums,
    /// Two blocks on the smaller side: paired matrix products.
    BlockMatmuls,
    /// Three or more blocks: direct sweep over index tuples.
    IndexSweep,
}

/// One irreducible factor of a planned contraction.
#[derive(Clone, Debug)]
pub struct PlanFactor {
    vars: Vec<usize>,
    left_blocks: usize,
    right_blocks: usize,
    strategy: ContractionStrategy,
    exponent: usize,
}

impl PlanFactor {
    /// Variables of the join block this factor covers.
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn left_blocks(&self) -> usize {
        self.left_blocks
    }

    pub fn right_blocks(&self) -> usize {
        self.right_blocks
    }

    pub fn strategy(&self) -> ContractionStrategy {
        self.strategy
    }

    /// The factor costs on the order of `n` to this power.
    pub fn exponent(&self) -> usize {
        self.exponent
    }
}

/// Evaluation plan for one embedding inner product: the factors induced
/// by the join of the two partitions, each with its strategy and cost.
#[derive(Clone, Debug)]
pub struct ContractionPlan {
    left: Partition,
    right: Partition,
    factors: Vec<PlanFactor>,
    cost_exponent: usize,
}

impl ContractionPlan {
    pub fn left(&self) -> &Partition {
        &self.left
    }

    pub fn right(&self) -> &Partition {
        &self.right
    }

    pub fn factors(&self) -> &[PlanFactor] {
        &self.factors
    }

    /// Power of `n` bounding the whole evaluation: the worst factor's
    /// exponent, `min(p, q) + 1` for that factor's block counts. Never
    /// exceeds `min(|left|, |right|) + 1`, with equality whenever the
    /// join is the one-block partition.
    pub fn cost_exponent(&self) -> usize {
        self.cost_exponent
    }

    /// Evaluates the planned inner product on a session's grams,
    /// bypassing the factor cache.
    pub fn evaluate(&self, session: &mut EvalSession) -> Result<f64> {
        if self.left.d() != session.d() {
            return Err(Error::DimensionMismatch {
                left: session.d(),
                right: self.left.d(),
            });
        }
        let mut result = 1.0;
        for f in &self.factors {
            let jb = f.vars.iter().fold(0u16, |m, &v| m | 1 << v);
            let lm = split_masks(&self.left, jb);
            let rm = split_masks(&self.right, jb);
            result *= factor_value(&mut session.ws, &lm, &rm);
        }
        Ok(result)
    }
}

/// Plans the contraction of the inner product of two partition
/// embeddings without touching any data.
pub fn plan_contraction(left: &Partition, right: &Partition) -> Result<ContractionPlan> {
    if left.d() != right.d() {
        return Err(Error::DimensionMismatch {
            left: left.d(),
            right: right.d(),
        });
    }
    let join = left.join(right)?;
    let mut factors = Vec::with_capacity(join.num_blocks());
    for jb in join.block_masks() {
        let p = split_masks(left, jb).len();
        let q = split_masks(right, jb).len();
        let small = p.min(q);
        let strategy = match small {
            1 => ContractionStrategy::RowSums,
            2 => ContractionStrategy::BlockMatmuls,
            _ => ContractionStrategy::IndexSweep,
        };
        factors.push(PlanFactor {
            vars: iter_bits(jb).collect(),
            left_blocks: p,
            right_blocks: q,
            strategy,
            exponent: small + 1,
        });
    }
    let cost_exponent = factors.iter().map(|f| f.exponent).max().unwrap_or(0);
    Ok(ContractionPlan {
        left: left.clone(),
        right: right.clone(),
        factors,
        cost_exponent,
    })
}

/// Lancaster interaction statistic: the mean of the entrywise product
/// of all centred grams.
pub fn lancaster_stat(grams: &GramSet) -> Result<f64> {
    let n = grams.n();
    let mats = grams.centred_grams();
    let mut row_totals = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let mut prod = 1.0;
            for m in mats {
                prod *= m[[i, j]];
            }
            row += prod;
        }
        row_totals.push(row);
    }
    Ok(pairwise_sum(&row_totals) / (n * n) as f64)
}

/// Streitberg interaction statistic: the squared norm of the centred
/// full-lattice expansion.
///
/// Worst-case cost is `n` to the power `b + 1`, where `b` is the
/// largest block count among singleton-free partitions (`d / 2`), so
/// the dimension is capped.
pub fn streitberg_stat(grams: &GramSet) -> Result<f64> {
    let d = grams.d();
    if d > MAX_FULL_LATTICE_STAT {
        return Err(Error::ResourceGuard(format!(
            "full-lattice statistic is limited to {MAX_FULL_LATTICE_STAT} variables, got {d}"
        )));
    }
    let expansion = expansion_for(&LatticeKind::Streitberg, d, true)?;
    let terms = product_terms(&expansion);
    let mut session = EvalSession::from_gram_set(grams, true)?;
    session.evaluate_terms(&terms)
}

/// [`streitberg_stat`] with every level of reuse disabled: each product
/// term is contracted through a fresh planner on a fresh workspace, so
/// nothing is shared between terms. Slow by design — it exists to check
/// that caching is value-transparent and to give benchmarks a baseline.
pub fn streitberg_stat_uncached(grams: &GramSet) -> Result<f64> {
    let d = grams.d();
    if d > MAX_FULL_LATTICE_STAT {
        return Err(Error::ResourceGuard(format!(
            "full-lattice statistic is limited to {MAX_FULL_LATTICE_STAT} variables, got {d}"
        )));
    }
    let expansion = expansion_for(&LatticeKind::Streitberg, d, true)?;
    let terms = product_terms(&expansion);
    let mut values = Vec::with_capacity(terms.len());
    for term in &terms {
        let plan = plan_contraction(&term.left, &term.right)?;
        let mut session = EvalSession::from_gram_set(grams, true)?;
        values.push(term.coefficient as f64 * plan.evaluate(&mut session)?);
    }
    Ok(pairwise_sum(&values))
}

/// Joint-independence (dHSIC) statistic on uncentred grams:
/// `T1 + T2 - T3` with `T1` the mean of the entrywise product, `T2`
/// the product of the gram means, and `T3` twice the mean over samples
/// of the product of row means.
pub fn joint_independence_stat(grams: &GramSet) -> Result<f64> {
    let n = grams.n();
    let mats = grams.grams();
    let nf = n as f64;

    let mut t1_rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let mut prod = 1.0;
            for m in mats {
                prod *= m[[i, j]];
            }
            row += prod;
        }
        t1_rows.push(row);
    }
    let t1 = pairwise_sum(&t1_rows) / (nf * nf);

    let mut t2 = 1.0;
    for m in mats {
        t2 *= m.sum() / (nf * nf);
    }

    let mut t3_terms = Vec::with_capacity(n);
    for i in 0..n {
        let mut prod = 1.0;
        for m in mats {
            prod *= m.row(i).sum() / nf;
        }
        t3_terms.push(prod);
    }
    let t3 = 2.0 * pairwise_sum(&t3_terms) / nf;

    Ok(t1 + t2 - t3)
}

/// Squared norm of an arbitrary signed expansion, evaluated directly
/// from the defining sums with no factorisation or caching. Intended as
/// a slow reference: inputs are rejected when the dominant pair would
/// need more than `10^8` products.
pub fn generic_norm(grams: &GramSet, expansion: &SignedExpansion) -> Result<f64> {
    if expansion.d() != grams.d() {
        return Err(Error::DimensionMismatch {
            left: grams.d(),
            right: expansion.d(),
        });
    }
    if expansion.is_empty() {
        return Ok(0.0);
    }
    let n = grams.n();
    let max_blocks = expansion.max_blocks();
    let cost = (n as f64).powi(2 * max_blocks as i32);
    if cost > 1e8 {
        return Err(Error::ResourceGuard(format!(
            "direct norm would sweep ~{cost:.1e} index tuples (limit 1e8); \
             use the factorized estimators"
        )));
    }
    let mats = if expansion.is_centred() {
        grams.centred_grams()
    } else {
        grams.grams()
    };
    let terms = expansion.terms();
    let mut parts = Vec::new();
    for (s, (cs, ps)) in terms.iter().enumerate() {
        for (ct, pt) in &terms[s..] {
            let merge = if ps == pt { 1.0 } else { 2.0 };
            parts.push(merge * (cs * ct) as f64 * sweep_inner(mats, ps, pt));
        }
    }
    Ok(pairwise_sum(&parts))
}

/// Definitional inner product: one index per block on each side, full
/// sweep over all tuples.
fn sweep_inner(mats: &[Array2<f64>], left: &Partition, right: &Partition) -> f64 {
    let n = mats[0].nrows();
    let d = left.d();
    let p = left.num_blocks();
    let q = right.num_blocks();
    let mut idx = vec![0usize; p + q];
    let mut total = 0.0;
    loop {
        let mut prod = 1.0;
        for (v, m) in mats.iter().enumerate().take(d) {
            prod *= m[[idx[left.block_of(v)], idx[p + right.block_of(v)]]];
        }
        total += prod;
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == p + q {
                return total / (n as f64).powi((p + q) as i32);
            }
        }
    }
}
