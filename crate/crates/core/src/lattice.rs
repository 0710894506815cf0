//! The partition lattice and the signed expansions built on it.
//!
//! Partitions of `{0, .., d-1}` ordered by refinement form a lattice.
//! Each interaction measure corresponds to a choice of sublattice and a
//! signed combination of partition embeddings obtained by Moebius
//! inversion on it:
//!
//! * joint independence uses only the top and bottom elements,
//! * Lancaster uses partitions with at most one non-singleton block,
//! * Streitberg uses the full lattice,
//! * intervals `[lower, upper]` generalise Streitberg to factorisations
//!   finer than a fixed partition.
//!
//! Expansions come in an uncentred form (coefficients sum to zero) and a
//! centred form in which kernel centring has already cancelled every
//! partition with a singleton block.

use std::collections::HashSet;

use crate::error::Error;
use crate::partition::Partition;
use crate::{Result, MAX_VARIABLES};

/// Which sublattice a measure, expansion, or test is built on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LatticeKind {
    /// Full partition lattice; the measure vanishes iff the joint
    /// distribution factorises across any two-block split.
    Streitberg,
    /// Partitions with at most one non-singleton block; the measure
    /// vanishes if any single variable is independent of the rest.
    Lancaster,
    /// Top and bottom only; the measure compares the joint against the
    /// product of marginals.
    JointIndependence,
    /// All partitions between `lower` and `upper` in refinement order.
    Interval { lower: Partition, upper: Partition },
}

/// A signed integer combination of partitions, the algebraic form of an
/// interaction measure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedExpansion {
    d: usize,
    centred: bool,
    terms: Vec<(i64, Partition)>,
}

impl SignedExpansion {
    /// Builds an expansion from explicit terms, checking that the
    /// partitions are distinct and share the same number of variables.
    pub fn new(d: usize, centred: bool, terms: Vec<(i64, Partition)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (_, part) in &terms {
            if part.d() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: part.d(),
                });
            }
            if !seen.insert(part.clone()) {
                return Err(Error::DuplicateElements);
            }
        }
        Ok(Self { d, centred, terms })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// True when kernel centring has already been folded in; such an
    /// expansion must be evaluated on centred Gram matrices.
    pub fn is_centred(&self) -> bool {
        self.centred
    }

    pub fn terms(&self) -> &[(i64, Partition)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of the coefficients; zero for every uncentred inversion.
    pub fn coefficient_sum(&self) -> i64 {
        self.terms.iter().map(|(c, _)| c).sum()
    }

    /// Largest block count among the partitions in the expansion.
    pub fn max_blocks(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, p)| p.num_blocks())
            .max()
            .unwrap_or(0)
    }
}

/// One merged term of a squared-norm evaluation: `coefficient` times the
/// inner product of the embeddings of `left` and `right`. Off-diagonal
/// pairs carry doubled coefficients because the two orders are merged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductTerm {
    pub coefficient: i64,
    pub left: Partition,
    pub right: Partition,
}

fn check_d(d: usize, min: usize, what: &'static str) -> Result<()> {
    if d < min || d > MAX_VARIABLES {
        return Err(Error::DimensionOutOfRange {
            what,
            d,
            min,
            max: MAX_VARIABLES,
        });
    }
    Ok(())
}

/// Number of partitions of a `d`-element set.
pub fn bell_number(d: usize) -> Result<u64> {
    check_d(d, 1, "bell number")?;
    // Bell triangle: row r starts with the last entry of row r-1, and
    // the Bell number for r+1 elements is the last entry of row r.
    let mut row = vec![1u64];
    for _ in 1..d {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    Ok(*row.last().unwrap())
}

/// Number of partitions of a `d`-element set with no singleton block,
/// by inclusion-exclusion over which elements are forced into
/// singletons.
pub fn no_singleton_count(d: usize) -> Result<u64> {
    check_d(d, 1, "no-singleton count")?;
    let mut total: i128 = 0;
    let mut binom: i128 = 1;
    for k in 0..=d {
        let bell = if d == k { 1 } else { bell_number(d - k)? as i128 };
        let sign = if k % 2 == 0 { 1 } else { -1 };
        total += sign * binom * bell;
        binom = binom * (d as i128 - k as i128) / (k as i128 + 1);
    }
    Ok(total as u64)
}

/// All partitions of `{0, .., d-1}`, ordered with finer partitions first
/// (descending block count, then lexicographic on the block lists).
pub fn enumerate_partitions(d: usize) -> Result<Vec<Partition>> {
    check_d(d, 1, "partition enumeration")?;
    let mut out = Vec::with_capacity(bell_number(d)? as usize);
    // Restricted growth strings: a[0] = 0 and a[i] <= max(a[..i]) + 1.
    let mut a = vec![0u8; d];
    let mut m = vec![0u8; d];
    loop {
        out.push(Partition::from_canonical(a.clone(), m[d - 1] + 1));
        let mut i = d - 1;
        loop {
            if i == 0 {
                out.sort_by_cached_key(|p| p.canonical_key());
                return Ok(out);
            }
            if a[i] <= m[i - 1] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        m[i] = m[i - 1].max(a[i]);
        for j in i + 1..d {
            a[j] = 0;
            m[j] = m[j - 1];
        }
    }
}

/// All partitions of `{0, .., d-1}` with no singleton block, in
/// enumeration order.
pub fn enumerate_no_singleton(d: usize) -> Result<Vec<Partition>> {
    check_d(d, 2, "no-singleton enumeration")?;
    Ok(enumerate_partitions(d)?
        .into_iter()
        .filter(|p| !p.has_singleton())
        .collect())
}

fn validate_elements(elements: &[Partition]) -> Result<usize> {
    let d = match elements.first() {
        Some(p) => p.d(),
        None => return Ok(0),
    };
    let mut seen = HashSet::with_capacity(elements.len());
    for p in elements {
        if p.d() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: p.d(),
            });
        }
        if !seen.insert(p.clone()) {
            return Err(Error::DuplicateElements);
        }
    }
    Ok(d)
}

/// Zeta matrix of a set of partitions: `z[i][j] = 1` iff
/// `elements[i]` refines `elements[j]`.
pub fn zeta_matrix(elements: &[Partition]) -> Result<Vec<Vec<i64>>> {
    validate_elements(elements)?;
    let m = elements.len();
    let mut z = vec![vec![0i64; m]; m];
    for i in 0..m {
        for j in 0..m {
            if elements[i].refines(&elements[j])? {
                z[i][j] = 1;
            }
        }
    }
    Ok(z)
}

/// Moebius matrix of a set of partitions under refinement, the exact
/// integer inverse of the zeta matrix.
///
/// Computed by the interval recursion: `mu(s, s) = 1` and
/// `mu(s, p) = -sum of mu(s, r)` over `s <= r < p`. The recursion uses
/// only the order relation among the given elements, so it yields the
/// Moebius function of exactly the sublattice passed in.
pub fn mobius_matrix(elements: &[Partition]) -> Result<Vec<Vec<i64>>> {
    validate_elements(elements)?;
    let m = elements.len();
    let zeta = zeta_matrix(elements)?;
    // Refinement strictly decreases nothing and strictly increases block
    // count only for distinct partitions, so sorting by descending block
    // count is a linear extension of the order.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(elements[i].num_blocks()));
    let mut mu = vec![vec![0i64; m]; m];
    for oi in 0..m {
        let i = order[oi];
        mu[i][i] = 1;
        for oj in oi + 1..m {
            let j = order[oj];
            if zeta[i][j] == 0 {
                continue;
            }
            let mut sum = 0i64;
            for &k in &order[oi..oj] {
                if zeta[i][k] == 1 && zeta[k][j] == 1 {
                    sum += mu[i][k];
                }
            }
            mu[i][j] = -sum;
        }
    }
    Ok(mu)
}

fn factorial(k: usize) -> i64 {
    (1..=k as i64).product()
}

/// Moebius coefficient of a partition against the top of the full
/// lattice: `(-1)^(b-1) * (b-1)!` for `b` blocks.
pub fn top_coefficient(num_blocks: usize) -> i64 {
    let sign = if (num_blocks - 1) % 2 == 0 { 1 } else { -1 };
    sign * factorial(num_blocks - 1)
}

/// Elements of the sublattice a measure kind is built on, in enumeration
/// order.
pub fn lattice_elements(kind: &LatticeKind, d: usize) -> Result<Vec<Partition>> {
    check_d(d, 2, "lattice elements")?;
    match kind {
        LatticeKind::Streitberg => enumerate_partitions(d),
        LatticeKind::Lancaster => {
            let mut out = vec![Partition::singletons(d)?];
            // One block S with |S| >= 2, everything else singletons.
            for mask in 0u32..(1 << d) {
                if (mask.count_ones() as usize) < 2 {
                    continue;
                }
                let assign: Vec<usize> = (0..d)
                    .map(|v| if mask & (1 << v) != 0 { d } else { v })
                    .collect();
                out.push(Partition::from_assignment(&assign)?);
            }
            out.sort_by_cached_key(|p| p.canonical_key());
            Ok(out)
        }
        LatticeKind::JointIndependence => {
            Ok(vec![Partition::singletons(d)?, Partition::one_block(d)?])
        }
        LatticeKind::Interval { lower, upper } => {
            if lower.d() != d || upper.d() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: if lower.d() != d { lower.d() } else { upper.d() },
                });
            }
            if !lower.refines(upper)? {
                return Err(Error::InvalidPartition(format!(
                    "interval bounds out of order: {lower} does not refine {upper}"
                )));
            }
            Ok(enumerate_partitions(d)?
                .into_iter()
                .filter(|p| lower.refines(p).unwrap() && p.refines(upper).unwrap())
                .collect())
        }
    }
}

/// Signed expansion of an interaction measure over its sublattice.
///
/// Uncentred expansions express the measure in raw partition embeddings
/// and always have coefficients summing to zero. Centred expansions fold
/// kernel centring in: every partition with a singleton block drops out,
/// which shrinks the Streitberg expansion dramatically and reduces
/// Lancaster to the single top term. Joint independence has no centred
/// form; its estimator works on uncentred matrices.
pub fn expansion_for(kind: &LatticeKind, d: usize, centred: bool) -> Result<SignedExpansion> {
    check_d(d, 2, "expansion")?;
    let terms = match (kind, centred) {
        (LatticeKind::Streitberg, false) => enumerate_partitions(d)?
            .into_iter()
            .map(|p| (top_coefficient(p.num_blocks()), p))
            .collect(),
        (LatticeKind::Streitberg, true) => enumerate_no_singleton(d)?
            .into_iter()
            .map(|p| (top_coefficient(p.num_blocks()), p))
            .collect(),
        (LatticeKind::Lancaster, false) => lattice_elements(kind, d)?
            .into_iter()
            .map(|p| {
                let c = if p.is_singletons() {
                    let sign = if d % 2 == 0 { -1 } else { 1 };
                    sign * (d as i64 - 1)
                } else {
                    // Exactly one non-singleton block.
                    if (p.num_blocks() - 1) % 2 == 0 {
                        1
                    } else {
                        -1
                    }
                };
                (c, p)
            })
            .collect(),
        (LatticeKind::Lancaster, true) => vec![(1, Partition::one_block(d)?)],
        (LatticeKind::JointIndependence, false) => vec![
            (-1, Partition::singletons(d)?),
            (1, Partition::one_block(d)?),
        ],
        (LatticeKind::JointIndependence, true) => {
            return Err(Error::Unsupported(
                "joint independence has no centred expansion; evaluate it on uncentred grams"
                    .into(),
            ));
        }
        (LatticeKind::Interval { lower, upper }, centred) => {
            if centred && !lower.is_singletons() {
                return Err(Error::Unsupported(
                    "centred interval expansions require the all-singletons lower bound".into(),
                ));
            }
            if centred && upper.has_singleton() {
                return Err(Error::InvalidPartition(format!(
                    "upper bound {upper} has a singleton block; the centred measure is \
                     identically zero"
                )));
            }
            let elements = lattice_elements(kind, d)?;
            let upper_masks = upper.block_masks();
            let mut terms = Vec::with_capacity(elements.len());
            for p in elements {
                if centred && p.has_singleton() {
                    continue;
                }
                // The interval [p, upper] factorises over the blocks of
                // `upper`, so the Moebius coefficient is the product of
                // full-lattice top coefficients, one per upper block,
                // applied to the number of p-blocks inside it.
                let mut coeff = 1i64;
                for &bm in &upper_masks {
                    let inside = p
                        .block_masks()
                        .iter()
                        .filter(|&&pm| pm & bm == pm)
                        .count();
                    coeff *= top_coefficient(inside);
                }
                terms.push((coeff, p));
            }
            terms
        }
    };
    SignedExpansion::new(d, centred, terms)
}

/// Two-block sub-hypotheses probed by the composite test of a kind:
/// every bipartition for Streitberg, each single variable against the
/// rest for Lancaster, and the all-singletons hypothesis for joint
/// independence.
pub fn second_level(kind: &LatticeKind, d: usize) -> Result<Vec<Partition>> {
    check_d(d, 2, "second level")?;
    match kind {
        LatticeKind::Streitberg => {
            // A bipartition is determined by the side containing
            // variable 0; exclude the full set.
            let mut out = Vec::with_capacity((1usize << (d - 1)) - 1);
            for t in 0u32..((1 << (d - 1)) - 1) {
                let with0 = (t << 1) | 1;
                let assign: Vec<usize> = (0..d)
                    .map(|v| if with0 & (1 << v) != 0 { 0 } else { 1 })
                    .collect();
                out.push(Partition::from_assignment(&assign)?);
            }
            out.sort_by_cached_key(|p| p.canonical_key());
            Ok(out)
        }
        LatticeKind::Lancaster => {
            let mut out = Vec::with_capacity(d);
            for k in 0..d {
                let assign: Vec<usize> = (0..d).map(|v| usize::from(v != k)).collect();
                out.push(Partition::from_assignment(&assign)?);
            }
            out.sort_by_cached_key(|p| p.canonical_key());
            Ok(out)
        }
        LatticeKind::JointIndependence => Ok(vec![Partition::singletons(d)?]),
        LatticeKind::Interval { .. } => Err(Error::Unsupported(
            "interval kinds have no composite second level".into(),
        )),
    }
}

/// Merges the ordered pairs of expansion terms that a squared norm
/// expands into. Pairs `(i, j)` and `(j, i)` contribute the same inner
/// product, so off-diagonal terms appear once with doubled coefficient.
pub fn product_terms(expansion: &SignedExpansion) -> Vec<ProductTerm> {
    let terms = expansion.terms();
    let mut out = Vec::with_capacity(terms.len() * (terms.len() + 1) / 2);
    for i in 0..terms.len() {
        for j in i..terms.len() {
            let factor = if i == j { 1 } else { 2 };
            out.push(ProductTerm {
                coefficient: terms[i].0 * terms[j].0 * factor,
                left: terms[i].1.clone(),
                right: terms[j].1.clone(),
            });
        }
    }
    out
}

/// Removes every factorisation candidate ruled out by the rejected
/// bipartitions: a partition survives unless it refines one of them.
/// The result is upward-closed and always contains the one-block
/// partition.
pub fn prune_candidates(rejected: &[Partition], d: usize) -> Result<Vec<Partition>> {
    check_d(d, 2, "candidate pruning")?;
    for r in rejected {
        if r.d() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: r.d(),
            });
        }
        if r.is_one_block() {
            return Err(Error::InvalidParameter(
                "the one-block partition is not a factorisation hypothesis".into(),
            ));
        }
    }
    let mut out = Vec::new();
    'outer: for p in enumerate_partitions(d)? {
        for r in rejected {
            if p.refines(r)? {
                continue 'outer;
            }
        }
        out.push(p);
    }
    Ok(out)
}

/// Expansion of the interval measure below a singleton-free partition:
/// the product, over its blocks, of full-lattice expansions on the block
/// variables. Equal to Moebius inversion on the interval from the
/// all-singletons partition up to `pi_s`.
pub fn generalized_expansion(pi_s: &Partition) -> Result<SignedExpansion> {
    let d = pi_s.d();
    check_d(d, 2, "generalized expansion")?;
    if pi_s.has_singleton() {
        return Err(Error::InvalidPartition(format!(
            "{pi_s} has a singleton block; the interval measure is identically zero"
        )));
    }
    // Cartesian product of per-block expansions, tracked as partial
    // assignments with a running label offset.
    let mut acc: Vec<(i64, Vec<usize>, usize)> = vec![(1, vec![0usize; d], 0)];
    for block in pi_s.blocks() {
        let sub = enumerate_partitions(block.len())?;
        let mut next = Vec::with_capacity(acc.len() * sub.len());
        for (coeff, assign, offset) in &acc {
            for subpart in &sub {
                let mut merged = assign.clone();
                for (local, &var) in block.iter().enumerate() {
                    merged[var] = offset + subpart.block_of(local);
                }
                next.push((
                    coeff * top_coefficient(subpart.num_blocks()),
                    merged,
                    offset + subpart.num_blocks(),
                ));
            }
        }
        acc = next;
    }
    let mut terms = acc
        .into_iter()
        .map(|(c, assign, _)| Ok((c, Partition::from_assignment(&assign)?)))
        .collect::<Result<Vec<_>>>()?;
    terms.sort_by_cached_key(|(_, p)| p.canonical_key());
    SignedExpansion::new(d, false, terms)
}
