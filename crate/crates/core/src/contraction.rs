//! Memoized contraction of Gram matrices into embedding inner products.
//!
//! Every statistic reduces to inner products of partition embeddings,
//! which are sums over one sample index per block of a product of Gram
//! entries. This module evaluates one irreducible factor of such an
//! inner product (both sides restricted to a single block of the join)
//! and memoizes the intermediates: Hadamard products of Gram matrices,
//! their row sums, and the pairwise matrix products that dominate the
//! two-block case.
//!
//! Permutation tests re-evaluate the same factors hundreds of times
//! with only a few variables' grams re-indexed. Each memo entry is
//! therefore stamped: `Clean` entries depend only on unpermuted
//! variables and stay valid across replicates, while `Rep` entries are
//! valid for one replicate only. Validity is checked at lookup, so no
//! eviction pass is needed.

use std::collections::HashMap;
use std::rc::Rc;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::kernel::permute_gram;

/// Validity stamp on a memo entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Stamp {
    /// Computed from unpermuted grams only.
    Clean,
    /// Computed during the replicate with this sequence number.
    Rep(u64),
}

struct Entry<T> {
    value: Rc<T>,
    stamp: Stamp,
}

/// Iterates over the set bit positions of a variable mask.
pub(crate) fn iter_bits(mask: u16) -> impl Iterator<Item = usize> {
    (0..16).filter(move |v| mask & (1 << v) != 0)
}

/// Gram matrices plus memoized intermediates for one evaluation stream.
///
/// Not `Sync`: permutation tests give each worker its own workspace.
pub(crate) struct Workspace {
    n: usize,
    base: Vec<Rc<Array2<f64>>>,
    active: Vec<Rc<Array2<f64>>>,
    perm_mask: u16,
    rep: u64,
    hadamards: HashMap<u16, Entry<Array2<f64>>>,
    rowsums: HashMap<u16, Entry<Array1<f64>>>,
    matmuls: HashMap<(u16, u16), Entry<Array2<f64>>>,
}

impl Workspace {
    pub(crate) fn new(grams: Vec<Array2<f64>>) -> Self {
        let n = grams.first().map_or(0, |g| g.nrows());
        let base: Vec<Rc<Array2<f64>>> = grams.into_iter().map(Rc::new).collect();
        Self {
            n,
            active: base.clone(),
            base,
            perm_mask: 0,
            rep: 0,
            hadamards: HashMap::new(),
            rowsums: HashMap::new(),
            matmuls: HashMap::new(),
        }
    }

    pub(crate) fn d(&self) -> usize {
        self.base.len()
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    /// Starts a replicate in which the variables of `vars_mask` are all
    /// re-indexed by the same sample permutation.
    pub(crate) fn permute(&mut self, vars_mask: u16, perm: &[usize]) {
        self.permute_each(vars_mask, |_| perm);
    }

    /// Starts a replicate with a per-variable permutation for every
    /// variable in `vars_mask`.
    pub(crate) fn permute_each<'a>(
        &mut self,
        vars_mask: u16,
        mut perm_of: impl FnMut(usize) -> &'a [usize],
    ) {
        for v in iter_bits(self.perm_mask & !vars_mask) {
            self.active[v] = self.base[v].clone();
        }
        for v in iter_bits(vars_mask) {
            self.active[v] = Rc::new(permute_gram(&self.base[v], perm_of(v)));
        }
        self.perm_mask = vars_mask;
        self.rep += 1;
    }

    /// Restores all variables to their unpermuted grams.
    pub(crate) fn clear_permutation(&mut self) {
        for v in iter_bits(self.perm_mask) {
            self.active[v] = self.base[v].clone();
        }
        self.perm_mask = 0;
        self.rep += 1;
    }

    /// True when an entry whose inputs span `mask` is still usable.
    pub(crate) fn is_valid(&self, mask: u16, stamp: Stamp) -> bool {
        match stamp {
            Stamp::Clean => mask & self.perm_mask == 0,
            Stamp::Rep(r) => r == self.rep,
        }
    }

    /// Stamp a new entry depending on `mask` should carry right now.
    pub(crate) fn stamp_for(&self, mask: u16) -> Stamp {
        if mask & self.perm_mask == 0 {
            Stamp::Clean
        } else {
            Stamp::Rep(self.rep)
        }
    }

    /// Entrywise product of the active grams in `mask` (one bit: the
    /// gram itself).
    pub(crate) fn hadamard(&mut self, mask: u16) -> Rc<Array2<f64>> {
        debug_assert_ne!(mask, 0, "hadamard of no variables");
        if mask.count_ones() == 1 {
            return self.active[mask.trailing_zeros() as usize].clone();
        }
        if let Some(e) = self.hadamards.get(&mask) {
            if self.is_valid(mask, e.stamp) {
                return e.value.clone();
            }
        }
        let mut bits = iter_bits(mask);
        let first = bits.next().expect("nonempty mask");
        let mut out = (*self.active[first]).clone();
        for v in bits {
            out *= &*self.active[v];
        }
        let value = Rc::new(out);
        self.hadamards.insert(
            mask,
            Entry {
                value: value.clone(),
                stamp: self.stamp_for(mask),
            },
        );
        value
    }

    /// Row sums of the Hadamard product of `mask` (equal to its column
    /// sums, since grams are symmetric).
    pub(crate) fn rowsum(&mut self, mask: u16) -> Rc<Array1<f64>> {
        if let Some(e) = self.rowsums.get(&mask) {
            if self.is_valid(mask, e.stamp) {
                return e.value.clone();
            }
        }
        let m = self.hadamard(mask);
        let value = Rc::new(m.sum_axis(Axis(1)));
        self.rowsums.insert(
            mask,
            Entry {
                value: value.clone(),
                stamp: self.stamp_for(mask),
            },
        );
        value
    }

    /// The contraction `T[a, b] = sum_c M_p[a, c] * M_q[b, c]` of two
    /// Hadamard products. Returns the stored matrix plus a flag telling
    /// the caller to transpose: only the orientation with the smaller
    /// mask on the left is kept.
    pub(crate) fn matmul(&mut self, p: u16, q: u16) -> (Rc<Array2<f64>>, bool) {
        let (lo, hi, swapped) = if p <= q { (p, q, false) } else { (q, p, true) };
        let mask = lo | hi;
        if let Some(e) = self.matmuls.get(&(lo, hi)) {
            if self.is_valid(mask, e.stamp) {
                return (e.value.clone(), swapped);
            }
        }
        let a = self.hadamard(lo);
        let b = self.hadamard(hi);
        let value = Rc::new(a.dot(&b.t()));
        self.matmuls.insert(
            (lo, hi),
            Entry {
                value: value.clone(),
                stamp: self.stamp_for(mask),
            },
        );
        (value, swapped)
    }

    /// Number of live memo entries, for reuse assertions in tests.
    #[cfg(test)]
    pub(crate) fn memo_len(&self) -> usize {
        self.hadamards.len() + self.rowsums.len() + self.matmuls.len()
    }
}

/// Inner product of two partition embeddings restricted to one join
/// block, already normalised by the sample count.
///
/// `left` and `right` are the block masks of the two partitions inside
/// the join block; their unions must be equal. The strategy depends on
/// the smaller side's block count: row sums for one block, paired
/// matrix products for two, and a direct sweep over index tuples
/// otherwise.
pub(crate) fn factor_value(ws: &mut Workspace, left: &[u16], right: &[u16]) -> f64 {
    debug_assert_eq!(
        left.iter().fold(0, |m, b| m | b),
        right.iter().fold(0, |m, b| m | b),
        "factor sides must cover the same variables"
    );
    let (small, large) = if left.len() <= right.len() {
        (left, right)
    } else {
        // Grams are symmetric, so the inner product is too.
        (right, left)
    };
    match small.len() {
        1 => factor_rowsums(ws, large),
        2 => factor_matmuls(ws, small, large),
        _ => factor_sweep(ws, small, large),
    }
}

/// One block on the small side: the factor is the mean over one row
/// index of a product of row sums, one per large-side block.
fn factor_rowsums(ws: &mut Workspace, large: &[u16]) -> f64 {
    let n = ws.n();
    let mut prod = Array1::ones(n);
    for &b in large {
        prod *= &*ws.rowsum(b);
    }
    let scale = (n as f64).powi(1 + large.len() as i32);
    prod.sum() / scale
}

/// Two blocks on the small side: each large-side block contributes a
/// pairwise contraction against the two small blocks, and the factor is
/// the full sum of their entrywise product.
fn factor_matmuls(ws: &mut Workspace, small: &[u16], large: &[u16]) -> f64 {
    let n = ws.n();
    let (sa, sb) = (small[0], small[1]);
    // Accumulators for full matrices and for the rank-one contributions
    // that appear when a large block misses one small block entirely.
    let mut full: Option<Array2<f64>> = None;
    let mut by_a: Option<Array1<f64>> = None;
    let mut by_b: Option<Array1<f64>> = None;
    for &blk in large {
        let p = blk & sa;
        let q = blk & sb;
        match (p != 0, q != 0) {
            (true, true) => {
                let (t, swapped) = ws.matmul(p, q);
                let view: ArrayView2<f64> = if swapped { t.t() } else { t.view() };
                match &mut full {
                    None => full = Some(view.to_owned()),
                    Some(m) => *m *= &view,
                }
            }
            (true, false) => {
                let s = ws.rowsum(p);
                match &mut by_a {
                    None => by_a = Some((*s).clone()),
                    Some(v) => *v *= &*s,
                }
            }
            (false, true) => {
                let s = ws.rowsum(q);
                match &mut by_b {
                    None => by_b = Some((*s).clone()),
                    Some(v) => *v *= &*s,
                }
            }
            (false, false) => unreachable!("large blocks are nonempty"),
        }
    }
    let scale = (n as f64).powi(2 + large.len() as i32);
    let raw = match full {
        Some(m) => {
            let wb = by_b.unwrap_or_else(|| Array1::ones(n));
            let mb = m.dot(&wb);
            match by_a {
                Some(wa) => wa.dot(&mb),
                None => mb.sum(),
            }
        }
        None => {
            let sum_a = by_a.map_or(n as f64, |v| v.sum());
            let sum_b = by_b.map_or(n as f64, |v| v.sum());
            sum_a * sum_b
        }
    };
    raw / scale
}

/// General case: sweep an odometer over the small side's index tuple,
/// summing for each large block over its free column index. Cost grows
/// as `n^(p+1)` for `p` small-side blocks.
fn factor_sweep(ws: &mut Workspace, small: &[u16], large: &[u16]) -> f64 {
    let n = ws.n();
    let p = small.len();
    // For each large block, the small blocks it intersects and the
    // Hadamard product of the shared variables.
    let groups: Vec<Vec<(usize, Rc<Array2<f64>>)>> = large
        .iter()
        .map(|&blk| {
            small
                .iter()
                .enumerate()
                .filter(|(_, &s)| s & blk != 0)
                .map(|(j, &s)| (j, ws.hadamard(s & blk)))
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; p];
    let mut total = 0.0;
    'sweep: loop {
        let mut prod = 1.0;
        for factors in &groups {
            let mut s = 0.0;
            for c in 0..n {
                let mut t = 1.0;
                for (j, m) in factors {
                    t *= m[[idx[*j], c]];
                }
                s += t;
            }
            prod *= s;
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
            if k == p {
                break 'sweep;
            }
        }
    }
    total / (n as f64).powi((p + large.len()) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::gram_gaussian;
    use approx::assert_abs_diff_eq;

    fn toy_grams(n: usize, d: usize, spread: f64) -> Vec<Array2<f64>> {
        // Deterministic, irregular, symmetric grams with unit diagonal.
        (0..d)
            .map(|v| {
                let vals: Vec<f64> = (0..n)
                    .map(|i| ((i * (v + 2) + v) as f64 * spread).sin() * 2.0)
                    .collect();
                let arr = Array2::from_shape_vec((n, 1), vals).unwrap();
                gram_gaussian(&arr, 1.3).unwrap()
            })
            .collect()
    }

    /// Direct evaluation of one factor from its definition: sum over
    /// one index per block on each side of the product of gram entries.
    fn brute_factor(grams: &[Array2<f64>], left: &[u16], right: &[u16]) -> f64 {
        let n = grams[0].nrows();
        let p = left.len();
        let q = right.len();
        let vars: Vec<usize> = iter_bits(left.iter().fold(0, |m, b| m | b)).collect();
        let mut idx = vec![0usize; p + q];
        let mut total = 0.0;
        loop {
            let mut prod = 1.0;
            for &v in &vars {
                let r = left.iter().position(|&b| b & (1 << v) != 0).unwrap();
                let c = right.iter().position(|&b| b & (1 << v) != 0).unwrap();
                prod *= grams[v][[idx[r], idx[p + c]]];
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

    #[test]
    fn rowsum_strategy_matches_brute_force() {
        let grams = toy_grams(5, 4, 0.7);
        let mut ws = Workspace::new(grams.clone());
        // (1234) against 12|34 and against 1|2|34.
        for right in [vec![0b0011u16, 0b1100], vec![0b0001, 0b0010, 0b1100]] {
            let got = factor_value(&mut ws, &[0b1111], &right);
            let want = brute_factor(&grams, &[0b1111], &right);
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn matmul_strategy_matches_brute_force() {
        let grams = toy_grams(5, 5, 0.9);
        let mut ws = Workspace::new(grams.clone());
        let cases: Vec<(Vec<u16>, Vec<u16>)> = vec![
            // All four pairwise intersections nonempty.
            (vec![0b00011, 0b11100], vec![0b00101, 0b11010]),
            // One empty intersection (left block inside a right block).
            (vec![0b00011, 0b11100], vec![0b00111, 0b11000]),
            // Three-block large side.
            (vec![0b00011, 0b11100], vec![0b00101, 0b01010, 0b10000]),
            // Identical bipartitions.
            (vec![0b00011, 0b11100], vec![0b00011, 0b11100]),
        ];
        for (left, right) in cases {
            let got = factor_value(&mut ws, &left, &right);
            let want = brute_factor(&grams, &left, &right);
            assert_abs_diff_eq!(got, want, epsilon = 1e-12, );
        }
    }

    #[test]
    fn sweep_strategy_matches_brute_force() {
        let grams = toy_grams(4, 6, 1.1);
        let mut ws = Workspace::new(grams.clone());
        let left = vec![0b000011u16, 0b001100, 0b110000];
        let right = vec![0b000101u16, 0b011010, 0b100000];
        let got = factor_value(&mut ws, &left, &right);
        let want = brute_factor(&grams, &left, &right);
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn orientation_is_symmetric() {
        let grams = toy_grams(6, 5, 0.5);
        let mut ws = Workspace::new(grams);
        let a = vec![0b00011u16, 0b11100];
        let b = vec![0b00101u16, 0b01010, 0b10000];
        let lr = factor_value(&mut ws, &a, &b);
        let rl = factor_value(&mut ws, &b, &a);
        assert_abs_diff_eq!(lr, rl, epsilon = 1e-14);
    }

    #[test]
    fn memos_survive_replicates_of_disjoint_variables() {
        let grams = toy_grams(6, 4, 0.8);
        let mut ws = Workspace::new(grams.clone());
        let clean = factor_value(&mut ws, &[0b0011], &[0b0011]);
        let before = ws.memo_len();
        // Permuting variables 2 and 3 must not disturb a factor on 0, 1.
        let perm = [3usize, 1, 5, 0, 2, 4];
        ws.permute(0b1100, &perm);
        let again = factor_value(&mut ws, &[0b0011], &[0b0011]);
        assert_eq!(ws.memo_len(), before, "no recomputation for clean keys");
        assert_abs_diff_eq!(clean, again, epsilon = 0.0);
    }

    #[test]
    fn permutation_matches_fresh_workspace_on_permuted_grams() {
        let grams = toy_grams(7, 4, 1.0);
        let perm = [2usize, 6, 0, 4, 1, 5, 3];
        let left = vec![0b0011u16, 0b1100];
        let right = vec![0b0101u16, 0b1010];

        let mut live = Workspace::new(grams.clone());
        // Warm the memos, then permute variables 1 and 3 twice with
        // different permutations to exercise stamp invalidation.
        factor_value(&mut live, &left, &right);
        live.permute(0b1010, &[1, 0, 3, 2, 5, 4, 6]);
        factor_value(&mut live, &left, &right);
        live.permute(0b1010, &perm);
        let got = factor_value(&mut live, &left, &right);

        let mut permuted = grams.clone();
        for v in [1usize, 3] {
            permuted[v] = permute_gram(&grams[v], &perm);
        }
        let mut fresh = Workspace::new(permuted);
        let want = factor_value(&mut fresh, &left, &right);
        assert_abs_diff_eq!(got, want, epsilon = 0.0);

        // Clearing returns to the unpermuted value.
        live.clear_permutation();
        let cleared = factor_value(&mut live, &left, &right);
        let mut base = Workspace::new(grams);
        assert_abs_diff_eq!(
            cleared,
            factor_value(&mut base, &left, &right),
            epsilon = 0.0
        );
    }

    #[test]
    fn per_variable_permutations_apply_independently() {
        let grams = toy_grams(5, 3, 0.6);
        let perms: Vec<Vec<usize>> = vec![vec![1, 2, 3, 4, 0], vec![4, 3, 2, 1, 0]];
        let mut ws = Workspace::new(grams.clone());
        ws.permute_each(0b110, |v| &perms[v - 1]);
        let got = factor_value(&mut ws, &[0b111], &[0b011, 0b100]);

        let mut permuted = grams.clone();
        permuted[1] = permute_gram(&grams[1], &perms[0]);
        permuted[2] = permute_gram(&grams[2], &perms[1]);
        let mut fresh = Workspace::new(permuted);
        let want = factor_value(&mut fresh, &[0b111], &[0b011, 0b100]);
        assert_abs_diff_eq!(got, want, epsilon = 0.0);
    }
}
