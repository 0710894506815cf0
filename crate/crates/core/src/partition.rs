//! Set partitions of the variable index set `{0, .., d-1}`.
//!
//! A partition is stored as a block assignment in canonical label order:
//! variable 0 is always in block 0, and each later variable either joins
//! an existing block or opens the next unused label. Two partitions are
//! equal exactly when their assignments are equal, so equality, hashing,
//! and ordering never need to normalise.
//!
//! The textual notation is 1-based: `"12|34|5"` for up to nine variables
//! (one digit per variable), `"{1,2}|{10,11}"` otherwise. Blocks are
//! written with ascending indices and ordered by their smallest member.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::{Result, MAX_VARIABLES};

/// A set partition of `{0, .., d-1}`.
///
/// `refines` orders the lattice: the all-singletons partition refines
/// everything, the one-block partition is refined by everything. `meet`
/// and `join` are the lattice operations under that order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    /// `assign[v]` is the block label of variable `v`, labels in
    /// first-occurrence order.
    assign: Vec<u8>,
    num_blocks: u8,
}

fn check_dim(d: usize, what: &'static str) -> Result<()> {
    if d == 0 || d > MAX_VARIABLES {
        return Err(Error::DimensionOutOfRange {
            what,
            d,
            min: 1,
            max: MAX_VARIABLES,
        });
    }
    Ok(())
}

impl Partition {
    /// All-singletons partition (the lattice bottom).
    pub fn singletons(d: usize) -> Result<Self> {
        check_dim(d, "partition")?;
        Ok(Self {
            assign: (0..d as u8).collect(),
            num_blocks: d as u8,
        })
    }

    /// One-block partition (the lattice top).
    pub fn one_block(d: usize) -> Result<Self> {
        check_dim(d, "partition")?;
        Ok(Self {
            assign: vec![0; d],
            num_blocks: 1,
        })
    }

    /// Builds a partition from explicit blocks of 0-based variable
    /// indices. The blocks must be non-empty, disjoint, and cover
    /// `{0, .., d-1}`; they may be listed in any order.
    pub fn from_blocks(d: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        check_dim(d, "partition")?;
        let mut assign = vec![u8::MAX; d];
        for (label, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &v in block {
                if v >= d {
                    return Err(Error::InvalidPartition(format!(
                        "index {v} out of range for d = {d}"
                    )));
                }
                if assign[v] != u8::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "index {v} appears in two blocks"
                    )));
                }
                assign[v] = label as u8;
            }
        }
        if assign.iter().any(|&a| a == u8::MAX) {
            return Err(Error::InvalidPartition(
                "blocks do not cover all variables".into(),
            ));
        }
        Ok(Self::relabel(&assign))
    }

    /// Builds a partition from an arbitrary block assignment; labels are
    /// normalised to first-occurrence order.
    pub fn from_assignment(assign: &[usize]) -> Result<Self> {
        check_dim(assign.len(), "partition")?;
        let raw: Vec<u8> = assign
            .iter()
            .map(|&a| {
                if a <= MAX_VARIABLES {
                    Ok(a as u8)
                } else {
                    Err(Error::InvalidPartition(format!("block label {a} too large")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self::relabel(&raw))
    }

    /// Wraps an assignment already in canonical first-occurrence form,
    /// skipping relabelling. Used by the lattice enumerator.
    pub(crate) fn from_canonical(assign: Vec<u8>, num_blocks: u8) -> Self {
        debug_assert_eq!(Self::relabel(&assign).assign, assign);
        debug_assert_eq!(Self::relabel(&assign).num_blocks, num_blocks);
        Self { assign, num_blocks }
    }

    /// Canonicalises labels to first-occurrence order.
    fn relabel(raw: &[u8]) -> Self {
        let mut map = [u8::MAX; MAX_VARIABLES + 1];
        let mut next = 0u8;
        let mut assign = Vec::with_capacity(raw.len());
        for &a in raw {
            let idx = a as usize;
            if map[idx] == u8::MAX {
                map[idx] = next;
                next += 1;
            }
            assign.push(map[idx]);
        }
        Self {
            assign,
            num_blocks: next,
        }
    }

    /// Number of variables.
    pub fn d(&self) -> usize {
        self.assign.len()
    }

    /// Number of blocks.
    pub fn num_blocks(&self) -> usize {
        self.num_blocks as usize
    }

    /// Block label of a variable.
    pub fn block_of(&self, v: usize) -> usize {
        self.assign[v] as usize
    }

    /// Blocks as sorted index lists, ordered by smallest member.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.num_blocks()];
        for (v, &a) in self.assign.iter().enumerate() {
            blocks[a as usize].push(v);
        }
        blocks
    }

    /// Sizes of the blocks in label order.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_blocks()];
        for &a in &self.assign {
            sizes[a as usize] += 1;
        }
        sizes
    }

    /// True if any block has exactly one member.
    pub fn has_singleton(&self) -> bool {
        self.block_sizes().contains(&1)
    }

    /// True for the one-block partition.
    pub fn is_one_block(&self) -> bool {
        self.num_blocks == 1
    }

    /// True for the all-singletons partition.
    pub fn is_singletons(&self) -> bool {
        self.num_blocks() == self.d()
    }

    /// Blocks as bitmasks over variable indices, in label order.
    pub(crate) fn block_masks(&self) -> Vec<u16> {
        let mut masks = vec![0u16; self.num_blocks()];
        for (v, &a) in self.assign.iter().enumerate() {
            masks[a as usize] |= 1 << v;
        }
        masks
    }

    pub(crate) fn assignment(&self) -> &[u8] {
        &self.assign
    }

    fn require_same_d(&self, other: &Self) -> Result<()> {
        if self.d() != other.d() {
            return Err(Error::DimensionMismatch {
                left: self.d(),
                right: other.d(),
            });
        }
        Ok(())
    }

    /// True iff every block of `self` lies inside a block of `other`
    /// (`self` is finer than or equal to `other`).
    pub fn refines(&self, other: &Self) -> Result<bool> {
        self.require_same_d(other)?;
        let mut image = [u8::MAX; MAX_VARIABLES];
        for v in 0..self.d() {
            let mine = self.assign[v] as usize;
            let theirs = other.assign[v];
            if image[mine] == u8::MAX {
                image[mine] = theirs;
            } else if image[mine] != theirs {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Coarsest partition refining both: blocks are pairwise
    /// intersections of the two block systems.
    pub fn meet(&self, other: &Self) -> Result<Self> {
        self.require_same_d(other)?;
        // Pair the two labels per variable and relabel the pairs in
        // first-occurrence order.
        let width = MAX_VARIABLES + 1;
        let mut map = vec![u8::MAX; width * width];
        let mut next = 0u8;
        let mut assign = Vec::with_capacity(self.d());
        for v in 0..self.d() {
            let code = self.assign[v] as usize * width + other.assign[v] as usize;
            if map[code] == u8::MAX {
                map[code] = next;
                next += 1;
            }
            assign.push(map[code]);
        }
        Ok(Self {
            assign,
            num_blocks: next,
        })
    }

    /// Finest partition refined by both: connected components of the
    /// union of the two co-membership relations.
    pub fn join(&self, other: &Self) -> Result<Self> {
        self.require_same_d(other)?;
        let d = self.d();
        let mut parent: Vec<u8> = (0..d as u8).collect();
        fn find(parent: &mut [u8], v: u8) -> u8 {
            let mut root = v;
            while parent[root as usize] != root {
                root = parent[root as usize];
            }
            let mut cur = v;
            while parent[cur as usize] != root {
                let next = parent[cur as usize];
                parent[cur as usize] = root;
                cur = next;
            }
            root
        }
        for part in [self, other] {
            let mut first = [u8::MAX; MAX_VARIABLES];
            for v in 0..d {
                let label = part.assign[v] as usize;
                if first[label] == u8::MAX {
                    first[label] = v as u8;
                } else {
                    let a = find(&mut parent, first[label]);
                    let b = find(&mut parent, v as u8);
                    parent[a as usize] = b;
                }
            }
        }
        let raw: Vec<u8> = (0..d as u8).map(|v| find(&mut parent, v)).collect();
        Ok(Self::relabel(&raw))
    }

    /// Partition induced on a subset of variables: `vars[k]` becomes
    /// variable `k`, co-membership is inherited.
    pub(crate) fn restrict(&self, vars: &[usize]) -> Self {
        let raw: Vec<u8> = vars.iter().map(|&v| self.assign[v]).collect();
        Self::relabel(&raw)
    }

    /// Sort key realising the enumeration order: more blocks first, then
    /// lexicographic on the canonical block lists. The flattened form
    /// terminates each block with 0 (below any 1-based index), so the
    /// flat comparison agrees with comparing block lists.
    pub(crate) fn canonical_key(&self) -> (u8, Vec<u8>) {
        let mut flat = Vec::with_capacity(self.d() + self.num_blocks());
        for block in self.blocks() {
            for v in block {
                flat.push(v as u8 + 1);
            }
            flat.push(0);
        }
        (self.d() as u8 - self.num_blocks, flat)
    }
}

impl PartialOrd for Partition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Partition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d()
            .cmp(&other.d())
            .then_with(|| self.canonical_key().cmp(&other.canonical_key()))
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks = self.blocks();
        if self.d() <= 9 {
            let mut first = true;
            for block in blocks {
                if !first {
                    write!(f, "|")?;
                }
                first = false;
                for v in block {
                    write!(f, "{}", v + 1)?;
                }
            }
        } else {
            let mut first = true;
            for block in blocks {
                if !first {
                    write!(f, "|")?;
                }
                first = false;
                write!(f, "{{")?;
                for (i, v) in block.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", v + 1)?;
                }
                write!(f, "}}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition({self})")
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidPartition("empty notation".into()));
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        if s.contains('{') {
            for chunk in s.split('|') {
                let inner = chunk
                    .strip_prefix('{')
                    .and_then(|c| c.strip_suffix('}'))
                    .ok_or_else(|| {
                        Error::InvalidPartition(format!("malformed block `{chunk}`"))
                    })?;
                let mut block = Vec::new();
                for num in inner.split(',') {
                    let idx: usize = num.trim().parse().map_err(|_| {
                        Error::InvalidPartition(format!("bad index `{num}` in `{s}`"))
                    })?;
                    if idx == 0 || idx > MAX_VARIABLES {
                        return Err(Error::InvalidPartition(format!(
                            "index {idx} outside 1..={MAX_VARIABLES}"
                        )));
                    }
                    block.push(idx - 1);
                }
                blocks.push(block);
            }
        } else {
            for chunk in s.split('|') {
                let mut block = Vec::new();
                for ch in chunk.chars() {
                    let idx = ch.to_digit(10).ok_or_else(|| {
                        Error::InvalidPartition(format!("bad character `{ch}` in `{s}`"))
                    })? as usize;
                    if idx == 0 {
                        return Err(Error::InvalidPartition(
                            "digit notation is 1-based; 0 is not a variable".into(),
                        ));
                    }
                    block.push(idx - 1);
                }
                blocks.push(block);
            }
        }
        let d: usize = blocks.iter().map(|b| b.len()).sum();
        check_dim(d, "partition")?;
        let mut seen = vec![false; d];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("empty block in `{s}`")));
            }
            for &v in block {
                if v >= d {
                    return Err(Error::InvalidPartition(format!(
                        "`{s}` mentions index {} but only {d} indices are present",
                        v + 1
                    )));
                }
                if seen[v] {
                    return Err(Error::InvalidPartition(format!(
                        "index {} repeated in `{s}`",
                        v + 1
                    )));
                }
                seen[v] = true;
            }
        }
        Self::from_blocks(d, &blocks)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}
