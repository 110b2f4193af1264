//! Index sets of the cluster expansions: compositions of `n`, their
//! consecutive clusters and rank functions, the permutation classes that
//! are monotone inside every cluster, and set partitions with prescribed
//! block sizes.
//!
//! Particles are labelled `0..n` throughout. Ranks keep their natural
//! one-based values (`r(a)` runs over `1..=n_j` inside cluster `j`) since
//! they enter the formulas as numbers, not as indices.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` for which full or restricted permutation classes are
/// materialized (8! = 40320).
pub const MAX_PERMUTATION_N: usize = 8;

/// Largest `n` accepted by [`enumerate_compositions`] (2^15 compositions).
pub const MAX_COMPOSITION_N: usize = 16;

/// An ordered tuple `(n_1, ..., n_M)` of positive integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Composition(Vec<usize>);

impl Composition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("a composition needs at least one part"));
        }
        if parts.contains(&0) {
            return Err(Error::invalid(format!(
                "composition parts must be positive, got {parts:?}"
            )));
        }
        Ok(Self(parts))
    }

    /// `(1, 1, ..., 1)`: every particle is its own cluster.
    pub fn singletons(n: usize) -> Self {
        Self(vec![1; n.max(1)])
    }

    /// `(n)`: a single cluster.
    pub fn single(n: usize) -> Self {
        Self(vec![n.max(1)])
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    /// Number of particles.
    pub fn n(&self) -> usize {
        self.0.iter().sum()
    }

    /// Number of clusters.
    pub fn m(&self) -> usize {
        self.0.len()
    }

    /// Consecutive label blocks `Omega_j`.
    pub fn clusters(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.0
            .iter()
            .map(|&p| {
                let r = start..start + p;
                start += p;
                r
            })
            .collect()
    }

    /// Cluster index of every particle label.
    pub fn cluster_of(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(j, &p)| std::iter::repeat_n(j, p))
            .collect()
    }

    /// Rank `r(a)` of every particle inside its cluster, one-based.
    pub fn ranks(&self) -> Vec<usize> {
        self.0.iter().flat_map(|&p| 1..=p).collect()
    }

    /// Number of permutations in either restricted class,
    /// `n! / (n_1! ... n_M!)`.
    pub fn multinomial(&self) -> u64 {
        let mut acc: u64 = 1;
        let mut seen = 0u64;
        for &p in &self.0 {
            for i in 1..=p as u64 {
                seen += 1;
                acc = acc * seen / i;
            }
        }
        acc
    }

    /// The involution exchanging `a, b` inside the same cluster whenever
    /// `r(a) + r(b) = n_j + 1`, i.e. reversing every block.
    pub fn reversal(&self) -> Permutation {
        let mut image = Vec::with_capacity(self.n());
        for block in self.clusters() {
            image.extend(block.rev());
        }
        Permutation(image)
    }
}

impl TryFrom<Vec<usize>> for Composition {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Composition> for Vec<usize> {
    fn from(c: Composition) -> Self {
        c.0
    }
}

impl std::fmt::Display for Composition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// A permutation of `0..n` in one-line notation: `self[i] = sigma(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v >= n || seen[v] {
                return Err(Error::invalid(format!("{images:?} is not a permutation")));
            }
            seen[v] = true;
        }
        Ok(Self(images))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Self(inv)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn sign(&self) -> i32 {
        let mut visited = vec![false; self.0.len()];
        let mut sign = 1;
        for start in 0..self.0.len() {
            if visited[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                i = self.0[i];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        sign
    }
}

/// Which within-cluster monotonicity a restricted permutation obeys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermutationClass {
    /// `sigma^{-1}(a) < sigma^{-1}(b)` for `a < b` in a common cluster.
    Increasing,
    /// `tau^{-1}(a) > tau^{-1}(b)` for `a < b` in a common cluster.
    Decreasing,
}

impl PermutationClass {
    pub fn contains(self, c: &Composition, p: &Permutation) -> bool {
        let inv = p.inverse();
        c.clusters().into_iter().all(|block| {
            block.clone().zip(block.skip(1)).all(|(a, b)| match self {
                PermutationClass::Increasing => inv.apply(a) < inv.apply(b),
                PermutationClass::Decreasing => inv.apply(a) > inv.apply(b),
            })
        })
    }
}

fn check_perm_cap(n: usize) -> Result<()> {
    if n > MAX_PERMUTATION_N {
        return Err(Error::resource(format!(
            "permutation enumeration is capped at n = {MAX_PERMUTATION_N}, got n = {n}"
        )));
    }
    Ok(())
}

/// All compositions of `n`, grouped by the number of parts and
/// lexicographic inside each group.
pub fn enumerate_compositions(n: usize) -> Result<Vec<Composition>> {
    if n == 0 {
        return Err(Error::invalid("compositions need n >= 1"));
    }
    if n > MAX_COMPOSITION_N {
        return Err(Error::invalid(format!(
            "composition enumeration is capped at n = {MAX_COMPOSITION_N}, got n = {n}"
        )));
    }
    let mut out = Vec::with_capacity(1 << (n - 1));
    for m in 1..=n {
        let mut cur = Vec::with_capacity(m);
        compositions_with_parts(n, m, &mut cur, &mut out);
    }
    Ok(out)
}

fn compositions_with_parts(rest: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Composition>) {
    if m == 1 {
        cur.push(rest);
        out.push(Composition(cur.clone()));
        cur.pop();
        return;
    }
    for first in 1..=rest - (m - 1) {
        cur.push(first);
        compositions_with_parts(rest - first, m - 1, cur, out);
        cur.pop();
    }
}

/// Clusters `Omega_j` (as label sets) and the rank map `r`.
pub fn cluster_ranks(c: &Composition) -> (Vec<Vec<usize>>, Vec<usize>) {
    let clusters = c.clusters().into_iter().map(|b| b.collect()).collect();
    (clusters, c.ranks())
}

/// All of `S_n` in lexicographic one-line order.
pub fn all_permutations(n: usize) -> Result<Vec<Permutation>> {
    check_perm_cap(n)?;
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    loop {
        out.push(Permutation(cur.clone()));
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    Ok(out)
}

/// Permutations that are monotone inside every cluster, in lexicographic
/// one-line order. Generated as multiset words of cluster labels, which
/// yields exactly `multinomial(n; parts)` elements without filtering.
pub fn enumerate_restricted_permutations(
    c: &Composition,
    class: PermutationClass,
) -> Result<Vec<Permutation>> {
    let n = c.n();
    check_perm_cap(n)?;
    let blocks = c.clusters();
    let mut remaining: Vec<usize> = c.parts().to_vec();
    let mut word = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(c.multinomial() as usize);
    fill_words(&mut remaining, &mut word, n, &mut |w| {
        let mut used = vec![0usize; blocks.len()];
        let images = w
            .iter()
            .map(|&j| {
                let k = used[j];
                used[j] += 1;
                match class {
                    PermutationClass::Increasing => blocks[j].start + k,
                    PermutationClass::Decreasing => blocks[j].end - 1 - k,
                }
            })
            .collect();
        out.push(Permutation(images));
    });
    Ok(out)
}

fn fill_words(
    remaining: &mut [usize],
    word: &mut Vec<usize>,
    n: usize,
    emit: &mut dyn FnMut(&[usize]),
) {
    if word.len() == n {
        emit(word);
        return;
    }
    for j in 0..remaining.len() {
        if remaining[j] > 0 {
            remaining[j] -= 1;
            word.push(j);
            fill_words(remaining, word, n, emit);
            word.pop();
            remaining[j] += 1;
        }
    }
}

/// A set partition of `0..n`. Blocks are sorted internally and ordered by
/// their minimum; use [`ClusterPartition::arrangements`] to obtain the
/// block orderings that match a given composition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterPartition {
    blocks: Vec<Vec<usize>>,
}

impl ClusterPartition {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::invalid("partition blocks must be non-empty"));
            }
            b.sort_unstable();
            for &a in b.iter() {
                if a >= n || seen[a] {
                    return Err(Error::invalid(format!(
                        "blocks {blocks:?} do not partition 0..{n}"
                    )));
                }
                seen[a] = true;
            }
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Rank `d(a)` counted downward from the largest element of the block:
    /// `d(max) = 0`, `d(min) = |block| - 1`.
    pub fn down_ranks(&self) -> Vec<usize> {
        down_ranks(&self.blocks, self.n())
    }

    /// Orderings of the blocks whose sizes read `c.parts()` in order.
    pub fn arrangements(&self, c: &Composition) -> Vec<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        let mut used = vec![false; self.blocks.len()];
        let mut cur = Vec::with_capacity(self.blocks.len());
        self.arrange(c.parts(), &mut used, &mut cur, &mut out);
        out
    }

    fn arrange(
        &self,
        parts: &[usize],
        used: &mut [bool],
        cur: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        let slot = cur.len();
        if slot == parts.len() {
            if used.iter().all(|&u| u) {
                out.push(cur.clone());
            }
            return;
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if !used[i] && b.len() == parts[slot] {
                used[i] = true;
                cur.push(b.clone());
                self.arrange(parts, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
}

pub(crate) fn down_ranks(blocks: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for b in blocks {
        let mut sorted = b.clone();
        sorted.sort_unstable();
        for (k, &a) in sorted.iter().rev().enumerate() {
            d[a] = k;
        }
    }
    d
}

/// Unordered set partitions of `0..n` whose multiset of block sizes equals
/// the parts of `c`; each partition is produced once, in canonical form.
pub fn enumerate_partitions(c: &Composition) -> Result<Vec<ClusterPartition>> {
    let n = c.n();
    check_perm_cap(n)?;
    let mut target: Vec<usize> = c.parts().to_vec();
    target.sort_unstable();
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    grow_partitions(0, n, c.m(), &target, &mut blocks, &mut out);
    Ok(out)
}

// Restricted-growth construction: element `a` joins an existing block or
// opens a new one, so every unordered partition appears exactly once.
fn grow_partitions(
    a: usize,
    n: usize,
    m: usize,
    target: &[usize],
    blocks: &mut Vec<Vec<usize>>,
    out: &mut Vec<ClusterPartition>,
) {
    if a == n {
        if blocks.len() == m {
            let mut sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
            sizes.sort_unstable();
            if sizes == target {
                out.push(ClusterPartition {
                    blocks: blocks.clone(),
                });
            }
        }
        return;
    }
    let max_size = *target.last().unwrap();
    for i in 0..blocks.len() {
        if blocks[i].len() < max_size {
            blocks[i].push(a);
            grow_partitions(a + 1, n, m, target, blocks, out);
            blocks[i].pop();
        }
    }
    if blocks.len() < m {
        blocks.push(vec![a]);
        grow_partitions(a + 1, n, m, target, blocks, out);
        blocks.pop();
    }
}

/// The permutation `tau` in the decreasing class attached to an ordered
/// partition: `A_j = tau^{-1}(Omega_j)` and `1 + d(a) = r(tau(a))`.
pub fn partition_to_tau(ordered_blocks: &[Vec<usize>], c: &Composition) -> Result<Permutation> {
    if ordered_blocks.len() != c.m()
        || ordered_blocks
            .iter()
            .zip(c.parts())
            .any(|(b, &p)| b.len() != p)
    {
        return Err(Error::invalid(format!(
            "block sizes do not match composition {c}"
        )));
    }
    let n = c.n();
    let d = down_ranks(ordered_blocks, n);
    let clusters = c.clusters();
    let mut images = vec![usize::MAX; n];
    for (j, b) in ordered_blocks.iter().enumerate() {
        for &a in b {
            if a >= n {
                return Err(Error::invalid(format!("label {a} out of range")));
            }
            images[a] = clusters[j].start + d[a];
        }
    }
    Permutation::from_images(images)
}

/// Inverse of [`partition_to_tau`]: the ordered blocks `tau^{-1}(Omega_j)`.
pub fn tau_to_partition(tau: &Permutation, c: &Composition) -> Vec<Vec<usize>> {
    let inv = tau.inverse();
    c.clusters()
        .into_iter()
        .map(|block| {
            let mut b: Vec<usize> = block.map(|a| inv.apply(a)).collect();
            b.sort_unstable();
            b
        })
        .collect()
}
