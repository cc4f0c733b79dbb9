//! Enumeration of the parent triples `T(y′)`.
//!
//! A triple of users is a parent triple when at every column at least one of
//! them holds the bit of `y′`. [`triples_naive`] checks every triple directly
//! and serves as the oracle. [`triples_indexed`] builds the same family
//! column by column in compressed form:
//!
//! * `L1`: users matching every column so far (any two others complete a
//!   triple);
//! * `L2`: pairs of disjoint user sets `{K1, K2}` such that any `x ∈ K1`,
//!   `y ∈ K2` cover every column so far (any third user completes a triple);
//! * `L3`: triples of disjoint user sets whose transversals cover every
//!   column so far.
//!
//! With `C` the users matching the next column, `L1` shrinks to `L1 ∩ C`,
//! the pair `{L1 \ C, C \ L1}` is added to `L2`, each pair `{K1, K2}` becomes
//! `{K1 ∩ C, K2}` and `{K1 \ C, K2 ∩ C}` plus the triple
//! `{K1 \ C, K2 \ C, C \ (K1 ∪ K2)}`, and each triple `{K1, K2, K3}` becomes
//! `{K1 ∩ C, K2, K3}`, `{K1 \ C, K2 ∩ C, K3}` and `{K1 \ C, K2 \ C, K3 ∩ C}`.
//! Classes with an empty component are dropped.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bits::{limbs_for, BitWord};
use crate::codegen::CodeMatrix;
use crate::error::{Error, Mismatch, Result};
use crate::triples::{Triple, TripleSet, User};

/// Default user limit for [`triples_naive`].
pub const DEFAULT_NAIVE_CAP: usize = 64;
/// Default limit on the number of triples [`expand`] materializes.
pub const DEFAULT_MAX_EXPAND: usize = 10_000_000;
/// Above this many users the index stores component sets as sorted lists
/// instead of bitsets.
pub const DENSE_USER_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripleEngine {
    Indexed,
    Naive,
}

fn check_word(w: &CodeMatrix, yprime: &BitWord) -> Result<()> {
    if yprime.len() != w.code_length() {
        return Err(Mismatch::WordLength {
            expected: w.code_length(),
            found: yprime.len(),
        }
        .into());
    }
    Ok(())
}

/// All parent triples by direct check, limited to [`DEFAULT_NAIVE_CAP`] users.
pub fn triples_naive(w: &CodeMatrix, yprime: &BitWord) -> Result<TripleSet> {
    triples_naive_capped(w, yprime, DEFAULT_NAIVE_CAP)
}

/// All parent triples by direct check: `{a, b, c}` qualifies iff no column
/// has all three codewords disagreeing with `y′`.
pub fn triples_naive_capped(w: &CodeMatrix, yprime: &BitWord, cap: usize) -> Result<TripleSet> {
    check_word(w, yprime)?;
    let n = w.n_users();
    if n > cap {
        return Err(Error::Unsupported(format!(
            "naive triple enumeration is an oracle limited to {cap} users, got {n}"
        )));
    }
    // bit j of miss[i] set iff user i disagrees with y′ at column j
    let miss: Vec<Vec<u64>> = w
        .rows()
        .iter()
        .map(|row| {
            let agree = row.agreement(yprime);
            let mut limbs: Vec<u64> = agree.limbs().iter().map(|l| !l).collect();
            crate::bits::mask_tail(&mut limbs, yprime.len());
            limbs
        })
        .collect();
    let mut out = TripleSet::new();
    let mut both = vec![0u64; limbs_for(yprime.len())];
    for a in 0..n {
        for b in a + 1..n {
            for (dst, (x, y)) in both.iter_mut().zip(miss[a].iter().zip(&miss[b])) {
                *dst = x & y;
            }
            for (c, mc) in miss.iter().enumerate().skip(b + 1) {
                if both.iter().zip(mc).all(|(x, y)| x & y == 0) {
                    out.insert(Triple::new(a as User, b as User, c as User).expect("distinct"));
                }
            }
        }
    }
    Ok(out)
}

/// Per-run statistics on the number of live classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub columns: usize,
    pub peak_live_classes: usize,
    pub mean_live_classes: f64,
    pub duplicate_classes_removed: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub singles: usize,
    pub pair_classes: usize,
    pub triple_classes: usize,
    #[serde(flatten)]
    pub stats: IndexStats,
}

/// The final `L1`, `L2`, `L3` of the induction, components as sorted lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompressedTriples {
    pub singles: Vec<User>,
    pub pair_classes: Vec<[Vec<User>; 2]>,
    pub triple_classes: Vec<[Vec<User>; 3]>,
    pub stats: IndexStats,
}

impl CompressedTriples {
    pub fn class_counts(&self) -> ClassCounts {
        ClassCounts {
            singles: self.singles.len(),
            pair_classes: self.pair_classes.len(),
            triple_classes: self.triple_classes.len(),
            stats: self.stats,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.singles.is_empty() && self.pair_classes.is_empty() && self.triple_classes.is_empty()
    }

    fn canonicalize(&mut self) {
        self.singles.sort_unstable();
        for pc in &mut self.pair_classes {
            pc.sort();
        }
        for tc in &mut self.triple_classes {
            tc.sort();
        }
        self.pair_classes.sort();
        self.pair_classes.dedup();
        self.triple_classes.sort();
        self.triple_classes.dedup();
    }
}

/// Users whose bit at each column equals that of `y′`, one bitset per column.
fn match_columns(w: &CodeMatrix, yprime: &BitWord) -> Vec<Vec<u64>> {
    let n = w.n_users();
    let limbs = limbs_for(n);
    let mut cols = vec![vec![0u64; limbs]; yprime.len()];
    for (i, row) in w.rows().iter().enumerate() {
        let agree = row.agreement(yprime);
        for (j, col) in cols.iter_mut().enumerate() {
            if agree.get(j) {
                col[i / 64] |= 1u64 << (i % 64);
            }
        }
    }
    // The triple set is the set of triples hitting every column, so order is
    // free; narrow columns first keeps the number of live classes small.
    cols.sort_by_key(|c| c.iter().map(|x| x.count_ones()).sum::<u32>());
    cols
}

/// Runs the column induction and returns the compressed `T(y′)`.
pub fn triples_indexed(w: &CodeMatrix, yprime: &BitWord) -> Result<CompressedTriples> {
    check_word(w, yprime)?;
    if w.n_users() <= DENSE_USER_LIMIT {
        Ok(dense::run(w, yprime))
    } else {
        Ok(sparse::run(w, yprime))
    }
}

/// The induction with sorted-list component sets regardless of `N`.
pub fn triples_indexed_sparse(w: &CodeMatrix, yprime: &BitWord) -> Result<CompressedTriples> {
    check_word(w, yprime)?;
    Ok(sparse::run(w, yprime))
}

struct StatsAcc {
    columns: usize,
    peak: usize,
    total: usize,
    duplicates: usize,
}

impl StatsAcc {
    fn new() -> Self {
        StatsAcc {
            columns: 0,
            peak: 0,
            total: 0,
            duplicates: 0,
        }
    }

    fn record(&mut self, live: usize) {
        self.columns += 1;
        self.peak = self.peak.max(live);
        self.total += live;
    }

    fn finish(&self) -> IndexStats {
        IndexStats {
            columns: self.columns,
            peak_live_classes: self.peak,
            mean_live_classes: if self.columns == 0 {
                0.0
            } else {
                self.total as f64 / self.columns as f64
            },
            duplicate_classes_removed: self.duplicates,
        }
    }
}

mod dense {
    //! Component sets as bitsets of `S` limbs. Classes are fixed-size arrays,
    //! so the per-column work compiles to straight-line limb operations.

    use super::*;

    type Set<const S: usize> = [u64; S];

    #[inline(always)]
    fn is_zero<const S: usize>(a: &Set<S>) -> bool {
        a.iter().fold(0, |acc, &x| acc | x) == 0
    }

    #[inline(always)]
    fn and<const S: usize>(a: &Set<S>, b: &Set<S>) -> Set<S> {
        std::array::from_fn(|k| a[k] & b[k])
    }

    /// `a \ b`
    #[inline(always)]
    fn minus<const S: usize>(a: &Set<S>, b: &Set<S>) -> Set<S> {
        std::array::from_fn(|k| a[k] & !b[k])
    }

    fn disjoint<const S: usize>(a: &Set<S>, b: &Set<S>) -> bool {
        is_zero(&and(a, b))
    }

    /// Canonical component order, so equal classes are equal arrays. Sorts
    /// references and copies each component once.
    #[inline(always)]
    fn sort2<const S: usize>(a: &Set<S>, b: &Set<S>) -> [Set<S>; 2] {
        let (a, b) = if a > b { (b, a) } else { (a, b) };
        [*a, *b]
    }

    #[inline(always)]
    fn sort3<const S: usize>(a: &Set<S>, b: &Set<S>, c: &Set<S>) -> [Set<S>; 3] {
        let (a, b) = if a > b { (b, a) } else { (a, b) };
        let (b, c) = if b > c { (c, b) } else { (b, c) };
        let (a, b) = if a > b { (b, a) } else { (a, b) };
        [*a, *b, *c]
    }

    fn to_users(s: &[u64]) -> Vec<User> {
        let mut out = Vec::new();
        for (k, &limb) in s.iter().enumerate() {
            let mut l = limb;
            while l != 0 {
                let t = l.trailing_zeros();
                out.push((k * 64) as User + t);
                l &= l - 1;
            }
        }
        out
    }

    /// Rotate-xor fold with one final mix; equality is always checked in full.
    #[inline(always)]
    fn hash(class: &[u64]) -> u64 {
        let mut h = 0u64;
        for (k, &x) in class.iter().enumerate() {
            h ^= x.rotate_left((k as u32).wrapping_mul(23) & 63);
        }
        (h ^ (h >> 32)).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }

    /// Drops repeated classes in place, keeping first occurrences in order;
    /// returns how many were dropped. `table` is scratch space.
    fn dedup<const S: usize, const A: usize>(
        classes: &mut Vec<[Set<S>; A]>,
        table: &mut Vec<u32>,
    ) -> usize {
        let n = classes.len();
        if n < 2 {
            return 0;
        }
        let size = (2 * n).next_power_of_two();
        let mask = size - 1;
        // the multiply mixes upward, so take the slot from the top bits
        let shift = 64 - size.trailing_zeros();
        table.clear();
        table.resize(size, u32::MAX);
        let mut kept = 0usize;
        for k in 0..n {
            let mut slot = (hash(classes[k].as_flattened()) >> shift) as usize;
            let duplicate = loop {
                let t = table[slot];
                if t == u32::MAX {
                    break false;
                }
                if classes[t as usize] == classes[k] {
                    break true;
                }
                slot = (slot + 1) & mask;
            };
            if duplicate {
                continue;
            }
            if kept != k {
                classes[kept] = classes[k];
            }
            table[slot] = kept as u32;
            kept += 1;
        }
        classes.truncate(kept);
        n - kept
    }

    pub(super) fn run(w: &CodeMatrix, yprime: &BitWord) -> CompressedTriples {
        let n = w.n_users();
        let cols = match_columns(w, yprime);
        let limbs = limbs_for(n);
        macro_rules! dispatch {
            ($($s:literal),*) => {
                match limbs {
                    $(l if l <= $s => run_fixed::<$s>(n, &cols),)*
                    _ => unreachable!("dense path holds at most {DENSE_USER_LIMIT} users"),
                }
            };
        }
        dispatch!(1, 2, 3, 4, 5, 6, 8, 12, 16, 24, 32, 48, 64)
    }

    fn run_fixed<const S: usize>(n: usize, cols: &[Vec<u64>]) -> CompressedTriples {
        // padding limbs stay zero throughout
        let widen =
            |c: &[u64]| -> Set<S> { std::array::from_fn(|k| c.get(k).copied().unwrap_or(0)) };
        let cols: Vec<Set<S>> = cols.iter().map(|c| widen(c)).collect();
        let mut stats = StatsAcc::new();

        let mut l1: Set<S> = match cols.first() {
            Some(c) => *c,
            None => {
                let mut all = vec![u64::MAX; limbs_for(n)];
                crate::bits::mask_tail(&mut all, n);
                widen(&all)
            }
        };
        let mut pairs: Vec<[Set<S>; 2]> = Vec::new();
        let mut triples: Vec<[Set<S>; 3]> = Vec::new();
        let mut next_pairs: Vec<[Set<S>; 2]> = Vec::new();
        let mut next_triples: Vec<[Set<S>; 3]> = Vec::new();
        let mut table: Vec<u32> = Vec::new();

        for col in cols.iter().skip(1) {
            next_pairs.clear();
            next_triples.clear();

            // {L1 \ C, C \ L1}
            let a = minus(&l1, col);
            let b = minus(col, &l1);
            if !is_zero(&a) && !is_zero(&b) {
                next_pairs.push(sort2(&a, &b));
            }

            for [k1, k2] in pairs.iter() {
                debug_assert!(disjoint(k1, k2));
                // {K1 ∩ C, K2}
                let a = and(k1, col);
                if !is_zero(&a) {
                    next_pairs.push(sort2(&a, k2));
                }
                let a = minus(k1, col);
                if is_zero(&a) {
                    continue;
                }
                // {K1 \ C, K2 ∩ C}
                let b = and(k2, col);
                if !is_zero(&b) {
                    next_pairs.push(sort2(&a, &b));
                }
                // {K1 \ C, K2 \ C, C \ (K1 ∪ K2)}
                let c = minus(k2, col);
                let d = minus(&minus(col, k1), k2);
                if !is_zero(&c) && !is_zero(&d) {
                    next_triples.push(sort3(&a, &c, &d));
                }
            }

            for [k1, k2, k3] in triples.iter() {
                debug_assert!(disjoint(k1, k2) && disjoint(k1, k3) && disjoint(k2, k3));
                // {K1 ∩ C, K2, K3}
                let a = and(k1, col);
                if !is_zero(&a) {
                    next_triples.push(sort3(&a, k2, k3));
                }
                let a = minus(k1, col);
                if is_zero(&a) {
                    continue;
                }
                // {K1 \ C, K2 ∩ C, K3}
                let b = and(k2, col);
                if !is_zero(&b) {
                    next_triples.push(sort3(&a, &b, k3));
                }
                // {K1 \ C, K2 \ C, K3 ∩ C}
                let b = minus(k2, col);
                let c = and(k3, col);
                if !is_zero(&b) && !is_zero(&c) {
                    next_triples.push(sort3(&a, &b, &c));
                }
            }

            l1 = and(&l1, col);
            stats.duplicates +=
                dedup(&mut next_pairs, &mut table) + dedup(&mut next_triples, &mut table);
            std::mem::swap(&mut pairs, &mut next_pairs);
            std::mem::swap(&mut triples, &mut next_triples);
            stats.record(pairs.len() + triples.len());
        }

        let mut out = CompressedTriples {
            singles: to_users(&l1),
            pair_classes: pairs
                .iter()
                .map(|[k1, k2]| [to_users(k1), to_users(k2)])
                .collect(),
            triple_classes: triples
                .iter()
                .map(|[k1, k2, k3]| [to_users(k1), to_users(k2), to_users(k3)])
                .collect(),
            stats: stats.finish(),
        };
        out.canonicalize();
        out
    }
}

mod sparse {
    //! Component sets as sorted user lists; for large `N`.

    use super::*;

    type Set = Vec<User>;

    fn disjoint(a: &Set, b: &Set) -> bool {
        a.iter().all(|u| b.binary_search(u).is_err())
    }

    fn split(k: &Set, col: &[u64]) -> (Set, Set) {
        let member = |u: &User| (col[*u as usize / 64] >> (*u % 64)) & 1 == 1;
        k.iter().partition(|u| member(u))
    }

    fn users_of(col: &[u64], n: usize) -> Set {
        (0..n as User)
            .filter(|&u| (col[u as usize / 64] >> (u % 64)) & 1 == 1)
            .collect()
    }

    fn sort2(mut v: [Set; 2]) -> [Set; 2] {
        v.sort();
        v
    }

    fn sort3(mut v: [Set; 3]) -> [Set; 3] {
        v.sort();
        v
    }

    pub(super) fn run(w: &CodeMatrix, yprime: &BitWord) -> CompressedTriples {
        let n = w.n_users();
        let cols = match_columns(w, yprime);
        let mut stats = StatsAcc::new();

        let mut l1: Set = match cols.first() {
            Some(c) => users_of(c, n),
            None => (0..n as User).collect(),
        };
        let mut pairs: Vec<[Set; 2]> = Vec::new();
        let mut triples: Vec<[Set; 3]> = Vec::new();

        for col in cols.iter().skip(1) {
            let c_users = users_of(col, n);
            let mut next_pairs: Vec<[Set; 2]> = Vec::new();
            let mut next_triples: Vec<[Set; 3]> = Vec::new();

            let (l1_in, l1_out) = split(&l1, col);
            let c_minus_l1: Set = c_users
                .iter()
                .copied()
                .filter(|u| l1.binary_search(u).is_err())
                .collect();
            if !l1_out.is_empty() && !c_minus_l1.is_empty() {
                next_pairs.push(sort2([l1_out, c_minus_l1]));
            }

            for [k1, k2] in &pairs {
                debug_assert!(disjoint(k1, k2));
                let (k1_in, k1_out) = split(k1, col);
                let (k2_in, k2_out) = split(k2, col);
                if !k1_in.is_empty() {
                    next_pairs.push(sort2([k1_in, k2.clone()]));
                }
                if !k1_out.is_empty() && !k2_in.is_empty() {
                    next_pairs.push(sort2([k1_out.clone(), k2_in]));
                }
                if !k1_out.is_empty() && !k2_out.is_empty() {
                    let rest: Set = c_users
                        .iter()
                        .copied()
                        .filter(|u| k1.binary_search(u).is_err() && k2.binary_search(u).is_err())
                        .collect();
                    if !rest.is_empty() {
                        next_triples.push(sort3([k1_out, k2_out, rest]));
                    }
                }
            }

            for [k1, k2, k3] in &triples {
                let (k1_in, k1_out) = split(k1, col);
                if !k1_in.is_empty() {
                    next_triples.push(sort3([k1_in, k2.clone(), k3.clone()]));
                }
                if k1_out.is_empty() {
                    continue;
                }
                let (k2_in, k2_out) = split(k2, col);
                if !k2_in.is_empty() {
                    next_triples.push(sort3([k1_out.clone(), k2_in, k3.clone()]));
                }
                if !k2_out.is_empty() {
                    let (k3_in, _) = split(k3, col);
                    if !k3_in.is_empty() {
                        next_triples.push(sort3([k1_out, k2_out, k3_in]));
                    }
                }
            }

            l1 = l1_in;
            let before = next_pairs.len() + next_triples.len();
            next_pairs.sort();
            next_pairs.dedup();
            next_triples.sort();
            next_triples.dedup();
            stats.duplicates += before - next_pairs.len() - next_triples.len();
            pairs = next_pairs;
            triples = next_triples;
            stats.record(pairs.len() + triples.len());
        }

        let mut out = CompressedTriples {
            singles: l1,
            pair_classes: pairs,
            triple_classes: triples,
            stats: stats.finish(),
        };
        out.canonicalize();
        out
    }
}

/// Materializes every triple described by `c`, deduplicated.
///
/// Fails with [`Error::ExpansionOverflow`] once more than `cap` distinct
/// triples have been produced.
pub fn expand(c: &CompressedTriples, n_users: usize, cap: usize) -> Result<TripleSet> {
    let overflow = || Error::ExpansionOverflow {
        cap,
        singles: c.singles.len(),
        pairs: c.pair_classes.len(),
        triples: c.triple_classes.len(),
    };
    let mut out = TripleSet::new();
    let add = |t: Option<Triple>, out: &mut TripleSet| -> Result<()> {
        if let Some(t) = t {
            out.insert(t);
            if out.len() > cap {
                return Err(overflow());
            }
        }
        Ok(())
    };
    let n = n_users as User;
    for &i in &c.singles {
        for a in 0..n {
            for b in a + 1..n {
                add(Triple::new(i, a, b), &mut out)?;
            }
        }
    }
    for [k1, k2] in &c.pair_classes {
        for &x in k1 {
            for &y in k2 {
                for z in 0..n {
                    add(Triple::new(x, y, z), &mut out)?;
                }
            }
        }
    }
    for [k1, k2, k3] in &c.triple_classes {
        for &x in k1 {
            for &y in k2 {
                for &z in k3 {
                    add(Triple::new(x, y, z), &mut out)?;
                }
            }
        }
    }
    Ok(out)
}

const ORDERS3: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Membership in the expansion of `c` without expanding it.
pub fn contains_triple(c: &CompressedTriples, t: &Triple) -> bool {
    let m = t.members();
    let has = |set: &Vec<User>, u: User| set.binary_search(&u).is_ok();
    if m.iter().any(|&u| has(&c.singles, u)) {
        return true;
    }
    let pair_hit = c
        .pair_classes
        .iter()
        .any(|[k1, k2]| ORDERS3.iter().any(|o| has(k1, m[o[0]]) && has(k2, m[o[1]])));
    if pair_hit {
        return true;
    }
    c.triple_classes.iter().any(|[k1, k2, k3]| {
        ORDERS3
            .iter()
            .any(|o| has(k1, m[o[0]]) && has(k2, m[o[1]]) && has(k3, m[o[2]]))
    })
}

/// Upper bound on the expansion size, counting overlaps repeatedly.
pub fn expansion_upper_bound(c: &CompressedTriples, n_users: usize) -> u128 {
    let n = n_users as u128;
    let singles = c.singles.len() as u128 * n.saturating_sub(1) * n.saturating_sub(2) / 2;
    let pairs: u128 = c
        .pair_classes
        .iter()
        .map(|[a, b]| a.len() as u128 * b.len() as u128 * n.saturating_sub(2))
        .sum();
    let triples: u128 = c
        .triple_classes
        .iter()
        .map(|[a, b, d]| a.len() as u128 * b.len() as u128 * d.len() as u128)
        .sum();
    singles + pairs + triples
}

/// Users appearing in some class component.
pub fn support(c: &CompressedTriples) -> BTreeSet<User> {
    let mut s: BTreeSet<User> = c.singles.iter().copied().collect();
    for pc in &c.pair_classes {
        s.extend(pc.iter().flatten());
    }
    for tc in &c.triple_classes {
        s.extend(tc.iter().flatten());
    }
    s
}
