//! Unordered user triples and pairs, and the families built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// User index as stored in triple and pair families.
pub type User = u32;

/// An unordered 3-subset of users, stored sorted.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "[User; 3]", try_from = "[User; 3]")]
pub struct Triple([User; 3]);

impl Triple {
    /// Returns `None` unless the three users are distinct.
    pub fn new(a: User, b: User, c: User) -> Option<Self> {
        let mut v = [a, b, c];
        v.sort_unstable();
        (v[0] != v[1] && v[1] != v[2]).then_some(Triple(v))
    }

    pub fn members(&self) -> [User; 3] {
        self.0
    }

    pub fn contains(&self, u: User) -> bool {
        self.0.contains(&u)
    }

    pub fn intersects(&self, other: &Triple) -> bool {
        self.0.iter().any(|&u| other.contains(u))
    }

    /// The three pairs inside this triple.
    pub fn pairs(&self) -> [Pair; 3] {
        let [a, b, c] = self.0;
        [Pair([a, b]), Pair([a, c]), Pair([b, c])]
    }
}

impl From<Triple> for [User; 3] {
    fn from(t: Triple) -> Self {
        t.0
    }
}

impl TryFrom<[User; 3]> for Triple {
    type Error = String;

    fn try_from(v: [User; 3]) -> Result<Self, Self::Error> {
        Triple::new(v[0], v[1], v[2]).ok_or_else(|| format!("{v:?} has repeated users"))
    }
}

impl fmt::Debug for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{},{}}}", self.0[0], self.0[1], self.0[2])
    }
}

/// An unordered 2-subset of users, stored sorted.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "[User; 2]", try_from = "[User; 2]")]
pub struct Pair([User; 2]);

impl Pair {
    pub fn new(a: User, b: User) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Pair([a, b])),
            std::cmp::Ordering::Greater => Some(Pair([b, a])),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn members(&self) -> [User; 2] {
        self.0
    }

    pub fn contains(&self, u: User) -> bool {
        self.0.contains(&u)
    }

    /// The other member, if `u` is in the pair.
    pub fn partner(&self, u: User) -> Option<User> {
        if self.0[0] == u {
            Some(self.0[1])
        } else if self.0[1] == u {
            Some(self.0[0])
        } else {
            None
        }
    }

    pub fn hits(&self, t: &Triple) -> bool {
        t.contains(self.0[0]) || t.contains(self.0[1])
    }
}

impl From<Pair> for [User; 2] {
    fn from(p: Pair) -> Self {
        p.0
    }
}

impl TryFrom<[User; 2]> for Pair {
    type Error = String;

    fn try_from(v: [User; 2]) -> Result<Self, Self::Error> {
        Pair::new(v[0], v[1]).ok_or_else(|| format!("{v:?} has repeated users"))
    }
}

impl fmt::Debug for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.0[0], self.0[1])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TripleSet(BTreeSet<Triple>);

impl TripleSet {
    pub fn new() -> Self {
        TripleSet(BTreeSet::new())
    }

    pub fn insert(&mut self, t: Triple) -> bool {
        self.0.insert(t)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.0.contains(t)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.0.iter()
    }

    /// ⋃ of all members.
    pub fn union(&self) -> BTreeSet<User> {
        self.0.iter().flat_map(|t| t.members()).collect()
    }

    /// ⋂ of all members; empty for an empty family.
    pub fn intersection(&self) -> BTreeSet<User> {
        let mut it = self.0.iter();
        let Some(first) = it.next() else {
            return BTreeSet::new();
        };
        let mut common: BTreeSet<User> = first.members().into_iter().collect();
        for t in it {
            common.retain(|&u| t.contains(u));
            if common.is_empty() {
                break;
            }
        }
        common
    }
}

impl FromIterator<Triple> for TripleSet {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        TripleSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a TripleSet {
    type Item = &'a Triple;
    type IntoIter = std::collections::btree_set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// A pair family together with the number of pairs each user belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PairSet {
    pairs: BTreeSet<Pair>,
    multiplicity: BTreeMap<User, usize>,
}

impl PairSet {
    pub fn from_pairs<I: IntoIterator<Item = Pair>>(pairs: I) -> Self {
        let pairs: BTreeSet<Pair> = pairs.into_iter().collect();
        let mut multiplicity = BTreeMap::new();
        for p in &pairs {
            for u in p.members() {
                *multiplicity.entry(u).or_insert(0) += 1;
            }
        }
        PairSet {
            pairs,
            multiplicity,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, p: &Pair) -> bool {
        self.pairs.contains(p)
    }

    pub fn contains_users(&self, a: User, b: User) -> bool {
        Pair::new(a, b).is_some_and(|p| self.pairs.contains(&p))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pair> + '_ {
        self.pairs.iter()
    }

    pub fn multiplicity(&self, u: User) -> usize {
        self.multiplicity.get(&u).copied().unwrap_or(0)
    }

    /// `P_k`: users lying in exactly `k` pairs (`k ≥ 1`).
    pub fn users_with_multiplicity(&self, k: usize) -> BTreeSet<User> {
        self.multiplicity
            .iter()
            .filter(|&(_, &c)| c == k)
            .map(|(&u, _)| u)
            .collect()
    }

    /// Number of users per multiplicity.
    pub fn multiplicity_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for &c in self.multiplicity.values() {
            *h.entry(c).or_insert(0) += 1;
        }
        h
    }

    /// ⋃P
    pub fn union(&self) -> BTreeSet<User> {
        self.multiplicity.keys().copied().collect()
    }

    /// Users paired with some member of `group`.
    pub fn partners_of(&self, group: &BTreeSet<User>) -> BTreeSet<User> {
        self.pairs
            .iter()
            .flat_map(|p| {
                let [a, b] = p.members();
                let mut out = Vec::with_capacity(2);
                if group.contains(&b) {
                    out.push(a);
                }
                if group.contains(&a) {
                    out.push(b);
                }
                out
            })
            .collect()
    }
}

/// Shorthand for tests and examples: builds a [`TripleSet`] from arrays.
pub fn triple_set(triples: &[[User; 3]]) -> TripleSet {
    triples
        .iter()
        .map(|&[a, b, c]| Triple::new(a, b, c).expect("distinct members"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_normalizes_and_rejects_repeats() {
        assert_eq!(Triple::new(3, 1, 2), Triple::new(1, 2, 3));
        assert!(Triple::new(1, 1, 2).is_none());
        assert_eq!(Triple::new(5, 2, 9).unwrap().members(), [2, 5, 9]);
    }

    #[test]
    fn pair_partners() {
        let p = Pair::new(4, 1).unwrap();
        assert_eq!(p.members(), [1, 4]);
        assert_eq!(p.partner(1), Some(4));
        assert_eq!(p.partner(4), Some(1));
        assert_eq!(p.partner(2), None);
        assert!(Pair::new(2, 2).is_none());
    }

    #[test]
    fn family_union_intersection() {
        let t = triple_set(&[[0, 1, 2], [0, 1, 3], [0, 4, 5]]);
        assert_eq!(t.union().len(), 6);
        assert_eq!(t.intersection(), [0].into_iter().collect());
        assert!(TripleSet::new().intersection().is_empty());
    }

    #[test]
    fn serde_shape() {
        let t = triple_set(&[[2, 0, 1]]);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, "[[0,1,2]]");
        let back: TripleSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<TripleSet>("[[1,1,2]]").is_err());
    }
}
