//! The parent-triple phase of tracing (Steps 5 to 15).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::triples::{Pair, PairSet, Triple, TripleSet, User};

/// The step at which tracing halted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Step {
    /// Some score reached the threshold.
    Score = 4,
    /// No candidate triple meets every other one.
    EmptyCore = 5,
    /// The core triples share a member.
    CommonMember = 6,
    /// Some user lies in exactly one hitting pair.
    SingleMultiplicity = 8,
    SevenPairs = 9,
    SixPairs = 10,
    FivePairsWithTriangle = 11,
    FivePairsNoTriangle = 12,
    FourPairs = 13,
    ThreePairs = 14,
    Nobody = 15,
}

impl Step {
    pub const ALL: [Step; 11] = [
        Step::Score,
        Step::EmptyCore,
        Step::CommonMember,
        Step::SingleMultiplicity,
        Step::SevenPairs,
        Step::SixPairs,
        Step::FivePairsWithTriangle,
        Step::FivePairsNoTriangle,
        Step::FourPairs,
        Step::ThreePairs,
        Step::Nobody,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl From<Step> for u8 {
    fn from(s: Step) -> u8 {
        s.number()
    }
}

impl TryFrom<u8> for Step {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        Step::ALL
            .into_iter()
            .find(|s| s.number() == n)
            .ok_or_else(|| format!("{n} is not a halting step"))
    }
}

/// Sizes of the intermediate families, for diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderDiagnostics {
    pub candidate_triples: usize,
    pub core_triples: usize,
    pub hitting_pairs: Option<usize>,
    /// multiplicity k -> |P_k|
    pub multiplicity_histogram: BTreeMap<usize, usize>,
    /// Step 13 fired with no core triple inside ⋃P, so every member of ⋃P
    /// was output.
    pub step13_vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderOutcome {
    pub accused: BTreeSet<User>,
    pub halted_at: Step,
    pub diagnostics: LadderDiagnostics,
}

/// `T′`: the candidate triples that meet every other candidate.
///
/// For a member `T = {a, b, c}` the number of candidates meeting `T` follows
/// from inclusion-exclusion over the per-user and per-pair counts, which
/// keeps this linear in the family size.
pub fn compute_t_prime(t: &TripleSet) -> TripleSet {
    let mut by_user: HashMap<User, usize> = HashMap::new();
    let mut by_pair: HashMap<Pair, usize> = HashMap::new();
    for tri in t {
        for u in tri.members() {
            *by_user.entry(u).or_default() += 1;
        }
        for p in tri.pairs() {
            *by_pair.entry(p).or_default() += 1;
        }
    }
    let total = t.len();
    t.iter()
        .filter(|tri| {
            let singles: usize = tri.members().iter().map(|u| by_user[u]).sum();
            let doubles: usize = tri.pairs().iter().map(|p| by_pair[p]).sum();
            // only `tri` itself contains all three members
            singles - doubles + 1 == total
        })
        .copied()
        .collect()
}

/// `P`: pairs of users meeting every triple of `t_prime`.
///
/// Candidate pairs are drawn from `⋃T′`. A pair `{a, b}` hits everything iff
/// `b` lies in every triple that misses `a`, so for each `a` the partners are
/// read off the intersection of those triples. When no triple misses `a`,
/// every other user of `⋃T′` is a partner.
pub fn compute_pair_set(t_prime: &TripleSet) -> PairSet {
    let universe = t_prime.union();
    let mut pairs = Vec::new();
    for &a in &universe {
        let mut missing = t_prime.iter().filter(|t| !t.contains(a));
        let partners: BTreeSet<User> = match missing.next() {
            None => universe.iter().copied().filter(|&b| b != a).collect(),
            Some(first) => {
                let mut common: BTreeSet<User> = first.members().into_iter().collect();
                for t in missing {
                    common.retain(|&u| t.contains(u));
                    if common.is_empty() {
                        break;
                    }
                }
                common
            }
        };
        pairs.extend(
            partners
                .into_iter()
                .filter(|&b| b > a)
                .filter_map(|b| Pair::new(a, b)),
        );
    }
    PairSet::from_pairs(pairs)
}

/// Runs Steps 5 to 15 on the candidate family `T(y′)`.
pub fn resolve_from_triples(t: &TripleSet) -> LadderOutcome {
    let mut diagnostics = LadderDiagnostics {
        candidate_triples: t.len(),
        ..Default::default()
    };
    let halt =
        |accused: BTreeSet<User>, step: Step, diagnostics: LadderDiagnostics| LadderOutcome {
            accused,
            halted_at: step,
            diagnostics,
        };

    // Step 5
    let core = compute_t_prime(t);
    diagnostics.core_triples = core.len();
    if core.is_empty() {
        return halt(BTreeSet::new(), Step::EmptyCore, diagnostics);
    }

    // Step 6
    let common = core.intersection();
    if !common.is_empty() {
        return halt(common, Step::CommonMember, diagnostics);
    }

    // Step 7
    let pairs = compute_pair_set(&core);
    diagnostics.hitting_pairs = Some(pairs.len());
    diagnostics.multiplicity_histogram = pairs.multiplicity_histogram();

    // Step 8
    let p1 = pairs.users_with_multiplicity(1);
    if !p1.is_empty() {
        return halt(
            pairs.partners_of(&p1),
            Step::SingleMultiplicity,
            diagnostics,
        );
    }

    match pairs.len() {
        // Step 9
        7 => {
            let p2 = pairs.users_with_multiplicity(2);
            halt(pairs.partners_of(&p2), Step::SevenPairs, diagnostics)
        }
        // Step 10
        6 => halt(
            pairs.users_with_multiplicity(3),
            Step::SixPairs,
            diagnostics,
        ),
        5 => {
            let triangles: Vec<&Triple> = core
                .iter()
                .filter(|tri| tri.pairs().iter().all(|p| pairs.contains(p)))
                .collect();
            if !triangles.is_empty() {
                // Step 11
                let covered: BTreeSet<User> =
                    triangles.iter().flat_map(|tri| tri.members()).collect();
                let accused = pairs
                    .users_with_multiplicity(2)
                    .intersection(&covered)
                    .copied()
                    .collect();
                halt(accused, Step::FivePairsWithTriangle, diagnostics)
            } else {
                // Step 12
                let support = pairs.union();
                let accused = support
                    .iter()
                    .copied()
                    .filter(|&i| {
                        support
                            .iter()
                            .any(|&j| j != i && !pairs.contains_users(i, j))
                    })
                    .collect();
                halt(accused, Step::FivePairsNoTriangle, diagnostics)
            }
        }
        // Step 13
        4 => {
            let support = pairs.union();
            let inside: Vec<&Triple> = core
                .iter()
                .filter(|tri| tri.members().iter().all(|u| support.contains(u)))
                .collect();
            diagnostics.step13_vacuous = inside.is_empty();
            let accused = support
                .iter()
                .copied()
                .filter(|&i| inside.iter().all(|tri| tri.contains(i)))
                .collect();
            halt(accused, Step::FourPairs, diagnostics)
        }
        // Step 14
        3 => halt(pairs.union(), Step::ThreePairs, diagnostics),
        // Step 15
        _ => halt(BTreeSet::new(), Step::Nobody, diagnostics),
    }
}
