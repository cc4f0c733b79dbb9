//! Pirate strategies and the Marking Assumption.
//!
//! A column is undetectable when every pirate holds the same bit there. Any
//! attack word must copy that bit on undetectable columns; everywhere else the
//! pirates are free to write 0, 1 or the erasure symbol.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::BitWord;
use crate::codegen::CodeMatrix;
use crate::error::{Error, Mismatch, Result};
use crate::rng::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Zero,
    One,
    Erased,
}

impl Symbol {
    pub fn from_bit(b: bool) -> Self {
        if b {
            Symbol::One
        } else {
            Symbol::Zero
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::Zero => '0',
            Symbol::One => '1',
            Symbol::Erased => '?',
        }
    }

    /// The bit, or `None` for an erasure.
    pub fn bit(self) -> Option<bool> {
        match self {
            Symbol::Zero => Some(false),
            Symbol::One => Some(true),
            Symbol::Erased => None,
        }
    }
}

/// A word over {0, 1, ?}.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AttackWord {
    symbols: Vec<Symbol>,
}

impl AttackWord {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        AttackWord { symbols }
    }

    pub fn from_bits(bits: &BitWord) -> Self {
        AttackWord {
            symbols: bits.iter().map(Symbol::from_bit).collect(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(Symbol::Zero),
                '1' => Some(Symbol::One),
                '?' => Some(Symbol::Erased),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(AttackWord::new)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn get(&self, j: usize) -> Symbol {
        self.symbols[j]
    }

    pub fn has_erasures(&self) -> bool {
        self.symbols.contains(&Symbol::Erased)
    }
}

impl fmt::Display for AttackWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for AttackWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AttackWord({self})")
    }
}

/// The coalition: one to three distinct users.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PirateSet {
    members: Vec<usize>,
}

impl PirateSet {
    pub const MAX_PIRATES: usize = 3;

    pub fn new(mut members: Vec<usize>, n_users: usize) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() || members.len() > Self::MAX_PIRATES {
            return Err(Error::InvalidParams(format!(
                "a pirate set needs 1 to 3 distinct users, got {}",
                members.len()
            )));
        }
        if let Some(&bad) = members.iter().find(|&&i| i >= n_users) {
            return Err(Error::InvalidParams(format!(
                "pirate {bad} is not a user of a {n_users}-user code"
            )));
        }
        Ok(PirateSet { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, user: usize) -> bool {
        self.members.contains(&user)
    }

    pub fn codewords<'a>(&self, matrix: &'a CodeMatrix) -> Vec<&'a BitWord> {
        self.members.iter().map(|&i| matrix.row(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnPartition {
    pub undetectable: Vec<usize>,
    pub detectable: Vec<usize>,
}

fn check_codewords(codewords: &[&BitWord]) -> Result<usize> {
    let first = codewords
        .first()
        .ok_or_else(|| Error::InvalidParams("no pirate codewords given".into()))?;
    let m = first.len();
    if let Some(bad) = codewords.iter().find(|w| w.len() != m) {
        return Err(Mismatch::WordLength {
            expected: m,
            found: bad.len(),
        }
        .into());
    }
    Ok(m)
}

/// The common bit of column `j`, or `None` if the column is detectable.
#[inline]
fn common_bit(codewords: &[&BitWord], j: usize) -> Option<bool> {
    let b = codewords[0].get(j);
    codewords[1..].iter().all(|w| w.get(j) == b).then_some(b)
}

pub fn detectable_columns(codewords: &[&BitWord]) -> Result<ColumnPartition> {
    let m = check_codewords(codewords)?;
    let (undetectable, detectable) = (0..m).partition(|&j| common_bit(codewords, j).is_some());
    Ok(ColumnPartition {
        undetectable,
        detectable,
    })
}

/// Returns the undetectable columns where `y` does not copy the common bit.
/// An erasure on an undetectable column counts as a violation.
pub fn check_marking_assumption(codewords: &[&BitWord], y: &AttackWord) -> Result<Vec<usize>> {
    let m = check_codewords(codewords)?;
    if y.len() != m {
        return Err(Mismatch::WordLength {
            expected: m,
            found: y.len(),
        }
        .into());
    }
    Ok((0..m)
        .filter(|&j| match common_bit(codewords, j) {
            Some(b) => y.get(j) != Symbol::from_bit(b),
            None => false,
        })
        .collect())
}

/// Fails with [`Error::MarkingViolation`] unless `y` copies every
/// undetectable column.
pub fn enforce_marking_assumption(codewords: &[&BitWord], y: &AttackWord) -> Result<()> {
    let columns = check_marking_assumption(codewords, y)?;
    if columns.is_empty() {
        Ok(())
    } else {
        Err(Error::MarkingViolation { columns })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Majority,
    Minority,
    Interleave,
    RandomBit,
    EraseDetectable,
    Unbalanced,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Majority,
        StrategyKind::Minority,
        StrategyKind::Interleave,
        StrategyKind::RandomBit,
        StrategyKind::EraseDetectable,
        StrategyKind::Unbalanced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Majority => "majority",
            StrategyKind::Minority => "minority",
            StrategyKind::Interleave => "interleave",
            StrategyKind::RandomBit => "random-bit",
            StrategyKind::EraseDetectable => "erase-detectable",
            StrategyKind::Unbalanced => "unbalanced",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown attack kind '{s}'")))
    }
}

/// A pirate strategy: anything that turns pirate codewords and a random
/// stream into an attack word. The simulator checks the Marking Assumption
/// on every output, so implementations outside this crate are held to the
/// same contract as the built-in ones.
pub trait PirateStrategy: Send + Sync {
    fn attack(&self, codewords: &[&BitWord], rng: &mut dyn RngCore) -> Result<AttackWord>;

    fn name(&self) -> String;

    /// Whether the strategy may emit erasure symbols.
    fn may_erase(&self) -> bool {
        true
    }
}

/// One of the built-in strategies.
///
/// On detectable columns: `majority` writes the bit held by at least two
/// pirates; `minority` the bit held by exactly one of three; `interleave`
/// copies a uniformly chosen pirate; `random-bit` flips a fair coin;
/// `erase-detectable` erases with probability `erase_prob` and otherwise votes
/// by majority; `unbalanced` copies a pirate drawn by `weights`. Whenever two
/// pirates split 1-1 the majority and minority votes are a fair coin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erase_prob: Option<f64>,
}

impl Strategy {
    pub fn simple(kind: StrategyKind) -> Self {
        Strategy {
            kind,
            weights: None,
            erase_prob: None,
        }
    }

    pub fn majority() -> Self {
        Self::simple(StrategyKind::Majority)
    }

    pub fn minority() -> Self {
        Self::simple(StrategyKind::Minority)
    }

    pub fn interleave() -> Self {
        Self::simple(StrategyKind::Interleave)
    }

    pub fn random_bit() -> Self {
        Self::simple(StrategyKind::RandomBit)
    }

    pub fn erase_detectable(erase_prob: f64) -> Self {
        Strategy {
            erase_prob: Some(erase_prob),
            ..Self::simple(StrategyKind::EraseDetectable)
        }
    }

    pub fn unbalanced(weights: Vec<f64>) -> Self {
        Strategy {
            weights: Some(weights),
            ..Self::simple(StrategyKind::Unbalanced)
        }
    }

    /// Checks the optional fields against the kind and, when given, the
    /// coalition size.
    pub fn validate(&self, n_pirates: Option<usize>) -> Result<()> {
        if let Some(w) = &self.weights {
            if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::InvalidParams("weights must be nonnegative".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!(
                    "weights must sum to 1, got {total}"
                )));
            }
        }
        if let Some(e) = self.erase_prob {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::InvalidParams(format!(
                    "erase_prob must lie in [0, 1], got {e}"
                )));
            }
        }
        match self.kind {
            StrategyKind::Unbalanced => {
                let w = self.weights.as_ref().ok_or_else(|| {
                    Error::InvalidParams("the unbalanced attack needs weights".into())
                })?;
                if let Some(k) = n_pirates {
                    if w.len() != k {
                        return Err(Error::InvalidParams(format!(
                            "{} weights given for {k} pirates",
                            w.len()
                        )));
                    }
                }
            }
            StrategyKind::EraseDetectable if self.erase_prob.is_none() => {
                return Err(Error::InvalidParams(
                    "the erase-detectable attack needs erase_prob".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    fn fill(&self, codewords: &[&BitWord], rng: &mut dyn RngCore) -> Result<AttackWord> {
        let m = check_codewords(codewords)?;
        let k = codewords.len();
        self.validate(Some(k))?;
        let weighted = match &self.weights {
            Some(w) if self.kind == StrategyKind::Unbalanced => Some(
                WeightedIndex::new(w)
                    .map_err(|e| Error::InvalidParams(format!("bad weights: {e}")))?,
            ),
            _ => None,
        };
        let mut symbols = Vec::with_capacity(m);
        for j in 0..m {
            if let Some(b) = common_bit(codewords, j) {
                symbols.push(Symbol::from_bit(b));
                continue;
            }
            let ones = codewords.iter().filter(|w| w.get(j)).count();
            let zeros = k - ones;
            let bit = match self.kind {
                StrategyKind::Majority => vote(ones, zeros, rng),
                StrategyKind::Minority => vote(zeros, ones, rng),
                StrategyKind::Interleave => codewords[rng.random_range(0..k)].get(j),
                StrategyKind::RandomBit => rng.random_bool(0.5),
                StrategyKind::EraseDetectable => {
                    let e = self.erase_prob.unwrap_or(0.0);
                    if rng.random_bool(e) {
                        symbols.push(Symbol::Erased);
                        continue;
                    }
                    vote(ones, zeros, rng)
                }
                StrategyKind::Unbalanced => {
                    let pick = weighted.as_ref().expect("validated").sample(rng);
                    codewords[pick].get(j)
                }
            };
            symbols.push(Symbol::from_bit(bit));
        }
        Ok(AttackWord::new(symbols))
    }
}

/// 1 if `for_one > for_zero`, 0 if fewer, a fair coin on a tie.
fn vote(for_one: usize, for_zero: usize, rng: &mut dyn RngCore) -> bool {
    match for_one.cmp(&for_zero) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => rng.random_bool(0.5),
    }
}

impl PirateStrategy for Strategy {
    fn attack(&self, codewords: &[&BitWord], rng: &mut dyn RngCore) -> Result<AttackWord> {
        self.fill(codewords, rng)
    }

    fn name(&self) -> String {
        self.kind.name().to_string()
    }

    fn may_erase(&self) -> bool {
        self.kind == StrategyKind::EraseDetectable && self.erase_prob != Some(0.0)
    }
}

/// Runs a strategy on the given pirate codewords with the stream named by `seed`.
pub fn apply_strategy(
    strategy: &dyn PirateStrategy,
    codewords: &[&BitWord],
    seed: Seed,
) -> Result<AttackWord> {
    let mut rng = seed.rng();
    strategy.attack(codewords, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamLabel;

    fn words(ws: &[&str]) -> Vec<BitWord> {
        ws.iter().map(|s| BitWord::parse(s).unwrap()).collect()
    }

    fn seed() -> Seed {
        Seed::new(5, StreamLabel::Attack)
    }

    fn run(strategy: &Strategy, ws: &[BitWord]) -> AttackWord {
        let refs: Vec<&BitWord> = ws.iter().collect();
        apply_strategy(strategy, &refs, seed()).unwrap()
    }

    #[test]
    fn detectable_partition() {
        let ws = words(&["000", "011", "010"]);
        let refs: Vec<&BitWord> = ws.iter().collect();
        let part = detectable_columns(&refs).unwrap();
        assert_eq!(part.undetectable, vec![0]);
        assert_eq!(part.detectable, vec![1, 2]);

        let single = detectable_columns(&refs[..1]).unwrap();
        assert_eq!(single.undetectable, vec![0, 1, 2]);

        let same = words(&["101", "101", "101"]);
        let refs: Vec<&BitWord> = same.iter().collect();
        assert!(detectable_columns(&refs).unwrap().detectable.is_empty());

        assert!(detectable_columns(&[]).is_err());
    }

    #[test]
    fn majority_and_minority() {
        let ws = words(&["0011", "0101", "0110"]);
        assert_eq!(run(&Strategy::majority(), &ws).to_string(), "0111");
        assert_eq!(run(&Strategy::minority(), &ws).to_string(), "0000");
    }

    #[test]
    fn erase_everything_detectable() {
        let ws = words(&["000", "011"]);
        assert_eq!(
            run(&Strategy::erase_detectable(1.0), &ws).to_string(),
            "0??"
        );
        assert_eq!(run(&Strategy::erase_detectable(0.0), &ws).len(), 3);
    }

    #[test]
    fn single_pirate_copies() {
        let ws = words(&["10110"]);
        for kind in StrategyKind::ALL {
            let s = match kind {
                StrategyKind::EraseDetectable => Strategy::erase_detectable(0.5),
                StrategyKind::Unbalanced => Strategy::unbalanced(vec![1.0]),
                _ => Strategy::simple(kind),
            };
            assert_eq!(run(&s, &ws).to_string(), "10110", "{kind:?}");
        }
    }

    #[test]
    fn marking_assumption_check() {
        let ws = words(&["000", "011"]);
        let refs: Vec<&BitWord> = ws.iter().collect();
        let ok = AttackWord::parse("0?1").unwrap();
        assert!(check_marking_assumption(&refs, &ok).unwrap().is_empty());
        let flipped = AttackWord::parse("100").unwrap();
        assert_eq!(check_marking_assumption(&refs, &flipped).unwrap(), vec![0]);
        let erased = AttackWord::parse("?00").unwrap();
        assert_eq!(check_marking_assumption(&refs, &erased).unwrap(), vec![0]);
        let short = AttackWord::parse("00").unwrap();
        assert!(check_marking_assumption(&refs, &short).is_err());
    }

    #[test]
    fn strategy_validation() {
        assert!(Strategy::simple(StrategyKind::Unbalanced)
            .validate(None)
            .is_err());
        assert!(Strategy::simple(StrategyKind::EraseDetectable)
            .validate(None)
            .is_err());
        assert!(Strategy::unbalanced(vec![0.5, 0.6]).validate(None).is_err());
        assert!(Strategy::unbalanced(vec![-0.5, 1.5])
            .validate(None)
            .is_err());
        assert!(Strategy::unbalanced(vec![0.6, 0.2, 0.2])
            .validate(Some(2))
            .is_err());
        assert!(Strategy::erase_detectable(1.5).validate(None).is_err());
        assert!(Strategy::unbalanced(vec![0.6, 0.2, 0.2])
            .validate(Some(3))
            .is_ok());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in StrategyKind::ALL {
            assert_eq!(kind.name().parse::<StrategyKind>().unwrap(), kind);
        }
        assert!("bogus".parse::<StrategyKind>().is_err());
        let json = serde_json::to_string(&Strategy::unbalanced(vec![0.6, 0.2, 0.2])).unwrap();
        assert_eq!(json, r#"{"kind":"unbalanced","weights":[0.6,0.2,0.2]}"#);
    }

    #[test]
    fn attack_word_text() {
        let y = AttackWord::parse("01?").unwrap();
        assert_eq!(y.to_string(), "01?");
        assert!(y.has_erasures());
        assert!(AttackWord::parse("01x").is_none());
    }
}
