//! The tracing algorithm.
//!
//! Tracing runs in two phases. Erasures are first resolved at random with the
//! column biases; then every user is scored against the resolved word `y′`
//! and everyone at or above the threshold is accused. If nobody reaches the
//! threshold, the candidate parent triples `T(y′)` are enumerated and the
//! set-algebra ladder in [`ladder`] picks the output.

pub mod ladder;
pub mod threshold;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{AttackWord, Symbol};
use crate::bits::{mask_tail, BitWord};
use crate::codegen::{validate_dimensions, CodeMatrix, CodeParams, StateInfo};
use crate::envelope::{self, ClassCounts, CompressedTriples, TripleEngine};
use crate::error::{Mismatch, Result};
use crate::rng::Seed;

pub use ladder::{
    compute_pair_set, compute_t_prime, resolve_from_triples, LadderDiagnostics, LadderOutcome, Step,
};
pub use threshold::{
    lattice_value, normalized_z0, threshold_exact, threshold_exact_detail, threshold_z0,
    ExactThreshold, Threshold, ThresholdMode, DEFAULT_EXACT_CAP,
};

/// The attack word with every erasure replaced by a bit.
pub type ResolvedWord = BitWord;

/// Replaces each '?' at column `j` by 1 with probability `p_j`, else 0.
pub fn resolve_erasures(y: &AttackWord, state: &StateInfo, seed: Seed) -> Result<ResolvedWord> {
    if y.len() != state.len() {
        return Err(Mismatch::WordLength {
            expected: state.len(),
            found: y.len(),
        }
        .into());
    }
    let mut rng = seed.rng();
    let mut out = BitWord::zeros(y.len());
    for (j, s) in y.symbols().iter().enumerate() {
        let bit = match s {
            Symbol::Zero => false,
            Symbol::One => true,
            Symbol::Erased => rng.random_bool(state.column_bias[j]),
        };
        if bit {
            out.set(j, true);
        }
    }
    Ok(out)
}

/// The split of columns into `A_H` (the bit of `y′` has probability `p`
/// under the column bias) and `A_L` (probability `1 - p`). At p = 1/2 both
/// patterns match and every column goes to `A_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnClasses {
    pub bias: f64,
    pub a_h: usize,
    pub a_l: usize,
    /// Bit `j` set iff `j ∈ A_H`.
    pub high: BitWord,
}

impl ColumnClasses {
    /// Classes with the first `a_h` columns high; for threshold arithmetic
    /// that depends only on the counts.
    pub fn from_counts(bias: f64, a_h: usize, a_l: usize) -> Self {
        let mut high = BitWord::zeros(a_h + a_l);
        for j in 0..a_h {
            high.set(j, true);
        }
        ColumnClasses {
            bias,
            a_h,
            a_l,
            high,
        }
    }

    pub fn is_high(&self, column: usize) -> bool {
        self.high.get(column)
    }
}

pub fn classify_columns(yprime: &ResolvedWord, state: &StateInfo) -> Result<ColumnClasses> {
    if yprime.len() != state.len() {
        return Err(Mismatch::WordLength {
            expected: state.len(),
            found: yprime.len(),
        }
        .into());
    }
    let p = state.bias;
    let mut high = BitWord::zeros(yprime.len());
    for j in 0..yprime.len() {
        let pj = state.column_bias[j];
        let bit = yprime.get(j);
        if (pj == p && bit) || (pj == 1.0 - p && !bit) {
            high.set(j, true);
        }
    }
    let a_h = high.count_ones();
    Ok(ColumnClasses {
        bias: p,
        a_h,
        a_l: yprime.len() - a_h,
        high,
    })
}

/// A user's score, kept as match counts so comparisons at p = 1/2 are exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub count_h: usize,
    pub count_l: usize,
    pub value: f64,
}

impl Score {
    /// Number of columns where the codeword agrees with `y′`.
    pub fn matches(&self) -> usize {
        self.count_h + self.count_l
    }
}

/// `S = |K_H|·log(1/p) + |K_L|·log(1/(1-p))` where `K_σ` are the columns of
/// `A_σ` on which `w` agrees with `y′`.
pub fn score(w: &BitWord, yprime: &ResolvedWord, classes: &ColumnClasses) -> Score {
    assert_eq!(w.len(), yprime.len());
    let mut count_h = 0usize;
    let mut count_l = 0usize;
    let n_limbs = w.limbs().len();
    for (i, ((a, b), h)) in w
        .limbs()
        .iter()
        .zip(yprime.limbs())
        .zip(classes.high.limbs())
        .enumerate()
    {
        let mut agree = [!(a ^ b)];
        if i + 1 == n_limbs {
            mask_tail(&mut agree, w.len());
        }
        count_h += (agree[0] & h).count_ones() as usize;
        count_l += (agree[0] & !h).count_ones() as usize;
    }
    Score {
        count_h,
        count_l,
        value: lattice_value(classes.bias, count_h, count_l),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    /// `None` picks [`ThresholdMode::default_for`] the bias.
    pub threshold: Option<ThresholdMode>,
    pub engine: TripleEngine,
    pub max_expand: usize,
    pub exact_cap: usize,
    pub naive_cap: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            threshold: None,
            engine: TripleEngine::Indexed,
            max_expand: envelope::DEFAULT_MAX_EXPAND,
            exact_cap: DEFAULT_EXACT_CAP,
            naive_cap: envelope::DEFAULT_NAIVE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    pub threshold: Threshold,
    pub a_h: usize,
    pub a_l: usize,
    pub erasures: usize,
    pub max_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<ClassCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub accused: Vec<usize>,
    pub halted_at: Step,
    pub diagnostics: TraceDiagnostics,
    /// The compressed parent triples, when the indexed engine ran.
    #[serde(skip)]
    pub triples: Option<CompressedTriples>,
}

/// Traces `y` with the default engine and caps.
pub fn trace(
    y: &AttackWord,
    w: &CodeMatrix,
    state: &StateInfo,
    params: &CodeParams,
    seed: Seed,
    threshold_mode: ThresholdMode,
) -> Result<TraceResult> {
    let opts = TraceOptions {
        threshold: Some(threshold_mode),
        ..TraceOptions::default()
    };
    trace_with(y, w, state, params, seed, &opts)
}

/// Runs the full tracing algorithm. `seed` drives erasure resolution.
pub fn trace_with(
    y: &AttackWord,
    w: &CodeMatrix,
    state: &StateInfo,
    params: &CodeParams,
    seed: Seed,
    opts: &TraceOptions,
) -> Result<TraceResult> {
    params.validate()?;
    validate_dimensions(w, state, params)?;
    if y.len() != params.code_length {
        return Err(Mismatch::WordLength {
            expected: params.code_length,
            found: y.len(),
        }
        .into());
    }

    // Step 1
    let erasures = y.symbols().iter().filter(|&&s| s == Symbol::Erased).count();
    let yprime = resolve_erasures(y, state, seed)?;

    // Step 2
    let classes = classify_columns(&yprime, state)?;
    let mode = opts
        .threshold
        .unwrap_or_else(|| ThresholdMode::default_for(params.bias));
    let threshold = Threshold::compute(mode, &classes, params, opts.exact_cap)?;

    // Step 3
    let scores: Vec<Score> = w
        .rows()
        .iter()
        .map(|row| score(row, &yprime, &classes))
        .collect();
    let max_score = scores.iter().map(|s| s.value).fold(0.0, f64::max);

    let mut diagnostics = TraceDiagnostics {
        threshold,
        a_h: classes.a_h,
        a_l: classes.a_l,
        erasures,
        max_score,
        ladder: None,
        index: None,
    };

    // Step 4
    let over: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| threshold.accuses(s))
        .map(|(i, _)| i)
        .collect();
    if !over.is_empty() {
        return Ok(TraceResult {
            accused: over,
            halted_at: Step::Score,
            diagnostics,
            triples: None,
        });
    }

    // Steps 5-15
    let mut kept = None;
    let candidates = match opts.engine {
        TripleEngine::Indexed => {
            let compressed = envelope::triples_indexed(w, &yprime)?;
            diagnostics.index = Some(compressed.class_counts());
            let expanded = envelope::expand(&compressed, w.n_users(), opts.max_expand)?;
            kept = Some(compressed);
            expanded
        }
        TripleEngine::Naive => envelope::triples_naive_capped(w, &yprime, opts.naive_cap)?,
    };
    let outcome = resolve_from_triples(&candidates);
    diagnostics.ladder = Some(outcome.diagnostics);
    Ok(TraceResult {
        accused: outcome.accused.into_iter().map(|u| u as usize).collect(),
        halted_at: outcome.halted_at,
        diagnostics,
        triples: kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamLabel;

    fn state(bias: f64, cols: &[bool]) -> StateInfo {
        StateInfo {
            bias,
            column_bias: cols
                .iter()
                .map(|&h| if h { bias } else { 1.0 - bias })
                .collect(),
        }
    }

    fn seed(s: u64) -> Seed {
        Seed::new(s, StreamLabel::ErasureResolution)
    }

    #[test]
    fn resolve_without_erasures_copies() {
        let y = AttackWord::parse("0110").unwrap();
        let st = state(0.5, &[true; 4]);
        assert_eq!(
            resolve_erasures(&y, &st, seed(1)).unwrap().to_string(),
            "0110"
        );
    }

    #[test]
    fn resolve_erasures_follow_column_bias() {
        let y = AttackWord::parse("??").unwrap();
        let st = state(0.5, &[true, true]);
        let trials = 10_000;
        let ones: usize = (0..trials)
            .map(|s| resolve_erasures(&y, &st, seed(s)).unwrap().count_ones())
            .sum();
        let frac = ones as f64 / (2 * trials) as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");

        let y = AttackWord::parse("?").unwrap();
        let st = state(0.99, &[true]);
        let ones = (0..trials)
            .filter(|&s| resolve_erasures(&y, &st, seed(s)).unwrap().get(0))
            .count();
        let frac = ones as f64 / trials as f64;
        // sd = sqrt(0.99 * 0.01 / 1e4) ≈ 0.001
        assert!((frac - 0.99).abs() < 0.004, "{frac}");
    }

    #[test]
    fn classification() {
        let st = state(0.5, &[true, false, true]);
        let y = BitWord::parse("010").unwrap();
        let c = classify_columns(&y, &st).unwrap();
        assert_eq!((c.a_h, c.a_l), (3, 0));

        // p = 0.9: (p, 1) and (1-p, 0) are high
        let st = state(0.9, &[true, true, false, false]);
        let y = BitWord::parse("1010").unwrap();
        let c = classify_columns(&y, &st).unwrap();
        assert!(c.is_high(0));
        assert!(!c.is_high(1));
        assert!(!c.is_high(2));
        assert!(c.is_high(3));
        assert_eq!((c.a_h, c.a_l), (2, 2));
    }

    #[test]
    fn score_examples() {
        let st = state(0.5, &[true; 4]);
        let y = BitWord::parse("0110").unwrap();
        let c = classify_columns(&y, &st).unwrap();
        let s = score(&y, &y, &c);
        assert_eq!(s.matches(), 4);
        assert!((s.value - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let comp = BitWord::parse("1001").unwrap();
        assert_eq!(score(&comp, &y, &c).value, 0.0);

        // A_H = {0, 1}, A_L = {2}; matches at columns 0 and 2
        let c = ColumnClasses::from_counts(0.9, 2, 1);
        let y = BitWord::parse("111").unwrap();
        let w = BitWord::parse("101").unwrap();
        let s = score(&w, &y, &c);
        assert_eq!((s.count_h, s.count_l), (1, 1));
        let expected = (1.0f64 / 0.9).ln() + (1.0f64 / 0.1).ln();
        assert!((s.value - expected).abs() < 1e-12);
    }

    #[test]
    fn score_handles_long_words() {
        let m = 130;
        let st = state(0.5, &vec![true; m]);
        let y = BitWord::zeros(m);
        let c = classify_columns(&y, &st).unwrap();
        assert_eq!(score(&y, &y, &c).matches(), m);
    }
}
