//! Score thresholds.
//!
//! An innocent user's score is `k_H·log(1/p) + k_L·log(1/(1-p))` with
//! `k_H ~ Bin(a_H, p)` and `k_L ~ Bin(a_L, 1-p)` independent. A threshold `Z`
//! is admissible when the probability of reaching it is at most `ε₀/N`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{ColumnClasses, Score};
use crate::codegen::CodeParams;
use crate::error::{Error, Result};

/// Lattice values closer than this are treated as one score level.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Largest code length accepted by [`threshold_exact`] by default.
pub const DEFAULT_EXACT_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// The smallest admissible value on the score lattice.
    Exact,
    /// The closed-form Hoeffding threshold `Z₀`.
    Z0,
}

impl ThresholdMode {
    /// `exact` at p = 1/2, where the tail is a single binomial; `z0` otherwise.
    pub fn default_for(bias: f64) -> Self {
        if bias == 0.5 {
            ThresholdMode::Exact
        } else {
            ThresholdMode::Z0
        }
    }
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ThresholdMode::Exact),
            "z0" => Ok(ThresholdMode::Z0),
            _ => Err(Error::InvalidParams(format!(
                "threshold mode must be 'exact' or 'z0', got '{s}'"
            ))),
        }
    }
}

/// `(log(1/p), log(1/(1-p)))`
#[inline]
pub fn log_weights(p: f64) -> (f64, f64) {
    (-p.ln(), -(1.0 - p).ln())
}

/// Score of `k_h` high matches and `k_l` low matches.
#[inline]
pub fn lattice_value(p: f64, k_h: usize, k_l: usize) -> f64 {
    let (wh, wl) = log_weights(p);
    k_h as f64 * wh + k_l as f64 * wl
}

/// Closed-form threshold
/// `Z₀ = a_H·p·log(1/p) + a_L·(1-p)·log(1/(1-p)) + sqrt(½·(log(1/p)²·a_H + log(1/(1-p))²·a_L)·log(N/ε₀))`.
pub fn threshold_z0(classes: &ColumnClasses, params: &CodeParams) -> f64 {
    let p = params.bias;
    let (wh, wl) = log_weights(p);
    let ah = classes.a_h as f64;
    let al = classes.a_l as f64;
    let mean = ah * p * wh + al * (1.0 - p) * wl;
    let spread = 0.5 * (wh * wh * ah + wl * wl * al) * params.log_n_over_eps0();
    mean + spread.sqrt()
}

/// `Z₀ / log 2 = m/2 + sqrt((m/2)·log(N/ε₀))`, the p = 1/2 threshold in
/// units of matching columns.
pub fn normalized_z0(code_length: usize, params: &CodeParams) -> f64 {
    let half = code_length as f64 / 2.0;
    half + (half * params.log_n_over_eps0()).sqrt()
}

/// Result of the exact lattice search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactThreshold {
    /// The threshold value; see [`threshold_exact`].
    pub value: f64,
    /// Lowest admissible lattice point `(k_H, k_L)`, or `None` when no
    /// attainable score is admissible.
    pub point: Option<(usize, usize)>,
    /// Natural log of the tail probability at `value`.
    pub log_tail: f64,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    value: f64,
    k_h: usize,
    k_l: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| self.k_h.cmp(&other.k_h))
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Smallest admissible threshold on the score lattice.
///
/// Lattice points are visited in decreasing score order (a k-way merge over
/// the `k_H` rows, so only the upper tail is touched) and their probabilities
/// accumulated in the log domain until the next score level would push the
/// tail past `ε₀/N`. The lowest accepted level is the lattice threshold `L`.
///
/// Every value in `(previous level, L]` makes the same accusations, and `Z₀`
/// is admissible, so the returned value is `min(L, Z₀)`. That keeps it on
/// the admissible side and never above `Z₀`.
pub fn threshold_exact_detail(
    classes: &ColumnClasses,
    params: &CodeParams,
    cap: usize,
) -> Result<ExactThreshold> {
    let m = classes.a_h + classes.a_l;
    if m > cap {
        return Err(Error::Unsupported(format!(
            "exact threshold limited to {cap} columns, got {m}"
        )));
    }
    let p = params.bias;
    let (wh, wl) = log_weights(p);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let (ah, al) = (classes.a_h, classes.a_l);
    let lf = ln_factorials(m);
    let ln_choose = |n: usize, k: usize| lf[n] - lf[k] - lf[n - k];
    // k_H high matches: each with probability p; k_L low matches: each 1 - p
    let log_pmf = |kh: usize, kl: usize| {
        ln_choose(ah, kh)
            + kh as f64 * lp
            + (ah - kh) as f64 * lq
            + ln_choose(al, kl)
            + kl as f64 * lq
            + (al - kl) as f64 * lp
    };
    let log_target = (params.eps0 / params.n_users as f64).ln();
    let z0 = threshold_z0(classes, params);

    let mut heap: BinaryHeap<Node> = (0..=ah)
        .map(|kh| Node {
            value: kh as f64 * wh + al as f64 * wl,
            k_h: kh,
            k_l: al,
        })
        .collect();

    let mut log_tail = f64::NEG_INFINITY;
    let mut accepted: Option<Node> = None;
    let mut level: Vec<Node> = Vec::new();
    while let Some(top) = heap.pop() {
        level.clear();
        level.push(top);
        while let Some(next) = heap.peek() {
            if top.value - next.value <= TIE_TOLERANCE {
                level.push(heap.pop().expect("peeked"));
            } else {
                break;
            }
        }
        let level_mass = level.iter().fold(f64::NEG_INFINITY, |acc, n| {
            log_add(acc, log_pmf(n.k_h, n.k_l))
        });
        let candidate = log_add(log_tail, level_mass);
        if candidate > log_target {
            break;
        }
        log_tail = candidate;
        accepted = level
            .iter()
            .copied()
            .min_by(|a, b| a.value.total_cmp(&b.value));
        for n in &level {
            if n.k_l > 0 {
                heap.push(Node {
                    value: n.k_h as f64 * wh + (n.k_l - 1) as f64 * wl,
                    k_h: n.k_h,
                    k_l: n.k_l - 1,
                });
            }
        }
    }

    let lattice = match accepted {
        Some(n) => n.value,
        // nothing attainable is admissible: one step past the top score
        None => ah as f64 * wh + al as f64 * wl + wh.min(wl),
    };
    Ok(ExactThreshold {
        value: lattice.min(z0),
        point: accepted.map(|n| (n.k_h, n.k_l)),
        log_tail,
    })
}

pub fn threshold_exact(classes: &ColumnClasses, params: &CodeParams) -> Result<f64> {
    threshold_exact_detail(classes, params, DEFAULT_EXACT_CAP).map(|t| t.value)
}

/// A threshold ready for comparisons against scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub mode: ThresholdMode,
    pub value: f64,
    /// At p = 1/2: the least number of matching columns that accuses.
    pub min_matches: Option<usize>,
}

impl Threshold {
    pub fn compute(
        mode: ThresholdMode,
        classes: &ColumnClasses,
        params: &CodeParams,
        exact_cap: usize,
    ) -> Result<Self> {
        let unbiased = params.is_unbiased();
        let m = classes.a_h + classes.a_l;
        match mode {
            ThresholdMode::Z0 => Ok(Threshold {
                mode,
                value: threshold_z0(classes, params),
                min_matches: unbiased.then(|| normalized_z0(m, params).ceil() as usize),
            }),
            ThresholdMode::Exact => {
                let t = threshold_exact_detail(classes, params, exact_cap)?;
                Ok(Threshold {
                    mode,
                    value: t.value,
                    min_matches: unbiased.then(|| t.point.map_or(m + 1, |(kh, kl)| kh + kl)),
                })
            }
        }
    }

    /// Whether `score` reaches the threshold. At p = 1/2 this is an integer
    /// comparison of matching columns; otherwise the lattice value is
    /// compared directly, so a score a rounding error below `Z` does not
    /// accuse.
    pub fn accuses(&self, score: &Score) -> bool {
        match self.min_matches {
            Some(k) => score.matches() >= k,
            None => score.value >= self.value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitWord;

    fn classes(a_h: usize, a_l: usize, bias: f64) -> ColumnClasses {
        ColumnClasses::from_counts(bias, a_h, a_l)
    }

    #[test]
    fn z0_at_half_matches_normalized_form() {
        let params = CodeParams::new(100, 135, 0.5, 0.0045).unwrap();
        let c = classes(135, 0, 0.5);
        let z = threshold_z0(&c, &params);
        let norm = normalized_z0(135, &params);
        assert!((z / std::f64::consts::LN_2 - norm).abs() < 1e-9);
        // 67.5 + sqrt(67.5 * ln(100 / 0.0045))
        assert!((norm - 93.49225).abs() < 1e-4, "{norm}");
    }

    #[test]
    fn exact_at_half_is_binomial_quantile() {
        // Pr[Bin(20, 1/2) >= 15] = 21700/2^20 ≈ 0.0207 > 0.01 and
        // Pr[Bin(20, 1/2) >= 16] = 6196/2^20 ≈ 0.0059 <= 0.01
        let params = CodeParams::new(10, 20, 0.5, 0.1).unwrap();
        let c = classes(20, 0, 0.5);
        let t = threshold_exact_detail(&c, &params, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(t.point, Some((16, 0)));
        let th = Threshold::compute(ThresholdMode::Exact, &c, &params, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(th.min_matches, Some(16));
        assert!(t.value <= threshold_z0(&c, &params));
        assert!((t.log_tail.exp() - 6196.0 / 1048576.0).abs() < 1e-12);
    }

    #[test]
    fn exact_respects_cap() {
        let params = CodeParams::new(10, 50, 0.5, 0.1).unwrap();
        let c = classes(50, 0, 0.5);
        assert!(matches!(
            threshold_exact_detail(&c, &params, 49),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn unreachable_target_gives_unreachable_threshold() {
        // one column: the top score already has probability 1/2 > ε₀/N
        let params = CodeParams::new(4, 1, 0.5, 0.5).unwrap();
        let c = classes(1, 0, 0.5);
        let th = Threshold::compute(ThresholdMode::Exact, &c, &params, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(th.min_matches, Some(2));
        let w = BitWord::parse("1").unwrap();
        let s = super::super::score(&w, &w, &c);
        assert!(!th.accuses(&s));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "exact".parse::<ThresholdMode>().unwrap(),
            ThresholdMode::Exact
        );
        assert_eq!("z0".parse::<ThresholdMode>().unwrap(), ThresholdMode::Z0);
        assert!("other".parse::<ThresholdMode>().is_err());
        assert_eq!(ThresholdMode::default_for(0.5), ThresholdMode::Exact);
        assert_eq!(ThresholdMode::default_for(0.7), ThresholdMode::Z0);
    }
}
