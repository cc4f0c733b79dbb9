//! Error-probability bounds and the minimal code length they imply.
//!
//! All terms are evaluated as `exp(log coefficient + m·log f)` so that large
//! `N` and `m` neither overflow nor lose the small terms to underflow before
//! they matter. Logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::codegen::CodeParams;
use crate::error::{Error, Result};

/// Default search ceiling for [`min_length`].
pub const DEFAULT_LENGTH_CEILING: usize = 10_000_000;
/// Half-width of the scan that guards the binary search against a
/// non-monotone bound.
pub const SCAN_WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub eps0_term: f64,
    pub type_ii_term: f64,
    pub type_iii_term: f64,
    pub type_iv_term: f64,
    pub total: f64,
    pub condition_m_ok: bool,
}

/// The three polynomials governing Types II to IV at bias `p`.
pub fn f_polys(p: f64) -> Result<(f64, f64, f64)> {
    if !(0.5..1.0).contains(&p) {
        return Err(Error::InvalidParams(format!(
            "bias must lie in [1/2, 1), got {p}"
        )));
    }
    let q = 1.0 - p;
    let p2 = p * p;
    let p3 = p2 * p;
    let p4 = p3 * p;
    let f1 = 1.0 - 3.0 * p2 + 10.0 * p3 - 15.0 * p4 + 12.0 * p4 * p - 4.0 * p3 * p3;
    let f2 = p2 * q * q * (p.sqrt() + q.sqrt()) + 1.0 - p - p2 + 4.0 * p3 - 2.0 * p4;
    let f3 = p.powf(4.0 - 3.0 * p) * (p2 - 3.0 * p + 3.0) + q.powf(3.0 * p + 1.0) * (p2 + p + 1.0);
    Ok((f1, f2, f3))
}

/// Right-hand side of the length condition `m ≥ 8L(1 + 1/(16L))²`,
/// `L = log(N/ε₀)`.
pub fn condition_rhs(n: usize, eps0: f64) -> f64 {
    let l = (n as f64 / eps0).ln();
    let t = 1.0 + 1.0 / (16.0 * l);
    8.0 * l * t * t
}

/// Smallest integer length meeting the condition.
pub fn condition_min_length(n: usize, eps0: f64) -> usize {
    condition_rhs(n, eps0).ceil().max(1.0) as usize
}

fn ln_choose3(k: u128) -> f64 {
    if k < 3 {
        return f64::NEG_INFINITY;
    }
    ((k * (k - 1) * (k - 2) / 6) as f64).ln()
}

fn ln_count(x: u128) -> f64 {
    if x == 0 {
        f64::NEG_INFINITY
    } else {
        (x as f64).ln()
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Bound terms given `log f_i` and the Type IV prefactor base `log(1/(1-p))`.
fn breakdown(n: usize, m: usize, eps0: f64, ln_f: [f64; 3], ln_inv_q: f64) -> BoundBreakdown {
    let n = n as u128;
    let mf = m as f64;
    let l = (n as f64 / eps0).ln();
    let ln_c3 = ln_choose3(n.saturating_sub(3));
    let ln_pairs = ln_count(3 * n.saturating_sub(3) * n.saturating_sub(4));
    let ln_single = ln_count(n.saturating_sub(3));
    let type_ii = (ln_c3 + mf * ln_f[0]).exp();
    let type_iii = (ln_pairs + mf * ln_f[1]).exp();
    let type_iv = (ln_single + 3.0 * (0.5 * mf * l).sqrt() * ln_inv_q + mf * ln_f[2]).exp();
    BoundBreakdown {
        eps0_term: eps0,
        type_ii_term: type_ii,
        type_iii_term: type_iii,
        type_iv_term: type_iv,
        total: compensated_sum(&[eps0, type_ii, type_iii, type_iv]),
        condition_m_ok: mf >= condition_rhs(n as usize, eps0),
    }
}

/// The general-bias bound. Factors that would be negative for small `N`
/// are clamped to zero.
pub fn theorem1_bound(params: &CodeParams) -> Result<BoundBreakdown> {
    params.validate()?;
    let (f1, f2, f3) = f_polys(params.bias)?;
    Ok(breakdown(
        params.n_users,
        params.code_length,
        params.eps0,
        [f1.ln(), f2.ln(), f3.ln()],
        -(1.0 - params.bias).ln(),
    ))
}

/// The bound at `p = 1/2` with its closed-form constants.
pub fn theorem2_bound(n: usize, m: usize, eps0: f64) -> BoundBreakdown {
    let sqrt2 = std::f64::consts::SQRT_2;
    breakdown(
        n,
        m,
        eps0,
        [
            (7.0f64 / 8.0).ln(),
            ((10.0 + sqrt2) / 16.0).ln(),
            (7.0 * sqrt2 / 16.0).ln(),
        ],
        std::f64::consts::LN_2,
    )
}

fn check_eps(eps: f64, eps0: f64) -> Result<()> {
    if !(eps0 > 0.0 && eps0 < eps && eps < 1.0) {
        return Err(Error::InvalidParams(format!(
            "need 0 < eps0 < eps < 1, got eps = {eps}, eps0 = {eps0}"
        )));
    }
    Ok(())
}

/// Smallest `m` meeting the length condition with bound total `≤ eps`.
pub fn min_length(n: usize, eps: f64, eps0: f64) -> Result<usize> {
    min_length_with_ceiling(n, eps, eps0, DEFAULT_LENGTH_CEILING)
}

pub fn min_length_with_ceiling(n: usize, eps: f64, eps0: f64, ceiling: usize) -> Result<usize> {
    check_eps(eps, eps0)?;
    if n < 4 {
        return Err(Error::InvalidParams(format!(
            "need at least 4 users, got {n}"
        )));
    }
    let feasible = |m: usize| {
        let b = theorem2_bound(n, m, eps0);
        b.condition_m_ok && b.total <= eps
    };
    let start = condition_min_length(n, eps0);
    if start > ceiling {
        return Err(Error::Infeasible { ceiling });
    }

    // exponential search for a feasible upper end
    let mut hi = start;
    while !feasible(hi) {
        if hi >= ceiling {
            return Err(Error::Infeasible { ceiling });
        }
        hi = hi.saturating_mul(2).min(ceiling);
    }
    // binary search for the first feasible length in [start, hi]
    let mut lo = start;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let from = hi.saturating_sub(SCAN_WINDOW).max(start);
    Ok((from..=hi).find(|&m| feasible(m)).unwrap_or(hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eps0Point {
    pub fraction: f64,
    pub eps0: f64,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eps0Scan {
    pub points: Vec<Eps0Point>,
    /// Index into `points` of the shortest length (first on ties).
    pub best: usize,
}

/// [`min_length`] with `ε₀ = fraction·ε` for each fraction of `grid`.
pub fn scan_eps0(n: usize, eps: f64, grid: &[f64]) -> Result<Eps0Scan> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty eps0 grid".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &fraction in grid {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidParams(format!(
                "eps0 fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let eps0 = fraction * eps;
        points.push(Eps0Point {
            fraction,
            eps0,
            length: min_length(n, eps, eps0)?,
        });
    }
    let best = points
        .iter()
        .enumerate()
        .min_by_key(|(i, pt)| (pt.length, *i))
        .map(|(i, _)| i)
        .expect("nonempty grid");
    Ok(Eps0Scan { points, best })
}

/// A published code-length data point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLength {
    pub table: u8,
    pub n_users: usize,
    pub eps: f64,
    pub eps0_fraction: f64,
    pub length: usize,
}

/// Published lengths for the proposed code: three columns of the first
/// comparison table and three of the second.
pub const REFERENCE_LENGTHS: [ReferenceLength; 6] = [
    ReferenceLength {
        table: 1,
        n_users: 128,
        eps: 0.14e-6,
        eps0_fraction: 0.5,
        length: 282,
    },
    ReferenceLength {
        table: 1,
        n_users: 256,
        eps: 0.15e-13,
        eps0_fraction: 0.7,
        length: 502,
    },
    ReferenceLength {
        table: 1,
        n_users: 512,
        eps: 0.19e-27,
        eps0_fraction: 0.7,
        length: 934,
    },
    ReferenceLength {
        table: 2,
        n_users: 300,
        eps: 1e-11,
        eps0_fraction: 0.9,
        length: 420,
    },
    ReferenceLength {
        table: 2,
        n_users: 1_000_000_000,
        eps: 1e-6,
        eps0_fraction: 0.01,
        length: 556,
    },
    ReferenceLength {
        table: 2,
        n_users: 1_000_000,
        eps: 1e-3,
        eps0_fraction: 0.01,
        length: 349,
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn constants_at_half() {
        let (f1, f2, f3) = f_polys(0.5).unwrap();
        let s2 = 2f64.sqrt();
        assert!(rel(f1, 7.0 / 8.0) < 1e-12);
        assert!(rel(f2, (10.0 + s2) / 16.0) < 1e-12);
        assert!(rel(f3, 7.0 * s2 / 16.0) < 1e-12);
    }

    #[test]
    fn f_polys_domain() {
        assert!(f_polys(0.49).is_err());
        assert!(f_polys(1.0).is_err());
        assert!(f_polys(f64::NAN).is_err());
    }

    #[test]
    fn f1_minimized_at_half() {
        let (f1_half, _, _) = f_polys(0.5).unwrap();
        for k in 0..10_000 {
            let p = 0.5 + 0.5 * k as f64 / 10_000.0;
            let (f1, _, _) = f_polys(p).unwrap();
            assert!(f1 >= f1_half - 1e-15, "p = {p}");
        }
    }

    #[test]
    fn condition_example() {
        let rhs = condition_rhs(100, 0.0045);
        assert!((rhs - 81.07).abs() < 0.01, "{rhs}");
        assert_eq!(condition_min_length(100, 0.0045), 82);
        assert!(!theorem2_bound(100, 81, 0.0045).condition_m_ok);
        assert!(theorem2_bound(100, 82, 0.0045).condition_m_ok);
    }

    #[test]
    fn direct_evaluation_agrees() {
        // plain floating-point formula where nothing under- or overflows
        let (n, m, eps0) = (100usize, 135usize, 0.0045f64);
        let nf = n as f64;
        let s2 = 2f64.sqrt();
        let c3 = (nf - 3.0) * (nf - 4.0) * (nf - 5.0) / 6.0;
        let t2 = c3 * (7.0f64 / 8.0).powi(m as i32);
        let t3 = 3.0 * (nf - 3.0) * (nf - 4.0) * ((10.0 + s2) / 16.0).powi(m as i32);
        let t4 = (nf - 3.0)
            * 8f64.powf((m as f64 / 2.0 * (nf / eps0).ln()).sqrt())
            * (7.0 * s2 / 16.0).powi(m as i32);
        let b = theorem2_bound(n, m, eps0);
        assert!(rel(b.type_ii_term, t2) < 1e-10);
        assert!(rel(b.type_iii_term, t3) < 1e-10);
        assert!(rel(b.type_iv_term, t4) < 1e-10);
        assert!(rel(b.total, eps0 + t2 + t3 + t4) < 1e-12);
        assert!(b.total <= 0.009);
    }

    #[test]
    fn theorem1_specializes() {
        for &(n, m, eps0) in &[(100, 135, 0.0045), (7, 30, 0.1), (1_000_000, 349, 1e-5)] {
            let a = theorem1_bound(&CodeParams::new(n, m, 0.5, eps0).unwrap()).unwrap();
            let b = theorem2_bound(n, m, eps0);
            assert!(rel(a.total, b.total) < 1e-12);
            assert!(rel(a.type_iv_term, b.type_iv_term) < 1e-12);
            assert_eq!(a.condition_m_ok, b.condition_m_ok);
        }
    }

    #[test]
    fn small_n_clamps() {
        let b = theorem2_bound(5, 50, 0.1);
        assert_eq!(b.type_ii_term, 0.0);
        assert!(b.type_iii_term > 0.0);
        let b = theorem2_bound(4, 50, 0.1);
        assert_eq!(b.type_iii_term, 0.0);
        assert!(b.total.is_finite());
    }

    #[test]
    fn total_decreases_to_eps0() {
        let eps0 = 0.0045;
        let mut prev_excess = f64::INFINITY;
        let mut prev_total = f64::INFINITY;
        for m in (82..3000).step_by(7) {
            let b = theorem2_bound(100, m, eps0);
            let excess = b.type_ii_term + b.type_iii_term + b.type_iv_term;
            assert!(excess < prev_excess, "m = {m}");
            assert!(b.total <= prev_total && b.total >= eps0, "m = {m}");
            prev_excess = excess;
            prev_total = b.total;
        }
        assert!(rel(prev_total, eps0) < 1e-12);
    }

    #[test]
    fn cross_check_length() {
        let m = min_length(100, 0.009, 0.0045).unwrap();
        assert_eq!(m, 135);
        assert!(theorem2_bound(100, 134, 0.0045).total > 0.009);
    }

    #[test]
    fn reference_lengths() {
        for r in REFERENCE_LENGTHS {
            let m = min_length(r.n_users, r.eps, r.eps0_fraction * r.eps).unwrap();
            assert_eq!(m, r.length, "{r:?}");
        }
    }

    #[test]
    fn min_length_errors() {
        assert!(matches!(
            min_length(100, 0.01, 0.02),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            min_length_with_ceiling(100, 0.009, 0.0045, 100),
            Err(Error::Infeasible { ceiling: 100 })
        ));
    }

    #[test]
    fn scan_picks_shortest() {
        let scan = scan_eps0(256, 0.15e-13, &[0.5, 0.7, 0.9]).unwrap();
        assert_eq!(scan.points[1].length, 502);
        let best = scan.points[scan.best].length;
        assert!(scan.points.iter().all(|p| p.length >= best));
        let single = scan_eps0(128, 0.14e-6, &[0.5]).unwrap();
        assert_eq!(single.points[0].length, 282);
    }
}
