//! Exact binomial confidence bounds.

use statrs::distribution::{Beta, ContinuousCDF};

/// One-sided Clopper–Pearson upper bound at `confidence` for `successes`
/// out of `trials`: the `u` with `Pr[Bin(trials, u) ≤ successes] = 1 − confidence`.
pub fn clopper_pearson_upper(successes: u64, trials: u64, confidence: f64) -> f64 {
    assert!(trials > 0 && successes <= trials);
    assert!(confidence > 0.0 && confidence < 1.0);
    if successes == trials {
        return 1.0;
    }
    let alpha = 1.0 - confidence;
    if successes == 0 {
        return 1.0 - alpha.powf(1.0 / trials as f64);
    }
    Beta::new((successes + 1) as f64, (trials - successes) as f64)
        .expect("positive shape parameters")
        .inverse_cdf(confidence)
}
