//! Code parameters, the code matrix, per-column state and codeword generation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitWord;
use crate::error::{Error, Mismatch, Result};
use crate::rng::Seed;

/// N, m, p and ε₀ for one code instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n_users: usize,
    pub code_length: usize,
    pub bias: f64,
    pub eps0: f64,
}

impl CodeParams {
    pub fn new(n_users: usize, code_length: usize, bias: f64, eps0: f64) -> Result<Self> {
        let params = CodeParams {
            n_users,
            code_length,
            bias,
            eps0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        // Step 12/13 of tracing and the bounds refer to N - 3 and N - 4.
        if self.n_users < 4 {
            return Err(Error::InvalidParams(format!(
                "n_users must be at least 4, got {}",
                self.n_users
            )));
        }
        if self.code_length == 0 {
            return Err(Error::InvalidParams("code_length must be positive".into()));
        }
        if !(0.5..1.0).contains(&self.bias) {
            return Err(Error::InvalidParams(format!(
                "bias must lie in [1/2, 1), got {}",
                self.bias
            )));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(Error::InvalidParams(format!(
                "eps0 must lie in (0, 1), got {}",
                self.eps0
            )));
        }
        Ok(())
    }

    /// log(N / ε₀)
    pub fn log_n_over_eps0(&self) -> f64 {
        (self.n_users as f64 / self.eps0).ln()
    }

    pub fn is_unbiased(&self) -> bool {
        self.bias == 0.5
    }
}

/// The N × m code matrix; row `i` is the codeword of user `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    code_length: usize,
    rows: Vec<BitWord>,
}

impl CodeMatrix {
    /// Builds a matrix from its rows. All rows must share one length.
    pub fn from_rows(rows: Vec<BitWord>) -> Result<Self> {
        let code_length = rows.first().map_or(0, BitWord::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != code_length) {
            return Err(Mismatch::Columns {
                expected: code_length,
                found: bad.len(),
            }
            .into());
        }
        Ok(CodeMatrix { code_length, rows })
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    #[inline]
    pub fn get(&self, user: usize, column: usize) -> bool {
        self.rows[user].get(column)
    }

    pub fn row(&self, user: usize) -> &BitWord {
        &self.rows[user]
    }

    pub fn rows(&self) -> &[BitWord] {
        &self.rows
    }
}

/// Per-column bias `p_j`, each equal to `p` or `1 - p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateInfo {
    pub bias: f64,
    pub column_bias: Vec<f64>,
}

impl StateInfo {
    pub fn len(&self) -> usize {
        self.column_bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.column_bias.is_empty()
    }

    /// True when `p_j = p`. At p = 1/2 every column is high.
    #[inline]
    pub fn is_high(&self, column: usize) -> bool {
        self.column_bias[column] == self.bias
    }
}

/// Samples `(W, st)`: each column picks `p_j ∈ {p, 1 - p}` with a fair coin,
/// then every user's bit in that column is 1 with probability `p_j`.
pub fn generate_code(params: &CodeParams, seed: Seed) -> Result<(CodeMatrix, StateInfo)> {
    params.validate()?;
    let mut rng = seed.rng();
    let n = params.n_users;
    let m = params.code_length;
    let p = params.bias;
    let mut rows = vec![BitWord::zeros(m); n];
    let mut column_bias = Vec::with_capacity(m);
    for j in 0..m {
        let pj = if rng.random_bool(0.5) { p } else { 1.0 - p };
        column_bias.push(pj);
        for row in rows.iter_mut() {
            if rng.random_bool(pj) {
                row.set(j, true);
            }
        }
    }
    Ok((
        CodeMatrix {
            code_length: m,
            rows,
        },
        StateInfo {
            bias: p,
            column_bias,
        },
    ))
}

/// Checks that matrix and state agree with `params` in shape and content.
pub fn validate_dimensions(
    matrix: &CodeMatrix,
    state: &StateInfo,
    params: &CodeParams,
) -> std::result::Result<(), Mismatch> {
    if matrix.n_users() != params.n_users {
        return Err(Mismatch::Rows {
            expected: params.n_users,
            found: matrix.n_users(),
        });
    }
    if matrix.code_length() != params.code_length {
        return Err(Mismatch::Columns {
            expected: params.code_length,
            found: matrix.code_length(),
        });
    }
    if state.len() != params.code_length {
        return Err(Mismatch::ColumnBiasLength {
            expected: params.code_length,
            found: state.len(),
        });
    }
    if state.bias != params.bias {
        return Err(Mismatch::BiasParameter {
            expected: params.bias,
            found: state.bias,
        });
    }
    let p = params.bias;
    if let Some((column, &found)) = state
        .column_bias
        .iter()
        .enumerate()
        .find(|(_, &v)| v != p && v != 1.0 - p)
    {
        return Err(Mismatch::ColumnBiasValue {
            column,
            found,
            bias: p,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamLabel;

    fn seed(s: u64) -> Seed {
        Seed::new(s, StreamLabel::Codegen)
    }

    #[test]
    fn generation_is_deterministic() {
        let params = CodeParams::new(4, 8, 0.5, 0.01).unwrap();
        let (w1, s1) = generate_code(&params, seed(42)).unwrap();
        let (w2, s2) = generate_code(&params, seed(42)).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(s1, s2);
        assert_eq!(w1.n_users(), 4);
        assert_eq!(w1.code_length(), 8);
        let (w3, _) = generate_code(&params, seed(43)).unwrap();
        assert_ne!(w1, w3);
    }

    #[test]
    fn unbiased_columns_are_all_half() {
        let params = CodeParams::new(4, 64, 0.5, 0.01).unwrap();
        let (_, st) = generate_code(&params, seed(1)).unwrap();
        assert!(st.column_bias.iter().all(|&v| v == 0.5));
        assert!((0..64).all(|j| st.is_high(j)));
    }

    #[test]
    fn biased_law_of_large_numbers() {
        // 3 sigma of the binomial standard error is below 0.02 for both checks.
        let m = 10_000;
        let params = CodeParams::new(4, m, 0.9, 0.01).unwrap();
        let (w, st) = generate_code(&params, seed(2024)).unwrap();
        let high: Vec<usize> = (0..m).filter(|&j| st.is_high(j)).collect();
        let frac_high = high.len() as f64 / m as f64;
        assert!((frac_high - 0.5).abs() < 0.02, "{frac_high}");
        let ones = high.iter().filter(|&&j| w.get(0, j)).count();
        let frac_ones = ones as f64 / high.len() as f64;
        assert!((frac_ones - 0.9).abs() < 0.02, "{frac_ones}");
    }

    #[test]
    fn distinct_users_uncorrelated() {
        let m = 20_000;
        let params = CodeParams::new(4, m, 0.5, 0.01).unwrap();
        let (w, _) = generate_code(&params, seed(9)).unwrap();
        let agree = m - w.row(0).hamming_distance(w.row(1));
        // agreement rate 1/2 with sd 0.5/sqrt(m)
        let rate = agree as f64 / m as f64;
        let sd = 0.5 / (m as f64).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * sd, "{rate}");
    }

    #[test]
    fn params_validation() {
        assert!(CodeParams::new(3, 8, 0.5, 0.01).is_err());
        assert!(CodeParams::new(4, 0, 0.5, 0.01).is_err());
        assert!(CodeParams::new(4, 8, 0.4, 0.01).is_err());
        assert!(CodeParams::new(4, 8, 1.0, 0.01).is_err());
        assert!(CodeParams::new(4, 8, 0.5, 0.0).is_err());
        assert!(CodeParams::new(4, 8, 0.5, 1.0).is_err());
    }

    #[test]
    fn validate_dimensions_reports() {
        let params = CodeParams::new(4, 8, 0.9, 0.01).unwrap();
        let (w, st) = generate_code(&params, seed(3)).unwrap();
        assert_eq!(validate_dimensions(&w, &st, &params), Ok(()));

        let mut short = st.clone();
        short.column_bias.pop();
        assert_eq!(
            validate_dimensions(&w, &short, &params),
            Err(Mismatch::ColumnBiasLength {
                expected: 8,
                found: 7
            })
        );

        let mut odd = st.clone();
        odd.column_bias[2] = 0.3;
        assert!(matches!(
            validate_dimensions(&w, &odd, &params),
            Err(Mismatch::ColumnBiasValue { column: 2, .. })
        ));

        let wrong_n = CodeParams::new(5, 8, 0.9, 0.01).unwrap();
        assert!(matches!(
            validate_dimensions(&w, &st, &wrong_n),
            Err(Mismatch::Rows { .. })
        ));
    }
}
