use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Which part of a (matrix, state, params) triple disagrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mismatch {
    Rows {
        expected: usize,
        found: usize,
    },
    Columns {
        expected: usize,
        found: usize,
    },
    ColumnBiasLength {
        expected: usize,
        found: usize,
    },
    ColumnBiasValue {
        column: usize,
        found: f64,
        bias: f64,
    },
    BiasParameter {
        expected: f64,
        found: f64,
    },
    WordLength {
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::Rows { expected, found } => {
                write!(f, "matrix has {found} rows, expected {expected}")
            }
            Mismatch::Columns { expected, found } => {
                write!(f, "matrix has {found} columns, expected {expected}")
            }
            Mismatch::ColumnBiasLength { expected, found } => {
                write!(f, "column_bias length is {found}, expected {expected}")
            }
            Mismatch::ColumnBiasValue {
                column,
                found,
                bias,
            } => write!(
                f,
                "column_bias[{column}] = {found} is neither p = {bias} nor 1 - p"
            ),
            Mismatch::BiasParameter { expected, found } => {
                write!(f, "state bias is {found}, expected {expected}")
            }
            Mismatch::WordLength { expected, found } => {
                write!(f, "word has length {found}, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {0}")]
    Mismatch(Mismatch),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("marking assumption violated at columns {columns:?}")]
    MarkingViolation { columns: Vec<usize> },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(
        "triple expansion would exceed {cap} triples ({singles} singles, {pairs} pair classes, \
         {triples} triple classes); raise the cap or use the naive oracle"
    )]
    ExpansionOverflow {
        cap: usize,
        singles: usize,
        pairs: usize,
        triples: usize,
    },
    #[error("no feasible code length up to {ceiling}")]
    Infeasible { ceiling: usize },
    #[error("trial {index}: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures caused by a broken contract (marking assumption,
    /// infeasible parameters, oversized outputs) rather than bad input.
    pub fn is_contract_violation(&self) -> bool {
        match self {
            Error::MarkingViolation { .. }
            | Error::Infeasible { .. }
            | Error::ExpansionOverflow { .. }
            | Error::Unsupported(_) => true,
            Error::Trial { source, .. } => source.is_contract_violation(),
            _ => false,
        }
    }
}

impl From<Mismatch> for Error {
    fn from(m: Mismatch) -> Self {
        Error::Mismatch(m)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
