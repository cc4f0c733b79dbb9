//! Tracing traitors for 3-secure fingerprint codes.

pub mod attacks;
pub mod bits;
pub mod bounds;
pub mod codegen;
pub mod envelope;
pub mod error;
pub mod io;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod tracing;
pub mod triples;

pub use attacks::{AttackWord, PirateSet, PirateStrategy, Strategy, StrategyKind, Symbol};
pub use bits::BitWord;
pub use bounds::{min_length, theorem1_bound, theorem2_bound, BoundBreakdown};
pub use codegen::{generate_code, CodeMatrix, CodeParams, StateInfo};
pub use envelope::{CompressedTriples, TripleEngine};
pub use error::{Error, Mismatch, Result};
pub use rng::{Seed, StreamLabel};
pub use sim::{run_experiment, run_trial, ErrorStats, ExperimentConfig, TrialOutcome};
pub use tracing::{trace, trace_with, Step, ThresholdMode, TraceOptions, TraceResult};
pub use triples::{Pair, PairSet, Triple, TripleSet, User};
