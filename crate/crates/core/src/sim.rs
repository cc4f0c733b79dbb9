//! Monte Carlo play of the tracing game.
//!
//! Each trial derives its own master seed from the experiment seed and the
//! trial index, then draws the code, the coalition, the attack and the
//! erasure resolution from separate streams of that seed. Trials therefore
//! do not depend on scheduling, and aggregation folds them in index order.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{
    apply_strategy, enforce_marking_assumption, AttackWord, PirateSet, PirateStrategy, Strategy,
};
use crate::bits::BitWord;
use crate::codegen::{generate_code, CodeMatrix, CodeParams, StateInfo};
use crate::envelope;
use crate::error::{Error, Result};
use crate::rng::{Seed, StreamLabel};
use crate::stats::clopper_pearson_upper;
use crate::tracing::{
    classify_columns, resolve_erasures, score, trace_with, ResolvedWord, Step, ThresholdMode,
    TraceOptions,
};
use crate::triples::{Triple, User};

/// Trials evaluated per parallel batch before folding.
const BATCH: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: CodeParams,
    pub n_pirates: usize,
    pub strategy: Strategy,
    pub trials: u64,
    pub master_seed: u64,
    pub threshold_mode: ThresholdMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(1..=PirateSet::MAX_PIRATES).contains(&self.n_pirates) {
            return Err(Error::InvalidParams(format!(
                "n_pirates must be 1 to 3, got {}",
                self.n_pirates
            )));
        }
        if self.n_pirates > self.params.n_users {
            return Err(Error::InvalidParams("more pirates than users".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be positive".into()));
        }
        self.strategy.validate(Some(self.n_pirates))
    }

    fn trace_options(&self) -> TraceOptions {
        TraceOptions {
            threshold: Some(self.threshold_mode),
            ..TraceOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Correct,
    FalseNegative,
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: u64,
    /// `FalsePositive` whenever an innocent is accused, even if no pirate is.
    pub kind: OutcomeKind,
    pub false_negative: bool,
    pub false_positive: bool,
    pub accused: Vec<usize>,
    pub pirates: Vec<usize>,
    pub halted_at: Step,
}

impl TrialOutcome {
    pub fn is_error(&self) -> bool {
        self.kind != OutcomeKind::Correct
    }
}

/// Error flags for an accusation against the true coalition.
pub fn classify(accused: &[usize], pirates: &[usize]) -> (OutcomeKind, bool, bool) {
    let pirates: BTreeSet<usize> = pirates.iter().copied().collect();
    let false_negative = !accused.iter().any(|u| pirates.contains(u));
    let false_positive = accused.iter().any(|u| !pirates.contains(u));
    let kind = if false_positive {
        OutcomeKind::FalsePositive
    } else if false_negative {
        OutcomeKind::FalseNegative
    } else {
        OutcomeKind::Correct
    };
    (kind, false_negative, false_positive)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub trials: u64,
    pub errors: u64,
    pub fn_count: u64,
    pub fp_count: u64,
    pub rate: f64,
    /// One-sided 95% Clopper–Pearson upper bound on the error rate.
    pub ci_upper_95: f64,
    /// Halting step number -> trials.
    pub per_step_histogram: BTreeMap<u8, u64>,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    trials: u64,
    errors: u64,
    fn_count: u64,
    fp_count: u64,
    steps: BTreeMap<u8, u64>,
}

impl Tally {
    fn add(&mut self, o: &TrialOutcome) {
        self.trials += 1;
        self.errors += u64::from(o.is_error());
        self.fn_count += u64::from(o.false_negative);
        self.fp_count += u64::from(o.false_positive);
        *self.steps.entry(o.halted_at.number()).or_default() += 1;
    }

    fn finish(self) -> ErrorStats {
        let rate = self.errors as f64 / self.trials as f64;
        ErrorStats {
            trials: self.trials,
            errors: self.errors,
            fn_count: self.fn_count,
            fp_count: self.fp_count,
            rate,
            ci_upper_95: clopper_pearson_upper(self.errors, self.trials, 0.95).max(rate),
            per_step_histogram: self.steps,
        }
    }
}

impl ErrorStats {
    pub fn from_outcomes<'a, I: IntoIterator<Item = &'a TrialOutcome>>(outcomes: I) -> Self {
        let mut t = Tally::default();
        for o in outcomes {
            t.add(o);
        }
        assert!(t.trials > 0, "no trials");
        t.finish()
    }
}

/// Everything one trial draws before tracing.
#[derive(Debug, Clone)]
pub struct GameInstance {
    pub trial_seed: u64,
    pub code: CodeMatrix,
    pub state: StateInfo,
    pub pirates: PirateSet,
    pub word: AttackWord,
}

impl GameInstance {
    pub fn pirate_codewords(&self) -> Vec<&BitWord> {
        self.pirates.codewords(&self.code)
    }

    pub fn erasure_seed(&self) -> Seed {
        Seed::new(self.trial_seed, StreamLabel::ErasureResolution)
    }
}

/// Coalition chosen uniformly without replacement, independent of the code.
pub fn register_pirates(n_users: usize, n_pirates: usize, seed: Seed) -> Result<PirateSet> {
    let mut rng = seed.rng();
    let members = index::sample(&mut rng, n_users, n_pirates).into_vec();
    PirateSet::new(members, n_users)
}

/// Generates the code, registers the coalition and runs the attack for
/// trial `index`; fails if the attack breaks the Marking Assumption.
pub fn play(
    config: &ExperimentConfig,
    strategy: &dyn PirateStrategy,
    index: u64,
) -> Result<GameInstance> {
    let trial_seed = Seed::trial_master(config.master_seed, index);
    let (code, state) = generate_code(&config.params, Seed::new(trial_seed, StreamLabel::Codegen))?;
    let pirates = register_pirates(
        config.params.n_users,
        config.n_pirates,
        Seed::new(trial_seed, StreamLabel::Registration),
    )?;
    let codewords = pirates.codewords(&code);
    let word = apply_strategy(
        strategy,
        &codewords,
        Seed::new(trial_seed, StreamLabel::Attack),
    )?;
    enforce_marking_assumption(&codewords, &word)?;
    Ok(GameInstance {
        trial_seed,
        code,
        state,
        pirates,
        word,
    })
}

/// Plays and traces trial `index` with the configured strategy.
pub fn run_trial(config: &ExperimentConfig, index: u64) -> Result<TrialOutcome> {
    run_trial_with(config, &config.strategy, index)
}

/// Plays and traces trial `index` with a caller-supplied strategy.
pub fn run_trial_with(
    config: &ExperimentConfig,
    strategy: &dyn PirateStrategy,
    index: u64,
) -> Result<TrialOutcome> {
    let game = play(config, strategy, index)?;
    let result = trace_with(
        &game.word,
        &game.code,
        &game.state,
        &config.params,
        game.erasure_seed(),
        &config.trace_options(),
    )?;
    if cfg!(debug_assertions) && config.n_pirates == 3 && !game.word.has_erasures() {
        debug_check_pirate_triple(&game, result.triples.as_ref());
    }
    let pirates = game.pirates.members().to_vec();
    let (kind, false_negative, false_positive) = classify(&result.accused, &pirates);
    Ok(TrialOutcome {
        index,
        kind,
        false_negative,
        false_positive,
        accused: result.accused,
        pirates,
        halted_at: result.halted_at,
    })
}

/// An erasure-free coalition of three always forms a parent triple. Checked
/// against the index when tracing built one, else column by column.
fn debug_check_pirate_triple(game: &GameInstance, index: Option<&envelope::CompressedTriples>) {
    let m = game.pirates.members();
    let t = Triple::new(m[0] as User, m[1] as User, m[2] as User).expect("distinct pirates");
    let found = match index {
        Some(c) => envelope::contains_triple(c, &t),
        None => {
            let words = game.pirate_codewords();
            game.word
                .symbols()
                .iter()
                .enumerate()
                .all(|(j, s)| s.bit().is_some_and(|b| words.iter().any(|w| w.get(j) == b)))
        }
    };
    debug_assert!(found, "pirate triple {t:?} missing from T(y')");
}

fn wrap(index: u64) -> impl Fn(Error) -> Error {
    move |e| Error::Trial {
        index,
        source: Box::new(e),
    }
}

/// Runs every trial in parallel on the current rayon pool and folds the
/// outcomes in index order. The first failing trial by index is reported.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ErrorStats> {
    let mut tally = Tally::default();
    for_each_outcome(config, |o| tally.add(o))?;
    Ok(tally.finish())
}

/// Every trial outcome in index order.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialOutcome>> {
    let mut out = Vec::with_capacity(config.trials.min(1 << 20) as usize);
    for_each_outcome(config, |o| out.push(o.clone()))?;
    Ok(out)
}

/// Calls `f` on every outcome in index order.
pub fn for_each_outcome<F: FnMut(&TrialOutcome)>(
    config: &ExperimentConfig,
    mut f: F,
) -> Result<()> {
    config.validate()?;
    let mut start = 0;
    while start < config.trials {
        let end = (start + BATCH).min(config.trials);
        let batch: Vec<Result<TrialOutcome>> = (start..end)
            .into_par_iter()
            .map(|i| run_trial(config, i).map_err(wrap(i)))
            .collect();
        for r in batch {
            f(&r?);
        }
        start = end;
    }
    Ok(())
}

/// A trial breaking the score identity, with enough data to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRuleCounterexample {
    pub index: u64,
    pub pirates: Vec<usize>,
    pub codewords: Vec<String>,
    pub word: String,
    pub resolved: String,
    pub matches: Vec<usize>,
    pub expected_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRuleReport {
    pub n_pirates: usize,
    pub trials: u64,
    pub violations: u64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<SumRuleCounterexample>,
}

/// Checks the unbiased score identities on every trial, in matching-column
/// units: one pirate matches all `m` columns, and two pirates match
/// `2·a_u + a_d` columns in total, where `a_u` and `a_d` count the
/// undetectable and detectable columns.
pub fn sum_rule_audit(config: &ExperimentConfig) -> Result<SumRuleReport> {
    config.validate()?;
    if !config.params.is_unbiased() {
        return Err(Error::InvalidParams(
            "the score identities need p = 1/2".into(),
        ));
    }
    if config.n_pirates > 2 {
        return Err(Error::InvalidParams(
            "the score identities cover one or two pirates".into(),
        ));
    }
    if config.strategy.may_erase() {
        return Err(Error::InvalidParams(
            "the two-pirate identity is audited for erasure-free strategies only".into(),
        ));
    }
    let checks: Vec<Result<Option<SumRuleCounterexample>>> = (0..config.trials)
        .into_par_iter()
        .map(|i| audit_trial(config, i).map_err(wrap(i)))
        .collect();
    let mut violations = 0;
    let mut counterexample = None;
    for c in checks {
        if let Some(cx) = c? {
            violations += 1;
            counterexample.get_or_insert(cx);
        }
    }
    Ok(SumRuleReport {
        n_pirates: config.n_pirates,
        trials: config.trials,
        violations,
        passed: violations == 0,
        counterexample,
    })
}

fn audit_trial(config: &ExperimentConfig, index: u64) -> Result<Option<SumRuleCounterexample>> {
    let game = play(config, &config.strategy, index)?;
    let yprime: ResolvedWord = resolve_erasures(&game.word, &game.state, game.erasure_seed())?;
    let classes = classify_columns(&yprime, &game.state)?;
    let codewords = game.pirate_codewords();
    let matches: Vec<usize> = codewords
        .iter()
        .map(|w| score(w, &yprime, &classes).matches())
        .collect();
    let m = config.params.code_length;
    let expected_total = if codewords.len() == 1 {
        m
    } else {
        let detectable = codewords[0].hamming_distance(codewords[1]);
        2 * (m - detectable) + detectable
    };
    if matches.iter().sum::<usize>() == expected_total {
        return Ok(None);
    }
    Ok(Some(SumRuleCounterexample {
        index,
        pirates: game.pirates.members().to_vec(),
        codewords: codewords.iter().map(|w| w.to_string()).collect(),
        word: game.word.to_string(),
        resolved: yprime.to_string(),
        matches,
        expected_total,
    }))
}
