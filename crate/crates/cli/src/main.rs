//! `c3trace`: generate codes, simulate attacks, trace pirates, enumerate
//! parent triples, size codes and run Monte Carlo experiments.
//!
//! Exit codes: 0 on success, 1 on bad input or parameters, 2 when a contract
//! is broken (Marking Assumption, infeasible length, oversized output).

mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use c3trace::attacks::{
    apply_strategy, detectable_columns, enforce_marking_assumption, PirateSet, Strategy,
    StrategyKind,
};
use c3trace::bounds::{self, BoundBreakdown, REFERENCE_LENGTHS};
use c3trace::codegen::{generate_code, CodeParams};
use c3trace::envelope::{self, ClassCounts, TripleEngine};
use c3trace::io;
use c3trace::rng::{Seed, StreamLabel};
use c3trace::sim::{self, ExperimentConfig};
use c3trace::tracing::{trace_with, ThresholdMode, TraceOptions};
use c3trace::triples::TripleSet;
use c3trace::Error;

use manifest::{RunManifest, Wrapped};

#[derive(Parser)]
#[command(
    name = "c3trace",
    version,
    about = "3-secure fingerprint codes and traitor tracing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a code matrix and its secret column state.
    Generate(GenerateArgs),
    /// Build an attack word from pirate codewords.
    Attack(AttackArgs),
    /// Trace the pirates behind an attack word.
    Trace(TraceArgs),
    /// Enumerate the parent triples of a binary word.
    Triples(TriplesArgs),
    /// Minimal code length for a target error probability.
    Length(LengthArgs),
    /// Run a Monte Carlo experiment described by a JSON config.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of users N (at least 4).
    #[arg(long)]
    users: usize,
    /// Code length m.
    #[arg(long)]
    length: usize,
    /// Bias p in [1/2, 1).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Code matrix output file.
    #[arg(long, default_value = "code.txt")]
    code: PathBuf,
    /// State output file.
    #[arg(long, default_value = "state.txt")]
    state: PathBuf,
}

#[derive(Args)]
struct AttackArgs {
    /// Code matrix file.
    #[arg(long)]
    code: PathBuf,
    /// Comma-separated pirate user indices (0-based, one to three).
    #[arg(long, value_delimiter = ',', required = true)]
    pirates: Vec<usize>,
    /// majority, minority, interleave, random-bit, erase-detectable or unbalanced.
    #[arg(long)]
    attack: String,
    /// Erasure probability for erase-detectable.
    #[arg(long)]
    erase_prob: Option<f64>,
    /// Comma-separated pirate weights for unbalanced, summing to 1.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Attack word output file.
    #[arg(long, default_value = "word.txt")]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    /// Code matrix file.
    #[arg(long)]
    code: PathBuf,
    /// State file.
    #[arg(long)]
    state: PathBuf,
    /// Attack word file.
    #[arg(long)]
    word: PathBuf,
    /// False-positive budget ε₀ shared by all innocent users.
    #[arg(long)]
    eps0: f64,
    /// exact or z0; defaults to exact at p = 1/2 and z0 otherwise.
    #[arg(long)]
    threshold: Option<String>,
    /// Seed for resolving erasures; required when the word contains '?'.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the brute-force triple enumeration.
    #[arg(long)]
    naive: bool,
    /// Largest number of triples materialized.
    #[arg(long, env = "C3TRACE_MAX_EXPAND", default_value_t = envelope::DEFAULT_MAX_EXPAND)]
    max_expand: usize,
}

#[derive(Args)]
struct TriplesArgs {
    /// Code matrix file.
    #[arg(long)]
    code: PathBuf,
    /// Binary word file (no erasures).
    #[arg(long)]
    word: PathBuf,
    /// Use the brute-force enumeration instead of the index.
    #[arg(long)]
    naive: bool,
    /// Largest number of triples listed explicitly.
    #[arg(long, env = "C3TRACE_MAX_EXPAND", default_value_t = envelope::DEFAULT_MAX_EXPAND)]
    max_expand: usize,
}

#[derive(Args)]
struct LengthArgs {
    /// Number of users N.
    #[arg(long, required_unless_present = "table")]
    users: Option<usize>,
    /// Target error probability ε.
    #[arg(long, required_unless_present = "table")]
    eps: Option<f64>,
    /// ε₀ as a number or as `fraction:x` meaning x·ε.
    #[arg(long, required_unless_present = "table")]
    eps0: Option<String>,
    /// Search ceiling for m.
    #[arg(long, default_value_t = bounds::DEFAULT_LENGTH_CEILING)]
    ceiling: usize,
    /// Print the published reference lengths (`paper`) next to computed ones as CSV.
    #[arg(long, conflicts_with_all = ["users", "eps", "eps0"])]
    table: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Also write one CSV row per trial to this file.
    #[arg(long)]
    per_trial: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Check the unbiased score identities instead of tracing.
    #[arg(long)]
    sum_rule: bool,
}

/// Failure of a subcommand: a library error or an I/O problem.
enum Failure {
    Core(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_contract_violation() => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_input(path: &Path, manifest: &mut RunManifest) -> CliResult<String> {
    let bytes =
        fs::read(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    manifest.record_input(&path.display().to_string(), &bytes);
    String::from_utf8(bytes).map_err(|_| Failure::Io(format!("{} is not UTF-8", path.display())))
}

fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn emit<T: Serialize>(manifest: &RunManifest, result: T) {
    let out = serde_json::to_string_pretty(&Wrapped { manifest, result })
        .expect("output is serializable");
    println!("{out}");
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut manifest = RunManifest::new(&args);
    let outcome = match cli.command {
        Command::Generate(a) => generate(a, &mut manifest),
        Command::Attack(a) => attack(a, &mut manifest),
        Command::Trace(a) => trace(a, &mut manifest),
        Command::Triples(a) => triples(a, &mut manifest),
        Command::Length(a) => length(a, &mut manifest),
        Command::Simulate(a) => simulate(a, &mut manifest),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            report(&failure, &manifest);
            ExitCode::from(failure.exit_code())
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    message: String,
    contract_violation: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    mismatch: Option<&'a c3trace::Mismatch>,
}

fn report(failure: &Failure, manifest: &RunManifest) {
    let (message, contract_violation, mismatch) = match failure {
        Failure::Core(e) => (
            e.to_string(),
            e.is_contract_violation(),
            match e {
                Error::Mismatch(m) => Some(m),
                _ => None,
            },
        ),
        Failure::Io(msg) => (msg.clone(), false, None),
    };
    eprintln!("error: {message}");
    let body = serde_json::json!({
        "manifest": manifest,
        "error": ErrorReport { message, contract_violation, mismatch },
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&body).expect("serializable")
    );
}

// ------------------------------------------------------------------ generate

#[derive(Serialize)]
struct GenerateResult {
    n_users: usize,
    code_length: usize,
    bias: f64,
    code_file: String,
    state_file: String,
    high_columns: usize,
}

fn generate(a: GenerateArgs, manifest: &mut RunManifest) -> CliResult<()> {
    manifest.master_seed = Some(a.seed);
    // ε₀ plays no part in sampling; any valid value will do
    let params = CodeParams::new(a.users, a.length, a.p, 0.5)?;
    let (w, st) = generate_code(&params, Seed::new(a.seed, StreamLabel::Codegen))?;
    write_output(&a.code, &io::write_code(&w, a.p))?;
    write_output(&a.state, &io::write_state(&st))?;
    emit(
        manifest,
        GenerateResult {
            n_users: a.users,
            code_length: a.length,
            bias: a.p,
            code_file: a.code.display().to_string(),
            state_file: a.state.display().to_string(),
            high_columns: (0..st.len()).filter(|&j| st.is_high(j)).count(),
        },
    );
    Ok(())
}

// ------------------------------------------------------------------ attack

#[derive(Serialize)]
struct AttackResult {
    pirates: Vec<usize>,
    strategy: Strategy,
    word: String,
    word_file: String,
    detectable_columns: usize,
    erasures: usize,
}

fn attack(a: AttackArgs, manifest: &mut RunManifest) -> CliResult<()> {
    manifest.master_seed = Some(a.seed);
    let (w, _) = io::read_code(&read_input(&a.code, manifest)?)?;
    let pirates = PirateSet::new(a.pirates, w.n_users())?;
    let strategy = Strategy {
        kind: StrategyKind::from_str(&a.attack)?,
        weights: a.weights,
        erase_prob: a.erase_prob,
    };
    strategy.validate(Some(pirates.len()))?;
    let codewords = pirates.codewords(&w);
    let y = apply_strategy(
        &strategy,
        &codewords,
        Seed::new(a.seed, StreamLabel::Attack),
    )?;
    enforce_marking_assumption(&codewords, &y)?;
    write_output(&a.out, &io::write_word(&y))?;
    emit(
        manifest,
        AttackResult {
            pirates: pirates.members().to_vec(),
            strategy,
            word: y.to_string(),
            word_file: a.out.display().to_string(),
            detectable_columns: detectable_columns(&codewords)?.detectable.len(),
            erasures: y.symbols().iter().filter(|s| s.bit().is_none()).count(),
        },
    );
    Ok(())
}

// ------------------------------------------------------------------ trace

fn trace(a: TraceArgs, manifest: &mut RunManifest) -> CliResult<()> {
    manifest.master_seed = a.seed;
    let (w, bias) = io::read_code(&read_input(&a.code, manifest)?)?;
    let st = io::read_state(&read_input(&a.state, manifest)?, bias)?;
    let y = io::read_word(&read_input(&a.word, manifest)?)?;
    let params = CodeParams::new(w.n_users(), w.code_length(), bias, a.eps0)?;
    let seed = match a.seed {
        Some(s) => s,
        None if y.has_erasures() => {
            return Err(Error::InvalidParams(
                "the word contains erasures; pass --seed to resolve them".into(),
            )
            .into())
        }
        None => 0,
    };
    let opts = TraceOptions {
        threshold: a
            .threshold
            .as_deref()
            .map(ThresholdMode::from_str)
            .transpose()?,
        engine: if a.naive {
            TripleEngine::Naive
        } else {
            TripleEngine::Indexed
        },
        max_expand: a.max_expand,
        naive_cap: usize::MAX,
        ..TraceOptions::default()
    };
    let result = trace_with(
        &y,
        &w,
        &st,
        &params,
        Seed::new(seed, StreamLabel::ErasureResolution),
        &opts,
    )?;
    emit(manifest, result);
    Ok(())
}

// ------------------------------------------------------------------ triples

#[derive(Serialize)]
struct TriplesResult {
    engine: TripleEngine,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_counts: Option<ClassCounts>,
    /// Upper bound on the number of triples, counting class overlaps repeatedly.
    #[serde(skip_serializing_if = "Option::is_none")]
    size_upper_bound: Option<String>,
    count: Option<usize>,
    /// `None` when the family exceeds `--max-expand`.
    triples: Option<TripleSet>,
}

fn triples(a: TriplesArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let (w, _) = io::read_code(&read_input(&a.code, manifest)?)?;
    let y = io::read_word(&read_input(&a.word, manifest)?)?;
    if y.has_erasures() {
        return Err(Error::InvalidParams(
            "triples needs a binary word; resolve erasures first".into(),
        )
        .into());
    }
    let bits: Vec<bool> = y
        .symbols()
        .iter()
        .map(|s| s.bit().expect("binary"))
        .collect();
    let yprime = c3trace::BitWord::from_bools(&bits);
    let result = if a.naive {
        let t = envelope::triples_naive_capped(&w, &yprime, usize::MAX)?;
        if t.len() > a.max_expand {
            return Err(Error::ExpansionOverflow {
                cap: a.max_expand,
                singles: 0,
                pairs: 0,
                triples: 0,
            }
            .into());
        }
        TriplesResult {
            engine: TripleEngine::Naive,
            class_counts: None,
            size_upper_bound: None,
            count: Some(t.len()),
            triples: Some(t),
        }
    } else {
        let c = envelope::triples_indexed(&w, &yprime)?;
        let listed = match envelope::expand(&c, w.n_users(), a.max_expand) {
            Ok(t) => Some(t),
            Err(Error::ExpansionOverflow { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        TriplesResult {
            engine: TripleEngine::Indexed,
            class_counts: Some(c.class_counts()),
            size_upper_bound: Some(envelope::expansion_upper_bound(&c, w.n_users()).to_string()),
            count: listed.as_ref().map(TripleSet::len),
            triples: listed,
        }
    };
    emit(manifest, result);
    Ok(())
}

// ------------------------------------------------------------------ length

/// Parses `--eps0`: a plain number or `fraction:x` for x·ε.
fn parse_eps0(raw: &str, eps: f64) -> CliResult<f64> {
    let bad = || Failure::Core(Error::InvalidParams(format!("cannot parse eps0 '{raw}'")));
    match raw.strip_prefix("fraction:") {
        Some(x) => Ok(x.trim().parse::<f64>().map_err(|_| bad())? * eps),
        None => raw.trim().parse::<f64>().map_err(|_| bad()),
    }
}

#[derive(Serialize)]
struct LengthResult {
    n_users: usize,
    eps: f64,
    eps0: f64,
    length: usize,
    condition_min_length: usize,
    breakdown: BoundBreakdown,
}

fn length(a: LengthArgs, manifest: &mut RunManifest) -> CliResult<()> {
    if let Some(table) = a.table {
        if table != "paper" {
            return Err(Error::InvalidParams(format!(
                "unknown table '{table}'; the only table is 'paper'"
            ))
            .into());
        }
        return length_table(manifest);
    }
    let n = a.users.expect("required by clap");
    let eps = a.eps.expect("required by clap");
    let eps0 = parse_eps0(a.eps0.as_deref().expect("required by clap"), eps)?;
    let m = bounds::min_length_with_ceiling(n, eps, eps0, a.ceiling)?;
    emit(
        manifest,
        LengthResult {
            n_users: n,
            eps,
            eps0,
            length: m,
            condition_min_length: bounds::condition_min_length(n, eps0),
            breakdown: bounds::theorem2_bound(n, m, eps0),
        },
    );
    Ok(())
}

fn length_table(manifest: &RunManifest) -> CliResult<()> {
    let mut out = String::new();
    writeln!(
        out,
        "# manifest: {}",
        serde_json::to_string(manifest).expect("serializable")
    )
    .expect("string write");
    out.push_str("table,n_users,eps,eps0_fraction,eps0,published_length,computed_length,match\n");
    for r in REFERENCE_LENGTHS {
        let eps0 = r.eps0_fraction * r.eps;
        let m = bounds::min_length(r.n_users, r.eps, eps0)?;
        writeln!(
            out,
            "{},{},{:e},{},{:e},{},{},{}",
            r.table,
            r.n_users,
            r.eps,
            r.eps0_fraction,
            eps0,
            r.length,
            m,
            m == r.length
        )
        .expect("string write");
    }
    print!("{out}");
    Ok(())
}

// ------------------------------------------------------------------ simulate

fn simulate(a: SimulateArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let text = read_input(&a.config, manifest)?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Core(Error::InvalidParams(format!("bad config: {e}"))))?;
    manifest.master_seed = Some(config.master_seed);
    let threads = a.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Io(format!("cannot start thread pool: {e}")))?;

    if a.sum_rule {
        let report = pool.install(|| sim::sum_rule_audit(&config))?;
        let passed = report.passed;
        emit(manifest, report);
        return if passed {
            Ok(())
        } else {
            Err(Error::Unsupported("score identity violated".into()).into())
        };
    }

    let stats = match &a.per_trial {
        None => pool.install(|| sim::run_experiment(&config))?,
        Some(path) => {
            let outcomes = pool.install(|| sim::run_trials(&config))?;
            let mut csv = String::new();
            writeln!(
                csv,
                "# manifest: {}",
                serde_json::to_string(manifest).expect("serializable")
            )
            .expect("string write");
            csv.push_str("index,kind,false_negative,false_positive,halted_at,pirates,accused\n");
            let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
            for o in &outcomes {
                let kind = serde_json::to_value(o.kind).expect("serializable");
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    o.index,
                    kind.as_str().expect("unit variant"),
                    o.false_negative,
                    o.false_positive,
                    o.halted_at.number(),
                    join(&o.pirates),
                    join(&o.accused)
                )
                .expect("string write");
            }
            write_output(path, &csv)?;
            sim::ErrorStats::from_outcomes(&outcomes)
        }
    };
    emit(manifest, stats);
    Ok(())
}
