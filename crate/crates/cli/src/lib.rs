//! Command-line front end: load markets, priors and mechanisms from JSON, run
//! audits, reproduce the worked cases, and print reports as text or JSON.
//!
//! Exit codes: 0 stable or all claims hold, 1 block found or a claim failed,
//! 2 usage or input error, 3 search budget exhausted without a verdict.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use matchaudit::cases::{run_case, CaseId};
use matchaudit::mechanism::{rank_distribution, stable_set};
use matchaudit::stability::search::{DEFAULT_EXPANSION_ROUNDS, DEFAULT_MAX_CANDIDATE_SETS};
use matchaudit::stability::{
    ex_ante_block_in, ex_ante_pairwise_stable, ex_ante_stable, ex_post_stable_at, interim_block, interim_pairwise_stable,
    interim_stable, Audit, BlockWitness, Coalition, InterimWitness, SearchOptions, StabilityReport, Verdict,
};
use matchaudit::{AgentId, Error, Mechanism, PreferenceProfile, Prior, Rational};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BLOCKED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "matchaudit", version, about = "Exact stability audits for randomized matching mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide stability of a mechanism under a prior.
    Audit(AuditArgs),
    /// Search for a block by one given coalition.
    FindBlock {
        #[command(flatten)]
        audit: AuditArgs,
        /// Coalition members, e.g. `m1,w1`.
        #[arg(long, value_delimiter = ',', required = true)]
        coalition: Vec<String>,
    },
    /// Recompute every claim of a worked case.
    Reproduce(ReproduceArgs),
    /// Rank distribution of one agent under a mechanism and prior.
    Rankdist {
        #[arg(long)]
        mechanism: String,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        agent: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// All stable matchings of a profile.
    StableSet {
        #[arg(long)]
        profile: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Same as `--format json`.
    #[arg(long)]
    json: bool,
}

impl OutputArgs {
    fn json(&self) -> bool {
        self.json || self.format == Format::Json
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Notion {
    ExPost,
    Interim,
    ExAnte,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scope {
    Pairwise,
    Coalitions,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Built-in name (da-men, da-women, random-stable, uniform-random, uniform-random-full) or a JSON file.
    #[arg(long)]
    mechanism: String,
    /// Prior JSON file; a profile JSON file is read as a point mass.
    #[arg(long)]
    prior: PathBuf,
    #[arg(long, value_enum, default_value_t = Notion::ExAnte)]
    notion: Notion,
    #[arg(long, value_enum, default_value_t = Scope::Pairwise)]
    scope: Scope,
    /// Largest coalition tried with `--scope coalitions` (default: everyone).
    #[arg(long)]
    max_coalition: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_CANDIDATE_SETS)]
    max_candidate_sets: usize,
    #[arg(long, default_value_t = DEFAULT_EXPANSION_ROUNDS)]
    expansion_rounds: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CaseName {
    Example1,
    Example2,
    Example3,
    Insurance,
    Correlated,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    case: CaseName,
    /// Type probability for example3 (default 1/8) and insurance (default 1/2).
    #[arg(long, value_parser = parse_rational)]
    p: Option<Rational>,
    #[arg(long, value_parser = parse_rational, default_value = "1/5")]
    delta: Rational,
    #[arg(long, value_parser = parse_rational, default_value = "3/20")]
    epsilon: Rational,
    /// Values of a first, second and third choice for the insurance case.
    #[arg(long, value_delimiter = ',', value_parser = parse_rational, default_values = ["1", "3/4", "0"])]
    utilities: Vec<Rational>,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_rational(text: &str) -> Result<Rational, String> {
    Rational::parse(text).map_err(|e| e.to_string())
}

/// Parses `args` (program name first), runs the command, and returns the exit code.
/// Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Resource { .. } => EXIT_BUDGET,
                _ => EXIT_INPUT,
            }
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> matchaudit::Result<i32> {
    match command {
        Command::Audit(args) => audit(&args, None, out),
        Command::FindBlock { audit: args, coalition } => {
            let members = coalition.iter().map(|k| AgentId::parse(k.trim())).collect::<matchaudit::Result<Vec<_>>>()?;
            audit(&args, Some(Coalition::new(members)?), out)
        }
        Command::Reproduce(args) => reproduce(&args, out),
        Command::Rankdist { mechanism, prior, agent, output } => {
            let mechanism = load_mechanism(&mechanism)?;
            let prior = load_prior(&prior)?;
            let agent = AgentId::parse(&agent)?;
            let dist = rank_distribution(&mechanism, &prior, agent)?;
            if output.json() {
                emit_json(out, &serde_json::to_value(&dist).expect("rank distribution serializes"))?;
            } else {
                emit(out, &format!("{agent} under {}: {dist}", mechanism.name()))?;
            }
            Ok(EXIT_OK)
        }
        Command::StableSet { profile, output } => {
            let profile: PreferenceProfile = read_json(&profile)?;
            let stable = stable_set(&profile)?;
            if output.json() {
                emit_json(out, &serde_json::to_value(&stable).expect("matchings serialize"))?;
            } else {
                for m in &stable {
                    emit(out, &m.to_string())?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> matchaudit::Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::Invalid(format!("cannot write output: {e}")))
}

fn emit_json(out: &mut dyn Write, value: &Value) -> matchaudit::Result<()> {
    emit(out, &serde_json::to_string_pretty(value).expect("json value serializes"))
}

/// Reads a JSON file, reporting syntax errors with their line and column.
fn read_json<T: DeserializeOwned>(path: &Path) -> matchaudit::Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text, path)
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> matchaudit::Result<T> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())))?;
    serde_json::from_value(value).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_mechanism(name: &str) -> matchaudit::Result<Mechanism> {
    if let Some(m) = Mechanism::builtin(name) {
        return Ok(m);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(Error::Invalid(format!("{name:?} is neither a built-in mechanism nor a file")));
    }
    let value: Value = read_json(path)?;
    Mechanism::from_json_str(&value.to_string()).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// A prior file, or a single profile read as a point mass.
fn load_prior(path: &Path) -> matchaudit::Result<Prior> {
    let value: Value = read_json(path)?;
    if value.get("support").is_some() || value.get("agents").is_some() {
        return Prior::from_json_str(&value.to_string()).map_err(|e| Error::Parse(format!("{}: {e}", path.display())));
    }
    let profile: PreferenceProfile = parse_json(&value.to_string(), path)?;
    Ok(Prior::point_mass(profile))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Stable => "stable",
        Verdict::Unstable => "unstable",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Stable => EXIT_OK,
        Verdict::Unstable => EXIT_BLOCKED,
        Verdict::Inconclusive => EXIT_BUDGET,
    }
}

enum Found {
    Block(BlockWitness),
    Interim(InterimWitness),
}

struct Outcome {
    verdict: Verdict,
    coalitions_checked: usize,
    programs_solved: usize,
    /// Ex post: the profile at which the witness blocks.
    profile: Option<PreferenceProfile>,
    witness: Option<Found>,
}

impl Outcome {
    fn from_block(r: StabilityReport<BlockWitness>) -> Self {
        Outcome {
            verdict: r.verdict(),
            coalitions_checked: r.coalitions_checked,
            programs_solved: r.programs_solved,
            profile: None,
            witness: r.witness.map(Found::Block),
        }
    }

    fn from_interim(r: StabilityReport<InterimWitness>) -> Self {
        Outcome {
            verdict: r.verdict(),
            coalitions_checked: r.coalitions_checked,
            programs_solved: r.programs_solved,
            profile: None,
            witness: r.witness.map(Found::Interim),
        }
    }
}

fn audit(args: &AuditArgs, only: Option<Coalition>, out: &mut dyn Write) -> matchaudit::Result<i32> {
    let mechanism = load_mechanism(&args.mechanism)?;
    let prior = load_prior(&args.prior)?;
    let market = prior.market();
    if let Some(c) = &only {
        for &a in c.members() {
            market.check_agent(a)?;
        }
    }
    let opts = SearchOptions {
        max_candidate_sets: args.max_candidate_sets,
        expansion_rounds: args.expansion_rounds,
        ..SearchOptions::default()
    };
    let max = args.max_coalition.unwrap_or(market.num_agents());
    let outcome = match (args.notion, &only) {
        (Notion::ExAnte, Some(c)) => {
            let w = ex_ante_block_in(&Audit::new(&mechanism, &prior), c, &opts)?;
            single_block(w.map(Found::Block))
        }
        (Notion::ExAnte, None) => Outcome::from_block(match args.scope {
            Scope::Pairwise => ex_ante_pairwise_stable(&mechanism, &prior)?,
            Scope::Coalitions => ex_ante_stable(&mechanism, &prior, max, &opts)?,
        }),
        (Notion::Interim, Some(c)) => {
            let s = interim_block(&mechanism, &prior, c, &opts)?;
            let mut o = single_block(s.witness.map(Found::Interim));
            o.programs_solved = s.programs_solved;
            if o.witness.is_none() && !s.exhaustive {
                o.verdict = Verdict::Inconclusive;
            }
            o
        }
        (Notion::Interim, None) => Outcome::from_interim(match args.scope {
            Scope::Pairwise => interim_pairwise_stable(&mechanism, &prior, &opts)?,
            Scope::Coalitions => interim_stable(&mechanism, &prior, max, &opts)?,
        }),
        (Notion::ExPost, _) => ex_post(&mechanism, &prior, args.scope, max, only.as_ref(), &opts)?,
    };

    let notion = args.notion.to_possible_value().expect("named").get_name().to_string();
    let scope = match &only {
        Some(c) => c.to_string(),
        None => args.scope.to_possible_value().expect("named").get_name().to_string(),
    };
    if args.output.json() {
        let mut report = json!({
            "mechanism": mechanism.name(),
            "notion": notion,
            "scope": scope,
            "verdict": verdict_name(outcome.verdict),
            "coalitions_checked": outcome.coalitions_checked,
            "programs_solved": outcome.programs_solved,
        });
        if let Some(p) = &outcome.profile {
            report["profile"] = serde_json::to_value(p).expect("profile serializes");
        }
        match &outcome.witness {
            Some(Found::Block(w)) => report["witness"] = w.to_json_value(),
            Some(Found::Interim(w)) => report["interim_witness"] = w.to_json_value(),
            None => {}
        }
        emit_json(out, &report)?;
    } else {
        emit(out, &format!("{} under {notion} ({scope}): {}", mechanism.name(), verdict_name(outcome.verdict)))?;
        emit(out, &format!("coalitions checked: {}, programs solved: {}", outcome.coalitions_checked, outcome.programs_solved))?;
        if let Some(p) = &outcome.profile {
            emit(out, &format!("at profile {p}"))?;
        }
        match &outcome.witness {
            Some(Found::Block(w)) => {
                emit(out, &format!("blocking coalition {}", w.coalition))?;
                for e in &w.per_agent {
                    emit(out, &format!("  {}: {} -> {} ({} at {:?})", e.agent, e.before, e.after, e.verdict.relation, e.verdict.thresholds))?;
                }
            }
            Some(Found::Interim(w)) => {
                emit(out, &format!("blocking coalition {} in the interim", w.coalition))?;
                for e in &w.per_type {
                    emit(out, &format!("  {} as {}: {} -> {} (mass {})", e.agent, e.ranking, e.before, e.after, e.event_mass))?;
                }
            }
            None => {}
        }
    }
    Ok(exit_code(outcome.verdict))
}

fn single_block(witness: Option<Found>) -> Outcome {
    let verdict = if witness.is_some() { Verdict::Unstable } else { Verdict::Stable };
    Outcome { verdict, coalitions_checked: 1, programs_solved: 1, profile: None, witness }
}

/// Ex-post stability at every support profile; the first block found is reported.
fn ex_post(
    mechanism: &Mechanism,
    prior: &Prior,
    scope: Scope,
    max: usize,
    only: Option<&Coalition>,
    opts: &SearchOptions,
) -> matchaudit::Result<Outcome> {
    let mut total = Outcome { verdict: Verdict::Stable, coalitions_checked: 0, programs_solved: 0, profile: None, witness: None };
    for (profile, _) in prior.support() {
        let point = Prior::point_mass(profile.clone());
        let o = match (only, scope) {
            (Some(c), _) => single_block(ex_ante_block_in(&Audit::new(mechanism, &point), c, opts)?.map(Found::Block)),
            (None, Scope::Pairwise) => Outcome::from_block(ex_ante_pairwise_stable(mechanism, &point)?),
            (None, Scope::Coalitions) => Outcome::from_block(ex_post_stable_at(mechanism, profile, max)?),
        };
        total.coalitions_checked += o.coalitions_checked;
        total.programs_solved += o.programs_solved;
        if o.witness.is_some() {
            total.verdict = Verdict::Unstable;
            total.profile = Some(profile.clone());
            total.witness = o.witness;
            break;
        }
    }
    Ok(total)
}

fn reproduce(args: &ReproduceArgs, out: &mut dyn Write) -> matchaudit::Result<i32> {
    let id = match args.case {
        CaseName::Example1 => CaseId::Example1,
        CaseName::Example2 => CaseId::Example2Interim,
        CaseName::Example3 => CaseId::example3(args.p.clone().unwrap_or_else(|| Rational::new(1, 8)))?,
        CaseName::Insurance => {
            let utilities: [Rational; 3] = args
                .utilities
                .clone()
                .try_into()
                .map_err(|_| Error::Invalid("--utilities takes exactly three values".into()))?;
            CaseId::insurance(args.p.clone().unwrap_or_else(|| Rational::new(1, 2)), utilities)?
        }
        CaseName::Correlated => CaseId::correlated(args.delta.clone(), args.epsilon.clone())?,
    };
    let report = run_case(&id)?;
    if args.output.json() {
        emit_json(out, &report.to_json_value())?;
    } else {
        write!(out, "{}", report.to_text()).map_err(|e| Error::Invalid(format!("cannot write output: {e}")))?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_BLOCKED })
}
