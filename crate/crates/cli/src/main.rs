//! Command-line front end for causal checking and inference.
//!
//! Exit codes: 0 success, 1 not-a-cause (`check --strict`), 2 usage error,
//! 3 input error, 4 timeout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use hpcausal::bench::{
    gen_abt, gen_binary_tree, records_to_csv, run_bench, sample_queries, BenchConfig, Connective,
    Family, GeneratorSpec,
};
use hpcausal::causality::{
    answer_query, answer_to_json, answer_to_text, CausalQuery, Options, Strategy,
};
use hpcausal::cnf::{tseitin, write_dimacs, write_wcnf};
use hpcausal::encoder::{build_f, build_g_max, build_g_prime, build_g_star, CandidateCause};
use hpcausal::ilp::{build_check_program, build_why_program, write_lp};
use hpcausal::model::{
    model_to_json, parse_expr, parse_model, BoolExpr, CausalModel, Context, VariableId,
};
use hpcausal::Error;

const EXIT_NOT_A_CAUSE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

#[derive(Parser)]
#[command(name = "hpcausal", version, about = "Actual-cause checking and inference over binary acyclic causal models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether a candidate cause is an actual cause of an effect.
    Check(CheckArgs),
    /// Infer a maximum-responsibility cause without a candidate.
    Infer(InferArgs),
    /// Generate a benchmark model.
    Gen(GenArgs),
    /// Sample queries over model files and benchmark the strategies.
    Bench(BenchArgs),
    /// Export solver input files for a query.
    Export(ExportArgs),
    /// Parse a model file and check its invariants.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Sat,
    Satopt,
    Ilp,
    Maxsat,
    Brute,
}

impl StrategyArg {
    fn to_strategy(self) -> Strategy {
        match self {
            StrategyArg::Sat => Strategy::SatLegacy,
            StrategyArg::Satopt => Strategy::SatOptimized,
            StrategyArg::Ilp => Strategy::Ilp,
            StrategyArg::Maxsat => Strategy::MaxSat,
            StrategyArg::Brute => Strategy::BruteForce,
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    /// Context assignment, e.g. "ST_exo=1,BT_exo=1".
    #[arg(long)]
    context: String,
    /// Effect: an assignment list ("BS=1") or an expression ("SH | BH").
    #[arg(long)]
    effect: String,
    /// Candidate cause assignment, e.g. "ST=1,BT=1".
    #[arg(long)]
    cause: String,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Collect every minimum-distance cause, not only the first.
    #[arg(long)]
    all_optima: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Exit with code 1 when the candidate is not an actual cause.
    #[arg(long)]
    strict: bool,
    /// Include wall-clock timings in the stats (output is no longer
    /// byte-stable across runs).
    #[arg(long)]
    timings: bool,
    /// Abort with exit code 4 after this many seconds.
    #[arg(long)]
    timeout_secs: Option<u64>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    context: String,
    #[arg(long)]
    effect: String,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    timeout_secs: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Bt,
    Abt,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnectiveArg {
    Or,
    And,
    Random,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    height: u32,
    /// Extra non-tree variables (abt only).
    #[arg(long, default_value_t = 0)]
    extra: usize,
    #[arg(long, value_enum, default_value = "or")]
    connective: ConnectiveArg,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Model file or glob with `*` in the file name, e.g. "models/*.json".
    #[arg(long)]
    models: String,
    /// Cause sizes to sample, e.g. "1,2,3".
    #[arg(long)]
    sizes: String,
    /// Strategies to run, e.g. "ilp,maxsat,satopt".
    #[arg(long, default_value = "ilp,maxsat")]
    strategies: String,
    /// Queries per cause size per model.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    warmups: usize,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Run queries on worker threads (never within a solver).
    #[arg(long)]
    parallel: bool,
    /// Output CSV path.
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Dimacs,
    Wcnf,
    Lp,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    context: String,
    #[arg(long)]
    effect: String,
    /// Candidate cause; omit to export the inference encodings.
    #[arg(long)]
    cause: Option<String>,
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Output path prefix; suffixes depend on the kind.
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Timeout => EXIT_TIMEOUT,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Export(args) => cmd_export(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn load_model(path: &Path) -> Result<CausalModel, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(Failure::from)
}

fn parse_assignments(text: &str) -> Result<Vec<(VariableId, bool)>, Failure> {
    let mut pairs = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| Failure::input(format!("expected `var=0|1`, got `{part}`")))?;
        let value = match value.trim() {
            "0" => false,
            "1" => true,
            other => return Err(Failure::input(format!("expected 0 or 1, got `{other}`"))),
        };
        pairs.push((VariableId::new(name.trim()).map_err(Failure::from)?, value));
    }
    if pairs.is_empty() {
        return Err(Failure::input("empty assignment list"));
    }
    Ok(pairs)
}

fn parse_context(model: &CausalModel, text: &str) -> Result<Context, Failure> {
    let mut map = BTreeMap::new();
    for (v, value) in parse_assignments(text)? {
        if map.insert(v.clone(), value).is_some() {
            return Err(Failure::input(format!("`{v}` assigned twice")));
        }
    }
    Context::new(model, map).map_err(Failure::from)
}

/// Effects are either `var=0|1` lists (conjoined) or a bare expression in
/// the model grammar.
fn parse_effect(text: &str) -> Result<BoolExpr, Failure> {
    if text.contains('=') {
        let literals = parse_assignments(text)?
            .into_iter()
            .map(|(v, value)| BoolExpr::literal(&v, value))
            .collect();
        Ok(BoolExpr::and(literals))
    } else {
        parse_expr(text).map_err(Failure::from)
    }
}

fn parse_cause(text: &str) -> Result<CandidateCause, Failure> {
    CandidateCause::new(parse_assignments(text)?).map_err(Failure::from)
}

fn options_for(timings: bool, all_optima: bool, timeout_secs: Option<u64>) -> Options {
    Options {
        timings,
        all_optima,
        deadline: timeout_secs.map(|s| Instant::now() + Duration::from_secs(s)),
        ..Options::default()
    }
}

fn print_answer(answer: &hpcausal::causality::CausalAnswer, format: FormatArg) {
    match format {
        FormatArg::Json => println!("{}", answer_to_json(answer)),
        FormatArg::Text => print!("{}", answer_to_text(answer)),
    }
}

fn cmd_check(args: CheckArgs) -> Result<u8, Failure> {
    let model = load_model(&args.model)?;
    let context = parse_context(&model, &args.context)?;
    let effect = parse_effect(&args.effect)?;
    let cause = parse_cause(&args.cause)?;
    let query = CausalQuery {
        model: &model,
        context,
        effect,
        cause: Some(cause),
        strategy: args.strategy.to_strategy(),
    };
    let options = options_for(args.timings, args.all_optima, args.timeout_secs);
    let answer = answer_query(&query, &options)?;
    print_answer(&answer, args.format);
    if args.strict && !answer.is_cause() {
        return Ok(EXIT_NOT_A_CAUSE);
    }
    Ok(0)
}

fn cmd_infer(args: InferArgs) -> Result<u8, Failure> {
    let model = load_model(&args.model)?;
    let context = parse_context(&model, &args.context)?;
    let effect = parse_effect(&args.effect)?;
    let query = CausalQuery {
        model: &model,
        context,
        effect,
        cause: None,
        strategy: Strategy::WhyIlp,
    };
    let options = options_for(args.timings, false, args.timeout_secs);
    let answer = answer_query(&query, &options)?;
    print_answer(&answer, args.format);
    Ok(0)
}

fn cmd_gen(args: GenArgs) -> Result<u8, Failure> {
    if args.height < 1 {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "height must be at least 1".into(),
        });
    }
    let spec = GeneratorSpec {
        family: match args.family {
            FamilyArg::Bt => Family::BinaryTree,
            FamilyArg::Abt => Family::Abt,
        },
        height: args.height,
        connective: match args.connective {
            ConnectiveArg::Or => Connective::Or,
            ConnectiveArg::And => Connective::And,
            ConnectiveArg::Random => Connective::Random,
        },
        extra_vars: args.extra,
        seed: args.seed,
    };
    let model = match spec.family {
        Family::BinaryTree => gen_binary_tree(&spec),
        Family::Abt => gen_abt(&spec),
    };
    std::fs::write(&args.out, model_to_json(&model))
        .map_err(|e| Failure::input(format!("{}: {e}", args.out.display())))?;
    println!(
        "wrote {} ({} endogenous, {} exogenous)",
        args.out.display(),
        model.endogenous().len(),
        model.exogenous().len()
    );
    Ok(0)
}

/// Expands a pattern whose final component may contain `*`.
fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>, Failure> {
    let path = Path::new(pattern);
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Failure::input(format!("bad model pattern `{pattern}`")))?;
    if !name.contains('*') {
        return Ok(vec![path.to_path_buf()]);
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let (prefix, suffix) = name.split_once('*').expect("checked for *");
    let mut matches = Vec::new();
    let entries = std::fs::read_dir(&dir)
        .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(|e| Failure::input(e.to_string()))?;
        let file_name = entry.file_name();
        let Some(text) = file_name.to_str() else {
            continue;
        };
        if text.starts_with(prefix)
            && text.ends_with(suffix)
            && text.len() >= prefix.len() + suffix.len()
        {
            matches.push(entry.path());
        }
    }
    matches.sort();
    if matches.is_empty() {
        return Err(Failure::input(format!("no models match `{pattern}`")));
    }
    Ok(matches)
}

fn cmd_bench(args: BenchArgs) -> Result<u8, Failure> {
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::input(format!("bad --sizes: {e}")))?;
    let strategies: Vec<Strategy> = args
        .strategies
        .split(',')
        .map(|s| Strategy::parse(s.trim()))
        .collect::<Result<_, _>>()
        .map_err(Failure::from)?;
    let cfg = BenchConfig {
        strategies,
        reps: args.reps,
        warmups: args.warmups,
        timeout: Duration::from_secs(args.timeout_secs),
        parallel: args.parallel,
    };

    let mut all_records = Vec::new();
    for path in expand_glob(&args.models)? {
        let model = load_model(&path)?;
        let queries =
            sample_queries(&model, &sizes, args.count, args.seed).map_err(Failure::from)?;
        all_records.extend(run_bench(&model, &queries, &cfg));
    }
    let csv = records_to_csv(&all_records);
    std::fs::write(&args.csv, &csv)
        .map_err(|e| Failure::input(format!("{}: {e}", args.csv.display())))?;

    // Qualitative summary: median wall time per strategy.
    let mut by_strategy: BTreeMap<&str, Vec<u128>> = BTreeMap::new();
    let mut timeouts = 0usize;
    let mut inconsistent = 0usize;
    for r in &all_records {
        by_strategy.entry(r.strategy).or_default().push(r.wall_time_micros);
        if r.status == "timeout" {
            timeouts += 1;
        }
        if !r.consistent {
            inconsistent += 1;
        }
    }
    println!(
        "{} records over {} strategies -> {}",
        all_records.len(),
        by_strategy.len(),
        args.csv.display()
    );
    for (name, mut times) in by_strategy {
        times.sort_unstable();
        let median = times[times.len() / 2];
        println!("  {name}: median {median} us over {} queries", times.len());
    }
    if timeouts > 0 {
        println!("  timeouts: {timeouts}");
    }
    if inconsistent > 0 {
        println!("  WARNING: {inconsistent} records had inconsistent verdicts across repetitions");
    }
    Ok(0)
}

fn cmd_export(args: ExportArgs) -> Result<u8, Failure> {
    let model = load_model(&args.model)?;
    let context = parse_context(&model, &args.context)?;
    let effect = parse_effect(&args.effect)?;
    let cause = args.cause.as_deref().map(parse_cause).transpose()?;

    let mut written = Vec::new();
    let mut emit = |suffix: &str, body: String| -> Result<(), Failure> {
        let path = format!("{}.{suffix}", args.out);
        std::fs::write(&path, body).map_err(|e| Failure::input(format!("{path}: {e}")))?;
        written.push(path);
        Ok(())
    };

    match (args.kind, &cause) {
        (KindArg::Dimacs, Some(cause)) => {
            let f = tseitin(&build_f(&model, &context, &effect, cause)?);
            emit("f.cnf", write_dimacs(&f))?;
            let g_prime = tseitin(&build_g_prime(&model, &context, &effect, cause)?);
            emit("gprime.cnf", write_dimacs(&g_prime))?;
        }
        (KindArg::Dimacs, None) => {
            let g_star = tseitin(&build_g_star(&model, &context, &effect)?);
            emit("gstar.cnf", write_dimacs(&g_star))?;
        }
        (KindArg::Wcnf, Some(cause)) => {
            let (hard, soft) = build_g_max(&model, &context, &effect, cause)?;
            emit("gmax.wcnf", write_wcnf(&tseitin(&hard), &soft))?;
        }
        (KindArg::Wcnf, None) => {
            return Err(Failure {
                code: EXIT_USAGE,
                message: "--kind wcnf requires --cause".into(),
            });
        }
        (KindArg::Lp, Some(cause)) => {
            let check = build_check_program(&model, &context, &effect, cause)?;
            for (suffix, body) in write_lp(&check.program)? {
                emit(&format!("check.{suffix}"), body)?;
            }
        }
        (KindArg::Lp, None) => {
            let why = build_why_program(&model, &context, &effect)?;
            for (suffix, body) in write_lp(&why.program)? {
                emit(&format!("why.{suffix}"), body)?;
            }
        }
    }
    for path in written {
        println!("wrote {path}");
    }
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, Failure> {
    let model = load_model(&args.model)?;
    println!(
        "{}: valid ({} exogenous, {} endogenous)",
        model.name(),
        model.exogenous().len(),
        model.endogenous().len()
    );
    Ok(0)
}
