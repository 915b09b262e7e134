//! Benchmark model generators, query samplers and the timing harness.
//!
//! Models come in two families: complete binary trees whose leaves copy
//! one exogenous variable each, and trees augmented with extra variables
//! holding small random clauses over earlier variables, wired into the
//! root by disjunction. Everything is driven by the fixed splitmix64
//! stream, so a spec generates byte-identical models everywhere.

use std::time::{Duration, Instant};

use crate::causality::{answer_query, CausalAnswer, CausalQuery, Options, Strategy};
use crate::encoder::CandidateCause;
use crate::error::{Error, Result};
use crate::model::{BoolExpr, CausalModel, Context, VariableId};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    BinaryTree,
    Abt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connective {
    Or,
    And,
    Random,
}

impl Connective {
    pub fn parse(text: &str) -> Result<Connective> {
        match text {
            "or" => Ok(Connective::Or),
            "and" => Ok(Connective::And),
            "random" => Ok(Connective::Random),
            other => Err(Error::Syntax(format!("unknown connective `{other}`"))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Connective::Or => "or",
            Connective::And => "and",
            Connective::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorSpec {
    pub family: Family,
    pub height: u32,
    pub connective: Connective,
    pub extra_vars: usize,
    pub seed: u64,
}

pub fn generate(spec: &GeneratorSpec) -> CausalModel {
    match spec.family {
        Family::BinaryTree => gen_binary_tree(spec),
        Family::Abt => gen_abt(spec),
    }
}

/// Complete binary tree of the given height: `2^(h+1) - 1` endogenous
/// variables in heap order (`n1` is the root), leaves equal to one fresh
/// exogenous variable each, internal nodes combining their two children
/// with the configured connective.
pub fn gen_binary_tree(spec: &GeneratorSpec) -> CausalModel {
    assert!(spec.height >= 1, "tree height starts at 1");
    let mut rng = SplitMix64::new(spec.seed);
    let total = (1usize << (spec.height + 1)) - 1;
    let first_leaf = 1usize << spec.height;

    let mut exogenous = Vec::new();
    let mut endogenous = Vec::new();
    for i in 1..=total {
        let id = VariableId::new(format!("n{i}")).expect("generated identifier");
        let eq = if i >= first_leaf {
            let exo = VariableId::new(format!("u{i}")).expect("generated identifier");
            exogenous.push(exo.clone());
            BoolExpr::var(&exo)
        } else {
            node_equation(i, spec.connective, &mut rng)
        };
        endogenous.push((id, eq));
    }
    let name = format!(
        "bt-h{}-{}-s{}",
        spec.height,
        spec.connective.label(),
        spec.seed
    );
    CausalModel::new(name, exogenous, endogenous).expect("generated tree is valid")
}

fn node_equation(i: usize, connective: Connective, rng: &mut SplitMix64) -> BoolExpr {
    let left = BoolExpr::var(&VariableId::new(format!("n{}", 2 * i)).expect("id"));
    let right = BoolExpr::var(&VariableId::new(format!("n{}", 2 * i + 1)).expect("id"));
    let use_and = match connective {
        Connective::Or => false,
        Connective::And => true,
        Connective::Random => rng.next_bool(),
    };
    if use_and {
        BoolExpr::and(vec![left, right])
    } else {
        BoolExpr::or(vec![left, right])
    }
}

/// Binary tree plus `extra_vars` additional endogenous variables whose
/// equations are random two-to-three-literal clauses over earlier
/// non-root variables, all wired into the root by disjunction.
pub fn gen_abt(spec: &GeneratorSpec) -> CausalModel {
    if spec.extra_vars == 0 {
        return gen_binary_tree(spec);
    }
    let mut rng = SplitMix64::new(spec.seed);
    let total = (1usize << (spec.height + 1)) - 1;
    let first_leaf = 1usize << spec.height;

    let mut exogenous = Vec::new();
    let mut endogenous: Vec<(VariableId, BoolExpr)> = Vec::new();
    for i in 1..=total {
        let id = VariableId::new(format!("n{i}")).expect("generated identifier");
        let eq = if i >= first_leaf {
            let exo = VariableId::new(format!("u{i}")).expect("generated identifier");
            exogenous.push(exo.clone());
            BoolExpr::var(&exo)
        } else {
            node_equation(i, spec.connective, &mut rng)
        };
        endogenous.push((id, eq));
    }

    // Extra variables reference earlier non-root variables only, which
    // keeps the graph acyclic once the root picks them up.
    let mut pool: Vec<VariableId> = (2..=total)
        .map(|i| VariableId::new(format!("n{i}")).expect("id"))
        .collect();
    let mut extras = Vec::new();
    for j in 1..=spec.extra_vars {
        let id = VariableId::new(format!("e{j}")).expect("generated identifier");
        let width = 2 + rng.next_below(2) as usize;
        let picks = rng.sample_indices(pool.len(), width.min(pool.len()));
        let literals: Vec<BoolExpr> = picks
            .into_iter()
            .map(|p| BoolExpr::literal(&pool[p], !rng.next_bool()))
            .collect();
        endogenous.push((id.clone(), BoolExpr::or(literals)));
        extras.push(id.clone());
        pool.push(id);
    }

    // Rewire the root: original equation or any extra variable.
    let mut root_parts = vec![endogenous[0].1.clone()];
    root_parts.extend(extras.iter().map(BoolExpr::var));
    endogenous[0].1 = BoolExpr::or(root_parts);

    let name = format!(
        "abt-h{}-x{}-{}-s{}",
        spec.height,
        spec.extra_vars,
        spec.connective.label(),
        spec.seed
    );
    CausalModel::new(name, exogenous, endogenous).expect("generated model is valid")
}

/// One sampled benchmark query: a context, the effect pinning the first
/// declared endogenous variable to its value under that context, and a
/// candidate cause drawn from the remaining variables at their actual
/// values (so AC1 holds by construction).
#[derive(Debug, Clone)]
pub struct SampledQuery {
    pub context: Context,
    pub effect: BoolExpr,
    pub cause: CandidateCause,
    pub cause_size: usize,
}

pub fn sample_queries(
    model: &CausalModel,
    cause_sizes: &[usize],
    count: usize,
    seed: u64,
) -> Result<Vec<SampledQuery>> {
    sample_queries_with_effect(model, cause_sizes, count, seed, None)
}

/// Like [`sample_queries`] but optionally pinning the effect variable to a
/// required value; contexts are re-sampled a bounded number of times until
/// the effect holds.
pub fn sample_queries_with_effect(
    model: &CausalModel,
    cause_sizes: &[usize],
    count: usize,
    seed: u64,
    effect_value: Option<bool>,
) -> Result<Vec<SampledQuery>> {
    const MAX_RETRIES: usize = 64;
    let effect_var = model
        .endogenous()
        .first()
        .map(|(v, _)| v.clone())
        .ok_or_else(|| Error::Syntax("model has no endogenous variables".into()))?;
    let candidates: Vec<VariableId> = model
        .endogenous()
        .iter()
        .skip(1)
        .map(|(v, _)| v.clone())
        .collect();
    for &size in cause_sizes {
        if size == 0 || size > candidates.len() {
            return Err(Error::Syntax(format!(
                "cause size {size} out of range (1..={})",
                candidates.len()
            )));
        }
    }

    let mut rng = SplitMix64::new(seed);
    let mut queries = Vec::new();
    for &size in cause_sizes {
        for _ in 0..count {
            let mut chosen = None;
            for _ in 0..MAX_RETRIES {
                let pairs: std::collections::BTreeMap<VariableId, bool> = model
                    .exogenous()
                    .iter()
                    .map(|v| (v.clone(), rng.next_bool()))
                    .collect();
                let context = Context::new(model, pairs).expect("total by construction");
                let actual = model.evaluate(&context);
                let value = actual.get(&effect_var).expect("total");
                if effect_value.is_none_or(|want| want == value) {
                    chosen = Some((context, actual, value));
                    break;
                }
            }
            let (context, actual, value) =
                chosen.ok_or(Error::EffectNeverHolds(MAX_RETRIES))?;
            let effect = BoolExpr::literal(&effect_var, value);
            let picks = rng.sample_indices(candidates.len(), size);
            let assignments: Vec<(VariableId, bool)> = picks
                .into_iter()
                .map(|i| {
                    let v = candidates[i].clone();
                    let value = actual.get(&v).expect("total");
                    (v, value)
                })
                .collect();
            queries.push(SampledQuery {
                context,
                effect,
                cause: CandidateCause::new(assignments)?,
                cause_size: size,
            });
        }
    }
    Ok(queries)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub strategies: Vec<Strategy>,
    pub reps: usize,
    pub warmups: usize,
    pub timeout: Duration,
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            strategies: vec![Strategy::Ilp, Strategy::MaxSat],
            reps: 3,
            warmups: 1,
            timeout: Duration::from_secs(120),
            parallel: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub model: String,
    pub strategy: &'static str,
    pub cause_size: usize,
    /// Median wall time over the measurement runs.
    pub wall_time_micros: u128,
    /// Clause or constraint count of the solved problem.
    pub problem_size: usize,
    pub status: &'static str,
    pub ac1: Option<bool>,
    pub ac2: Option<bool>,
    pub ac3: Option<bool>,
    pub distance: Option<u64>,
    /// False when repetitions disagreed on any verdict.
    pub consistent: bool,
}

fn run_once(
    model: &CausalModel,
    query: &SampledQuery,
    strategy: Strategy,
    timeout: Duration,
) -> (Result<CausalAnswer>, u128) {
    let options = Options {
        deadline: Some(Instant::now() + timeout),
        ..Options::default()
    };
    let causal_query = CausalQuery {
        model,
        context: query.context.clone(),
        effect: query.effect.clone(),
        cause: Some(query.cause.clone()),
        strategy,
    };
    let start = Instant::now();
    let answer = answer_query(&causal_query, &options);
    (answer, start.elapsed().as_micros())
}

fn bench_one(
    model: &CausalModel,
    query: &SampledQuery,
    strategy: Strategy,
    cfg: &BenchConfig,
) -> BenchRecord {
    for _ in 0..cfg.warmups {
        let _ = run_once(model, query, strategy, cfg.timeout);
    }
    let mut times = Vec::with_capacity(cfg.reps);
    let mut verdicts: Vec<(bool, bool, bool, Option<u64>)> = Vec::new();
    let mut first: Option<CausalAnswer> = None;
    let mut timed_out = false;
    for _ in 0..cfg.reps.max(1) {
        let (outcome, micros) = run_once(model, query, strategy, cfg.timeout);
        times.push(micros);
        match outcome {
            Ok(answer) => {
                verdicts.push((answer.ac1, answer.ac2, answer.ac3, answer.distance));
                if first.is_none() {
                    first = Some(answer);
                }
            }
            Err(Error::Timeout) => {
                timed_out = true;
                break;
            }
            Err(_) => {
                timed_out = true;
                break;
            }
        }
    }
    times.sort_unstable();
    let median = times.get(times.len() / 2).copied().unwrap_or(0);
    let consistent = verdicts.windows(2).all(|pair| pair[0] == pair[1]);
    match (timed_out, first) {
        (false, Some(answer)) => BenchRecord {
            model: model.name().to_string(),
            strategy: strategy.name(),
            cause_size: query.cause_size,
            wall_time_micros: median,
            problem_size: answer.stats.problem_size.unwrap_or(0),
            status: "ok",
            ac1: Some(answer.ac1),
            ac2: Some(answer.ac2),
            ac3: Some(answer.ac3),
            distance: answer.distance,
            consistent,
        },
        _ => BenchRecord {
            model: model.name().to_string(),
            strategy: strategy.name(),
            cause_size: query.cause_size,
            wall_time_micros: median,
            problem_size: 0,
            status: "timeout",
            ac1: None,
            ac2: None,
            ac3: None,
            distance: None,
            consistent,
        },
    }
}

/// Runs every (query, strategy) pair: warmups discarded, median of the
/// measurement runs recorded, verdict disagreements across repetitions
/// flagged in the `consistent` column.
pub fn run_bench(
    model: &CausalModel,
    queries: &[SampledQuery],
    cfg: &BenchConfig,
) -> Vec<BenchRecord> {
    if cfg.parallel {
        return run_bench_parallel(model, queries, cfg);
    }
    let mut records = Vec::new();
    for query in queries {
        for &strategy in &cfg.strategies {
            records.push(bench_one(model, query, strategy, cfg));
        }
    }
    records
}

fn run_bench_parallel(
    model: &CausalModel,
    queries: &[SampledQuery],
    cfg: &BenchConfig,
) -> Vec<BenchRecord> {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(2)
        .min(queries.len().max(1));
    let mut slots: Vec<Option<Vec<BenchRecord>>> = vec![None; queries.len()];
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (chunk_idx, chunk) in queries.chunks(queries.len().div_ceil(threads)).enumerate() {
            let cfg = cfg.clone();
            handles.push((
                chunk_idx,
                chunk.len(),
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for query in chunk {
                        for &strategy in &cfg.strategies {
                            out.push(bench_one(model, query, strategy, &cfg));
                        }
                    }
                    out
                }),
            ));
        }
        let chunk_size = queries.len().div_ceil(threads);
        for (chunk_idx, len, handle) in handles {
            let records = handle.join().expect("bench worker");
            let per_query = cfg.strategies.len();
            for i in 0..len {
                let query_idx = chunk_idx * chunk_size + i;
                slots[query_idx] =
                    Some(records[i * per_query..(i + 1) * per_query].to_vec());
            }
        }
    });
    slots.into_iter().flatten().flatten().collect()
}

pub const CSV_HEADER: &str =
    "model,strategy,cause_size,wall_time_micros,problem_size,ac1,ac2,ac3,distance,status,consistent";

pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let opt_bool = |b: Option<bool>| b.map(|x| (x as u8).to_string()).unwrap_or_default();
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.model,
            r.strategy,
            r.cause_size,
            r.wall_time_micros,
            r.problem_size,
            opt_bool(r.ac1),
            opt_bool(r.ac2),
            opt_bool(r.ac3),
            r.distance.map(|d| d.to_string()).unwrap_or_default(),
            r.status,
            r.consistent as u8,
        ));
    }
    out
}
