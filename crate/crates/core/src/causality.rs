//! Query orchestration: the AC1 check, counterfactual dependence via
//! formula `F`, minimality via projected enumeration of `G` or via `G'`,
//! combined checking/semi-inference through the optimizing encodings
//! (interpreting the solution back into a minimal cause and contingency
//! set), candidate-free inference, responsibility, and witness validation.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::Serialize;

use crate::cnf::{project_assignment, tseitin, Clause, CnfFormula, Literal};
use crate::encoder::{
    build_f, build_g, build_g_max, build_g_prime, CandidateCause, IndicatorTriple,
};
use crate::error::{Error, Result};
use crate::ilp::{
    build_check_program, build_why_program, solve_ilp_stats, Cmp, IlpStatus, LinearConstraint,
};
use crate::maxsat::{solve_max_sat_with_deadline, MaxSatStatus, WeightedCnf};
use crate::model::{eval_expr, BoolExpr, CausalModel, Context, Intervention, Valuation, VariableId};
use crate::oracle;
use crate::sat::{enumerate_models_with_deadline, solve_with_deadline, SatStats, SatStatus};

/// How a checking query is answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// AC2 via `F`, AC3 via projected ALL-SAT over `G`.
    SatLegacy,
    /// AC2 via `F`, AC3 via unsatisfiability of `G'`.
    SatOptimized,
    /// One 0-1 program over `G` minimizing the flip distance.
    Ilp,
    /// Hard/soft split over `G` minimizing the falsified soft weight.
    MaxSat,
    /// Candidate-free inference over `G*` with hierarchical objectives.
    WhyIlp,
    /// Exponential reference path.
    BruteForce,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::SatLegacy => "sat",
            Strategy::SatOptimized => "satopt",
            Strategy::Ilp => "ilp",
            Strategy::MaxSat => "maxsat",
            Strategy::WhyIlp => "why",
            Strategy::BruteForce => "brute",
        }
    }

    pub fn parse(text: &str) -> Result<Strategy> {
        match text {
            "sat" => Ok(Strategy::SatLegacy),
            "satopt" => Ok(Strategy::SatOptimized),
            "ilp" => Ok(Strategy::Ilp),
            "maxsat" => Ok(Strategy::MaxSat),
            "why" => Ok(Strategy::WhyIlp),
            "brute" => Ok(Strategy::BruteForce),
            other => Err(Error::Syntax(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CausalQuery<'a> {
    pub model: &'a CausalModel,
    pub context: Context,
    pub effect: BoolExpr,
    /// Present for checking strategies, absent for inference.
    pub cause: Option<CandidateCause>,
    pub strategy: Strategy,
}

/// AC2 witness: the counterfactual setting of the cause variables plus
/// the contingency set frozen at actual values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub x_prime: BTreeMap<VariableId, bool>,
    pub w: Vec<(VariableId, bool)>,
}

/// Exact degree of responsibility `num/den`, kept as an integer pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Responsibility {
    pub num: u64,
    pub den: u64,
}

impl Responsibility {
    pub fn new(num: u64, den: u64) -> Responsibility {
        debug_assert!(den > 0);
        let g = gcd(num.max(1), den);
        Responsibility {
            num: num / g,
            den: den / g,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageStats {
    pub stage: &'static str,
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub micros: Option<u128>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AnswerStats {
    pub stages: Vec<StageStats>,
    /// Clause count (SAT/MaxSAT) or constraint count (ILP) of the solved
    /// problem.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem_size: Option<usize>,
    /// Lexicographic objective values of the inference program.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objectives: Option<Vec<i64>>,
    /// Whether the inferred cause was confirmed minimal against the
    /// reference enumeration (absent when the model exceeds the guard).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimality_verified: Option<bool>,
    /// All minimum-distance causes when enumeration was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all_optima: Option<Vec<Vec<Assignment>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub var: String,
    pub val: bool,
}

/// The three condition verdicts plus everything the strategy could
/// extract. `x_min` and `w` are present only when the strategy produces
/// them and the underlying problem was feasible.
#[derive(Debug, Clone)]
pub struct CausalAnswer {
    pub ac1: bool,
    pub ac2: bool,
    pub ac3: bool,
    pub x_min: Option<Vec<(VariableId, bool)>>,
    pub w: Option<Vec<(VariableId, bool)>>,
    pub distance: Option<u64>,
    pub responsibility: Option<Responsibility>,
    pub strategy: Strategy,
    pub stats: AnswerStats,
}

impl CausalAnswer {
    pub fn is_cause(&self) -> bool {
        self.ac1 && self.ac2 && self.ac3
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Cap on projected ALL-SAT enumeration.
    pub enumeration_cap: usize,
    /// Endogenous-variable bound for oracle-backed verification steps.
    pub oracle_guard: usize,
    /// Collect every minimum-distance cause, not only the first.
    pub all_optima: bool,
    /// Include wall-clock timings in stats (off keeps output byte-stable).
    pub timings: bool,
    pub deadline: Option<Instant>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            enumeration_cap: 100_000,
            oracle_guard: oracle::DEFAULT_CAP,
            all_optima: false,
            timings: false,
            deadline: None,
        }
    }
}

/// Validates the parts every strategy shares.
fn validate_query(model: &CausalModel, effect: &BoolExpr) -> Result<()> {
    for v in effect.vars() {
        if !model.is_endogenous(&v) {
            return Err(Error::EffectNotEndogenous(v.to_string()));
        }
    }
    Ok(())
}

/// AC1: the cause assignments and the effect all hold in the actual
/// evaluation.
pub fn check_ac1(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
) -> Result<bool> {
    validate_query(model, effect)?;
    let actual = model.evaluate(context);
    let cause_ok = cause
        .assignments()
        .iter()
        .all(|(v, value)| actual.get(v) == Some(*value));
    Ok(cause_ok && eval_expr(effect, &actual)?)
}

/// AC2 via formula `F`: when satisfiable, the projected model yields the
/// witness (contingency set = every non-cause endogenous variable that
/// kept its actual value).
pub fn check_ac2(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
) -> Result<Option<Witness>> {
    Ok(ac2_with_stats(model, context, effect, cause, None)?.0)
}

fn ac2_with_stats(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    deadline: Option<Instant>,
) -> Result<(Option<Witness>, SatStats, usize)> {
    let formula = build_f(model, context, effect, cause)?;
    let cnf = tseitin(&formula);
    let size = cnf.clauses.len();
    let result = solve_with_deadline(&cnf, deadline)?;
    let stats = result.stats;
    let witness = match result.model {
        None => None,
        Some(raw) => {
            let projected = project_assignment(&cnf, &raw)?;
            let actual = model.evaluate(context);
            let x_prime: BTreeMap<VariableId, bool> = cause
                .assignments()
                .iter()
                .map(|(v, value)| (v.clone(), !*value))
                .collect();
            let w: Vec<(VariableId, bool)> = model
                .endogenous()
                .iter()
                .map(|(v, _)| v)
                .filter(|v| !cause.contains(v))
                .filter(|v| projected.get(v) == actual.get(v))
                .map(|v| (v.clone(), actual.get(v).expect("total")))
                .collect();
            let witness = Witness { x_prime, w };
            debug_assert!(validate_witness(model, context, effect, cause, &witness));
            Some(witness)
        }
    };
    Ok((witness, stats, size))
}

/// AC3 by enumerating every model of `G` projected onto the model
/// variables: minimality fails when some model keeps one cause variable
/// at its original-or-equation value while another one is flipped.
/// Singleton causes are minimal without enumeration.
pub fn check_ac3_all_sat(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    options: &Options,
) -> Result<bool> {
    if cause.len() == 1 {
        // Still validate the inputs the way the other strategies do.
        build_g(model, context, effect, cause)?;
        return Ok(true);
    }
    let formula = build_g(model, context, effect, cause)?;
    let cnf = tseitin(&formula);
    let projection: BTreeSet<u32> = cnf.registry.iter().map(|(_, idx)| idx).collect();
    let models = enumerate_models_with_deadline(
        &cnf,
        &projection,
        Some(options.enumeration_cap + 1),
        options.deadline,
    )?;
    if models.len() > options.enumeration_cap {
        return Err(Error::EnumerationLimitExceeded(options.enumeration_cap));
    }
    for projected in &models {
        let mut values = BTreeMap::new();
        for (v, idx) in cnf.registry.iter() {
            values.insert(v.clone(), projected[&idx]);
        }
        let world = Valuation::from_map(values);
        let mut keeper = false;
        let mut flipped = false;
        for (v, value) in cause.assignments() {
            let solved = world.get(v).expect("projection covers model variables");
            let equation_value =
                eval_expr(model.equation(v).expect("endogenous"), &world)?;
            if solved == *value || solved == equation_value {
                keeper = true;
            }
            if solved != *value {
                flipped = true;
            }
        }
        if keeper && flipped {
            return Ok(false);
        }
    }
    Ok(true)
}

/// AC3 via `G'`: unsatisfiability certifies minimality.
pub fn check_ac3_optimized(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
) -> Result<bool> {
    check_ac3_optimized_with_deadline(model, context, effect, cause, None).map(|(ok, _, _)| ok)
}

fn check_ac3_optimized_with_deadline(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    deadline: Option<Instant>,
) -> Result<(bool, SatStats, usize)> {
    let formula = build_g_prime(model, context, effect, cause)?;
    let cnf = tseitin(&formula);
    let size = cnf.clauses.len();
    let result = solve_with_deadline(&cnf, deadline)?;
    Ok((result.status == SatStatus::Unsat, result.stats, size))
}

/// True iff freezing `w` (at actual values) and forcing the counterfactual
/// setting makes the effect false.
pub fn validate_witness(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    witness: &Witness,
) -> bool {
    let actual = model.evaluate(context);
    // x_prime must cover exactly the cause variables.
    if witness.x_prime.len() != cause.len() {
        return false;
    }
    if !cause
        .assignments()
        .iter()
        .all(|(v, _)| witness.x_prime.contains_key(v))
    {
        return false;
    }
    let mut overrides: BTreeMap<VariableId, bool> = witness.x_prime.clone();
    for (v, value) in &witness.w {
        if actual.get(v) != Some(*value) {
            return false; // contingency values must be the actual ones
        }
        if overrides.insert(v.clone(), *value).is_some() {
            return false; // overlap with the cause set
        }
    }
    let iv = match Intervention::new(model, overrides) {
        Ok(iv) => iv,
        Err(_) => return false,
    };
    let world = model.evaluate_with_intervention(context, &iv);
    matches!(eval_expr(effect, &world), Ok(false))
}

fn timed<T>(
    enabled: bool,
    f: impl FnOnce() -> T,
) -> (T, Option<u128>) {
    let start = Instant::now();
    let out = f();
    let micros = enabled.then(|| start.elapsed().as_micros());
    (out, micros)
}

fn stage(name: &'static str, sat: SatStats, micros: Option<u128>) -> StageStats {
    StageStats {
        stage: name,
        decisions: sat.decisions,
        propagations: sat.propagations,
        conflicts: sat.conflicts,
        micros,
    }
}

/// Answers a query with the strategy it carries.
pub fn answer_query(query: &CausalQuery, options: &Options) -> Result<CausalAnswer> {
    match query.strategy {
        Strategy::WhyIlp => infer_why(query.model, &query.context, &query.effect, options),
        _ => check_cause(query, options),
    }
}

/// Checking and semi-inference. The optimizing strategies solve one
/// problem and read AC2, AC3, the minimal cause, the contingency set and
/// the distance off the optimum; the SAT strategies decide the two
/// conditions separately.
pub fn check_cause(query: &CausalQuery, options: &Options) -> Result<CausalAnswer> {
    let cause = query
        .cause
        .as_ref()
        .expect("checking strategies carry a candidate cause");
    let model = query.model;
    let context = &query.context;
    let effect = &query.effect;
    validate_query(model, effect)?;

    let ac1 = check_ac1(model, context, effect, cause)?;
    let mut stats = AnswerStats::default();

    match query.strategy {
        Strategy::SatLegacy | Strategy::SatOptimized => {
            let ((witness, sat_stats, size), micros) = {
                let (out, micros) = timed(options.timings, || {
                    ac2_with_stats(model, context, effect, cause, options.deadline)
                });
                (out?, micros)
            };
            stats.stages.push(stage("ac2", sat_stats, micros));
            stats.problem_size = Some(size);
            let (ac3, micros) = if query.strategy == Strategy::SatOptimized {
                let (out, micros) = timed(options.timings, || {
                    check_ac3_optimized_with_deadline(
                        model,
                        context,
                        effect,
                        cause,
                        options.deadline,
                    )
                });
                let (ok, sat_stats, _) = out?;
                stats.stages.push(stage("ac3", sat_stats, micros));
                (ok, micros)
            } else {
                let (out, micros) = timed(options.timings, || {
                    check_ac3_all_sat(model, context, effect, cause, options)
                });
                let ok = out?;
                stats.stages.push(stage("ac3", SatStats::default(), micros));
                (ok, micros)
            };
            let _ = micros;
            Ok(CausalAnswer {
                ac1,
                ac2: witness.is_some(),
                ac3,
                x_min: None,
                w: witness.map(|wit| wit.w),
                distance: None,
                responsibility: None,
                strategy: query.strategy,
                stats,
            })
        }
        Strategy::Ilp => {
            let check = build_check_program(model, context, effect, cause)?;
            stats.problem_size = Some(check.program.constraints.len());
            let ((result, ilp_stats), micros) = {
                let (out, micros) = timed(options.timings, || {
                    solve_ilp_stats(&check.program, options.deadline)
                });
                (out?, micros)
            };
            let mut sat = ilp_stats.sat;
            sat.decisions += ilp_stats.nodes;
            stats.stages.push(stage("optimize", sat, micros));
            match result.status {
                IlpStatus::Infeasible => Ok(infeasible_answer(ac1, query.strategy, stats)),
                IlpStatus::Opt => {
                    let solved = solved_model_values(&check.cnf, |idx| {
                        result.assignment[idx as usize - 1] != 0
                    });
                    let distance = result.objective_values[0] as u64;
                    if options.all_optima {
                        stats.all_optima = Some(enumerate_check_optima_ilp(
                            &check, cause, distance, options,
                        )?);
                    }
                    Ok(interpret_check_solution(
                        model,
                        context,
                        effect,
                        cause,
                        ac1,
                        &solved,
                        distance,
                        query.strategy,
                        stats,
                    ))
                }
            }
        }
        Strategy::MaxSat => {
            let (hard_formula, soft_units) = build_g_max(model, context, effect, cause)?;
            let hard = tseitin(&hard_formula);
            let soft: Vec<(Clause, u64)> = soft_units
                .iter()
                .map(|u| {
                    (
                        Clause::new(vec![Literal::with_value(u.var, u.polarity)])
                            .expect("unit soft clause"),
                        u.weight,
                    )
                })
                .collect();
            stats.problem_size = Some(hard.clauses.len() + soft.len());
            let weighted = WeightedCnf::new(hard.clone(), soft)?;
            let (out, micros) = timed(options.timings, || {
                solve_max_sat_with_deadline(&weighted, options.deadline)
            });
            let result = out?;
            stats.stages.push(stage("optimize", result.stats, micros));
            match result.status {
                MaxSatStatus::UnsatHard => Ok(infeasible_answer(ac1, query.strategy, stats)),
                MaxSatStatus::Opt => {
                    let raw = result.model.expect("optimum carries a model");
                    let solved = solved_model_values(&hard, |idx| raw[idx as usize]);
                    let distance = result.cost.expect("optimum carries a cost");
                    if options.all_optima {
                        stats.all_optima = Some(enumerate_check_optima_maxsat(
                            &weighted, cause, distance, options,
                        )?);
                    }
                    Ok(interpret_check_solution(
                        model,
                        context,
                        effect,
                        cause,
                        ac1,
                        &solved,
                        distance,
                        query.strategy,
                        stats,
                    ))
                }
            }
        }
        Strategy::BruteForce => {
            let cap = options.oracle_guard;
            let witness = oracle::oracle_ac2(model, context, effect, cause, cap)?;
            let ac3 = oracle::oracle_ac3(model, context, effect, cause, cap)?;
            let min_subset = oracle::oracle_min_cause_subset(model, context, effect, cause, cap)?;
            let (x_min, distance) = match &min_subset {
                Some((subset, size)) => (Some(subset.clone()), Some(*size as u64)),
                None => (None, None),
            };
            Ok(CausalAnswer {
                ac1,
                ac2: witness.is_some(),
                ac3,
                x_min,
                w: witness.map(|wit| wit.w),
                distance,
                responsibility: None,
                strategy: query.strategy,
                stats,
            })
        }
        Strategy::WhyIlp => unreachable!("routed to infer_why"),
    }
}

fn infeasible_answer(ac1: bool, strategy: Strategy, stats: AnswerStats) -> CausalAnswer {
    CausalAnswer {
        ac1,
        ac2: false,
        ac3: false,
        x_min: None,
        w: None,
        distance: None,
        responsibility: None,
        strategy,
        stats,
    }
}

/// Reads the solved values of all model variables out of a solver
/// assignment.
fn solved_model_values(
    cnf: &CnfFormula,
    value_of: impl Fn(u32) -> bool,
) -> BTreeMap<VariableId, bool> {
    cnf.registry
        .iter()
        .map(|(v, idx)| (v.clone(), value_of(idx)))
        .collect()
}

/// The optimum interpretation shared by the ILP and MaxSAT strategies:
/// the minimal cause is every candidate variable whose solved value
/// differs from the actual one; the contingency set is every endogenous
/// variable that kept its value (cause members included), minus the
/// extracted cause.
#[allow(clippy::too_many_arguments)]
fn interpret_check_solution(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    ac1: bool,
    solved: &BTreeMap<VariableId, bool>,
    distance: u64,
    strategy: Strategy,
    stats: AnswerStats,
) -> CausalAnswer {
    let actual = model.evaluate(context);
    let x_min: Vec<(VariableId, bool)> = cause
        .assignments()
        .iter()
        .filter(|(v, _)| solved[v] != actual.get(v).expect("total"))
        .cloned()
        .collect();
    let w: Vec<(VariableId, bool)> = model
        .endogenous()
        .iter()
        .map(|(v, _)| v)
        .filter(|v| solved[*v] == actual.get(v).expect("total"))
        .map(|v| (v.clone(), actual.get(v).expect("total")))
        .collect();
    assert_eq!(
        x_min.len() as u64,
        distance,
        "distance equals the number of flipped cause variables"
    );
    let witness = Witness {
        x_prime: x_min.iter().map(|(v, value)| (v.clone(), !*value)).collect(),
        w: w.clone(),
    };
    let x_min_cause = CandidateCause::new(x_min.clone()).expect("distance >= 1");
    assert!(
        validate_witness(model, context, effect, &x_min_cause, &witness),
        "extracted cause and contingency set must re-validate"
    );
    CausalAnswer {
        ac1,
        ac2: true,
        ac3: distance == cause.len() as u64,
        x_min: Some(x_min),
        w: Some(w),
        distance: Some(distance),
        responsibility: None,
        strategy,
        stats,
    }
}

/// Collects every minimum-distance cause by blocking solved cause
/// patterns in the pinned ILP program.
fn enumerate_check_optima_ilp(
    check: &crate::ilp::CheckProgram,
    cause: &CandidateCause,
    distance: u64,
    options: &Options,
) -> Result<Vec<Vec<Assignment>>> {
    let mut program = check.program.clone();
    // Pin the optimum.
    program.constraints.push(LinearConstraint {
        terms: vec![(1, check.distance_var)],
        cmp: Cmp::Eq,
        rhs: distance as i64,
    });
    let cause_indices: Vec<(VariableId, usize, bool)> = cause
        .assignments()
        .iter()
        .map(|(v, value)| {
            let idx = check.cnf.registry.index_of(v).expect("registered") as usize - 1;
            (v.clone(), idx, *value)
        })
        .collect();
    let mut optima = Vec::new();
    loop {
        let (result, _) = solve_ilp_stats(&program, options.deadline)?;
        if result.status == IlpStatus::Infeasible {
            return Ok(optima);
        }
        let x_min: Vec<Assignment> = cause_indices
            .iter()
            .filter(|(_, idx, value)| result.assignment[*idx] != *value as i64)
            .map(|(v, _, value)| Assignment {
                var: v.to_string(),
                val: *value,
            })
            .collect();
        // Block this cause-variable pattern.
        let mut terms = Vec::new();
        let mut rhs = 1i64;
        for (_, idx, _) in &cause_indices {
            if result.assignment[*idx] != 0 {
                terms.push((-1i64, *idx));
                rhs -= 1;
            } else {
                terms.push((1i64, *idx));
            }
        }
        program.constraints.push(LinearConstraint {
            terms,
            cmp: Cmp::Ge,
            rhs,
        });
        optima.push(x_min);
    }
}

/// Same enumeration on the MaxSAT side: hard clauses plus a cardinality
/// cap at the optimal cost, blocking solved cause patterns.
fn enumerate_check_optima_maxsat(
    weighted: &WeightedCnf,
    cause: &CandidateCause,
    distance: u64,
    options: &Options,
) -> Result<Vec<Vec<Assignment>>> {
    let mut working = weighted.hard.clone();
    let soft_lits: Vec<Literal> = weighted
        .soft
        .iter()
        .map(|(clause, _)| clause.literals()[0])
        .collect();
    // Exactly the optimal number of softs falsified.
    let negated: Vec<Literal> = soft_lits.iter().map(|l| l.negate()).collect();
    crate::card::add_exactly_k(&mut working, &negated, distance as usize);

    let cause_indices: Vec<(VariableId, u32, bool)> = cause
        .assignments()
        .iter()
        .map(|(v, value)| {
            let idx = weighted.hard.registry.index_of(v).expect("registered");
            (v.clone(), idx, *value)
        })
        .collect();
    let mut optima = Vec::new();
    loop {
        let result = solve_with_deadline(&working, options.deadline)?;
        let model = match result.model {
            Some(m) => m,
            None => return Ok(optima),
        };
        let x_min: Vec<Assignment> = cause_indices
            .iter()
            .filter(|(_, idx, value)| model[*idx as usize] != *value)
            .map(|(v, _, value)| Assignment {
                var: v.to_string(),
                val: *value,
            })
            .collect();
        let blocking: Vec<Literal> = cause_indices
            .iter()
            .map(|(_, idx, _)| Literal {
                var: *idx,
                negated: model[*idx as usize],
            })
            .collect();
        working.push(blocking);
        optima.push(x_min);
    }
}

/// Candidate-free inference: solves the hierarchical program over `G*`,
/// reads the cause (`c1 = c2 = 0`) and contingency set (`c1 = 0, c2 = 1`)
/// off the indicators, and reports the responsibility `1/(|X|+|W|)`.
pub fn infer_why(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    options: &Options,
) -> Result<CausalAnswer> {
    validate_query(model, effect)?;
    let actual = model.evaluate(context);
    if !eval_expr(effect, &actual)? {
        return Err(Error::EffectNotActual);
    }

    let why = build_why_program(model, context, effect)?;
    let mut stats = AnswerStats {
        problem_size: Some(why.program.constraints.len()),
        ..AnswerStats::default()
    };
    let ((result, ilp_stats), micros) = {
        let (out, micros) = timed(options.timings, || {
            solve_ilp_stats(&why.program, options.deadline)
        });
        (out?, micros)
    };
    let mut sat = ilp_stats.sat;
    sat.decisions += ilp_stats.nodes;
    stats.stages.push(stage("optimize", sat, micros));

    if result.status == IlpStatus::Infeasible {
        return Ok(CausalAnswer {
            ac1: true,
            ac2: false,
            ac3: false,
            x_min: None,
            w: None,
            distance: None,
            responsibility: None,
            strategy: Strategy::WhyIlp,
            stats,
        });
    }
    stats.objectives = Some(result.objective_values.clone());

    let mut x_min = Vec::new();
    let mut w = Vec::new();
    for (v, _) in model.endogenous() {
        let Some(IndicatorTriple { c1, c2, .. }) = why.indicators.get(v).copied() else {
            continue;
        };
        let c1_value = result.assignment[c1 as usize - 1] != 0;
        let c2_value = result.assignment[c2 as usize - 1] != 0;
        let actual_value = actual.get(v).expect("total");
        if !c1_value && !c2_value {
            x_min.push((v.clone(), actual_value));
        } else if !c1_value && c2_value {
            w.push((v.clone(), actual_value));
        }
    }
    assert_eq!(
        x_min.len() as i64,
        result.objective_values[1],
        "cause size equals the second objective"
    );

    let witness = Witness {
        x_prime: x_min.iter().map(|(v, value)| (v.clone(), !*value)).collect(),
        w: w.clone(),
    };
    let inferred = CandidateCause::new(x_min.clone()).expect("non-empty inferred cause");
    assert!(
        validate_witness(model, context, effect, &inferred, &witness),
        "inferred cause and contingency set must re-validate"
    );

    let minimality_verified = if model.endogenous().len() <= options.oracle_guard {
        Some(oracle::oracle_ac3(
            model,
            context,
            effect,
            &inferred,
            options.oracle_guard,
        )?)
    } else {
        None
    };
    stats.minimality_verified = minimality_verified;

    let responsibility = Responsibility::new(1, (x_min.len() + w.len()) as u64);
    Ok(CausalAnswer {
        ac1: true,
        ac2: true,
        ac3: minimality_verified.unwrap_or(true),
        x_min: Some(x_min),
        w: Some(w),
        distance: None,
        responsibility: Some(responsibility),
        strategy: Strategy::WhyIlp,
        stats,
    })
}

/// Degree of responsibility of a verified actual cause:
/// `1 / (cause size + |W_min|)` with the smallest contingency set found
/// by exhaustive search.
pub fn compute_responsibility(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    options: &Options,
) -> Result<Responsibility> {
    validate_query(model, effect)?;
    let m = model.endogenous().len();
    if m > options.oracle_guard {
        return Err(Error::ModelTooLargeForExactDr(m, options.oracle_guard));
    }
    let query = CausalQuery {
        model,
        context: context.clone(),
        effect: effect.clone(),
        cause: Some(cause.clone()),
        strategy: Strategy::Ilp,
    };
    let answer = check_cause(&query, options)?;
    if !answer.is_cause() {
        return Err(Error::NotACause);
    }

    let actual = model.evaluate(context);
    let x_prime: BTreeMap<VariableId, bool> = cause
        .assignments()
        .iter()
        .map(|(v, value)| (v.clone(), !*value))
        .collect();
    let candidates: Vec<VariableId> = model
        .endogenous()
        .iter()
        .map(|(v, _)| v.clone())
        .filter(|v| !cause.contains(v))
        .collect();
    for size in 0..=candidates.len() {
        let found = oracle::for_each_combination(candidates.len(), size, |subset| {
            let mut overrides = x_prime.clone();
            for &i in subset {
                let v = candidates[i].clone();
                overrides.insert(v.clone(), actual.get(&v).expect("total"));
            }
            let iv = Intervention::new(model, overrides).expect("endogenous");
            let world = model.evaluate_with_intervention(context, &iv);
            if !eval_expr(effect, &world).expect("valid effect") {
                Some(())
            } else {
                None
            }
        });
        if found.is_some() {
            return Ok(Responsibility::new(1, (cause.len() + size) as u64));
        }
    }
    unreachable!("a verified actual cause admits some contingency set");
}

// ── Answer serialization ──────────────────────────────────────────────

#[derive(Serialize)]
struct AnswerJson<'a> {
    ac1: bool,
    ac2: bool,
    ac3: bool,
    cause: Option<Vec<Assignment>>,
    w: Option<Vec<Assignment>>,
    distance: Option<u64>,
    responsibility: Option<Responsibility>,
    strategy: &'a str,
    stats: &'a AnswerStats,
}

fn to_assignments(pairs: &[(VariableId, bool)]) -> Vec<Assignment> {
    pairs
        .iter()
        .map(|(v, value)| Assignment {
            var: v.to_string(),
            val: *value,
        })
        .collect()
}

/// Canonical JSON form of an answer.
pub fn answer_to_json(answer: &CausalAnswer) -> String {
    let json = AnswerJson {
        ac1: answer.ac1,
        ac2: answer.ac2,
        ac3: answer.ac3,
        cause: answer.x_min.as_deref().map(to_assignments),
        w: answer.w.as_deref().map(to_assignments),
        distance: answer.distance,
        responsibility: answer.responsibility,
        strategy: answer.strategy.name(),
        stats: &answer.stats,
    };
    serde_json::to_string_pretty(&json).expect("answer serializes")
}

/// Human-readable multi-line form.
pub fn answer_to_text(answer: &CausalAnswer) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "AC1: {}  AC2: {}  AC3: {}  => {}\n",
        answer.ac1,
        answer.ac2,
        answer.ac3,
        if answer.is_cause() { "actual cause" } else { "not an actual cause" }
    ));
    let fmt_pairs = |pairs: &[(VariableId, bool)]| {
        pairs
            .iter()
            .map(|(v, value)| format!("{v}={}", *value as u8))
            .collect::<Vec<_>>()
            .join(", ")
    };
    if let Some(x_min) = &answer.x_min {
        out.push_str(&format!("minimal cause: {{{}}}\n", fmt_pairs(x_min)));
    }
    if let Some(w) = &answer.w {
        out.push_str(&format!("contingency set: {{{}}}\n", fmt_pairs(w)));
    }
    if let Some(distance) = answer.distance {
        out.push_str(&format!("distance: {distance}\n"));
    }
    if let Some(r) = &answer.responsibility {
        out.push_str(&format!("responsibility: {}/{}\n", r.num, r.den));
    }
    if let Some(objectives) = &answer.stats.objectives {
        out.push_str(&format!("objectives: {objectives:?}\n"));
    }
    if let Some(flag) = answer.stats.minimality_verified {
        out.push_str(&format!("minimality verified: {flag}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{context_of, parse_expr, parse_model, rock_throwing};

    fn cause(pairs: &[(&str, bool)]) -> CandidateCause {
        CandidateCause::new(
            pairs
                .iter()
                .map(|(n, v)| (VariableId::new(*n).unwrap(), *v))
                .collect(),
        )
        .unwrap()
    }

    fn rt() -> (CausalModel, Context, BoolExpr) {
        let m = rock_throwing();
        let ctx = context_of(&m, &[("ST_exo", true), ("BT_exo", true)]).unwrap();
        (m, ctx, parse_expr("BS").unwrap())
    }

    fn query<'a>(
        model: &'a CausalModel,
        ctx: &Context,
        effect: &BoolExpr,
        c: CandidateCause,
        strategy: Strategy,
    ) -> CausalQuery<'a> {
        CausalQuery {
            model,
            context: ctx.clone(),
            effect: effect.clone(),
            cause: Some(c),
            strategy,
        }
    }

    #[test]
    fn ac1_examples() {
        let (m, ctx, effect) = rt();
        assert!(check_ac1(&m, &ctx, &effect, &cause(&[("ST", true)])).unwrap());
        assert!(!check_ac1(&m, &ctx, &effect, &cause(&[("ST", false)])).unwrap());
        let negated_effect = parse_expr("!BS").unwrap();
        assert!(!check_ac1(&m, &ctx, &negated_effect, &cause(&[("ST", true)])).unwrap());
    }

    #[test]
    fn ac2_witness_for_suzy() {
        let (m, ctx, effect) = rt();
        let witness = check_ac2(&m, &ctx, &effect, &cause(&[("ST", true)]))
            .unwrap()
            .unwrap();
        assert_eq!(witness.x_prime.len(), 1);
        let w_names: Vec<String> = witness.w.iter().map(|(v, _)| v.to_string()).collect();
        assert!(w_names.contains(&"BH".to_string()));
        assert!(w_names.contains(&"BT".to_string()));
        assert!(validate_witness(&m, &ctx, &effect, &cause(&[("ST", true)]), &witness));
    }

    #[test]
    fn ac2_none_for_non_ancestor() {
        let m = parse_model(
            r#"{"name":"pair","exogenous":["U"],"endogenous":[{"id":"A","eq":"U"},{"id":"B","eq":"U"}]}"#,
        )
        .unwrap();
        let ctx = context_of(&m, &[("U", true)]).unwrap();
        let effect = parse_expr("A").unwrap();
        assert!(check_ac2(&m, &ctx, &effect, &cause(&[("B", true)]))
            .unwrap()
            .is_none());
    }

    #[test]
    fn ac2_single_variable_model() {
        let m = parse_model(
            r#"{"name":"one","exogenous":["U"],"endogenous":[{"id":"A","eq":"U"},{"id":"B","eq":"A"}]}"#,
        )
        .unwrap();
        let ctx = context_of(&m, &[("U", true)]).unwrap();
        let effect = parse_expr("B").unwrap();
        let witness = check_ac2(&m, &ctx, &effect, &cause(&[("A", true)]))
            .unwrap()
            .unwrap();
        assert!(!witness.x_prime[&VariableId::new("A").unwrap()]);
        assert!(witness.w.is_empty());
    }

    #[test]
    fn ac3_strategies_agree_on_rock_throwing() {
        let (m, ctx, effect) = rt();
        let opts = Options::default();
        let joint = cause(&[("ST", true), ("BT", true)]);
        assert!(!check_ac3_all_sat(&m, &ctx, &effect, &joint, &opts).unwrap());
        assert!(!check_ac3_optimized(&m, &ctx, &effect, &joint).unwrap());
        let single = cause(&[("ST", true)]);
        assert!(check_ac3_all_sat(&m, &ctx, &effect, &single, &opts).unwrap());
        assert!(check_ac3_optimized(&m, &ctx, &effect, &single).unwrap());
    }

    #[test]
    fn check_cause_ilp_and_maxsat_on_the_joint_cause() {
        let (m, ctx, effect) = rt();
        let opts = Options::default();
        for strategy in [Strategy::Ilp, Strategy::MaxSat] {
            let q = query(&m, &ctx, &effect, cause(&[("ST", true), ("BT", true)]), strategy);
            let answer = check_cause(&q, &opts).unwrap();
            assert!(answer.ac1 && answer.ac2);
            assert!(!answer.ac3);
            assert_eq!(answer.distance, Some(1));
            let x_min = answer.x_min.unwrap();
            assert_eq!(x_min.len(), 1);
            assert_eq!(x_min[0].0.as_str(), "ST");
            assert!(x_min[0].1);
        }
    }

    #[test]
    fn check_cause_singleton_suzy_is_a_cause() {
        let (m, ctx, effect) = rt();
        let opts = Options::default();
        for strategy in [Strategy::Ilp, Strategy::MaxSat, Strategy::BruteForce] {
            let q = query(&m, &ctx, &effect, cause(&[("ST", true)]), strategy);
            let answer = check_cause(&q, &opts).unwrap();
            assert!(answer.is_cause(), "{strategy:?}");
            assert_eq!(answer.distance, Some(1), "{strategy:?}");
        }
    }

    #[test]
    fn check_cause_infeasible_reports_no_conditions() {
        let m = parse_model(
            r#"{"name":"pair","exogenous":["U"],"endogenous":[{"id":"A","eq":"U"},{"id":"B","eq":"U"}]}"#,
        )
        .unwrap();
        let ctx = context_of(&m, &[("U", true)]).unwrap();
        let effect = parse_expr("A").unwrap();
        let opts = Options::default();
        for strategy in [Strategy::Ilp, Strategy::MaxSat] {
            let q = query(&m, &ctx, &effect, cause(&[("B", true)]), strategy);
            let answer = check_cause(&q, &opts).unwrap();
            assert!(answer.ac1);
            assert!(!answer.ac2);
            assert!(!answer.ac3);
            assert!(answer.x_min.is_none());
        }
    }

    #[test]
    fn ac1_failure_does_not_short_circuit() {
        let (m, ctx, _) = rt();
        // Effect !SH is false in the actual world, so AC1 fails, but the
        // optimization still runs: flipping ST makes !SH true.
        let effect = parse_expr("!SH").unwrap();
        let q = query(&m, &ctx, &effect, cause(&[("ST", true)]), Strategy::Ilp);
        let answer = check_cause(&q, &Options::default()).unwrap();
        assert!(!answer.ac1);
        assert!(answer.ac2);
        assert!(!answer.is_cause());
    }

    #[test]
    fn infer_why_rock_throwing() {
        let (m, ctx, effect) = rt();
        let answer = infer_why(&m, &ctx, &effect, &Options::default()).unwrap();
        assert!(answer.ac1 && answer.ac2 && answer.ac3);
        let x_min = answer.x_min.unwrap();
        assert_eq!(x_min.len(), 1);
        assert_eq!(x_min[0].0.as_str(), "SH");
        assert!(x_min[0].1);
        let w = answer.w.unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].0.as_str(), "BH");
        assert!(!w[0].1);
        assert_eq!(answer.responsibility, Some(Responsibility::new(1, 2)));
        assert_eq!(answer.stats.objectives, Some(vec![2, 1]));
        assert_eq!(answer.stats.minimality_verified, Some(true));
    }

    #[test]
    fn infer_why_direct_dependence() {
        let m = parse_model(
            r#"{"name":"chain","exogenous":["U"],"endogenous":[{"id":"A","eq":"U"},{"id":"B","eq":"A"}]}"#,
        )
        .unwrap();
        let ctx = context_of(&m, &[("U", true)]).unwrap();
        let effect = parse_expr("B").unwrap();
        let answer = infer_why(&m, &ctx, &effect, &Options::default()).unwrap();
        let x_min = answer.x_min.unwrap();
        assert_eq!(x_min.len(), 1);
        assert_eq!(x_min[0].0.as_str(), "A");
        assert!(answer.w.unwrap().is_empty());
        assert_eq!(answer.responsibility, Some(Responsibility::new(1, 1)));
    }

    #[test]
    fn infer_why_requires_the_effect_to_hold() {
        let (m, _, effect) = rt();
        let ctx = context_of(&m, &[("ST_exo", false), ("BT_exo", false)]).unwrap();
        assert!(matches!(
            infer_why(&m, &ctx, &effect, &Options::default()),
            Err(Error::EffectNotActual)
        ));
    }

    #[test]
    fn responsibility_examples() {
        let (m, ctx, effect) = rt();
        let opts = Options::default();
        let r = compute_responsibility(&m, &ctx, &effect, &cause(&[("ST", true)]), &opts).unwrap();
        assert_eq!((r.num, r.den), (1, 2));

        let chain = parse_model(
            r#"{"name":"chain","exogenous":["U"],"endogenous":[{"id":"A","eq":"U"},{"id":"B","eq":"A"}]}"#,
        )
        .unwrap();
        let chain_ctx = context_of(&chain, &[("U", true)]).unwrap();
        let chain_effect = parse_expr("B").unwrap();
        let r = compute_responsibility(&chain, &chain_ctx, &chain_effect, &cause(&[("A", true)]), &opts)
            .unwrap();
        assert_eq!((r.num, r.den), (1, 1));

        let pair = parse_model(
            r#"{"name":"pair","exogenous":["U"],"endogenous":[{"id":"A","eq":"U"},{"id":"B","eq":"U"}]}"#,
        )
        .unwrap();
        let pair_ctx = context_of(&pair, &[("U", true)]).unwrap();
        let pair_effect = parse_expr("A").unwrap();
        assert!(matches!(
            compute_responsibility(&pair, &pair_ctx, &pair_effect, &cause(&[("B", true)]), &opts),
            Err(Error::NotACause)
        ));
    }

    #[test]
    fn witness_validation_examples() {
        let (m, ctx, effect) = rt();
        let st = VariableId::new("ST").unwrap();
        let bh = VariableId::new("BH").unwrap();
        let good = Witness {
            x_prime: [(st.clone(), false)].into_iter().collect(),
            w: vec![(bh.clone(), false)],
        };
        assert!(validate_witness(&m, &ctx, &effect, &cause(&[("ST", true)]), &good));

        let empty_w = Witness {
            x_prime: [(st.clone(), false)].into_iter().collect(),
            w: vec![],
        };
        assert!(!validate_witness(&m, &ctx, &effect, &cause(&[("ST", true)]), &empty_w));

        let wrong_value = Witness {
            x_prime: [(st, false)].into_iter().collect(),
            w: vec![(bh, true)], // actual BH is 0
        };
        assert!(!validate_witness(&m, &ctx, &effect, &cause(&[("ST", true)]), &wrong_value));
    }

    #[test]
    fn all_optima_enumeration_finds_symmetric_causes() {
        // A and B each suffice alone: two minimum-distance causes.
        let m = parse_model(
            r#"{"name":"sym","exogenous":["U"],"endogenous":[{"id":"A","eq":"U"},{"id":"B","eq":"U"},{"id":"E","eq":"A & B"}]}"#,
        )
        .unwrap();
        let ctx = context_of(&m, &[("U", true)]).unwrap();
        let effect = parse_expr("E").unwrap();
        let opts = Options {
            all_optima: true,
            ..Options::default()
        };
        for strategy in [Strategy::Ilp, Strategy::MaxSat] {
            let q = query(&m, &ctx, &effect, cause(&[("A", true), ("B", true)]), strategy);
            let answer = check_cause(&q, &opts).unwrap();
            assert_eq!(answer.distance, Some(1));
            let optima = answer.stats.all_optima.unwrap();
            assert_eq!(optima.len(), 2, "{strategy:?}");
            let mut names: Vec<String> =
                optima.iter().map(|o| o[0].var.clone()).collect();
            names.sort();
            assert_eq!(names, vec!["A", "B"]);
        }
    }

    #[test]
    fn json_shape_is_stable() {
        let (m, ctx, effect) = rt();
        let q = query(&m, &ctx, &effect, cause(&[("ST", true)]), Strategy::Ilp);
        let answer = check_cause(&q, &Options::default()).unwrap();
        let json = answer_to_json(&answer);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["ac1"], true);
        assert_eq!(value["cause"][0]["var"], "ST");
        assert_eq!(value["distance"], 1);
        assert!(value["responsibility"].is_null());
        assert_eq!(value["strategy"], "ilp");
        // No wall-clock fields by default.
        assert!(json.find("micros").is_none());
    }
}
