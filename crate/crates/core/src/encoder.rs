//! Propositional encodings of causal checks.
//!
//! All encodings share the same skeleton: the negated effect, one literal
//! per exogenous variable fixing the context, and per endogenous variable a
//! constraint tying it to its equation. The variants differ in how the
//! candidate cause variables are treated:
//!
//! * `F`  — cause variables are pinned to the negation of their actual
//!   values; satisfiable exactly when a contingency set exists.
//! * `G`  — cause variables are unconstrained (their equations are
//!   removed); the common base of the optimizing encodings.
//! * `G'` — `G` extended with a non-minimality disjunction `H` and a
//!   non-emptiness constraint `K`; satisfiable exactly when the candidate
//!   is not minimal.
//! * `G_max` — `G ∧ K` as hard clauses plus one unit-weight soft literal
//!   per cause variable at its actual value.
//! * `G*` — candidate-free form where every non-effect endogenous variable
//!   carries two indicator variables classifying it as normal, frozen or
//!   flipped.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{BoolExpr, CausalModel, Context, Valuation, VariableId};

/// Candidate cause: an ordered, duplicate-free list of endogenous
/// variables with the values they take in the actual evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateCause {
    assignments: Vec<(VariableId, bool)>,
}

impl CandidateCause {
    pub fn new(assignments: Vec<(VariableId, bool)>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::EmptyCause);
        }
        let mut seen = BTreeSet::new();
        for (v, _) in &assignments {
            if !seen.insert(v.clone()) {
                return Err(Error::DuplicateCauseVariable(v.to_string()));
            }
        }
        Ok(CandidateCause { assignments })
    }

    pub fn assignments(&self) -> &[(VariableId, bool)] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, v: &VariableId) -> bool {
        self.assignments.iter().any(|(id, _)| id == v)
    }
}

/// Bidirectional map between model variables and 1-based formula indices.
/// The block of model variables may start above 1 when lower indices are
/// reserved (the inference encoding puts its indicators there).
#[derive(Debug, Clone)]
pub struct Registry {
    by_name: BTreeMap<VariableId, u32>,
    names: Vec<VariableId>, // names[i] is the variable for index first + i
    first: u32,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::starting_at(1)
    }
}

impl Registry {
    pub fn starting_at(first: u32) -> Registry {
        debug_assert!(first >= 1);
        Registry {
            by_name: BTreeMap::new(),
            names: Vec::new(),
            first,
        }
    }

    pub fn insert(&mut self, v: VariableId) -> u32 {
        debug_assert!(!self.by_name.contains_key(&v));
        let idx = self.first + self.names.len() as u32;
        self.by_name.insert(v.clone(), idx);
        self.names.push(v);
        idx
    }

    pub fn index_of(&self, v: &VariableId) -> Option<u32> {
        self.by_name.get(v).copied()
    }

    pub fn variable_of(&self, index: u32) -> Option<&VariableId> {
        index
            .checked_sub(self.first)
            .and_then(|i| self.names.get(i as usize))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VariableId, u32)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, v)| (v, self.first + i as u32))
    }
}

/// Formula indices of the control variables attached to one endogenous
/// variable. `c1` tracks "follows its equation", `c2` tracks "keeps its
/// actual value"; `c3` is reserved for the linear layer, which constrains
/// it to `!c1 & !c2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndicatorTriple {
    pub c1: u32,
    pub c2: u32,
    pub c3: u32,
}

/// Expression tree over formula indices; `Iff` is first-class so the
/// clausal transformation can expand equation equivalences directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropExpr {
    Const(bool),
    Var(u32),
    Not(Box<PropExpr>),
    And(Vec<PropExpr>),
    Or(Vec<PropExpr>),
    Iff(Box<PropExpr>, Box<PropExpr>),
}

impl PropExpr {
    pub fn var(i: u32) -> PropExpr {
        PropExpr::Var(i)
    }

    #[allow(clippy::should_implement_trait)] // builder, not an operator
    pub fn not(e: PropExpr) -> PropExpr {
        PropExpr::Not(Box::new(e))
    }

    pub fn and(mut es: Vec<PropExpr>) -> PropExpr {
        match es.len() {
            0 => PropExpr::Const(true),
            1 => es.pop().unwrap(),
            _ => PropExpr::And(es),
        }
    }

    pub fn or(mut es: Vec<PropExpr>) -> PropExpr {
        match es.len() {
            0 => PropExpr::Const(false),
            1 => es.pop().unwrap(),
            _ => PropExpr::Or(es),
        }
    }

    pub fn iff(a: PropExpr, b: PropExpr) -> PropExpr {
        PropExpr::Iff(Box::new(a), Box::new(b))
    }

    /// Positive literal when `value` is true, negated otherwise.
    pub fn literal(index: u32, value: bool) -> PropExpr {
        if value {
            PropExpr::Var(index)
        } else {
            PropExpr::not(PropExpr::Var(index))
        }
    }

    /// Evaluates under a 1-based assignment slice (`assign[0]` unused).
    pub fn eval(&self, assign: &[bool]) -> bool {
        match self {
            PropExpr::Const(b) => *b,
            PropExpr::Var(i) => assign[*i as usize],
            PropExpr::Not(e) => !e.eval(assign),
            PropExpr::And(es) => es.iter().all(|e| e.eval(assign)),
            PropExpr::Or(es) => es.iter().any(|e| e.eval(assign)),
            PropExpr::Iff(a, b) => a.eval(assign) == b.eval(assign),
        }
    }

    pub fn max_var(&self) -> u32 {
        match self {
            PropExpr::Const(_) => 0,
            PropExpr::Var(i) => *i,
            PropExpr::Not(e) => e.max_var(),
            PropExpr::And(es) | PropExpr::Or(es) => {
                es.iter().map(|e| e.max_var()).max().unwrap_or(0)
            }
            PropExpr::Iff(a, b) => a.max_var().max(b.max_var()),
        }
    }
}

/// A formula plus the mapping from model variables to its indices.
#[derive(Debug, Clone)]
pub struct PropFormula {
    pub root: PropExpr,
    pub registry: Registry,
    pub indicators: Option<BTreeMap<VariableId, IndicatorTriple>>,
    /// Number of allocated formula variables (model variables plus
    /// indicators; clausal auxiliaries come later).
    pub num_vars: u32,
}

/// One unit-weight soft literal: the cause variable at its actual value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SoftUnit {
    pub var: u32,
    pub polarity: bool,
    pub weight: u64,
}

/// Reserved name of the `c1` indicator for `id`.
pub fn c1_name(id: &VariableId) -> String {
    format!("__c1_{id}")
}

pub fn c2_name(id: &VariableId) -> String {
    format!("__c2_{id}")
}

pub fn c3_name(id: &VariableId) -> String {
    format!("__c3_{id}")
}

struct EncodeCtx<'a> {
    model: &'a CausalModel,
    context: &'a Context,
    effect: &'a BoolExpr,
    actual: Valuation,
    registry: Registry,
    effect_vars: BTreeSet<VariableId>,
}

impl<'a> EncodeCtx<'a> {
    fn new(model: &'a CausalModel, context: &'a Context, effect: &'a BoolExpr) -> Result<Self> {
        Self::with_first_index(model, context, effect, 1)
    }

    fn with_first_index(
        model: &'a CausalModel,
        context: &'a Context,
        effect: &'a BoolExpr,
        first: u32,
    ) -> Result<Self> {
        let effect_vars = effect.vars();
        for v in &effect_vars {
            if !model.is_endogenous(v) {
                return Err(Error::EffectNotEndogenous(v.to_string()));
            }
        }
        let mut registry = Registry::starting_at(first);
        for v in model.exogenous() {
            registry.insert(v.clone());
        }
        for (v, _) in model.endogenous() {
            registry.insert(v.clone());
        }
        let actual = model.evaluate(context);
        Ok(EncodeCtx {
            model,
            context,
            effect,
            actual,
            registry,
            effect_vars,
        })
    }

    fn validate_cause(&self, cause: &CandidateCause) -> Result<()> {
        for (v, value) in cause.assignments() {
            if !self.model.is_endogenous(v) {
                return Err(Error::CauseNotEndogenous(v.to_string()));
            }
            if self.effect_vars.contains(v) {
                return Err(Error::CauseEffectOverlap(v.to_string()));
            }
            if self.actual.get(v) != Some(*value) {
                return Err(Error::Ac1Violation(v.to_string()));
            }
        }
        Ok(())
    }

    fn index(&self, v: &VariableId) -> u32 {
        self.registry.index_of(v).expect("registered model variable")
    }

    /// `f(Y = y)`: positive literal when y is true, negated otherwise.
    fn lit(&self, v: &VariableId, value: bool) -> PropExpr {
        PropExpr::literal(self.index(v), value)
    }

    fn actual_of(&self, v: &VariableId) -> bool {
        self.actual.get(v).expect("actual evaluation is total")
    }

    /// Translates a model expression into formula space.
    fn expr(&self, e: &BoolExpr) -> PropExpr {
        match e {
            BoolExpr::Const(b) => PropExpr::Const(*b),
            BoolExpr::Var(v) => PropExpr::Var(self.index(v)),
            BoolExpr::Not(inner) => PropExpr::not(self.expr(inner)),
            BoolExpr::And(es) => PropExpr::And(es.iter().map(|x| self.expr(x)).collect()),
            BoolExpr::Or(es) => PropExpr::Or(es.iter().map(|x| self.expr(x)).collect()),
        }
    }

    /// `V ↔ F_V` for an endogenous variable.
    fn equation_iff(&self, v: &VariableId) -> PropExpr {
        let eq = self.model.equation(v).expect("endogenous variable");
        PropExpr::iff(PropExpr::Var(self.index(v)), self.expr(eq))
    }

    /// Context literals, one per exogenous variable in declaration order.
    /// Emitted first so the clausal form starts with unit clauses.
    fn context_literals(&self) -> Vec<PropExpr> {
        self.model
            .exogenous()
            .iter()
            .map(|v| self.lit(v, self.context.get(v).expect("total context")))
            .collect()
    }

    fn negated_effect(&self) -> PropExpr {
        PropExpr::not(self.expr(self.effect))
    }

    /// `(V ↔ F_V) ∨ f(V = v)` for every endogenous variable not in the
    /// cause, in declaration order.
    fn follow_or_freeze(&self, cause: Option<&CandidateCause>) -> Vec<PropExpr> {
        self.model
            .endogenous()
            .iter()
            .filter(|(v, _)| cause.is_none_or(|c| !c.contains(v)))
            .map(|(v, _)| {
                PropExpr::or(vec![self.equation_iff(v), self.lit(v, self.actual_of(v))])
            })
            .collect()
    }

    fn formula(self, root: PropExpr) -> PropFormula {
        let num_vars = self.registry.len() as u32;
        PropFormula {
            root,
            registry: self.registry,
            indicators: None,
            num_vars,
        }
    }
}

/// Formula `F`: satisfiable exactly when a contingency set makes the
/// effect counterfactually depend on the fully negated cause.
pub fn build_f(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
) -> Result<PropFormula> {
    let ctx = EncodeCtx::new(model, context, effect)?;
    ctx.validate_cause(cause)?;
    let mut parts = ctx.context_literals();
    parts.push(ctx.negated_effect());
    parts.extend(ctx.follow_or_freeze(Some(cause)));
    for (v, value) in cause.assignments() {
        parts.push(ctx.lit(v, !*value));
    }
    Ok(ctx.formula(PropExpr::and(parts)))
}

/// Formula `G`: like `F` but with the cause variables unconstrained.
pub fn build_g(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
) -> Result<PropFormula> {
    let ctx = EncodeCtx::new(model, context, effect)?;
    ctx.validate_cause(cause)?;
    let mut parts = ctx.context_literals();
    parts.push(ctx.negated_effect());
    parts.extend(ctx.follow_or_freeze(Some(cause)));
    Ok(ctx.formula(PropExpr::and(parts)))
}

fn non_minimality_h(ctx: &EncodeCtx, cause: &CandidateCause) -> PropExpr {
    PropExpr::or(
        cause
            .assignments()
            .iter()
            .map(|(v, value)| PropExpr::or(vec![ctx.equation_iff(v), ctx.lit(v, *value)]))
            .collect(),
    )
}

fn non_emptiness_k(ctx: &EncodeCtx, cause: &CandidateCause) -> (PropExpr, PropExpr) {
    let keep_all = PropExpr::and(
        cause
            .assignments()
            .iter()
            .map(|(v, value)| ctx.lit(v, *value))
            .collect(),
    );
    let follow_all = PropExpr::and(
        cause
            .assignments()
            .iter()
            .map(|(v, _)| ctx.equation_iff(v))
            .collect(),
    );
    (PropExpr::not(keep_all), PropExpr::not(follow_all))
}

/// Formula `G' = G ∧ H ∧ K`: satisfiable exactly when minimality is
/// violated, so unsatisfiability certifies AC3.
pub fn build_g_prime(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
) -> Result<PropFormula> {
    let ctx = EncodeCtx::new(model, context, effect)?;
    ctx.validate_cause(cause)?;
    let mut parts = ctx.context_literals();
    parts.push(ctx.negated_effect());
    parts.extend(ctx.follow_or_freeze(Some(cause)));
    parts.push(non_minimality_h(&ctx, cause));
    let (k1, k2) = non_emptiness_k(&ctx, cause);
    parts.push(k1);
    parts.push(k2);
    Ok(ctx.formula(PropExpr::and(parts)))
}

/// Hard/soft split `G_max`: hard part `G ∧ K`, one unit-weight soft
/// literal per cause variable at its actual value.
pub fn build_g_max(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
) -> Result<(PropFormula, Vec<SoftUnit>)> {
    let ctx = EncodeCtx::new(model, context, effect)?;
    ctx.validate_cause(cause)?;
    let mut parts = ctx.context_literals();
    parts.push(ctx.negated_effect());
    parts.extend(ctx.follow_or_freeze(Some(cause)));
    let (k1, k2) = non_emptiness_k(&ctx, cause);
    parts.push(k1);
    parts.push(k2);
    let soft = cause
        .assignments()
        .iter()
        .map(|(v, value)| SoftUnit {
            var: ctx.index(v),
            polarity: *value,
            weight: 1,
        })
        .collect();
    Ok((ctx.formula(PropExpr::and(parts)), soft))
}

/// Candidate-free formula `G*`. Variables of the effect keep plain
/// equation equivalences; every other endogenous variable `V` gets
///
/// ```text
/// ((V ↔ F_V) ∧ c1  ∨  ¬(V ↔ F_V) ∧ ¬c1)  ∧  (f(V=v) ∧ c2  ∨  f(V=¬v) ∧ ¬c2)
/// ```
///
/// with fresh indicators recorded in the formula. The `c3` indices are
/// allocated here but constrained only by the linear layer.
pub fn build_g_star(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
) -> Result<PropFormula> {
    // Indicators take the lowest indices: the `c3` block first, then the
    // `c1`/`c2` pairs, then the model variables. Deterministic solvers
    // branch lowest index first with false preferred, so the search tries
    // "not a cause" classifications before touching the world, and the
    // first optimum deviates from the actual evaluation as late as
    // possible.
    let effect_vars = effect.vars();
    let indicated: Vec<VariableId> = model
        .endogenous()
        .iter()
        .map(|(v, _)| v.clone())
        .filter(|v| !effect_vars.contains(v))
        .collect();
    let k = indicated.len() as u32;
    let ctx = EncodeCtx::with_first_index(model, context, effect, 3 * k + 1)?;

    let mut indicators = BTreeMap::new();
    for (j, v) in indicated.iter().enumerate() {
        let j = j as u32;
        indicators.insert(
            v.clone(),
            IndicatorTriple {
                c1: k + 2 * j + 1,
                c2: k + 2 * j + 2,
                c3: j + 1,
            },
        );
    }

    let mut parts = ctx.context_literals();
    parts.push(ctx.negated_effect());
    for (v, _) in ctx.model.endogenous() {
        if ctx.effect_vars.contains(v) {
            parts.push(ctx.equation_iff(v));
        }
    }
    for v in &indicated {
        let IndicatorTriple { c1, c2, .. } = indicators[v];
        let follows = ctx.equation_iff(v);
        parts.push(PropExpr::or(vec![
            PropExpr::and(vec![follows.clone(), PropExpr::var(c1)]),
            PropExpr::and(vec![PropExpr::not(follows), PropExpr::not(PropExpr::var(c1))]),
        ]));
        let orig = ctx.actual_of(v);
        parts.push(PropExpr::or(vec![
            PropExpr::and(vec![ctx.lit(v, orig), PropExpr::var(c2)]),
            PropExpr::and(vec![ctx.lit(v, !orig), PropExpr::not(PropExpr::var(c2))]),
        ]));
    }

    let num_vars = 3 * k + ctx.registry.len() as u32;
    Ok(PropFormula {
        root: PropExpr::and(parts),
        registry: ctx.registry,
        indicators: Some(indicators),
        num_vars,
    })
}
