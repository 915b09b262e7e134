//! Binary acyclic structural causal models.
//!
//! A model is a set of exogenous variables (set by a context) and an ordered
//! set of endogenous variables, each defined by a boolean equation over other
//! variables. The dependency graph over endogenous variables must be acyclic,
//! so every context determines a unique evaluation. Interventions replace
//! selected equations by constants before re-evaluating.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of a model variable. Identifiers are letters, digits and
/// underscores, do not start with a digit, and may not start with `__`
/// (that prefix is reserved for generated solver variables).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariableId(String);

impl VariableId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if !is_valid_identifier(&name) {
            return Err(Error::Syntax(format!("invalid identifier `{name}`")));
        }
        Ok(VariableId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn is_valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    let ok_head = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
    ok_head
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with("__")
}

/// Boolean expression over model variables. `And`/`Or` are n-ary with at
/// least two operands; single-operand lists are collapsed by constructors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Const(bool),
    Var(VariableId),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn var(id: &VariableId) -> BoolExpr {
        BoolExpr::Var(id.clone())
    }

    #[allow(clippy::should_implement_trait)] // builder, not an operator
    pub fn not(e: BoolExpr) -> BoolExpr {
        BoolExpr::Not(Box::new(e))
    }

    /// N-ary conjunction; collapses empty and singleton operand lists.
    pub fn and(mut es: Vec<BoolExpr>) -> BoolExpr {
        match es.len() {
            0 => BoolExpr::Const(true),
            1 => es.pop().unwrap(),
            _ => BoolExpr::And(es),
        }
    }

    /// N-ary disjunction; collapses empty and singleton operand lists.
    pub fn or(mut es: Vec<BoolExpr>) -> BoolExpr {
        match es.len() {
            0 => BoolExpr::Const(false),
            1 => es.pop().unwrap(),
            _ => BoolExpr::Or(es),
        }
    }

    /// Literal for `id = value`: the positive variable when value is true,
    /// its negation otherwise.
    pub fn literal(id: &VariableId, value: bool) -> BoolExpr {
        if value {
            BoolExpr::var(id)
        } else {
            BoolExpr::not(BoolExpr::var(id))
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<VariableId>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Var(v) => {
                out.insert(v.clone());
            }
            BoolExpr::Not(e) => e.collect_vars(out),
            BoolExpr::And(es) | BoolExpr::Or(es) => {
                for e in es {
                    e.collect_vars(out);
                }
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<VariableId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Renders the expression in the model grammar (`|`, `&`, `!`, `0`, `1`),
    /// with parentheses only where precedence requires them.
    pub fn to_expr_string(&self) -> String {
        fn go(e: &BoolExpr, parent_prec: u8, out: &mut String) {
            let prec = match e {
                BoolExpr::Or(_) => 1,
                BoolExpr::And(_) => 2,
                _ => 3,
            };
            let parens = prec < parent_prec;
            if parens {
                out.push('(');
            }
            match e {
                BoolExpr::Const(b) => out.push(if *b { '1' } else { '0' }),
                BoolExpr::Var(v) => out.push_str(v.as_str()),
                BoolExpr::Not(inner) => {
                    out.push('!');
                    go(inner, 3, out);
                }
                BoolExpr::And(es) => {
                    for (i, child) in es.iter().enumerate() {
                        if i > 0 {
                            out.push_str(" & ");
                        }
                        go(child, 2, out);
                    }
                }
                BoolExpr::Or(es) => {
                    for (i, child) in es.iter().enumerate() {
                        if i > 0 {
                            out.push_str(" | ");
                        }
                        go(child, 1, out);
                    }
                }
            }
            if parens {
                out.push(')');
            }
        }
        let mut out = String::new();
        go(self, 0, &mut out);
        out
    }
}

/// A validated causal model. Construction checks disjointness, duplicate
/// ids, undefined references, self-references and acyclicity; the
/// topological order is fixed at construction time.
#[derive(Debug, Clone)]
pub struct CausalModel {
    name: String,
    exogenous: Vec<VariableId>,
    endogenous: Vec<(VariableId, BoolExpr)>,
    topo: Vec<VariableId>,
}

impl CausalModel {
    pub fn new(
        name: impl Into<String>,
        exogenous: Vec<VariableId>,
        endogenous: Vec<(VariableId, BoolExpr)>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for v in exogenous.iter().chain(endogenous.iter().map(|(v, _)| v)) {
            if !seen.insert(v.clone()) {
                return Err(Error::DuplicateVariable(v.to_string()));
            }
        }
        let endo_set: BTreeSet<&VariableId> = endogenous.iter().map(|(v, _)| v).collect();
        for (v, eq) in &endogenous {
            for used in eq.vars() {
                if used == *v {
                    return Err(Error::SelfReference(v.to_string()));
                }
                if !seen.contains(&used) {
                    return Err(Error::UndefinedVariable(used.to_string()));
                }
            }
            let _ = endo_set;
        }
        let topo = topological_sort(&exogenous, &endogenous)?;
        Ok(CausalModel {
            name: name.into(),
            exogenous,
            endogenous,
            topo,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn exogenous(&self) -> &[VariableId] {
        &self.exogenous
    }

    pub fn endogenous(&self) -> &[(VariableId, BoolExpr)] {
        &self.endogenous
    }

    pub fn is_exogenous(&self, v: &VariableId) -> bool {
        self.exogenous.contains(v)
    }

    pub fn is_endogenous(&self, v: &VariableId) -> bool {
        self.endogenous.iter().any(|(id, _)| id == v)
    }

    pub fn equation(&self, v: &VariableId) -> Option<&BoolExpr> {
        self.endogenous
            .iter()
            .find(|(id, _)| id == v)
            .map(|(_, eq)| eq)
    }

    /// Endogenous variables ordered so that every variable appears after
    /// all endogenous variables used in its equation. Ties keep
    /// declaration order.
    pub fn topological_order(&self) -> &[VariableId] {
        &self.topo
    }

    /// The unique solution of all equations under `context`.
    pub fn evaluate(&self, context: &Context) -> Valuation {
        self.evaluate_with_intervention(context, &Intervention::empty())
    }

    /// Like [`evaluate`](Self::evaluate), but variables overridden by the
    /// intervention take the forced value and their equations are ignored.
    pub fn evaluate_with_intervention(&self, context: &Context, iv: &Intervention) -> Valuation {
        let mut values: BTreeMap<VariableId, bool> = context.values().clone();
        for v in &self.topo {
            let value = match iv.get(v) {
                Some(forced) => forced,
                None => {
                    let eq = self.equation(v).expect("endogenous variable has equation");
                    eval_expr_map(eq, &values).expect("evaluation order covers all inputs")
                }
            };
            values.insert(v.clone(), value);
        }
        Valuation { values }
    }
}

fn topological_sort(
    exogenous: &[VariableId],
    endogenous: &[(VariableId, BoolExpr)],
) -> Result<Vec<VariableId>> {
    let exo_set: BTreeSet<&VariableId> = exogenous.iter().collect();
    let index: BTreeMap<&VariableId, usize> = endogenous
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (v, i))
        .collect();
    let n = endogenous.len();
    // deps[i] = endogenous indices used by equation i
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, (_, eq)) in endogenous.iter().enumerate() {
        for used in eq.vars() {
            if exo_set.contains(&used) {
                continue;
            }
            let j = *index.get(&used).expect("validated reference");
            deps[i].push(j);
            dependents[j].push(i);
        }
    }
    let mut remaining: Vec<usize> = deps.iter().map(|d| d.len()).collect();
    let mut order = Vec::with_capacity(n);
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| remaining[i] == 0).collect();
    while let Some(&i) = ready.iter().next() {
        ready.remove(&i);
        order.push(endogenous[i].0.clone());
        for &k in &dependents[i] {
            remaining[k] -= 1;
            if remaining[k] == 0 {
                ready.insert(k);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Extract one cycle among the unresolved variables for the error.
    let stuck: BTreeSet<usize> = (0..n).filter(|&i| remaining[i] > 0).collect();
    let start = *stuck.iter().next().expect("non-empty leftover");
    let mut path = vec![start];
    let mut seen_at: BTreeMap<usize, usize> = BTreeMap::new();
    seen_at.insert(start, 0);
    let mut cur = start;
    loop {
        let next = *deps[cur]
            .iter()
            .find(|j| stuck.contains(j))
            .expect("stuck node depends on a stuck node");
        if let Some(&pos) = seen_at.get(&next) {
            let cycle: Vec<String> = path[pos..]
                .iter()
                .chain(std::iter::once(&next))
                .map(|&i| endogenous[i].0.to_string())
                .collect();
            return Err(Error::CyclicModel(cycle));
        }
        seen_at.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}

/// Total assignment to the exogenous variables of one model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    values: BTreeMap<VariableId, bool>,
}

impl Context {
    pub fn new(model: &CausalModel, values: BTreeMap<VariableId, bool>) -> Result<Self> {
        for v in model.exogenous() {
            if !values.contains_key(v) {
                return Err(Error::ContextNotTotal(format!("missing `{v}`")));
            }
        }
        for v in values.keys() {
            if !model.is_exogenous(v) {
                return Err(Error::ContextNotTotal(format!("extra key `{v}`")));
            }
        }
        Ok(Context { values })
    }

    pub fn values(&self) -> &BTreeMap<VariableId, bool> {
        &self.values
    }

    pub fn get(&self, v: &VariableId) -> Option<bool> {
        self.values.get(v).copied()
    }
}

/// Total assignment to all variables of one model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Valuation {
    values: BTreeMap<VariableId, bool>,
}

impl Valuation {
    pub fn from_map(values: BTreeMap<VariableId, bool>) -> Self {
        Valuation { values }
    }

    pub fn get(&self, v: &VariableId) -> Option<bool> {
        self.values.get(v).copied()
    }

    pub fn values(&self) -> &BTreeMap<VariableId, bool> {
        &self.values
    }
}

/// Forced values for a subset of endogenous variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Intervention {
    overrides: BTreeMap<VariableId, bool>,
}

impl Intervention {
    pub fn empty() -> Self {
        Intervention::default()
    }

    pub fn new(model: &CausalModel, overrides: BTreeMap<VariableId, bool>) -> Result<Self> {
        for v in overrides.keys() {
            if !model.is_endogenous(v) {
                return Err(Error::InterventionNotEndogenous(v.to_string()));
            }
        }
        Ok(Intervention { overrides })
    }

    pub fn get(&self, v: &VariableId) -> Option<bool> {
        self.overrides.get(v).copied()
    }

    pub fn overrides(&self) -> &BTreeMap<VariableId, bool> {
        &self.overrides
    }
}

fn eval_expr_map(expr: &BoolExpr, values: &BTreeMap<VariableId, bool>) -> Result<bool> {
    Ok(match expr {
        BoolExpr::Const(b) => *b,
        BoolExpr::Var(v) => *values
            .get(v)
            .ok_or_else(|| Error::UnboundVariable(v.to_string()))?,
        BoolExpr::Not(e) => !eval_expr_map(e, values)?,
        BoolExpr::And(es) => {
            let mut acc = true;
            for e in es {
                acc &= eval_expr_map(e, values)?;
            }
            acc
        }
        BoolExpr::Or(es) => {
            let mut acc = false;
            for e in es {
                acc |= eval_expr_map(e, values)?;
            }
            acc
        }
    })
}

/// Standard boolean semantics of `expr` under a valuation.
pub fn eval_expr(expr: &BoolExpr, valuation: &Valuation) -> Result<bool> {
    eval_expr_map(expr, &valuation.values)
}

// ── JSON model format ─────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct ModelJson {
    name: String,
    exogenous: Vec<String>,
    endogenous: Vec<EquationJson>,
}

#[derive(Serialize, Deserialize)]
struct EquationJson {
    id: String,
    eq: String,
}

/// Parses the JSON model format: `name`, `exogenous` (identifier array) and
/// `endogenous` (array of `{ "id", "eq" }` with `eq` in the expression
/// grammar `or := and ('|' and)*; and := unary ('&' unary)*;
/// unary := '!' unary | '(' expr ')' | ident | '0' | '1'`).
pub fn parse_model(text: &str) -> Result<CausalModel> {
    let raw: ModelJson =
        serde_json::from_str(text).map_err(|e| Error::Syntax(format!("model JSON: {e}")))?;
    let exogenous = raw
        .exogenous
        .into_iter()
        .map(VariableId::new)
        .collect::<Result<Vec<_>>>()?;
    let endogenous = raw
        .endogenous
        .into_iter()
        .map(|e| Ok((VariableId::new(e.id)?, parse_expr(&e.eq)?)))
        .collect::<Result<Vec<_>>>()?;
    CausalModel::new(raw.name, exogenous, endogenous)
}

/// Serializes a model to the same JSON format `parse_model` reads.
pub fn model_to_json(model: &CausalModel) -> String {
    let raw = ModelJson {
        name: model.name().to_string(),
        exogenous: model.exogenous().iter().map(|v| v.to_string()).collect(),
        endogenous: model
            .endogenous()
            .iter()
            .map(|(v, eq)| EquationJson {
                id: v.to_string(),
                eq: eq.to_expr_string(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&raw).expect("model serializes");
    out.push('\n');
    out
}

/// Recursive-descent parser for the expression grammar.
pub fn parse_expr(text: &str) -> Result<BoolExpr> {
    let mut p = ExprParser {
        bytes: text.as_bytes(),
        pos: 0,
        text,
    };
    let expr = p.parse_or()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(Error::Syntax(format!(
            "unexpected `{}` at byte {} in expression `{}`",
            text[p.pos..].chars().next().unwrap_or(' '),
            p.pos,
            text
        )));
    }
    Ok(expr)
}

struct ExprParser<'a> {
    bytes: &'a [u8],
    pos: usize,
    text: &'a str,
}

impl<'a> ExprParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn parse_or(&mut self) -> Result<BoolExpr> {
        let mut parts = vec![self.parse_and()?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            parts.push(self.parse_and()?);
        }
        Ok(BoolExpr::or(parts))
    }

    fn parse_and(&mut self) -> Result<BoolExpr> {
        let mut parts = vec![self.parse_unary()?];
        while self.peek() == Some(b'&') {
            self.pos += 1;
            parts.push(self.parse_unary()?);
        }
        Ok(BoolExpr::and(parts))
    }

    fn parse_unary(&mut self) -> Result<BoolExpr> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(BoolExpr::not(self.parse_unary()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_or()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Syntax(format!(
                        "missing `)` in expression `{}`",
                        self.text
                    )));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'0') => {
                self.pos += 1;
                Ok(BoolExpr::Const(false))
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(BoolExpr::Const(true))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = &self.text[start..self.pos];
                Ok(BoolExpr::Var(VariableId::new(name)?))
            }
            other => Err(Error::Syntax(format!(
                "expected expression atom, found {:?} in `{}`",
                other.map(|c| c as char),
                self.text
            ))),
        }
    }
}

// ── Convenience constructors used across tests and the CLI ────────────

/// Builds a context from `(name, value)` pairs.
pub fn context_of(model: &CausalModel, pairs: &[(&str, bool)]) -> Result<Context> {
    let mut map = BTreeMap::new();
    for (name, value) in pairs {
        map.insert(VariableId::new(*name)?, *value);
    }
    Context::new(model, map)
}

/// The rock-throwing model used throughout the tests: two throwers, the
/// first hit preempts the second.
pub fn rock_throwing() -> CausalModel {
    parse_model(
        r#"{
  "name": "rock-throwing",
  "exogenous": ["ST_exo", "BT_exo"],
  "endogenous": [
    { "id": "ST", "eq": "ST_exo" },
    { "id": "BT", "eq": "BT_exo" },
    { "id": "SH", "eq": "ST" },
    { "id": "BH", "eq": "BT & !SH" },
    { "id": "BS", "eq": "SH | BH" }
  ]
}"#,
    )
    .expect("rock-throwing model is valid")
}
