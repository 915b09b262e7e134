//! Clausal form: definitional (Tseitin-style) transformation of
//! [`PropFormula`], projection of solver assignments back to model
//! variables, and the DIMACS text formats.
//!
//! The transformation is polarity-unaware: every internal gate gets a full
//! biconditional definition. Equivalences whose two sides encode to plain
//! literals expand to two clauses without an auxiliary variable, which
//! keeps the clause count low for the shallow `V <-> F_V` equations that
//! dominate the causal encodings.

use std::collections::BTreeSet;

use crate::encoder::{PropExpr, PropFormula, Registry, SoftUnit};
use crate::error::{Error, Result};
use crate::model::Valuation;

/// A literal: 1-based variable index plus sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: u32,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: u32) -> Literal {
        Literal { var, negated: false }
    }

    pub fn neg(var: u32) -> Literal {
        Literal { var, negated: true }
    }

    pub fn with_value(var: u32, value: bool) -> Literal {
        Literal { var, negated: !value }
    }

    pub fn negate(self) -> Literal {
        Literal {
            var: self.var,
            negated: !self.negated,
        }
    }

    /// DIMACS integer form: positive or negative index.
    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -(self.var as i64)
        } else {
            self.var as i64
        }
    }

    pub fn satisfied_by(self, assign: &[bool]) -> bool {
        assign[self.var as usize] != self.negated
    }
}

/// Non-empty, duplicate-free disjunction of literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Returns `None` for tautologies (both polarities of one variable);
    /// duplicate literals are dropped.
    pub fn new(mut literals: Vec<Literal>) -> Option<Clause> {
        assert!(!literals.is_empty(), "clauses are non-empty");
        literals.sort();
        literals.dedup();
        for pair in literals.windows(2) {
            if pair[0].var == pair[1].var {
                return None;
            }
        }
        Some(Clause { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn satisfied_by(&self, assign: &[bool]) -> bool {
        self.literals.iter().any(|l| l.satisfied_by(assign))
    }
}

/// Clause set plus the registry linking model variables to indices and
/// the set of auxiliary indices introduced by the transformation.
#[derive(Debug, Clone, Default)]
pub struct CnfFormula {
    pub clauses: Vec<Clause>,
    pub num_vars: u32,
    pub registry: Registry,
    pub aux_vars: BTreeSet<u32>,
}

impl CnfFormula {
    pub fn push(&mut self, literals: Vec<Literal>) {
        if let Some(clause) = Clause::new(literals) {
            self.clauses.push(clause);
        }
    }

    pub(crate) fn fresh_aux(&mut self) -> u32 {
        self.num_vars += 1;
        self.aux_vars.insert(self.num_vars);
        self.num_vars
    }

    /// Forces unsatisfiability with a fresh variable pair.
    pub(crate) fn push_contradiction(&mut self) {
        let v = self.fresh_aux();
        self.push(vec![Literal::pos(v)]);
        self.push(vec![Literal::neg(v)]);
    }

    pub fn satisfied_by(&self, assign: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.satisfied_by(assign))
    }
}

// Constant-folded expression; `True`/`False` never occur below `Expr`.
enum Simp {
    True,
    False,
    Expr(PropExpr),
}

fn simplify(e: &PropExpr) -> Simp {
    match e {
        PropExpr::Const(true) => Simp::True,
        PropExpr::Const(false) => Simp::False,
        PropExpr::Var(i) => Simp::Expr(PropExpr::Var(*i)),
        PropExpr::Not(x) => match simplify(x) {
            Simp::True => Simp::False,
            Simp::False => Simp::True,
            Simp::Expr(inner) => Simp::Expr(PropExpr::not(inner)),
        },
        PropExpr::And(es) => {
            let mut kept = Vec::new();
            for child in es {
                match simplify(child) {
                    Simp::True => {}
                    Simp::False => return Simp::False,
                    Simp::Expr(x) => kept.push(x),
                }
            }
            match kept.len() {
                0 => Simp::True,
                _ => Simp::Expr(PropExpr::and(kept)),
            }
        }
        PropExpr::Or(es) => {
            let mut kept = Vec::new();
            for child in es {
                match simplify(child) {
                    Simp::False => {}
                    Simp::True => return Simp::True,
                    Simp::Expr(x) => kept.push(x),
                }
            }
            match kept.len() {
                0 => Simp::False,
                _ => Simp::Expr(PropExpr::or(kept)),
            }
        }
        PropExpr::Iff(a, b) => match (simplify(a), simplify(b)) {
            (Simp::True, rhs) => rhs,
            (Simp::False, rhs) => negate_simp(rhs),
            (lhs, Simp::True) => lhs,
            (lhs, Simp::False) => negate_simp(lhs),
            (Simp::Expr(x), Simp::Expr(y)) => Simp::Expr(PropExpr::iff(x, y)),
        },
    }
}

fn negate_simp(s: Simp) -> Simp {
    match s {
        Simp::True => Simp::False,
        Simp::False => Simp::True,
        Simp::Expr(x) => Simp::Expr(PropExpr::not(x)),
    }
}

/// Equisatisfiable clausal form of `formula`. Auxiliary variables are
/// numbered in post-order of the expression tree, so identical inputs
/// produce identical output.
pub fn tseitin(formula: &PropFormula) -> CnfFormula {
    let mut out = CnfFormula {
        clauses: Vec::new(),
        num_vars: formula.num_vars.max(formula.root.max_var()),
        registry: formula.registry.clone(),
        aux_vars: BTreeSet::new(),
    };
    match simplify(&formula.root) {
        Simp::True => {}
        Simp::False => out.push_contradiction(),
        Simp::Expr(root) => assert_expr(&root, &mut out),
    }
    out
}

/// Asserts `e` true at the top level.
fn assert_expr(e: &PropExpr, out: &mut CnfFormula) {
    match e {
        PropExpr::And(es) => {
            for child in es {
                assert_expr(child, out);
            }
        }
        PropExpr::Or(es) => {
            let lits: Vec<Literal> = es.iter().map(|c| encode(c, out)).collect();
            out.push(lits);
        }
        PropExpr::Iff(a, b) => {
            let la = encode(a, out);
            let lb = encode(b, out);
            out.push(vec![la.negate(), lb]);
            out.push(vec![la, lb.negate()]);
        }
        other => {
            let lit = encode(other, out);
            out.push(vec![lit]);
        }
    }
}

/// Encodes `e` to a literal, emitting definitional clauses for gates.
fn encode(e: &PropExpr, out: &mut CnfFormula) -> Literal {
    match e {
        PropExpr::Var(i) => Literal::pos(*i),
        PropExpr::Not(x) => encode(x, out).negate(),
        PropExpr::And(es) => {
            let lits: Vec<Literal> = es.iter().map(|c| encode(c, out)).collect();
            let a = Literal::pos(out.fresh_aux());
            for l in &lits {
                out.push(vec![a.negate(), *l]);
            }
            let mut last = vec![a];
            last.extend(lits.iter().map(|l| l.negate()));
            out.push(last);
            a
        }
        PropExpr::Or(es) => {
            let lits: Vec<Literal> = es.iter().map(|c| encode(c, out)).collect();
            let a = Literal::pos(out.fresh_aux());
            for l in &lits {
                out.push(vec![a, l.negate()]);
            }
            let mut last = vec![a.negate()];
            last.extend(lits.iter().copied());
            out.push(last);
            a
        }
        PropExpr::Iff(x, y) => {
            let lx = encode(x, out);
            let ly = encode(y, out);
            let a = Literal::pos(out.fresh_aux());
            out.push(vec![a.negate(), lx.negate(), ly]);
            out.push(vec![a.negate(), lx, ly.negate()]);
            out.push(vec![a, lx, ly]);
            out.push(vec![a, lx.negate(), ly.negate()]);
            a
        }
        PropExpr::Const(_) => unreachable!("constants folded before encoding"),
    }
}

/// Drops auxiliary and indicator variables and maps the rest back through
/// the registry.
pub fn project_assignment(cnf: &CnfFormula, raw: &[bool]) -> Result<Valuation> {
    let mut values = std::collections::BTreeMap::new();
    for (v, idx) in cnf.registry.iter() {
        let slot = raw
            .get(idx as usize)
            .ok_or(Error::UnregisteredIndex(idx))?;
        values.insert(v.clone(), *slot);
    }
    Ok(Valuation::from_map(values))
}

fn name_comments(registry: &Registry, out: &mut String) {
    for (v, idx) in registry.iter() {
        out.push_str(&format!("c var {idx} = {v}\n"));
    }
}

/// Standard DIMACS CNF with comment lines mapping indices to model
/// variable names. LF line endings, 1-based variables.
pub fn write_dimacs(cnf: &CnfFormula) -> String {
    let mut out = String::new();
    name_comments(&cnf.registry, &mut out);
    out.push_str(&format!("p cnf {} {}\n", cnf.num_vars, cnf.clauses.len()));
    for clause in &cnf.clauses {
        for lit in clause.literals() {
            out.push_str(&format!("{} ", lit.to_dimacs()));
        }
        out.push_str("0\n");
    }
    out
}

/// Pre-2022 weighted CNF: `p wcnf <vars> <clauses> <top>` with hard
/// clauses at weight `top = 1 + sum of soft weights`.
pub fn write_wcnf(hard: &CnfFormula, soft: &[SoftUnit]) -> String {
    let top: u64 = 1 + soft.iter().map(|s| s.weight).sum::<u64>();
    let mut out = String::new();
    name_comments(&hard.registry, &mut out);
    out.push_str(&format!(
        "p wcnf {} {} {}\n",
        hard.num_vars,
        hard.clauses.len() + soft.len(),
        top
    ));
    for clause in &hard.clauses {
        out.push_str(&format!("{top} "));
        for lit in clause.literals() {
            out.push_str(&format!("{} ", lit.to_dimacs()));
        }
        out.push_str("0\n");
    }
    for unit in soft {
        let lit = Literal::with_value(unit.var, unit.polarity);
        out.push_str(&format!("{} {} 0\n", unit.weight, lit.to_dimacs()));
    }
    out
}

/// Reads DIMACS CNF (for differential testing).
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut num_vars: Option<u32> = None;
    let mut clauses = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 3 || fields[0] != "cnf" {
                return Err(Error::Syntax(format!("bad DIMACS header `{line}`")));
            }
            num_vars = Some(
                fields[1]
                    .parse()
                    .map_err(|_| Error::Syntax(format!("bad variable count in `{line}`")))?,
            );
            continue;
        }
        let lits = parse_literal_line(line)?;
        if lits.is_empty() {
            return Err(Error::Syntax("empty clause in DIMACS input".into()));
        }
        clauses.push(lits);
    }
    let num_vars =
        num_vars.ok_or_else(|| Error::Syntax("missing `p cnf` header".into()))?;
    let mut cnf = CnfFormula {
        clauses: Vec::new(),
        num_vars,
        registry: Registry::default(),
        aux_vars: BTreeSet::new(),
    };
    for lits in clauses {
        for l in &lits {
            if l.var == 0 || l.var > num_vars {
                return Err(Error::Syntax(format!("literal out of range: {}", l.to_dimacs())));
            }
        }
        cnf.push(lits);
    }
    Ok(cnf)
}

pub(crate) fn parse_literal_line(line: &str) -> Result<Vec<Literal>> {
    let mut lits = Vec::new();
    let mut terminated = false;
    for tok in line.split_whitespace() {
        let value: i64 = tok
            .parse()
            .map_err(|_| Error::Syntax(format!("bad literal `{tok}`")))?;
        if value == 0 {
            terminated = true;
            break;
        }
        lits.push(Literal {
            var: value.unsigned_abs() as u32,
            negated: value < 0,
        });
    }
    if !terminated {
        return Err(Error::Syntax(format!("clause line not 0-terminated: `{line}`")));
    }
    Ok(lits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::PropExpr as P;

    fn formula(root: P, num_vars: u32) -> PropFormula {
        PropFormula {
            root,
            registry: Registry::default(),
            indicators: None,
            num_vars,
        }
    }

    /// Truth-table satisfiability of a propositional expression.
    fn expr_sat(root: &P, num_vars: u32) -> bool {
        for bits in 0..(1u64 << num_vars) {
            let mut assign = vec![false; num_vars as usize + 1];
            for i in 0..num_vars {
                assign[i as usize + 1] = bits & (1 << i) != 0;
            }
            if root.eval(&assign) {
                return true;
            }
        }
        false
    }

    fn cnf_sat(cnf: &CnfFormula) -> bool {
        for bits in 0..(1u64 << cnf.num_vars) {
            let mut assign = vec![false; cnf.num_vars as usize + 1];
            for i in 0..cnf.num_vars {
                assign[i as usize + 1] = bits & (1 << i) != 0;
            }
            if cnf.satisfied_by(&assign) {
                return true;
            }
        }
        false
    }

    #[test]
    fn literal_conjunction_needs_no_aux() {
        let root = P::and(vec![P::var(1), P::not(P::var(2))]);
        let cnf = tseitin(&formula(root, 2));
        assert_eq!(cnf.num_vars, 2);
        assert!(cnf.aux_vars.is_empty());
        assert_eq!(cnf.clauses.len(), 2);
        assert!(cnf.clauses.iter().all(|c| c.literals().len() == 1));
    }

    #[test]
    fn iff_of_literals_expands_to_two_clauses() {
        let root = P::iff(P::var(1), P::var(2));
        let cnf = tseitin(&formula(root, 2));
        assert!(cnf.aux_vars.is_empty());
        assert_eq!(cnf.clauses.len(), 2);
        let want_a = Clause::new(vec![Literal::neg(1), Literal::pos(2)]).unwrap();
        let want_b = Clause::new(vec![Literal::pos(1), Literal::neg(2)]).unwrap();
        assert!(cnf.clauses.contains(&want_a));
        assert!(cnf.clauses.contains(&want_b));
    }

    #[test]
    fn tautological_clauses_are_dropped() {
        assert!(Clause::new(vec![Literal::pos(1), Literal::neg(1)]).is_none());
        let c = Clause::new(vec![Literal::pos(1), Literal::pos(1)]).unwrap();
        assert_eq!(c.literals().len(), 1);
    }

    #[test]
    fn constants_fold_away() {
        let root = P::and(vec![P::Const(true), P::var(1)]);
        let cnf = tseitin(&formula(root, 1));
        assert_eq!(cnf.clauses.len(), 1);

        let unsat = tseitin(&formula(P::Const(false), 0));
        assert!(!cnf_sat(&unsat));

        let trivial = tseitin(&formula(P::Const(true), 0));
        assert!(trivial.clauses.is_empty());
        assert!(cnf_sat(&trivial));
    }

    #[test]
    fn deterministic_output() {
        let make = || {
            let root = P::or(vec![
                P::and(vec![P::var(1), P::var(2)]),
                P::iff(P::var(3), P::not(P::var(1))),
            ]);
            write_dimacs(&tseitin(&formula(root, 3)))
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn dimacs_round_trip() {
        let root = P::and(vec![P::or(vec![P::var(1), P::var(2)]), P::not(P::var(3))]);
        let cnf = tseitin(&formula(root, 3));
        let text = write_dimacs(&cnf);
        assert!(text.starts_with("p cnf 3 2\n"));
        let back = parse_dimacs(&text).unwrap();
        assert_eq!(back.num_vars, cnf.num_vars);
        assert_eq!(back.clauses, cnf.clauses);
    }

    #[test]
    fn wcnf_header_and_weights() {
        let hard = tseitin(&formula(P::or(vec![P::var(1), P::var(2)]), 2));
        let soft = vec![
            SoftUnit { var: 1, polarity: true, weight: 1 },
            SoftUnit { var: 2, polarity: true, weight: 1 },
        ];
        let text = write_wcnf(&hard, &soft);
        assert!(text.contains("p wcnf 2 3 3\n"));
        assert!(text.ends_with("1 1 0\n1 2 0\n"));
    }

    /// Random expression generator for the equisatisfiability property.
    fn random_expr(rng: &mut crate::rng::SplitMix64, num_vars: u32, depth: u32) -> P {
        if depth == 0 || rng.next_below(5) == 0 {
            let v = rng.next_below(num_vars as u64) as u32 + 1;
            return if rng.next_bool() { P::var(v) } else { P::not(P::var(v)) };
        }
        match rng.next_below(4) {
            0 => P::and((0..2 + rng.next_below(2)).map(|_| random_expr(rng, num_vars, depth - 1)).collect()),
            1 => P::or((0..2 + rng.next_below(2)).map(|_| random_expr(rng, num_vars, depth - 1)).collect()),
            2 => P::not(random_expr(rng, num_vars, depth - 1)),
            _ => P::iff(
                random_expr(rng, num_vars, depth - 1),
                random_expr(rng, num_vars, depth - 1),
            ),
        }
    }

    #[test]
    fn equisatisfiable_and_model_sound_on_random_formulas() {
        let mut rng = crate::rng::SplitMix64::new(0xC0FFEE);
        for _ in 0..300 {
            let num_vars = 1 + rng.next_below(8) as u32;
            let root = random_expr(&mut rng, num_vars, 3);
            let f = formula(root.clone(), num_vars);
            let cnf = tseitin(&f);
            assert_eq!(expr_sat(&root, num_vars), cnf_sat(&cnf));

            // Every CNF model, restricted to original variables, satisfies
            // the source formula.
            for bits in 0..(1u64 << cnf.num_vars.min(16)) {
                if cnf.num_vars > 16 {
                    break;
                }
                let mut assign = vec![false; cnf.num_vars as usize + 1];
                for i in 0..cnf.num_vars {
                    assign[i as usize + 1] = bits & (1 << i) != 0;
                }
                if cnf.satisfied_by(&assign) {
                    assert!(root.eval(&assign));
                }
            }
        }
    }
}
