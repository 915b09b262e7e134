//! 0-1 / small-bounded-integer linear programs with lexicographic
//! objectives, plus the translations from causal queries.
//!
//! Two interchangeable optimization back ends sit behind [`solve_ilp`]:
//! a depth-first branch-and-bound with bound-tightening propagation, and,
//! for larger clause-shaped programs, an objective-bounding loop over the
//! CDCL core. Both certify optimality; the dispatch on program size is
//! deterministic.

mod bnb;
mod satback;

use std::collections::BTreeMap;
use std::time::Instant;

use crate::cnf::{tseitin, Clause, CnfFormula};
use crate::encoder::{build_g, build_g_star, c1_name, c2_name, c3_name, CandidateCause, IndicatorTriple};
use crate::error::{Error, Result};
use crate::model::{BoolExpr, CausalModel, Context, VariableId};
use crate::sat::SatStats;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpVar {
    pub name: String,
    pub lower: i64,
    pub upper: i64,
}

impl IlpVar {
    pub fn binary(name: impl Into<String>) -> IlpVar {
        IlpVar {
            name: name.into(),
            lower: 0,
            upper: 1,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.lower == 0 && self.upper == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

/// `sum(terms) cmp rhs`; terms are `(coefficient, variable index)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub terms: Vec<(i64, usize)>,
    pub cmp: Cmp,
    pub rhs: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearExpr {
    pub terms: Vec<(i64, usize)>,
    pub constant: i64,
}

impl LinearExpr {
    pub fn eval(&self, assignment: &[i64]) -> i64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(c, v)| c * assignment[*v])
                .sum::<i64>()
    }
}

#[derive(Debug, Clone)]
pub struct IlpProgram {
    pub name: String,
    pub vars: Vec<IlpVar>,
    pub constraints: Vec<LinearConstraint>,
    /// Ordered (lexicographic) objectives; one or two entries.
    pub objectives: Vec<(Sense, LinearExpr)>,
}

impl IlpProgram {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn constraint_satisfied(&self, c: &LinearConstraint, assignment: &[i64]) -> bool {
        let lhs: i64 = c.terms.iter().map(|(k, v)| k * assignment[*v]).sum();
        match c.cmp {
            Cmp::Le => lhs <= c.rhs,
            Cmp::Eq => lhs == c.rhs,
            Cmp::Ge => lhs >= c.rhs,
        }
    }

    pub fn feasible(&self, assignment: &[i64]) -> bool {
        self.vars
            .iter()
            .zip(assignment)
            .all(|(v, &x)| v.lower <= x && x <= v.upper)
            && self
                .constraints
                .iter()
                .all(|c| self.constraint_satisfied(c, assignment))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlpStatus {
    Opt,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct IlpResult {
    pub status: IlpStatus,
    /// One value per objective, present iff `Opt`.
    pub objective_values: Vec<i64>,
    /// Values for all program variables, present iff `Opt`.
    pub assignment: Vec<i64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IlpStats {
    pub nodes: u64,
    pub sat: SatStats,
}

/// One linear constraint per clause: positive literals count directly,
/// negated ones as `1 - x`, and the sum must reach one.
pub fn clause_to_constraint(clause: &Clause) -> LinearConstraint {
    let mut terms = Vec::with_capacity(clause.literals().len());
    let mut negated = 0i64;
    for lit in clause.literals() {
        if lit.negated {
            negated += 1;
            terms.push((-1, lit.var as usize - 1));
        } else {
            terms.push((1, lit.var as usize - 1));
        }
    }
    LinearConstraint {
        terms,
        cmp: Cmp::Ge,
        rhs: 1 - negated,
    }
}

fn vars_from_cnf(cnf: &CnfFormula, indicators: Option<&BTreeMap<VariableId, IndicatorTriple>>) -> Vec<IlpVar> {
    let mut indicator_names: BTreeMap<u32, String> = BTreeMap::new();
    if let Some(map) = indicators {
        for (v, tri) in map {
            indicator_names.insert(tri.c1, c1_name(v));
            indicator_names.insert(tri.c2, c2_name(v));
            indicator_names.insert(tri.c3, c3_name(v));
        }
    }
    (1..=cnf.num_vars)
        .map(|idx| {
            let name = if let Some(v) = cnf.registry.variable_of(idx) {
                v.to_string()
            } else if let Some(name) = indicator_names.get(&idx) {
                name.clone()
            } else {
                format!("__t{idx}")
            };
            IlpVar::binary(name)
        })
        .collect()
}

/// Checking program plus the bookkeeping needed to read the solution back.
#[derive(Debug, Clone)]
pub struct CheckProgram {
    pub program: IlpProgram,
    pub cnf: CnfFormula,
    /// Index of the distance variable in `program.vars`.
    pub distance_var: usize,
}

/// The checking query as a 0-1 program: constraints from the clausal form
/// of `G`, a distance variable bounded by `[1, cause size]` tied to the
/// number of flipped cause variables, and the single objective of
/// minimizing that distance.
pub fn build_check_program(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
) -> Result<CheckProgram> {
    let g = build_g(model, context, effect, cause)?;
    let cnf = tseitin(&g);
    let mut vars = vars_from_cnf(&cnf, None);
    let distance_var = vars.len();
    let ell = cause.len() as i64;
    vars.push(IlpVar {
        name: "__d".into(),
        lower: 1,
        upper: ell,
    });

    let mut constraints: Vec<LinearConstraint> =
        cnf.clauses.iter().map(clause_to_constraint).collect();

    // distance = sum over flipped cause variables, i.e.
    // sum_{x_i=1} X_i - sum_{x_i=0} X_i + d = |{i : x_i = 1}|.
    let mut terms = Vec::with_capacity(cause.len() + 1);
    let mut ones = 0i64;
    for (v, value) in cause.assignments() {
        let idx = cnf.registry.index_of(v).expect("cause in registry") as usize - 1;
        if *value {
            ones += 1;
            terms.push((1, idx));
        } else {
            terms.push((-1, idx));
        }
    }
    terms.push((1, distance_var));
    constraints.push(LinearConstraint {
        terms,
        cmp: Cmp::Eq,
        rhs: ones,
    });

    let objective = LinearExpr {
        terms: vec![(1, distance_var)],
        constant: 0,
    };
    Ok(CheckProgram {
        program: IlpProgram {
            name: format!("{}_check", model.name()),
            vars,
            constraints,
            objectives: vec![(Sense::Minimize, objective)],
        },
        cnf,
        distance_var,
    })
}

/// Inference program plus solution bookkeeping.
#[derive(Debug, Clone)]
pub struct WhyProgram {
    pub program: IlpProgram,
    pub cnf: CnfFormula,
    /// Indicator indices (1-based CNF space) per non-effect endogenous
    /// variable.
    pub indicators: BTreeMap<VariableId, IndicatorTriple>,
}

/// The inference query as a 0-1 program: constraints from the clausal
/// form of `G*`, per candidate variable a `c3` linking
/// `c1 + c2 + 2*c3 in [1, 2]` (forcing `c3 = !c1 & !c2`), the
/// non-emptiness constraint `sum c3 >= 1`, and the objective pair
/// maximize `sum c1`, then minimize `sum c3`.
pub fn build_why_program(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
) -> Result<WhyProgram> {
    let g_star = build_g_star(model, context, effect)?;
    let indicators = g_star.indicators.clone().expect("inference formula carries indicators");
    if indicators.is_empty() {
        return Err(Error::NoCandidateVariables);
    }
    let cnf = tseitin(&g_star);
    let vars = vars_from_cnf(&cnf, Some(&indicators));

    let mut constraints: Vec<LinearConstraint> =
        cnf.clauses.iter().map(clause_to_constraint).collect();

    // Candidate variables in declaration order for deterministic rows.
    let ordered: Vec<&VariableId> = model
        .endogenous()
        .iter()
        .map(|(v, _)| v)
        .filter(|v| indicators.contains_key(*v))
        .collect();

    for v in &ordered {
        let tri = indicators[*v];
        let terms = vec![
            (1, tri.c1 as usize - 1),
            (1, tri.c2 as usize - 1),
            (2, tri.c3 as usize - 1),
        ];
        constraints.push(LinearConstraint {
            terms: terms.clone(),
            cmp: Cmp::Ge,
            rhs: 1,
        });
        constraints.push(LinearConstraint {
            terms,
            cmp: Cmp::Le,
            rhs: 2,
        });
    }
    // A cause is non-empty.
    constraints.push(LinearConstraint {
        terms: ordered
            .iter()
            .map(|v| (1, indicators[*v].c3 as usize - 1))
            .collect(),
        cmp: Cmp::Ge,
        rhs: 1,
    });

    let normals = LinearExpr {
        terms: ordered
            .iter()
            .map(|v| (1, indicators[*v].c1 as usize - 1))
            .collect(),
        constant: 0,
    };
    let causes = LinearExpr {
        terms: ordered
            .iter()
            .map(|v| (1, indicators[*v].c3 as usize - 1))
            .collect(),
        constant: 0,
    };
    Ok(WhyProgram {
        program: IlpProgram {
            name: format!("{}_why", model.name()),
            vars,
            constraints,
            objectives: vec![(Sense::Maximize, normals), (Sense::Minimize, causes)],
        },
        cnf,
        indicators,
    })
}

/// Above this size, clause-shaped programs are optimized through the SAT
/// core instead of plain branch-and-bound.
const BNB_VAR_LIMIT: usize = 40;

pub fn solve_ilp(program: &IlpProgram) -> IlpResult {
    solve_ilp_with_deadline(program, None).expect("no deadline given")
}

pub fn solve_ilp_with_deadline(
    program: &IlpProgram,
    deadline: Option<Instant>,
) -> Result<IlpResult> {
    Ok(solve_ilp_stats(program, deadline)?.0)
}

pub fn solve_ilp_stats(
    program: &IlpProgram,
    deadline: Option<Instant>,
) -> Result<(IlpResult, IlpStats)> {
    let (result, stats) = if program.vars.len() > BNB_VAR_LIMIT {
        match satback::try_solve(program, deadline) {
            Some(outcome) => outcome?,
            None => bnb::solve(program, deadline)?,
        }
    } else {
        bnb::solve(program, deadline)?
    };
    if result.status == IlpStatus::Opt {
        debug_assert!(program.feasible(&result.assignment));
        let recomputed: Vec<i64> = program
            .objectives
            .iter()
            .map(|(_, e)| e.eval(&result.assignment))
            .collect();
        assert_eq!(
            recomputed, result.objective_values,
            "objective values must match the reported assignment"
        );
    }
    Ok((result, stats))
}

// ── CPLEX LP text export ──────────────────────────────────────────────

fn write_terms(terms: &[(i64, usize)], vars: &[IlpVar], out: &mut String) {
    for (i, (coef, var)) in terms.iter().enumerate() {
        let name = &vars[*var].name;
        let magnitude = coef.abs();
        if i == 0 {
            if *coef < 0 {
                out.push_str("- ");
            }
        } else if *coef < 0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        if magnitude != 1 {
            out.push_str(&format!("{magnitude} "));
        }
        out.push_str(name);
    }
}

fn lp_stage_body(
    program: &IlpProgram,
    stage: usize,
    pin: Option<(&LinearExpr, i64)>,
) -> String {
    let (sense, objective) = &program.objectives[stage];
    let mut out = String::new();
    out.push_str(&format!(
        "\\ {} stage {} of {}\n",
        program.name,
        stage + 1,
        program.objectives.len()
    ));
    out.push_str(match sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj: ");
    write_terms(&objective.terms, &program.vars, &mut out);
    if objective.constant != 0 {
        out.push_str(&format!(" + {}", objective.constant));
    }
    out.push('\n');
    out.push_str("Subject To\n");
    for (i, c) in program.constraints.iter().enumerate() {
        out.push_str(&format!(" c{i}: "));
        write_terms(&c.terms, &program.vars, &mut out);
        let op = match c.cmp {
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
        };
        out.push_str(&format!(" {op} {}\n", c.rhs));
    }
    if let Some((expr, value)) = pin {
        out.push_str(" pin_obj1: ");
        write_terms(&expr.terms, &program.vars, &mut out);
        out.push_str(&format!(" = {}\n", value - expr.constant));
    }
    let generals: Vec<&IlpVar> = program.vars.iter().filter(|v| !v.is_binary()).collect();
    if !generals.is_empty() {
        out.push_str("Bounds\n");
        for v in &generals {
            out.push_str(&format!(" {} <= {} <= {}\n", v.lower, v.name, v.upper));
        }
    }
    out.push_str("Binaries\n");
    let mut line_len = 0usize;
    for v in program.vars.iter().filter(|v| v.is_binary()) {
        if line_len == 0 {
            out.push(' ');
        } else if line_len + v.name.len() + 1 > 72 {
            out.push_str("\n ");
            line_len = 0;
        } else {
            out.push(' ');
        }
        out.push_str(&v.name);
        line_len += v.name.len() + 1;
    }
    out.push('\n');
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for v in &generals {
            out.push_str(&format!(" {}\n", v.name));
        }
    }
    out.push_str("End\n");
    out
}

/// Renders the program in CPLEX LP format, one file body per lexicographic
/// stage (suffixes `.stage1.lp`, `.stage2.lp`). The second stage pins the
/// first objective at its optimum, which is computed with the embedded
/// solver; an infeasible first stage yields a comment instead of a pin.
pub fn write_lp(program: &IlpProgram) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    files.push(("stage1.lp".to_string(), lp_stage_body(program, 0, None)));
    if program.objectives.len() > 1 {
        let stage1 = IlpProgram {
            objectives: vec![program.objectives[0].clone()],
            ..program.clone()
        };
        let result = solve_ilp_with_deadline(&stage1, None)?;
        let body = match result.status {
            IlpStatus::Opt => lp_stage_body(
                program,
                1,
                Some((&program.objectives[0].1, result.objective_values[0])),
            ),
            IlpStatus::Infeasible => {
                let mut body = lp_stage_body(program, 1, None);
                body.insert_str(0, "\\ stage 1 infeasible; no pin constraint\n");
                body
            }
        };
        files.push(("stage2.lp".to_string(), body));
    }
    Ok(files)
}
