//! Objective-bounding optimization through the CDCL core, used for large
//! programs whose rows are clause-shaped or narrow.
//!
//! Bounded integer variables defined by a single unit-coefficient equality
//! are substituted away; remaining rows become clauses, sequential-counter
//! cardinality constraints or (for support up to six variables) pointwise
//! blocking clauses. Each objective stage walks its literal-sum bound from
//! the optimistic side (mirroring the MaxSAT loop): the first satisfiable
//! bound is the optimum, certified by the unsatisfiable probe one step
//! better. Tight bounds propagate strongly, and the causal programs have
//! their optima near the optimistic end by construction.

use std::time::Instant;

use crate::card::{add_at_least_k, add_at_most_k, add_exactly_k};
use crate::cnf::{CnfFormula, Literal};
use crate::error::Result;
use crate::sat::solve_with_deadline;

use super::{Cmp, IlpProgram, IlpResult, IlpStats, IlpStatus, Sense};

/// A bounded integer variable eliminated by substitution:
/// `var = (rhs - sum(terms)) / coef` with `coef` in `{-1, 1}`.
struct Eliminated {
    var: usize,
    coef: i64,
    rhs: i64,
    terms: Vec<(i64, usize)>,
}

struct Plan {
    base: CnfFormula,
    eliminated: Vec<Eliminated>,
    /// Per objective stage: literal list and constant offset such that the
    /// objective value equals `offset + |true literals|`.
    stages: Vec<(Sense, Vec<Literal>, i64)>,
}

/// Attempts the SAT route; `None` means the program shape is not covered
/// and the caller should fall back to branch-and-bound.
pub(super) fn try_solve(
    program: &IlpProgram,
    deadline: Option<Instant>,
) -> Option<Result<(IlpResult, IlpStats)>> {
    let plan = build_plan(program)?;
    Some(run(program, plan, deadline))
}

fn cnf_index(var: usize) -> u32 {
    var as u32 + 1
}

fn build_plan(program: &IlpProgram) -> Option<Plan> {
    let is_binary: Vec<bool> = program.vars.iter().map(|v| v.is_binary()).collect();

    // Every non-binary variable needs exactly one defining equality row
    // with unit coefficient and otherwise binary terms.
    let mut eliminated: Vec<Eliminated> = Vec::new();
    let mut defining_rows: Vec<usize> = Vec::new();
    for (idx, var) in program.vars.iter().enumerate() {
        if is_binary[idx] {
            continue;
        }
        let occurrences: Vec<usize> = program
            .constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.terms.iter().any(|(_, v)| *v == idx))
            .map(|(i, _)| i)
            .collect();
        if occurrences.len() != 1 {
            return None;
        }
        let row_idx = occurrences[0];
        let row = &program.constraints[row_idx];
        if row.cmp != Cmp::Eq {
            return None;
        }
        let (coef, _) = *row.terms.iter().find(|(_, v)| *v == idx)?;
        if coef.abs() != 1 {
            return None;
        }
        let terms: Vec<(i64, usize)> = row
            .terms
            .iter()
            .filter(|(_, v)| *v != idx)
            .copied()
            .collect();
        if terms.iter().any(|(_, v)| !is_binary[*v]) {
            return None;
        }
        eliminated.push(Eliminated {
            var: idx,
            coef,
            rhs: row.rhs,
            terms,
        });
        defining_rows.push(row_idx);
        let _ = var;
    }

    let mut base = CnfFormula {
        num_vars: program.vars.len() as u32,
        ..Default::default()
    };

    for (row_idx, row) in program.constraints.iter().enumerate() {
        if defining_rows.contains(&row_idx) {
            continue;
        }
        if row.terms.iter().any(|(_, v)| !is_binary[*v]) {
            return None;
        }
        if !encode_row(&mut base, &row.terms, row.cmp, row.rhs) {
            return None;
        }
    }

    // Bounds of an eliminated variable become cardinality rows over its
    // defining sum.
    for e in &eliminated {
        let (lower, upper) = (program.vars[e.var].lower, program.vars[e.var].upper);
        // coef=+1: var = rhs - sum  =>  rhs-upper <= sum <= rhs-lower
        // coef=-1: var = sum - rhs  =>  rhs+lower <= sum <= rhs+upper
        let (lo, hi) = if e.coef == 1 {
            (e.rhs - upper, e.rhs - lower)
        } else {
            (e.rhs + lower, e.rhs + upper)
        };
        if !encode_row(&mut base, &e.terms, Cmp::Ge, lo) {
            return None;
        }
        if !encode_row(&mut base, &e.terms, Cmp::Le, hi) {
            return None;
        }
    }

    // Objectives: substitute eliminated variables, combine like terms,
    // then require unit coefficients.
    let mut stages = Vec::new();
    for (sense, expr) in &program.objectives {
        let mut coefs: Vec<i64> = vec![0; program.vars.len()];
        let mut constant = expr.constant;
        for (c, v) in &expr.terms {
            if let Some(e) = eliminated.iter().find(|e| e.var == *v) {
                // c * var = c*coef*(rhs - sum)   [coef in {1,-1}]
                constant += c * e.coef * e.rhs;
                for (tc, tv) in &e.terms {
                    coefs[*tv] -= c * e.coef * tc;
                }
            } else {
                coefs[*v] += c;
            }
        }
        let mut lits = Vec::new();
        let mut offset = constant;
        for (v, &c) in coefs.iter().enumerate() {
            match c {
                0 => {}
                1 => lits.push(Literal::pos(cnf_index(v))),
                -1 => {
                    // -x = (1 - x) - 1
                    lits.push(Literal::neg(cnf_index(v)));
                    offset -= 1;
                }
                _ => return None,
            }
        }
        stages.push((*sense, lits, offset));
    }

    Some(Plan {
        base,
        eliminated,
        stages,
    })
}

/// Encodes one all-binary row; returns false when the shape is not
/// covered.
fn encode_row(cnf: &mut CnfFormula, terms: &[(i64, usize)], cmp: Cmp, rhs: i64) -> bool {
    if terms.iter().all(|(c, _)| c.abs() == 1) {
        // Normalize to literal counting: sum of satisfied literals cmp k,
        // where negative coefficients contribute negated literals.
        let mut k = rhs;
        let lits: Vec<Literal> = terms
            .iter()
            .map(|(c, v)| {
                if *c > 0 {
                    Literal::pos(cnf_index(*v))
                } else {
                    k += 1;
                    Literal::neg(cnf_index(*v))
                }
            })
            .collect();
        let n = lits.len() as i64;
        let (ge, le) = match cmp {
            Cmp::Ge => (true, false),
            Cmp::Le => (false, true),
            Cmp::Eq => (true, true),
        };
        if ge {
            if k > n {
                cnf.push_contradiction();
            } else if k > 0 {
                add_at_least_k(cnf, &lits, k as usize);
            }
        }
        if le {
            if k < 0 {
                cnf.push_contradiction();
            } else if k < n {
                add_at_most_k(cnf, &lits, k as usize);
            }
        }
        return true;
    }

    // Narrow rows with arbitrary coefficients: block violating points.
    let mut support: Vec<usize> = terms.iter().map(|(_, v)| *v).collect();
    support.sort_unstable();
    support.dedup();
    if support.len() > 6 {
        return false;
    }
    for point in 0..(1u64 << support.len()) {
        let value_of = |v: usize| -> i64 {
            let pos = support.binary_search(&v).expect("support member");
            ((point >> pos) & 1) as i64
        };
        let lhs: i64 = terms.iter().map(|(c, v)| c * value_of(*v)).sum();
        let ok = match cmp {
            Cmp::Le => lhs <= rhs,
            Cmp::Eq => lhs == rhs,
            Cmp::Ge => lhs >= rhs,
        };
        if !ok {
            let blocking: Vec<Literal> = support
                .iter()
                .map(|&v| Literal {
                    var: cnf_index(v),
                    negated: value_of(v) == 1,
                })
                .collect();
            cnf.push(blocking);
        }
    }
    true
}

fn count_true(lits: &[Literal], model: &[bool]) -> i64 {
    lits.iter().filter(|l| l.satisfied_by(model)).count() as i64
}

fn run(
    program: &IlpProgram,
    plan: Plan,
    deadline: Option<Instant>,
) -> Result<(IlpResult, IlpStats)> {
    let mut stats = IlpStats::default();
    let mut cnf = plan.base.clone();
    let mut final_model: Option<Vec<bool>> = None;
    let mut values = Vec::new();

    for (stage_idx, (sense, lits, offset)) in plan.stages.iter().enumerate() {
        let n = lits.len();
        // Bounds from the optimistic side: for minimization at-most
        // 0, 1, 2, ...; for maximization at-least n, n-1, .... The first
        // satisfiable probe is optimal, certified by the probe before it;
        // the last probe carries no counter, so exhausting the range
        // proves infeasibility.
        let bounds: Vec<usize> = match sense {
            Sense::Minimize => (0..=n).collect(),
            Sense::Maximize => (0..=n).rev().collect(),
        };
        let mut best: Option<(usize, Vec<bool>)> = None;
        for bound in bounds {
            let mut probe = cnf.clone();
            match sense {
                Sense::Minimize => add_at_most_k(&mut probe, lits, bound),
                Sense::Maximize => add_at_least_k(&mut probe, lits, bound),
            }
            let r = solve_with_deadline(&probe, deadline)?;
            stats.sat.absorb(&r.stats);
            if let Some(model) = r.model {
                let count = count_true(lits, &model) as usize;
                debug_assert_eq!(count, bound.min(n), "first satisfiable bound is exact");
                best = Some((count, model));
                break;
            }
        }
        let Some((best_count, best_model)) = best else {
            debug_assert_eq!(stage_idx, 0, "pinned stages stay satisfiable");
            return Ok((
                IlpResult {
                    status: IlpStatus::Infeasible,
                    objective_values: Vec::new(),
                    assignment: Vec::new(),
                },
                stats,
            ));
        };

        values.push(offset + best_count as i64);
        // Pin this stage's optimum for the next one.
        add_exactly_k(&mut cnf, lits, best_count);
        final_model = Some(best_model);
    }

    let model = match final_model {
        Some(m) => m,
        None => {
            // No objectives: plain feasibility.
            let r = solve_with_deadline(&cnf, deadline)?;
            stats.sat.absorb(&r.stats);
            match r.model {
                Some(m) => m,
                None => {
                    return Ok((
                        IlpResult {
                            status: IlpStatus::Infeasible,
                            objective_values: Vec::new(),
                            assignment: Vec::new(),
                        },
                        stats,
                    ))
                }
            }
        }
    };

    // Reconstruct the full assignment: binaries from the model,
    // eliminated integers from their defining rows.
    let mut assignment: Vec<i64> = (0..program.vars.len())
        .map(|v| model.get(cnf_index(v) as usize).copied().unwrap_or(false) as i64)
        .collect();
    for e in &plan.eliminated {
        let sum: i64 = e.terms.iter().map(|(c, v)| c * assignment[*v]).sum();
        assignment[e.var] = e.coef * (e.rhs - sum);
    }
    assert!(
        program.feasible(&assignment),
        "reconstructed assignment violates the program"
    );
    Ok((
        IlpResult {
            status: IlpStatus::Opt,
            objective_values: values,
            assignment,
        },
        stats,
    ))
}
