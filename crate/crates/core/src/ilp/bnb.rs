//! Depth-first branch-and-bound over bounded integer domains.
//!
//! Each node tightens variable bounds to a fixpoint against every
//! constraint, prunes on the optimistic objective bound against the
//! incumbent, and branches on the first unfixed variable in declaration
//! order, lowest value first. The first optimum found is kept, so results
//! are deterministic.

use std::time::Instant;

use crate::error::{Error, Result};

use super::{
    Cmp, IlpProgram, IlpResult, IlpStats, IlpStatus, LinearConstraint, LinearExpr, Sense,
};

pub(super) fn solve(
    program: &IlpProgram,
    deadline: Option<Instant>,
) -> Result<(IlpResult, IlpStats)> {
    let mut stats = IlpStats::default();
    let mut pins: Vec<LinearConstraint> = Vec::new();
    let mut values = Vec::new();
    let mut assignment: Option<Vec<i64>> = None;

    let stages: Vec<(Sense, LinearExpr)> = if program.objectives.is_empty() {
        vec![(Sense::Minimize, LinearExpr::default())]
    } else {
        program.objectives.clone()
    };

    for (sense, expr) in &stages {
        match optimize(program, &pins, *sense, expr, deadline, &mut stats.nodes)? {
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
            Some((value, solution)) => {
                // Pin the stage optimum before optimizing the next one.
                pins.push(LinearConstraint {
                    terms: expr.terms.clone(),
                    cmp: Cmp::Eq,
                    rhs: value - expr.constant,
                });
                values.push(value);
                assignment = Some(solution);
            }
        }
    }

    let assignment = assignment.expect("some stage ran");
    if program.objectives.is_empty() {
        values.clear();
    }
    Ok((
        IlpResult {
            status: IlpStatus::Opt,
            objective_values: values,
            assignment,
        },
        stats,
    ))
}

struct Search<'a> {
    constraints: Vec<&'a LinearConstraint>,
    /// Objective in minimization form.
    obj: Vec<(i64, usize)>,
    incumbent: Option<(i64, Vec<i64>)>,
    nodes: u64,
    deadline: Option<Instant>,
}

fn optimize(
    program: &IlpProgram,
    pins: &[LinearConstraint],
    sense: Sense,
    expr: &LinearExpr,
    deadline: Option<Instant>,
    node_counter: &mut u64,
) -> Result<Option<(i64, Vec<i64>)>> {
    let obj: Vec<(i64, usize)> = match sense {
        Sense::Minimize => expr.terms.clone(),
        Sense::Maximize => expr.terms.iter().map(|(c, v)| (-c, *v)).collect(),
    };
    let mut search = Search {
        constraints: program.constraints.iter().chain(pins.iter()).collect(),
        obj,
        incumbent: None,
        nodes: 0,
        deadline,
    };
    let mut domains: Vec<(i64, i64)> = program.vars.iter().map(|v| (v.lower, v.upper)).collect();
    if propagate(&search.constraints, &mut domains) {
        search.dfs(&mut domains)?;
    }
    *node_counter += search.nodes;
    Ok(search.incumbent.map(|(internal, solution)| {
        let external = match sense {
            Sense::Minimize => internal + expr.constant,
            Sense::Maximize => -internal + expr.constant,
        };
        (external, solution)
    }))
}

impl<'a> Search<'a> {
    fn dfs(&mut self, domains: &mut [(i64, i64)]) -> Result<()> {
        self.nodes += 1;
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                return Err(Error::Timeout);
            }
        }

        // Optimistic bound: anything at or above the incumbent is pruned,
        // keeping the first optimum found.
        if let Some((best, _)) = &self.incumbent {
            let optimistic: i64 = self
                .obj
                .iter()
                .map(|(c, v)| if *c > 0 { c * domains[*v].0 } else { c * domains[*v].1 })
                .sum();
            if optimistic >= *best {
                return Ok(());
            }
        }

        match domains.iter().position(|(l, u)| l < u) {
            None => {
                let solution: Vec<i64> = domains.iter().map(|(l, _)| *l).collect();
                let value: i64 = self.obj.iter().map(|(c, v)| c * solution[*v]).sum();
                if self.incumbent.as_ref().is_none_or(|(best, _)| value < *best) {
                    self.incumbent = Some((value, solution));
                }
                Ok(())
            }
            Some(var) => {
                let (lower, upper) = domains[var];
                for value in lower..=upper {
                    let mut child = domains.to_vec();
                    child[var] = (value, value);
                    if propagate(&self.constraints, &mut child) {
                        self.dfs(&mut child)?;
                    }
                }
                Ok(())
            }
        }
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    if a >= 0 {
        (a + b - 1) / b
    } else {
        a / b
    }
}

#[cfg(test)]
fn div_floor(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    if a >= 0 {
        a / b
    } else {
        -((-a + b - 1) / b)
    }
}

/// Tightens every domain against every constraint until a fixpoint;
/// returns false on conflict.
fn propagate(constraints: &[&LinearConstraint], domains: &mut [(i64, i64)]) -> bool {
    loop {
        let mut changed = false;
        for c in constraints {
            let (ge, le) = match c.cmp {
                Cmp::Ge => (true, false),
                Cmp::Le => (false, true),
                Cmp::Eq => (true, true),
            };
            if ge && !tighten_ge(&c.terms, c.rhs, domains, &mut changed) {
                return false;
            }
            if le {
                // sum <= rhs  <=>  -sum >= -rhs
                let negated: Vec<(i64, usize)> = c.terms.iter().map(|(k, v)| (-k, *v)).collect();
                if !tighten_ge(&negated, -c.rhs, domains, &mut changed) {
                    return false;
                }
            }
        }
        if !changed {
            return true;
        }
    }
}

/// Propagation for `sum(terms) >= rhs`.
fn tighten_ge(
    terms: &[(i64, usize)],
    rhs: i64,
    domains: &mut [(i64, i64)],
    changed: &mut bool,
) -> bool {
    let max_act: i64 = terms
        .iter()
        .map(|(c, v)| if *c > 0 { c * domains[*v].1 } else { c * domains[*v].0 })
        .sum();
    if max_act < rhs {
        return false;
    }
    for (c, v) in terms {
        let (lower, upper) = domains[*v];
        let own_max = if *c > 0 { c * upper } else { c * lower };
        let needed = rhs - (max_act - own_max); // c * x >= needed
        if *c > 0 {
            let new_lower = div_ceil(needed, *c);
            if new_lower > lower {
                if new_lower > upper {
                    return false;
                }
                domains[*v].0 = new_lower;
                *changed = true;
            }
        } else {
            // c*x >= needed with c < 0  <=>  x <= floor(needed / c)
            let bound = div_floor_neg(needed, *c);
            if bound < upper {
                if bound < lower {
                    return false;
                }
                domains[*v].1 = bound;
                *changed = true;
            }
        }
    }
    true
}

/// floor(a / b) for b < 0, i.e. -ceil(a / -b).
fn div_floor_neg(a: i64, b: i64) -> i64 {
    debug_assert!(b < 0);
    -div_ceil(a, -b)
}
