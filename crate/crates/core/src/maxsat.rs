//! Weighted partial MaxSAT by linear UNSAT-to-SAT search.
//!
//! Every soft clause receives a fresh relaxation literal (weights above
//! one expand into duplicate relaxed copies, O(sum of weights)). The
//! engine then asks the SAT core whether `k` relaxations suffice for
//! k = 0, 1, 2, ...; the first satisfiable bound is the optimum, certified
//! by the unsatisfiable run at k-1.

use std::time::Instant;

use crate::card::add_at_most_k;
use crate::cnf::{parse_literal_line, Clause, CnfFormula, Literal};
use crate::error::{Error, Result};
use crate::sat::{solve_with_deadline, SatStats, SatStatus};

/// Hard clause set plus weighted soft clauses sharing its variable space.
#[derive(Debug, Clone)]
pub struct WeightedCnf {
    pub hard: CnfFormula,
    pub soft: Vec<(Clause, u64)>,
}

impl WeightedCnf {
    pub fn new(hard: CnfFormula, soft: Vec<(Clause, u64)>) -> Result<Self> {
        for (clause, weight) in &soft {
            if *weight == 0 {
                return Err(Error::Syntax("soft clause with zero weight".into()));
            }
            for lit in clause.literals() {
                if lit.var > hard.num_vars {
                    return Err(Error::UnregisteredIndex(lit.var));
                }
            }
        }
        Ok(WeightedCnf { hard, soft })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxSatStatus {
    Opt,
    UnsatHard,
}

#[derive(Debug, Clone)]
pub struct MaxSatResult {
    pub status: MaxSatStatus,
    /// Minimal total weight of falsified soft clauses, present iff `Opt`.
    pub cost: Option<u64>,
    /// Assignment over the hard formula's variables, present iff `Opt`.
    pub model: Option<Vec<bool>>,
    pub stats: SatStats,
}

pub fn solve_max_sat(input: &WeightedCnf) -> MaxSatResult {
    solve_max_sat_with_deadline(input, None).expect("no deadline given")
}

pub fn solve_max_sat_with_deadline(
    input: &WeightedCnf,
    deadline: Option<Instant>,
) -> Result<MaxSatResult> {
    let mut stats = SatStats::default();

    let hard_only = solve_with_deadline(&input.hard, deadline)?;
    stats.absorb(&hard_only.stats);
    if hard_only.status == SatStatus::Unsat {
        return Ok(MaxSatResult {
            status: MaxSatStatus::UnsatHard,
            cost: None,
            model: None,
            stats,
        });
    }

    // Relax: one fresh literal per weight unit of each soft clause.
    let mut relaxed = input.hard.clone();
    let mut relax_lits = Vec::new();
    for (clause, weight) in &input.soft {
        for _ in 0..*weight {
            let r = relaxed.fresh_aux();
            let mut lits = clause.literals().to_vec();
            lits.push(Literal::pos(r));
            relaxed.push(lits);
            relax_lits.push(Literal::pos(r));
        }
    }

    let total: u64 = relax_lits.len() as u64;
    for k in 0..=total {
        let mut probe = relaxed.clone();
        add_at_most_k(&mut probe, &relax_lits, k as usize);
        let result = solve_with_deadline(&probe, deadline)?;
        stats.absorb(&result.stats);
        if result.status == SatStatus::Sat {
            let mut model = result.model.expect("sat result carries model");
            model.truncate(input.hard.num_vars as usize + 1);
            let cost = recompute_cost(input, &model);
            assert_eq!(cost, k, "first satisfiable bound must equal the cost");
            return Ok(MaxSatResult {
                status: MaxSatStatus::Opt,
                cost: Some(cost),
                model: Some(model),
                stats,
            });
        }
    }
    unreachable!("relaxing every soft clause reduces to the hard formula");
}

/// Total weight of soft clauses falsified by `model`.
pub fn recompute_cost(input: &WeightedCnf, model: &[bool]) -> u64 {
    input
        .soft
        .iter()
        .filter(|(clause, _)| !clause.satisfied_by(model))
        .map(|(_, w)| w)
        .sum()
}

/// Reads the pre-2022 WCNF format: `p wcnf <vars> <clauses> <top>`,
/// clauses carrying weight `top` are hard.
pub fn parse_wcnf(text: &str) -> Result<WeightedCnf> {
    let mut header: Option<(u32, u64)> = None;
    let mut hard = CnfFormula::default();
    let mut soft = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "wcnf" {
                return Err(Error::Syntax(format!("bad WCNF header `{line}`")));
            }
            let vars: u32 = fields[1]
                .parse()
                .map_err(|_| Error::Syntax(format!("bad variable count in `{line}`")))?;
            let top: u64 = fields[3]
                .parse()
                .map_err(|_| Error::Syntax(format!("bad top weight in `{line}`")))?;
            hard.num_vars = vars;
            header = Some((vars, top));
            continue;
        }
        let (_, top) = header.ok_or_else(|| Error::Syntax("clause before WCNF header".into()))?;
        let mut parts = line.splitn(2, char::is_whitespace);
        let weight: u64 = parts
            .next()
            .and_then(|w| w.parse().ok())
            .ok_or_else(|| Error::Syntax(format!("bad weight in `{line}`")))?;
        let lits = parse_literal_line(parts.next().unwrap_or(""))?;
        if lits.is_empty() {
            return Err(Error::Syntax("empty clause in WCNF input".into()));
        }
        if weight >= top {
            hard.push(lits);
        } else if let Some(clause) = Clause::new(lits) {
            soft.push((clause, weight));
        }
    }
    if header.is_none() {
        return Err(Error::Syntax("missing `p wcnf` header".into()));
    }
    WeightedCnf::new(hard, soft)
}
