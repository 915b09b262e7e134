//! Conflict-driven clause-learning SAT solver with two-watched-literal
//! propagation, plus projected model enumeration via blocking clauses.
//!
//! The search is fully deterministic: decisions pick the lowest-index
//! unassigned variable and assign false first, there are no restarts, and
//! learned clauses come from standard first-UIP analysis. Identical inputs
//! therefore yield identical models, which downstream code relies on for
//! reproducible "first optimum" semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::cnf::{CnfFormula, Literal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SatStats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
}

impl SatStats {
    pub fn absorb(&mut self, other: &SatStats) {
        self.decisions += other.decisions;
        self.propagations += other.propagations;
        self.conflicts += other.conflicts;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatStatus {
    Sat,
    Unsat,
}

#[derive(Debug, Clone)]
pub struct SatResult {
    pub status: SatStatus,
    /// 1-based total assignment, present iff status is `Sat`; index 0 is
    /// unused padding.
    pub model: Option<Vec<bool>>,
    pub stats: SatStats,
}

/// Decides satisfiability of `cnf`.
pub fn solve(cnf: &CnfFormula) -> SatResult {
    solve_with_deadline(cnf, None).expect("no deadline given")
}

/// Like [`solve`] but aborts with [`Error::Timeout`] once `deadline` has
/// passed (checked between conflicts).
pub fn solve_with_deadline(cnf: &CnfFormula, deadline: Option<Instant>) -> Result<SatResult> {
    let mut solver = Solver::new(cnf);
    solver.deadline = deadline;
    solver.run(cnf)
}

const UNDEF: i8 = -1;

/// Literal code: `var << 1 | sign`, sign 1 for negated. Variables are
/// 1-based, so codes start at 2.
type Code = u32;

fn code(lit: Literal) -> Code {
    lit.var << 1 | lit.negated as u32
}

fn code_var(c: Code) -> u32 {
    c >> 1
}

fn code_negated(c: Code) -> bool {
    c & 1 == 1
}

fn lit_value(assign: &[i8], c: Code) -> i8 {
    let a = assign[code_var(c) as usize];
    if a == UNDEF {
        UNDEF
    } else {
        (a == (!code_negated(c)) as i8) as i8
    }
}

struct Solver {
    num_vars: usize,
    /// Clauses of length >= 2; positions 0 and 1 are the watched literals.
    clauses: Vec<Vec<Code>>,
    watches: Vec<Vec<u32>>,
    assign: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<i32>,
    trail: Vec<Code>,
    trail_lim: Vec<usize>,
    qhead: usize,
    /// Units discovered at parse time, applied at level 0.
    root_units: Vec<Code>,
    search_from: usize,
    stats: SatStats,
    deadline: Option<Instant>,
}

impl Solver {
    fn new(cnf: &CnfFormula) -> Solver {
        let n = cnf.num_vars as usize;
        let mut solver = Solver {
            num_vars: n,
            clauses: Vec::with_capacity(cnf.clauses.len()),
            watches: vec![Vec::new(); 2 * n + 2],
            assign: vec![UNDEF; n + 1],
            level: vec![0; n + 1],
            reason: vec![-1; n + 1],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            root_units: Vec::new(),
            search_from: 1,
            stats: SatStats::default(),
            deadline: None,
        };
        for clause in &cnf.clauses {
            let lits: Vec<Code> = clause.literals().iter().map(|l| code(*l)).collect();
            if lits.len() == 1 {
                solver.root_units.push(lits[0]);
            } else {
                solver.attach(lits);
            }
        }
        solver
    }

    fn attach(&mut self, lits: Vec<Code>) {
        let idx = self.clauses.len() as u32;
        self.watches[lits[0] as usize].push(idx);
        self.watches[lits[1] as usize].push(idx);
        self.clauses.push(lits);
    }

    fn value(&self, c: Code) -> i8 {
        lit_value(&self.assign, c)
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, lit: Code, reason: i32) {
        let v = code_var(lit) as usize;
        debug_assert_eq!(self.assign[v], UNDEF);
        self.assign[v] = !code_negated(lit) as i8;
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
        self.stats.propagations += 1;
    }

    /// Returns the index of a conflicting clause, or `None`.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p ^ 1;
            let mut i = 0;
            let mut j = 0;
            let mut watch_list = std::mem::take(&mut self.watches[false_lit as usize]);
            let mut conflict = None;
            while i < watch_list.len() {
                let ci = watch_list[i];
                i += 1;
                enum Outcome {
                    Keep,
                    Moved(Code),
                    Unit(Code),
                    Conflict,
                }
                let outcome = {
                    let clause = &mut self.clauses[ci as usize];
                    if clause[0] == false_lit {
                        clause.swap(0, 1);
                    }
                    debug_assert_eq!(clause[1], false_lit);
                    let first = clause[0];
                    if lit_value(&self.assign, first) == 1 {
                        Outcome::Keep
                    } else {
                        let mut moved = None;
                        for k in 2..clause.len() {
                            if lit_value(&self.assign, clause[k]) != 0 {
                                clause.swap(1, k);
                                moved = Some(clause[1]);
                                break;
                            }
                        }
                        match moved {
                            Some(new_watch) => Outcome::Moved(new_watch),
                            None if lit_value(&self.assign, first) == 0 => Outcome::Conflict,
                            None => Outcome::Unit(first),
                        }
                    }
                };
                match outcome {
                    Outcome::Keep => {
                        watch_list[j] = ci;
                        j += 1;
                    }
                    Outcome::Moved(new_watch) => {
                        self.watches[new_watch as usize].push(ci);
                    }
                    Outcome::Unit(first) => {
                        watch_list[j] = ci;
                        j += 1;
                        self.enqueue(first, ci as i32);
                    }
                    Outcome::Conflict => {
                        // Keep this and the remaining watches untouched.
                        watch_list[j] = ci;
                        j += 1;
                        while i < watch_list.len() {
                            watch_list[j] = watch_list[i];
                            j += 1;
                            i += 1;
                        }
                        conflict = Some(ci);
                    }
                }
            }
            watch_list.truncate(j);
            self.watches[false_lit as usize] = watch_list;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    /// First-UIP conflict analysis. Returns the learned clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, conflict: u32) -> (Vec<Code>, u32) {
        let current = self.decision_level();
        let mut seen = vec![false; self.num_vars + 1];
        let mut learned: Vec<Code> = vec![0]; // slot 0 for the UIP literal
        let mut counter = 0usize;
        let mut p: Option<Code> = None;
        let mut idx = self.trail.len();
        let mut clause_idx = conflict;

        loop {
            for &q in &self.clauses[clause_idx as usize] {
                if Some(q) == p.map(|x| x ^ 1) || Some(q) == p {
                    continue;
                }
                let v = code_var(q) as usize;
                if seen[v] || self.level[v] == 0 {
                    continue;
                }
                seen[v] = true;
                if self.level[v] == current {
                    counter += 1;
                } else {
                    learned.push(q);
                }
            }
            // Walk the trail back to the next marked literal.
            loop {
                idx -= 1;
                if seen[code_var(self.trail[idx]) as usize] {
                    break;
                }
            }
            let lit = self.trail[idx];
            let v = code_var(lit) as usize;
            counter -= 1;
            if counter == 0 {
                learned[0] = lit ^ 1;
                break;
            }
            seen[v] = false;
            p = Some(lit);
            debug_assert!(self.reason[v] >= 0);
            clause_idx = self.reason[v] as u32;
        }

        let backjump = learned[1..]
            .iter()
            .map(|&q| self.level[code_var(q) as usize])
            .max()
            .unwrap_or(0);
        // Move a literal of the backjump level into the second watch slot.
        if learned.len() > 1 {
            let pos = learned[1..]
                .iter()
                .position(|&q| self.level[code_var(q) as usize] == backjump)
                .expect("backjump level literal present")
                + 1;
            learned.swap(1, pos);
        }
        (learned, backjump)
    }

    fn backjump(&mut self, target: u32) {
        while self.decision_level() > target {
            let lim = self.trail_lim.pop().expect("level to undo");
            for &lit in &self.trail[lim..] {
                let v = code_var(lit) as usize;
                self.assign[v] = UNDEF;
                self.reason[v] = -1;
                if v < self.search_from {
                    self.search_from = v;
                }
            }
            self.trail.truncate(lim);
        }
        self.qhead = self.trail.len();
    }

    fn next_branch_var(&mut self) -> Option<u32> {
        while self.search_from <= self.num_vars {
            if self.assign[self.search_from] == UNDEF {
                return Some(self.search_from as u32);
            }
            self.search_from += 1;
        }
        None
    }

    fn run(&mut self, cnf: &CnfFormula) -> Result<SatResult> {
        let unsat = |stats: SatStats| SatResult {
            status: SatStatus::Unsat,
            model: None,
            stats,
        };

        for unit in std::mem::take(&mut self.root_units) {
            match self.value(unit) {
                1 => {}
                0 => return Ok(unsat(self.stats)),
                _ => self.enqueue(unit, -1),
            }
        }

        loop {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    return Err(Error::Timeout);
                }
            }
            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                if self.decision_level() == 0 {
                    return Ok(unsat(self.stats));
                }
                let (learned, backjump) = self.analyze(conflict);
                self.backjump(backjump);
                if learned.len() == 1 {
                    debug_assert_eq!(self.decision_level(), 0);
                    match self.value(learned[0]) {
                        1 => {}
                        0 => return Ok(unsat(self.stats)),
                        _ => self.enqueue(learned[0], -1),
                    }
                } else {
                    let asserting = learned[0];
                    let idx = self.clauses.len() as i32;
                    self.attach(learned);
                    self.enqueue(asserting, idx);
                }
            } else {
                match self.next_branch_var() {
                    None => {
                        let mut model = vec![false; self.num_vars + 1];
                        for (slot, value) in model.iter_mut().zip(&self.assign) {
                            *slot = *value == 1;
                        }
                        assert!(
                            cnf.satisfied_by(&model),
                            "solver model fails self-check"
                        );
                        return Ok(SatResult {
                            status: SatStatus::Sat,
                            model: Some(model),
                            stats: self.stats,
                        });
                    }
                    Some(v) => {
                        self.stats.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        // Phase: false first.
                        self.enqueue(v << 1 | 1, -1);
                    }
                }
            }
        }
    }
}

/// Enumerates the distinct projections of all models of `cnf` onto
/// `projection`, by re-solving under blocking clauses over the projected
/// variables. Stops after `limit` models when a limit is given.
pub fn enumerate_models(
    cnf: &CnfFormula,
    projection: &BTreeSet<u32>,
    limit: Option<usize>,
) -> Vec<BTreeMap<u32, bool>> {
    enumerate_models_with_deadline(cnf, projection, limit, None).expect("no deadline given")
}

pub fn enumerate_models_with_deadline(
    cnf: &CnfFormula,
    projection: &BTreeSet<u32>,
    limit: Option<usize>,
    deadline: Option<Instant>,
) -> Result<Vec<BTreeMap<u32, bool>>> {
    debug_assert!(projection.iter().all(|&v| v >= 1 && v <= cnf.num_vars));
    let mut working = cnf.clone();
    let mut found = Vec::new();
    loop {
        if Some(found.len()) == limit {
            return Ok(found);
        }
        let result = solve_with_deadline(&working, deadline)?;
        let model = match result.model {
            Some(m) => m,
            None => return Ok(found),
        };
        let projected: BTreeMap<u32, bool> =
            projection.iter().map(|&v| (v, model[v as usize])).collect();
        found.push(projected);
        if projection.is_empty() {
            return Ok(found);
        }
        let blocking: Vec<Literal> = projection
            .iter()
            .map(|&v| Literal {
                var: v,
                negated: model[v as usize],
            })
            .collect();
        working.push(blocking);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::CnfFormula;
    use crate::rng::SplitMix64;

    fn cnf_of(num_vars: u32, clauses: &[&[i64]]) -> CnfFormula {
        let mut cnf = CnfFormula {
            num_vars,
            ..Default::default()
        };
        for lits in clauses {
            cnf.push(
                lits.iter()
                    .map(|&l| Literal {
                        var: l.unsigned_abs() as u32,
                        negated: l < 0,
                    })
                    .collect(),
            );
        }
        cnf
    }

    #[test]
    fn unit_propagation_forces_model() {
        let cnf = cnf_of(2, &[&[1, 2], &[-1]]);
        let result = solve(&cnf);
        assert_eq!(result.status, SatStatus::Sat);
        let model = result.model.unwrap();
        assert!(!model[1]);
        assert!(model[2]);
    }

    #[test]
    fn contradicting_units_are_unsat() {
        let cnf = cnf_of(1, &[&[1], &[-1]]);
        assert_eq!(solve(&cnf).status, SatStatus::Unsat);
    }

    #[test]
    fn empty_formula_is_sat_all_false() {
        let cnf = cnf_of(3, &[]);
        let model = solve(&cnf).model.unwrap();
        assert_eq!(model[1..], [false, false, false]);
    }

    #[test]
    fn phase_and_order_are_deterministic() {
        // x1 free, clause forces x2 | x3; false-first on x1, x2 makes x3 true.
        let cnf = cnf_of(3, &[&[2, 3]]);
        let model = solve(&cnf).model.unwrap();
        assert_eq!(model[1..], [false, false, true]);
    }

    #[test]
    fn enumerates_projected_models() {
        let cnf = cnf_of(2, &[&[1, 2]]);
        let projection: BTreeSet<u32> = [1, 2].into_iter().collect();
        let models = enumerate_models(&cnf, &projection, None);
        assert_eq!(models.len(), 3);

        let unsat = cnf_of(1, &[&[1], &[-1]]);
        assert!(enumerate_models(&unsat, &projection_of(&[1]), None).is_empty());
    }

    fn projection_of(vars: &[u32]) -> BTreeSet<u32> {
        vars.iter().copied().collect()
    }

    #[test]
    fn enumeration_respects_limit_and_projection() {
        let cnf = cnf_of(3, &[&[1, 2, 3]]);
        let models = enumerate_models(&cnf, &projection_of(&[1]), None);
        assert_eq!(models.len(), 2); // x1 true and x1 false both extendable
        let limited = enumerate_models(&cnf, &projection_of(&[1, 2, 3]), Some(4));
        assert_eq!(limited.len(), 4);
    }

    /// Truth-table satisfiability, bit-parallel over the low six
    /// variables: each u64 word covers 64 assignments at once.
    fn brute_force_sat(cnf: &CnfFormula) -> bool {
        const LOW_PATTERNS: [u64; 6] = [
            0xAAAA_AAAA_AAAA_AAAA,
            0xCCCC_CCCC_CCCC_CCCC,
            0xF0F0_F0F0_F0F0_F0F0,
            0xFF00_FF00_FF00_FF00,
            0xFFFF_0000_FFFF_0000,
            0xFFFF_FFFF_0000_0000,
        ];
        let n = cnf.num_vars;
        let low = n.min(6);
        let word_mask = if low == 6 { u64::MAX } else { (1u64 << (1u32 << low)) - 1 };
        let blocks = 1u64 << n.saturating_sub(6);
        for block in 0..blocks {
            let mut sat_mask = word_mask;
            for clause in &cnf.clauses {
                let mut clause_mask = 0u64;
                for lit in clause.literals() {
                    let pattern = if lit.var <= 6 {
                        LOW_PATTERNS[lit.var as usize - 1]
                    } else if (block >> (lit.var - 7)) & 1 == 1 {
                        u64::MAX
                    } else {
                        0
                    };
                    clause_mask |= if lit.negated { !pattern } else { pattern };
                }
                sat_mask &= clause_mask;
                if sat_mask == 0 {
                    break;
                }
            }
            if sat_mask != 0 {
                return true;
            }
        }
        false
    }

    #[test]
    fn agrees_with_truth_table_on_random_3cnf() {
        let mut rng = SplitMix64::new(0xDECADE);
        let mut sat_seen = 0;
        let mut unsat_seen = 0;
        for _ in 0..400 {
            let n = 3 + rng.next_below(10) as u32;
            let clause_count = (n as f64 * (2.0 + rng.next_below(30) as f64 / 10.0)) as usize;
            let mut cnf = CnfFormula {
                num_vars: n,
                ..Default::default()
            };
            for _ in 0..clause_count {
                let mut lits = Vec::new();
                for _ in 0..3 {
                    let v = 1 + rng.next_below(n as u64) as u32;
                    lits.push(Literal {
                        var: v,
                        negated: rng.next_bool(),
                    });
                }
                cnf.push(lits);
            }
            let expected = brute_force_sat(&cnf);
            let got = solve(&cnf);
            assert_eq!(got.status == SatStatus::Sat, expected);
            if expected {
                sat_seen += 1;
            } else {
                unsat_seen += 1;
            }
        }
        assert!(sat_seen > 20 && unsat_seen > 20, "corpus covers both outcomes");
    }

    #[test]
    fn enumeration_matches_truth_table_models() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..50 {
            let n = 2 + rng.next_below(5) as u32;
            let mut cnf = CnfFormula {
                num_vars: n,
                ..Default::default()
            };
            for _ in 0..(n * 2) {
                let width = 1 + rng.next_below(3);
                let mut lits = Vec::new();
                for _ in 0..width {
                    lits.push(Literal {
                        var: 1 + rng.next_below(n as u64) as u32,
                        negated: rng.next_bool(),
                    });
                }
                cnf.push(lits);
            }
            let projection: BTreeSet<u32> = (1..=n).collect();
            let mut expected = BTreeSet::new();
            for bits in 0..(1u64 << n) {
                let mut assign = vec![false; n as usize + 1];
                for i in 0..n {
                    assign[i as usize + 1] = bits & (1 << i) != 0;
                }
                if cnf.satisfied_by(&assign) {
                    expected.insert(
                        (1..=n)
                            .map(|v| (v, assign[v as usize]))
                            .collect::<BTreeMap<u32, bool>>(),
                    );
                }
            }
            let got: BTreeSet<BTreeMap<u32, bool>> =
                enumerate_models(&cnf, &projection, None).into_iter().collect();
            assert_eq!(got, expected);
        }
    }
}
