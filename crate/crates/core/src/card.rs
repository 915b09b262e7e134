//! Sequential-counter cardinality constraints over literals.
//!
//! `add_at_most_k` appends the Sinz-style counter: register `s[i][j]`
//! means "at least j of the first i+1 literals are true". Auxiliary
//! variables are allocated column by column, so the encoding is
//! deterministic for identical inputs.

use crate::cnf::{CnfFormula, Literal};

/// Constrains at most `k` of `lits` to be true.
pub fn add_at_most_k(cnf: &mut CnfFormula, lits: &[Literal], k: usize) {
    let n = lits.len();
    if k >= n {
        return;
    }
    if k == 0 {
        for &l in lits {
            cnf.push(vec![l.negate()]);
        }
        return;
    }
    // regs[i][j]: counter register after literal i (i in 0..n-1, j in 0..k).
    let mut regs: Vec<Vec<Literal>> = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        let column: Vec<Literal> = (0..k).map(|_| Literal::pos(cnf.fresh_aux())).collect();
        regs.push(column);
    }
    // First literal seeds the counter.
    cnf.push(vec![lits[0].negate(), regs[0][0]]);
    for &reg in &regs[0][1..k] {
        cnf.push(vec![reg.negate()]);
    }
    for i in 1..n - 1 {
        cnf.push(vec![lits[i].negate(), regs[i][0]]);
        cnf.push(vec![regs[i - 1][0].negate(), regs[i][0]]);
        for j in 1..k {
            cnf.push(vec![lits[i].negate(), regs[i - 1][j - 1].negate(), regs[i][j]]);
            cnf.push(vec![regs[i - 1][j].negate(), regs[i][j]]);
        }
        cnf.push(vec![lits[i].negate(), regs[i - 1][k - 1].negate()]);
    }
    cnf.push(vec![lits[n - 1].negate(), regs[n - 2][k - 1].negate()]);
}

/// Constrains at least `k` of `lits` to be true.
pub fn add_at_least_k(cnf: &mut CnfFormula, lits: &[Literal], k: usize) {
    if k == 0 {
        return;
    }
    let n = lits.len();
    if k > n {
        cnf.push_contradiction();
        return;
    }
    if k == 1 {
        cnf.push(lits.to_vec());
        return;
    }
    // At least k of lits  <=>  at most n-k of their negations.
    let negated: Vec<Literal> = lits.iter().map(|l| l.negate()).collect();
    add_at_most_k(cnf, &negated, n - k);
}

/// Constrains exactly `k` of `lits` to be true.
pub fn add_exactly_k(cnf: &mut CnfFormula, lits: &[Literal], k: usize) {
    add_at_most_k(cnf, lits, k);
    add_at_least_k(cnf, lits, k);
}
