//! Exponential reference implementation of the actual-cause conditions,
//! used as ground truth in property tests. Enumeration order is size
//! ascending, then lexicographic by declaration order, so "first witness"
//! and minimum-cardinality extraction are deterministic. The cap on model
//! size is enforced, not advisory.

use std::collections::BTreeMap;

use crate::causality::{Responsibility, Witness};
use crate::encoder::CandidateCause;
use crate::error::{Error, Result};
use crate::model::{eval_expr, BoolExpr, CausalModel, Context, Intervention, VariableId};

pub const DEFAULT_CAP: usize = 16;

/// Variables with the values they take in the actual evaluation.
pub type CauseValues = Vec<(VariableId, bool)>;
/// A maximum-responsibility outcome: cause, contingency set, degree.
pub type MaxDrOutcome = (CauseValues, CauseValues, Responsibility);

fn check_cap(model: &CausalModel, cap: usize) -> Result<()> {
    let m = model.endogenous().len();
    if m > cap {
        return Err(Error::CapExceeded(m, cap));
    }
    Ok(())
}

/// Calls `f` on every k-subset of `0..n` in lexicographic order until it
/// returns `Some`.
pub(crate) fn for_each_combination<T>(
    n: usize,
    k: usize,
    mut f: impl FnMut(&[usize]) -> Option<T>,
) -> Option<T> {
    if k > n {
        return None;
    }
    let mut indices: Vec<usize> = (0..k).collect();
    loop {
        if let Some(hit) = f(&indices) {
            return Some(hit);
        }
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if indices[i] != i + n - k {
                break;
            }
            if i == 0 {
                return None;
            }
        }
        indices[i] += 1;
        for j in i + 1..k {
            indices[j] = indices[j - 1] + 1;
        }
    }
}

fn holds_after(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    overrides: BTreeMap<VariableId, bool>,
) -> bool {
    let iv = Intervention::new(model, overrides).expect("endogenous overrides");
    let world = model.evaluate_with_intervention(context, &iv);
    eval_expr(effect, &world).expect("effect over model variables")
}

/// Counterfactual dependence under the negated cause setting: searches all
/// contingency sets `W` (smallest first) freezing actual values, and
/// returns the first witness making the effect false.
pub fn oracle_ac2(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    cap: usize,
) -> Result<Option<Witness>> {
    check_cap(model, cap)?;
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
        let hit = for_each_combination(candidates.len(), size, |subset| {
            let mut overrides = x_prime.clone();
            let mut w = Vec::with_capacity(subset.len());
            for &i in subset {
                let v = candidates[i].clone();
                let value = actual.get(&v).expect("actual is total");
                overrides.insert(v.clone(), value);
                w.push((v, value));
            }
            if !holds_after(model, context, effect, overrides) {
                Some(w)
            } else {
                None
            }
        });
        if let Some(w) = hit {
            return Ok(Some(Witness {
                x_prime,
                w,
            }));
        }
    }
    Ok(None)
}

/// Like [`oracle_ac2`] but sweeping every setting of the cause variables
/// that differs from the actual one, not only the full negation. Used to
/// compare the two readings of the counterfactual setting.
pub fn oracle_ac2_full_sweep(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    cap: usize,
) -> Result<Option<Witness>> {
    check_cap(model, cap)?;
    let actual = model.evaluate(context);
    let ell = cause.len();
    let candidates: Vec<VariableId> = model
        .endogenous()
        .iter()
        .map(|(v, _)| v.clone())
        .filter(|v| !cause.contains(v))
        .collect();
    for size in 0..=candidates.len() {
        let hit = for_each_combination(candidates.len(), size, |subset| {
            // All settings differing from the actual one, flipping the
            // most variables first so the negation case stays primary.
            for flips in (1..(1u64 << ell)).rev() {
                let mut overrides = BTreeMap::new();
                let mut x_prime = BTreeMap::new();
                for (i, (v, value)) in cause.assignments().iter().enumerate() {
                    let flipped = flips & (1 << i) != 0;
                    let setting = if flipped { !*value } else { *value };
                    overrides.insert(v.clone(), setting);
                    x_prime.insert(v.clone(), setting);
                }
                let mut w = Vec::with_capacity(subset.len());
                for &i in subset {
                    let v = candidates[i].clone();
                    let value = actual.get(&v).expect("actual is total");
                    overrides.insert(v.clone(), value);
                    w.push((v, value));
                }
                if !holds_after(model, context, effect, overrides) {
                    return Some(Witness { x_prime, w });
                }
            }
            None
        });
        if let Some(witness) = hit {
            return Ok(Some(witness));
        }
    }
    Ok(None)
}

/// Minimality: no non-empty proper subset of the cause passes AC2.
pub fn oracle_ac3(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    cap: usize,
) -> Result<bool> {
    check_cap(model, cap)?;
    let ell = cause.len();
    for size in 1..ell {
        let found = for_each_combination(ell, size, |subset| {
            let sub = CandidateCause::new(
                subset
                    .iter()
                    .map(|&i| cause.assignments()[i].clone())
                    .collect(),
            )
            .expect("non-empty subset");
            match oracle_ac2(model, context, effect, &sub, cap) {
                Ok(Some(_)) => Some(()),
                _ => None,
            }
        });
        if found.is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Minimum-cardinality non-empty subset of the cause whose negation makes
/// the effect false while the rest of the candidate is frozen at its
/// actual values (part of the contingency set) along with some set of
/// non-candidate variables. Anchoring the complement is what makes the
/// subset size coincide with the optimal flip distance: a candidate
/// variable left to its equation may be dragged off its actual value by
/// the negated part, and such worlds count every flipped candidate.
pub fn oracle_min_cause_subset(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cause: &CandidateCause,
    cap: usize,
) -> Result<Option<(CauseValues, usize)>> {
    check_cap(model, cap)?;
    let actual = model.evaluate(context);
    let outside: Vec<VariableId> = model
        .endogenous()
        .iter()
        .map(|(v, _)| v.clone())
        .filter(|v| !cause.contains(v))
        .collect();
    let ell = cause.len();
    for size in 1..=ell {
        let found = for_each_combination(ell, size, |subset| {
            let mut overrides: BTreeMap<VariableId, bool> = BTreeMap::new();
            let mut assignments = Vec::with_capacity(size);
            for (i, (v, value)) in cause.assignments().iter().enumerate() {
                if subset.contains(&i) {
                    overrides.insert(v.clone(), !*value);
                    assignments.push((v.clone(), *value));
                } else {
                    overrides.insert(v.clone(), *value);
                }
            }
            for w_size in 0..=outside.len() {
                let hit = for_each_combination(outside.len(), w_size, |w_subset| {
                    let mut all = overrides.clone();
                    for &j in w_subset {
                        let v = outside[j].clone();
                        all.insert(v.clone(), actual.get(&v).expect("total"));
                    }
                    if !holds_after(model, context, effect, all) {
                        Some(())
                    } else {
                        None
                    }
                });
                if hit.is_some() {
                    return Some(assignments.clone());
                }
            }
            None
        });
        if let Some(assignments) = found {
            return Ok(Some((assignments, size)));
        }
    }
    Ok(None)
}

/// Cause with the maximum degree of responsibility: over all non-empty
/// sets of non-effect endogenous variables at their actual values and all
/// disjoint contingency sets (also outside the effect), the pair
/// minimizing `|X| + |W|`. Ties prefer smaller `|X|`, then lexicographic
/// order.
pub fn oracle_max_dr_cause(
    model: &CausalModel,
    context: &Context,
    effect: &BoolExpr,
    cap: usize,
) -> Result<Option<MaxDrOutcome>> {
    check_cap(model, cap)?;
    let actual = model.evaluate(context);
    let effect_vars = effect.vars();
    let pool: Vec<VariableId> = model
        .endogenous()
        .iter()
        .map(|(v, _)| v.clone())
        .filter(|v| !effect_vars.contains(v))
        .collect();
    let n = pool.len();
    for total in 1..=n {
        for x_size in 1..=total {
            let w_size = total - x_size;
            let hit = for_each_combination(n, x_size, |x_subset| {
                let remaining: Vec<usize> =
                    (0..n).filter(|i| !x_subset.contains(i)).collect();
                for_each_combination(remaining.len(), w_size, |w_subset| {
                    let mut overrides = BTreeMap::new();
                    let mut x = Vec::with_capacity(x_size);
                    for &i in x_subset {
                        let v = pool[i].clone();
                        let value = actual.get(&v).expect("total");
                        overrides.insert(v.clone(), !value);
                        x.push((v, value));
                    }
                    let mut w = Vec::with_capacity(w_size);
                    for &j in w_subset {
                        let v = pool[remaining[j]].clone();
                        let value = actual.get(&v).expect("total");
                        overrides.insert(v.clone(), value);
                        w.push((v, value));
                    }
                    if !holds_after(model, context, effect, overrides) {
                        Some((x, w))
                    } else {
                        None
                    }
                })
            });
            if let Some((x, w)) = hit {
                let dr = Responsibility::new(1, total as u64);
                return Ok(Some((x, w, dr)));
            }
        }
    }
    Ok(None)
}
