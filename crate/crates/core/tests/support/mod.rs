//! Shared corpus generators for the integration tests: seeded random
//! acyclic binary models and AC1-valid queries over them.

use std::collections::BTreeMap;

use hpcausal::encoder::CandidateCause;
use hpcausal::model::{BoolExpr, CausalModel, Context, VariableId};
use hpcausal::rng::SplitMix64;

pub struct CorpusQuery {
    pub context: Context,
    pub effect: BoolExpr,
    pub cause: CandidateCause,
}

fn vid(name: String) -> VariableId {
    VariableId::new(name).expect("generated identifier")
}

/// Random expression over the given pool: literals, negations and small
/// conjunctions/disjunctions up to depth two.
fn random_equation(rng: &mut SplitMix64, pool: &[VariableId], depth: u32) -> BoolExpr {
    if pool.is_empty() {
        return BoolExpr::Const(rng.next_bool());
    }
    if depth == 0 || rng.next_below(4) == 0 {
        let v = &pool[rng.next_below(pool.len() as u64) as usize];
        return BoolExpr::literal(v, !rng.next_bool());
    }
    let width = 2 + rng.next_below(2) as usize;
    let children: Vec<BoolExpr> = (0..width)
        .map(|_| random_equation(rng, pool, depth - 1))
        .collect();
    if rng.next_bool() {
        BoolExpr::and(children)
    } else {
        BoolExpr::or(children)
    }
}

/// Random acyclic model: `1..=max_endo` endogenous variables whose
/// equations reference only earlier variables, `1..=max_exo` exogenous.
pub fn random_model(rng: &mut SplitMix64, max_endo: u64, max_exo: u64) -> CausalModel {
    let n_exo = 1 + rng.next_below(max_exo) as usize;
    let n_endo = 1 + rng.next_below(max_endo) as usize;
    let exogenous: Vec<VariableId> = (0..n_exo).map(|i| vid(format!("u{i}"))).collect();
    let mut pool: Vec<VariableId> = exogenous.clone();
    let mut endogenous = Vec::new();
    for i in 0..n_endo {
        let v = vid(format!("x{i}"));
        let eq = random_equation(rng, &pool, 2);
        endogenous.push((v.clone(), eq));
        pool.push(v);
    }
    CausalModel::new(format!("corpus{}", rng.next_u64()), exogenous, endogenous)
        .expect("construction is acyclic")
}

/// Samples an AC1-valid query: random context, effect pinning one
/// endogenous variable to its actual value, and a cause of one to three
/// distinct non-effect endogenous variables at their actual values.
/// Returns `None` when the model has a single endogenous variable.
pub fn random_query(rng: &mut SplitMix64, model: &CausalModel) -> Option<CorpusQuery> {
    if model.endogenous().len() < 2 {
        return None;
    }
    let pairs: BTreeMap<VariableId, bool> = model
        .exogenous()
        .iter()
        .map(|v| (v.clone(), rng.next_bool()))
        .collect();
    let context = Context::new(model, pairs).expect("total");
    let actual = model.evaluate(&context);

    // Mostly single-literal effects; occasionally a two-variable
    // conjunction (both at their actual values, so the effect holds).
    let endo_count = model.endogenous().len();
    let mut effect_vars = vec![rng.next_below(endo_count as u64) as usize];
    if endo_count >= 3 && rng.next_below(3) == 0 {
        loop {
            let second = rng.next_below(endo_count as u64) as usize;
            if second != effect_vars[0] {
                effect_vars.push(second);
                break;
            }
        }
        effect_vars.sort_unstable();
    }
    let effect = BoolExpr::and(
        effect_vars
            .iter()
            .map(|&i| {
                let (v, _) = &model.endogenous()[i];
                BoolExpr::literal(v, actual.get(v).expect("total"))
            })
            .collect(),
    );

    let excluded: Vec<&VariableId> = effect_vars
        .iter()
        .map(|&i| &model.endogenous()[i].0)
        .collect();
    let candidates: Vec<VariableId> = model
        .endogenous()
        .iter()
        .map(|(v, _)| v.clone())
        .filter(|v| !excluded.contains(&v))
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let size = 1 + rng.next_below(candidates.len().min(3) as u64) as usize;
    let picks = rng.sample_indices(candidates.len(), size);
    let assignments: Vec<(VariableId, bool)> = picks
        .into_iter()
        .map(|i| {
            let v = candidates[i].clone();
            let value = actual.get(&v).expect("total");
            (v, value)
        })
        .collect();
    Some(CorpusQuery {
        context,
        effect,
        cause: CandidateCause::new(assignments).expect("non-empty"),
    })
}
