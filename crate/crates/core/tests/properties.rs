//! Cross-module properties: evaluation fixpoints, intervention locality,
//! clausal-form round trips, enumeration caps, deadline behavior, and the
//! subset-level relation between the two counterfactual-setting sweeps.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::strategy::Strategy as _;

use hpcausal::causality::{self, Options, Strategy};
use hpcausal::cnf::{parse_dimacs, tseitin, write_dimacs, Literal};
use hpcausal::encoder::{build_g_prime, CandidateCause, PropExpr, PropFormula, Registry};
use hpcausal::error::Error;
use hpcausal::model::{
    context_of, eval_expr, parse_expr, parse_model, rock_throwing, BoolExpr, CausalModel, Context,
    Intervention, VariableId,
};
use hpcausal::oracle;
use hpcausal::rng::SplitMix64;
use hpcausal::sat::{self, SatStatus};

mod support;
use support::{random_model, random_query};

fn id(name: &str) -> VariableId {
    VariableId::new(name).unwrap()
}

#[test]
fn values_are_shareable_across_threads() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<CausalModel>();
    assert_send_sync::<Context>();
    assert_send_sync::<CandidateCause>();
    assert_send_sync::<hpcausal::cnf::CnfFormula>();
    assert_send_sync::<hpcausal::ilp::IlpProgram>();
    assert_send_sync::<hpcausal::causality::CausalAnswer>();

    // Concurrent queries over one shared model agree with the sequential
    // answers.
    let model = rock_throwing();
    let context = context_of(&model, &[("ST_exo", true), ("BT_exo", true)]).unwrap();
    let effect = parse_expr("BS").unwrap();
    std::thread::scope(|scope| {
        let handles: Vec<_> = ["ST", "BT", "SH", "BH"]
            .iter()
            .map(|name| {
                let model = &model;
                let context = context.clone();
                let effect = effect.clone();
                scope.spawn(move || {
                    let cause = CandidateCause::new(vec![(id(name), true)]);
                    let Ok(cause) = cause else { return None };
                    let query = causality::CausalQuery {
                        model,
                        context,
                        effect,
                        cause: Some(cause),
                        strategy: Strategy::MaxSat,
                    };
                    causality::answer_query(&query, &Options::default()).ok()
                })
            })
            .collect();
        let verdicts: Vec<Option<bool>> = handles
            .into_iter()
            .map(|h| h.join().unwrap().map(|a| a.is_cause()))
            .collect();
        // BH holds value 0; a cause assignment of 1 violates its actual
        // value, which surfaces as an encoding error (None).
        assert_eq!(verdicts[0], Some(true)); // ST
        assert_eq!(verdicts[1], Some(false)); // BT (preempted)
        assert_eq!(verdicts[2], Some(true)); // SH
        assert_eq!(verdicts[3], None); // BH=1 fails AC1 validation
    });
}

#[test]
fn unique_fixpoint_by_exhaustive_enumeration() {
    // For every context, exactly one endogenous assignment satisfies all
    // equations; it is the one evaluation returns.
    let mut rng = SplitMix64::new(0xF1F0);
    for _ in 0..40 {
        let model = random_model(&mut rng, 6, 2);
        let m = model.endogenous().len();
        let exo = model.exogenous().to_vec();
        for ctx_bits in 0..(1u32 << exo.len()) {
            let pairs: BTreeMap<VariableId, bool> = exo
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), ctx_bits & (1 << i) != 0))
                .collect();
            let ctx = Context::new(&model, pairs).unwrap();
            let actual = model.evaluate(&ctx);
            let mut fixpoints = 0;
            for bits in 0..(1u32 << m) {
                let mut values = ctx.values().clone();
                for (i, (v, _)) in model.endogenous().iter().enumerate() {
                    values.insert(v.clone(), bits & (1 << i) != 0);
                }
                let candidate = hpcausal::model::Valuation::from_map(values);
                let consistent = model.endogenous().iter().all(|(v, eq)| {
                    candidate.get(v) == Some(eval_expr(eq, &candidate).unwrap())
                });
                if consistent {
                    fixpoints += 1;
                    for (v, _) in model.endogenous() {
                        assert_eq!(candidate.get(v), actual.get(v));
                    }
                }
            }
            assert_eq!(fixpoints, 1);
        }
    }
}

#[test]
fn intervention_locality() {
    // Forcing variables that are not ancestors of V leaves V unchanged.
    let mut rng = SplitMix64::new(0xA11C);
    for _ in 0..60 {
        let model = random_model(&mut rng, 7, 2);
        let ctx_pairs: BTreeMap<VariableId, bool> = model
            .exogenous()
            .iter()
            .map(|v| (v.clone(), rng.next_bool()))
            .collect();
        let ctx = Context::new(&model, ctx_pairs).unwrap();
        let baseline = model.evaluate(&ctx);

        // Ancestor closure per endogenous variable.
        let mut ancestors: BTreeMap<VariableId, Vec<VariableId>> = BTreeMap::new();
        for v in model.topological_order() {
            let mut acc = Vec::new();
            for used in model.equation(v).unwrap().vars() {
                if model.is_endogenous(&used) {
                    acc.push(used.clone());
                    acc.extend(ancestors[&used].iter().cloned());
                }
            }
            acc.sort();
            acc.dedup();
            ancestors.insert(v.clone(), acc);
        }

        let targets: Vec<VariableId> = model
            .endogenous()
            .iter()
            .filter(|_| rng.next_below(3) == 0)
            .map(|(v, _)| v.clone())
            .collect();
        if targets.is_empty() {
            continue;
        }
        let overrides: BTreeMap<VariableId, bool> = targets
            .iter()
            .map(|v| (v.clone(), rng.next_bool()))
            .collect();
        let iv = Intervention::new(&model, overrides.clone()).unwrap();
        let world = model.evaluate_with_intervention(&ctx, &iv);
        for (v, _) in model.endogenous() {
            if overrides.contains_key(v) {
                continue;
            }
            let touched = ancestors[v].iter().any(|a| overrides.contains_key(a));
            if !touched {
                assert_eq!(world.get(v), baseline.get(v), "{v} has no forced ancestor");
            }
        }
    }
}

#[test]
fn dimacs_round_trip_preserves_sat_status() {
    // Emitted DIMACS, read back, solves to the same status: the
    // file-format half of the external-solver differential.
    let mut rng = SplitMix64::new(0xD1AC);
    for _ in 0..100 {
        let model = random_model(&mut rng, 6, 2);
        let Some(query) = random_query(&mut rng, &model) else {
            continue;
        };
        let g_prime = build_g_prime(&model, &query.context, &query.effect, &query.cause).unwrap();
        let cnf = tseitin(&g_prime);
        let text = write_dimacs(&cnf);
        let back = parse_dimacs(&text).unwrap();
        let direct = sat::solve(&cnf).status;
        let reparsed = sat::solve(&back).status;
        assert_eq!(direct, reparsed);
        // Byte determinism.
        assert_eq!(text, write_dimacs(&cnf));
    }
}

#[test]
fn projected_enumeration_contains_the_counterfactual_world() {
    // The models of G for the joint rock-throwing cause, projected onto
    // the endogenous variables, include the world where only Suzy's
    // throw is stopped.
    let model = rock_throwing();
    let context = context_of(&model, &[("ST_exo", true), ("BT_exo", true)]).unwrap();
    let effect = parse_expr("BS").unwrap();
    let cause =
        CandidateCause::new(vec![(id("ST"), true), (id("BT"), true)]).unwrap();
    let g = hpcausal::encoder::build_g(&model, &context, &effect, &cause).unwrap();
    let cnf = tseitin(&g);
    let projection: std::collections::BTreeSet<u32> = ["ST", "BT", "SH", "BH", "BS"]
        .iter()
        .map(|name| cnf.registry.index_of(&id(name)).unwrap())
        .collect();
    let models = sat::enumerate_models(&cnf, &projection, None);
    let want: BTreeMap<u32, bool> = [
        ("ST", false),
        ("BT", true),
        ("SH", false),
        ("BH", false),
        ("BS", false),
    ]
    .iter()
    .map(|(name, value)| (cnf.registry.index_of(&id(name)).unwrap(), *value))
    .collect();
    assert!(models.contains(&want));
}

#[test]
fn wcnf_export_of_the_joint_cause() {
    // Two unit-weight soft lines, top weight 3.
    let model = rock_throwing();
    let context = context_of(&model, &[("ST_exo", true), ("BT_exo", true)]).unwrap();
    let effect = parse_expr("BS").unwrap();
    let cause =
        CandidateCause::new(vec![(id("ST"), true), (id("BT"), true)]).unwrap();
    let (hard, soft) =
        hpcausal::encoder::build_g_max(&model, &context, &effect, &cause).unwrap();
    let text = hpcausal::cnf::write_wcnf(&tseitin(&hard), &soft);
    let header = text
        .lines()
        .find(|l| l.starts_with("p wcnf"))
        .expect("header present");
    assert!(header.ends_with(" 3"), "top weight is 1 + sum of soft weights");
    let soft_lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("1 "))
        .collect();
    assert_eq!(soft_lines.len(), 2);
}

#[test]
fn enumeration_cap_is_enforced() {
    let model = parse_model(
        r#"{"name":"wide","exogenous":["U"],"endogenous":[
            {"id":"A","eq":"U"},{"id":"B","eq":"U"},{"id":"C","eq":"U"},
            {"id":"E","eq":"A & B & C"}]}"#,
    )
    .unwrap();
    let ctx = context_of(&model, &[("U", true)]).unwrap();
    let effect = parse_expr("E").unwrap();
    let cause = CandidateCause::new(vec![(id("A"), true), (id("B"), true)]).unwrap();
    let tight = Options {
        enumeration_cap: 1,
        ..Options::default()
    };
    assert!(matches!(
        causality::check_ac3_all_sat(&model, &ctx, &effect, &cause, &tight),
        Err(Error::EnumerationLimitExceeded(1))
    ));
    // A generous cap succeeds.
    assert!(
        !causality::check_ac3_all_sat(&model, &ctx, &effect, &cause, &Options::default()).unwrap()
    );
}

#[test]
fn expired_deadline_aborts_hard_instances() {
    // Pigeonhole: n+1 pigeons into n holes, classically hard for
    // resolution, guaranteeing enough conflicts to hit the deadline check.
    let n = 8u32;
    let pigeons = n + 1;
    let var = |p: u32, h: u32| p * n + h + 1;
    let mut cnf = hpcausal::cnf::CnfFormula {
        num_vars: pigeons * n,
        ..Default::default()
    };
    for p in 0..pigeons {
        cnf.push((0..n).map(|h| Literal::pos(var(p, h))).collect());
    }
    for h in 0..n {
        for p1 in 0..pigeons {
            for p2 in p1 + 1..pigeons {
                cnf.push(vec![Literal::neg(var(p1, h)), Literal::neg(var(p2, h))]);
            }
        }
    }
    let expired = Instant::now() - Duration::from_secs(1);
    assert!(matches!(
        sat::solve_with_deadline(&cnf, Some(expired)),
        Err(Error::Timeout)
    ));
}

#[test]
fn partial_negation_settings_reduce_to_subsets() {
    // The full-sweep dependence check can succeed where the negation-only
    // sweep fails for the same candidate: keeping one candidate variable
    // at its actual value is the same as moving it into the contingency
    // set. Existence of a dependent non-empty subset is what the two
    // sweeps share.
    let model = parse_model(
        r#"{"name":"cex","exogenous":["U"],"endogenous":[
            {"id":"A","eq":"U"},{"id":"B","eq":"!A"},{"id":"E","eq":"A | B"}]}"#,
    )
    .unwrap();
    let ctx = context_of(&model, &[("U", true)]).unwrap();
    let effect = parse_expr("E").unwrap();
    let cause = CandidateCause::new(vec![(id("A"), true), (id("B"), false)]).unwrap();

    let negation_only = oracle::oracle_ac2(&model, &ctx, &effect, &cause, 16).unwrap();
    let full = oracle::oracle_ac2_full_sweep(&model, &ctx, &effect, &cause, 16).unwrap();
    assert!(negation_only.is_none(), "negating both A and B keeps E true");
    assert!(full.is_some(), "setting only A counterfactually makes E false");

    // The shared ground truth: a non-empty dependent subset exists.
    let subset = oracle::oracle_min_cause_subset(&model, &ctx, &effect, &cause, 16).unwrap();
    assert_eq!(subset.unwrap().1, 1);

    // On random queries, subset existence from the full sweep and from
    // the negation-only minimum-subset search always agree.
    let mut rng = SplitMix64::new(0x5EED);
    let mut checked = 0;
    while checked < 150 {
        let model = random_model(&mut rng, 7, 2);
        let Some(query) = random_query(&mut rng, &model) else {
            continue;
        };
        checked += 1;
        let full =
            oracle::oracle_ac2_full_sweep(&model, &query.context, &query.effect, &query.cause, 16)
                .unwrap();
        let min_subset =
            oracle::oracle_min_cause_subset(&model, &query.context, &query.effect, &query.cause, 16)
                .unwrap();
        assert_eq!(full.is_some(), min_subset.is_some());
    }
}

#[test]
fn singleton_non_minimality_formula_is_always_unsatisfiable() {
    // For a one-variable candidate the non-minimality disjunction and the
    // non-emptiness constraint contradict each other, whatever the model.
    let mut rng = SplitMix64::new(0x0515);
    let mut checked = 0;
    while checked < 120 {
        let model = random_model(&mut rng, 8, 2);
        let Some(query) = random_query(&mut rng, &model) else {
            continue;
        };
        let (first, value) = query.cause.assignments()[0].clone();
        let singleton = CandidateCause::new(vec![(first, value)]).unwrap();
        let g_prime =
            build_g_prime(&model, &query.context, &query.effect, &singleton).unwrap();
        assert_eq!(sat::solve(&tseitin(&g_prime)).status, SatStatus::Unsat);
        checked += 1;
    }
}

#[test]
fn answers_are_deterministic_across_runs() {
    let mut rng = SplitMix64::new(0xDE7E);
    let mut checked = 0;
    while checked < 30 {
        let model = random_model(&mut rng, 8, 2);
        let Some(query) = random_query(&mut rng, &model) else {
            continue;
        };
        checked += 1;
        for strategy in [Strategy::Ilp, Strategy::MaxSat, Strategy::SatOptimized] {
            let q = causality::CausalQuery {
                model: &model,
                context: query.context.clone(),
                effect: query.effect.clone(),
                cause: Some(query.cause.clone()),
                strategy,
            };
            let first = causality::answer_query(&q, &Options::default()).unwrap();
            let second = causality::answer_query(&q, &Options::default()).unwrap();
            assert_eq!(
                causality::answer_to_json(&first),
                causality::answer_to_json(&second)
            );
        }
    }
}

// ── proptest: grammar round trip and clausal equisatisfiability ───────

fn arb_expr(vars: &'static [&'static str]) -> impl proptest::strategy::Strategy<Value = BoolExpr> {
    let leaf = prop_oneof![
        proptest::sample::select(vars).prop_map(|name| BoolExpr::var(&id(name))),
        any::<bool>().prop_map(BoolExpr::Const),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(BoolExpr::not),
            proptest::collection::vec(inner.clone(), 2..4).prop_map(BoolExpr::and),
            proptest::collection::vec(inner, 2..4).prop_map(BoolExpr::or),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expression_grammar_round_trips(expr in arb_expr(&["a", "b", "c", "d"])) {
        // Parsing flattens nested n-ary connectives, so the structural
        // fixpoint is reached after one round; meaning is preserved from
        // the start.
        let printed = expr.to_expr_string();
        let parsed = parse_expr(&printed).unwrap();
        prop_assert_eq!(parsed.to_expr_string(), printed);

        let vars = [id("a"), id("b"), id("c"), id("d")];
        for bits in 0..16u32 {
            let values: BTreeMap<VariableId, bool> = vars
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), bits & (1 << i) != 0))
                .collect();
            let world = hpcausal::model::Valuation::from_map(values);
            prop_assert_eq!(
                eval_expr(&expr, &world).unwrap(),
                eval_expr(&parsed, &world).unwrap()
            );
        }
    }

    #[test]
    fn tseitin_preserves_satisfiability(expr in arb_expr(&["a", "b", "c", "d", "e"])) {
        // Map the model expression onto formula indices 1..=5.
        fn to_prop(e: &BoolExpr) -> PropExpr {
            match e {
                BoolExpr::Const(b) => PropExpr::Const(*b),
                BoolExpr::Var(v) => {
                    let idx = (v.as_str().as_bytes()[0] - b'a') as u32 + 1;
                    PropExpr::Var(idx)
                }
                BoolExpr::Not(x) => PropExpr::not(to_prop(x)),
                BoolExpr::And(es) => PropExpr::And(es.iter().map(to_prop).collect()),
                BoolExpr::Or(es) => PropExpr::Or(es.iter().map(to_prop).collect()),
            }
        }
        let root = to_prop(&expr);
        let formula = PropFormula {
            root: root.clone(),
            registry: Registry::default(),
            indicators: None,
            num_vars: 5,
        };
        let cnf = tseitin(&formula);
        let mut truth_sat = false;
        for bits in 0..(1u32 << 5) {
            let mut assign = vec![false; 6];
            for i in 0..5 {
                assign[i + 1] = bits & (1 << i) != 0;
            }
            if root.eval(&assign) {
                truth_sat = true;
                break;
            }
        }
        let solver_sat = sat::solve(&cnf).status == SatStatus::Sat;
        prop_assert_eq!(truth_sat, solver_sat);
    }
}
