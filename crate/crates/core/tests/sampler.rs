use std::collections::BTreeMap;

use proptest::prelude::*;
use sat_local::formula::{parse_dimacs, Formula, Literal, PartialAssignment, VarId};
use sat_local::glauber::{MarginParams, MarginSampler, ScanSchedule};
use sat_local::local_access::{Branch, SamplerConfig, SamplerContext};
use sat_local::oracle::{min_conditional_lb_from_table, LbMode, MarkedTable};
use sat_local::tape::Seed;
use sat_local::verify::{example_formula, random_instance};

#[test]
fn dimacs_round_trip_keeps_formula() {
    let f = example_formula();
    assert_eq!(parse_dimacs(&f.to_dimacs()).unwrap(), f);
}

#[test]
fn fresh_contexts_answer_identically() {
    let f = random_instance(42);
    for s in 0..5 {
        let a = SamplerContext::new(f.clone(), Seed::from_u64(s), SamplerConfig::default()).unwrap();
        let b = SamplerContext::new(f.clone(), Seed::from_u64(s), SamplerConfig::default()).unwrap();
        let mut vars: Vec<VarId> = f.vars().collect();
        let forward = a.sample_many(&vars);
        vars.reverse();
        let backward: BTreeMap<_, _> = vars.iter().map(|&v| (v, b.sample(v))).collect();
        if let Ok(values) = forward.into_result() {
            for (v, x) in values {
                assert_eq!(backward[&v].clone().unwrap(), x);
            }
        }
    }
}

#[test]
fn random_instance_assignments_are_satisfying() {
    let mut assembled = 0;
    for i in 0..6 {
        let f = random_instance(100 + i);
        for s in 0..3 {
            let ctx = SamplerContext::new(f.clone(), Seed::from_u64(s), SamplerConfig::default()).unwrap();
            if let Ok(values) = ctx.sample_all().into_result() {
                let bits: Vec<bool> = values.into_values().collect();
                assert!(f.is_satisfied_by(&bits));
                assembled += 1;
            }
        }
    }
    assert!(assembled > 0);
}

#[test]
fn traced_branch_matches_marking() {
    let f = example_formula();
    let ctx = SamplerContext::new(f.clone(), Seed::from_u64(2), SamplerConfig::default()).unwrap();
    let Ok(p) = ctx.prepared() else { return };
    for v in f.vars() {
        let o = ctx.sample_traced(v).unwrap();
        let expected = if p.marked.contains(&v) {
            Branch::Marked
        } else {
            Branch::Unmarked
        };
        assert_eq!(o.branch, expected);
    }
}

fn small_formula() -> impl Strategy<Value = Formula> {
    (4u32..9).prop_flat_map(|n| {
        let lit = (1..=n, any::<bool>()).prop_map(|(v, p)| Literal::new(VarId::new(v), p));
        prop::collection::vec(prop::collection::vec(lit, 2..5), 1..5).prop_map(move |cs| {
            let cs = cs
                .into_iter()
                .map(|mut c| {
                    c.sort_by_key(|l| l.var);
                    c.dedup_by_key(|l| l.var);
                    c
                })
                .collect();
            Formula::new(n, cs).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Backward simulation reproduces the forward chain for any marking of
    /// a satisfiable formula whose conditionals stay bounded away from 0.
    #[test]
    fn coupling_on_arbitrary_markings(f in small_formula(), mask in 1u32..256, seed in any::<u64>()) {
        let marked: Vec<VarId> = f.vars().filter(|v| mask & (1 << (v.index() - 1)) != 0).collect();
        prop_assume!(!marked.is_empty());
        let table = MarkedTable::new(&f, &marked).unwrap();
        let b = min_conditional_lb_from_table(&table, LbMode::Exhaustive).unwrap();
        prop_assume!(b > 1e-6);
        let schedule = ScanSchedule::new(marked.iter().copied());
        let params = MarginParams {
            theta: b - 1e-9,
            horizon: 6 * marked.len() as i64,
            r_cap: usize::MAX,
            enumeration_cap: 22,
        };
        let ms = MarginSampler::new(&f, Seed::from_u64(seed), &schedule, params).unwrap();
        if let Ok(forward) = ms.forward_scan_with(&table) {
            for &u in &marked {
                prop_assert_eq!(ms.margin_sample(u).unwrap(), forward[&u]);
            }
        }
    }

    /// The component found by exploration equals the one under the complete
    /// marked assignment.
    #[test]
    fn conn_equals_full_component(f in small_formula(), mask in 1u32..256, seed in any::<u64>()) {
        let marked: Vec<VarId> = f.vars().filter(|v| mask & (1 << (v.index() - 1)) != 0).collect();
        let schedule = ScanSchedule::new(marked.iter().copied());
        let params = MarginParams { theta: 0.1, horizon: 10, r_cap: 10_000, enumeration_cap: 22 };
        let ms = MarginSampler::new(&f, Seed::from_u64(seed), &schedule, params).unwrap();
        let mut tau = PartialAssignment::new();
        for &u in &marked {
            match ms.margin_sample(u) {
                Ok(b) => tau.assign(u, b),
                // padding can be undefined for an arbitrary marking
                Err(_) => return Ok(()),
            }
        }
        for v in f.vars().filter(|v| !schedule.contains(*v)) {
            match sat_local::component::conn(&ms, &f, v) {
                Ok(r) => prop_assert_eq!(r.component, f.component_of(&tau, v).unwrap()),
                Err(_) => return Ok(()),
            }
        }
    }
}
