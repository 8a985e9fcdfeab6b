//! Exploring and sampling the component of an unmarked variable.
//!
//! [`conn`] reveals marked values only where the exploration needs them and
//! returns the component of `v` in the formula reduced by those values.
//! [`uniform_sample_component`] then draws a uniform solution of that
//! component by exact enumeration.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::formula::{clause_satisfied, Component, Formula, PartialAssignment, VarId};
use crate::glauber::{CallStats, MarginSampler, SamplerError};
use crate::tape::{bit, u01, Seed, StreamKey};

/// Largest component, in variables, that exact enumeration accepts.
pub const DEFAULT_COMPONENT_CAP: usize = 22;

/// Satisfying assignments of `psi` as masks over `psi.vars` in ascending
/// order, the first variable in the most significant bit. The list comes
/// out in lexicographic order.
pub fn solutions(psi: &Component, cap: usize) -> Result<Vec<u32>, SamplerError> {
    let vars: Vec<VarId> = psi.vars.iter().copied().collect();
    let n = vars.len();
    if n > cap || n > 31 {
        return Err(SamplerError::ComponentTooLarge { vars: n, cap });
    }
    let pos: BTreeMap<VarId, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // clauses grouped by the position of their last variable
    let mut due: Vec<Vec<Vec<(usize, bool)>>> = vec![Vec::new(); n];
    for c in &psi.clauses {
        let lits: Vec<(usize, bool)> = c.literals.iter().map(|l| (pos[&l.var], l.positive)).collect();
        match lits.iter().map(|&(p, _)| p).max() {
            Some(last) => due[last].push(lits),
            None => return Ok(Vec::new()),
        }
    }
    let mut out = Vec::new();
    let mut values = vec![false; n];
    extend(&due, &mut values, 0, &mut out);
    Ok(out)
}

fn extend(due: &[Vec<Vec<(usize, bool)>>], values: &mut [bool], p: usize, out: &mut Vec<u32>) {
    let n = values.len();
    if p == n {
        let mask = values.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
        out.push(mask);
        return;
    }
    for b in [false, true] {
        values[p] = b;
        let ok = due[p]
            .iter()
            .all(|lits| lits.iter().any(|&(q, positive)| values[q] == positive));
        if ok {
            extend(due, values, p + 1, out);
        }
    }
}

/// `(#solutions, #solutions with u = 1)`.
pub fn count_with(psi: &Component, u: VarId, cap: usize) -> Result<(u64, u64), SamplerError> {
    let sols = solutions(psi, cap)?;
    let p = psi
        .vars
        .iter()
        .position(|&v| v == u)
        .ok_or(SamplerError::NotInComponent(u))?;
    let shift = psi.vars.len() - 1 - p;
    let ones = sols.iter().filter(|&&m| (m >> shift) & 1 == 1).count();
    Ok((sols.len() as u64, ones as u64))
}

/// A uniform solution of `psi`, read off the tape at `psi.canonical_rep`.
/// A component without clauses gets independent fair bits.
pub fn uniform_sample_component(
    seed: &Seed,
    psi: &Component,
    cap: usize,
) -> Result<BTreeMap<VarId, bool>, SamplerError> {
    let rep = psi.canonical_rep;
    if psi.clauses.is_empty() {
        return Ok(psi
            .vars
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                (
                    v,
                    bit(
                        seed,
                        StreamKey::ComponentDraw {
                            rep,
                            counter: 1 + i as u64,
                        },
                    ),
                )
            })
            .collect());
    }
    let sols = solutions(psi, cap)?;
    if sols.is_empty() {
        return Err(SamplerError::NoSatisfyingAssignment { rep });
    }
    let x = u01(seed, StreamKey::ComponentDraw { rep, counter: 0 });
    let idx = ((x * sols.len() as f64) as usize).min(sols.len() - 1);
    let mask = sols[idx];
    let n = psi.vars.len();
    Ok(psi
        .vars
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (mask >> (n - 1 - i)) & 1 == 1))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConnResult {
    pub component: Component,
    /// Marked values revealed during the exploration.
    pub sigma: BTreeMap<VarId, bool>,
    /// Clauses that were ever pushed on the stack.
    pub visited_clause_ids: BTreeSet<usize>,
    #[serde(skip)]
    pub margin_stats: Vec<CallStats>,
}

/// Explores the clauses around the unmarked variable `v`, sampling marked
/// variables on demand, until the component of `v` is closed.
pub fn conn(sampler: &MarginSampler<'_>, formula: &Formula, v: VarId) -> Result<ConnResult, SamplerError> {
    formula.check_var(v)?;
    if sampler.schedule().contains(v) {
        return Err(SamplerError::Marked(v));
    }
    let mut sigma = PartialAssignment::new();
    let mut stats = Vec::new();
    let mut stack: Vec<usize> = formula.occurrences(v).to_vec();
    stack.sort_unstable();
    let mut pushed: BTreeSet<usize> = stack.iter().copied().collect();
    while let Some(cid) = stack.pop() {
        let clause = formula.clause(cid);
        if clause_satisfied(clause, &sigma) {
            continue;
        }
        let free: Vec<VarId> = clause
            .vars()
            .filter(|&w| !sigma.is_assigned(w))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for &w in &free {
            if sampler.schedule().contains(w) {
                let (b, s) = sampler.margin_sample_traced(w)?;
                stats.push(s);
                sigma.assign(w, b);
                stack.retain(|&c| !clause_satisfied(formula.clause(c), &sigma));
                if clause_satisfied(clause, &sigma) {
                    break;
                }
            }
        }
        if clause_satisfied(clause, &sigma) {
            continue;
        }
        let mut fresh = BTreeSet::new();
        for w in clause.vars().filter(|&w| !sigma.is_assigned(w)) {
            for &c in formula.occurrences(w) {
                if !pushed.contains(&c) && !clause_satisfied(formula.clause(c), &sigma) {
                    fresh.insert(c);
                }
            }
        }
        for c in fresh {
            pushed.insert(c);
            stack.push(c);
        }
    }
    let component = formula.component_of(&sigma, v)?;
    Ok(ConnResult {
        component,
        sigma: sigma
            .iter()
            .filter_map(|(w, t)| t.bit().map(|b| (w, b)))
            .collect(),
        visited_clause_ids: pushed,
        margin_stats: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::tests::example;
    use crate::formula::Literal;
    use crate::glauber::{MarginParams, ScanSchedule};
    use crate::oracle::enumerate_sat;
    use proptest::prelude::*;

    fn x(i: u32) -> VarId {
        VarId::new(i)
    }

    fn whole(f: &Formula) -> Component {
        f.component_of(&PartialAssignment::new(), x(1)).unwrap()
    }

    #[test]
    fn example_component_has_three_solutions() {
        // with x2 = 0 and x5 = 1 the component of x1 is x1 ∨ ¬x3
        let f = example();
        let sigma = PartialAssignment::from_bits([(x(2), false), (x(5), true)]);
        let psi = f.component_of(&sigma, x(1)).unwrap();
        assert_eq!(psi.vars, BTreeSet::from([x(1), x(3)]));
        let sols = solutions(&psi, 22).unwrap();
        assert_eq!(sols, vec![0b00, 0b10, 0b11]);
        assert_eq!(count_with(&psi, x(1), 22).unwrap(), (3, 2));
    }

    #[test]
    fn example_component_sampling_is_uniform() {
        let f = example();
        let sigma = PartialAssignment::from_bits([(x(2), false), (x(5), true)]);
        let psi = f.component_of(&sigma, x(1)).unwrap();
        let n = 30_000;
        let mut counts = BTreeMap::new();
        for s in 0..n {
            let a = uniform_sample_component(&Seed::from_u64(s), &psi, 22).unwrap();
            *counts.entry((a[&x(1)], a[&x(3)])).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 3);
        for (_, c) in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() <= 0.01);
        }
    }

    #[test]
    fn singleton_uses_fair_bit() {
        let psi = Component::singleton(x(4));
        let seed = Seed::from_u64(9);
        let a = uniform_sample_component(&seed, &psi, 22).unwrap();
        assert_eq!(
            a[&x(4)],
            bit(
                &seed,
                StreamKey::ComponentDraw {
                    rep: x(4),
                    counter: 1
                }
            )
        );
    }

    #[test]
    fn too_large_component_is_rejected() {
        let clauses = vec![(1..=24).map(Literal::pos).collect()];
        let f = Formula::new(24, clauses).unwrap();
        let psi = whole(&f);
        assert_eq!(
            solutions(&psi, 22),
            Err(SamplerError::ComponentTooLarge { vars: 24, cap: 22 })
        );
    }

    #[test]
    fn conn_matches_component_under_full_marking() {
        let f = example();
        let marked = [x(2), x(5)];
        let schedule = ScanSchedule::new(marked);
        let params = MarginParams {
            theta: 0.2,
            horizon: 12,
            r_cap: usize::MAX,
            enumeration_cap: 22,
        };
        for s in 0..50 {
            let ms = MarginSampler::new(&f, Seed::from_u64(s), &schedule, params).unwrap();
            let tau = PartialAssignment::from_bits(marked.iter().map(|&u| (u, ms.margin_sample(u).unwrap())));
            for v in [x(1), x(3), x(4)] {
                let r = conn(&ms, &f, v).unwrap();
                assert_eq!(r.component, f.component_of(&tau, v).unwrap());
                for (w, b) in &r.sigma {
                    assert_eq!(tau.value(*w), Some(*b));
                }
            }
        }
    }

    #[test]
    fn conn_rejects_marked_variable() {
        let f = example();
        let schedule = ScanSchedule::new([x(2)]);
        let params = MarginParams {
            theta: 0.2,
            horizon: 4,
            r_cap: 100,
            enumeration_cap: 22,
        };
        let ms = MarginSampler::new(&f, Seed::from_u64(0), &schedule, params).unwrap();
        assert_eq!(conn(&ms, &f, x(2)), Err(SamplerError::Marked(x(2))));
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        (3u32..9).prop_flat_map(|n| {
            let lit = (1..=n, any::<bool>()).prop_map(|(v, p)| Literal::new(VarId::new(v), p));
            let clause = prop::collection::vec(lit, 1..4);
            prop::collection::vec(clause, 0..6).prop_map(move |cs| {
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
        #[test]
        fn enumeration_agrees_with_oracle(f in arb_formula()) {
            let comp = whole(&f);
            let sols = solutions(&comp, 22).unwrap();
            let expected: BTreeSet<Vec<bool>> = enumerate_sat(&f)
                .unwrap()
                .into_iter()
                .map(|a| comp.vars.iter().map(|v| a[v.slot()]).collect())
                .collect();
            // other components may be unsatisfiable on their own
            prop_assume!(!expected.is_empty());
            let n = comp.vars.len();
            let got: Vec<Vec<bool>> = sols
                .iter()
                .map(|&m| (0..n).map(|i| (m >> (n - 1 - i)) & 1 == 1).collect())
                .collect();
            prop_assert!(got.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(got.into_iter().collect::<BTreeSet<_>>(), expected);
        }
    }
}
