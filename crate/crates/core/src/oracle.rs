//! Brute-force ground truth for desk-scale instances: the set of satisfying
//! assignments, exact (conditional) marginals, total variation distance and
//! the minimal conditional marginal over a marking, from which a valid
//! lower bound `θ` is derived.
//!
//! Everything here works on bitmasks over full assignments and never touches
//! the sampler's component machinery, so it can serve as an independent check.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::formula::{Formula, PartialAssignment, VarId};

pub const DEFAULT_ENUMERATION_CAP: u32 = 26;
/// Exhaustive minimisation walks a table of `3^m` partial assignments.
pub const EXHAUSTIVE_MARKED_CAP: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{n} variables exceed the enumeration cap {cap}")]
    TooManyVariables { n: u32, cap: u32 },
    #[error("{m} marked variables exceed the exhaustive cap {cap}")]
    TooManyMarked { m: usize, cap: usize },
    #[error("no satisfying assignment is consistent with the conditioning")]
    NoSatisfyingAssignment,
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("target variable {0} is assigned by the conditioning")]
    ConditionedTarget(VarId),
}

/// A distribution over bit vectors, support sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub support: Vec<Vec<bool>>,
    pub probabilities: Vec<f64>,
}

impl ExactDistribution {
    pub fn from_counts(counts: BTreeMap<Vec<bool>, u64>) -> Self {
        let total: u64 = counts.values().sum();
        let mut support = Vec::with_capacity(counts.len());
        let mut probabilities = Vec::with_capacity(counts.len());
        for (k, c) in counts {
            support.push(k);
            probabilities.push(c as f64 / total as f64);
        }
        ExactDistribution {
            support,
            probabilities,
        }
    }

    pub fn prob(&self, outcome: &[bool]) -> f64 {
        self.support
            .binary_search_by(|s| s.as_slice().cmp(outcome))
            .map(|i| self.probabilities[i])
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Clause bitmasks over assignments encoded as integers, variable `x1` in
/// the most significant position so that counting up is lexicographic.
struct Masks {
    n: u32,
    clauses: Vec<(u64, u64)>,
}

impl Masks {
    fn new(f: &Formula, cap: u32) -> Result<Self, OracleError> {
        let n = f.num_vars();
        if n > cap {
            return Err(OracleError::TooManyVariables { n, cap });
        }
        let clauses = f
            .clauses()
            .iter()
            .map(|c| {
                c.literals().iter().fold((0u64, 0u64), |(p, q), l| {
                    let b = 1u64 << (n - l.var.index());
                    if l.positive {
                        (p | b, q)
                    } else {
                        (p, q | b)
                    }
                })
            })
            .collect();
        Ok(Masks { n, clauses })
    }

    fn bit(&self, v: VarId) -> u64 {
        1u64 << (self.n - v.index())
    }

    fn sat(&self, x: u64) -> bool {
        self.clauses.iter().all(|&(p, q)| x & p != 0 || !x & q != 0)
    }

    /// Satisfying assignments consistent with `(mask, value)` constraints.
    fn for_each_sat(&self, fixed_mask: u64, fixed_value: u64, mut f: impl FnMut(u64)) {
        for x in 0..(1u64 << self.n) {
            if x & fixed_mask == fixed_value && self.sat(x) {
                f(x);
            }
        }
    }

    fn decode(&self, x: u64) -> Vec<bool> {
        (1..=self.n).map(|i| x & (1u64 << (self.n - i)) != 0).collect()
    }

    fn conditioning(&self, sigma: &PartialAssignment) -> (u64, u64) {
        sigma.iter().fold((0, 0), |(m, v), (var, t)| match t.bit() {
            Some(b) => {
                let bit = self.bit(var);
                (m | bit, if b { v | bit } else { v })
            }
            None => (m, v),
        })
    }
}

/// All satisfying assignments (indexed by variable slot), lexicographic.
pub fn enumerate_sat(f: &Formula) -> Result<Vec<Vec<bool>>, OracleError> {
    enumerate_sat_capped(f, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_sat_capped(f: &Formula, cap: u32) -> Result<Vec<Vec<bool>>, OracleError> {
    let masks = Masks::new(f, cap)?;
    let mut out = Vec::new();
    masks.for_each_sat(0, 0, |x| out.push(masks.decode(x)));
    Ok(out)
}

/// The uniform distribution over satisfying assignments.
pub fn uniform_over_sat(f: &Formula) -> Result<ExactDistribution, OracleError> {
    let all = enumerate_sat(f)?;
    if all.is_empty() {
        return Err(OracleError::NoSatisfyingAssignment);
    }
    let p = 1.0 / all.len() as f64;
    let probabilities = vec![p; all.len()];
    Ok(ExactDistribution {
        support: all,
        probabilities,
    })
}

/// `μ_S(· | σ)`: the law of the variables `s` under the uniform distribution
/// over satisfying assignments consistent with `sigma` (`⊥` unconstrained).
pub fn exact_marginal(
    f: &Formula,
    s: &[VarId],
    sigma: &PartialAssignment,
) -> Result<ExactDistribution, OracleError> {
    if let Some(&v) = s.iter().find(|&&v| sigma.is_assigned(v)) {
        return Err(OracleError::ConditionedTarget(v));
    }
    let masks = Masks::new(f, DEFAULT_ENUMERATION_CAP)?;
    let (fm, fv) = masks.conditioning(sigma);
    let mut counts: BTreeMap<Vec<bool>, u64> = BTreeMap::new();
    masks.for_each_sat(fm, fv, |x| {
        let key = s.iter().map(|&v| x & masks.bit(v) != 0).collect();
        *counts.entry(key).or_default() += 1;
    });
    if counts.is_empty() {
        return Err(OracleError::NoSatisfyingAssignment);
    }
    Ok(ExactDistribution::from_counts(counts))
}

/// Counts of satisfying assignments per assignment of the marked variables.
/// Index bit `j` holds the value of `marked[j]`.
#[derive(Clone, Debug)]
pub struct MarkedTable {
    marked: Vec<VarId>,
    counts: Vec<u64>,
}

impl MarkedTable {
    pub fn new(f: &Formula, marked: &[VarId]) -> Result<Self, OracleError> {
        let masks = Masks::new(f, DEFAULT_ENUMERATION_CAP)?;
        let mut marked = marked.to_vec();
        marked.sort_unstable();
        marked.dedup();
        let bits: Vec<u64> = marked.iter().map(|&v| masks.bit(v)).collect();
        let mut counts = vec![0u64; 1usize << marked.len()];
        masks.for_each_sat(0, 0, |x| {
            let idx = bits.iter().enumerate().fold(
                0usize,
                |acc, (j, &b)| if x & b != 0 { acc | (1 << j) } else { acc },
            );
            counts[idx] += 1;
        });
        Ok(MarkedTable { marked, counts })
    }

    pub fn marked(&self) -> &[VarId] {
        &self.marked
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn index_of(&self, values: &BTreeMap<VarId, bool>) -> usize {
        self.marked
            .iter()
            .enumerate()
            .fold(0, |acc, (j, v)| if values[v] { acc | (1 << j) } else { acc })
    }

    /// `μ(u = 1 | all other marked variables as in `index`)`; `None` when the
    /// conditioning is infeasible.
    pub fn conditional_one(&self, u_pos: usize, index: usize) -> Option<f64> {
        let one = self.counts[index | (1 << u_pos)];
        let zero = self.counts[index & !(1 << u_pos)];
        let total = one + zero;
        (total > 0).then(|| one as f64 / total as f64)
    }

    /// Law of the marked variables under `μ`, as a distribution over bit
    /// vectors in `marked` order.
    pub fn marginal(&self) -> ExactDistribution {
        let m = self.marked.len();
        let counts = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(idx, &c)| ((0..m).map(|j| idx & (1 << j) != 0).collect(), c))
            .collect();
        ExactDistribution::from_counts(counts)
    }

    /// Whether every assignment of the marked variables extends to a
    /// satisfying assignment.
    pub fn all_feasible(&self) -> bool {
        self.counts.iter().all(|&c| c > 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbMode {
    /// Every `v` and every partial assignment in `{0,1,⊥}^(M∖{v})`.
    Exhaustive,
    /// Random partial assignments; only a heuristic upper estimate of `b`.
    Sampled { per_var: usize, seed: u64 },
}

/// `b = min over v ∈ M, σ_Λ feasible of min(μ(v=0|σ_Λ), μ(v=1|σ_Λ))`.
/// An empty marking returns `1/2`.
pub fn min_conditional_lb(f: &Formula, marked: &[VarId], mode: LbMode) -> Result<f64, OracleError> {
    let table = MarkedTable::new(f, marked)?;
    min_conditional_lb_from_table(&table, mode)
}

pub fn min_conditional_lb_from_table(table: &MarkedTable, mode: LbMode) -> Result<f64, OracleError> {
    let m = table.marked.len();
    if m == 0 {
        return Ok(0.5);
    }
    match mode {
        LbMode::Exhaustive => {
            if m > EXHAUSTIVE_MARKED_CAP {
                return Err(OracleError::TooManyMarked {
                    m,
                    cap: EXHAUSTIVE_MARKED_CAP,
                });
            }
            Ok(exhaustive_lb(table))
        }
        LbMode::Sampled { per_var, seed } => Ok(sampled_lb(table, per_var, seed)),
    }
}

/// Ternary digit `j` of an index: 0, 1, or 2 for "unconstrained".
fn exhaustive_lb(table: &MarkedTable) -> f64 {
    let m = table.marked.len();
    let pow3: Vec<usize> = (0..=m).map(|j| 3usize.pow(j as u32)).collect();
    let size = pow3[m];
    let mut sums = vec![0u64; size];
    // seed the fully specified entries
    for (idx, &c) in table.counts.iter().enumerate() {
        let t: usize = (0..m).map(|j| ((idx >> j) & 1) * pow3[j]).sum();
        sums[t] = c;
    }
    // digit-by-digit: S[..2..] = S[..0..] + S[..1..]
    for j in 0..m {
        for t in 0..size {
            if (t / pow3[j]) % 3 == 2 {
                sums[t] = sums[t - 2 * pow3[j]] + sums[t - pow3[j]];
            }
        }
    }
    let mut b = 0.5f64;
    for (j, &p) in pow3.iter().enumerate().take(m) {
        for t in 0..size {
            if (t / p) % 3 != 2 {
                continue;
            }
            let total = sums[t];
            if total == 0 {
                continue;
            }
            let zero = sums[t - 2 * p];
            let one = sums[t - p];
            b = b.min(zero.min(one) as f64 / total as f64);
        }
        let _ = j;
    }
    b
}

fn sampled_lb(table: &MarkedTable, per_var: usize, seed: u64) -> f64 {
    let m = table.marked.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = 0.5f64;
    for v in 0..m {
        for _ in 0..per_var {
            let digits: Vec<u8> = (0..m)
                .map(|j| if j == v { 2 } else { rng.random_range(0..3) })
                .collect();
            let (mut zero, mut one) = (0u64, 0u64);
            for (idx, &c) in table.counts.iter().enumerate() {
                let consistent = digits
                    .iter()
                    .enumerate()
                    .all(|(j, &d)| d == 2 || ((idx >> j) & 1) as u8 == d);
                if consistent {
                    if (idx >> v) & 1 == 1 {
                        one += c;
                    } else {
                        zero += c;
                    }
                }
            }
            if zero + one > 0 {
                b = b.min(zero.min(one) as f64 / (zero + one) as f64);
            }
        }
    }
    b
}

/// `½ Σ |p(ω) − q(ω)|` over the union of supports.
pub fn tv_distance(p: &ExactDistribution, q: &ExactDistribution) -> f64 {
    let mut diff: BTreeMap<&[bool], f64> = BTreeMap::new();
    for (s, &x) in p.support.iter().zip(&p.probabilities) {
        *diff.entry(s.as_slice()).or_default() += x;
    }
    for (s, &x) in q.support.iter().zip(&q.probabilities) {
        *diff.entry(s.as_slice()).or_default() -= x;
    }
    0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
}

pub fn empirical_distribution(samples: &[Vec<bool>]) -> Result<ExactDistribution, OracleError> {
    if samples.is_empty() {
        return Err(OracleError::EmptySampleSet);
    }
    let mut counts: BTreeMap<Vec<bool>, u64> = BTreeMap::new();
    for s in samples {
        *counts.entry(s.clone()).or_default() += 1;
    }
    Ok(ExactDistribution::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_dimacs, Literal};
    use proptest::prelude::*;

    fn x(i: u32) -> VarId {
        VarId::new(i)
    }

    fn example() -> Formula {
        parse_dimacs("p cnf 5 3\n1 2 -3 0\n-2 3 4 0\n-4 5 -1 0\n").unwrap()
    }

    /// Count by evaluating every clause on every assignment, no masks.
    fn naive_count(f: &Formula) -> usize {
        let n = f.num_vars();
        (0..1u32 << n)
            .filter(|&bits| {
                let a: Vec<bool> = (0..n).map(|i| bits & (1 << i) != 0).collect();
                f.is_satisfied_by(&a)
            })
            .count()
    }

    #[test]
    fn example_sat_count() {
        let f = example();
        let all = enumerate_sat(&f).unwrap();
        assert_eq!(all.len(), naive_count(&f));
        assert_eq!(all.len(), 20);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!(all.iter().all(|a| f.is_satisfied_by(a)));
    }

    #[test]
    fn trivial_enumerations() {
        let f = parse_dimacs("p cnf 2 0\n").unwrap();
        assert_eq!(enumerate_sat(&f).unwrap().len(), 4);
        let g = parse_dimacs("p cnf 1 2\n1 0\n-1 0\n").unwrap();
        assert!(enumerate_sat(&g).unwrap().is_empty());
        let big = Formula::new(27, vec![]).unwrap();
        assert_eq!(
            enumerate_sat(&big),
            Err(OracleError::TooManyVariables { n: 27, cap: 26 })
        );
    }

    #[test]
    fn marginal_of_single_clause() {
        let f = Formula::new(3, vec![vec![Literal::pos(1), Literal::neg(3)]]).unwrap();
        let d = exact_marginal(&f, &[x(1)], &PartialAssignment::new()).unwrap();
        assert!((d.prob(&[true]) - 2.0 / 3.0).abs() < 1e-15);
        let free = Formula::new(2, vec![]).unwrap();
        let d = exact_marginal(&free, &[x(2)], &PartialAssignment::new()).unwrap();
        assert_eq!(d.probabilities, vec![0.5, 0.5]);
    }

    #[test]
    fn degenerate_conditioning_is_point_mass() {
        let f = example();
        // x2 = 1 and x3 = 0 falsify the rest of C2 unless x4 = 1
        let sigma = PartialAssignment::from_bits([(x(2), true), (x(3), false)]);
        let d = exact_marginal(&f, &[x(4)], &sigma).unwrap();
        assert_eq!(d.support, vec![vec![true]]);
        assert_eq!(d.probabilities, vec![1.0]);
        assert_eq!(
            exact_marginal(&f, &[x(2)], &sigma),
            Err(OracleError::ConditionedTarget(x(2)))
        );
        let contra = PartialAssignment::from_bits([(x(1), false), (x(2), false), (x(3), true)]);
        assert_eq!(
            exact_marginal(&f, &[x(4)], &contra),
            Err(OracleError::NoSatisfyingAssignment)
        );
    }

    #[test]
    fn min_lb_examples() {
        let free = Formula::new(3, vec![]).unwrap();
        assert_eq!(
            min_conditional_lb(&free, &[x(1), x(2)], LbMode::Exhaustive).unwrap(),
            0.5
        );
        let f = Formula::new(3, vec![vec![Literal::pos(1), Literal::pos(2), Literal::pos(3)]]).unwrap();
        let b = min_conditional_lb(&f, &[x(1), x(2)], LbMode::Exhaustive).unwrap();
        assert!((b - 1.0 / 3.0).abs() < 1e-15, "b = {b}");
        assert_eq!(min_conditional_lb(&f, &[], LbMode::Exhaustive).unwrap(), 0.5);
    }

    #[test]
    fn min_lb_matches_direct_minimisation_on_example() {
        let f = example();
        let marked = [x(2), x(5)];
        let b = min_conditional_lb(&f, &marked, LbMode::Exhaustive).unwrap();
        // direct: each v, each σ on the other marked variable in {0,1,⊥}
        let mut direct = 0.5f64;
        for (v, w) in [(x(2), x(5)), (x(5), x(2))] {
            for cond in [None, Some(false), Some(true)] {
                let mut sigma = PartialAssignment::new();
                if let Some(c) = cond {
                    sigma.assign(w, c);
                }
                if let Ok(d) = exact_marginal(&f, &[v], &sigma) {
                    direct = direct.min(d.prob(&[false]).min(d.prob(&[true])));
                }
            }
        }
        assert!((b - direct).abs() < 1e-15);
        let sampled = min_conditional_lb(&f, &marked, LbMode::Sampled { per_var: 64, seed: 1 }).unwrap();
        assert!(sampled >= b - 1e-15);
    }

    #[test]
    fn tv_examples() {
        let p = ExactDistribution {
            support: vec![vec![false], vec![true]],
            probabilities: vec![0.6, 0.4],
        };
        let q = ExactDistribution {
            support: vec![vec![false], vec![true]],
            probabilities: vec![0.5, 0.5],
        };
        assert!((tv_distance(&p, &q) - 0.1).abs() < 1e-12);
        assert_eq!(tv_distance(&p, &p), 0.0);
        let a = ExactDistribution {
            support: vec![vec![false]],
            probabilities: vec![1.0],
        };
        let b = ExactDistribution {
            support: vec![vec![true]],
            probabilities: vec![1.0],
        };
        assert_eq!(tv_distance(&a, &b), 1.0);
    }

    #[test]
    fn empirical_examples() {
        assert_eq!(empirical_distribution(&[]), Err(OracleError::EmptySampleSet));
        let d = empirical_distribution(&vec![vec![true, false]; 5]).unwrap();
        assert_eq!(d.probabilities, vec![1.0]);
        let d = empirical_distribution(&[vec![true], vec![false]]).unwrap();
        assert_eq!(d.probabilities, vec![0.5, 0.5]);
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    fn arb_dist() -> impl Strategy<Value = ExactDistribution> {
        proptest::collection::vec(0u32..10, 8).prop_filter_map("nonzero", |w| {
            let total: u32 = w.iter().sum();
            (total > 0).then(|| {
                let support = (0..8u8)
                    .map(|i| (0..3).map(|j| i & (1 << j) != 0).collect())
                    .collect();
                let probabilities = w.iter().map(|&x| x as f64 / total as f64).collect();
                ExactDistribution {
                    support,
                    probabilities,
                }
            })
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(p in arb_dist(), q in arb_dist(), r in arb_dist()) {
            let pq = tv_distance(&p, &q);
            prop_assert!((pq - tv_distance(&q, &p)).abs() < 1e-12);
            prop_assert!(tv_distance(&p, &p).abs() < 1e-12);
            prop_assert!(pq <= tv_distance(&p, &r) + tv_distance(&r, &q) + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        }

        #[test]
        fn marginalisation_is_consistent(bits in any::<u32>()) {
            let f = example();
            let mut sigma = PartialAssignment::new();
            if bits & 1 == 1 {
                sigma.assign(x(5), bits & 2 != 0);
            }
            let joint = exact_marginal(&f, &[x(1), x(3)], &sigma).unwrap();
            let single = exact_marginal(&f, &[x(1)], &sigma).unwrap();
            for b in [false, true] {
                let summed: f64 = joint
                    .support
                    .iter()
                    .zip(&joint.probabilities)
                    .filter(|(s, _)| s[0] == b)
                    .map(|(_, p)| p)
                    .sum();
                prop_assert!((summed - single.prob(&[b])).abs() < 1e-12);
            }
            prop_assert!((joint.total() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn every_conditional_respects_min_lb(choice in proptest::collection::vec(0u8..3, 2)) {
            let f = example();
            let marked = [x(2), x(5)];
            let b = min_conditional_lb(&f, &marked, LbMode::Exhaustive).unwrap();
            for (vi, &v) in marked.iter().enumerate() {
                let mut sigma = PartialAssignment::new();
                for (wi, &w) in marked.iter().enumerate() {
                    if wi != vi && choice[wi] < 2 {
                        sigma.assign(w, choice[wi] == 1);
                    }
                }
                if let Ok(d) = exact_marginal(&f, &[v], &sigma) {
                    prop_assert!(d.prob(&[false]) >= b - 1e-15);
                    prop_assert!(d.prob(&[true]) >= b - 1e-15);
                }
            }
        }
    }
}
