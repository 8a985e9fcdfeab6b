//! Executable verification suites: a seeded random instance corpus and one
//! function per acceptance criterion, each returning a serialisable
//! [`CriterionResult`] with the measured values.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::component::conn;
use crate::conditions::{check_all, MONOTONICITY_GRID};
use crate::formula::{parse_dimacs, Component, Formula, Literal, PartialAssignment, VarId};
use crate::glauber::{
    lb_value, padding_prob, padding_sides, MarginParams, MarginSampler, SamplerError, ScanSchedule,
};
use crate::local_access::{Failure, SamplerConfig, SamplerContext};
use crate::marking::{validate_marking, Marker, MarkingParams};
use crate::oracle::{
    enumerate_sat, min_conditional_lb_from_table, tv_distance, uniform_over_sat, ExactDistribution, LbMode,
    MarkedTable,
};
use crate::tape::{u01, Seed, StreamKey};

/// The three-clause formula used throughout as a worked example.
pub const EXAMPLE_DIMACS: &str = "p cnf 5 3\n1 2 -3 0\n-2 3 4 0\n-4 5 -1 0\n";

pub fn example_formula() -> Formula {
    parse_dimacs(EXAMPLE_DIMACS).expect("example parses")
}

/// A random satisfiable `k`-CNF with `k ∈ {4..7}`, every variable in at
/// most `d ≤ 3` clauses and `n ≤ 24`.
pub fn random_instance(seed: u64) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let k = rng.random_range(4..=7usize);
        let d = rng.random_range(2..=3usize);
        let n = rng.random_range(k as u32 + 4..=24);
        let max_clauses = n as usize * d / k;
        let target = rng.random_range(max_clauses / 2..=max_clauses).max(1);
        let mut occ = vec![0usize; n as usize + 1];
        let mut clauses = Vec::new();
        for _ in 0..target {
            let open: Vec<u32> = (1..=n).filter(|&v| occ[v as usize] < d).collect();
            if open.len() < k {
                break;
            }
            let mut chosen: Vec<u32> = open.choose_multiple(&mut rng, k).copied().collect();
            chosen.sort_unstable();
            for &v in &chosen {
                occ[v as usize] += 1;
            }
            clauses.push(
                chosen
                    .into_iter()
                    .map(|v| Literal::new(VarId::new(v), rng.random_bool(0.5)))
                    .collect(),
            );
        }
        let f = Formula::new(n, clauses).expect("generated clauses are well formed");
        if enumerate_sat(&f).map(|s| !s.is_empty()).unwrap_or(false) {
            return f;
        }
    }
}

pub fn corpus(instances: usize, base: u64) -> Vec<Formula> {
    (0..instances as u64).map(|i| random_instance(base + i)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    /// `None` for monitored-only criteria.
    pub pass: Option<bool>,
    pub measured: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CriterionResult {
    fn new(id: u32, name: &str) -> Self {
        CriterionResult {
            id,
            name: name.to_string(),
            pass: None,
            measured: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn set(&mut self, key: &str, value: impl Into<f64>) {
        self.measured.insert(key.to_string(), value.into());
    }

    pub fn passed(&self) -> bool {
        self.pass.unwrap_or(true)
    }

    /// One line: `criterion 3 memory-less consistency: PASS (key=value ...)`.
    pub fn line(&self) -> String {
        let verdict = match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "MONITORED",
        };
        let measured: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "criterion {} {}: {} ({})",
            self.id,
            self.name,
            verdict,
            measured.join(", ")
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionResult>,
    pub all_pass: bool,
}

impl VerifyReport {
    pub fn new(criteria: Vec<CriterionResult>) -> Self {
        let all_pass = criteria.iter().all(CriterionResult::passed);
        VerifyReport { criteria, all_pass }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub marking: MarkingParams,
    /// Instances to run on instead of the generated corpus.
    pub formulas: Option<Vec<Formula>>,
    pub corpus_base: u64,
    pub seeds_per_instance: u64,
    pub tv_samples: u64,
    pub lb_timestamps: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            marking: MarkingParams::desk(),
            formulas: None,
            corpus_base: 0,
            seeds_per_instance: 3,
            tv_samples: 200_000,
            lb_timestamps: 1_000_000,
        }
    }
}

impl VerifyOptions {
    fn instances(&self, count: usize) -> Vec<Formula> {
        self.formulas
            .clone()
            .unwrap_or_else(|| corpus(count, self.corpus_base))
    }

    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            marking: self.marking,
            ..Default::default()
        }
    }
}

/// Forward and backward chains agree on every marked variable when `θ` is
/// the exact lower bound minus `1e−9` and `T = 8m`.
pub fn coupling(opts: &VerifyOptions) -> CriterionResult {
    let mut r = CriterionResult::new(1, "coupling exactness");
    let (mut compared, mut mismatches, mut cap_skipped, mut infeasible, mut marking_failed, mut other) =
        (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    for (i, f) in opts.instances(30).iter().enumerate() {
        for s in 0..opts.seeds_per_instance {
            let seed = Seed::from_u64(1000 * i as u64 + s);
            let marked = match Marker::new(f, seed, opts.marking).and_then(|m| m.full_marking()) {
                Ok(m) if !m.is_empty() => m,
                Ok(_) => continue,
                Err(_) => {
                    marking_failed += 1;
                    continue;
                }
            };
            let schedule = ScanSchedule::new(marked.iter().copied());
            let Ok(table) = MarkedTable::new(f, schedule.ordering()) else {
                other += 1;
                continue;
            };
            let Ok(b) = min_conditional_lb_from_table(&table, LbMode::Exhaustive) else {
                other += 1;
                continue;
            };
            let defaults = crate::glauber::default_margin_params(f, schedule.m(), 0.25);
            let params = MarginParams {
                theta: b - 1e-9,
                horizon: 8 * schedule.m() as i64,
                ..defaults
            };
            let Ok(ms) = MarginSampler::new(f, seed, &schedule, params) else {
                other += 1;
                continue;
            };
            let forward = match ms.forward_scan_with(&table) {
                Ok(x) => x,
                Err(SamplerError::InfeasibleState { .. }) => {
                    infeasible += 1;
                    continue;
                }
                Err(_) => {
                    other += 1;
                    continue;
                }
            };
            for &u in schedule.ordering() {
                match ms.margin_sample_traced(u) {
                    Ok((_, st)) if st.cap_hits > 0 => cap_skipped += 1,
                    Ok((b, _)) => {
                        compared += 1;
                        if b != forward[&u] {
                            mismatches += 1;
                            r.notes.push(format!("instance {i} seed {s} var {u}"));
                        }
                    }
                    Err(_) => mismatches += 1,
                }
            }
        }
    }
    r.set("compared", compared as f64);
    r.set("mismatches", mismatches as f64);
    r.set("cap_skipped", cap_skipped as f64);
    r.set("infeasible_start_skipped", infeasible as f64);
    r.set("marking_failures", marking_failed as f64);
    r.set("other_skipped", other as f64);
    r.pass = Some(mismatches == 0 && compared > 0);
    r
}

/// Empirical joint law of the full assignments assembled over many seeds
/// against the uniform law on satisfying assignments. Seeds that fail
/// assemble nothing; they are counted and reported next to the distance.
pub fn joint_tv(opts: &VerifyOptions) -> CriterionResult {
    let mut r = CriterionResult::new(2, "joint distributional correctness");
    let f = opts
        .formulas
        .as_ref()
        .and_then(|fs| fs.first().cloned())
        .unwrap_or_else(example_formula);
    let target = match uniform_over_sat(&f) {
        Ok(t) => t,
        Err(e) => {
            r.notes.push(e.to_string());
            r.pass = Some(false);
            return r;
        }
    };
    let mut counts: BTreeMap<Vec<bool>, u64> = BTreeMap::new();
    let mut failures = 0u64;
    let n = opts.tv_samples;
    for s in 0..n {
        let config = SamplerConfig {
            horizon_per_marked: Some(64),
            ..opts.config()
        };
        let result = SamplerContext::new(f.clone(), Seed::from_u64(s), config)
            .and_then(|ctx| ctx.sample_all().into_result());
        match result {
            Ok(values) => *counts.entry(values.into_values().collect()).or_default() += 1,
            Err(_) => failures += 1,
        }
    }
    let ok = n - failures;
    let (tv, tv_with_failures) = if ok == 0 {
        (1.0, 1.0)
    } else {
        let empirical = ExactDistribution::from_counts(counts);
        let scale = ok as f64 / n as f64;
        let tv = tv_distance(&empirical, &target);
        // failed seeds as an outcome the target never produces
        let diff: f64 = target
            .support
            .iter()
            .zip(&target.probabilities)
            .map(|(w, &q)| (scale * empirical.prob(w) - q).abs())
            .sum::<f64>()
            + empirical
                .support
                .iter()
                .filter(|w| target.prob(w) == 0.0)
                .map(|w| scale * empirical.prob(w))
                .sum::<f64>();
        (tv, 0.5 * (diff + failures as f64 / n as f64))
    };
    r.set("samples", n as f64);
    r.set("failures", failures as f64);
    r.set("support", target.support.len() as f64);
    r.set("tv", tv);
    r.set("tv_counting_failures", tv_with_failures);
    r.set("tolerance", 0.02);
    r.pass = Some(tv <= 0.02);
    r
}

/// Ascending, descending and shuffled-with-duplicates query schedules give
/// identical answers.
pub fn memoryless(opts: &VerifyOptions) -> CriterionResult {
    let mut r = CriterionResult::new(3, "memory-less consistency");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut runs, mut disagreements, mut queries) = (0u64, 0u64, 0u64);
    for (i, f) in opts.instances(10).iter().enumerate() {
        let vars: Vec<VarId> = f.vars().collect();
        for s in 0..20u64 {
            let seed = Seed::from_u64(7000 + 100 * i as u64 + s);
            let mut shuffled = vars.clone();
            shuffled.extend(vars.iter().filter(|_| rng.random_bool(0.3)).copied());
            shuffled.shuffle(&mut rng);
            let mut descending = vars.clone();
            descending.reverse();
            let mut outputs = Vec::new();
            for order in [&vars, &descending, &shuffled] {
                let Ok(ctx) = SamplerContext::new(f.clone(), seed, opts.config()) else {
                    continue;
                };
                let mut got: BTreeMap<VarId, Result<bool, Failure>> = BTreeMap::new();
                for &v in order {
                    let x = ctx.sample(v);
                    queries += 1;
                    if let Some(prev) = got.get(&v) {
                        if *prev != x {
                            disagreements += 1;
                        }
                    }
                    got.insert(v, x);
                }
                outputs.push(got);
            }
            runs += 1;
            if outputs.windows(2).any(|w| w[0] != w[1]) {
                disagreements += 1;
                r.notes.push(format!("instance {i} seed {s}"));
            }
        }
    }
    r.set("runs", runs as f64);
    r.set("queries", queries as f64);
    r.set("disagreements", disagreements as f64);
    r.pass = Some(disagreements == 0 && runs > 0);
    r
}

/// Where all phases succeed the marking is a valid α-marking and does not
/// depend on the query order.
pub fn marking_validity(opts: &VerifyOptions) -> CriterionResult {
    let mut r = CriterionResult::new(4, "marking validity and obliviousness");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut succeeded, mut failed, mut invalid, mut order_dependent) = (0u64, 0u64, 0u64, 0u64);
    for (i, f) in opts.instances(50).iter().enumerate() {
        let seed = Seed::from_u64(4000 + i as u64);
        let Ok(marker) = Marker::new(f, seed, opts.marking) else {
            failed += 1;
            continue;
        };
        let marked = match marker.full_marking() {
            Ok(m) => m,
            Err(e) => {
                failed += 1;
                r.notes.push(format!("instance {i}: {e}"));
                continue;
            }
        };
        succeeded += 1;
        if !validate_marking(f, &marked, opts.marking.alpha).valid {
            invalid += 1;
        }
        let mut order: Vec<VarId> = f.vars().collect();
        order.shuffle(&mut rng);
        let fresh = Marker::new(f, seed, opts.marking).expect("params validated above");
        let mut again = BTreeSet::new();
        for v in order {
            match fresh.is_marked(v) {
                Ok(true) => {
                    again.insert(v);
                }
                Ok(false) => {}
                Err(_) => {
                    order_dependent += 1;
                    break;
                }
            }
        }
        if again != marked {
            order_dependent += 1;
        }
    }
    r.set("succeeded", succeeded as f64);
    r.set("failed", failed as f64);
    r.set("invalid", invalid as f64);
    r.set("order_dependent", order_dependent as f64);
    r.pass = Some(invalid == 0 && order_dependent == 0 && succeeded > 0);
    r
}

/// Frequencies of 0, 1, ⊥ from the lower-bound sampler at `θ = 0.4`.
pub fn lb_law(opts: &VerifyOptions) -> CriterionResult {
    let mut r = CriterionResult::new(5, "LB-Sample law");
    let theta = 0.4;
    let seed = Seed::from_u64(5);
    let mut c = [0u64; 3];
    for t in 1..=opts.lb_timestamps {
        let x = u01(&seed, StreamKey::LbSample(-(t as i64)));
        let slot = match lb_value(x, theta).bit() {
            Some(false) => 0,
            Some(true) => 1,
            None => 2,
        };
        c[slot] += 1;
    }
    let n = opts.lb_timestamps as f64;
    let freq = c.map(|x| x as f64 / n);
    let expect = [theta, theta, 1.0 - 2.0 * theta];
    let dev = freq
        .iter()
        .zip(expect)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    r.set("freq_0", freq[0]);
    r.set("freq_1", freq[1]);
    r.set("freq_bottom", freq[2]);
    r.set("max_deviation", dev);
    r.pass = Some(dev <= 0.005);
    r
}

/// Padding probability on `(x1 ∨ ¬x3)` at `θ = 1/4`, and `p0 + p1 = 1` on
/// random small components.
pub fn padding(_opts: &VerifyOptions) -> CriterionResult {
    let mut r = CriterionResult::new(6, "padding distribution exactness");
    let f = Formula::new(3, vec![vec![Literal::pos(1), Literal::neg(3)]]).expect("well formed");
    let psi = f
        .component_of(&PartialAssignment::new(), VarId::new(1))
        .expect("x1 exists");
    let p = padding_prob(&psi, VarId::new(1), 0.25, 22).unwrap_or(f64::NAN);
    let example_err = (p - 5.0 / 6.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut tested = 0;
    while tested < 100 {
        let psi = random_component(&mut rng);
        let u = *psi
            .vars
            .iter()
            .nth(rng.random_range(0..psi.vars.len()))
            .expect("nonempty");
        let Ok((total, ones)) = crate::component::count_with(&psi, u, 22) else {
            continue;
        };
        if total == 0 || ones == 0 || ones == total {
            continue;
        }
        let q1 = ones as f64 / total as f64;
        let theta = rng.random_range(0.0..1.0) * q1.min(1.0 - q1).min(0.499);
        if theta <= 0.0 {
            continue;
        }
        match padding_sides(&psi, u, theta, 22) {
            Ok((p0, p1)) => worst = worst.max((p0 + p1 - 1.0).abs()),
            Err(_) => worst = f64::INFINITY,
        }
        tested += 1;
    }
    r.set("example_p1", p);
    r.set("example_error", example_err);
    r.set("components", tested as f64);
    r.set("max_normalisation_error", worst);
    r.pass = Some(example_err <= 1e-12 && worst <= 1e-12);
    r
}

fn random_component(rng: &mut ChaCha8Rng) -> Component {
    let n = rng.random_range(2..=8u32);
    let clauses: Vec<Vec<Literal>> = (0..rng.random_range(1..=4))
        .map(|_| {
            let width = rng.random_range(1..=3usize).min(n as usize);
            let vars: Vec<u32> = (1..=n)
                .collect::<Vec<_>>()
                .choose_multiple(rng, width)
                .copied()
                .collect();
            let mut vars = vars;
            vars.sort_unstable();
            vars.into_iter()
                .map(|v| Literal::new(VarId::new(v), rng.random_bool(0.5)))
                .collect()
        })
        .collect();
    let f = Formula::new(n, clauses).expect("well formed");
    let start = f.clause(0).literals()[0].var;
    f.component_of(&PartialAssignment::new(), start)
        .expect("start exists")
}

/// `conn(v)` equals the component of `v` under the complete marked
/// assignment, for every unmarked `v`.
pub fn conn_agreement(opts: &VerifyOptions) -> CriterionResult {
    let mut r = CriterionResult::new(7, "Conn agreement");
    let (mut compared, mut mismatches, mut failures) = (0u64, 0u64, 0u64);
    for (i, f) in opts.instances(30).iter().enumerate() {
        let seed = Seed::from_u64(7700 + i as u64);
        let Ok(ctx) = SamplerContext::new(f.clone(), seed, opts.config()) else {
            failures += 1;
            continue;
        };
        let Ok(ms) = ctx.margin_sampler() else {
            failures += 1;
            continue;
        };
        let mut tau = PartialAssignment::new();
        let mut ok = true;
        for &u in ms.schedule().ordering() {
            match ms.margin_sample(u) {
                Ok(b) => tau.assign(u, b),
                Err(_) => ok = false,
            }
        }
        if !ok {
            failures += 1;
            continue;
        }
        for v in f.vars().filter(|&v| !ms.schedule().contains(v)) {
            let expected = f.component_of(&tau, v).expect("v is unmarked");
            match conn(&ms, f, v) {
                Ok(got) => {
                    compared += 1;
                    if got.component != expected {
                        mismatches += 1;
                        r.notes.push(format!("instance {i} var {v}"));
                    }
                }
                Err(_) => mismatches += 1,
            }
        }
    }
    r.set("compared", compared as f64);
    r.set("mismatches", mismatches as f64);
    r.set("seed_failures", failures as f64);
    r.pass = Some(mismatches == 0 && compared > 0);
    r
}

/// Every inequality at `k = 10⁴`, `d = 2^25` with the asymptotic constants,
/// including monotonicity on the grid.
pub fn constants(_opts: &VerifyOptions) -> CriterionResult {
    let mut r = CriterionResult::new(8, "constants verification");
    let report = check_all(10_000, 25.0, &MarkingParams::asymptotic());
    for c in &report.checks {
        r.set(&c.name, if c.pass { 1.0 } else { 0.0 });
        if !c.pass {
            r.notes.push(format!("fails: {} (slack {})", c.name, c.slack));
        }
    }
    r.set("monotonicity_grid", MONOTONICITY_GRID as f64);
    r.pass = Some(report.all_pass);
    r
}

/// `|R|` tail against `P[|R| ≥ 24dk⁴(η+1)] ≤ 2^−η` and component clause
/// counts against `k·d·log²n`.
pub fn monitored_stats(opts: &VerifyOptions) -> CriterionResult {
    let mut r = CriterionResult::new(9, "monitored statistics");
    let mut r_sizes: Vec<(usize, f64)> = Vec::new();
    let mut comps: Vec<(usize, f64)> = Vec::new();
    for (i, f) in opts.instances(10).iter().enumerate() {
        let p = f.degree_profile();
        let unit = 24.0 * p.d as f64 * (p.k_max as f64).powi(4);
        let log_n = f64::from(f.num_vars().max(2)).log2();
        let comp_bound = (p.k_max * p.d) as f64 * log_n * log_n;
        let ctx = match SamplerContext::new(f.clone(), Seed::from_u64(9000 + i as u64), opts.config()) {
            Ok(c) => c,
            Err(_) => continue,
        };
        for v in f.vars() {
            if let Ok(o) = ctx.sample_traced(v) {
                if o.stats.margin_calls > 0 {
                    r_sizes.push((o.stats.r_size, unit));
                }
                if let Some(c) = o.stats.component_clauses {
                    comps.push((c, comp_bound));
                }
            }
        }
    }
    if !r_sizes.is_empty() {
        let mut sizes: Vec<usize> = r_sizes.iter().map(|&(s, _)| s).collect();
        sizes.sort_unstable();
        r.set("r_queries", sizes.len() as f64);
        r.set("r_mean", sizes.iter().sum::<usize>() as f64 / sizes.len() as f64);
        r.set("r_median", sizes[sizes.len() / 2] as f64);
        r.set("r_max", *sizes.last().expect("nonempty") as f64);
        for eta in 0..4u32 {
            let tail = r_sizes
                .iter()
                .filter(|&&(s, unit)| s as f64 >= unit * f64::from(eta + 1))
                .count() as f64
                / r_sizes.len() as f64;
            r.set(&format!("r_tail_eta{eta}"), tail);
            r.set(&format!("r_tail_bound_eta{eta}"), 0.5f64.powi(eta as i32));
        }
    }
    if !comps.is_empty() {
        let within = comps.iter().filter(|&&(c, b)| c as f64 <= b).count();
        r.set("components", comps.len() as f64);
        r.set(
            "component_clauses_max",
            comps.iter().map(|&(c, _)| c).max().unwrap_or(0) as f64,
        );
        r.set("components_within_bound", within as f64 / comps.len() as f64);
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Coupling,
    Tv,
    Memoryless,
    Marking,
    LbLaw,
    Padding,
    Conn,
    Constants,
    Stats,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Coupling,
        Suite::Tv,
        Suite::Memoryless,
        Suite::Marking,
        Suite::LbLaw,
        Suite::Padding,
        Suite::Conn,
        Suite::Constants,
        Suite::Stats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Coupling => "coupling",
            Suite::Tv => "tv",
            Suite::Memoryless => "memoryless",
            Suite::Marking => "marking",
            Suite::LbLaw => "lb-law",
            Suite::Padding => "padding",
            Suite::Conn => "conn",
            Suite::Constants => "constants",
            Suite::Stats => "stats",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn run(self, opts: &VerifyOptions) -> CriterionResult {
        match self {
            Suite::Coupling => coupling(opts),
            Suite::Tv => joint_tv(opts),
            Suite::Memoryless => memoryless(opts),
            Suite::Marking => marking_validity(opts),
            Suite::LbLaw => lb_law(opts),
            Suite::Padding => padding(opts),
            Suite::Conn => conn_agreement(opts),
            Suite::Constants => constants(opts),
            Suite::Stats => monitored_stats(opts),
        }
    }
}

pub fn run_suites(suites: &[Suite], opts: &VerifyOptions) -> VerifyReport {
    VerifyReport::new(suites.iter().map(|s| s.run(opts)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_respects_bounds() {
        for f in corpus(20, 0) {
            let p = f.degree_profile();
            assert!((4..=7).contains(&p.k_max));
            assert!(p.d <= 3);
            assert!(f.num_vars() <= 24);
            assert!(!enumerate_sat(&f).unwrap().is_empty());
        }
    }

    #[test]
    fn corpus_is_reproducible() {
        assert_eq!(random_instance(11), random_instance(11));
    }

    #[test]
    fn small_suites_pass() {
        let opts = VerifyOptions {
            lb_timestamps: 200_000,
            ..Default::default()
        };
        let lb = lb_law(&opts);
        assert_eq!(lb.pass, Some(true), "{}", lb.line());
        let pad = padding(&opts);
        assert_eq!(pad.pass, Some(true), "{}", pad.line());
    }

    #[test]
    fn coupling_on_example() {
        let opts = VerifyOptions {
            formulas: Some(vec![example_formula()]),
            seeds_per_instance: 20,
            ..Default::default()
        };
        let r = coupling(&opts);
        assert_eq!(r.pass, Some(true), "{}", r.line());
    }

    #[test]
    fn line_format() {
        let mut r = CriterionResult::new(5, "x");
        r.set("a", 1.0);
        r.pass = Some(false);
        assert_eq!(r.line(), "criterion 5 x: FAIL (a=1)");
    }
}
