//! Systematic-scan Glauber dynamics on the marked variables, simulated
//! backwards from time 0 (coupling towards the past), plus the forward
//! chain it simulates.
//!
//! The chain runs over times `−T+1, …, 0`, starting from `X_{−T} = Y` with
//! `Y(u) = bit(InitY(u))`. At time `t` it resamples `u_{i(t)}`,
//! `i(t) = (t mod m) + 1`, from its conditional law given the other marked
//! variables, split in two regimes driven by `x = u01(LbSample(t))`:
//!
//! * `x < 2θ`: the value is `⌊x/θ⌋`, with no need to look at anything else;
//! * otherwise it is `u01(PaddingDraw(t)) < (q1 − θ)/(1 − 2θ)`, where `q1`
//!   is the conditional probability of 1.
//!
//! [`MarginSampler::glauber`] reveals only the history needed to recover
//! one coordinate. Since both directions read the same tape entries, the
//! backward answer equals the forward chain exactly whenever the `|R|` cap
//! is not reached.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::component::{count_with, DEFAULT_COMPONENT_CAP};
use crate::conditions::theta_value;
use crate::formula::{clause_satisfied, Component, Formula, FormulaError, PartialAssignment, Ternary, VarId};
use crate::oracle::{MarkedTable, OracleError};
use crate::tape::{bit, u01, Seed, StreamKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("theta {theta} is not a valid lower bound (conditional marginal {q1})")]
    InvalidTheta { theta: f64, q1: f64 },
    #[error("component with {vars} variables exceeds the enumeration cap {cap}")]
    ComponentTooLarge { vars: usize, cap: usize },
    #[error("component around {rep} has no satisfying assignment")]
    NoSatisfyingAssignment { rep: VarId },
    #[error("variable {0} is not marked")]
    NotMarked(VarId),
    #[error("variable {0} is not in the component")]
    NotInComponent(VarId),
    #[error("variable {0} is marked")]
    Marked(VarId),
    #[error("chain state at time {t} has no satisfying extension")]
    InfeasibleState { t: i64 },
    #[error("invalid sampler parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// `i(t) = (t mod m) + 1` with a non-negative modulus.
pub fn i_of(t: i64, m: usize) -> usize {
    t.rem_euclid(m as i64) as usize + 1
}

/// `pred_{u_i}(t) = max{s ≤ t : i(s) = i}`.
pub fn pred(u_index: usize, t: i64, m: usize) -> i64 {
    t - (t - (u_index as i64 - 1)).rem_euclid(m as i64)
}

/// The marked variables in ascending order, `u_1, …, u_m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScanSchedule {
    ordering: Vec<VarId>,
    #[serde(skip)]
    index: HashMap<VarId, usize>,
}

impl ScanSchedule {
    pub fn new(marked: impl IntoIterator<Item = VarId>) -> Self {
        let set: BTreeSet<VarId> = marked.into_iter().collect();
        let ordering: Vec<VarId> = set.into_iter().collect();
        let index = ordering.iter().enumerate().map(|(i, &v)| (v, i + 1)).collect();
        ScanSchedule { ordering, index }
    }

    pub fn m(&self) -> usize {
        self.ordering.len()
    }

    /// `u_i`, 1-based.
    pub fn var(&self, i: usize) -> VarId {
        self.ordering[i - 1]
    }

    pub fn index_of(&self, v: VarId) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.index.contains_key(&v)
    }

    pub fn ordering(&self) -> &[VarId] {
        &self.ordering
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarginParams {
    pub theta: f64,
    /// `T`: the chain starts at time `−T`.
    pub horizon: i64,
    pub r_cap: usize,
    /// Largest component (in variables) the padding step will enumerate.
    pub enumeration_cap: usize,
}

impl MarginParams {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return Err(SamplerError::InvalidParams(format!(
                "theta must lie in (0, 1/2), got {}",
                self.theta
            )));
        }
        if self.horizon < 0 {
            return Err(SamplerError::InvalidParams("horizon must be non-negative".into()));
        }
        Ok(())
    }
}

/// `64 · m · ⌈ln(n + 1)⌉`.
pub fn default_horizon(m: usize, n: u32) -> i64 {
    64 * m as i64 * (f64::from(n) + 1.0).ln().ceil() as i64
}

/// `⌈80 · d · k⁴ · ln n⌉`, with `ln n` floored at `ln 2` so tiny formulas
/// still get a positive cap.
pub fn default_r_cap(d: usize, k: usize, n: u32) -> usize {
    let ln = f64::from(n.max(2)).ln();
    (80.0 * d as f64 * (k as f64).powi(4) * ln).ceil() as usize
}

/// `θ = 1 − ½ exp(2edk / 2^{αk})`, rejected when not positive.
pub fn theta_default(k: usize, d: usize, alpha: f64) -> Result<f64, SamplerError> {
    let log2_d = if d == 0 {
        f64::NEG_INFINITY
    } else {
        (d as f64).log2()
    };
    let theta = theta_value(k as u64, log2_d, alpha);
    if theta > 0.0 {
        Ok(theta)
    } else {
        Err(SamplerError::InvalidTheta { theta, q1: f64::NAN })
    }
}

/// `(q1 − θ)/(1 − 2θ)` from exact counts, rejecting `θ` that does not
/// lower-bound both sides.
pub fn padding_from_counts(ones: u64, total: u64, theta: f64) -> Option<Result<f64, SamplerError>> {
    if total == 0 {
        return None;
    }
    let q1 = ones as f64 / total as f64;
    if q1 < theta || 1.0 - q1 < theta {
        return Some(Err(SamplerError::InvalidTheta { theta, q1 }));
    }
    Some(Ok((q1 - theta) / (1.0 - 2.0 * theta)))
}

/// Probability that the padding distribution of `u` on the (already
/// reduced) component `psi` is 1.
pub fn padding_prob(psi: &Component, u: VarId, theta: f64, cap: usize) -> Result<f64, SamplerError> {
    if !(theta > 0.0 && theta < 0.5) {
        return Err(SamplerError::InvalidTheta { theta, q1: f64::NAN });
    }
    let (total, ones) = count_with(psi, u, cap)?;
    padding_from_counts(ones, total, theta).unwrap_or(Err(SamplerError::NoSatisfyingAssignment {
        rep: psi.canonical_rep,
    }))
}

/// Both sides of the padding distribution, `(p0, p1)`, computed separately.
pub fn padding_sides(psi: &Component, u: VarId, theta: f64, cap: usize) -> Result<(f64, f64), SamplerError> {
    let p1 = padding_prob(psi, u, theta, cap)?;
    let (total, ones) = count_with(psi, u, cap)?;
    let q0 = (total - ones) as f64 / total as f64;
    Ok(((q0 - theta) / (1.0 - 2.0 * theta), p1))
}

/// Per top-level call bookkeeping.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CallStats {
    pub glauber_calls: usize,
    pub max_depth: usize,
    pub cap_hits: usize,
    /// `|R|` when the call returned.
    pub r_size: usize,
    /// Variables in each component `Ψ` used by a padding draw.
    pub padding_components: Vec<usize>,
}

/// The memo `M` and record `R` of one top-level call.
#[derive(Clone, Debug, Default)]
pub struct CttpState {
    memo: HashMap<i64, bool>,
    record: HashMap<i64, Ternary>,
    pub stats: CallStats,
}

impl CttpState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_len(&self) -> usize {
        self.record.len()
    }

    pub fn memo(&self, t: i64) -> Option<bool> {
        self.memo.get(&t).copied()
    }

    pub fn recorded(&self, t: i64) -> Option<Ternary> {
        self.record.get(&t).copied()
    }
}

/// Backward simulation over a fixed formula, marking and seed.
#[derive(Clone, Copy, Debug)]
pub struct MarginSampler<'a> {
    formula: &'a Formula,
    seed: Seed,
    schedule: &'a ScanSchedule,
    params: MarginParams,
}

impl<'a> MarginSampler<'a> {
    pub fn new(
        formula: &'a Formula,
        seed: Seed,
        schedule: &'a ScanSchedule,
        params: MarginParams,
    ) -> Result<Self, SamplerError> {
        params.validate()?;
        Ok(MarginSampler {
            formula,
            seed,
            schedule,
            params,
        })
    }

    pub fn params(&self) -> &MarginParams {
        &self.params
    }

    pub fn schedule(&self) -> &ScanSchedule {
        self.schedule
    }

    /// `Y(u)`.
    pub fn initial(&self, u: VarId) -> bool {
        bit(&self.seed, StreamKey::InitY(u))
    }

    fn m(&self) -> usize {
        self.schedule.m()
    }

    fn pred_of(&self, w: VarId, t: i64) -> i64 {
        let j = self.schedule.index_of(w).expect("marked variable");
        pred(j, t, self.m())
    }

    pub fn lb_sample(&self, st: &mut CttpState, t: i64) -> Ternary {
        let i = i_of(t, self.m());
        if pred(i, t, self.m()) <= -self.params.horizon {
            return Ternary::from_bit(self.initial(self.schedule.var(i)));
        }
        if let Some(&r) = st.record.get(&t) {
            return r;
        }
        let x = u01(&self.seed, StreamKey::LbSample(t));
        let r = lb_value(x, self.params.theta);
        st.record.insert(t, r);
        r
    }

    /// `X_t(u_{i(t)})`, or 1 once `|R|` reaches the cap.
    pub fn glauber(&self, st: &mut CttpState, t: i64) -> Result<bool, SamplerError> {
        self.glauber_at(st, t, 0)
    }

    fn glauber_at(&self, st: &mut CttpState, t: i64, depth: usize) -> Result<bool, SamplerError> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.glauber_step(st, t, depth))
    }

    fn glauber_step(&self, st: &mut CttpState, t: i64, depth: usize) -> Result<bool, SamplerError> {
        st.stats.glauber_calls += 1;
        st.stats.max_depth = st.stats.max_depth.max(depth);
        let m = self.m();
        let i = i_of(t, m);
        let u = self.schedule.var(i);
        if pred(i, t, m) <= -self.params.horizon {
            return Ok(self.initial(u));
        }
        if st.record.len() >= self.params.r_cap {
            st.stats.cap_hits += 1;
            return Ok(true);
        }
        if let Some(&b) = st.memo.get(&t) {
            return Ok(b);
        }
        if let Some(b) = self.lb_sample(st, t).bit() {
            st.memo.insert(t, b);
            return Ok(b);
        }

        let mut sigma = PartialAssignment::new();
        let mut inside: BTreeSet<VarId> = BTreeSet::from([u]);
        while let Some(cid) = self.next_clause(&inside, &sigma) {
            let clause = self.formula.clause(cid);
            let others: Vec<VarId> = clause
                .vars()
                .filter(|&w| w != u && self.schedule.contains(w))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let lbs: Vec<(VarId, Ternary)> = others
                .iter()
                .map(|&w| (w, self.lb_sample(st, self.pred_of(w, t))))
                .collect();
            let none_satisfies = lbs.iter().all(|&(w, r)| match r.bit() {
                Some(b) => !clause.literal_of(w).expect("w in clause").satisfied_by(b),
                None => true,
            });
            if none_satisfies {
                for &w in &others {
                    let b = self.glauber_at(st, self.pred_of(w, t), depth + 1)?;
                    sigma.assign(w, b);
                }
                inside.extend(clause.vars());
            } else {
                for (w, r) in lbs {
                    // a known value is never forgotten
                    if r != Ternary::Bottom || !sigma.is_assigned(w) {
                        sigma.set(w, r);
                    }
                }
            }
        }
        let psi = self.formula.component_of(&sigma, u)?;
        st.stats.padding_components.push(psi.vars.len());
        let p1 = padding_prob(&psi, u, self.params.theta, self.params.enumeration_cap)?;
        let c = u01(&self.seed, StreamKey::PaddingDraw(t)) < p1;
        st.memo.insert(t, c);
        Ok(c)
    }

    /// Lowest-index clause that meets `inside`, leaves it, and is not
    /// satisfied by `sigma`.
    fn next_clause(&self, inside: &BTreeSet<VarId>, sigma: &PartialAssignment) -> Option<usize> {
        let candidates: BTreeSet<usize> = inside
            .iter()
            .flat_map(|&v| self.formula.occurrences(v).iter().copied())
            .collect();
        candidates.into_iter().find(|&cid| {
            let c = self.formula.clause(cid);
            c.vars().any(|w| !inside.contains(&w)) && !clause_satisfied(c, sigma)
        })
    }

    /// `MarginSample(u)` with a fresh memo and record.
    pub fn margin_sample(&self, u: VarId) -> Result<bool, SamplerError> {
        self.margin_sample_traced(u).map(|(b, _)| b)
    }

    pub fn margin_sample_traced(&self, u: VarId) -> Result<(bool, CallStats), SamplerError> {
        let j = self.schedule.index_of(u).ok_or(SamplerError::NotMarked(u))?;
        let mut st = CttpState::new();
        let b = self.glauber(&mut st, pred(j, 0, self.m()))?;
        st.stats.r_size = st.record.len();
        Ok((b, st.stats))
    }

    /// Runs the chain forward from `X_{−T} = Y` to `X_0`, reading the same
    /// tape entries as the backward simulation. Needs the whole formula to
    /// be small enough for the oracle.
    pub fn forward_scan(&self) -> Result<BTreeMap<VarId, bool>, SamplerError> {
        let table = MarkedTable::new(self.formula, self.schedule.ordering())?;
        self.forward_scan_with(&table)
    }

    pub fn forward_scan_with(&self, table: &MarkedTable) -> Result<BTreeMap<VarId, bool>, SamplerError> {
        debug_assert_eq!(table.marked(), self.schedule.ordering());
        let m = self.m();
        let theta = self.params.theta;
        let mut x: usize = self
            .schedule
            .ordering()
            .iter()
            .enumerate()
            .filter(|(_, &u)| self.initial(u))
            .fold(0, |acc, (j, _)| acc | (1 << j));
        if m > 0 {
            for t in (-self.params.horizon + 1)..=0 {
                let j = i_of(t, m) - 1;
                let value = match lb_value(u01(&self.seed, StreamKey::LbSample(t)), theta).bit() {
                    Some(b) => b,
                    None => {
                        let zero = table.count(x & !(1 << j));
                        let one = table.count(x | (1 << j));
                        let p1 = padding_from_counts(one, zero + one, theta)
                            .ok_or(SamplerError::InfeasibleState { t })??;
                        u01(&self.seed, StreamKey::PaddingDraw(t)) < p1
                    }
                };
                if value {
                    x |= 1 << j;
                } else {
                    x &= !(1 << j);
                }
            }
        }
        Ok(self
            .schedule
            .ordering()
            .iter()
            .enumerate()
            .map(|(j, &u)| (u, x & (1 << j) != 0))
            .collect())
    }
}

/// `⌊x/θ⌋` when `x < 2θ`, otherwise `⊥`.
pub fn lb_value(x: f64, theta: f64) -> Ternary {
    if x < 2.0 * theta {
        Ternary::from_bit(x >= theta)
    } else {
        Ternary::Bottom
    }
}

pub fn default_margin_params(formula: &Formula, m: usize, theta: f64) -> MarginParams {
    let p = formula.degree_profile();
    MarginParams {
        theta,
        horizon: default_horizon(m, formula.num_vars()),
        r_cap: default_r_cap(p.d, p.k_max, formula.num_vars()),
        enumeration_cap: DEFAULT_COMPONENT_CAP,
    }
}
