//! Per-variable queries against one seed-determined sample.
//!
//! A marked variable is answered by the backward Glauber simulation, an
//! unmarked one by exploring its component and drawing a uniform solution
//! of it. The marking and the scan order are functions of the seed alone
//! and are computed once per [`SamplerContext`]; everything else is
//! recomputed on every query.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::component::{conn, uniform_sample_component, DEFAULT_COMPONENT_CAP};
use crate::formula::{Component, Formula, FormulaError, PartialAssignment, ReduceMode, VarId};
use crate::glauber::{
    default_horizon, default_r_cap, theta_default, CallStats, MarginParams, MarginSampler, SamplerError,
    ScanSchedule,
};
use crate::marking::{Marker, MarkingError, MarkingParams};
use crate::oracle::{
    min_conditional_lb, LbMode, OracleError, DEFAULT_ENUMERATION_CAP, EXHAUSTIVE_MARKED_CAP,
};
use crate::tape::Seed;

/// Safety margin subtracted from an exactly computed lower bound.
pub const THETA_MARGIN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Failure {
    #[error("marking failed: {0}")]
    Marking(#[from] MarkingError),
    #[error("sampler failed: {0}")]
    Sampler(#[from] SamplerError),
    #[error("no usable theta: {0}")]
    Theta(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Caps {
    /// Largest component enumerated for an unmarked query.
    pub component: usize,
    /// Largest reduced formula the whole-formula fallback enumerates.
    pub fallback: usize,
    /// Largest `n` for which `θ` is derived by exact enumeration.
    pub oracle_vars: u32,
    /// Largest marking for which `θ` is derived by exact enumeration.
    pub oracle_marked: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            component: DEFAULT_COMPONENT_CAP,
            fallback: DEFAULT_ENUMERATION_CAP as usize,
            oracle_vars: DEFAULT_ENUMERATION_CAP,
            oracle_marked: EXHAUSTIVE_MARKED_CAP,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Default)]
pub struct SamplerConfig {
    pub marking: MarkingParams,
    /// Fixed `θ`; `None` derives it.
    pub theta: Option<f64>,
    /// `T`; `None` uses `64 · m · ⌈ln(n + 1)⌉`.
    pub horizon: Option<i64>,
    /// `T = factor · m`, used when `horizon` is not set.
    pub horizon_per_marked: Option<i64>,
    pub r_cap: Option<usize>,
    pub caps: Caps,
    /// Retry a too-large component on the whole reduced formula.
    pub whole_formula_fallback: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    Given,
    /// `min(θ_formula, b − margin)` with `b` computed exactly.
    Derived,
    /// The closed form alone; the instance is too large to check it.
    Formula,
}

/// Seed-level data shared by all queries: the marking, the scan order and
/// the chain parameters.
#[derive(Clone, Debug, Serialize)]
pub struct Prepared {
    pub marked: BTreeSet<VarId>,
    pub schedule: ScanSchedule,
    pub margin: MarginParams,
    pub theta_source: ThetaSource,
    /// Exact lower bound `b` when it was computed.
    pub lower_bound: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Marked,
    Unmarked,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QueryStats {
    pub margin_calls: usize,
    pub glauber_calls: usize,
    pub max_depth: usize,
    /// Largest `|R|` over the margin calls of this query.
    pub r_size: usize,
    pub cap_hits: usize,
    pub component_vars: Option<usize>,
    pub component_clauses: Option<usize>,
    pub visited_clauses: Option<usize>,
    pub fallback: bool,
}

impl QueryStats {
    fn absorb(&mut self, s: &CallStats) {
        self.margin_calls += 1;
        self.glauber_calls += s.glauber_calls;
        self.max_depth = self.max_depth.max(s.max_depth);
        self.r_size = self.r_size.max(s.r_size);
        self.cap_hits += s.cap_hits;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryOutcome {
    pub var: VarId,
    pub value: bool,
    pub branch: Branch,
    pub stats: QueryStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome {
    pub values: BTreeMap<VarId, bool>,
    /// The first failure in variable order; `values` then holds only the
    /// queries that completed.
    pub failure: Option<(VarId, Failure)>,
}

impl BatchOutcome {
    pub fn into_result(self) -> Result<BTreeMap<VarId, bool>, Failure> {
        match self.failure {
            Some((_, f)) => Err(f),
            None => Ok(self.values),
        }
    }
}

/// An immutable query session over one formula and seed.
#[derive(Debug)]
pub struct SamplerContext {
    formula: Formula,
    seed: Seed,
    config: SamplerConfig,
    prepared: OnceLock<Result<Prepared, Failure>>,
}

impl SamplerContext {
    pub fn new(formula: Formula, seed: Seed, config: SamplerConfig) -> Result<Self, Failure> {
        config.marking.validate()?;
        if let Some(theta) = config.theta {
            if !(theta > 0.0 && theta < 0.5) {
                return Err(Failure::Theta(format!("theta must lie in (0, 1/2), got {theta}")));
            }
        }
        Ok(SamplerContext {
            formula,
            seed,
            config,
            prepared: OnceLock::new(),
        })
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn prepared(&self) -> Result<&Prepared, Failure> {
        self.prepared
            .get_or_init(|| self.prepare())
            .as_ref()
            .map_err(Clone::clone)
    }

    fn prepare(&self) -> Result<Prepared, Failure> {
        let marked = Marker::new(&self.formula, self.seed, self.config.marking)?.full_marking()?;
        let schedule = ScanSchedule::new(marked.iter().copied());
        let n = self.formula.num_vars();
        let profile = self.formula.degree_profile();
        let (theta, theta_source, lower_bound) = match self.config.theta {
            Some(t) => (t, ThetaSource::Given, None),
            None => {
                let closed = theta_default(profile.k_max, profile.d, self.config.marking.alpha).ok();
                let caps = &self.config.caps;
                if n <= caps.oracle_vars && marked.len() <= caps.oracle_marked {
                    let b = if marked.is_empty() {
                        0.5
                    } else {
                        min_conditional_lb(&self.formula, schedule.ordering(), LbMode::Exhaustive)
                            .map_err(|e| Failure::Theta(e.to_string()))?
                    };
                    let t = b - THETA_MARGIN;
                    if t <= 0.0 {
                        return Err(Failure::Theta(format!(
                            "marking is only {b}-marginally lower bounded"
                        )));
                    }
                    (closed.map_or(t, |c| c.min(t)), ThetaSource::Derived, Some(b))
                } else {
                    match closed {
                        Some(c) => (c, ThetaSource::Formula, None),
                        None => return Err(Failure::Theta(
                            "closed-form theta is not positive and the instance is too large to derive one"
                                .into(),
                        )),
                    }
                }
            }
        };
        let margin = MarginParams {
            theta,
            horizon: match (self.config.horizon, self.config.horizon_per_marked) {
                (Some(t), _) => t,
                (None, Some(factor)) => factor * marked.len() as i64,
                (None, None) => default_horizon(marked.len(), n),
            },
            r_cap: self
                .config
                .r_cap
                .unwrap_or_else(|| default_r_cap(profile.d, profile.k_max, n)),
            enumeration_cap: self.config.caps.component,
        };
        margin.validate()?;
        Ok(Prepared {
            marked,
            schedule,
            margin,
            theta_source,
            lower_bound,
        })
    }

    pub fn margin_sampler(&self) -> Result<MarginSampler<'_>, Failure> {
        let p = self.prepared()?;
        Ok(MarginSampler::new(
            &self.formula,
            self.seed,
            &p.schedule,
            p.margin,
        )?)
    }

    pub fn is_marked(&self, v: VarId) -> Result<bool, Failure> {
        self.formula.check_var(v)?;
        Ok(self.prepared()?.schedule.contains(v))
    }

    /// `μ̂_v` for this seed.
    pub fn sample(&self, v: VarId) -> Result<bool, Failure> {
        self.sample_traced(v).map(|o| o.value)
    }

    pub fn sample_traced(&self, v: VarId) -> Result<QueryOutcome, Failure> {
        self.formula.check_var(v)?;
        let ms = self.margin_sampler()?;
        let mut stats = QueryStats::default();
        if ms.schedule().contains(v) {
            let (value, s) = ms.margin_sample_traced(v)?;
            stats.absorb(&s);
            return Ok(QueryOutcome {
                var: v,
                value,
                branch: Branch::Marked,
                stats,
            });
        }
        let explored = conn(&ms, &self.formula, v)?;
        for s in &explored.margin_stats {
            stats.absorb(s);
        }
        stats.component_vars = Some(explored.component.vars.len());
        stats.component_clauses = Some(explored.component.clauses.len());
        stats.visited_clauses = Some(explored.visited_clause_ids.len());
        let value =
            match uniform_sample_component(&self.seed, &explored.component, self.config.caps.component) {
                Ok(a) => a[&v],
                Err(SamplerError::ComponentTooLarge { .. }) if self.config.whole_formula_fallback => {
                    stats.fallback = true;
                    self.whole_formula_value(&ms, v)?
                }
                Err(e) => return Err(e.into()),
            };
        Ok(QueryOutcome {
            var: v,
            value,
            branch: Branch::Unmarked,
            stats,
        })
    }

    /// The value of `v` in a uniform solution of the whole formula reduced
    /// by the complete marked assignment. Isolated components are
    /// independent, so this has the same law as the component draw.
    fn whole_formula_value(&self, ms: &MarginSampler<'_>, v: VarId) -> Result<bool, Failure> {
        let mut tau = PartialAssignment::new();
        for &u in ms.schedule().ordering() {
            tau.assign(u, ms.margin_sample(u)?);
        }
        let reduced = self.formula.reduce(&tau, ReduceMode::Strict)?;
        let whole = Component {
            canonical_rep: *reduced.free_vars.iter().next().expect("v is free"),
            vars: reduced.free_vars,
            clauses: reduced.clauses,
        };
        let a = uniform_sample_component(&self.seed, &whole, self.config.caps.fallback)?;
        Ok(a[&v])
    }

    /// `{v → sample(v)}` over the distinct variables of `vars`, evaluated in
    /// parallel.
    pub fn sample_many(&self, vars: &[VarId]) -> BatchOutcome {
        let distinct: Vec<VarId> = vars
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let results: Vec<(VarId, Result<bool, Failure>)> =
            distinct.par_iter().map(|&v| (v, self.sample(v))).collect();
        let mut values = BTreeMap::new();
        let mut failure = None;
        for (v, r) in results {
            match r {
                Ok(b) => {
                    values.insert(v, b);
                }
                Err(e) => {
                    if failure.is_none() {
                        failure = Some((v, e));
                    }
                }
            }
        }
        BatchOutcome { values, failure }
    }

    pub fn sample_all(&self) -> BatchOutcome {
        let all: Vec<VarId> = self.formula.vars().collect();
        self.sample_many(&all)
    }

    pub fn conn(&self, v: VarId) -> Result<crate::component::ConnResult, Failure> {
        Ok(conn(&self.margin_sampler()?, &self.formula, v)?)
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Failure::Sampler(SamplerError::Oracle(e))
    }
}
