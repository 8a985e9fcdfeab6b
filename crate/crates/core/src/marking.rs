//! Query-oblivious local computation of an α-marking.
//!
//! The marking is a 2-coloring of the dependency hypergraph in which every
//! clause keeps at least `⌈α·w⌉` variables of each color (`w` its width);
//! color 1 means marked. It is computed in three phases:
//!
//! 1. every variable is colored by a tape bit, in the order of a tape-drawn
//!    rank `a_v`. A clause is deleted once both colors reach `⌈α·w⌉`, and
//!    becomes dangerous once one color exceeds `β1·w`; uncolored variables of
//!    a dangerous clause are *troubled* and skipped.
//! 2. each connected piece of troubled variables (linked by undeleted
//!    clauses) is recolored the same way with threshold `β2`, in several
//!    independent repetitions; the first repetition that leaves small,
//!    solvable residual pieces is kept.
//! 3. the residual pieces are colored by exhaustive search.
//!
//! A variable's phase-1 status depends only on variables reachable from it
//! through chains of clause-sharing neighbours with decreasing rank, so each
//! query simulates phase 1 on that closure alone. [`Marker::decide_all`]
//! instead runs the same phases once over the whole formula; the two must
//! agree, which the tests check.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, VarId};
use crate::tape::{bit, u01, Seed, StreamKey};

pub use crate::conditions::{binary_entropy, check_conditions_marking};

/// Largest residual piece phase 3 will search, whatever the cap factor says.
pub const PHASE3_HARD_LIMIT: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkingParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Failure exponent `c`; informational, reported with the conditions.
    pub c: f64,
    /// Phase-2 repetitions; `None` means `max(8, ⌈ln n / ln ln n⌉)`.
    pub phase2_reps: Option<u32>,
    /// Phase-1 pieces may hold at most `⌈factor · max(ln n, 1)⌉` variables.
    pub component_cap_phase1: f64,
    /// Residual pieces may hold at most `⌈factor · max(ln ln n, 1)⌉`
    /// variables, and never more than [`PHASE3_HARD_LIMIT`].
    pub component_cap_phase3: f64,
    /// Absolute cap on the number of distinct query-tree nodes.
    pub tree_cap: usize,
}

impl MarkingParams {
    /// The asymptotic constants `α = 1/75, β1 = 0.778, β2 = 0.96`.
    pub fn asymptotic() -> Self {
        MarkingParams {
            alpha: 1.0 / 75.0,
            beta1: 0.778,
            beta2: 0.96,
            ..Self::desk()
        }
    }

    /// Constants for small clause widths (`k ≈ 3..9`), where the asymptotic
    /// ones would delete nothing and mark everything dangerous.
    pub fn desk() -> Self {
        MarkingParams {
            alpha: 0.125,
            beta1: 0.55,
            beta2: 0.6,
            c: 1.0,
            phase2_reps: None,
            component_cap_phase1: 64.0,
            component_cap_phase3: 16.0,
            tree_cap: 1 << 20,
        }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        MarkingParams { alpha, ..self }
    }

    /// Checks `0 < α < 1/2` and `1/2 < β1 < β2 < 1 − α`. The stronger
    /// asymptotic chain `4α < 2(1−β2) < 1−β1` is reported by the conditions
    /// checker rather than enforced.
    pub fn validate(&self) -> Result<(), MarkingError> {
        let bad = |why: &str| Err(MarkingError::InvalidParams(why.to_string()));
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad("alpha must lie in (0, 1/2)");
        }
        if !(0.5 < self.beta1 && self.beta1 < self.beta2 && self.beta2 < 1.0 - self.alpha) {
            return bad("need 1/2 < beta1 < beta2 < 1 - alpha");
        }
        if self.component_cap_phase1 <= 0.0 || self.component_cap_phase3 <= 0.0 {
            return bad("component caps must be positive");
        }
        if self.phase2_reps == Some(0) {
            return bad("phase 2 needs at least one repetition");
        }
        Ok(())
    }

    /// `⌈α·w⌉`, robust to `α·w` landing a hair above an integer.
    pub fn need(&self, width: usize) -> usize {
        (self.alpha * width as f64 - 1e-9).ceil().max(0.0) as usize
    }

    pub fn phase2_reps_for(&self, n: u32) -> u32 {
        self.phase2_reps.unwrap_or_else(|| {
            let ln = (n.max(1) as f64).ln();
            let lnln = ln.ln();
            if lnln > 0.0 {
                ((ln / lnln).ceil() as u32).max(8)
            } else {
                8
            }
        })
    }

    pub fn phase1_cap(&self, n: u32) -> usize {
        (self.component_cap_phase1 * (n.max(1) as f64).ln().max(1.0)).ceil() as usize
    }

    pub fn phase3_cap(&self, n: u32) -> usize {
        let lnln = (n.max(1) as f64).ln().ln();
        let cap = (self.component_cap_phase3 * lnln.max(1.0)).ceil() as usize;
        cap.min(PHASE3_HARD_LIMIT)
    }
}

impl Default for MarkingParams {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkingError {
    #[error("invalid marking parameters: {0}")]
    InvalidParams(String),
    #[error("variable {var} is not in the formula")]
    UnknownVariable { var: VarId },
    #[error("query tree of {root} exceeds {cap} nodes")]
    TreeCapExceeded { root: VarId, cap: usize },
    #[error("phase-1 piece around {rep} exceeds {cap} variables")]
    ComponentCapExceeded { rep: VarId, cap: usize },
    #[error("clause {clause} ended phase 1 fully colored but unbalanced")]
    UnresolvedEdge { clause: usize },
    #[error("all {reps} phase-2 repetitions failed on the piece around {rep}")]
    AllRepetitionsFailed { rep: VarId, reps: u32 },
    #[error("no valid coloring of the residual piece around {rep}")]
    NoValidColoring { rep: VarId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseStatus {
    Colored(bool),
    Troubled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarkingDecision {
    pub var: VarId,
    pub marked: bool,
    /// Phase in which the final color was fixed (1, 2 or 3).
    pub phase: u8,
    pub history: Vec<PhaseStatus>,
    /// Phase-2 repetition used, if the variable reached phase 2.
    pub repetition: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QueryTree {
    pub root: VarId,
    pub nodes: BTreeSet<VarId>,
    /// `(parent, child)` pairs of a spanning tree in discovery order.
    pub edges: Vec<(VarId, VarId)>,
}

/// A clause as seen by the phase-3 search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phase3Edge {
    pub clause: usize,
    pub need: usize,
    pub fixed_zeros: usize,
    pub fixed_ones: usize,
    pub free: Vec<VarId>,
}

/// Lexicographically first coloring of `vars` (ascending, 0 before 1) that
/// gives each edge at least `need` variables of each color.
pub fn phase3(vars: &[VarId], edges: &[Phase3Edge]) -> Option<BTreeMap<VarId, bool>> {
    let mut vars = vars.to_vec();
    vars.sort_unstable();
    let pos: HashMap<VarId, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut search = Search {
        edges,
        touching: vec![Vec::new(); vars.len()],
        zeros: edges.iter().map(|e| e.fixed_zeros).collect(),
        ones: edges.iter().map(|e| e.fixed_ones).collect(),
        open: edges.iter().map(|e| e.free.len()).collect(),
        choice: vec![false; vars.len()],
    };
    for (ei, e) in edges.iter().enumerate() {
        for v in &e.free {
            search.touching[pos[v]].push(ei);
        }
    }
    if !(0..edges.len()).all(|ei| search.feasible(ei)) {
        return None;
    }
    search
        .extend(0)
        .then(|| vars.into_iter().zip(search.choice).collect())
}

struct Search<'e> {
    edges: &'e [Phase3Edge],
    touching: Vec<Vec<usize>>,
    zeros: Vec<usize>,
    ones: Vec<usize>,
    open: Vec<usize>,
    choice: Vec<bool>,
}

impl Search<'_> {
    fn feasible(&self, ei: usize) -> bool {
        let need = self.edges[ei].need;
        self.zeros[ei] + self.open[ei] >= need && self.ones[ei] + self.open[ei] >= need
    }

    fn set(&mut self, i: usize, b: bool, undo: bool) {
        for &ei in &self.touching[i] {
            let count = if b {
                &mut self.ones[ei]
            } else {
                &mut self.zeros[ei]
            };
            if undo {
                *count -= 1;
                self.open[ei] += 1;
            } else {
                *count += 1;
                self.open[ei] -= 1;
            }
        }
    }

    fn extend(&mut self, i: usize) -> bool {
        if i == self.choice.len() {
            return true;
        }
        for b in [false, true] {
            self.set(i, b, false);
            if self.touching[i].iter().all(|&ei| self.feasible(ei)) {
                self.choice[i] = b;
                if self.extend(i + 1) {
                    return true;
                }
            }
            self.set(i, b, true);
        }
        false
    }
}

/// Per-clause result of `validate_marking`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClauseBalance {
    pub clause: usize,
    pub marked: usize,
    pub unmarked: usize,
    pub need: usize,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarkingValidation {
    pub valid: bool,
    pub clauses: Vec<ClauseBalance>,
}

pub fn validate_marking(f: &Formula, marking: &BTreeSet<VarId>, alpha: f64) -> MarkingValidation {
    let params = MarkingParams::desk().with_alpha(alpha);
    let clauses: Vec<ClauseBalance> = f
        .clauses()
        .iter()
        .map(|c| {
            let marked = c.vars().filter(|v| marking.contains(v)).count();
            let unmarked = c.width() - marked;
            let need = params.need(c.width());
            ClauseBalance {
                clause: c.id(),
                marked,
                unmarked,
                need,
                ok: marked >= need && unmarked >= need,
            }
        })
        .collect();
    MarkingValidation {
        valid: clauses.iter().all(|c| c.ok),
        clauses,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct EdgeState {
    zeros: usize,
    ones: usize,
    deleted: bool,
    dangerous: bool,
}

/// Phase 1 simulated on a rank-closed set of variables.
#[derive(Clone, Debug)]
pub struct Phase1Run {
    covered: HashSet<VarId>,
    status: HashMap<VarId, PhaseStatus>,
    edges: HashMap<usize, EdgeState>,
}

impl Phase1Run {
    pub fn status(&self, v: VarId) -> Option<PhaseStatus> {
        self.status.get(&v).copied()
    }

    pub fn covered(&self) -> usize {
        self.covered.len()
    }
}

/// A connected piece of troubled variables after phase 1.
#[derive(Clone, Debug)]
pub struct Phase1Component {
    pub vars: BTreeSet<VarId>,
    run: Phase1Run,
}

impl Phase1Component {
    pub fn rep(&self) -> VarId {
        *self.vars.iter().next().expect("pieces are non-empty")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phase2Outcome {
    pub repetition: u32,
    pub status: BTreeMap<VarId, PhaseStatus>,
    /// Phase-3 colors of every troubled-2 variable of the piece.
    pub phase3: BTreeMap<VarId, bool>,
    /// Sizes of the residual pieces handed to phase 3.
    pub residual_sizes: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
struct Rank(f64);

impl PartialEq for Rank {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Rank {}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Evaluates the marking for one formula, seed and parameter set.
#[derive(Clone, Debug)]
pub struct Marker<'a> {
    formula: &'a Formula,
    seed: Seed,
    params: MarkingParams,
}

impl<'a> Marker<'a> {
    pub fn new(formula: &'a Formula, seed: Seed, params: MarkingParams) -> Result<Self, MarkingError> {
        params.validate()?;
        Ok(Marker {
            formula,
            seed,
            params,
        })
    }

    pub fn params(&self) -> &MarkingParams {
        &self.params
    }

    /// `a_v`, ties broken by variable index.
    pub fn rank(&self, v: VarId) -> f64 {
        u01(&self.seed, StreamKey::MarkOrder(v))
    }

    fn key(&self, v: VarId) -> (Rank, VarId) {
        (Rank(self.rank(v)), v)
    }

    fn check(&self, v: VarId) -> Result<(), MarkingError> {
        self.formula
            .check_var(v)
            .map_err(|_| MarkingError::UnknownVariable { var: v })
    }

    pub fn query_tree(&self, v: VarId) -> Result<QueryTree, MarkingError> {
        self.check(v)?;
        let mut nodes = BTreeSet::from([v]);
        let mut edges = Vec::new();
        let mut queue = VecDeque::from([v]);
        while let Some(x) = queue.pop_front() {
            let kx = self.key(x);
            for w in self.formula.neighbors(x) {
                if self.key(w) < kx && nodes.insert(w) {
                    if nodes.len() > self.params.tree_cap {
                        return Err(MarkingError::TreeCapExceeded {
                            root: v,
                            cap: self.params.tree_cap,
                        });
                    }
                    edges.push((x, w));
                    queue.push_back(w);
                }
            }
        }
        Ok(QueryTree {
            root: v,
            nodes,
            edges,
        })
    }

    /// Union of the query trees of `roots`, sorted by rank.
    fn closure(&self, roots: &BTreeSet<VarId>) -> Result<Vec<VarId>, MarkingError> {
        let mut keys: HashMap<VarId, (Rank, VarId)> = HashMap::new();
        let key = |v: VarId, keys: &mut HashMap<VarId, (Rank, VarId)>| {
            *keys.entry(v).or_insert_with(|| self.key(v))
        };
        let mut seen: HashSet<VarId> = roots.iter().copied().collect();
        let mut stack: Vec<VarId> = roots.iter().copied().collect();
        while let Some(x) = stack.pop() {
            let kx = key(x, &mut keys);
            for w in self.formula.neighbors(x) {
                if !seen.contains(&w) && key(w, &mut keys) < kx {
                    seen.insert(w);
                    if seen.len() > self.params.tree_cap {
                        return Err(MarkingError::TreeCapExceeded {
                            root: *roots.iter().next().expect("non-empty roots"),
                            cap: self.params.tree_cap,
                        });
                    }
                    stack.push(w);
                }
            }
        }
        let mut order: Vec<VarId> = seen.into_iter().collect();
        order.sort_by_key(|&v| key(v, &mut keys));
        Ok(order)
    }

    /// Simulates phase 1 on `order`, which must be rank-sorted and closed
    /// under taking lower-ranked neighbours.
    fn run_phase1(&self, order: &[VarId]) -> Phase1Run {
        let mut status = HashMap::with_capacity(order.len());
        let mut edges: HashMap<usize, EdgeState> = HashMap::new();
        for &x in order {
            let occ = self.formula.occurrences(x);
            let troubled = occ.iter().any(|e| edges.get(e).is_some_and(|s| s.dangerous));
            if troubled {
                status.insert(x, PhaseStatus::Troubled);
                continue;
            }
            let b = bit(&self.seed, StreamKey::MarkPhase1(x));
            status.insert(x, PhaseStatus::Colored(b));
            for &e in occ {
                let st = edges.entry(e).or_default();
                self.apply(e, st, b, self.params.beta1);
            }
        }
        Phase1Run {
            covered: order.iter().copied().collect(),
            status,
            edges,
        }
    }

    fn apply(&self, clause: usize, st: &mut EdgeState, color: bool, beta: f64) {
        if st.deleted || st.dangerous {
            return;
        }
        if color {
            st.ones += 1;
        } else {
            st.zeros += 1;
        }
        let w = self.formula.clause(clause).width();
        let need = self.params.need(w);
        if st.zeros >= need && st.ones >= need {
            st.deleted = true;
        } else if st.zeros.max(st.ones) as f64 > beta * w as f64 {
            st.dangerous = true;
        }
    }

    fn edge_known(&self, run: &Phase1Run, clause: usize) -> bool {
        self.formula
            .clause(clause)
            .vars()
            .all(|v| run.covered.contains(&v))
    }

    /// Final phase-1 state of `clause`; it must be known to `run`.
    fn edge_after_phase1(&self, run: &Phase1Run, clause: usize) -> EdgeState {
        debug_assert!(self.edge_known(run, clause));
        run.edges.get(&clause).copied().unwrap_or_default()
    }

    pub fn phase1(&self, v: VarId) -> Result<PhaseStatus, MarkingError> {
        self.check(v)?;
        let order = self.closure(&BTreeSet::from([v]))?;
        Ok(self.run_phase1(&order).status[&v])
    }

    /// The whole phase-1 simulation, in rank order over every variable.
    pub fn run_phase1_global(&self) -> Phase1Run {
        let mut order: Vec<VarId> = self.formula.vars().collect();
        order.sort_by_key(|&v| self.key(v));
        self.run_phase1(&order)
    }

    /// Grows the simulated closure until the troubled piece around `v` and
    /// every clause touching it are fully known.
    pub fn phase1_component(&self, v: VarId) -> Result<Phase1Component, MarkingError> {
        self.check(v)?;
        let mut roots = BTreeSet::from([v]);
        loop {
            let order = self.closure(&roots)?;
            let run = self.run_phase1(&order);
            if run.status[&v] != PhaseStatus::Troubled {
                return Ok(Phase1Component {
                    vars: BTreeSet::new(),
                    run,
                });
            }
            match self.piece_in_run(v, &run)? {
                Some(vars) => return Ok(Phase1Component { vars, run }),
                None => {
                    // cover every clause touching the piece found so far
                    let before = roots.len();
                    for x in self.partial_piece(v, &run) {
                        for &e in self.formula.occurrences(x) {
                            roots.extend(self.formula.clause(e).vars());
                        }
                    }
                    debug_assert!(roots.len() > before, "closure must grow");
                }
            }
        }
    }

    /// Troubled variables reachable from `v` through clauses known to be
    /// undeleted, without asking about unknown clauses.
    fn partial_piece(&self, v: VarId, run: &Phase1Run) -> BTreeSet<VarId> {
        let mut piece = BTreeSet::from([v]);
        let mut queue = VecDeque::from([v]);
        while let Some(x) = queue.pop_front() {
            for &e in self.formula.occurrences(x) {
                if !self.edge_known(run, e) || self.edge_after_phase1(run, e).deleted {
                    continue;
                }
                for w in self.formula.clause(e).vars() {
                    if run.status[&w] == PhaseStatus::Troubled && piece.insert(w) {
                        queue.push_back(w);
                    }
                }
            }
        }
        piece
    }

    /// The troubled piece of `v`, or `None` when `run` does not yet know
    /// some clause the piece touches.
    fn piece_in_run(&self, v: VarId, run: &Phase1Run) -> Result<Option<BTreeSet<VarId>>, MarkingError> {
        let cap = self.params.phase1_cap(self.formula.num_vars());
        let mut piece = BTreeSet::from([v]);
        let mut queue = VecDeque::from([v]);
        while let Some(x) = queue.pop_front() {
            for &e in self.formula.occurrences(x) {
                if !self.edge_known(run, e) {
                    return Ok(None);
                }
                if self.edge_after_phase1(run, e).deleted {
                    continue;
                }
                for w in self.formula.clause(e).vars() {
                    if run.status[&w] == PhaseStatus::Troubled && piece.insert(w) {
                        if piece.len() > cap {
                            return Err(MarkingError::ComponentCapExceeded {
                                rep: *piece.iter().next().expect("non-empty"),
                                cap,
                            });
                        }
                        queue.push_back(w);
                    }
                }
            }
        }
        Ok(Some(piece))
    }

    /// Clauses touching `piece` that survive phase 1, ascending.
    fn piece_edges(&self, piece: &BTreeSet<VarId>, run: &Phase1Run) -> Vec<usize> {
        let mut out: Vec<usize> = piece
            .iter()
            .flat_map(|&x| self.formula.occurrences(x).iter().copied())
            .filter(|&e| !self.edge_after_phase1(run, e).deleted)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Runs the phase-2 repetitions on a phase-1 piece and returns the
    /// first one whose residual pieces are small and phase-3 solvable, with
    /// no surviving clause left fully colored.
    pub fn phase2(&self, comp: &Phase1Component) -> Result<Phase2Outcome, MarkingError> {
        let run = &comp.run;
        let edges = self.piece_edges(&comp.vars, run);
        let mut order: Vec<VarId> = comp.vars.iter().copied().collect();
        order.sort_by_key(|&v| self.key(v));
        let n = self.formula.num_vars();
        let reps = self.params.phase2_reps_for(n);
        let cap3 = self.params.phase3_cap(n);
        // whether every repetition so far failed only in the phase-3 search
        let mut only_phase3 = true;
        'reps: for rep in 0..reps {
            let mut state: BTreeMap<usize, EdgeState> = BTreeMap::new();
            for &e in &edges {
                let c = self.formula.clause(e);
                let mut st = EdgeState::default();
                for w in c.vars() {
                    match run.status[&w] {
                        PhaseStatus::Colored(true) => st.ones += 1,
                        PhaseStatus::Colored(false) => st.zeros += 1,
                        PhaseStatus::Troubled => {}
                    }
                }
                st.dangerous = st.zeros.max(st.ones) as f64 > self.params.beta2 * c.width() as f64;
                state.insert(e, st);
            }
            let mut status = BTreeMap::new();
            for &x in &order {
                let occ = self.formula.occurrences(x);
                if occ.iter().any(|e| state.get(e).is_some_and(|s| s.dangerous)) {
                    status.insert(x, PhaseStatus::Troubled);
                    continue;
                }
                let b = bit(
                    &self.seed,
                    StreamKey::MarkPhase2 {
                        var: x,
                        repetition: rep,
                    },
                );
                status.insert(x, PhaseStatus::Colored(b));
                for e in occ {
                    if let Some(st) = state.get_mut(e) {
                        self.apply(*e, st, b, self.params.beta2);
                    }
                }
            }
            let color_of = |w: VarId| match status.get(&w) {
                Some(s) => *s,
                None => run.status[&w],
            };
            let surviving: Vec<usize> = state
                .iter()
                .filter(|(_, s)| !s.deleted)
                .map(|(&e, _)| e)
                .collect();
            // a surviving clause with nothing left to color cannot be fixed
            for &e in &surviving {
                if self
                    .formula
                    .clause(e)
                    .vars()
                    .all(|w| color_of(w) != PhaseStatus::Troubled)
                {
                    only_phase3 = false;
                    continue 'reps;
                }
            }
            let troubled: BTreeSet<VarId> = order
                .iter()
                .copied()
                .filter(|&x| status[&x] == PhaseStatus::Troubled)
                .collect();
            let residual = pieces(&troubled, &surviving, self.formula);
            if residual.iter().any(|p| p.len() > cap3) {
                only_phase3 = false;
                continue;
            }
            let mut colors = BTreeMap::new();
            let mut sizes = Vec::with_capacity(residual.len());
            for p in &residual {
                let p3_edges: Vec<Phase3Edge> = surviving
                    .iter()
                    .filter(|&&e| self.formula.clause(e).vars().any(|w| p.contains(&w)))
                    .map(|&e| {
                        let c = self.formula.clause(e);
                        let mut edge = Phase3Edge {
                            clause: e,
                            need: self.params.need(c.width()),
                            fixed_zeros: 0,
                            fixed_ones: 0,
                            free: Vec::new(),
                        };
                        for w in c.vars() {
                            match color_of(w) {
                                PhaseStatus::Colored(true) => edge.fixed_ones += 1,
                                PhaseStatus::Colored(false) => edge.fixed_zeros += 1,
                                PhaseStatus::Troubled => edge.free.push(w),
                            }
                        }
                        edge
                    })
                    .collect();
                let vars: Vec<VarId> = p.iter().copied().collect();
                match phase3(&vars, &p3_edges) {
                    Some(c) => colors.extend(c),
                    None => continue 'reps,
                }
                sizes.push(p.len());
            }
            return Ok(Phase2Outcome {
                repetition: rep,
                status,
                phase3: colors,
                residual_sizes: sizes,
            });
        }
        if only_phase3 {
            return Err(MarkingError::NoValidColoring { rep: comp.rep() });
        }
        Err(MarkingError::AllRepetitionsFailed {
            rep: comp.rep(),
            reps,
        })
    }

    /// Every clause touching `v` that phase 1 left undeleted with no
    /// troubled variable is an unrecoverable imbalance.
    fn check_resolved(&self, v: VarId, run: &Phase1Run) -> Result<(), MarkingError> {
        for &e in self.formula.occurrences(v) {
            let st = self.edge_after_phase1(run, e);
            let has_troubled = self
                .formula
                .clause(e)
                .vars()
                .any(|w| run.status[&w] == PhaseStatus::Troubled);
            if !st.deleted && !has_troubled {
                return Err(MarkingError::UnresolvedEdge { clause: e });
            }
        }
        Ok(())
    }

    /// The full decision for `v`, computed locally.
    pub fn decide(&self, v: VarId) -> Result<MarkingDecision, MarkingError> {
        self.check(v)?;
        let comp = self.phase1_component(v)?;
        match comp.run.status[&v] {
            PhaseStatus::Colored(b) => {
                let roots: BTreeSet<VarId> = self
                    .formula
                    .occurrences(v)
                    .iter()
                    .flat_map(|&e| self.formula.clause(e).vars())
                    .chain([v])
                    .collect();
                let run = self.run_phase1(&self.closure(&roots)?);
                self.check_resolved(v, &run)?;
                Ok(phase1_decision(v, b))
            }
            PhaseStatus::Troubled => {
                let outcome = self.phase2(&comp)?;
                Ok(later_decision(v, &outcome))
            }
        }
    }

    pub fn is_marked(&self, v: VarId) -> Result<bool, MarkingError> {
        self.decide(v).map(|d| d.marked)
    }

    /// Decisions for every variable from one global phase-1 run. Agrees
    /// with [`Marker::decide`] variable by variable.
    pub fn decide_all(&self) -> Vec<Result<MarkingDecision, MarkingError>> {
        let run = self.run_phase1_global();
        let mut by_piece: HashMap<VarId, Result<Phase2Outcome, MarkingError>> = HashMap::new();
        let mut piece_of: HashMap<VarId, VarId> = HashMap::new();
        self.formula
            .vars()
            .map(|v| match run.status[&v] {
                PhaseStatus::Colored(b) => {
                    self.check_resolved(v, &run)?;
                    Ok(phase1_decision(v, b))
                }
                PhaseStatus::Troubled => {
                    let rep = match piece_of.get(&v) {
                        Some(&rep) => rep,
                        None => {
                            let vars = self
                                .piece_in_run(v, &run)?
                                .expect("global run knows every clause");
                            let comp = Phase1Component {
                                vars,
                                run: run.clone(),
                            };
                            let rep = comp.rep();
                            for &x in &comp.vars {
                                piece_of.insert(x, rep);
                            }
                            by_piece.insert(rep, self.phase2(&comp));
                            rep
                        }
                    };
                    let outcome = by_piece[&rep].clone()?;
                    Ok(later_decision(v, &outcome))
                }
            })
            .collect()
    }

    /// The marked set, or the first failure in variable order.
    pub fn full_marking(&self) -> Result<BTreeSet<VarId>, MarkingError> {
        let mut marked = BTreeSet::new();
        for d in self.decide_all() {
            let d = d?;
            if d.marked {
                marked.insert(d.var);
            }
        }
        Ok(marked)
    }
}

fn phase1_decision(v: VarId, b: bool) -> MarkingDecision {
    MarkingDecision {
        var: v,
        marked: b,
        phase: 1,
        history: vec![PhaseStatus::Colored(b)],
        repetition: None,
    }
}

fn later_decision(v: VarId, outcome: &Phase2Outcome) -> MarkingDecision {
    let (marked, phase, history) = match outcome.status[&v] {
        PhaseStatus::Colored(b) => (b, 2, vec![PhaseStatus::Troubled, PhaseStatus::Colored(b)]),
        PhaseStatus::Troubled => {
            let b = outcome.phase3[&v];
            (
                b,
                3,
                vec![
                    PhaseStatus::Troubled,
                    PhaseStatus::Troubled,
                    PhaseStatus::Colored(b),
                ],
            )
        }
    };
    MarkingDecision {
        var: v,
        marked,
        phase,
        history,
        repetition: Some(outcome.repetition),
    }
}

/// Connected pieces of `vars` linked by the clauses `edges`.
fn pieces(vars: &BTreeSet<VarId>, edges: &[usize], f: &Formula) -> Vec<BTreeSet<VarId>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in vars {
        if seen.contains(&start) {
            continue;
        }
        let mut piece = BTreeSet::from([start]);
        seen.insert(start);
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &e in edges {
                let c = f.clause(e);
                if !c.contains(x) {
                    continue;
                }
                for w in c.vars() {
                    if vars.contains(&w) && seen.insert(w) {
                        piece.insert(w);
                        queue.push_back(w);
                    }
                }
            }
        }
        out.push(piece);
    }
    out
}

/// `IsMarked(v)` for a fresh marker.
pub fn is_marked(f: &Formula, seed: Seed, params: MarkingParams, v: VarId) -> Result<bool, MarkingError> {
    Marker::new(f, seed, params)?.is_marked(v)
}
