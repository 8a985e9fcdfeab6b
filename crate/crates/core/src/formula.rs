//! CNF data model: variables, literals, clauses, partial assignments over
//! `{0, 1, ⊥}`, reduction under a partial assignment and connected components
//! of the reduced dependency hypergraph.
//!
//! Clause ids are positions in the input (0-based). They fix the total order
//! used wherever an algorithm needs "the clause with the lowest index".

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod dimacs;

pub use dimacs::parse_dimacs;

/// A variable, 1-based as in DIMACS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(u32);

impl VarId {
    /// Panics on `0`; DIMACS has no variable zero.
    pub fn new(index: u32) -> Self {
        assert!(index >= 1, "variable indices start at 1");
        VarId(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// 0-based slot for dense per-variable tables.
    pub(crate) fn slot(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: VarId,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: VarId, positive: bool) -> Self {
        Literal { var, positive }
    }

    pub fn pos(var: u32) -> Self {
        Literal::new(VarId::new(var), true)
    }

    pub fn neg(var: u32) -> Self {
        Literal::new(VarId::new(var), false)
    }

    /// Whether assigning `value` to the variable makes this literal true.
    pub fn satisfied_by(self, value: bool) -> bool {
        value == self.positive
    }

    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.var.0);
        if self.positive {
            v
        } else {
            -v
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.var)
        } else {
            write!(f, "¬{}", self.var)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Clause {
    id: usize,
    literals: Vec<Literal>,
}

impl Clause {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn width(&self) -> usize {
        self.literals.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.literals.iter().map(|l| l.var)
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.literals.iter().any(|l| l.var == v)
    }

    pub fn literal_of(&self, v: VarId) -> Option<Literal> {
        self.literals.iter().copied().find(|l| l.var == v)
    }
}

/// Value of a variable in a partial assignment. `Bottom` marks a variable
/// that was accessed but left unassigned; it constrains nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ternary {
    Zero,
    One,
    Bottom,
}

impl Ternary {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Ternary::One
        } else {
            Ternary::Zero
        }
    }

    pub fn bit(self) -> Option<bool> {
        match self {
            Ternary::Zero => Some(false),
            Ternary::One => Some(true),
            Ternary::Bottom => None,
        }
    }
}

impl fmt::Display for Ternary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ternary::Zero => f.write_str("0"),
            Ternary::One => f.write_str("1"),
            Ternary::Bottom => f.write_str("⊥"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PartialAssignment {
    values: BTreeMap<VarId, Ternary>,
}

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits<I: IntoIterator<Item = (VarId, bool)>>(bits: I) -> Self {
        let values = bits.into_iter().map(|(v, b)| (v, Ternary::from_bit(b))).collect();
        PartialAssignment { values }
    }

    pub fn get(&self, v: VarId) -> Option<Ternary> {
        self.values.get(&v).copied()
    }

    /// The 0/1 value of `v`, if it has one.
    pub fn value(&self, v: VarId) -> Option<bool> {
        self.get(v).and_then(Ternary::bit)
    }

    pub fn is_assigned(&self, v: VarId) -> bool {
        self.value(v).is_some()
    }

    pub fn set(&mut self, v: VarId, value: Ternary) {
        self.values.insert(v, value);
    }

    pub fn assign(&mut self, v: VarId, bit: bool) {
        self.set(v, Ternary::from_bit(bit));
    }

    /// The domain Λ, including `⊥` entries.
    pub fn domain(&self) -> impl Iterator<Item = VarId> + '_ {
        self.values.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, Ternary)> + '_ {
        self.values.iter().map(|(v, t)| (*v, *t))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn literal_true(&self, lit: Literal) -> bool {
        self.value(lit.var).is_some_and(|b| lit.satisfied_by(b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClauseState {
    Satisfied,
    /// Surviving literals: those whose variable is not 0/1-assigned.
    Open(Vec<Literal>),
    Falsified,
}

pub fn clause_state(clause: &Clause, sigma: &PartialAssignment) -> ClauseState {
    let mut open = Vec::with_capacity(clause.width());
    for &lit in clause.literals() {
        match sigma.value(lit.var) {
            Some(b) if lit.satisfied_by(b) => return ClauseState::Satisfied,
            Some(_) => {}
            None => open.push(lit),
        }
    }
    if open.is_empty() {
        ClauseState::Falsified
    } else {
        ClauseState::Open(open)
    }
}

pub fn clause_satisfied(clause: &Clause, sigma: &PartialAssignment) -> bool {
    clause.literals().iter().any(|&l| sigma.literal_true(l))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReducedClause {
    pub id: usize,
    pub literals: Vec<Literal>,
}

impl ReducedClause {
    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.literals.iter().map(|l| l.var)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReducedFormula {
    pub free_vars: BTreeSet<VarId>,
    pub clauses: Vec<ReducedClause>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceMode {
    /// Reject falsified clauses.
    Strict,
    /// Keep falsified clauses as empty reduced clauses (used by the oracle).
    Relaxed,
}

/// A connected piece of the reduced formula. Isolated free variables form
/// singleton components with no clauses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    pub vars: BTreeSet<VarId>,
    pub clauses: Vec<ReducedClause>,
    pub canonical_rep: VarId,
}

impl Component {
    pub fn singleton(v: VarId) -> Self {
        Component {
            vars: BTreeSet::from([v]),
            clauses: Vec::new(),
            canonical_rep: v,
        }
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.vars.contains(&v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeProfile {
    pub k_max: usize,
    pub d: usize,
    pub delta: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: unexpected token `{token}`")]
    BadToken { line: usize, token: String },
    #[error("line {line}: variable {var} out of range 1..={n}")]
    VariableOutOfRange { line: usize, var: i64, n: u32 },
    #[error("line {line}: variable {var} repeated within one clause")]
    RepeatedVariable { line: usize, var: u32 },
    #[error("line {line}: empty clause")]
    EmptyClause { line: usize },
    #[error("last clause is not terminated by 0")]
    UnterminatedClause,
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("variable {var} is not in 1..={n}")]
    UnknownVariable { var: u32, n: u32 },
    #[error("variable {0} is already assigned")]
    VariableAssigned(VarId),
    #[error("clause {clause} is falsified by the partial assignment")]
    InfeasiblePartialAssignment { clause: usize },
}

/// An immutable CNF formula with occurrence index and degree metadata.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Formula {
    n: u32,
    clauses: Vec<Clause>,
    occ: Vec<Vec<usize>>,
    profile: DegreeProfile,
}

impl Formula {
    /// Builds a formula from literal lists. Line numbers in errors are the
    /// 1-based clause positions.
    pub fn new(n: u32, clauses: Vec<Vec<Literal>>) -> Result<Self, FormulaError> {
        let lines = (1..=clauses.len()).collect::<Vec<_>>();
        Self::with_lines(n, clauses, &lines)
    }

    pub(crate) fn with_lines(
        n: u32,
        clauses: Vec<Vec<Literal>>,
        lines: &[usize],
    ) -> Result<Self, FormulaError> {
        let mut occ = vec![Vec::new(); n as usize];
        let mut built = Vec::with_capacity(clauses.len());
        for (id, literals) in clauses.into_iter().enumerate() {
            let line = lines[id];
            if literals.is_empty() {
                return Err(FormulaError::EmptyClause { line });
            }
            for (i, lit) in literals.iter().enumerate() {
                if lit.var.0 > n {
                    return Err(FormulaError::VariableOutOfRange {
                        line,
                        var: i64::from(lit.var.0),
                        n,
                    });
                }
                if literals[..i].iter().any(|l| l.var == lit.var) {
                    return Err(FormulaError::RepeatedVariable { line, var: lit.var.0 });
                }
                occ[lit.var.slot()].push(id);
            }
            built.push(Clause { id, literals });
        }
        let profile = compute_profile(&built, &occ);
        Ok(Formula {
            n,
            clauses: built,
            occ,
            profile,
        })
    }

    pub fn num_vars(&self) -> u32 {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, id: usize) -> &Clause {
        &self.clauses[id]
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> {
        (1..=self.n).map(VarId)
    }

    pub fn check_var(&self, v: VarId) -> Result<(), FormulaError> {
        if v.0 <= self.n {
            Ok(())
        } else {
            Err(FormulaError::UnknownVariable { var: v.0, n: self.n })
        }
    }

    /// Ids of the clauses containing `v`, ascending.
    pub fn occurrences(&self, v: VarId) -> &[usize] {
        &self.occ[v.slot()]
    }

    /// Variables sharing at least one clause with `v` (excluding `v`), ascending.
    pub fn neighbors(&self, v: VarId) -> Vec<VarId> {
        let mut out: Vec<VarId> = self
            .occurrences(v)
            .iter()
            .flat_map(|&c| self.clauses[c].vars())
            .filter(|&w| w != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn degree_profile(&self) -> DegreeProfile {
        self.profile
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.n, self.clauses.len());
        for c in &self.clauses {
            for l in c.literals() {
                out.push_str(&l.to_dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn reduce(
        &self,
        sigma: &PartialAssignment,
        mode: ReduceMode,
    ) -> Result<ReducedFormula, FormulaError> {
        let mut clauses = Vec::new();
        for c in &self.clauses {
            match clause_state(c, sigma) {
                ClauseState::Satisfied => {}
                ClauseState::Open(literals) => clauses.push(ReducedClause { id: c.id, literals }),
                ClauseState::Falsified => match mode {
                    ReduceMode::Strict => {
                        return Err(FormulaError::InfeasiblePartialAssignment { clause: c.id })
                    }
                    ReduceMode::Relaxed => clauses.push(ReducedClause {
                        id: c.id,
                        literals: Vec::new(),
                    }),
                },
            }
        }
        let free_vars = self.vars().filter(|&v| !sigma.is_assigned(v)).collect();
        Ok(ReducedFormula { free_vars, clauses })
    }

    /// The connected component of `v` in the reduced formula under `sigma`.
    /// `⊥` entries count as free.
    pub fn component_of(&self, sigma: &PartialAssignment, v: VarId) -> Result<Component, FormulaError> {
        self.check_var(v)?;
        if sigma.is_assigned(v) {
            return Err(FormulaError::VariableAssigned(v));
        }
        let mut vars = BTreeSet::from([v]);
        let mut clauses = BTreeMap::new();
        let mut seen_clause = BTreeSet::new();
        let mut queue = VecDeque::from([v]);
        while let Some(x) = queue.pop_front() {
            for &cid in self.occurrences(x) {
                if !seen_clause.insert(cid) {
                    continue;
                }
                if let ClauseState::Open(literals) = clause_state(&self.clauses[cid], sigma) {
                    for l in &literals {
                        if vars.insert(l.var) {
                            queue.push_back(l.var);
                        }
                    }
                    clauses.insert(cid, ReducedClause { id: cid, literals });
                }
            }
        }
        Ok(Component {
            canonical_rep: *vars.iter().next().expect("component contains v"),
            vars,
            clauses: clauses.into_values().collect(),
        })
    }

    /// Whether a total assignment (indexed by slot) satisfies every clause.
    pub fn is_satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.literals()
                .iter()
                .any(|l| l.satisfied_by(assignment[l.var.slot()]))
        })
    }
}

fn compute_profile(clauses: &[Clause], occ: &[Vec<usize>]) -> DegreeProfile {
    let k_max = clauses.iter().map(Clause::width).max().unwrap_or(0);
    let d = occ.iter().map(Vec::len).max().unwrap_or(0);
    let mut delta = 0;
    let mut touched = Vec::new();
    for c in clauses {
        touched.clear();
        touched.extend(c.vars().flat_map(|v| occ[v.slot()].iter().copied()));
        touched.sort_unstable();
        touched.dedup();
        delta = delta.max(touched.len());
    }
    DegreeProfile { k_max, d, delta }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = "p cnf 5 3\n1 2 -3 0\n-2 3 4 0\n-4 5 -1 0\n";

    pub(crate) fn example() -> Formula {
        parse_dimacs(EXAMPLE).unwrap()
    }

    fn x(i: u32) -> VarId {
        VarId::new(i)
    }

    #[test]
    fn example_profile() {
        let f = example();
        assert_eq!(f.num_vars(), 5);
        assert_eq!(f.num_clauses(), 3);
        let p = f.degree_profile();
        assert_eq!((p.k_max, p.d, p.delta), (3, 2, 3));
    }

    #[test]
    fn single_clause_delta_is_one() {
        let f = Formula::new(3, vec![vec![Literal::pos(1), Literal::neg(2)]]).unwrap();
        assert_eq!(f.degree_profile().delta, 1);
    }

    #[test]
    fn clause_states_on_example() {
        let f = example();
        let sigma = PartialAssignment::from_bits([(x(2), false)]);
        assert_eq!(clause_state(f.clause(1), &sigma), ClauseState::Satisfied);
        assert_eq!(
            clause_state(f.clause(0), &sigma),
            ClauseState::Open(vec![Literal::pos(1), Literal::neg(3)])
        );
        let empty = PartialAssignment::new();
        for c in f.clauses() {
            assert_eq!(clause_state(c, &empty), ClauseState::Open(c.literals().to_vec()));
        }
    }

    #[test]
    fn bottom_does_not_satisfy_or_remove() {
        let f = example();
        let mut sigma = PartialAssignment::new();
        sigma.set(x(1), Ternary::Bottom);
        assert_eq!(
            clause_state(f.clause(0), &sigma),
            ClauseState::Open(f.clause(0).literals().to_vec())
        );
    }

    #[test]
    fn reduce_example() {
        let f = example();
        let sigma = PartialAssignment::from_bits([(x(2), false), (x(5), true)]);
        let r = f.reduce(&sigma, ReduceMode::Strict).unwrap();
        assert_eq!(
            r.clauses,
            vec![ReducedClause {
                id: 0,
                literals: vec![Literal::pos(1), Literal::neg(3)]
            }]
        );
        assert_eq!(r.free_vars, BTreeSet::from([x(1), x(3), x(4)]));
    }

    #[test]
    fn reduce_identity_and_full() {
        let f = example();
        let r = f.reduce(&PartialAssignment::new(), ReduceMode::Strict).unwrap();
        assert_eq!(r.clauses.len(), 3);
        assert_eq!(r.free_vars.len(), 5);
        // 1 0 0 0 1 satisfies every clause
        let full = PartialAssignment::from_bits(
            [true, false, false, false, true]
                .iter()
                .enumerate()
                .map(|(i, &b)| (VarId::new(i as u32 + 1), b)),
        );
        let r = f.reduce(&full, ReduceMode::Strict).unwrap();
        assert!(r.clauses.is_empty());
        assert!(r.free_vars.is_empty());
    }

    #[test]
    fn reduce_strict_rejects_falsified() {
        let f = example();
        let sigma = PartialAssignment::from_bits([(x(1), false), (x(2), false), (x(3), true)]);
        assert_eq!(
            f.reduce(&sigma, ReduceMode::Strict),
            Err(FormulaError::InfeasiblePartialAssignment { clause: 0 })
        );
        let relaxed = f.reduce(&sigma, ReduceMode::Relaxed).unwrap();
        assert!(relaxed.clauses.iter().any(|c| c.literals.is_empty()));
    }

    #[test]
    fn component_of_example() {
        let f = example();
        let sigma = PartialAssignment::from_bits([(x(2), false), (x(5), true)]);
        let c = f.component_of(&sigma, x(1)).unwrap();
        assert_eq!(c.vars, BTreeSet::from([x(1), x(3)]));
        assert_eq!(c.clauses.len(), 1);
        assert_eq!(c.clauses[0].literals, vec![Literal::pos(1), Literal::neg(3)]);
        assert_eq!(c.canonical_rep, x(1));

        let c4 = f.component_of(&sigma, x(4)).unwrap();
        assert_eq!(c4, Component::singleton(x(4)));

        assert_eq!(
            f.component_of(&sigma, x(2)),
            Err(FormulaError::VariableAssigned(x(2)))
        );
    }

    #[test]
    fn component_of_whole_formula() {
        let f = example();
        for v in f.vars() {
            let c = f.component_of(&PartialAssignment::new(), v).unwrap();
            assert_eq!(c.vars.len(), 5);
            assert_eq!(c.clauses.len(), 3);
        }
    }

    #[test]
    fn neighbors_of_example() {
        let f = example();
        assert_eq!(f.neighbors(x(1)), vec![x(2), x(3), x(4), x(5)]);
        assert_eq!(f.neighbors(x(5)), vec![x(1), x(4)]);
    }
}
