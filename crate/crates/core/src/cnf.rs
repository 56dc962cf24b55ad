//! CNF formulas and the circuit-to-CNF encodings.
//!
//! Variable numbering convention used throughout the crate: the circuit's
//! inputs are variables `1..=n` (input `i` is variable `i+1`, weight `2^i`),
//! and gate `g` is variable `n + g + 1`. Interval constraints can therefore
//! name the input variables without any mapping traveling alongside the
//! formula.

use std::fmt;

use thiserror::Error;

use crate::circuit::{build_miter, Circuit, CircuitError, Signal};

/// A propositional variable, 1-based as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A literal: a variable or its negation, stored as a signed non-zero
/// DIMACS-style integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(i32);

impl Lit {
    pub fn new(var: Var, positive: bool) -> Lit {
        debug_assert!(var.0 > 0);
        Lit(if positive {
            var.0 as i32
        } else {
            -(var.0 as i32)
        })
    }

    pub fn positive(var: Var) -> Lit {
        Lit::new(var, true)
    }

    pub fn negative(var: Var) -> Lit {
        Lit::new(var, false)
    }

    /// From a DIMACS integer; `None` for zero.
    pub fn from_dimacs(value: i32) -> Option<Lit> {
        if value == 0 {
            None
        } else {
            Some(Lit(value))
        }
    }

    #[inline]
    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    #[inline]
    pub fn var(self) -> Var {
        Var(self.0.unsigned_abs())
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    #[inline]
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type Clause = Vec<Lit>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("clause {clause} contains both {var} and its negation")]
    Tautology { clause: usize, var: Var },
    #[error("clause {clause} mentions variable {var}, but the formula has only {num_vars} variables")]
    VarOutOfRange {
        clause: usize,
        var: Var,
        num_vars: u32,
    },
    #[error("clause {clause} is empty; empty clauses may only arise from substitution")]
    EmptyClause { clause: usize },
}

/// A clause database. Immutable after construction; substitution returns a
/// new formula.
///
/// An empty clause is representable (meaning the formula is unsatisfiable)
/// but can only arise from [`substitute`], never from [`Cnf::new`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl Cnf {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Cnf, CnfError> {
        for (i, clause) in clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(CnfError::EmptyClause { clause: i });
            }
            for (j, &lit) in clause.iter().enumerate() {
                if lit.var().0 > num_vars {
                    return Err(CnfError::VarOutOfRange {
                        clause: i,
                        var: lit.var(),
                        num_vars,
                    });
                }
                if clause[..j].contains(&!lit) {
                    return Err(CnfError::Tautology {
                        clause: i,
                        var: lit.var(),
                    });
                }
            }
        }
        Ok(Cnf { num_vars, clauses })
    }

    /// Construction for trusted internal paths (encoders, substitution).
    pub(crate) fn from_parts_unchecked(num_vars: u32, clauses: Vec<Clause>) -> Cnf {
        Cnf { num_vars, clauses }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(|c| c.is_empty())
    }

    /// True when every clause contains a literal made true by `assignment`.
    /// Unassigned literals count as not-true, so a partial assignment only
    /// satisfies the formula if it already covers a literal of each clause.
    pub fn is_satisfied_by(&self, assignment: &Assignment) -> bool {
        self.clauses.iter().all(|clause| {
            clause
                .iter()
                .any(|&lit| assignment.lit_value(lit) == Some(true))
        })
    }
}

/// A partial or total map from variables to Boolean values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn empty(num_vars: u32) -> Assignment {
        Assignment {
            values: vec![None; num_vars as usize],
        }
    }

    pub fn from_pairs(num_vars: u32, pairs: &[(Var, bool)]) -> Assignment {
        let mut a = Assignment::empty(num_vars);
        for &(var, value) in pairs {
            a.set(var, value);
        }
        a
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn set(&mut self, var: Var, value: bool) {
        self.values[var.index()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.values.get(var.index()).copied().flatten()
    }

    pub fn lit_value(&self, lit: Lit) -> Option<bool> {
        self.get(lit.var()).map(|v| v == lit.is_positive())
    }

    pub fn assigned_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_total(&self) -> bool {
        self.values.iter().all(|v| v.is_some())
    }

    /// Assigned (variable, value) pairs in increasing variable order.
    pub fn iter_assigned(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|value| (Var(i as u32 + 1), value)))
    }

    /// Restriction to the first `num_vars` variables (drops auxiliaries).
    pub fn truncated(&self, num_vars: u32) -> Assignment {
        Assignment {
            values: self.values[..num_vars as usize].to_vec(),
        }
    }
}

/// The mapping from circuit nodes to CNF variables produced by the Tseitin
/// transformation. Outputs are literals: an output that taps a node through
/// a negation is the node's variable with negative polarity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarMap {
    input_vars: Vec<Var>,
    gate_vars: Vec<Var>,
    output_lits: Vec<Lit>,
}

impl VarMap {
    pub fn input_vars(&self) -> &[Var] {
        &self.input_vars
    }

    /// Variable of gate `g` (index into the circuit's gate list).
    pub fn gate_var(&self, gate: usize) -> Var {
        self.gate_vars[gate]
    }

    pub fn gate_vars(&self) -> &[Var] {
        &self.gate_vars
    }

    pub fn output_lits(&self) -> &[Lit] {
        &self.output_lits
    }

    /// The literal carrying the value of `signal` in the encoded formula.
    pub fn signal_lit(&self, num_inputs: usize, signal: Signal) -> Lit {
        let var = if signal.index() < num_inputs {
            self.input_vars[signal.index()]
        } else {
            self.gate_vars[signal.index() - num_inputs]
        };
        Lit::new(var, !signal.is_negated())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("circuit-sat encoding requires a single output, got {0}")]
    OutputArity(usize),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Tseitin transformation of a circuit into its template CNF.
///
/// Per gate `g = AND(u, v)` this emits `(¬g ∨ u) (¬g ∨ v) (g ∨ ¬u ∨ ¬v)` with
/// fan-in negations folded into the literal signs, i.e. three clauses per
/// gate. The satisfying assignments of the template are exactly the
/// consistent executions of the circuit, one per input vector.
///
/// Degenerate gates whose fan-ins are complements of the same node would
/// make the third clause a tautology; that clause is vacuous and omitted.
/// Duplicate literals inside a clause are collapsed.
pub fn tseitin_encode(circuit: &Circuit) -> (Cnf, VarMap) {
    let n = circuit.num_inputs();
    let input_vars: Vec<Var> = (1..=n as u32).map(Var).collect();
    let gate_vars: Vec<Var> = (0..circuit.num_gates())
        .map(|g| Var((n + g + 1) as u32))
        .collect();
    let map = VarMap {
        input_vars,
        gate_vars,
        output_lits: circuit
            .outputs()
            .iter()
            .map(|&sig| signal_lit_raw(sig))
            .collect(),
    };

    let mut clauses = Vec::with_capacity(3 * circuit.num_gates());
    for (g, gate) in circuit.gates().iter().enumerate() {
        let out = Lit::positive(map.gate_vars[g]);
        let u = signal_lit_raw(gate.a);
        let v = signal_lit_raw(gate.b);
        push_normalized(&mut clauses, vec![!out, u]);
        push_normalized(&mut clauses, vec![!out, v]);
        push_normalized(&mut clauses, vec![out, !u, !v]);
    }
    let num_vars = (n + circuit.num_gates()) as u32;
    (Cnf::from_parts_unchecked(num_vars, clauses), map)
}

// Node `i` is variable `i+1` for inputs and gates alike.
fn signal_lit_raw(signal: Signal) -> Lit {
    Lit::new(Var(signal.index() as u32 + 1), !signal.is_negated())
}

/// Drops tautological clauses and duplicate literals.
fn push_normalized(clauses: &mut Vec<Clause>, mut clause: Clause) {
    clause.sort_unstable();
    clause.dedup();
    for w in clause.windows(2) {
        if w[0].var() == w[1].var() {
            return; // complementary pair, clause always true
        }
    }
    clauses.push(clause);
}

/// Template CNF plus the unit clause asserting the single output true.
/// Satisfiable iff some input drives the output to 1.
pub fn circuitsat_cnf(circuit: &Circuit) -> Result<(Cnf, VarMap), EncodeError> {
    if circuit.num_outputs() != 1 {
        return Err(EncodeError::OutputArity(circuit.num_outputs()));
    }
    let (cnf, map) = tseitin_encode(circuit);
    let mut clauses = cnf.clauses.clone();
    clauses.push(vec![map.output_lits[0]]);
    Ok((Cnf::from_parts_unchecked(cnf.num_vars, clauses), map))
}

/// Equivalence-checking CNF: the circuit-sat encoding of the miter of the
/// two circuits. Unsatisfiable iff the circuits compute the same function.
pub fn lec_cnf(cf: &Circuit, cg: &Circuit) -> Result<(Cnf, VarMap), EncodeError> {
    let miter = build_miter(cf, cg)?;
    circuitsat_cnf(&miter)
}

/// Substitution of a partial assignment into a formula: satisfied clauses
/// are removed and falsified literals drop out of the remaining clauses. A
/// clause that loses all its literals is kept as the empty clause, marking
/// the result unsatisfiable.
pub fn substitute(cnf: &Cnf, assignment: &Assignment) -> Cnf {
    let mut clauses = Vec::with_capacity(cnf.clauses.len());
    'clauses: for clause in &cnf.clauses {
        let mut reduced = Vec::with_capacity(clause.len());
        for &lit in clause {
            match assignment.lit_value(lit) {
                Some(true) => continue 'clauses,
                Some(false) => {}
                None => reduced.push(lit),
            }
        }
        clauses.push(reduced);
    }
    Cnf::from_parts_unchecked(cnf.num_vars, clauses)
}
