//! Shared oracles for the integration suites: exhaustive circuit
//! evaluation, backtracking model enumeration over raw clauses, random
//! instance generators, and mutated sorter construction. Everything here
//! decides by direct evaluation, independent of the solver under test.

#![allow(dead_code)]

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use intervalsat::interval::IntervalCnf;
use intervalsat::{
    Assignment, Circuit, CircuitBuilder, Clause, Cnf, InputVector, Interval, Lit, Signal, Var,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Circuit-side oracles
// ---------------------------------------------------------------------------

/// All input values on which the single-output circuit computes 1.
pub fn sat_input_values(circuit: &Circuit) -> Vec<u64> {
    assert_eq!(circuit.num_outputs(), 1);
    let n = circuit.num_inputs();
    assert!(n <= 20, "exhaustive evaluation capped");
    (0u64..(1 << n))
        .filter(|&v| circuit.evaluate(&InputVector::from_u64(v, n)).unwrap()[0])
        .collect()
}

pub fn circuit_is_satisfiable(circuit: &Circuit) -> bool {
    !sat_input_values(circuit).is_empty()
}

/// A random single-output circuit: `gates` AND gates over random earlier
/// signals, output tapping the last gate (negated half the time).
pub fn random_circuit(rng: &mut ChaCha8Rng, n: usize, gates: usize) -> Circuit {
    assert!(n >= 1 && gates >= 1);
    let mut builder = CircuitBuilder::new(n);
    let mut signals: Vec<Signal> = (0..n).map(|i| builder.input(i)).collect();
    for _ in 0..gates {
        let a = signals[rng.gen_range(0..signals.len())];
        let b = signals[rng.gen_range(0..signals.len())];
        let a = if rng.gen_bool(0.5) { !a } else { a };
        let b = if rng.gen_bool(0.5) { !b } else { b };
        let g = builder.and(a, b);
        signals.push(g);
    }
    let out = *signals.last().unwrap();
    let out = if rng.gen_bool(0.5) { !out } else { out };
    builder.finish(vec![out]).unwrap()
}

// ---------------------------------------------------------------------------
// Clause-side oracles
// ---------------------------------------------------------------------------

fn falsified(cnf: &Cnf, values: &[Option<bool>]) -> bool {
    cnf.clauses().iter().any(|clause| {
        clause
            .iter()
            .all(|l| values[l.var().index()] == Some(!l.is_positive()))
    })
}

fn enumerate_rec(
    cnf: &Cnf,
    values: &mut Vec<Option<bool>>,
    out: &mut Vec<Assignment>,
    stop_after: Option<usize>,
) {
    if stop_after.is_some_and(|cap| out.len() >= cap) || falsified(cnf, values) {
        return;
    }
    match values.iter().position(|v| v.is_none()) {
        None => {
            let mut a = Assignment::empty(cnf.num_vars());
            for (i, v) in values.iter().enumerate() {
                a.set(Var(i as u32 + 1), v.unwrap());
            }
            out.push(a);
        }
        Some(i) => {
            for b in [false, true] {
                values[i] = Some(b);
                enumerate_rec(cnf, values, out, stop_after);
            }
            values[i] = None;
        }
    }
}

/// Every model of the formula, by backtracking over variables in index
/// order with falsified-clause pruning. Pure clause evaluation.
pub fn enumerate_models(cnf: &Cnf) -> Vec<Assignment> {
    let mut out = Vec::new();
    enumerate_rec(cnf, &mut vec![None; cnf.num_vars() as usize], &mut out, None);
    out
}

/// Satisfiability by the same backtracking search, stopping at the first
/// model.
pub fn clause_level_satisfiable(cnf: &Cnf) -> bool {
    let mut out = Vec::new();
    enumerate_rec(
        cnf,
        &mut vec![None; cnf.num_vars() as usize],
        &mut out,
        Some(1),
    );
    !out.is_empty()
}

/// Distinct input-projection values among the models of a formula whose
/// inputs are variables `1..=n`.
pub fn model_input_values(cnf: &Cnf, n: usize) -> Vec<u64> {
    let mut values: Vec<u64> = enumerate_models(cnf)
        .iter()
        .map(|m| {
            (0..n)
                .map(|i| (m.get(Var(i as u32 + 1)).unwrap() as u64) << i)
                .sum()
        })
        .collect();
    values.sort_unstable();
    values.dedup();
    values
}

// ---------------------------------------------------------------------------
// Interval-system helpers
// ---------------------------------------------------------------------------

/// A random complete system over `[0, 2^n)`: sorted distinct cut points.
pub fn random_complete_system(rng: &mut ChaCha8Rng, n: usize, max_parts: usize) -> Vec<Interval> {
    let total = 1u64 << n;
    let parts = rng.gen_range(1..=max_parts.min(total as usize));
    let mut cuts = std::collections::BTreeSet::new();
    while cuts.len() < parts - 1 {
        cuts.insert(rng.gen_range(1..total));
    }
    let mut bounds = vec![0u64];
    bounds.extend(cuts);
    bounds.push(total);
    bounds
        .windows(2)
        .map(|w| Interval::from_u64(w[0], w[1]))
        .collect()
}

/// `base ∧ (C_I1 ∨ ... ∨ C_Ik)`, built with one selector variable per
/// fragment guarding its clauses, plus the clause requiring some selector.
/// Equisatisfiable with the disjunction by construction.
pub fn conjoin_any_of(base: &Cnf, fragments: &[IntervalCnf]) -> Cnf {
    let mut clauses: Vec<Clause> = base.clauses().to_vec();
    let mut next_var = base.num_vars();
    for frag in fragments {
        assert!(frag.aux_base > next_var);
        next_var = next_var.max(frag.aux_base + frag.num_aux - u32::from(frag.num_aux == 0));
    }
    let mut selector_clause = Vec::with_capacity(fragments.len());
    for frag in fragments {
        next_var += 1;
        let selector = Lit::positive(Var(next_var));
        selector_clause.push(selector);
        for clause in &frag.clauses {
            let mut guarded = Vec::with_capacity(clause.len() + 1);
            guarded.push(!selector);
            guarded.extend_from_slice(clause);
            clauses.push(guarded);
        }
    }
    clauses.push(selector_clause);
    Cnf::new(next_var, clauses).expect("well-formed by construction")
}

// ---------------------------------------------------------------------------
// Sorter mutation
// ---------------------------------------------------------------------------

fn less_than(b: &mut CircuitBuilder, x: &[Signal], y: &[Signal]) -> Signal {
    let mut lt = b.and(y[0], !x[0]);
    for i in 1..x.len() {
        let here = b.and(y[i], !x[i]);
        let eq = b.xnor(x[i], y[i]);
        let carry = b.and(eq, lt);
        lt = b.or(here, carry);
    }
    lt
}

fn compare_exchange(b: &mut CircuitBuilder, words: &mut [Vec<Signal>], i: usize, j: usize) {
    let lt = less_than(b, &words[i], &words[j]);
    let (lo, hi): (Vec<Signal>, Vec<Signal>) = words[i]
        .clone()
        .into_iter()
        .zip(words[j].clone())
        .map(|(x, y)| (b.mux(lt, x, y), b.mux(lt, y, x)))
        .unzip();
    words[i] = lo;
    words[j] = hi;
}

/// A bubble sorting network with comparator number `skip` left out; the
/// result is not a sorter, which makes its miter against a real sorter
/// satisfiable.
pub fn mutated_bubble_sorter(k: usize, l: usize, skip: usize) -> Circuit {
    let mut b = CircuitBuilder::new(k * l);
    let mut words: Vec<Vec<Signal>> = (0..k)
        .map(|j| (0..l).map(|bit| b.input(j * l + bit)).collect())
        .collect();
    let mut index = 0;
    for pass in 0..k - 1 {
        for j in 0..k - 1 - pass {
            if index != skip {
                compare_exchange(&mut b, &mut words, j, j + 1);
            }
            index += 1;
        }
    }
    let outputs: Vec<Signal> = words.into_iter().flatten().collect();
    b.finish(outputs).unwrap()
}

// ---------------------------------------------------------------------------
// Fault injection
// ---------------------------------------------------------------------------

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use intervalsat::orchestrator::{InprocEndpoint, Message, ProtocolError, WorkerTransport};

/// A worker connection that breaks after a fixed number of sends. Both
/// directions fail from then on, modelling a dead socket; dropping the
/// inner endpoint reports the disconnect to the master.
pub struct FlakyTransport {
    inner: InprocEndpoint,
    sends_left: u64,
    broken: bool,
    tripped: Arc<AtomicU64>,
}

impl FlakyTransport {
    pub fn new(inner: InprocEndpoint, sends_before_break: u64, tripped: Arc<AtomicU64>) -> Self {
        FlakyTransport {
            inner,
            sends_left: sends_before_break,
            broken: false,
            tripped,
        }
    }

    fn fault() -> std::io::Error {
        std::io::Error::new(std::io::ErrorKind::BrokenPipe, "injected fault")
    }
}

impl WorkerTransport for FlakyTransport {
    fn send(&mut self, msg: &Message) -> std::io::Result<()> {
        if self.sends_left == 0 && !self.broken {
            self.broken = true;
            self.tripped.fetch_add(1, Ordering::Relaxed);
        }
        if self.broken {
            return Err(Self::fault());
        }
        self.sends_left -= 1;
        self.inner.send(msg)
    }

    fn recv(&mut self) -> Result<Message, ProtocolError> {
        if self.broken {
            return Err(ProtocolError::Io(Self::fault()));
        }
        self.inner.recv()
    }
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

pub fn value_of(input: &InputVector) -> u64 {
    u64::try_from(&input.value()).expect("fits in u64 at test scale")
}

pub fn biguint(v: u64) -> BigUint {
    BigUint::from(v)
}
