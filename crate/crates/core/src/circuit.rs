//! And-Inverter Graph circuits: two-input AND gates plus edge negations.
//!
//! Nodes are numbered `0..num_inputs` for the inputs, then one node per gate
//! in definition order. The gate list is a topological order by construction:
//! every fan-in references a strictly earlier node.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

/// A signed reference to a circuit node: node index plus negation flag,
/// packed as `index << 1 | negated`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signal(u32);

impl Signal {
    pub fn node(index: usize) -> Signal {
        debug_assert!(index < (u32::MAX >> 1) as usize);
        Signal((index as u32) << 1)
    }

    pub fn new(index: usize, negated: bool) -> Signal {
        Signal(((index as u32) << 1) | negated as u32)
    }

    #[inline]
    pub fn index(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }
}

impl std::ops::Not for Signal {
    type Output = Signal;
    #[inline]
    fn not(self) -> Signal {
        Signal(self.0 ^ 1)
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_negated() {
            write!(f, "!n{}", self.index())
        } else {
            write!(f, "n{}", self.index())
        }
    }
}

/// A two-input AND gate; negations live on the fan-in signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub a: Signal,
    pub b: Signal,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("input vector has {got} bits, circuit expects {expected}")]
    InputArity { expected: usize, got: usize },
    #[error("miter requires equal arities: {0} inputs/{1} outputs vs {2} inputs/{3} outputs")]
    MiterArity(usize, usize, usize, usize),
    #[error("gate {gate} fan-in references node {node}, but only {available} earlier nodes exist")]
    DanglingGateRef {
        gate: usize,
        node: usize,
        available: usize,
    },
    #[error("output {output} references node {node}, but the circuit has {available} nodes")]
    DanglingOutputRef {
        output: usize,
        node: usize,
        available: usize,
    },
    #[error("circuit must have at least one output")]
    NoOutputs,
    #[error("sorter parameters out of range: k = {k} (need >= 2), l = {l} (need >= 1)")]
    SorterParam { k: u64, l: u64 },
}

/// A combinational circuit over the AND/NOT basis.
///
/// Immutable after construction; cheap to share read-only across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    num_inputs: usize,
    gates: Vec<Gate>,
    outputs: Vec<Signal>,
}

impl Circuit {
    /// Validates the acyclicity and reference invariants.
    pub fn new(
        num_inputs: usize,
        gates: Vec<Gate>,
        outputs: Vec<Signal>,
    ) -> Result<Circuit, CircuitError> {
        for (g, gate) in gates.iter().enumerate() {
            let available = num_inputs + g;
            for sig in [gate.a, gate.b] {
                if sig.index() >= available {
                    return Err(CircuitError::DanglingGateRef {
                        gate: g,
                        node: sig.index(),
                        available,
                    });
                }
            }
        }
        if outputs.is_empty() {
            return Err(CircuitError::NoOutputs);
        }
        let num_nodes = num_inputs + gates.len();
        for (o, sig) in outputs.iter().enumerate() {
            if sig.index() >= num_nodes {
                return Err(CircuitError::DanglingOutputRef {
                    output: o,
                    node: sig.index(),
                    available: num_nodes,
                });
            }
        }
        Ok(Circuit {
            num_inputs,
            gates,
            outputs,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_inputs + self.gates.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[Signal] {
        &self.outputs
    }

    /// Computes the circuit function on one input vector, visiting every gate
    /// once in topological order.
    pub fn evaluate(&self, input: &InputVector) -> Result<Vec<bool>, CircuitError> {
        if input.len() != self.num_inputs {
            return Err(CircuitError::InputArity {
                expected: self.num_inputs,
                got: input.len(),
            });
        }
        let mut values = Vec::with_capacity(self.num_nodes());
        values.extend_from_slice(input.bits());
        for gate in &self.gates {
            let a = values[gate.a.index()] ^ gate.a.is_negated();
            let b = values[gate.b.index()] ^ gate.b.is_negated();
            values.push(a && b);
        }
        Ok(self
            .outputs
            .iter()
            .map(|sig| values[sig.index()] ^ sig.is_negated())
            .collect())
    }
}

/// An assignment to the circuit inputs. Bit `i` holds input `i`, which has
/// weight `2^i` in the integer value of the vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InputVector {
    bits: Vec<bool>,
}

impl InputVector {
    pub fn new(bits: Vec<bool>) -> InputVector {
        InputVector { bits }
    }

    /// The vector of the given width whose integer value is `value`.
    /// Panics if `value >= 2^n`.
    pub fn from_value(value: &BigUint, n: usize) -> InputVector {
        assert!(value.bits() as usize <= n, "value does not fit in {n} bits");
        let bits = (0..n).map(|i| value.bit(i as u64)).collect();
        InputVector { bits }
    }

    pub fn from_u64(value: u64, n: usize) -> InputVector {
        InputVector::from_value(&BigUint::from(value), n)
    }

    /// The integer value of the vector: bit `i` has weight `2^i`.
    pub fn value(&self) -> BigUint {
        let mut v = BigUint::zero();
        for (i, &bit) in self.bits.iter().enumerate() {
            if bit {
                v.set_bit(i as u64, true);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    /// All `2^n` input vectors in increasing integer order. Only sensible for
    /// small `n`; callers guard the width.
    pub fn all(n: usize) -> impl Iterator<Item = InputVector> {
        assert!(n < 64, "exhaustive enumeration is limited to n < 64");
        (0u64..(1u64 << n)).map(move |v| InputVector::from_u64(v, n))
    }
}

/// Incremental construction of a circuit, with the non-AND connectives
/// macro-expanded into the AND/NOT basis.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    num_inputs: usize,
    gates: Vec<Gate>,
}

impl CircuitBuilder {
    pub fn new(num_inputs: usize) -> CircuitBuilder {
        CircuitBuilder {
            num_inputs,
            gates: Vec::new(),
        }
    }

    pub fn input(&self, i: usize) -> Signal {
        assert!(i < self.num_inputs, "input index out of range");
        Signal::node(i)
    }

    pub fn and(&mut self, a: Signal, b: Signal) -> Signal {
        let idx = self.num_inputs + self.gates.len();
        self.gates.push(Gate { a, b });
        Signal::node(idx)
    }

    pub fn or(&mut self, a: Signal, b: Signal) -> Signal {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: Signal, b: Signal) -> Signal {
        let only_a = self.and(a, !b);
        let only_b = self.and(!a, b);
        self.or(only_a, only_b)
    }

    pub fn xnor(&mut self, a: Signal, b: Signal) -> Signal {
        !self.xor(a, b)
    }

    /// `if sel { a } else { b }`.
    pub fn mux(&mut self, sel: Signal, a: Signal, b: Signal) -> Signal {
        let take_a = self.and(sel, a);
        let take_b = self.and(!sel, b);
        self.or(take_a, take_b)
    }

    /// Conjunction of a non-empty list.
    pub fn and_all(&mut self, signals: &[Signal]) -> Signal {
        assert!(!signals.is_empty(), "and_all needs at least one signal");
        let mut acc = signals[0];
        for &s in &signals[1..] {
            acc = self.and(acc, s);
        }
        acc
    }

    /// Disjunction of a non-empty list, built as a balanced tree.
    pub fn or_all(&mut self, signals: &[Signal]) -> Signal {
        assert!(!signals.is_empty(), "or_all needs at least one signal");
        let mut layer: Vec<Signal> = signals.to_vec();
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            for pair in layer.chunks(2) {
                if pair.len() == 2 {
                    next.push(self.or(pair[0], pair[1]));
                } else {
                    next.push(pair[0]);
                }
            }
            layer = next;
        }
        layer[0]
    }

    /// Copies another circuit's gates into this builder, feeding its inputs
    /// from `inputs`. Returns the signals of the embedded circuit's outputs.
    pub fn embed(&mut self, circuit: &Circuit, inputs: &[Signal]) -> Vec<Signal> {
        assert_eq!(inputs.len(), circuit.num_inputs());
        let mut node_map: Vec<Signal> = inputs.to_vec();
        for gate in circuit.gates() {
            let map = |sig: Signal, node_map: &[Signal]| {
                let base = node_map[sig.index()];
                if sig.is_negated() {
                    !base
                } else {
                    base
                }
            };
            let a = map(gate.a, &node_map);
            let b = map(gate.b, &node_map);
            node_map.push(self.and(a, b));
        }
        circuit
            .outputs()
            .iter()
            .map(|&sig| {
                let base = node_map[sig.index()];
                if sig.is_negated() {
                    !base
                } else {
                    base
                }
            })
            .collect()
    }

    pub fn finish(self, outputs: Vec<Signal>) -> Result<Circuit, CircuitError> {
        Circuit::new(self.num_inputs, self.gates, outputs)
    }
}

/// Builds the single-output circuit that is 1 on input `α` exactly when
/// `cf(α) != cg(α)`: pairwise XOR of the outputs followed by an OR tree,
/// all expanded into the AND/NOT basis.
pub fn build_miter(cf: &Circuit, cg: &Circuit) -> Result<Circuit, CircuitError> {
    if cf.num_inputs() != cg.num_inputs() || cf.num_outputs() != cg.num_outputs() {
        return Err(CircuitError::MiterArity(
            cf.num_inputs(),
            cf.num_outputs(),
            cg.num_inputs(),
            cg.num_outputs(),
        ));
    }
    let n = cf.num_inputs();
    let mut builder = CircuitBuilder::new(n);
    let inputs: Vec<Signal> = (0..n).map(|i| builder.input(i)).collect();
    let f_outs = builder.embed(cf, &inputs);
    let g_outs = builder.embed(cg, &inputs);
    let diffs: Vec<Signal> = f_outs
        .iter()
        .zip(&g_outs)
        .map(|(&f, &g)| builder.xor(f, g))
        .collect();
    let any_diff = builder.or_all(&diffs);
    builder.finish(vec![any_diff])
}
