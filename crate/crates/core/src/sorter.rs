//! Sorting-circuit benchmark generators.
//!
//! `gen_sorter(alg, k, l)` builds a circuit with `k*l` inputs and `k*l`
//! outputs that sorts `k` unsigned `l`-bit words into non-decreasing order.
//! Word `j` occupies bits `j*l .. j*l+l-1` of the flat bit string, least
//! significant bit first, so the flat string read as an integer orders
//! lexicographically with word 0 in the low bits.

use std::fmt;
use std::str::FromStr;

use crate::circuit::{Circuit, CircuitBuilder, CircuitError, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SortAlgorithm {
    Bubble,
    Selection,
    Pancake,
}

impl SortAlgorithm {
    pub const ALL: [SortAlgorithm; 3] = [
        SortAlgorithm::Bubble,
        SortAlgorithm::Selection,
        SortAlgorithm::Pancake,
    ];
}

impl fmt::Display for SortAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SortAlgorithm::Bubble => "bubble",
            SortAlgorithm::Selection => "selection",
            SortAlgorithm::Pancake => "pancake",
        };
        f.write_str(name)
    }
}

impl FromStr for SortAlgorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bubble" => Ok(SortAlgorithm::Bubble),
            "selection" => Ok(SortAlgorithm::Selection),
            "pancake" => Ok(SortAlgorithm::Pancake),
            other => Err(format!(
                "unknown sort algorithm '{other}' (expected bubble, selection, or pancake)"
            )),
        }
    }
}

/// Unsigned `a < b` over little-endian words, as a chain from LSB to MSB.
fn less_than(b: &mut CircuitBuilder, a: &[Signal], bw: &[Signal]) -> Signal {
    assert_eq!(a.len(), bw.len());
    let mut lt = b.and(bw[0], !a[0]);
    for i in 1..a.len() {
        let here = b.and(bw[i], !a[i]);
        let eq = b.xnor(a[i], bw[i]);
        let carry = b.and(eq, lt);
        lt = b.or(here, carry);
    }
    lt
}

/// Compare-and-swap: returns `(min, max)` of the two words.
fn comparator(b: &mut CircuitBuilder, x: &[Signal], y: &[Signal]) -> (Vec<Signal>, Vec<Signal>) {
    let lt = less_than(b, x, y);
    let min = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| b.mux(lt, xi, yi))
        .collect();
    let max = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| b.mux(lt, yi, xi))
        .collect();
    (min, max)
}

fn bubble_network(b: &mut CircuitBuilder, words: &mut Vec<Vec<Signal>>) {
    let k = words.len();
    for pass in 0..k - 1 {
        for j in 0..k - 1 - pass {
            let (lo, hi) = comparator(b, &words[j], &words[j + 1]);
            words[j] = lo;
            words[j + 1] = hi;
        }
    }
}

fn selection_network(b: &mut CircuitBuilder, words: &mut Vec<Vec<Signal>>) {
    let k = words.len();
    for i in 0..k - 1 {
        for j in i + 1..k {
            let (lo, hi) = comparator(b, &words[i], &words[j]);
            words[i] = lo;
            words[j] = hi;
        }
    }
}

/// Oblivious pancake sort. For each suffix size `s = k..2`: select the first
/// maximum among the first `s` words as a one-hot vector, conditionally
/// reverse the prefix that brings it to the front (a multiplexer over the
/// one-hot), then reverse the whole prefix of length `s` so the maximum
/// lands at position `s-1`.
fn pancake_network(b: &mut CircuitBuilder, words: &mut Vec<Vec<Signal>>) {
    let k = words.len();
    for s in (2..=k).rev() {
        // One-hot "first maximum" selector over words[0..s]: position j wins
        // iff every earlier word is strictly smaller and every later word is
        // at most as large.
        let mut onehot = Vec::with_capacity(s);
        for j in 0..s {
            let mut terms = Vec::new();
            for i in 0..s {
                if i < j {
                    terms.push(less_than(b, &words[i], &words[j]));
                } else if i > j {
                    terms.push(!less_than(b, &words[j], &words[i]));
                }
            }
            onehot.push(b.and_all(&terms));
        }
        // Conditional prefix reversal: if the maximum is at position m, the
        // flip of length m+1 moves word m-p to position p for p <= m.
        let mut flipped: Vec<Vec<Signal>> = Vec::with_capacity(s);
        for p in 0..s {
            let bits = (0..words[0].len())
                .map(|bit| {
                    let picks: Vec<Signal> = (0..s)
                        .map(|m| {
                            let src = if p <= m { m - p } else { p };
                            b.and(onehot[m], words[src][bit])
                        })
                        .collect();
                    b.or_all(&picks)
                })
                .collect();
            flipped.push(bits);
        }
        // Unconditional reversal of the prefix of length s is pure wiring.
        for (p, word) in flipped.into_iter().enumerate() {
            words[s - 1 - p] = word;
        }
    }
}

/// Generates the sorting benchmark circuit for `k` words of `l` bits.
pub fn gen_sorter(algorithm: SortAlgorithm, k: u64, l: u64) -> Result<Circuit, CircuitError> {
    if k < 2 || l < 1 {
        return Err(CircuitError::SorterParam { k, l });
    }
    let (k, l) = (k as usize, l as usize);
    let mut b = CircuitBuilder::new(k * l);
    let mut words: Vec<Vec<Signal>> = (0..k)
        .map(|j| (0..l).map(|bit| b.input(j * l + bit)).collect())
        .collect();
    match algorithm {
        SortAlgorithm::Bubble => bubble_network(&mut b, &mut words),
        SortAlgorithm::Selection => selection_network(&mut b, &mut words),
        SortAlgorithm::Pancake => pancake_network(&mut b, &mut words),
    }
    let outputs: Vec<Signal> = words.into_iter().flatten().collect();
    b.finish(outputs)
}
