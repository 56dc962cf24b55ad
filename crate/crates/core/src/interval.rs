//! Intervals over the input hypercube and their CNF encodings.
//!
//! An input vector is read as an integer with input variable `i+1` carrying
//! weight `2^i`. An interval `[a, b)` of such values becomes a pair of
//! lexicographic bound constraints over the input variables; a complete
//! system of disjoint intervals covering `[0, 2^n)` then splits a formula
//! into subproblems that partition its search space.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::cnf::{Clause, Cnf, Lit, Var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IntervalError {
    #[error("interval bounds must satisfy lo < hi, got [{lo}, {hi})")]
    EmptyInterval { lo: BigUint, hi: BigUint },
    #[error("interval [{lo}, {hi}) does not fit in {n} bits")]
    OutOfRange { lo: BigUint, hi: BigUint, n: usize },
    #[error("cannot build {q} non-empty intervals over {n} bits")]
    TooManyParts { q: u64, n: usize },
    #[error("part count must be at least {min}, got {got}")]
    BadPartCount { min: u64, got: u64 },
    #[error("a unit interval cannot be split")]
    Indivisible,
    #[error("bit width must be at least 1")]
    ZeroBits,
    #[error("cannot parse interval from '{0}', expected 'lo..hi'")]
    Parse(String),
}

/// A half-open range `[lo, hi)` of non-negative integers. Bounds are
/// unbounded integers: input widths beyond 64 bits are routine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    lo: BigUint,
    hi: BigUint,
}

impl Interval {
    pub fn new(lo: BigUint, hi: BigUint) -> Result<Interval, IntervalError> {
        if lo >= hi {
            return Err(IntervalError::EmptyInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn from_u64(lo: u64, hi: u64) -> Interval {
        Interval::new(BigUint::from(lo), BigUint::from(hi)).expect("lo < hi")
    }

    /// The whole hypercube `[0, 2^n)`.
    pub fn full(n: usize) -> Interval {
        Interval {
            lo: BigUint::zero(),
            hi: BigUint::one() << n,
        }
    }

    pub fn lo(&self) -> &BigUint {
        &self.lo
    }

    pub fn hi(&self) -> &BigUint {
        &self.hi
    }

    pub fn length(&self) -> BigUint {
        &self.hi - &self.lo
    }

    pub fn is_unit(&self) -> bool {
        self.length().is_one()
    }

    pub fn contains(&self, value: &BigUint) -> bool {
        *value >= self.lo && *value < self.hi
    }

    /// True when the interval lies inside `[0, 2^n)`.
    pub fn fits(&self, n: usize) -> bool {
        self.hi <= BigUint::one() << n
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl FromStr for Interval {
    type Err = IntervalError;
    fn from_str(s: &str) -> Result<Interval, IntervalError> {
        let parse = || -> Option<Interval> {
            let (lo, hi) = s.split_once("..")?;
            let lo = BigUint::parse_bytes(lo.as_bytes(), 10)?;
            let hi = BigUint::parse_bytes(hi.as_bytes(), 10)?;
            Interval::new(lo, hi).ok()
        };
        parse().ok_or_else(|| IntervalError::Parse(s.to_string()))
    }
}

/// An ordered collection of pairwise-disjoint intervals covering one parent
/// range. `ambient_bits` records the width of the hypercube the system lives
/// in (for systems produced by splitting, the smallest width that contains
/// the parent).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalSystem {
    intervals: Vec<Interval>,
    ambient_bits: usize,
}

impl IntervalSystem {
    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn ambient_bits(&self) -> usize {
        self.ambient_bits
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.intervals.iter()
    }

    pub fn into_intervals(self) -> Vec<Interval> {
        self.intervals
    }
}

/// Splits `[lo, hi)` into `min(parts, length)` intervals of near-equal
/// length: the first `length mod parts` children are one element longer.
fn balanced_children(lo: &BigUint, hi: &BigUint, parts: u64) -> Vec<Interval> {
    let length = hi - lo;
    let parts = BigUint::from(parts).min(length.clone());
    let base = &length / &parts;
    let remainder = &length % &parts;
    let mut children = Vec::new();
    let mut cursor = lo.clone();
    let mut index = BigUint::zero();
    while index < parts {
        let mut len = base.clone();
        if index < remainder {
            len += 1u32;
        }
        let next = &cursor + &len;
        children.push(Interval {
            lo: cursor,
            hi: next.clone(),
        });
        cursor = next;
        index += 1u32;
    }
    debug_assert_eq!(cursor, *hi);
    children
}

/// The level-one partition: `q` near-equal intervals covering `[0, 2^n)`,
/// sorted by lower bound. The first `2^n mod q` intervals get the longer
/// length.
pub fn initial_partition(n: usize, q: u64) -> Result<IntervalSystem, IntervalError> {
    if n == 0 {
        return Err(IntervalError::ZeroBits);
    }
    if q == 0 {
        return Err(IntervalError::BadPartCount { min: 1, got: 0 });
    }
    let total = BigUint::one() << n;
    if BigUint::from(q) > total {
        return Err(IntervalError::TooManyParts { q, n });
    }
    Ok(IntervalSystem {
        intervals: balanced_children(&BigUint::zero(), &total, q),
        ambient_bits: n,
    })
}

/// Splits one interval into at most `d` near-equal children covering it
/// exactly. Every child is strictly shorter than the parent.
pub fn split_equal(interval: &Interval, d: u64) -> Result<IntervalSystem, IntervalError> {
    if interval.is_unit() {
        return Err(IntervalError::Indivisible);
    }
    if d < 2 {
        return Err(IntervalError::BadPartCount { min: 2, got: d });
    }
    let ambient_bits = min_ambient_bits(&interval.hi);
    Ok(IntervalSystem {
        intervals: balanced_children(&interval.lo, &interval.hi, d),
        ambient_bits,
    })
}

/// Smallest `n` with `hi <= 2^n`.
fn min_ambient_bits(hi: &BigUint) -> usize {
    if hi.is_one() {
        return 1;
    }
    (hi - BigUint::one()).bits() as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Overlap {
        first: usize,
        second: usize,
        lo: BigUint,
        hi: BigUint,
    },
    Gap {
        lo: BigUint,
        hi: BigUint,
    },
    OutsideParent {
        index: usize,
        interval: Interval,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Overlap {
                first,
                second,
                lo,
                hi,
            } => write!(
                f,
                "intervals #{first} and #{second} overlap on [{lo}, {hi})"
            ),
            Violation::Gap { lo, hi } => write!(f, "range [{lo}, {hi}) is not covered"),
            Violation::OutsideParent { index, interval } => {
                write!(f, "interval #{index} = [{interval}) escapes the parent")
            }
        }
    }
}

/// Report of a disjointness/coverage audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemCheck {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Checks that the intervals are pairwise disjoint and that their union is
/// exactly `parent`. Diagnostic: returns every violation found.
pub fn verify_complete_system(intervals: &[Interval], parent: &Interval) -> SystemCheck {
    let mut violations = Vec::new();
    let mut order: Vec<usize> = (0..intervals.len()).collect();
    order.sort_by(|&a, &b| {
        intervals[a]
            .lo
            .cmp(&intervals[b].lo)
            .then(intervals[a].hi.cmp(&intervals[b].hi))
    });

    let mut cursor = parent.lo.clone();
    let mut prev: Option<usize> = None;
    for &i in &order {
        let iv = &intervals[i];
        if iv.lo < parent.lo || iv.hi > parent.hi {
            violations.push(Violation::OutsideParent {
                index: i,
                interval: iv.clone(),
            });
        }
        if iv.lo > cursor {
            violations.push(Violation::Gap {
                lo: cursor.clone(),
                hi: iv.lo.clone(),
            });
        } else if iv.lo < cursor {
            violations.push(Violation::Overlap {
                first: prev.unwrap_or(i),
                second: i,
                lo: iv.lo.clone(),
                hi: cursor.clone().min(iv.hi.clone()),
            });
        }
        if iv.hi > cursor {
            cursor = iv.hi.clone();
            prev = Some(i);
        }
    }
    if cursor < parent.hi {
        violations.push(Violation::Gap {
            lo: cursor,
            hi: parent.hi.clone(),
        });
    }
    SystemCheck {
        ok: violations.is_empty(),
        violations,
    }
}

/// The clauses encoding membership of the input value in an interval,
/// together with the auxiliary variables they introduce.
///
/// Auxiliary variables are numbered `aux_base ..`, strictly above the
/// formula the fragment will be conjoined with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalCnf {
    pub clauses: Vec<Clause>,
    pub aux_base: u32,
    pub num_aux: u32,
}

/// Encodes `lo <= value(inputs) < hi` over input variables `1..=n`.
///
/// Each non-trivial bound becomes an MSB-first chain: one fresh
/// "prefix-equal" variable per bit position, defined by equivalence, plus
/// one guard clause per constrained bit. On a unit interval, unit
/// propagation alone fixes all `n` input variables.
pub fn encode_interval(
    interval: &Interval,
    n: usize,
    aux_base: u32,
) -> Result<IntervalCnf, IntervalError> {
    if n == 0 {
        return Err(IntervalError::ZeroBits);
    }
    if !interval.fits(n) {
        return Err(IntervalError::OutOfRange {
            lo: interval.lo.clone(),
            hi: interval.hi.clone(),
            n,
        });
    }
    let mut clauses = Vec::new();
    let mut next_aux = aux_base;

    let full = Interval::full(n);
    if !interval.lo.is_zero() {
        encode_bound(
            &interval.lo,
            n,
            BoundKind::AtLeast,
            &mut clauses,
            &mut next_aux,
        );
    }
    if interval.hi < full.hi {
        let upper = &interval.hi - BigUint::one();
        encode_bound(&upper, n, BoundKind::AtMost, &mut clauses, &mut next_aux);
    }
    Ok(IntervalCnf {
        clauses,
        aux_base,
        num_aux: next_aux - aux_base,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum BoundKind {
    AtLeast,
    AtMost,
}

/// One lexicographic comparator chain against the constant `bound`.
///
/// Walking from the most significant bit down, `prefix[j]` asserts that all
/// bits above position `j` equal the bound's bits. For `value >= bound`
/// every position where the bound has a 1 forbids "prefix equal so far but
/// this bit is 0"; for `value <= bound` every 0 position forbids the dual.
fn encode_bound(
    bound: &BigUint,
    n: usize,
    kind: BoundKind,
    clauses: &mut Vec<Clause>,
    next_aux: &mut u32,
) {
    let input_lit = |j: usize, positive: bool| Lit::new(Var(j as u32 + 1), positive);
    let mut prefix: Option<Lit> = None; // true literal meaning "prefix equal"
    for j in (0..n).rev() {
        let bit = bound.bit(j as u64);
        let constrained = match kind {
            BoundKind::AtLeast => bit,
            BoundKind::AtMost => !bit,
        };
        if constrained {
            // forbid: prefix equal and this bit on the losing side
            let forced = input_lit(j, kind == BoundKind::AtLeast);
            match prefix {
                None => clauses.push(vec![forced]),
                Some(p) => clauses.push(vec![!p, forced]),
            }
        }
        if j == 0 {
            break; // no guard needed below the last bit
        }
        // Extend the prefix-equal chain: fresh = prefix AND (bit j matches).
        let matches = input_lit(j, bit);
        let fresh = Lit::positive(Var(*next_aux));
        *next_aux += 1;
        match prefix {
            None => {
                clauses.push(vec![!fresh, matches]);
                clauses.push(vec![fresh, !matches]);
            }
            Some(p) => {
                clauses.push(vec![!fresh, p]);
                clauses.push(vec![!fresh, matches]);
                clauses.push(vec![fresh, !p, !matches]);
            }
        }
        prefix = Some(fresh);
    }
}

/// Conjoins the base formula with an interval fragment. The fragment must
/// have been encoded with `aux_base == base.num_vars() + 1`.
pub fn conjoin(base: &Cnf, fragment: &IntervalCnf) -> Cnf {
    assert_eq!(
        fragment.aux_base,
        base.num_vars() + 1,
        "fragment auxiliaries must start right above the base formula"
    );
    let mut clauses = base.clauses().to_vec();
    clauses.extend(fragment.clauses.iter().cloned());
    Cnf::from_parts_unchecked(base.num_vars() + fragment.num_aux, clauses)
}
