//! A conflict-budgeted CDCL SAT solver with a three-valued outcome, plus a
//! standalone unit-propagation engine.
//!
//! The solver implements the standard kit: two-watched-literal propagation,
//! first-UIP conflict analysis with non-chronological backjumping,
//! activity-ordered branching with decay, geometric restarts, activity-based
//! deletion of learned clauses, and phase saving with initial phase false.
//! A run is deterministic given the clause order and the seed; the seed only
//! jitters the initial branching activities.
//!
//! The budget counts conflicts. A budget of 0 means unlimited, making the
//! solver complete; with a budget of `t` the solver never consumes more than
//! `t` conflicts and answers `Indet` exactly when all `t` were consumed
//! without a resolution.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnf::{Assignment, Cnf, Var};

/// Conflict budget for one solver run. Zero means unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    max_conflicts: u64,
}

impl Budget {
    pub fn conflicts(t: u64) -> Budget {
        Budget { max_conflicts: t }
    }

    pub fn unlimited() -> Budget {
        Budget { max_conflicts: 0 }
    }

    pub fn is_unlimited(self) -> bool {
        self.max_conflicts == 0
    }

    pub fn max_conflicts(self) -> u64 {
        self.max_conflicts
    }
}

/// Outcome of a budgeted solver run. `Indet` is a value, not an error: the
/// budget elapsed before satisfiability was decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat(Assignment),
    Unsat,
    Indet,
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsat)
    }

    pub fn is_indet(&self) -> bool {
        matches!(self, Verdict::Indet)
    }

    pub fn model(&self) -> Option<&Assignment> {
        match self {
            Verdict::Sat(m) => Some(m),
            _ => None,
        }
    }
}

// Internal literal encoding: variable index shifted left, low bit = negated.
type SLit = u32;

#[inline]
fn mk_lit(var: usize, positive: bool) -> SLit {
    ((var as u32) << 1) | (!positive as u32)
}

#[inline]
fn lit_var(lit: SLit) -> usize {
    (lit >> 1) as usize
}

#[inline]
fn lit_neg(lit: SLit) -> SLit {
    lit ^ 1
}

const VAL_TRUE: u8 = 0;
const VAL_FALSE: u8 = 1;
const VAL_UNDEF: u8 = 2;

#[derive(Debug)]
struct ClauseData {
    lits: Vec<SLit>,
    activity: f32,
    learnt: bool,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: u32,
    blocker: SLit,
}

/// Max-heap over variables ordered by activity, with lazy membership.
#[derive(Debug, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<i32>,
}

impl VarHeap {
    fn new(n: usize) -> VarHeap {
        VarHeap {
            heap: Vec::with_capacity(n),
            pos: vec![-1; n],
        }
    }

    fn contains(&self, v: usize) -> bool {
        self.pos[v] >= 0
    }

    fn push(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v] = self.heap.len() as i32;
        self.heap.push(v as u32);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()? as usize;
        self.pos[top] = -1;
        let last = self.heap.pop().expect("non-empty");
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn update(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            self.sift_up(self.pos[v] as usize, act);
        }
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let x = self.heap[i];
        while i > 0 {
            let parent = (i - 1) >> 1;
            let p = self.heap[parent];
            if act[x as usize] <= act[p as usize] {
                break;
            }
            self.heap[i] = p;
            self.pos[p as usize] = i as i32;
            i = parent;
        }
        self.heap[i] = x;
        self.pos[x as usize] = i as i32;
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let x = self.heap[i];
        loop {
            let left = 2 * i + 1;
            if left >= self.heap.len() {
                break;
            }
            let right = left + 1;
            let child = if right < self.heap.len()
                && act[self.heap[right] as usize] > act[self.heap[left] as usize]
            {
                right
            } else {
                left
            };
            if act[self.heap[child] as usize] <= act[x as usize] {
                break;
            }
            self.heap[i] = self.heap[child];
            self.pos[self.heap[i] as usize] = i as i32;
            i = child;
        }
        self.heap[i] = x;
        self.pos[x as usize] = i as i32;
    }
}

/// One stateful solver instance over a fixed formula. Distinct instances
/// share nothing and may run concurrently.
#[derive(Debug)]
pub struct Solver {
    num_vars: usize,
    clauses: Vec<ClauseData>,
    learnts: Vec<u32>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    trail: Vec<SLit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    cla_inc: f32,
    seen: Vec<bool>,
    max_learnts: f64,
    conflicts: u64,
    decisions: u64,
    propagations: u64,
    restarts: u64,
    unsat_at_load: bool,
    original: Cnf,
}

impl Solver {
    pub fn new(cnf: &Cnf) -> Solver {
        Solver::with_seed(cnf, 0)
    }

    pub fn with_seed(cnf: &Cnf, seed: u64) -> Solver {
        let n = cnf.num_vars() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let activity: Vec<f64> = (0..n)
            .map(|_| (rng.next_u64() as f64 / u64::MAX as f64) * 1e-9)
            .collect();
        let mut heap = VarHeap::new(n);
        for v in 0..n {
            heap.push(v, &activity);
        }
        let mut solver = Solver {
            num_vars: n,
            clauses: Vec::with_capacity(cnf.num_clauses()),
            learnts: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            assigns: vec![VAL_UNDEF; n],
            level: vec![0; n],
            reason: vec![None; n],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            activity,
            var_inc: 1.0,
            heap,
            phase: vec![false; n],
            cla_inc: 1.0,
            seen: vec![false; n],
            max_learnts: ((cnf.num_clauses() / 3) as f64).max(100.0),
            conflicts: 0,
            decisions: 0,
            propagations: 0,
            restarts: 0,
            unsat_at_load: false,
            original: cnf.clone(),
        };
        solver.load(cnf);
        solver
    }

    fn load(&mut self, cnf: &Cnf) {
        for clause in cnf.clauses() {
            if self.unsat_at_load {
                return;
            }
            let mut lits: Vec<SLit> = clause
                .iter()
                .map(|l| mk_lit(l.var().index(), l.is_positive()))
                .collect();
            lits.sort_unstable();
            lits.dedup();
            if lits.windows(2).any(|w| w[0] ^ 1 == w[1]) {
                continue; // tautology
            }
            match lits.len() {
                0 => self.unsat_at_load = true,
                1 => match self.lit_value(lits[0]) {
                    VAL_TRUE => {}
                    VAL_FALSE => self.unsat_at_load = true,
                    _ => self.unchecked_enqueue(lits[0], None),
                },
                _ => {
                    self.attach(lits, false);
                }
            }
        }
    }

    fn attach(&mut self, lits: Vec<SLit>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[lit_neg(lits[0]) as usize].push(Watcher {
            cref,
            blocker: lits[1],
        });
        self.watches[lit_neg(lits[1]) as usize].push(Watcher {
            cref,
            blocker: lits[0],
        });
        self.clauses.push(ClauseData {
            lits,
            activity: 0.0,
            learnt,
        });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    #[inline]
    fn lit_value(&self, lit: SLit) -> u8 {
        let a = self.assigns[lit_var(lit)];
        if a == VAL_UNDEF {
            VAL_UNDEF
        } else {
            a ^ (lit & 1) as u8
        }
    }

    #[inline]
    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn unchecked_enqueue(&mut self, lit: SLit, reason: Option<u32>) {
        debug_assert_eq!(self.lit_value(lit), VAL_UNDEF);
        let v = lit_var(lit);
        self.assigns[v] = (lit & 1) as u8;
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
    }

    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.propagations += 1;
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let mut i = 0;
            'clauses: while i < ws.len() {
                let blocker = ws[i].blocker;
                if self.lit_value(blocker) == VAL_TRUE {
                    i += 1;
                    continue;
                }
                let cref = ws[i].cref;
                let false_lit = lit_neg(p);
                // Normalize so the falsified watch sits at position 1, then
                // look for a replacement watch.
                let (first, replacement) = {
                    let c = &mut self.clauses[cref as usize];
                    if c.lits[0] == false_lit {
                        c.lits.swap(0, 1);
                    }
                    debug_assert_eq!(c.lits[1], false_lit);
                    let first = c.lits[0];
                    if first != blocker && self.assigns[lit_var(first)] != VAL_UNDEF
                        // inline lit_value to appease the borrow of c
                        && (self.assigns[lit_var(first)] ^ (first & 1) as u8) == VAL_TRUE
                    {
                        (first, None)
                    } else {
                        let mut found = None;
                        for k in 2..c.lits.len() {
                            let l = c.lits[k];
                            let a = self.assigns[lit_var(l)];
                            if a == VAL_UNDEF || (a ^ (l & 1) as u8) != VAL_FALSE {
                                c.lits.swap(1, k);
                                found = Some(c.lits[1]);
                                break;
                            }
                        }
                        (first, found)
                    }
                };
                let w = Watcher {
                    cref,
                    blocker: first,
                };
                match replacement {
                    Some(new_watch) => {
                        // The replacement is non-false while !p is false, so
                        // the destination list is never the one we took.
                        debug_assert_ne!(lit_neg(new_watch), p);
                        self.watches[lit_neg(new_watch) as usize].push(w);
                        ws.swap_remove(i);
                        continue 'clauses;
                    }
                    None => {
                        if self.lit_value(first) == VAL_TRUE {
                            ws[i] = w;
                            i += 1;
                            continue 'clauses;
                        }
                        ws[i] = w;
                        i += 1;
                        if self.lit_value(first) == VAL_FALSE {
                            // conflict
                            self.qhead = self.trail.len();
                            self.watches[p as usize] = ws;
                            return Some(cref);
                        }
                        self.unchecked_enqueue(first, Some(cref));
                    }
                }
            }
            self.watches[p as usize] = ws;
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.update(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first, a highest-level literal second) and the backjump level.
    fn analyze(&mut self, confl: u32) -> (Vec<SLit>, u32) {
        let mut learnt: Vec<SLit> = vec![0];
        let current_level = self.decision_level();
        let mut counter = 0usize;
        let mut p: Option<SLit> = None;
        let mut confl = confl;
        let mut index = self.trail.len();

        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let start = if p.is_none() { 0 } else { 1 };
            let lits: Vec<SLit> = self.clauses[confl as usize].lits[start..].to_vec();
            for q in lits {
                let v = lit_var(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= current_level {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            // Walk the trail back to the next marked literal.
            loop {
                index -= 1;
                if self.seen[lit_var(self.trail[index])] {
                    break;
                }
            }
            let pl = self.trail[index];
            self.seen[lit_var(pl)] = false;
            counter -= 1;
            if counter == 0 {
                learnt[0] = lit_neg(pl);
                break;
            }
            p = Some(pl);
            confl = self.reason[lit_var(pl)].expect("implied literal has a reason");
        }

        let backtrack = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[lit_var(learnt[i])] > self.level[lit_var(learnt[max_i])] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[lit_var(learnt[1])]
        };
        for &l in &learnt {
            self.seen[lit_var(l)] = false;
        }
        (learnt, backtrack)
    }

    fn cancel_until(&mut self, target: u32) {
        if self.decision_level() <= target {
            return;
        }
        let sep = self.trail_lim[target as usize];
        for i in (sep..self.trail.len()).rev() {
            let lit = self.trail[i];
            let v = lit_var(lit);
            self.phase[v] = lit & 1 == 0;
            self.assigns[v] = VAL_UNDEF;
            self.reason[v] = None;
            self.heap.push(v, &self.activity);
        }
        self.trail.truncate(sep);
        self.trail_lim.truncate(target as usize);
        self.qhead = sep;
    }

    fn locked(&self, cref: u32) -> bool {
        let first = self.clauses[cref as usize].lits[0];
        self.lit_value(first) == VAL_TRUE && self.reason[lit_var(first)] == Some(cref)
    }

    fn detach(&mut self, cref: u32) {
        let (w0, w1) = {
            let c = &self.clauses[cref as usize];
            (lit_neg(c.lits[0]), lit_neg(c.lits[1]))
        };
        for w in [w0, w1] {
            let list = &mut self.watches[w as usize];
            let at = list
                .iter()
                .position(|x| x.cref == cref)
                .expect("watched clause present");
            list.swap_remove(at);
        }
    }

    /// Drops roughly half of the learnt clauses, lowest activity first.
    /// Binary and reason clauses survive.
    fn reduce_db(&mut self) {
        let mut order = self.learnts.clone();
        order.sort_by(|&a, &b| {
            self.clauses[a as usize]
                .activity
                .partial_cmp(&self.clauses[b as usize].activity)
                .expect("activities are finite")
        });
        let target = order.len() / 2;
        let mut removed = 0usize;
        let mut dropped: Vec<u32> = Vec::new();
        for &cref in &order {
            if removed >= target {
                break;
            }
            if self.clauses[cref as usize].lits.len() <= 2 || self.locked(cref) {
                continue;
            }
            self.detach(cref);
            dropped.push(cref);
            removed += 1;
        }
        self.learnts.retain(|c| !dropped.contains(c));
    }

    /// Runs the search under the given conflict budget.
    pub fn solve(&mut self, budget: Budget) -> Verdict {
        if self.unsat_at_load {
            return Verdict::Unsat;
        }
        let mut restart_limit = 100u64;
        let mut conflicts_since_restart = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    return Verdict::Unsat;
                }
                if !budget.is_unlimited() && self.conflicts >= budget.max_conflicts() {
                    return Verdict::Indet;
                }
                let (learnt, backtrack) = self.analyze(confl);
                self.cancel_until(backtrack);
                if learnt.len() == 1 {
                    self.unchecked_enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.unchecked_enqueue(first, Some(cref));
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
            } else {
                if conflicts_since_restart >= restart_limit {
                    conflicts_since_restart = 0;
                    restart_limit = (restart_limit as f64 * 1.5) as u64;
                    self.restarts += 1;
                    self.max_learnts *= 1.1;
                    self.cancel_until(0);
                }
                if self.learnts.len() as f64 >= self.max_learnts + self.trail.len() as f64 {
                    self.reduce_db();
                }
                let next = loop {
                    match self.heap.pop(&self.activity) {
                        Some(v) if self.assigns[v] == VAL_UNDEF => break Some(v),
                        Some(_) => continue,
                        None => break None,
                    }
                };
                match next {
                    Some(v) => {
                        self.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        self.unchecked_enqueue(mk_lit(v, self.phase[v]), None);
                    }
                    None => {
                        let model = self.extract_model();
                        assert!(
                            self.original.is_satisfied_by(&model),
                            "internal error: model fails verification"
                        );
                        return Verdict::Sat(model);
                    }
                }
            }
        }
    }

    fn extract_model(&self) -> Assignment {
        let mut model = Assignment::empty(self.num_vars as u32);
        for v in 0..self.num_vars {
            debug_assert_ne!(self.assigns[v], VAL_UNDEF);
            model.set(Var(v as u32 + 1), self.assigns[v] == VAL_TRUE);
        }
        model
    }

    /// Conflicts consumed so far by this instance.
    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn propagations(&self) -> u64 {
        self.propagations
    }

    pub fn restarts(&self) -> u64 {
        self.restarts
    }
}

/// One-shot convenience wrapper around [`Solver`].
pub fn solve_limited(cnf: &Cnf, budget: Budget) -> Verdict {
    Solver::new(cnf).solve(budget)
}

/// Result of running unit propagation to fixpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Propagation {
    Fixpoint(Assignment),
    Conflict {
        assignment: Assignment,
        falsified_clause: usize,
    },
}

impl Propagation {
    pub fn assignment(&self) -> &Assignment {
        match self {
            Propagation::Fixpoint(a) => a,
            Propagation::Conflict { assignment, .. } => assignment,
        }
    }

    pub fn is_conflict(&self) -> bool {
        matches!(self, Propagation::Conflict { .. })
    }
}

/// Unit propagation alone, from the given assumptions to fixpoint.
/// A conflict is reported iff some clause is falsified at the fixpoint;
/// propagation is deterministic given the clause order.
pub fn unit_propagate(cnf: &Cnf, assumptions: &Assignment) -> Propagation {
    let n = cnf.num_vars() as usize;
    let clauses = cnf.clauses();
    let mut values: Vec<Option<bool>> = (0..n)
        .map(|v| assumptions.get(Var(v as u32 + 1)))
        .collect();

    // Occurrence lists per literal, in clause order.
    let mut occ: Vec<Vec<u32>> = vec![Vec::new(); 2 * n];
    let mut false_count: Vec<u32> = vec![0; clauses.len()];
    let mut satisfied: Vec<bool> = vec![false; clauses.len()];
    for (ci, clause) in clauses.iter().enumerate() {
        for lit in clause {
            occ[mk_lit(lit.var().index(), lit.is_positive()) as usize].push(ci as u32);
        }
    }

    let mut queue: std::collections::VecDeque<SLit> = std::collections::VecDeque::new();
    for (v, value) in values.iter().enumerate() {
        if let Some(b) = *value {
            queue.push_back(mk_lit(v, b));
        }
    }
    // Unit clauses fire without a trigger.
    let mut pending_units: Vec<(usize, SLit)> = Vec::new();
    for (ci, clause) in clauses.iter().enumerate() {
        if clause.len() == 1 {
            let lit = clause[0];
            pending_units.push((ci, mk_lit(lit.var().index(), lit.is_positive())));
        }
    }
    for (_, lit) in pending_units {
        let v = lit_var(lit);
        if values[v].is_none() {
            values[v] = Some(lit & 1 == 0);
            queue.push_back(lit);
        }
    }

    while let Some(lit) = queue.pop_front() {
        // Clauses containing the literal are now satisfied.
        for &ci in &occ[lit as usize] {
            satisfied[ci as usize] = true;
        }
        // Clauses containing the complement lose a literal.
        for &ci in &occ[lit_neg(lit) as usize] {
            let ci = ci as usize;
            false_count[ci] += 1;
            if satisfied[ci] {
                continue;
            }
            let clause = &clauses[ci];
            if false_count[ci] as usize + 1 == clause.len() {
                // Unit or already satisfied by a queued-but-unprocessed lit.
                let mut unassigned = None;
                let mut now_satisfied = false;
                for l in clause {
                    match values[l.var().index()] {
                        None => unassigned = Some(l),
                        Some(b) if b == l.is_positive() => {
                            now_satisfied = true;
                            break;
                        }
                        _ => {}
                    }
                }
                if now_satisfied {
                    continue;
                }
                if let Some(l) = unassigned {
                    let sl = mk_lit(l.var().index(), l.is_positive());
                    values[l.var().index()] = Some(l.is_positive());
                    queue.push_back(sl);
                }
            }
        }
    }

    let mut assignment = Assignment::empty(cnf.num_vars());
    for (v, value) in values.iter().enumerate() {
        if let Some(b) = *value {
            assignment.set(Var(v as u32 + 1), b);
        }
    }
    // Fixpoint reached; report the first falsified clause, if any.
    for (ci, clause) in clauses.iter().enumerate() {
        if false_count[ci] as usize == clause.len() {
            return Propagation::Conflict {
                assignment,
                falsified_clause: ci,
            };
        }
    }
    Propagation::Fixpoint(assignment)
}
