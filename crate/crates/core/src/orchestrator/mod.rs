//! Master/worker parallel decomposition.
//!
//! The master owns a level-priority task queue and never touches a solver:
//! it hands interval tasks to whichever worker reports READY, splits the
//! intervals that come back INDET (using the adaptive policy), and
//! terminates when the queue is drained and no task is in flight. Workers
//! own a private solver each and exchange only protocol messages, so the
//! two sides share no state and the transport choice is invisible to both.

pub mod protocol;
pub mod transport;

use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::mpsc::TryRecvError;
use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::InputVector;
use crate::cnf::{Assignment, Cnf, Var};
use crate::decomp::{solve_task, split_policy, DecompStats, TaskOutcome, DEFAULT_SPLIT_CAP};
use crate::interval::{
    initial_partition, split_equal, verify_complete_system, Interval, IntervalError,
};
use crate::solver::{unit_propagate, Budget, Propagation, Verdict};

pub use protocol::{DoneVerdict, Message, ProtocolError, WorkerId};
pub use transport::{
    inproc_session, tcp_master_session, Event, InprocEndpoint, MasterHooks, MessageSink,
    TcpWorkerTransport, WorkerLink, WorkerTransport,
};

/// Whether the master stops at the first satisfying assignment or keeps
/// draining the queue to enumerate every interval-local solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FirstSat,
    Exhaust,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "first-sat" => Ok(Mode::FirstSat),
            "exhaust" => Ok(Mode::Exhaust),
            other => Err(format!(
                "unknown mode '{other}' (expected first-sat or exhaust)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MasterConfig {
    /// Size of the initial partition.
    pub q: u64,
    /// Base splitting factor.
    pub d: u64,
    /// Per-task conflict budget (0 = unlimited).
    pub budget: Budget,
    pub mode: Mode,
    /// Clamp on the adaptive child count.
    pub split_cap: u64,
    /// Re-queue a disconnected worker's in-flight task instead of failing.
    pub requeue_on_disconnect: bool,
    /// Verify queue discipline and interval conservation after every event.
    pub audit: bool,
    /// Shuffles the processing order of simultaneously pending events, to
    /// exercise interleavings in tests. `None` keeps arrival order.
    pub shuffle_seed: Option<u64>,
}

impl Default for MasterConfig {
    fn default() -> MasterConfig {
        MasterConfig {
            q: 16,
            d: 2,
            budget: Budget::conflicts(1000),
            mode: Mode::FirstSat,
            split_cap: DEFAULT_SPLIT_CAP,
            requeue_on_disconnect: true,
            audit: false,
            shuffle_seed: None,
        }
    }
}

/// Final result of a master run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Sat { model: Assignment },
    Unsat,
    /// Exhaust mode: every input-variable model found, sorted by value.
    Exhausted { input_models: Vec<InputVector> },
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("a parallel run needs at least one worker")]
    NoWorkers,
    #[error("all workers disconnected")]
    AllWorkersDisconnected,
    #[error("worker {0} disconnected and re-queueing is disabled")]
    WorkerDisconnected(WorkerId),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("audit failure: {0}")]
    Audit(String),
}

#[derive(Debug, Error)]
pub enum WorkerError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("transport: {0}")]
    Io(#[from] std::io::Error),
    #[error("expected a session-start base formula")]
    MissingBase,
    #[error("unexpected message from master")]
    UnexpectedMessage,
    #[error(transparent)]
    BadTask(#[from] IntervalError),
    #[error("solver panicked on a task")]
    SolverPanic,
}

/// Queue entry ordering: deepest level first, FIFO among equals.
#[derive(Debug)]
struct QueueEntry {
    level: u32,
    seq: u64,
    interval: Interval,
    budget: u64,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level && self.seq == other.seq
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.level
            .cmp(&other.level)
            .then(other.seq.cmp(&self.seq))
    }
}

struct InFlight {
    interval: Interval,
    level: u32,
    budget: u64,
    since: Instant,
}

struct Master<'a> {
    cnf: &'a Cnf,
    input_bits: usize,
    cfg: &'a MasterConfig,
    links: Vec<WorkerLink>,
    alive: Vec<bool>,
    queue: BinaryHeap<QueueEntry>,
    seq: u64,
    running: HashMap<WorkerId, InFlight>,
    parked: VecDeque<WorkerId>,
    l_max: u32,
    stats: DecompStats,
    found_models: Vec<InputVector>,
    resolved: Vec<Interval>, // audit mode only
    pending: VecDeque<Event>,
    shuffle_rng: Option<ChaCha8Rng>,
}

/// Runs the master event loop over an established transport session.
///
/// The base formula's inputs must be variables `1..=input_bits`. The
/// formula is broadcast once; tasks carry only intervals.
pub fn run_master(
    cnf: &Cnf,
    input_bits: usize,
    hooks: MasterHooks,
    cfg: &MasterConfig,
) -> Result<(RunOutcome, DecompStats), OrchestratorError> {
    let start = Instant::now();
    let MasterHooks { links, events } = hooks;
    if links.is_empty() {
        return Err(OrchestratorError::NoWorkers);
    }
    let alive = vec![true; links.len()];
    let mut master = Master {
        cnf,
        input_bits,
        cfg,
        links,
        alive,
        queue: BinaryHeap::new(),
        seq: 0,
        running: HashMap::new(),
        parked: VecDeque::new(),
        l_max: 1,
        stats: DecompStats::default(),
        found_models: Vec::new(),
        resolved: Vec::new(),
        pending: VecDeque::new(),
        shuffle_rng: cfg.shuffle_seed.map(ChaCha8Rng::seed_from_u64),
    };

    let base = Arc::new(cnf.clone());
    for id in 0..master.links.len() {
        let msg = Message::Base {
            worker: id as WorkerId,
            input_bits: input_bits as u32,
            cnf: base.clone(),
        };
        if master.links[id].sink.send(&msg).is_err() {
            master.drop_worker(id as WorkerId)?;
        }
    }

    for interval in initial_partition(input_bits, cfg.q)?.into_intervals() {
        master.push_task(interval, 1, cfg.budget.max_conflicts());
    }

    let outcome = loop {
        if master.queue.is_empty() && master.running.is_empty() {
            break match cfg.mode {
                Mode::FirstSat => RunOutcome::Unsat,
                Mode::Exhaust => {
                    let mut models = std::mem::take(&mut master.found_models);
                    models.sort_by_key(|m| m.value());
                    models.dedup();
                    RunOutcome::Exhausted {
                        input_models: models,
                    }
                }
            };
        }
        let event = master
            .next_event(&events)
            .ok_or(OrchestratorError::AllWorkersDisconnected)?;
        match event {
            Event::Message(w, msg) => {
                if !master.is_alive(w) {
                    continue; // late message from a dropped worker
                }
                match msg {
                    Message::Ready { worker } if worker == w => master.on_ready(w)?,
                    Message::Done {
                        worker,
                        verdict,
                        interval,
                        level,
                        conflicts,
                    } if worker == w => {
                        if let Some(model) =
                            master.on_done(w, verdict, interval, level, conflicts)?
                        {
                            master.broadcast_exit();
                            master.stats.wall_time = start.elapsed();
                            return Ok((RunOutcome::Sat { model }, master.stats));
                        }
                    }
                    _ => {
                        log::warn!("worker {w}: protocol violation, dropping connection");
                        master.send_exit(w);
                        master.drop_worker(w)?;
                    }
                }
            }
            Event::Closed(w) => {
                if master.is_alive(w) {
                    log::warn!("worker {w} disconnected");
                    if !cfg.requeue_on_disconnect && master.running.contains_key(&w) {
                        return Err(OrchestratorError::WorkerDisconnected(w));
                    }
                    master.drop_worker(w)?;
                }
            }
        }
        if cfg.audit {
            master.audit_conservation()?;
        }
    };

    master.broadcast_exit();
    master.stats.wall_time = start.elapsed();
    Ok((outcome, master.stats))
}

impl<'a> Master<'a> {
    fn is_alive(&self, w: WorkerId) -> bool {
        self.alive.get(w as usize).copied().unwrap_or(false)
    }

    fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Next event to process, optionally shuffling simultaneously pending
    /// events. Returns `None` when every worker is gone.
    fn next_event(&mut self, events: &std::sync::mpsc::Receiver<Event>) -> Option<Event> {
        if self.pending.is_empty() {
            match events.recv() {
                Ok(e) => self.pending.push_back(e),
                Err(_) => return None,
            }
            loop {
                match events.try_recv() {
                    Ok(e) => self.pending.push_back(e),
                    Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => break,
                }
            }
            if let Some(rng) = &mut self.shuffle_rng {
                if self.pending.len() > 1 {
                    let mut batch: Vec<Event> = self.pending.drain(..).collect();
                    batch.shuffle(rng);
                    self.pending.extend(batch);
                }
            }
        }
        self.pending.pop_front()
    }

    fn push_task(&mut self, interval: Interval, level: u32, budget: u64) {
        self.queue.push(QueueEntry {
            level,
            seq: self.seq,
            interval,
            budget,
        });
        self.seq += 1;
    }

    fn pop_task(&mut self) -> Option<QueueEntry> {
        let entry = self.queue.pop()?;
        if self.cfg.audit {
            if let Some(deeper) = self.queue.iter().map(|e| e.level).max() {
                assert!(
                    entry.level >= deeper,
                    "queue discipline violated: popped level {} with level {} still queued",
                    entry.level,
                    deeper
                );
            }
        }
        Some(entry)
    }

    fn on_ready(&mut self, w: WorkerId) -> Result<(), OrchestratorError> {
        match self.pop_task() {
            Some(entry) => self.dispatch(w, entry),
            None => {
                self.parked.push_back(w);
                Ok(())
            }
        }
    }

    fn dispatch(&mut self, w: WorkerId, entry: QueueEntry) -> Result<(), OrchestratorError> {
        let msg = Message::Task {
            interval: entry.interval.clone(),
            level: entry.level,
            budget: entry.budget,
        };
        if self.links[w as usize].sink.send(&msg).is_err() {
            self.push_task(entry.interval, entry.level, entry.budget);
            self.drop_worker(w)?;
            return Ok(());
        }
        self.running.insert(
            w,
            InFlight {
                interval: entry.interval,
                level: entry.level,
                budget: entry.budget,
                since: Instant::now(),
            },
        );
        Ok(())
    }

    /// Handles a DONE message. Returns the verified model when the run is
    /// over (first-SAT mode).
    fn on_done(
        &mut self,
        w: WorkerId,
        verdict: DoneVerdict,
        interval: Interval,
        level: u32,
        conflicts: u64,
    ) -> Result<Option<Assignment>, OrchestratorError> {
        let Some(inflight) = self.running.get(&w) else {
            log::warn!("worker {w}: DONE without a task in flight");
            self.send_exit(w);
            self.drop_worker(w)?;
            return Ok(None);
        };
        if inflight.interval != interval || inflight.level != level {
            log::warn!("worker {w}: DONE does not echo the dispatched task");
            self.send_exit(w);
            self.drop_worker(w)?;
            return Ok(None);
        }
        let inflight = self.running.remove(&w).expect("checked above");
        self.stats.busy_time += inflight.since.elapsed();
        self.l_max = self.l_max.max(level);
        log::debug!(
            "done worker={w} interval={interval} level={level} conflicts={conflicts} verdict={}",
            match &verdict {
                DoneVerdict::Sat { .. } => "SAT",
                DoneVerdict::Unsat => "UNSAT",
                DoneVerdict::Indet => "INDET",
            }
        );

        match verdict {
            DoneVerdict::Sat {
                input_bits,
                model_bits,
            } => {
                match self.accept_model(&interval, &input_bits, model_bits.as_deref()) {
                    Some((input, model)) => {
                        self.stats.record(level, TaskOutcome::Sat, conflicts);
                        if self.cfg.mode == Mode::FirstSat {
                            return Ok(Some(model));
                        }
                        // Exhaust mode: the found value is resolved; the rest
                        // of the interval goes back for further enumeration.
                        let value = input.value();
                        self.found_models.push(input);
                        if self.cfg.audit {
                            self.resolved
                                .push(Interval::new(value.clone(), &value + BigUint::one())
                                    .expect("unit"));
                        }
                        let budget = self.cfg.budget.max_conflicts();
                        if let Ok(rest) = Interval::new(interval.lo().clone(), value.clone()) {
                            self.push_task(rest, level + 1, budget);
                        }
                        if let Ok(rest) =
                            Interval::new(&value + BigUint::one(), interval.hi().clone())
                        {
                            self.push_task(rest, level + 1, budget);
                        }
                    }
                    None => {
                        log::warn!("worker {w}: unverifiable SAT model, dropping connection");
                        self.push_task(inflight.interval, inflight.level, inflight.budget);
                        self.send_exit(w);
                        self.drop_worker(w)?;
                        return Ok(None);
                    }
                }
            }
            DoneVerdict::Unsat => {
                self.stats.record(level, TaskOutcome::Unsat, conflicts);
                if self.cfg.audit {
                    self.resolved.push(interval);
                }
            }
            DoneVerdict::Indet => {
                self.stats.record(level, TaskOutcome::Indet, conflicts);
                if interval.is_unit() {
                    // Cannot split further; retry the cube without a budget.
                    self.push_task(interval, level, 0);
                } else {
                    let (d_current, l_new) = split_policy(
                        level,
                        self.l_max,
                        self.cfg.d,
                        &self.stats.solve_levels,
                        self.cfg.split_cap,
                    );
                    let budget = self.cfg.budget.max_conflicts();
                    for child in split_equal(&interval, d_current)?.into_intervals() {
                        self.push_task(child, l_new, budget);
                    }
                }
            }
        }

        // Serve parked workers now that the queue may have grown.
        while !self.queue.is_empty() {
            let Some(w) = self.parked.pop_front() else {
                break;
            };
            if !self.is_alive(w) {
                continue;
            }
            let entry = self.pop_task().expect("queue non-empty");
            self.dispatch(w, entry)?;
        }
        Ok(None)
    }

    /// Validates a reported model. Returns the input vector and a full model
    /// over the base formula, re-deriving the latter if the worker sent only
    /// the input projection.
    fn accept_model(
        &self,
        interval: &Interval,
        input_bits: &[bool],
        model_bits: Option<&[bool]>,
    ) -> Option<(InputVector, Assignment)> {
        if input_bits.len() != self.input_bits {
            return None;
        }
        let input = InputVector::new(input_bits.to_vec());
        if !interval.contains(&input.value()) {
            return None;
        }
        if let Some(bits) = model_bits {
            if bits.len() != self.cnf.num_vars() as usize {
                return None;
            }
            let mut model = Assignment::empty(self.cnf.num_vars());
            for (i, &b) in bits.iter().enumerate() {
                model.set(Var(i as u32 + 1), b);
            }
            if !self.cnf.is_satisfied_by(&model) {
                return None;
            }
            for (i, &b) in input_bits.iter().enumerate() {
                if model.get(Var(i as u32 + 1)) != Some(b) {
                    return None;
                }
            }
            return Some((input, model));
        }
        // Input projection only: extend it to a full model ourselves.
        let mut assumptions = Assignment::empty(self.cnf.num_vars());
        for (i, &b) in input_bits.iter().enumerate() {
            assumptions.set(Var(i as u32 + 1), b);
        }
        match unit_propagate(self.cnf, &assumptions) {
            Propagation::Fixpoint(a)
                if a.is_total() && self.cnf.is_satisfied_by(&a) =>
            {
                Some((input, a))
            }
            Propagation::Conflict { .. } => None,
            _ => {
                let unit = Interval::new(input.value(), input.value() + BigUint::one()).ok()?;
                match solve_task(self.cnf, self.input_bits, &unit, Budget::unlimited(), 0) {
                    Ok((Verdict::Sat(model), _)) => {
                        Some((input, model.truncated(self.cnf.num_vars())))
                    }
                    _ => None,
                }
            }
        }
    }

    fn send_exit(&mut self, w: WorkerId) {
        if self.is_alive(w) {
            let _ = self.links[w as usize].sink.send(&Message::Exit);
        }
    }

    fn broadcast_exit(&mut self) {
        for id in 0..self.links.len() {
            if self.alive[id] {
                let _ = self.links[id].sink.send(&Message::Exit);
            }
        }
    }

    /// Removes a worker from the session, re-queueing its in-flight task.
    fn drop_worker(&mut self, w: WorkerId) -> Result<(), OrchestratorError> {
        if !self.is_alive(w) {
            return Ok(());
        }
        self.alive[w as usize] = false;
        self.parked.retain(|&p| p != w);
        if let Some(inflight) = self.running.remove(&w) {
            self.push_task(inflight.interval, inflight.level, inflight.budget);
        }
        if self.alive_count() == 0 {
            return Err(OrchestratorError::AllWorkersDisconnected);
        }
        Ok(())
    }

    /// Audit invariant: queued, in-flight, and resolved intervals together
    /// partition the whole hypercube at every instant.
    fn audit_conservation(&self) -> Result<(), OrchestratorError> {
        let mut all: Vec<Interval> = Vec::new();
        all.extend(self.queue.iter().map(|e| e.interval.clone()));
        all.extend(self.running.values().map(|f| f.interval.clone()));
        all.extend(self.resolved.iter().cloned());
        let check = verify_complete_system(&all, &Interval::full(self.input_bits));
        if !check.ok {
            return Err(OrchestratorError::Audit(
                check
                    .violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WorkerConfig {
    /// Seed for the private solver's tie-breaking.
    pub seed: u64,
}

/// Worker loop: announce READY, solve the tasks the master sends, report
/// DONE, and stop on EXIT. The base formula arrives once at session start.
pub fn run_worker<T: WorkerTransport>(
    mut transport: T,
    cfg: &WorkerConfig,
) -> Result<(), WorkerError> {
    let (worker, input_bits, base) = match transport.recv()? {
        Message::Base {
            worker,
            input_bits,
            cnf,
        } => (worker, input_bits as usize, cnf),
        _ => return Err(WorkerError::MissingBase),
    };
    log::info!("worker {worker}: session started, {} vars", base.num_vars());

    loop {
        if let Err(e) = transport.send(&Message::Ready { worker }) {
            return absorb_pending_exit(&mut transport, e);
        }
        match transport.recv()? {
            Message::Exit => return Ok(()),
            Message::Task {
                interval,
                level,
                budget,
            } => {
                let solved = catch_unwind(AssertUnwindSafe(|| {
                    solve_task(
                        &base,
                        input_bits,
                        &interval,
                        Budget::conflicts(budget),
                        cfg.seed,
                    )
                }))
                .map_err(|_| WorkerError::SolverPanic)?;
                let (verdict, conflicts) = solved?;
                let verdict = match verdict {
                    Verdict::Sat(model) => DoneVerdict::Sat {
                        input_bits: (0..input_bits)
                            .map(|i| model.get(Var(i as u32 + 1)).expect("total model"))
                            .collect(),
                        model_bits: Some(
                            (0..base.num_vars())
                                .map(|i| model.get(Var(i + 1)).expect("total model"))
                                .collect(),
                        ),
                    },
                    Verdict::Unsat => DoneVerdict::Unsat,
                    Verdict::Indet => DoneVerdict::Indet,
                };
                let done = Message::Done {
                    worker,
                    verdict,
                    interval,
                    level,
                    conflicts,
                };
                if let Err(e) = transport.send(&done) {
                    return absorb_pending_exit(&mut transport, e);
                }
            }
            _ => return Err(WorkerError::UnexpectedMessage),
        }
    }
}

/// A send failure right after the master finished is normal shutdown if an
/// EXIT is already buffered on our side of the connection.
fn absorb_pending_exit<T: WorkerTransport>(
    transport: &mut T,
    err: std::io::Error,
) -> Result<(), WorkerError> {
    match transport.recv() {
        Ok(Message::Exit) => Ok(()),
        _ => Err(WorkerError::Io(err)),
    }
}

/// Spawns `num_workers` in-process worker threads and runs the master over
/// them. The convenience entry point for single-machine parallel solving.
pub fn solve_parallel_inproc(
    cnf: &Cnf,
    input_bits: usize,
    num_workers: u32,
    cfg: &MasterConfig,
    worker_cfg: &WorkerConfig,
) -> Result<(RunOutcome, DecompStats), OrchestratorError> {
    let (hooks, endpoints) = inproc_session(num_workers);
    let mut handles = Vec::with_capacity(endpoints.len());
    for endpoint in endpoints {
        let wc = *worker_cfg;
        handles.push(std::thread::spawn(move || run_worker(endpoint, &wc)));
    }
    let result = run_master(cnf, input_bits, hooks, cfg);
    for handle in handles {
        match handle.join() {
            Ok(Ok(())) => {}
            Ok(Err(e)) => log::debug!("worker finished with: {e}"),
            Err(_) => log::warn!("worker thread panicked"),
        }
    }
    result
}
