//! Interval-partitioned CircuitSAT solving.
//!
//! The crate turns And-Inverter Graph circuits into CNF, splits the input
//! hypercube into intervals, and decides satisfiability with a
//! conflict-budgeted CDCL sub-solver: tasks the sub-solver cannot finish
//! within its budget are split into smaller intervals and retried, either
//! depth-first in one thread or fanned out across workers by a master
//! process.

pub mod aiger;
pub mod circuit;
pub mod cnf;
pub mod decomp;
pub mod dimacs;
pub mod interval;
pub mod orchestrator;
pub mod solver;
pub mod sorter;

pub use circuit::{build_miter, Circuit, CircuitBuilder, CircuitError, Gate, InputVector, Signal};
pub use cnf::{
    circuitsat_cnf, lec_cnf, substitute, tseitin_encode, Assignment, Clause, Cnf, CnfError,
    EncodeError, Lit, Var, VarMap,
};
pub use interval::{
    conjoin, encode_interval, initial_partition, split_equal, verify_complete_system, Interval,
    IntervalCnf, IntervalError, IntervalSystem, SystemCheck, Violation,
};
pub use decomp::{
    estimate_cube_hardness, solve_dfs, split_policy, CubeReport, DecompError, DecompStats,
    DfsConfig, FinalVerdict, LevelCounts, Task, TaskOutcome, DEFAULT_SPLIT_CAP,
};
pub use orchestrator::{
    run_master, run_worker, solve_parallel_inproc, MasterConfig, Mode, OrchestratorError,
    RunOutcome, WorkerConfig, WorkerError,
};
pub use solver::{solve_limited, unit_propagate, Budget, Propagation, Solver, Verdict};
pub use sorter::{gen_sorter, SortAlgorithm};
