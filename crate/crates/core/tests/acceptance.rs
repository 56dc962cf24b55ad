//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line. Oracles are exhaustive evaluation and backtracking
//! enumeration from `common`, independent of the solving paths under test.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines.

mod common;

use std::net::TcpListener;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;

use intervalsat::orchestrator::{
    inproc_session, run_master, run_worker, solve_parallel_inproc, tcp_master_session,
    MasterConfig, Mode, RunOutcome, TcpWorkerTransport, WorkerConfig,
};
use intervalsat::{
    build_miter, circuitsat_cnf, encode_interval, gen_sorter, initial_partition, lec_cnf, conjoin,
    solve_dfs, solve_limited, split_policy, tseitin_encode, unit_propagate, Assignment, Budget,
    Circuit, Cnf, DfsConfig, FinalVerdict, InputVector, Interval, Propagation, SortAlgorithm,
    Solver, Var, Verdict, DEFAULT_SPLIT_CAP,
};

fn pass(name: &str, detail: &str) {
    println!("acceptance: {name} ... pass ({detail})");
}

fn lec_instance(a: SortAlgorithm, b: SortAlgorithm, k: u64, l: u64) -> (Cnf, usize) {
    let ca = gen_sorter(a, k, l).unwrap();
    let cb = gen_sorter(b, k, l).unwrap();
    let (cnf, map) = lec_cnf(&ca, &cb).unwrap();
    let n = map.input_vars().len();
    (cnf, n)
}

fn mutant_instance(k: usize, l: usize, skip: usize) -> (Circuit, Cnf, usize) {
    let mutant = mutated_bubble_sorter(k, l, skip);
    let intact = gen_sorter(SortAlgorithm::Selection, k as u64, l as u64).unwrap();
    let miter = build_miter(&mutant, &intact).unwrap();
    let (cnf, _) = circuitsat_cnf(&miter).unwrap();
    (miter, cnf, k * l)
}

// ---------------------------------------------------------------------------
// Criterion 1: interval systems partition the search space
// ---------------------------------------------------------------------------

#[test]
fn partitioning_theorem_suite() {
    let start = Instant::now();
    let mut rng = rng(0xA11CE);
    let circuits = 200;
    let mut pair_checks = 0u64;
    for case in 0..circuits {
        let n = rng.gen_range(1..=10);
        let gates = rng.gen_range(1..=3 * n + 2);
        let circuit = random_circuit(&mut rng, n, gates);
        let (cnf, _) = circuitsat_cnf(&circuit).unwrap();
        let system = random_complete_system(&mut rng, n, 6);

        // Fragments stacked above the base formula, then pairwise above
        // each other so aux variables never collide.
        let mut fragments = Vec::new();
        let mut aux_base = cnf.num_vars() + 1;
        for interval in &system {
            let frag = encode_interval(interval, n, aux_base).unwrap();
            aux_base += frag.num_aux;
            fragments.push(frag);
        }

        // (ii) pairwise joint unsatisfiability, solver vs oracle.
        let oracle_values = sat_input_values(&circuit);
        for i in 0..system.len() {
            for j in i + 1..system.len() {
                let mut clauses = cnf.clauses().to_vec();
                clauses.extend(fragments[i].clauses.iter().cloned());
                clauses.extend(fragments[j].clauses.iter().cloned());
                let joint = Cnf::new(aux_base - 1, clauses).unwrap();
                let verdict = solve_limited(&joint, Budget::unlimited());
                let oracle = oracle_values.iter().any(|&v| {
                    system[i].contains(&biguint(v)) && system[j].contains(&biguint(v))
                });
                assert!(!oracle, "case {case}: intervals of a complete system overlap");
                assert!(
                    verdict.is_unsat(),
                    "case {case}: C ∧ C_I ∧ C_J must be unsat for distinct I, J"
                );
                pair_checks += 1;
            }
        }

        // (i) equisatisfiability of C and C ∧ (∨ C_I).
        let any_of = conjoin_any_of(&cnf, &fragments);
        let base_sat = !solve_limited(&cnf, Budget::unlimited()).is_unsat();
        let cover_sat = !solve_limited(&any_of, Budget::unlimited()).is_unsat();
        let oracle_sat = !oracle_values.is_empty();
        assert_eq!(base_sat, oracle_sat, "case {case}: solver vs oracle on C");
        assert_eq!(
            cover_sat, oracle_sat,
            "case {case}: covering disjunction changed satisfiability"
        );
    }
    assert!(start.elapsed() < Duration::from_secs(300), "criterion caps at 5 minutes");
    pass(
        "partitioning-theorem",
        &format!(
            "{circuits} circuits, {pair_checks} pairwise checks, {:.1?}",
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: propagation completes the template on any full input
// ---------------------------------------------------------------------------

#[test]
fn unit_propagation_completes_templates() {
    let start = Instant::now();
    let mut circuits: Vec<(String, Circuit)> = Vec::new();
    for alg in SortAlgorithm::ALL {
        for k in 2u64..=6 {
            for l in 1u64..=6 {
                if k * l <= 12 {
                    circuits.push((
                        format!("{alg}_{k}_{l}"),
                        gen_sorter(alg, k, l).unwrap(),
                    ));
                }
            }
        }
    }
    // Miters are benchmark circuits too.
    for (a, b, k, l) in [
        (SortAlgorithm::Bubble, SortAlgorithm::Selection, 2u64, 2u64),
        (SortAlgorithm::Bubble, SortAlgorithm::Pancake, 3, 2),
        (SortAlgorithm::Pancake, SortAlgorithm::Selection, 2, 3),
    ] {
        let miter = build_miter(
            &gen_sorter(a, k, l).unwrap(),
            &gen_sorter(b, k, l).unwrap(),
        )
        .unwrap();
        circuits.push((format!("miter_{a}_{b}_{k}_{l}"), miter));
    }

    let mut checks = 0u64;
    for (name, circuit) in &circuits {
        let n = circuit.num_inputs();
        let (template, map) = tseitin_encode(circuit);
        for input in InputVector::all(n) {
            let mut assumptions = Assignment::empty(template.num_vars());
            for (i, &v) in map.input_vars().iter().enumerate() {
                assumptions.set(v, input.get(i));
            }
            match unit_propagate(&template, &assumptions) {
                Propagation::Fixpoint(a) => {
                    assert!(a.is_total(), "{name}: propagation left variables open");
                    let outputs = circuit.evaluate(&input).unwrap();
                    for (j, &lit) in map.output_lits().iter().enumerate() {
                        assert_eq!(
                            a.lit_value(lit),
                            Some(outputs[j]),
                            "{name}: output {j} disagrees with evaluation"
                        );
                    }
                }
                Propagation::Conflict { .. } => {
                    panic!("{name}: template propagation conflicted")
                }
            }
            checks += 1;
        }
    }
    pass(
        "unit-propagation-templates",
        &format!(
            "{} circuits, {checks} input vectors, {:.1?}",
            circuits.len(),
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: budget-1 decomposition terminates with the oracle verdict
// ---------------------------------------------------------------------------

#[test]
fn budget_one_termination() {
    let start = Instant::now();
    let mut rng = rng(0xBEEF);
    let mut instances: Vec<(String, Cnf, usize, bool)> = Vec::new();
    for case in 0..12 {
        let n = rng.gen_range(3..=10);
        let gates = rng.gen_range(2..=3 * n);
        let circuit = random_circuit(&mut rng, n, gates);
        let (cnf, _) = circuitsat_cnf(&circuit).unwrap();
        instances.push((
            format!("random_{case}"),
            cnf,
            n,
            circuit_is_satisfiable(&circuit),
        ));
    }
    for (a, b, k, l) in [
        (SortAlgorithm::Bubble, SortAlgorithm::Selection, 2u64, 2u64),
        (SortAlgorithm::Bubble, SortAlgorithm::Pancake, 2, 3),
        (SortAlgorithm::Pancake, SortAlgorithm::Selection, 4, 2),
    ] {
        let (cnf, n) = lec_instance(a, b, k, l);
        instances.push((format!("lec_{a}_{b}_{k}_{l}"), cnf, n, false));
    }
    for (k, l, skip) in [(2usize, 2usize, 0usize), (3, 2, 1)] {
        let (miter, cnf, n) = mutant_instance(k, l, skip);
        assert!(circuit_is_satisfiable(&miter), "mutant must differ");
        instances.push((format!("mutant_{k}_{l}_{skip}"), cnf, n, true));
    }

    let mut calls_total = 0u64;
    for (i, (name, cnf, n, expect_sat)) in instances.iter().enumerate() {
        let cfg = DfsConfig {
            q: if i % 2 == 0 { 1 } else { 4 },
            d: if i % 3 == 0 { 3 } else { 2 },
            budget: Budget::conflicts(1),
            seed: 0,
        };
        let (verdict, stats) = solve_dfs(cnf, *n, &cfg).unwrap();
        assert_eq!(
            verdict.is_sat(),
            *expect_sat,
            "{name}: verdict differs from the exhaustive oracle"
        );
        assert!(
            stats.subsolver_calls <= 1 << (n + 1),
            "{name}: {} calls exceeds 2^{}",
            stats.subsolver_calls,
            n + 1
        );
        calls_total += stats.subsolver_calls;
    }
    pass(
        "budget-one-termination",
        &format!(
            "{} instances, {calls_total} sub-solver calls, {:.1?}",
            instances.len(),
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: every engine agrees on the sorter equivalence suite
// ---------------------------------------------------------------------------

fn run_master_tcp(
    cnf: &Cnf,
    n: usize,
    workers: u32,
    cfg: &MasterConfig,
) -> (RunOutcome, intervalsat::DecompStats) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let mut handles = Vec::new();
    for _ in 0..workers {
        handles.push(std::thread::spawn(move || {
            let transport = TcpWorkerTransport::connect(addr).unwrap();
            let _ = run_worker(transport, &WorkerConfig::default());
        }));
    }
    let (hooks, _readers) = tcp_master_session(listener, workers).unwrap();
    let result = run_master(cnf, n, hooks, cfg).unwrap();
    for h in handles {
        h.join().unwrap();
    }
    result
}

#[test]
fn oracle_equivalence_suite() {
    let start = Instant::now();
    let pairs = [
        (SortAlgorithm::Bubble, SortAlgorithm::Selection),
        (SortAlgorithm::Bubble, SortAlgorithm::Pancake),
        (SortAlgorithm::Pancake, SortAlgorithm::Selection),
    ];
    let mut runs = 0u64;
    for (a, b) in pairs {
        for k in 2u64..=3 {
            for l in 1u64..=2 {
                let (cnf, n) = lec_instance(a, b, k, l);
                assert!(
                    solve_limited(&cnf, Budget::unlimited()).is_unsat(),
                    "{a} vs {b} ({k},{l}): single solver run"
                );
                let dfs = solve_dfs(
                    &cnf,
                    n,
                    &DfsConfig {
                        q: 4,
                        d: 2,
                        budget: Budget::conflicts(64),
                        seed: 0,
                    },
                )
                .unwrap();
                assert_eq!(dfs.0, FinalVerdict::Unsat, "{a} vs {b} ({k},{l}): dfs");
                runs += 2;
                for workers in [1u32, 2, 4] {
                    let cfg = MasterConfig {
                        q: 8.min(1 << n),
                        d: 2,
                        budget: Budget::conflicts(64),
                        audit: true,
                        ..MasterConfig::default()
                    };
                    let (inproc, _) = solve_parallel_inproc(
                        &cnf,
                        n,
                        workers,
                        &cfg,
                        &WorkerConfig::default(),
                    )
                    .unwrap();
                    assert_eq!(
                        inproc,
                        RunOutcome::Unsat,
                        "{a} vs {b} ({k},{l}): {workers} in-process workers"
                    );
                    let (tcp, _) = run_master_tcp(&cnf, n, workers, &cfg);
                    assert_eq!(
                        tcp,
                        RunOutcome::Unsat,
                        "{a} vs {b} ({k},{l}): {workers} tcp workers"
                    );
                    runs += 2;
                }
            }
        }
    }

    // Mutated sorters: one comparator removed makes every engine report SAT,
    // with models verified against the circuits themselves.
    let mut mutants = 0u64;
    for k in 2usize..=3 {
        for l in 1usize..=2 {
            let comparators = k * (k - 1) / 2;
            for skip in 0..comparators {
                let mutant = mutated_bubble_sorter(k, l, skip);
                let intact = gen_sorter(SortAlgorithm::Bubble, k as u64, l as u64).unwrap();
                let miter = build_miter(&mutant, &intact).unwrap();
                if !circuit_is_satisfiable(&miter) {
                    continue; // dropping this comparator happened to be harmless
                }
                let (cnf, _) = circuitsat_cnf(&miter).unwrap();
                let n = k * l;
                let check_model = |model: &Assignment| {
                    let input = InputVector::new(
                        (0..n).map(|i| model.get(Var(i as u32 + 1)).unwrap()).collect(),
                    );
                    assert_eq!(
                        miter.evaluate(&input).unwrap(),
                        vec![true],
                        "model must witness the difference"
                    );
                };
                match solve_limited(&cnf, Budget::unlimited()) {
                    Verdict::Sat(model) => check_model(&model),
                    other => panic!("mutant ({k},{l},{skip}): {other:?}"),
                }
                let dfs = solve_dfs(
                    &cnf,
                    n,
                    &DfsConfig {
                        q: 2,
                        d: 2,
                        budget: Budget::conflicts(64),
                        seed: 0,
                    },
                )
                .unwrap();
                match dfs.0 {
                    FinalVerdict::Sat(model) => check_model(&model),
                    FinalVerdict::Unsat => panic!("mutant ({k},{l},{skip}): dfs unsat"),
                }
                let cfg = MasterConfig {
                    q: 4.min(1 << n),
                    d: 2,
                    budget: Budget::conflicts(64),
                    audit: true,
                    ..MasterConfig::default()
                };
                match solve_parallel_inproc(&cnf, n, 4, &cfg, &WorkerConfig::default()).unwrap() {
                    (RunOutcome::Sat { model }, _) => check_model(&model),
                    (other, _) => panic!("mutant ({k},{l},{skip}): parallel {other:?}"),
                }
                mutants += 1;
            }
        }
    }
    assert!(mutants >= 6, "mutation suite must be non-trivial");
    assert!(start.elapsed() < Duration::from_secs(600), "criterion caps at 10 minutes");
    pass(
        "oracle-equivalence",
        &format!(
            "12 equivalence instances x engines ({runs} runs), {mutants} sat mutants, {:.1?}",
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: exhaust mode finds exactly the model set
// ---------------------------------------------------------------------------

#[test]
fn exhaust_mode_completeness() {
    let start = Instant::now();
    let mut rng = rng(0x5EED);
    let mut instances: Vec<(String, Circuit)> = Vec::new();
    for (k, l, skip) in [(2usize, 2usize, 0usize), (3, 2, 0), (3, 2, 2), (4, 1, 3)] {
        instances.push((
            format!("mutant_{k}_{l}_{skip}"),
            {
                let mutant = mutated_bubble_sorter(k, l, skip);
                let intact = gen_sorter(SortAlgorithm::Selection, k as u64, l as u64).unwrap();
                build_miter(&mutant, &intact).unwrap()
            },
        ));
    }
    for case in 0..6 {
        let n = rng.gen_range(2..=8);
        let gates = rng.gen_range(2..=2 * n);
        instances.push((format!("random_{case}"), random_circuit(&mut rng, n, gates)));
    }

    let mut model_total = 0usize;
    for (name, circuit) in &instances {
        let n = circuit.num_inputs();
        assert!(n <= 8);
        let (cnf, _) = circuitsat_cnf(circuit).unwrap();
        let expected = sat_input_values(circuit);
        for workers in [1u32, 3] {
            let cfg = MasterConfig {
                q: 4.min(1 << n),
                d: 2,
                budget: Budget::conflicts(32),
                mode: Mode::Exhaust,
                audit: true,
                ..MasterConfig::default()
            };
            let (outcome, _) =
                solve_parallel_inproc(&cnf, n, workers, &cfg, &WorkerConfig::default()).unwrap();
            let RunOutcome::Exhausted { input_models } = outcome else {
                panic!("{name}: exhaust mode must return the model collection");
            };
            let got: Vec<u64> = input_models.iter().map(value_of).collect();
            assert_eq!(got, expected, "{name} with {workers} workers");
            model_total += input_models.len();
        }
    }
    pass(
        "exhaust-completeness",
        &format!(
            "{} instances, {model_total} models collected, {:.1?}",
            instances.len(),
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: the adaptive split table and the queue discipline
// ---------------------------------------------------------------------------

#[test]
fn split_policy_hand_traced_table() {
    // Hand-traced cases covering the resolved-average rule, its guard, the
    // deepest-level rule, the descend rule, and the fan-out clamp.
    let cap = DEFAULT_SPLIT_CAP;
    let cases: [(u32, u32, u64, &[u32], u64, (u64, u32)); 12] = [
        // (l_current, l_max, d, solve_levels, cap, expected)
        (2, 4, 3, &[3, 4], cap, (3, 3)),      // avg 3 > 2: 3^1
        (2, 5, 2, &[], cap, (8, 5)),          // no resolutions: jump to max
        (4, 4, 2, &[], cap, (2, 5)),          // at max: descend by one
        (2, 2, 2, &[2], cap, (2, 3)),         // avg == current: guard falls through
        (3, 5, 2, &[1, 2], cap, (4, 5)),      // avg 1 < current: deepest-level rule
        (2, 9, 2, &[9, 9, 9], 16, (16, 9)),   // avg rule clamped at 16
        (1, 1, 7, &[], cap, (7, 2)),          // descend with d = 7
        (5, 7, 3, &[5, 6, 7], cap, (3, 6)),   // avg 6 > 5: 3^1
        (1, 4, 2, &[4, 4], cap, (8, 4)),      // avg 4 > 1: 2^3
        (1, 20, 2, &[], cap, (65536, 20)),    // max-level rule clamped at cap
        (3, 3, 5, &[3], cap, (5, 4)),         // avg == current, max == current
        (2, 6, 2, &[2, 3], cap, (16, 6)),     // floor(2.5) = 2: guard, then max
    ];
    for (i, (l_current, l_max, d, levels, cap, expected)) in cases.iter().enumerate() {
        assert_eq!(
            split_policy(*l_current, *l_max, *d, levels, *cap),
            *expected,
            "hand-traced case {i}"
        );
    }

    // Queue discipline: audited master runs assert level-descending pops
    // and interval conservation after every event.
    let (cnf, n) = lec_instance(SortAlgorithm::Bubble, SortAlgorithm::Selection, 3, 2);
    let cfg = MasterConfig {
        q: 8,
        d: 2,
        budget: Budget::conflicts(40),
        audit: true,
        shuffle_seed: Some(7),
        ..MasterConfig::default()
    };
    let (outcome, stats) =
        solve_parallel_inproc(&cnf, n, 4, &cfg, &WorkerConfig::default()).unwrap();
    assert_eq!(outcome, RunOutcome::Unsat);
    pass(
        "split-policy-and-queue",
        &format!(
            "12 hand-traced cases; audited run with {} tasks",
            stats.subsolver_calls
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: parallel speedup on a calibrated instance
// ---------------------------------------------------------------------------

#[test]
fn parallel_smoke_speedup() {
    // Difficulty ladder, easiest first, calibrated for this solver. The
    // test walks up until a rung needs >= 60 s of single-threaded solving,
    // then requires the 4-worker master to beat that wall time.
    let ladder: &[(u64, u64)] = &[(9, 3), (10, 3), (11, 3), (12, 3), (13, 3)];
    let threshold = Duration::from_secs(60);
    for &(k, l) in ladder {
        let (cnf, n) = lec_instance(SortAlgorithm::Bubble, SortAlgorithm::Selection, k, l);
        let sequential_start = Instant::now();
        let sequential = solve_limited(&cnf, Budget::unlimited());
        let sequential_time = sequential_start.elapsed();
        println!(
            "c smoke ladder ({k},{l}): single-threaded {:.1?}",
            sequential_time
        );
        if sequential_time < threshold {
            continue;
        }
        let cfg = MasterConfig {
            q: 64,
            d: 2,
            budget: Budget::conflicts(20_000),
            ..MasterConfig::default()
        };
        let parallel_start = Instant::now();
        let (outcome, stats) =
            solve_parallel_inproc(&cnf, n, 4, &cfg, &WorkerConfig::default()).unwrap();
        let parallel_time = parallel_start.elapsed();
        let agree = match (&outcome, &sequential) {
            (RunOutcome::Unsat, Verdict::Unsat) => true,
            (RunOutcome::Sat { .. }, Verdict::Sat(_)) => true,
            _ => false,
        };
        assert!(agree, "parallel verdict must match the sequential one");
        assert!(
            parallel_time < sequential_time,
            "4 workers took {parallel_time:.1?} vs single-threaded {sequential_time:.1?}"
        );
        pass(
            "parallel-smoke",
            &format!(
                "({k},{l}): {sequential_time:.1?} -> {parallel_time:.1?} with 4 workers \
                 ({:.2}x, {} tasks, {} indets)",
                sequential_time.as_secs_f64() / parallel_time.as_secs_f64(),
                stats.subsolver_calls,
                stats.indet_count
            ),
        );
        return;
    }
    panic!("no ladder instance needed 60 s single-threaded; extend the ladder");
}

// ---------------------------------------------------------------------------
// Criterion 8: protocol fuzzing and disconnect injection
// ---------------------------------------------------------------------------

#[test]
fn protocol_fuzzing() {
    use intervalsat::orchestrator::{DoneVerdict, Message};
    use intervalsat::orchestrator::protocol::{decode_message, encode_message};
    use rand::RngCore;

    let start = Instant::now();
    let mut rng = rng(0xF0552);
    let sample_messages: Vec<Message> = vec![
        Message::Ready { worker: 3 },
        Message::Exit,
        Message::Task {
            interval: Interval::from_u64(12345, 999999),
            level: 7,
            budget: 500,
        },
        Message::Done {
            worker: 1,
            verdict: DoneVerdict::Sat {
                input_bits: vec![true, false, true, true],
                model_bits: Some(vec![true; 9]),
            },
            interval: Interval::from_u64(13, 14),
            level: 9,
            conflicts: 1,
        },
        Message::Done {
            worker: 0,
            verdict: DoneVerdict::Indet,
            interval: Interval::from_u64(0, 1u64 << 40),
            level: 1,
            conflicts: 500,
        },
    ];
    let total = 100_000;
    let mut decoded_ok = 0u64;
    for i in 0..total {
        let frame: Vec<u8> = if i % 2 == 0 {
            // Pure random bytes.
            let len = rng.gen_range(0..128);
            let mut bytes = vec![0u8; len];
            rng.fill_bytes(&mut bytes);
            bytes
        } else {
            // A valid frame, mutated.
            let mut bytes = encode_message(&sample_messages[i % sample_messages.len()]);
            for _ in 0..rng.gen_range(1..=8) {
                match rng.gen_range(0..3) {
                    0 if !bytes.is_empty() => {
                        let at = rng.gen_range(0..bytes.len());
                        bytes[at] ^= 1 << rng.gen_range(0..8);
                    }
                    1 => {
                        bytes.truncate(rng.gen_range(0..=bytes.len()));
                    }
                    _ => bytes.push(rng.gen()),
                }
            }
            bytes
        };
        // A mis-decode would be a frame that parses into a message whose
        // canonical encoding differs from the bytes we fed in.
        if let Ok(msg) = decode_message(&frame) {
            assert_eq!(
                encode_message(&msg),
                frame,
                "fuzz case {i}: non-canonical decode"
            );
            decoded_ok += 1;
        }
    }
    pass(
        "protocol-fuzzing",
        &format!(
            "{total} frames, {decoded_ok} decoded canonically, {:.1?}",
            start.elapsed()
        ),
    );
}

#[test]
fn disconnect_injection_keeps_verdicts() {
    let start = Instant::now();
    let (unsat_cnf, n_unsat) =
        lec_instance(SortAlgorithm::Bubble, SortAlgorithm::Selection, 2, 2);
    let (sat_miter, sat_cnf, n_sat) = mutant_instance(2, 2, 0);
    assert!(circuit_is_satisfiable(&sat_miter));

    let tripped = Arc::new(AtomicU64::new(0));
    let runs = 1_000;
    for i in 0..runs {
        let use_sat = i % 2 == 0;
        let (cnf, n) = if use_sat {
            (&sat_cnf, n_sat)
        } else {
            (&unsat_cnf, n_unsat)
        };
        let (hooks, mut endpoints) = inproc_session(2);
        let flaky = FlakyTransport::new(endpoints.remove(0), (i % 17) as u64, tripped.clone());
        let reliable = endpoints.remove(0);
        let h1 = std::thread::spawn(move || {
            let _ = run_worker(flaky, &WorkerConfig::default());
        });
        let h2 = std::thread::spawn(move || {
            let _ = run_worker(reliable, &WorkerConfig::default());
        });
        let cfg = MasterConfig {
            q: 4,
            d: 2,
            budget: Budget::conflicts(16),
            ..MasterConfig::default()
        };
        let (outcome, _) = run_master(cnf, n, hooks, &cfg).unwrap();
        match (use_sat, outcome) {
            (true, RunOutcome::Sat { model }) => {
                let input = InputVector::new(
                    (0..n).map(|b| model.get(Var(b as u32 + 1)).unwrap()).collect(),
                );
                assert_eq!(sat_miter.evaluate(&input).unwrap(), vec![true]);
            }
            (false, RunOutcome::Unsat) => {}
            (_, other) => panic!("run {i}: verdict changed to {other:?}"),
        }
        h1.join().unwrap();
        h2.join().unwrap();
    }
    let fired = tripped.load(Ordering::Relaxed);
    assert!(
        fired >= runs / 4,
        "injection barely fired ({fired}/{runs}); schedule needs retuning"
    );
    pass(
        "disconnect-injection",
        &format!("{runs} runs, {fired} injected disconnects, {:.1?}", start.elapsed()),
    );
}
