//! ASCII AIGER interchange (`aag` header). Combinational only: the latch
//! count must be zero. Parsing renumbers nodes, so round-trips preserve the
//! computed function rather than literal numbering.

use std::collections::HashMap;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, Signal};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AigerError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: latches are not supported")]
    Latch { line: usize },
    #[error("line {line}: constant literals 0/1 are not supported")]
    Constant { line: usize },
    #[error("line {line}: gate {var} participates in a definition cycle")]
    Cycle { line: usize, var: u64 },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

fn malformed(line: usize, msg: impl Into<String>) -> AigerError {
    AigerError::Malformed {
        line,
        msg: msg.into(),
    }
}

struct AndDef {
    rhs0: u64,
    rhs1: u64,
    line: usize,
}

/// Parses an ASCII AIGER document into a [`Circuit`].
pub fn parse_aiger(text: &str) -> Result<Circuit, AigerError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "empty document"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "aag" {
        return Err(malformed(header_line, "expected header 'aag M I L O A'"));
    }
    let nums: Vec<u64> = fields[1..]
        .iter()
        .map(|f| {
            f.parse::<u64>()
                .map_err(|_| malformed(header_line, format!("bad header field '{f}'")))
        })
        .collect::<Result<_, _>>()?;
    let (max_var, num_inputs, num_latches, num_outputs, num_ands) =
        (nums[0], nums[1], nums[2], nums[3], nums[4]);
    if num_latches != 0 {
        return Err(AigerError::Latch { line: header_line });
    }
    if num_inputs + num_ands > max_var {
        return Err(malformed(
            header_line,
            format!("header declares M = {max_var} but I + A = {}", num_inputs + num_ands),
        ));
    }

    let mut next_data_line = || -> Result<(usize, &str), AigerError> {
        for (no, raw) in lines.by_ref() {
            if !raw.trim().is_empty() {
                return Ok((no, raw));
            }
        }
        Err(malformed(0, "unexpected end of file"))
    };
    let parse_literal = |tok: &str, line: usize| -> Result<u64, AigerError> {
        let lit: u64 = tok
            .parse()
            .map_err(|_| malformed(line, format!("bad literal '{tok}'")))?;
        if lit < 2 {
            return Err(AigerError::Constant { line });
        }
        if lit / 2 > max_var {
            return Err(malformed(
                line,
                format!("literal {lit} exceeds the declared maximum variable {max_var}"),
            ));
        }
        Ok(lit)
    };

    // Input section: one even literal per line, each defining a fresh variable.
    let mut input_of_var: HashMap<u64, usize> = HashMap::new();
    for i in 0..num_inputs {
        let (no, raw) = next_data_line()?;
        let lit = parse_literal(raw.trim(), no)?;
        if lit % 2 != 0 {
            return Err(malformed(no, "input literal must be even"));
        }
        if input_of_var.insert(lit / 2, i as usize).is_some() {
            return Err(malformed(no, format!("variable {} declared twice", lit / 2)));
        }
    }

    // Output section: arbitrary literals, resolved after gates are known.
    let mut output_lits: Vec<(u64, usize)> = Vec::with_capacity(num_outputs as usize);
    for _ in 0..num_outputs {
        let (no, raw) = next_data_line()?;
        output_lits.push((parse_literal(raw.trim(), no)?, no));
    }

    // And section: "lhs rhs0 rhs1" per line.
    let mut and_defs: HashMap<u64, AndDef> = HashMap::new();
    for _ in 0..num_ands {
        let (no, raw) = next_data_line()?;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(malformed(no, "and gate line must have three literals"));
        }
        let lhs = parse_literal(toks[0], no)?;
        if lhs % 2 != 0 {
            return Err(malformed(no, "and gate output literal must be even"));
        }
        let var = lhs / 2;
        if input_of_var.contains_key(&var) {
            return Err(malformed(no, format!("variable {var} redefines an input")));
        }
        let rhs0 = parse_literal(toks[1], no)?;
        let rhs1 = parse_literal(toks[2], no)?;
        if and_defs
            .insert(
                var,
                AndDef {
                    rhs0,
                    rhs1,
                    line: no,
                },
            )
            .is_some()
        {
            return Err(malformed(no, format!("variable {var} defined twice")));
        }
    }
    // The remainder (symbol table, comments) is ignored.

    // Topologically order the gates, detecting cycles and dangling references.
    let mut order: Vec<u64> = Vec::with_capacity(and_defs.len());
    let mut state: HashMap<u64, u8> = HashMap::new(); // 1 = visiting, 2 = done
    let mut gate_vars: Vec<u64> = and_defs.keys().copied().collect();
    gate_vars.sort_unstable();
    for &root in &gate_vars {
        if state.get(&root) == Some(&2) {
            continue;
        }
        // Iterative DFS: (var, fanin cursor).
        let mut stack: Vec<(u64, u8)> = vec![(root, 0)];
        state.insert(root, 1);
        while let Some(&mut (var, ref mut cursor)) = stack.last_mut() {
            let def = &and_defs[&var];
            if *cursor < 2 {
                let rhs = if *cursor == 0 { def.rhs0 } else { def.rhs1 };
                *cursor += 1;
                let dep = rhs / 2;
                if input_of_var.contains_key(&dep) {
                    continue;
                }
                let Some(dep_def) = and_defs.get(&dep) else {
                    return Err(malformed(
                        def.line,
                        format!("literal {rhs} references undefined variable {dep}"),
                    ));
                };
                match state.get(&dep) {
                    Some(1) => {
                        return Err(AigerError::Cycle {
                            line: dep_def.line,
                            var: dep,
                        })
                    }
                    Some(2) => continue,
                    _ => {
                        state.insert(dep, 1);
                        stack.push((dep, 0));
                    }
                }
            } else {
                state.insert(var, 2);
                order.push(var);
                stack.pop();
            }
        }
    }

    let mut node_of_var: HashMap<u64, usize> =
        input_of_var.iter().map(|(&v, &i)| (v, i)).collect();
    let resolve = |lit: u64, line: usize, node_of_var: &HashMap<u64, usize>| {
        node_of_var
            .get(&(lit / 2))
            .map(|&node| Signal::new(node, lit % 2 == 1))
            .ok_or_else(|| {
                malformed(
                    line,
                    format!("literal {lit} references undefined variable {}", lit / 2),
                )
            })
    };
    let mut gates = Vec::with_capacity(order.len());
    for (g, &var) in order.iter().enumerate() {
        let def = &and_defs[&var];
        let a = resolve(def.rhs0, def.line, &node_of_var)?;
        let b = resolve(def.rhs1, def.line, &node_of_var)?;
        gates.push(Gate { a, b });
        node_of_var.insert(var, num_inputs as usize + g);
    }
    let outputs = output_lits
        .into_iter()
        .map(|(lit, line)| resolve(lit, line, &node_of_var))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Circuit::new(num_inputs as usize, gates, outputs)?)
}

/// Serializes a circuit as ASCII AIGER with compact numbering: input `i` is
/// variable `i+1`, gate `g` is variable `num_inputs + g + 1`.
pub fn serialize_aiger(circuit: &Circuit) -> String {
    let n = circuit.num_inputs();
    let lit = |s: Signal| -> u64 { 2 * (s.index() as u64 + 1) + s.is_negated() as u64 };
    let mut out = String::new();
    out.push_str(&format!(
        "aag {} {} 0 {} {}\n",
        n + circuit.num_gates(),
        n,
        circuit.num_outputs(),
        circuit.num_gates()
    ));
    for i in 0..n {
        out.push_str(&format!("{}\n", 2 * (i as u64 + 1)));
    }
    for &sig in circuit.outputs() {
        out.push_str(&format!("{}\n", lit(sig)));
    }
    for (g, gate) in circuit.gates().iter().enumerate() {
        out.push_str(&format!(
            "{} {} {}\n",
            2 * (n as u64 + g as u64 + 1),
            lit(gate.a),
            lit(gate.b)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitBuilder, InputVector};
    use crate::sorter::{gen_sorter, SortAlgorithm};

    fn single_and() -> Circuit {
        let mut b = CircuitBuilder::new(2);
        let g = b.and(b.input(0), b.input(1));
        b.finish(vec![g]).unwrap()
    }

    fn functionally_equal(a: &Circuit, b: &Circuit, n: usize) -> bool {
        InputVector::all(n).all(|iv| a.evaluate(&iv).unwrap() == b.evaluate(&iv).unwrap())
    }

    #[test]
    fn roundtrip_single_and() {
        let c = single_and();
        let parsed = parse_aiger(&serialize_aiger(&c)).unwrap();
        assert!(functionally_equal(&c, &parsed, 2));
    }

    #[test]
    fn latch_header_rejected() {
        let text = "aag 3 1 1 1 0\n2\n4 6\n2\n";
        assert_eq!(parse_aiger(text), Err(AigerError::Latch { line: 1 }));
    }

    #[test]
    fn roundtrip_sorter_exhaustive() {
        let c = gen_sorter(SortAlgorithm::Bubble, 3, 2).unwrap();
        let parsed = parse_aiger(&serialize_aiger(&c)).unwrap();
        assert!(functionally_equal(&c, &parsed, 6));
    }

    #[test]
    fn negated_output_survives_roundtrip() {
        let mut b = CircuitBuilder::new(2);
        let g = b.and(b.input(0), !b.input(1));
        let x0 = b.input(0);
        let c = b.finish(vec![!g, x0]).unwrap();
        let parsed = parse_aiger(&serialize_aiger(&c)).unwrap();
        assert!(functionally_equal(&c, &parsed, 2));
    }

    #[test]
    fn cycle_detected() {
        // Two gates referencing each other.
        let text = "aag 4 1 0 1 2\n2\n6\n4 6 2\n6 4 2\n";
        assert!(matches!(parse_aiger(text), Err(AigerError::Cycle { .. })));
    }

    #[test]
    fn constants_rejected() {
        let text = "aag 2 1 0 1 1\n2\n4\n4 2 1\n";
        assert_eq!(parse_aiger(text), Err(AigerError::Constant { line: 4 }));
    }

    #[test]
    fn bad_header_reports_line() {
        assert_eq!(
            parse_aiger("aig 1 1 0 0 0\n"),
            Err(AigerError::Malformed {
                line: 1,
                msg: "expected header 'aag M I L O A'".into()
            })
        );
    }

    #[test]
    fn out_of_order_gates_are_renumbered() {
        // The first gate listed depends on the second.
        let text = "aag 4 1 0 1 2\n2\n8\n8 6 2\n6 2 2\n";
        let c = parse_aiger(text).unwrap();
        // out = (x & x) & x = x
        assert_eq!(
            c.evaluate(&InputVector::new(vec![true])).unwrap(),
            vec![true]
        );
        assert_eq!(
            c.evaluate(&InputVector::new(vec![false])).unwrap(),
            vec![false]
        );
    }

    #[test]
    fn truncated_file_rejected() {
        let text = "aag 2 2 0 1 0\n2\n";
        assert!(matches!(
            parse_aiger(text),
            Err(AigerError::Malformed { .. })
        ));
    }
}
