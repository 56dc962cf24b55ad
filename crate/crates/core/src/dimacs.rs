//! DIMACS CNF reading and writing.
//!
//! Files written by this crate are self-describing: two comment lines carry
//! the variable map, so the decomposition commands can recover the circuit
//! inputs without the original circuit.
//!
//! ```text
//! c meta inputs 1 2 3 4
//! c meta outputs -9
//! p cnf 9 13
//! ...
//! ```

use thiserror::Error;

use crate::cnf::{Clause, Cnf, CnfError, Lit, Var, VarMap};

/// The self-description carried in `c meta` comment lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfMeta {
    pub input_vars: Vec<Var>,
    pub output_lits: Vec<Lit>,
}

impl From<&VarMap> for CnfMeta {
    fn from(map: &VarMap) -> CnfMeta {
        CnfMeta {
            input_vars: map.input_vars().to_vec(),
            output_lits: map.output_lits().to_vec(),
        }
    }
}

impl CnfMeta {
    /// True when the inputs are exactly variables `1..=n`, the convention
    /// the interval encoder relies on.
    pub fn inputs_are_canonical(&self) -> bool {
        self.input_vars
            .iter()
            .enumerate()
            .all(|(i, v)| v.0 == i as u32 + 1)
    }
}

/// A parsed DIMACS document: the formula plus any recognized meta comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimacsDoc {
    pub cnf: Cnf,
    pub meta: Option<CnfMeta>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("line {line}: expected 'p cnf VARS CLAUSES' header, got '{got}'")]
    BadHeader { line: usize, got: String },
    #[error("line {line}: second header")]
    DuplicateHeader { line: usize },
    #[error("no 'p cnf' header found")]
    MissingHeader,
    #[error("line {line}: literal {lit} out of range (formula has {num_vars} variables)")]
    LiteralOutOfRange {
        line: usize,
        lit: i64,
        num_vars: u32,
    },
    #[error("line {line}: clause not terminated by 0")]
    MissingTerminator { line: usize },
    #[error("line {line}: unexpected token '{token}'")]
    BadToken { line: usize, token: String },
    #[error("header declares {expected} clauses but the body has {got}")]
    ClauseCountMismatch { expected: usize, got: usize },
    #[error("line {line}: bad meta line: {msg}")]
    BadMeta { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: CnfError },
}

pub fn parse_dimacs(text: &str) -> Result<DimacsDoc, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    let mut current_start_line = 0usize;
    let mut clause_lines: Vec<usize> = Vec::new();
    let mut meta_inputs: Option<(usize, Vec<u64>)> = None;
    let mut meta_outputs: Option<(usize, Vec<i64>)> = None;

    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                parse_meta_comment(
                    rest.trim(),
                    line_no,
                    &mut meta_inputs,
                    &mut meta_outputs,
                )?;
                continue;
            }
            // 'c' glued to something else is still a comment per common usage
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(DimacsError::DuplicateHeader { line: line_no });
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = (fields.len() == 4 && fields[0] == "p" && fields[1] == "cnf")
                .then(|| {
                    Some((
                        fields[2].parse::<u32>().ok()?,
                        fields[3].parse::<usize>().ok()?,
                    ))
                })
                .flatten();
            match parsed {
                Some((v, c)) => header = Some((v, c)),
                None => {
                    return Err(DimacsError::BadHeader {
                        line: line_no,
                        got: line.to_string(),
                    })
                }
            }
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(DimacsError::MissingHeader);
        };
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| DimacsError::BadToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                clauses.push(std::mem::take(&mut current));
                clause_lines.push(if current_start_line == 0 {
                    line_no
                } else {
                    current_start_line
                });
                current_start_line = 0;
            } else {
                if value.unsigned_abs() > num_vars as u64 {
                    return Err(DimacsError::LiteralOutOfRange {
                        line: line_no,
                        lit: value,
                        num_vars,
                    });
                }
                if current.is_empty() {
                    current_start_line = line_no;
                }
                current.push(Lit::from_dimacs(value as i32).expect("non-zero"));
            }
        }
    }

    let Some((num_vars, expected_clauses)) = header else {
        return Err(DimacsError::MissingHeader);
    };
    if !current.is_empty() {
        return Err(DimacsError::MissingTerminator {
            line: current_start_line,
        });
    }
    if clauses.len() != expected_clauses {
        return Err(DimacsError::ClauseCountMismatch {
            expected: expected_clauses,
            got: clauses.len(),
        });
    }
    let cnf = Cnf::new(num_vars, clauses).map_err(|e| {
        let line = match &e {
            CnfError::Tautology { clause, .. }
            | CnfError::VarOutOfRange { clause, .. }
            | CnfError::EmptyClause { clause } => clause_lines.get(*clause).copied().unwrap_or(0),
        };
        DimacsError::Invalid { line, source: e }
    })?;

    let meta = build_meta(meta_inputs, meta_outputs, num_vars)?;
    Ok(DimacsDoc { cnf, meta })
}

fn parse_meta_comment(
    rest: &str,
    line: usize,
    meta_inputs: &mut Option<(usize, Vec<u64>)>,
    meta_outputs: &mut Option<(usize, Vec<i64>)>,
) -> Result<(), DimacsError> {
    let Some(body) = rest.strip_prefix("meta") else {
        return Ok(());
    };
    if !body.is_empty() && !body.starts_with(char::is_whitespace) {
        return Ok(()); // an ordinary comment that merely starts with "meta"
    }
    let mut toks = body.split_whitespace();
    match toks.next() {
        Some("inputs") => {
            let vals = toks
                .map(|t| t.parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| DimacsError::BadMeta {
                    line,
                    msg: "inputs must be positive integers".into(),
                })?;
            if meta_inputs.replace((line, vals)).is_some() {
                return Err(DimacsError::BadMeta {
                    line,
                    msg: "duplicate 'meta inputs' line".into(),
                });
            }
        }
        Some("outputs") => {
            let vals = toks
                .map(|t| t.parse::<i64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| DimacsError::BadMeta {
                    line,
                    msg: "outputs must be integers".into(),
                })?;
            if meta_outputs.replace((line, vals)).is_some() {
                return Err(DimacsError::BadMeta {
                    line,
                    msg: "duplicate 'meta outputs' line".into(),
                });
            }
        }
        Some(other) => {
            return Err(DimacsError::BadMeta {
                line,
                msg: format!("unknown meta kind '{other}'"),
            })
        }
        None => {
            return Err(DimacsError::BadMeta {
                line,
                msg: "meta line without a kind".into(),
            })
        }
    }
    Ok(())
}

fn build_meta(
    inputs: Option<(usize, Vec<u64>)>,
    outputs: Option<(usize, Vec<i64>)>,
    num_vars: u32,
) -> Result<Option<CnfMeta>, DimacsError> {
    let (Some((in_line, input_raw)), outputs) = (inputs, outputs) else {
        return Ok(None);
    };
    let input_vars = input_raw
        .iter()
        .map(|&v| {
            if v == 0 || v > num_vars as u64 {
                Err(DimacsError::BadMeta {
                    line: in_line,
                    msg: format!("input variable {v} out of range"),
                })
            } else {
                Ok(Var(v as u32))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let output_lits = match outputs {
        None => Vec::new(),
        Some((out_line, raw)) => raw
            .iter()
            .map(|&l| {
                if l == 0 || l.unsigned_abs() > num_vars as u64 {
                    Err(DimacsError::BadMeta {
                        line: out_line,
                        msg: format!("output literal {l} out of range"),
                    })
                } else {
                    Ok(Lit::from_dimacs(l as i32).expect("non-zero"))
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    Ok(Some(CnfMeta {
        input_vars,
        output_lits,
    }))
}

pub fn write_dimacs(cnf: &Cnf) -> String {
    render(cnf, None)
}

pub fn write_dimacs_with_meta(cnf: &Cnf, meta: &CnfMeta) -> String {
    render(cnf, Some(meta))
}

fn render(cnf: &Cnf, meta: Option<&CnfMeta>) -> String {
    let mut out = String::new();
    if let Some(meta) = meta {
        out.push_str("c meta inputs");
        for v in &meta.input_vars {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
        out.push_str("c meta outputs");
        for l in &meta.output_lits {
            out.push_str(&format!(" {l}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("p cnf {} {}\n", cnf.num_vars(), cnf.num_clauses()));
    for clause in cnf.clauses() {
        for lit in clause {
            out.push_str(&format!("{lit} "));
        }
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::tseitin_encode;
    use crate::sorter::{gen_sorter, SortAlgorithm};

    #[test]
    fn parses_simple_formula() {
        let doc = parse_dimacs("p cnf 2 1\n1 -2 0\n").unwrap();
        assert_eq!(doc.cnf.num_vars(), 2);
        assert_eq!(
            doc.cnf.clauses(),
            &[vec![
                Lit::positive(Var(1)),
                Lit::negative(Var(2))
            ]]
        );
        assert!(doc.meta.is_none());
    }

    #[test]
    fn roundtrip_preserves_clause_multiset() {
        // A template CNF with ten gates.
        let c = gen_sorter(SortAlgorithm::Bubble, 2, 1).unwrap();
        let (cnf, map) = tseitin_encode(&c);
        let text = write_dimacs_with_meta(&cnf, &CnfMeta::from(&map));
        let doc = parse_dimacs(&text).unwrap();
        let mut a: Vec<Clause> = cnf.clauses().to_vec();
        let mut b: Vec<Clause> = doc.cnf.clauses().to_vec();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(doc.cnf.num_vars(), cnf.num_vars());
        let meta = doc.meta.unwrap();
        assert_eq!(meta.input_vars, map.input_vars());
        assert_eq!(meta.output_lits, map.output_lits());
        assert!(meta.inputs_are_canonical());
    }

    #[test]
    fn clause_count_mismatch_rejected() {
        let err = parse_dimacs("p cnf 2 2\n1 -2 0\n").unwrap_err();
        assert_eq!(
            err,
            DimacsError::ClauseCountMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn missing_terminator_rejected() {
        let err = parse_dimacs("p cnf 2 1\n1 -2\n").unwrap_err();
        assert_eq!(err, DimacsError::MissingTerminator { line: 2 });
    }

    #[test]
    fn out_of_range_literal_reports_position() {
        let err = parse_dimacs("p cnf 2 1\n1 -3 0\n").unwrap_err();
        assert_eq!(
            err,
            DimacsError::LiteralOutOfRange {
                line: 2,
                lit: -3,
                num_vars: 2
            }
        );
    }

    #[test]
    fn junk_token_rejected() {
        let err = parse_dimacs("p cnf 1 1\n1 x 0\n").unwrap_err();
        assert_eq!(
            err,
            DimacsError::BadToken {
                line: 2,
                token: "x".into()
            }
        );
    }

    #[test]
    fn clause_may_span_lines() {
        let doc = parse_dimacs("p cnf 3 1\n1\n2 3\n0\n").unwrap();
        assert_eq!(doc.cnf.num_clauses(), 1);
        assert_eq!(doc.cnf.clauses()[0].len(), 3);
    }

    #[test]
    fn comments_allowed_anywhere() {
        let doc = parse_dimacs("c hello\np cnf 1 1\nc mid\n1 0\nc end\n").unwrap();
        assert_eq!(doc.cnf.num_clauses(), 1);
    }

    #[test]
    fn meta_out_of_range_rejected() {
        let err = parse_dimacs("c meta inputs 5\np cnf 2 1\n1 0\n").unwrap_err();
        assert!(matches!(err, DimacsError::BadMeta { line: 1, .. }));
    }
}
