//! DIMACS CNF reader.
//!
//! Accepts `c` comment lines anywhere, one `p cnf <vars> <clauses>` header,
//! clauses spanning any number of lines, and the SATLIB `%` end marker.

use super::{Formula, FormulaError, Literal, VarId};

pub fn parse_dimacs(text: &str) -> Result<Formula, FormulaError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    let mut starts: Vec<usize> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut current_start = 0;

    'lines: for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(FormulaError::MalformedHeader {
                    line: line_no,
                    reason: "duplicate header".into(),
                });
            }
            header = Some(parse_header(line, line_no)?);
            continue;
        }
        let Some((n, _)) = header else {
            return Err(FormulaError::MissingHeader);
        };
        for token in line.split_whitespace() {
            if token == "%" {
                break 'lines;
            }
            let value: i64 = token.parse().map_err(|_| FormulaError::BadToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                if current.is_empty() {
                    return Err(FormulaError::EmptyClause { line: line_no });
                }
                clauses.push(std::mem::take(&mut current));
                starts.push(current_start);
                continue;
            }
            let var = value.unsigned_abs();
            if var > u64::from(n) {
                return Err(FormulaError::VariableOutOfRange {
                    line: line_no,
                    var: value,
                    n,
                });
            }
            if current.is_empty() {
                current_start = line_no;
            }
            let lit = Literal::new(VarId::new(var as u32), value > 0);
            if current.iter().any(|l| l.var == lit.var) {
                return Err(FormulaError::RepeatedVariable {
                    line: line_no,
                    var: var as u32,
                });
            }
            current.push(lit);
        }
    }

    let Some((n, declared)) = header else {
        return Err(FormulaError::MissingHeader);
    };
    if !current.is_empty() {
        return Err(FormulaError::UnterminatedClause);
    }
    if clauses.len() != declared {
        return Err(FormulaError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    Formula::with_lines(n, clauses, &starts)
}

fn parse_header(line: &str, line_no: usize) -> Result<(u32, usize), FormulaError> {
    let malformed = |reason: &str| FormulaError::MalformedHeader {
        line: line_no,
        reason: reason.to_string(),
    };
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "p" {
        return Err(malformed("expected `p cnf <vars> <clauses>`"));
    }
    if parts[1] != "cnf" {
        return Err(malformed("only the `cnf` format is supported"));
    }
    let n = parts[2]
        .parse::<u32>()
        .map_err(|_| malformed("variable count is not a non-negative integer"))?;
    let m = parts[3]
        .parse::<usize>()
        .map_err(|_| malformed("clause count is not a non-negative integer"))?;
    Ok((n, m))
}
