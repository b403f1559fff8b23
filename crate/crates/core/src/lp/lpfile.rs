//! CPLEX LP text writer. Numbers use Rust's shortest round-trip formatting.

use std::fmt::Write;

use super::{LpProblem, RowSense};

fn sanitize(name: &str, fallback: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    match cleaned.chars().next() {
        Some(c) if !c.is_ascii_digit() && c != '.' => cleaned,
        _ => fallback.to_string(),
    }
}

fn push_terms(out: &mut String, terms: impl Iterator<Item = (String, f64)>) {
    let mut empty = true;
    for (name, coef) in terms {
        if coef == 0.0 {
            continue;
        }
        let sign = if coef < 0.0 { "-" } else { "+" };
        if empty && coef > 0.0 {
            let _ = write!(out, " {} {}", coef, name);
        } else {
            let _ = write!(out, " {} {} {}", sign, coef.abs(), name);
        }
        empty = false;
    }
    if empty {
        out.push_str(" 0");
    }
}

pub(super) fn write(p: &LpProblem) -> String {
    let names: Vec<String> = p
        .vars()
        .iter()
        .enumerate()
        .map(|(i, v)| sanitize(&v.name, &format!("x{i}")))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", p.name);
    out.push_str("Maximize\n obj:");
    push_terms(&mut out, names.iter().cloned().zip(p.vars().iter().map(|v| v.objective)));
    out.push_str("\nSubject To\n");
    for (i, row) in p.constraints().iter().enumerate() {
        let _ = write!(out, " {}:", sanitize(&row.name, &format!("c{i}")));
        push_terms(&mut out, row.coeffs.iter().map(|&(v, c)| (names[v].clone(), c)));
        let op = match row.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {} {}", op, row.rhs);
    }
    out.push_str("Bounds\n");
    for (name, v) in names.iter().zip(p.vars()) {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", v.lower, name, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", name, v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {} <= {}", name, v.upper);
            }
            (false, false) => {
                let _ = writeln!(out, " {} free", name);
            }
        }
    }
    out.push_str("End\n");
    out
}
