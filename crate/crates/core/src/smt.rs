//! SMT-LIB2 (QF_NIA) encoding of solver problems and a client for external
//! solvers that read a script on standard input.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::poly::{PVar, Poly};
use crate::solver::{Constraint, Csp, Outcome};

/// `name` as an SMT-LIB symbol, quoted when it has unusual characters.
pub fn symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{}|", name.replace(['|', '\\'], "_"))
    }
}

fn poly_expr(p: &Poly, name: &dyn Fn(u32) -> String) -> String {
    let mut summands = Vec::new();
    for (m, c) in p.terms() {
        let mut factors = Vec::new();
        for (v, e) in m {
            let s = match v {
                PVar::Unknown(k) => symbol(&name(*k)),
                other => symbol(&other.to_string()),
            };
            for _ in 0..*e {
                factors.push(s.clone());
            }
        }
        let coeff = if c < 0 { format!("(- {})", -c) } else { c.to_string() };
        summands.push(if factors.is_empty() {
            coeff
        } else if c == 1 {
            if factors.len() == 1 {
                factors.remove(0)
            } else {
                format!("(* {})", factors.join(" "))
            }
        } else {
            format!("(* {coeff} {})", factors.join(" "))
        });
    }
    match summands.len() {
        0 => "0".into(),
        1 => summands.remove(0),
        _ => format!("(+ {})", summands.join(" ")),
    }
}

fn constraint_expr(c: &Constraint, name: &dyn Fn(u32) -> String) -> String {
    let bound = if c.bound < 0 { format!("(- {})", -c.bound) } else { c.bound.to_string() };
    format!("(>= {} {bound})", poly_expr(&c.poly, name))
}

fn conj(cs: &[Constraint], name: &dyn Fn(u32) -> String) -> String {
    match cs.len() {
        0 => "true".into(),
        1 => constraint_expr(&cs[0], name),
        _ => format!(
            "(and {})",
            cs.iter().map(|c| constraint_expr(c, name)).collect::<Vec<_>>().join(" ")
        ),
    }
}

/// The script: declarations with domain bounds, constraints, one
/// disjunction per group, `(check-sat)` and `(get-value ...)`.
pub fn to_smtlib(csp: &Csp, name: &dyn Fn(u32) -> String) -> String {
    let mut out = String::from("(set-logic QF_NIA)\n");
    for (k, hi) in &csp.domains {
        let s = symbol(&name(*k));
        let _ = writeln!(out, "(declare-const {s} Int)");
        let _ = writeln!(out, "(assert (and (>= {s} 0) (<= {s} {hi})))");
    }
    for c in &csp.hard {
        let _ = writeln!(out, "(assert {})", constraint_expr(c, name));
    }
    for g in &csp.groups {
        let alts: Vec<String> = g.iter().map(|alt| conj(alt, name)).collect();
        let _ = writeln!(out, "(assert (or {}))", alts.join(" "));
    }
    out.push_str("(check-sat)\n");
    if !csp.domains.is_empty() {
        let syms: Vec<String> = csp.domains.keys().map(|k| symbol(&name(*k))).collect();
        let _ = writeln!(out, "(get-value ({}))", syms.join(" "));
    }
    out
}

/// Interprets solver output: `sat` followed by a `get-value` model,
/// `unsat`, or anything else (unknown). Group choices are recomputed from
/// the model.
pub fn parse_answer(csp: &Csp, name: &dyn Fn(u32) -> String, text: &str) -> Outcome {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("sat") => {}
        Some("unsat") => return Outcome::Unsat,
        _ => return Outcome::Unknown,
    }
    let rest: String = lines.collect::<Vec<_>>().join(" ");
    // Tokens: parentheses, |quoted| symbols and atoms.
    let mut toks = Vec::new();
    let mut chars = rest.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => toks.push(c.to_string()),
            '|' => {
                let mut s = String::from("|");
                for d in chars.by_ref() {
                    s.push(d);
                    if d == '|' {
                        break;
                    }
                }
                toks.push(s);
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = c.to_string();
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                toks.push(s);
            }
        }
    }
    let by_symbol: BTreeMap<String, u32> = csp.domains.keys().map(|k| (symbol(&name(*k)), *k)).collect();
    let mut model = BTreeMap::new();
    let mut i = 0;
    while i < toks.len() {
        if let Some(&k) = by_symbol.get(&toks[i]) {
            let value = match (toks.get(i + 1).map(String::as_str), toks.get(i + 2), toks.get(i + 3)) {
                (Some("("), Some(m), Some(v)) if m == "-" => v.parse::<i128>().ok().map(|v| -v),
                (Some(v), _, _) => v.parse::<i128>().ok(),
                _ => None,
            };
            match value {
                Some(v) => {
                    model.insert(k, v);
                }
                None => return Outcome::Unknown,
            }
        }
        i += 1;
    }
    if model.len() != csp.domains.len() || !csp.hard.iter().all(|c| c.holds(&model)) {
        return Outcome::Unknown;
    }
    let mut choices = Vec::new();
    for g in &csp.groups {
        match g.iter().position(|alt| alt.iter().all(|c| c.holds(&model))) {
            Some(a) => choices.push(a),
            None => return Outcome::Unknown,
        }
    }
    Outcome::Sat { model, choices }
}

/// Runs `command` (split on whitespace) with the script on stdin. Failures
/// of any kind yield [`Outcome::Unknown`].
pub fn solve_external(csp: &Csp, name: &dyn Fn(u32) -> String, command: &str, deadline: Option<Instant>) -> Outcome {
    let mut parts = command.split_whitespace();
    let Some(prog) = parts.next() else {
        return Outcome::Unknown;
    };
    let Ok(mut child) = Command::new(prog)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
    else {
        return Outcome::Unknown;
    };
    let script = to_smtlib(csp, name);
    if let Some(mut stdin) = child.stdin.take() {
        if stdin.write_all(script.as_bytes()).is_err() {
            let _ = child.kill();
            return Outcome::Unknown;
        }
    }
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) => {
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Outcome::Unknown;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(_) => return Outcome::Unknown,
        }
    }
    let mut text = String::new();
    if let Some(mut out) = child.stdout.take() {
        if out.read_to_string(&mut text).is_err() {
            return Outcome::Unknown;
        }
    }
    parse_answer(csp, name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csp() -> Csp {
        let u = |k| Poly::var(PVar::Unknown(k));
        Csp {
            domains: [(0, 3), (1, 3)].into_iter().collect(),
            hard: vec![Constraint::geq(u(0).sub(&u(1)), 1)],
            groups: vec![vec![vec![Constraint::geq(u(1), 1)], vec![]]],
        }
    }

    fn name(k: u32) -> String {
        if k == 0 {
            "c_f_0".into()
        } else {
            "c_F#_0".into()
        }
    }

    #[test]
    fn script_shape() {
        let s = to_smtlib(&csp(), &name);
        assert!(s.starts_with("(set-logic QF_NIA)"));
        assert!(s.contains("(declare-const c_f_0 Int)"));
        assert!(s.contains("(declare-const |c_F#_0| Int)"));
        assert!(s.contains("(check-sat)"));
        assert!(s.contains("(get-value (c_f_0 |c_F#_0|))"));
    }

    #[test]
    fn parses_model() {
        let out = parse_answer(&csp(), &name, "sat\n((c_f_0 2)\n (|c_F#_0| 1))\n");
        let Outcome::Sat { model, choices } = out else {
            panic!("{out:?}");
        };
        assert_eq!(model[&0], 2);
        assert_eq!(model[&1], 1);
        assert_eq!(choices, vec![0]);
        assert_eq!(parse_answer(&csp(), &name, "unsat\n"), Outcome::Unsat);
        assert_eq!(parse_answer(&csp(), &name, "unknown\n"), Outcome::Unknown);
        // A model violating the constraints is not trusted.
        assert_eq!(parse_answer(&csp(), &name, "sat\n((c_f_0 0) (|c_F#_0| 1))"), Outcome::Unknown);
    }

    #[test]
    fn missing_solver_is_unknown() {
        assert_eq!(
            solve_external(&csp(), &name, "/nonexistent/solver -in", None),
            Outcome::Unknown
        );
    }
}
