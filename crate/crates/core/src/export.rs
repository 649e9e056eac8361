//! KeYmaera X archive output for proof obligations.
//!
//! Every obligation becomes one `ArchiveEntry` whose problem is the goal,
//! fully parenthesized. Premises are not exported.

use std::fmt::Write as _;

use crate::ast::{format_rational, Formula, Program, Term};
use crate::obligation::ProofObligation;
use crate::semantics::StaticSemantics;

fn term(t: &Term, out: &mut String) {
    match t {
        Term::Var(x) => out.push_str(x),
        Term::Const(r) => {
            let s = format_rational(r);
            if s.starts_with('-') || s.contains('/') {
                let _ = write!(out, "({s})");
            } else {
                out.push_str(&s);
            }
        }
        Term::Add(a, b) => bin(a, "+", b, out),
        Term::Sub(a, b) => bin(a, "-", b, out),
        Term::Mul(a, b) => bin(a, "*", b, out),
        Term::Div(a, b) => bin(a, "/", b, out),
        Term::Neg(a) => {
            out.push_str("(-");
            term(a, out);
            out.push(')');
        }
    }
}

fn bin(a: &Term, op: &str, b: &Term, out: &mut String) {
    out.push('(');
    term(a, out);
    let _ = write!(out, " {op} ");
    term(b, out);
    out.push(')');
}

fn formula(f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Cmp(op, a, b) => {
            term(a, out);
            let _ = write!(out, " {} ", op.symbol());
            term(b, out);
        }
        Formula::Not(a) => {
            out.push_str("!(");
            formula(a, out);
            out.push(')');
        }
        Formula::And(a, b) => connective(a, "&", b, out),
        Formula::Or(a, b) => connective(a, "|", b, out),
        Formula::Implies(a, b) => connective(a, "->", b, out),
        Formula::Forall(x, a) | Formula::Exists(x, a) => {
            let q = if matches!(f, Formula::Forall(..)) { "\\forall" } else { "\\exists" };
            let _ = write!(out, "{q} {x} (");
            formula(a, out);
            out.push(')');
        }
        Formula::Box(p, a) => {
            out.push('[');
            program(p, out);
            out.push_str("](");
            formula(a, out);
            out.push(')');
        }
    }
}

fn connective(a: &Formula, op: &str, b: &Formula, out: &mut String) {
    out.push('(');
    formula(a, out);
    let _ = write!(out, ") {op} (");
    formula(b, out);
    out.push(')');
}

fn program(p: &Program, out: &mut String) {
    match p {
        Program::Test(f) => {
            out.push_str("?(");
            formula(f, out);
            out.push_str(");");
        }
        Program::Assign(x, e) => {
            let _ = write!(out, "{x} := ");
            term(e, out);
            out.push(';');
        }
        Program::Ode(ode) => {
            out.push('{');
            for (k, (x, e)) in ode.equations.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{x}' = ");
                term(e, out);
            }
            if ode.domain != Formula::True {
                out.push_str(" & ");
                formula(&ode.domain, out);
            }
            out.push('}');
        }
        Program::Seq(a, b) => {
            program(a, out);
            out.push(' ');
            program(b, out);
        }
        Program::Choice(a, b) => {
            out.push_str("{{");
            program(a, out);
            out.push_str("} ++ {");
            program(b, out);
            out.push_str("}}");
        }
        Program::Loop(a) => {
            out.push('{');
            program(a, out);
            out.push_str("}*");
        }
    }
}

/// The goal in KeYmaera X concrete syntax.
pub fn kyx_formula(f: &Formula) -> String {
    let mut out = String::new();
    formula(f, &mut out);
    out
}

pub fn kyx_program(p: &Program) -> String {
    let mut out = String::new();
    program(p, &mut out);
    out
}

/// One archive entry.
pub fn entry(o: &ProofObligation) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ArchiveEntry \"{}\"", o.id);
    let notes = o
        .provenance
        .notes
        .join("; ")
        .replace('δ', "delta")
        .replace('Δ', "Delta")
        .replace('≤', "<=");
    let _ = writeln!(out, "  /* {:?}: {notes} */", o.hint);
    out.push_str("  ProgramVariables\n");
    for x in o.goal.all_vars() {
        let _ = writeln!(out, "    Real {x};");
    }
    out.push_str("  End.\n  Problem\n    ");
    out.push_str(&kyx_formula(&o.goal));
    out.push_str("\n  End.\nEnd.\n");
    out
}

/// All obligations as a single archive.
pub fn archive(obligations: &[ProofObligation]) -> String {
    obligations.iter().map(entry).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_formula, parse_program};

    #[test]
    fn programs() {
        let p = parse_program("x := 1; (?(x > 0) U {x' = -x & x >= 0}); (y := y + 1)*").unwrap();
        assert_eq!(
            kyx_program(&p),
            "x := 1; {{?(x > 0);} ++ {{x' = (-x) & x >= 0}}} {y := (y + 1);}*"
        );
    }

    #[test]
    fn formulas() {
        let f = parse_formula("a <= -0.5 -> !(b = 1 | c > 2) & [x := a] x < 0").unwrap();
        assert_eq!(
            kyx_formula(&f),
            "(a <= (-0.5)) -> ((!((b = 1) | (c > 2))) & ([x := a;](x < 0)))"
        );
    }
}
