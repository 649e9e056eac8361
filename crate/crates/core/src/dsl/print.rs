//! Pretty-printer producing text the parser reads back to the same tree.

use crate::ast::{format_rational, Formula, Program, Rational, Term};

use super::model::{Decl, ModelFile, ScenarioValue, SystemExpr};

fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Add(..) | Term::Sub(..) => 1,
        Term::Mul(..) | Term::Div(..) => 2,
        Term::Neg(_) => 3,
        Term::Var(_) => 4,
        Term::Const(r) if r.denom() != &1 && format_rational(r).contains('/') => 2,
        Term::Const(_) => 4,
    }
}

fn write_rational(r: &Rational, out: &mut String) {
    out.push_str(&format_rational(r));
}

fn write_term(t: &Term, out: &mut String) {
    match t {
        Term::Var(x) => out.push_str(x),
        Term::Const(r) => write_rational(r, out),
        Term::Add(a, b) => binary(a, " + ", b, 1, out),
        Term::Sub(a, b) => binary(a, " - ", b, 1, out),
        Term::Mul(a, b) => binary(a, " * ", b, 2, out),
        Term::Div(a, b) => binary(a, " / ", b, 2, out),
        Term::Neg(a) => {
            out.push('-');
            match a.as_ref() {
                Term::Var(_) | Term::Neg(_) => write_term(a, out),
                _ => {
                    out.push('(');
                    write_term(a, out);
                    out.push(')');
                }
            }
        }
    }
}

fn binary(a: &Term, op: &str, b: &Term, prec: u8, out: &mut String) {
    wrap_term(a, term_prec(a) < prec, out);
    out.push_str(op);
    wrap_term(b, term_prec(b) <= prec, out);
}

fn wrap_term(t: &Term, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
    }
    write_term(t, out);
    if parens {
        out.push(')');
    }
}

pub fn term(t: &Term) -> String {
    let mut out = String::new();
    write_term(t, &mut out);
    out
}

fn formula_prec(f: &Formula) -> u8 {
    match f {
        Formula::Implies(..) => 1,
        Formula::Or(..) => 2,
        Formula::And(..) => 3,
        Formula::Not(_) | Formula::Box(..) | Formula::Forall(..) | Formula::Exists(..) => 4,
        Formula::True | Formula::False | Formula::Cmp(..) => 5,
    }
}

fn wrap_formula(f: &Formula, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
    }
    write_formula(f, out);
    if parens {
        out.push(')');
    }
}

fn write_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Cmp(op, a, b) => {
            write_term(a, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_term(b, out);
        }
        Formula::Not(a) => {
            out.push('!');
            wrap_formula(a, formula_prec(a) < 4, out);
        }
        Formula::And(a, b) => connective(a, " & ", b, 3, out),
        Formula::Or(a, b) => connective(a, " | ", b, 2, out),
        Formula::Implies(a, b) => connective(a, " -> ", b, 1, out),
        Formula::Forall(x, a) | Formula::Exists(x, a) => {
            out.push_str(if matches!(f, Formula::Forall(..)) {
                "forall "
            } else {
                "exists "
            });
            out.push_str(x);
            out.push(' ');
            wrap_formula(a, true, out);
        }
        Formula::Box(p, a) => {
            out.push('[');
            write_program(p, out);
            out.push_str("] ");
            wrap_formula(a, formula_prec(a) < 4, out);
        }
    }
}

/// Right-associative connective: parenthesize a left operand of equal precedence.
fn connective(a: &Formula, op: &str, b: &Formula, prec: u8, out: &mut String) {
    wrap_formula(a, formula_prec(a) <= prec, out);
    out.push_str(op);
    wrap_formula(b, formula_prec(b) < prec, out);
}

pub fn formula(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(f, &mut out);
    out
}

fn write_program(p: &Program, out: &mut String) {
    match p {
        Program::Choice(..) => {
            out.push('(');
            let mut rest = p;
            let mut first = true;
            loop {
                if !first {
                    out.push_str(" U ");
                }
                first = false;
                match rest {
                    Program::Choice(a, b) => {
                        write_program(a, out);
                        rest = b;
                    }
                    last => {
                        write_program(last, out);
                        break;
                    }
                }
            }
            out.push(')');
        }
        Program::Seq(a, b) => {
            if matches!(a.as_ref(), Program::Seq(..)) {
                out.push('(');
                write_program(a, out);
                out.push(')');
            } else {
                write_program(a, out);
            }
            out.push_str("; ");
            write_program(b, out);
        }
        Program::Loop(a) => {
            if matches!(a.as_ref(), Program::Choice(..)) {
                write_program(a, out);
            } else {
                out.push('(');
                write_program(a, out);
                out.push(')');
            }
            out.push('*');
        }
        Program::Test(f) => {
            out.push_str("?(");
            write_formula(f, out);
            out.push(')');
        }
        Program::Assign(x, e) => {
            out.push_str(x);
            out.push_str(" := ");
            write_term(e, out);
        }
        Program::Ode(ode) => {
            out.push('{');
            for (i, (x, e)) in ode.equations.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(x);
                out.push_str("' = ");
                write_term(e, out);
            }
            if ode.domain != Formula::True {
                out.push_str(" & ");
                write_formula(&ode.domain, out);
            }
            out.push('}');
        }
    }
}

/// A program as a top-level statement, terminated by `;`.
pub fn program(p: &Program) -> String {
    let mut out = program_inline(p);
    out.push(';');
    out
}

/// A program without the trailing `;`.
pub fn program_inline(p: &Program) -> String {
    let mut out = String::new();
    write_program(p, &mut out);
    out
}

fn system_expr(e: &SystemExpr, out: &mut String) {
    match e {
        SystemExpr::Name(n) => out.push_str(n),
        SystemExpr::Par(a, b) => {
            system_expr(a, out);
            out.push_str(" || ");
            if matches!(b.as_ref(), SystemExpr::Par(..)) {
                out.push('(');
                system_expr(b, out);
                out.push(')');
            } else {
                system_expr(b, out);
            }
        }
        SystemExpr::Ccs(c, p) => {
            out.push_str("ccs(");
            system_expr(c, out);
            out.push_str(", ");
            system_expr(p, out);
            out.push(')');
        }
    }
}

pub fn decl(d: &Decl) -> String {
    match d {
        Decl::Env(f) => format!("env {{ {} }}", formula(f)),
        Decl::Controller {
            name,
            reactivity,
            timestamp,
            body,
        } => {
            let ts = timestamp
                .as_ref()
                .map(|t| format!(" timestamp {t}"))
                .unwrap_or_default();
            format!(
                "controller {name} reactivity {}{ts} {{\n  {}\n}}",
                format_rational(reactivity),
                program(body)
            )
        }
        Decl::Plant {
            name,
            controllability,
            equations,
            domain,
        } => {
            let eqs: Vec<String> = equations
                .iter()
                .map(|(x, e)| format!("{x}' = {}", term(e)))
                .collect();
            let dom = if *domain == Formula::True {
                String::new()
            } else {
                format!(" & {}", formula(domain))
            };
            format!(
                "plant {name} controllability {} {{ {}{dom} }}",
                format_rational(controllability),
                eqs.join(", ")
            )
        }
        Decl::Contract {
            name,
            assume,
            guarantee,
            init,
        } => format!(
            "contract {name}\n  assume {}\n  guarantee {}\n  init {}",
            formula(assume),
            formula(guarantee),
            formula(init)
        ),
        Decl::Invariant { name, formula: f } => format!("invariant {name} {{ {} }}", formula(f)),
        Decl::Resource { name, controllers } => {
            format!("resource {name} {{ {} }}", controllers.join(", "))
        }
        Decl::Scenario(entries) => {
            let parts: Vec<String> = entries
                .iter()
                .map(|(x, v)| match v {
                    ScenarioValue::Value(r) => format!("{x} = {}", format_rational(r)),
                    ScenarioValue::Interval(lo, hi) => format!(
                        "{x} in [{}, {}]",
                        format_rational(lo),
                        format_rational(hi)
                    ),
                    ScenarioValue::Copy(y) => format!("{x} = {y}"),
                })
                .collect();
            format!("scenario {{ {} }}", parts.join(", "))
        }
        Decl::System {
            name,
            expr,
            invariants,
        } => {
            let mut out = format!("system {name} = ");
            system_expr(expr, &mut out);
            if !invariants.is_empty() {
                out.push_str(" with ");
                out.push_str(&invariants.join(", "));
            }
            out
        }
    }
}

pub fn model(m: &ModelFile) -> String {
    let mut out = String::new();
    for (i, d) in m.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&decl(d));
        out.push('\n');
    }
    out
}
