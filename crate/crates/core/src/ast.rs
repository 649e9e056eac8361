//! Terms, formulas and hybrid programs of differential dynamic logic.
//!
//! All trees are immutable after construction. `Ord` is derived so the
//! canonical order used by [`normalize_ac`] is lexicographic on the node kind
//! first, then on children and identifiers.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational constant.
pub type Rational = Ratio<i64>;

/// Name of the global clock introduced by every plant.
pub const CLOCK: &str = "t";
/// Prefix reserved for controller timestamps.
pub const TIMESTAMP_PREFIX: &str = "tau_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AstError {
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("quantifier may not bind reserved name `{0}`")]
    ReservedBinder(String),
    #[error("ODE declares `{0}` more than once")]
    DuplicateOdeVariable(String),
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `t` or `tau_<k>` for some natural `k`.
pub fn is_reserved(name: &str) -> bool {
    name == CLOCK || is_timestamp(name)
}

pub fn is_timestamp(name: &str) -> bool {
    name.strip_prefix(TIMESTAMP_PREFIX)
        .is_some_and(|k| !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Rational),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Div(Box<Term>, Box<Term>),
    Neg(Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn int(n: i64) -> Term {
        Term::Const(Rational::from_integer(n))
    }

    pub fn constant(r: Rational) -> Term {
        Term::Const(r)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Term, b: Term) -> Term {
        Term::Sub(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Term, b: Term) -> Term {
        Term::Mul(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Term, b: Term) -> Term {
        Term::Div(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Term) -> Term {
        Term::Neg(Box::new(a))
    }

    /// Visit every variable occurrence.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Term::Var(x) => f(x),
            Term::Const(_) => {}
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Term::Neg(a) => a.for_each_var(f),
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        let mut hit = false;
        self.for_each_var(&mut |x| hit |= x == name);
        hit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Le,
    Lt,
    Eq,
    Ne,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Formula {
    #[default]
    True,
    False,
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
    Box(Box<Program>, Box<Formula>),
}

impl Formula {
    pub fn cmp(op: CmpOp, a: Term, b: Term) -> Formula {
        Formula::Cmp(op, a, b)
    }

    pub fn le(a: Term, b: Term) -> Formula {
        Formula::Cmp(CmpOp::Le, a, b)
    }

    pub fn ge(a: Term, b: Term) -> Formula {
        Formula::Cmp(CmpOp::Ge, a, b)
    }

    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Cmp(CmpOp::Eq, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn boxed(p: Program, post: Formula) -> Formula {
        Formula::Box(Box::new(p), Box::new(post))
    }

    pub fn forall(var: impl Into<String>, body: Formula) -> Result<Formula, AstError> {
        let var = checked_binder(var.into())?;
        Ok(Formula::Forall(var, Box::new(body)))
    }

    pub fn exists(var: impl Into<String>, body: Formula) -> Result<Formula, AstError> {
        let var = checked_binder(var.into())?;
        Ok(Formula::Exists(var, Box::new(body)))
    }

    /// Right-nested conjunction; `True` for an empty list.
    pub fn conj(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return Formula::True;
        };
        while let Some(p) = parts.pop() {
            acc = Formula::and(p, acc);
        }
        acc
    }

    /// Like [`Formula::conj`] but drops `True` operands.
    pub fn conj_nontrivial(parts: impl IntoIterator<Item = Formula>) -> Formula {
        Formula::conj(parts.into_iter().filter(|f| *f != Formula::True))
    }

    /// Flatten a conjunction chain into its operands.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn has_modality(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) => false,
            Formula::Not(a) | Formula::Forall(_, a) | Formula::Exists(_, a) => a.has_modality(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.has_modality() || b.has_modality()
            }
            Formula::Box(..) => true,
        }
    }

    /// Syntactic occurrence of `name` anywhere, including binders and programs.
    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Formula::True | Formula::False => false,
            Formula::Cmp(_, a, b) => a.mentions(name) || b.mentions(name),
            Formula::Not(a) => a.mentions(name),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.mentions(name) || b.mentions(name)
            }
            Formula::Forall(x, a) | Formula::Exists(x, a) => x == name || a.mentions(name),
            Formula::Box(p, a) => p.mentions(name) || a.mentions(name),
        }
    }
}

fn checked_binder(var: String) -> Result<String, AstError> {
    if !is_identifier(&var) {
        return Err(AstError::InvalidIdentifier(var));
    }
    if is_reserved(&var) {
        return Err(AstError::ReservedBinder(var));
    }
    Ok(var)
}

/// `{x1' = e1, ..., xn' = en & domain}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OdeSystem {
    pub equations: Vec<(String, Term)>,
    pub domain: Formula,
}

impl OdeSystem {
    pub fn new(equations: Vec<(String, Term)>, domain: Formula) -> Result<OdeSystem, AstError> {
        let mut seen = std::collections::BTreeSet::new();
        for (x, _) in &equations {
            if !is_identifier(x) {
                return Err(AstError::InvalidIdentifier(x.clone()));
            }
            if !seen.insert(x.as_str()) {
                return Err(AstError::DuplicateOdeVariable(x.clone()));
            }
        }
        Ok(OdeSystem { equations, domain })
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.equations.iter().map(|(x, _)| x.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Program {
    Test(Formula),
    Assign(String, Term),
    Ode(OdeSystem),
    Seq(Box<Program>, Box<Program>),
    Choice(Box<Program>, Box<Program>),
    Loop(Box<Program>),
}

impl Program {
    pub fn test(f: Formula) -> Program {
        Program::Test(f)
    }

    pub fn assign(x: impl Into<String>, rhs: Term) -> Program {
        Program::Assign(x.into(), rhs)
    }

    pub fn seq(a: Program, b: Program) -> Program {
        Program::Seq(Box::new(a), Box::new(b))
    }

    pub fn choice(a: Program, b: Program) -> Program {
        Program::Choice(Box::new(a), Box::new(b))
    }

    pub fn repeat(a: Program) -> Program {
        Program::Loop(Box::new(a))
    }

    /// Right-nested sequence. Panics on an empty list.
    pub fn seq_all(parts: impl IntoIterator<Item = Program>) -> Program {
        fold_right(parts.into_iter().collect(), Program::seq).expect("empty sequence")
    }

    /// Right-nested choice. Panics on an empty list.
    pub fn choice_all(parts: impl IntoIterator<Item = Program>) -> Program {
        fold_right(parts.into_iter().collect(), Program::choice).expect("empty choice")
    }

    /// Operands of a (possibly nested) choice chain, left to right.
    pub fn choice_operands(&self) -> Vec<&Program> {
        let mut out = Vec::new();
        fn walk<'a>(p: &'a Program, out: &mut Vec<&'a Program>) {
            match p {
                Program::Choice(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Operands of a (possibly nested) sequence, left to right.
    pub fn seq_operands(&self) -> Vec<&Program> {
        let mut out = Vec::new();
        collect_seq(self, &mut out);
        out
    }

    pub fn is_discrete(&self) -> bool {
        match self {
            Program::Ode(_) => false,
            Program::Test(_) | Program::Assign(..) => true,
            Program::Seq(a, b) | Program::Choice(a, b) => a.is_discrete() && b.is_discrete(),
            Program::Loop(a) => a.is_discrete(),
        }
    }

    pub fn is_loop_free(&self) -> bool {
        match self {
            Program::Loop(_) => false,
            Program::Test(_) | Program::Assign(..) | Program::Ode(_) => true,
            Program::Seq(a, b) | Program::Choice(a, b) => a.is_loop_free() && b.is_loop_free(),
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Program::Test(f) => f.mentions(name),
            Program::Assign(x, e) => x == name || e.mentions(name),
            Program::Ode(ode) => {
                ode.equations
                    .iter()
                    .any(|(x, e)| x == name || e.mentions(name))
                    || ode.domain.mentions(name)
            }
            Program::Seq(a, b) | Program::Choice(a, b) => a.mentions(name) || b.mentions(name),
            Program::Loop(a) => a.mentions(name),
        }
    }

    /// Atomic statements (tests, assignments, single ODE equations) with
    /// multiplicity, in canonical order.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        fn walk(p: &Program, out: &mut Vec<Atom>) {
            match p {
                Program::Test(f) => out.push(Atom::Test(f.clone())),
                Program::Assign(x, e) => out.push(Atom::Assign(x.clone(), e.clone())),
                Program::Ode(ode) => {
                    for (x, e) in &ode.equations {
                        out.push(Atom::Equation(x.clone(), e.clone()));
                    }
                }
                Program::Seq(a, b) | Program::Choice(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Program::Loop(a) => walk(a, out),
            }
        }
        walk(self, &mut out);
        out.sort();
        out
    }
}

/// Atomic statement used to compare programs up to reordering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Atom {
    Test(Formula),
    Assign(String, Term),
    Equation(String, Term),
}

fn fold_right<T>(mut parts: Vec<T>, join: impl Fn(T, T) -> T) -> Option<T> {
    let mut acc = parts.pop()?;
    while let Some(p) = parts.pop() {
        acc = join(p, acc);
    }
    Some(acc)
}

/// Node-for-node identity; no normalization.
pub fn structurally_equal(a: &Program, b: &Program) -> bool {
    a == b
}

/// Canonical form modulo associativity and commutativity of `∪`, `∧`, `∨`
/// and of the `,` separating ODE equations. Sequences are re-associated to
/// the right but never reordered.
pub fn normalize_ac(p: &Program) -> Program {
    match p {
        Program::Test(f) => Program::Test(normalize_formula(f)),
        Program::Assign(..) => p.clone(),
        Program::Ode(ode) => {
            let mut equations = ode.equations.clone();
            equations.sort();
            Program::Ode(OdeSystem {
                equations,
                domain: normalize_formula(&ode.domain),
            })
        }
        Program::Seq(..) => {
            let mut parts = Vec::new();
            collect_seq(p, &mut parts);
            Program::seq_all(parts.into_iter().map(normalize_ac))
        }
        Program::Choice(..) => {
            let mut parts: Vec<Program> =
                p.choice_operands().into_iter().map(normalize_ac).collect();
            parts.sort();
            Program::choice_all(parts)
        }
        Program::Loop(a) => Program::repeat(normalize_ac(a)),
    }
}

fn collect_seq<'a>(p: &'a Program, out: &mut Vec<&'a Program>) {
    match p {
        Program::Seq(a, b) => {
            collect_seq(a, out);
            collect_seq(b, out);
        }
        other => out.push(other),
    }
}

pub fn normalize_formula(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False | Formula::Cmp(..) => f.clone(),
        Formula::Not(a) => Formula::not(normalize_formula(a)),
        Formula::And(..) => {
            let mut parts: Vec<Formula> = Vec::new();
            collect_assoc(f, &mut parts, |g| match g {
                Formula::And(a, b) => Some((a, b)),
                _ => None,
            });
            rebuild_sorted(parts, Formula::and)
        }
        Formula::Or(..) => {
            let mut parts: Vec<Formula> = Vec::new();
            collect_assoc(f, &mut parts, |g| match g {
                Formula::Or(a, b) => Some((a, b)),
                _ => None,
            });
            rebuild_sorted(parts, Formula::or)
        }
        Formula::Implies(a, b) => Formula::implies(normalize_formula(a), normalize_formula(b)),
        Formula::Forall(x, a) => Formula::Forall(x.clone(), Box::new(normalize_formula(a))),
        Formula::Exists(x, a) => Formula::Exists(x.clone(), Box::new(normalize_formula(a))),
        Formula::Box(p, a) => Formula::boxed(normalize_ac(p), normalize_formula(a)),
    }
}

type Split<'a> = Option<(&'a Box<Formula>, &'a Box<Formula>)>;

fn collect_assoc<'a>(f: &'a Formula, out: &mut Vec<Formula>, split: fn(&'a Formula) -> Split<'a>) {
    match split(f) {
        Some((a, b)) => {
            collect_assoc(a, out, split);
            collect_assoc(b, out, split);
        }
        None => out.push(normalize_formula(f)),
    }
}

fn rebuild_sorted(mut parts: Vec<Formula>, join: fn(Formula, Formula) -> Formula) -> Formula {
    parts.sort();
    fold_right(parts, join).expect("non-empty chain")
}

/// Decimal rendering when the denominator divides a power of ten, `p/q` otherwise.
pub fn format_rational(r: &Rational) -> String {
    match decimal_digits(r) {
        Some(s) => s,
        None => format!("{}/{}", r.numer(), r.denom()),
    }
}

fn decimal_digits(r: &Rational) -> Option<String> {
    let mut den = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return None;
    }
    let places = twos.max(fives);
    let scale = 10i128.checked_pow(places)?;
    let scaled = (*r.numer() as i128) * (scale / *r.denom() as i128);
    let neg = scaled < 0;
    let digits = scaled.unsigned_abs().to_string();
    let body = if places == 0 {
        digits
    } else {
        let places = places as usize;
        let padded = format!("{digits:0>width$}", width = places + 1);
        let (int, frac) = padded.split_at(padded.len() - places);
        format!("{int}.{frac}")
    };
    Some(if neg { format!("-{body}") } else { body })
}

/// Parse `123`, `0.05`, `-1.5` exactly. Returns `None` on malformed input or overflow.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (neg, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.contains('.') && (frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit())) {
        return None;
    }
    let mut numer: i64 = 0;
    for b in int.bytes().chain(frac.bytes()) {
        numer = numer.checked_mul(10)?.checked_add((b - b'0') as i64)?;
    }
    let denom = 10i64.checked_pow(frac.len() as u32)?;
    let g = numer.gcd(&denom);
    let r = Rational::new_raw(numer / g.max(1), denom / g.max(1));
    Some(if neg { -r } else { r })
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

pub fn is_positive(r: &Rational) -> bool {
    r.is_positive() && !r.is_zero()
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::dsl::print::term(self))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::dsl::print::formula(self))
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::dsl::print::program(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_is(n: i64) -> Program {
        Program::assign("x", Term::int(n))
    }

    #[test]
    fn identical_assignments_are_equal() {
        assert!(structurally_equal(&x_is(1), &x_is(1)));
    }

    #[test]
    fn choice_is_not_commutative_structurally() {
        let a = Program::choice(x_is(1), x_is(2));
        let b = Program::choice(x_is(2), x_is(1));
        assert!(!structurally_equal(&a, &b));
        assert_eq!(normalize_ac(&a), normalize_ac(&b));
    }

    #[test]
    fn ode_equations_and_domain_are_normalized() {
        let h = Formula::ge(Term::var("x"), Term::int(0));
        let q = Formula::le(Term::var("y"), Term::int(5));
        let a = Program::Ode(
            OdeSystem::new(
                vec![("x".into(), Term::var("u")), ("y".into(), Term::var("w"))],
                Formula::and(h.clone(), q.clone()),
            )
            .unwrap(),
        );
        let b = Program::Ode(
            OdeSystem::new(
                vec![("y".into(), Term::var("w")), ("x".into(), Term::var("u"))],
                Formula::and(q, h),
            )
            .unwrap(),
        );
        assert_ne!(a, b);
        assert_eq!(normalize_ac(&a), normalize_ac(&b));
    }

    #[test]
    fn duplicate_ode_variable_rejected() {
        let err = OdeSystem::new(
            vec![("x".into(), Term::int(1)), ("x".into(), Term::int(2))],
            Formula::True,
        )
        .unwrap_err();
        assert_eq!(err, AstError::DuplicateOdeVariable("x".into()));
    }

    #[test]
    fn quantifier_cannot_capture_clock() {
        assert!(Formula::forall("t", Formula::True).is_err());
        assert!(Formula::exists("tau_3", Formula::True).is_err());
        assert!(Formula::forall("tau", Formula::True).is_ok());
    }

    #[test]
    fn decimals_are_exact() {
        let a = parse_decimal("0.05").unwrap();
        let b = parse_decimal("0.02").unwrap();
        assert_eq!(a, Rational::new(1, 20));
        assert_eq!(a + b, Rational::new(7, 100));
        assert_eq!(format_rational(&(a + b)), "0.07");
        assert_eq!(format_rational(&Rational::from_integer(7)), "7");
        assert_eq!(format_rational(&Rational::new(-3, 2)), "-1.5");
        assert_eq!(format_rational(&Rational::new(1, 3)), "1/3");
        assert_eq!(parse_decimal("6.50"), Some(Rational::new(13, 2)));
        assert_eq!(parse_decimal("1."), None);
        assert_eq!(parse_decimal("99999999999999999999"), None);
    }

    #[test]
    fn reserved_names() {
        assert!(is_reserved("t"));
        assert!(is_reserved("tau_12"));
        assert!(!is_reserved("tau_"));
        assert!(!is_reserved("tau_x"));
        assert!(!is_reserved("tx"));
    }
}
