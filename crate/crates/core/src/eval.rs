//! Numeric evaluation of terms, formulas and hybrid programs over
//! floating-point states.
//!
//! Syntax trees are compiled against a [`Scope`] so that variables become
//! slot indices. Constants are converted from exact rationals once, at
//! compile time.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{rational_to_f64, CmpOp, Formula, OdeSystem, Program, Term};
use crate::semantics::{StaticSemantics, VarSet};

/// Absolute tolerance for `=` and `!=`.
pub const EQ_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("variable `{0}` is not in scope")]
    UnknownVariable(String),
    #[error("cannot evaluate `{0}` numerically")]
    Unsupported(String),
}

/// Variable table shared by the states of one system.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scope {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Scope {
    pub fn new(vars: impl IntoIterator<Item = String>) -> Scope {
        let mut scope = Scope::default();
        for v in vars {
            scope.add(v);
        }
        scope
    }

    pub fn add(&mut self, name: impl Into<String>) -> usize {
        let name = name.into();
        if let Some(&i) = self.index.get(&name) {
            return i;
        }
        self.names.push(name.clone());
        self.index.insert(name, self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn slot(&self, name: &str) -> Result<usize, EvalError> {
        self.get(name)
            .ok_or_else(|| EvalError::UnknownVariable(name.to_string()))
    }
}

/// A valuation of every variable in a scope.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    scope: Arc<Scope>,
    values: Vec<f64>,
}

impl State {
    /// All variables start at zero.
    pub fn zeros(scope: Arc<Scope>) -> State {
        let values = vec![0.0; scope.len()];
        State { scope, values }
    }

    pub fn scope(&self) -> &Arc<Scope> {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.scope.get(name).map(|i| self.values[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), EvalError> {
        let i = self.scope.slot(name)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn at(&self, slot: usize) -> f64 {
        self.values[slot]
    }

    pub fn set_at(&mut self, slot: usize, value: f64) {
        self.values[slot] = value;
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.scope
            .names()
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect()
    }
}

impl Serialize for State {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_map().serialize(s)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (name, v)) in self.scope.names().iter().zip(&self.values).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name} = {v}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone)]
pub enum CTerm {
    Var(usize),
    Const(f64),
    Add(Box<CTerm>, Box<CTerm>),
    Sub(Box<CTerm>, Box<CTerm>),
    Mul(Box<CTerm>, Box<CTerm>),
    /// The source text is kept for error messages.
    Div(Box<CTerm>, Box<CTerm>, Arc<str>),
    Neg(Box<CTerm>),
}

impl CTerm {
    pub fn compile(t: &Term, scope: &Scope) -> Result<CTerm, EvalError> {
        let bin = |a: &Term, b: &Term| -> Result<(Box<CTerm>, Box<CTerm>), EvalError> {
            Ok((
                Box::new(CTerm::compile(a, scope)?),
                Box::new(CTerm::compile(b, scope)?),
            ))
        };
        Ok(match t {
            Term::Var(x) => CTerm::Var(scope.slot(x)?),
            Term::Const(r) => CTerm::Const(rational_to_f64(r)),
            Term::Add(a, b) => {
                let (a, b) = bin(a, b)?;
                CTerm::Add(a, b)
            }
            Term::Sub(a, b) => {
                let (a, b) = bin(a, b)?;
                CTerm::Sub(a, b)
            }
            Term::Mul(a, b) => {
                let (a, b) = bin(a, b)?;
                CTerm::Mul(a, b)
            }
            Term::Div(a, b) => {
                let (ca, cb) = bin(a, b)?;
                CTerm::Div(ca, cb, t.to_string().into())
            }
            Term::Neg(a) => CTerm::Neg(Box::new(CTerm::compile(a, scope)?)),
        })
    }

    pub fn eval(&self, s: &State) -> Result<f64, EvalError> {
        Ok(match self {
            CTerm::Var(i) => s.values[*i],
            CTerm::Const(c) => *c,
            CTerm::Add(a, b) => a.eval(s)? + b.eval(s)?,
            CTerm::Sub(a, b) => a.eval(s)? - b.eval(s)?,
            CTerm::Mul(a, b) => a.eval(s)? * b.eval(s)?,
            CTerm::Div(a, b, text) => {
                let d = b.eval(s)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero(text.to_string()));
                }
                a.eval(s)? / d
            }
            CTerm::Neg(a) => -a.eval(s)?,
        })
    }
}

fn compare(op: CmpOp, a: f64, b: f64) -> bool {
    match op {
        CmpOp::Le => a <= b,
        CmpOp::Lt => a < b,
        CmpOp::Ge => a >= b,
        CmpOp::Gt => a > b,
        CmpOp::Eq => (a - b).abs() <= EQ_TOLERANCE,
        CmpOp::Ne => (a - b).abs() > EQ_TOLERANCE,
    }
}

#[derive(Debug, Clone)]
pub enum CFormula {
    True,
    False,
    Cmp(CmpOp, CTerm, CTerm),
    Not(Box<CFormula>),
    And(Box<CFormula>, Box<CFormula>),
    Or(Box<CFormula>, Box<CFormula>),
    Implies(Box<CFormula>, Box<CFormula>),
    Box(Box<CProgram>, Box<CFormula>),
    /// Quantifiers over the reals are kept only to report them.
    Quantified(Arc<str>),
}

impl CFormula {
    pub fn compile(f: &Formula, scope: &Scope) -> Result<CFormula, EvalError> {
        let bx = |f: &Formula| CFormula::compile(f, scope).map(Box::new);
        Ok(match f {
            Formula::True => CFormula::True,
            Formula::False => CFormula::False,
            Formula::Cmp(op, a, b) => {
                CFormula::Cmp(*op, CTerm::compile(a, scope)?, CTerm::compile(b, scope)?)
            }
            Formula::Not(a) => CFormula::Not(bx(a)?),
            Formula::And(a, b) => CFormula::And(bx(a)?, bx(b)?),
            Formula::Or(a, b) => CFormula::Or(bx(a)?, bx(b)?),
            Formula::Implies(a, b) => CFormula::Implies(bx(a)?, bx(b)?),
            Formula::Box(p, a) => CFormula::Box(Box::new(CProgram::compile(p, scope)?), bx(a)?),
            Formula::Forall(..) | Formula::Exists(..) => {
                CFormula::Quantified(f.to_string().into())
            }
        })
    }

    /// Truth value of a modality-free formula.
    pub fn eval(&self, s: &State) -> Result<bool, EvalError> {
        Ok(match self {
            CFormula::True => true,
            CFormula::False => false,
            CFormula::Cmp(op, a, b) => compare(*op, a.eval(s)?, b.eval(s)?),
            CFormula::Not(a) => !a.eval(s)?,
            CFormula::And(a, b) => a.eval(s)? && b.eval(s)?,
            CFormula::Or(a, b) => a.eval(s)? || b.eval(s)?,
            CFormula::Implies(a, b) => !a.eval(s)? || b.eval(s)?,
            CFormula::Box(..) => return Err(EvalError::Unsupported("box modality".into())),
            CFormula::Quantified(text) => return Err(EvalError::Unsupported(text.to_string())),
        })
    }
}

/// Evaluate a modality-free formula at a named valuation.
pub fn eval_formula(f: &Formula, values: &BTreeMap<String, f64>) -> Result<bool, EvalError> {
    let scope = Scope::new(values.keys().cloned());
    let mut vars = f.free_vars();
    vars.extend(f.bound_vars());
    if let Some(x) = vars.iter().find(|x| scope.get(x).is_none()) {
        return Err(EvalError::UnknownVariable(x.to_string()));
    }
    let scope = Arc::new(scope);
    let mut s = State::zeros(scope.clone());
    for (k, v) in values {
        s.set(k, *v)?;
    }
    CFormula::compile(f, &scope)?.eval(&s)
}

/// Compiled ODE with evolution domain.
#[derive(Debug, Clone)]
pub struct COde {
    pub vars: Vec<usize>,
    pub rhs: Vec<CTerm>,
    pub domain: CFormula,
    /// Right-hand sides do not depend on the evolving variables, so the
    /// solution is affine in time.
    pub constant_slope: bool,
}

impl COde {
    pub fn compile(ode: &OdeSystem, scope: &Scope) -> Result<COde, EvalError> {
        let evolving: VarSet = ode.variables().collect();
        let mut vars = Vec::new();
        let mut rhs = Vec::new();
        let mut constant_slope = true;
        for (x, e) in &ode.equations {
            vars.push(scope.slot(x)?);
            rhs.push(CTerm::compile(e, scope)?);
            if !e.free_vars().intersection(&evolving).is_empty() {
                constant_slope = false;
            }
        }
        Ok(COde {
            vars,
            rhs,
            domain: CFormula::compile(&ode.domain, scope)?,
            constant_slope,
        })
    }

    fn derivative(&self, s: &State) -> Result<Vec<f64>, EvalError> {
        self.rhs.iter().map(|e| e.eval(s)).collect()
    }

    /// State after flowing for `d` time units, ignoring the domain.
    /// Constant-slope systems are solved in closed form, others with RK4 at
    /// step at most `h`.
    pub fn advance(&self, s: &State, d: f64, h: f64) -> Result<State, EvalError> {
        let mut out = s.clone();
        if d <= 0.0 {
            return Ok(out);
        }
        if self.constant_slope {
            let slope = self.derivative(s)?;
            for (&i, k) in self.vars.iter().zip(slope) {
                out.values[i] = s.values[i] + k * d;
            }
            return Ok(out);
        }
        let steps = (d / h).ceil().max(1.0) as usize;
        let dt = d / steps as f64;
        for _ in 0..steps {
            out = self.rk4_step(&out, dt)?;
        }
        Ok(out)
    }

    fn rk4_step(&self, s: &State, dt: f64) -> Result<State, EvalError> {
        let shifted = |k: &[f64], scale: f64| {
            let mut t = s.clone();
            for (&i, ki) in self.vars.iter().zip(k) {
                t.values[i] += scale * ki;
            }
            t
        };
        let k1 = self.derivative(s)?;
        let k2 = self.derivative(&shifted(&k1, dt / 2.0))?;
        let k3 = self.derivative(&shifted(&k2, dt / 2.0))?;
        let k4 = self.derivative(&shifted(&k3, dt))?;
        let mut out = s.clone();
        for (j, &i) in self.vars.iter().enumerate() {
            out.values[i] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        Ok(out)
    }

    /// Longest duration `d <= cap` such that the domain holds at every scan
    /// point up to `d`, with the exit located by bisection to `tol`.
    /// `None` when the domain is false initially.
    pub fn max_duration(&self, s: &State, cap: f64, h: f64, tol: f64) -> Result<Option<f64>, EvalError> {
        if !self.domain.eval(s)? {
            return Ok(None);
        }
        if cap <= 0.0 {
            return Ok(Some(0.0));
        }
        let steps = (cap / h).ceil().max(1.0) as usize;
        let mut good = 0.0;
        let mut cur = s.clone();
        for k in 1..=steps {
            let d = if k == steps { cap } else { k as f64 * h };
            let next = if self.constant_slope {
                self.advance(s, d, h)?
            } else {
                self.advance(&cur, d - good, h)?
            };
            if !self.domain.eval(&next)? {
                return self.bisect(s, good, d, h, tol).map(Some);
            }
            good = d;
            cur = next;
        }
        Ok(Some(cap))
    }

    fn bisect(&self, s: &State, mut lo: f64, mut hi: f64, h: f64, tol: f64) -> Result<f64, EvalError> {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.domain.eval(&self.advance(s, mid, h)?)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

#[derive(Debug, Clone)]
pub enum CProgram {
    Test(CFormula),
    Assign(usize, CTerm),
    Ode(COde),
    Seq(Vec<CProgram>),
    Choice(Vec<CProgram>),
    Loop(Box<CProgram>),
}

impl CProgram {
    pub fn compile(p: &Program, scope: &Scope) -> Result<CProgram, EvalError> {
        Ok(match p {
            Program::Test(f) => CProgram::Test(CFormula::compile(f, scope)?),
            Program::Assign(x, e) => CProgram::Assign(scope.slot(x)?, CTerm::compile(e, scope)?),
            Program::Ode(ode) => CProgram::Ode(COde::compile(ode, scope)?),
            Program::Seq(..) => CProgram::Seq(
                p.seq_operands()
                    .into_iter()
                    .map(|q| CProgram::compile(q, scope))
                    .collect::<Result<_, _>>()?,
            ),
            Program::Choice(..) => CProgram::Choice(
                p.choice_operands()
                    .into_iter()
                    .map(|q| CProgram::compile(q, scope))
                    .collect::<Result<_, _>>()?,
            ),
            Program::Loop(a) => CProgram::Loop(Box::new(CProgram::compile(a, scope)?)),
        })
    }
}

/// Settings for exhaustive execution of programs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploration {
    /// Loops run between 0 and `unroll` iterations.
    pub unroll: usize,
    /// Sampled durations per ODE, in addition to duration zero.
    pub ode_samples: usize,
    /// Upper bound on any single ODE duration.
    pub max_duration: f64,
    pub step: f64,
}

impl Default for Exploration {
    fn default() -> Self {
        Exploration {
            unroll: 2,
            ode_samples: 8,
            max_duration: 10.0,
            step: 1e-3,
        }
    }
}

/// Every final state reachable by the program (up to the sampling in `cfg`).
pub fn reachable(p: &CProgram, s: &State, cfg: &Exploration) -> Result<Vec<State>, EvalError> {
    match p {
        CProgram::Test(f) => Ok(if f.eval(s)? { vec![s.clone()] } else { vec![] }),
        CProgram::Assign(i, e) => {
            let mut out = s.clone();
            out.values[*i] = e.eval(s)?;
            Ok(vec![out])
        }
        CProgram::Ode(ode) => {
            let Some(d) = ode.max_duration(s, cfg.max_duration, cfg.step, 1e-9)? else {
                return Ok(vec![]);
            };
            let n = cfg.ode_samples.max(1);
            let mut out = vec![s.clone()];
            if d > 0.0 {
                for k in 1..=n {
                    out.push(ode.advance(s, d * k as f64 / n as f64, cfg.step)?);
                }
            }
            Ok(out)
        }
        CProgram::Seq(parts) => {
            let mut frontier = vec![s.clone()];
            for q in parts {
                let mut next = Vec::new();
                for st in &frontier {
                    next.extend(reachable(q, st, cfg)?);
                }
                frontier = next;
            }
            Ok(frontier)
        }
        CProgram::Choice(parts) => {
            let mut out = Vec::new();
            for q in parts {
                out.extend(reachable(q, s, cfg)?);
            }
            Ok(out)
        }
        CProgram::Loop(body) => {
            let mut out = vec![s.clone()];
            let mut frontier = vec![s.clone()];
            for _ in 0..cfg.unroll {
                let mut next = Vec::new();
                for st in &frontier {
                    next.extend(reachable(body, st, cfg)?);
                }
                out.extend(next.iter().cloned());
                frontier = next;
            }
            Ok(out)
        }
    }
}

/// Outcome of evaluating a formula with modalities: `Ok(None)` when it holds,
/// `Ok(Some(w))` with a witness state when it fails. The witness is the
/// state at which the innermost failing postcondition was evaluated.
pub fn refute(f: &CFormula, s: &State, cfg: &Exploration) -> Result<Option<State>, EvalError> {
    match f {
        CFormula::Box(p, post) => {
            for st in reachable(p, s, cfg)? {
                if let Some(w) = refute(post, &st, cfg)? {
                    return Ok(Some(w));
                }
            }
            Ok(None)
        }
        CFormula::Implies(a, b) => {
            if refute(a, s, cfg)?.is_some() {
                Ok(None)
            } else {
                refute(b, s, cfg)
            }
        }
        CFormula::And(a, b) => match refute(a, s, cfg)? {
            Some(w) => Ok(Some(w)),
            None => refute(b, s, cfg),
        },
        CFormula::Or(a, b) => {
            if refute(a, s, cfg)?.is_none() {
                return Ok(None);
            }
            refute(b, s, cfg)
        }
        CFormula::Not(a) => Ok(if refute(a, s, cfg)?.is_none() {
            Some(s.clone())
        } else {
            None
        }),
        CFormula::Quantified(text) => Err(EvalError::Unsupported(text.to_string())),
        atom => Ok(if atom.eval(s)? { None } else { Some(s.clone()) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_formula, parse_program};

    fn state(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn formulas() {
        let f = parse_formula("3 <= wl & wl <= 7").unwrap();
        assert!(eval_formula(&f, &state(&[("wl", 5.0)])).unwrap());
        let f = parse_formula("wlm <= 3.5 -> fin = 1").unwrap();
        assert!(eval_formula(&f, &state(&[("wlm", 3.5), ("fin", 1.0)])).unwrap());
        assert!(!eval_formula(&f, &state(&[("wlm", 3.5), ("fin", 0.0)])).unwrap());
    }

    #[test]
    fn division_by_zero_names_the_subterm() {
        let f = parse_formula("x / y > 0").unwrap();
        let err = eval_formula(&f, &state(&[("x", 1.0), ("y", 0.0)])).unwrap_err();
        assert_eq!(err, EvalError::DivisionByZero("x / y".into()));
    }

    #[test]
    fn equality_tolerance() {
        let f = parse_formula("x = 0.3").unwrap();
        assert!(eval_formula(&f, &state(&[("x", 0.1 + 0.2)])).unwrap());
        let f = parse_formula("x != 0.3").unwrap();
        assert!(!eval_formula(&f, &state(&[("x", 0.1 + 0.2)])).unwrap());
    }

    fn scope_of(p: &Program) -> Arc<Scope> {
        Arc::new(Scope::new(p.all_vars()))
    }

    #[test]
    fn closed_form_and_rk4_agree_on_linear_flow() {
        let p = parse_program("{x' = v, v' = -1 & true}").unwrap();
        let scope = scope_of(&p);
        let CProgram::Ode(ode) = CProgram::compile(&p, &scope).unwrap() else {
            unreachable!()
        };
        assert!(!ode.constant_slope);
        let mut s = State::zeros(scope.clone());
        s.set("v", 2.0).unwrap();
        let end = ode.advance(&s, 1.5, 1e-3).unwrap();
        assert!((end.get("x").unwrap() - (2.0 * 1.5 - 0.5 * 1.5 * 1.5)).abs() < 1e-9);
        assert!((end.get("v").unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn domain_exit_is_located() {
        let p = parse_program("{x' = 1 & x <= 0.3}").unwrap();
        let scope = scope_of(&p);
        let CProgram::Ode(ode) = CProgram::compile(&p, &scope).unwrap() else {
            unreachable!()
        };
        let s = State::zeros(scope);
        let d = ode.max_duration(&s, 10.0, 0.01, 1e-9).unwrap().unwrap();
        assert!((d - 0.3).abs() <= 1e-9);
    }

    #[test]
    fn reachable_enumerates_branches() {
        let p = parse_program("(x := 1 U x := 2 U ?(false); x := 3); y := x").unwrap();
        let scope = scope_of(&p);
        let c = CProgram::compile(&p, &scope).unwrap();
        let out = reachable(&c, &State::zeros(scope), &Exploration::default()).unwrap();
        let ys: Vec<f64> = out.iter().map(|s| s.get("y").unwrap()).collect();
        assert_eq!(ys, vec![1.0, 2.0]);
    }

    #[test]
    fn refute_finds_post_state() {
        let f = parse_formula("x >= 0 -> [{x' = 1 & x <= 2}] x <= 1").unwrap();
        let scope = Arc::new(Scope::new(f.all_vars()));
        let c = CFormula::compile(&f, &scope).unwrap();
        let w = refute(&c, &State::zeros(scope), &Exploration::default())
            .unwrap()
            .unwrap();
        assert!(w.get("x").unwrap() > 1.0);
    }
}
