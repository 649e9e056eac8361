//! Static semantics: free, bound and must-bound variables.
//!
//! Program rules:
//!
//! | program      | FV                          | BV           | MBV           |
//! |--------------|-----------------------------|--------------|---------------|
//! | `?φ`         | FV(φ)                       | ∅            | ∅             |
//! | `x := e`     | FV(e)                       | {x}          | {x}           |
//! | `{x'=e & H}` | {x} ∪ FV(e) ∪ FV(H)         | {x}          | {x}           |
//! | `a; b`       | FV(a) ∪ (FV(b) \ MBV(a))    | BV(a) ∪ BV(b)| MBV(a) ∪ MBV(b)|
//! | `a ∪ b`      | FV(a) ∪ FV(b)               | BV(a) ∪ BV(b)| MBV(a) ∩ MBV(b)|
//! | `a*`         | FV(a)                       | BV(a)        | ∅             |
//!
//! Evolution-domain variables count toward FV only.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::{Formula, Program, Term};

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarSet(BTreeSet<String>);

impl VarSet {
    pub fn new() -> VarSet {
        VarSet::default()
    }

    pub fn singleton(x: impl Into<String>) -> VarSet {
        let mut s = VarSet::new();
        s.insert(x);
        s
    }

    pub fn insert(&mut self, x: impl Into<String>) {
        self.0.insert(x.into());
    }

    pub fn contains(&self, x: &str) -> bool {
        self.0.contains(x)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn union(&self, other: &VarSet) -> VarSet {
        VarSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &VarSet) -> VarSet {
        VarSet(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &VarSet) -> VarSet {
        VarSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &VarSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn extend(&mut self, other: VarSet) {
        self.0.extend(other.0);
    }

    pub fn without(mut self, x: &str) -> VarSet {
        self.0.remove(x);
        self
    }
}

impl<S: Into<String>> FromIterator<S> for VarSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        VarSet(iter.into_iter().map(Into::into).collect())
    }
}

impl IntoIterator for VarSet {
    type Item = String;
    type IntoIter = std::collections::btree_set::IntoIter<String>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

pub trait StaticSemantics {
    fn free_vars(&self) -> VarSet;
    fn bound_vars(&self) -> VarSet;

    fn all_vars(&self) -> VarSet {
        self.free_vars().union(&self.bound_vars())
    }
}

impl StaticSemantics for Term {
    fn free_vars(&self) -> VarSet {
        let mut out = VarSet::new();
        self.for_each_var(&mut |x| out.insert(x));
        out
    }

    fn bound_vars(&self) -> VarSet {
        VarSet::new()
    }
}

impl StaticSemantics for Formula {
    fn free_vars(&self) -> VarSet {
        match self {
            Formula::True | Formula::False => VarSet::new(),
            Formula::Cmp(_, a, b) => a.free_vars().union(&b.free_vars()),
            Formula::Not(a) => a.free_vars(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.free_vars().union(&b.free_vars())
            }
            Formula::Forall(x, a) | Formula::Exists(x, a) => a.free_vars().without(x),
            Formula::Box(p, a) => p
                .free_vars()
                .union(&a.free_vars().difference(&must_bound_vars(p))),
        }
    }

    fn bound_vars(&self) -> VarSet {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) => VarSet::new(),
            Formula::Not(a) => a.bound_vars(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.bound_vars().union(&b.bound_vars())
            }
            Formula::Forall(x, a) | Formula::Exists(x, a) => {
                let mut s = a.bound_vars();
                s.insert(x.clone());
                s
            }
            Formula::Box(p, a) => p.bound_vars().union(&a.bound_vars()),
        }
    }
}

impl StaticSemantics for Program {
    fn free_vars(&self) -> VarSet {
        match self {
            Program::Test(f) => f.free_vars(),
            Program::Assign(_, e) => e.free_vars(),
            Program::Ode(ode) => {
                let mut s: VarSet = ode.variables().collect();
                for (_, e) in &ode.equations {
                    s.extend(e.free_vars());
                }
                s.extend(ode.domain.free_vars());
                s
            }
            Program::Seq(a, b) => a
                .free_vars()
                .union(&b.free_vars().difference(&must_bound_vars(a))),
            Program::Choice(a, b) => a.free_vars().union(&b.free_vars()),
            Program::Loop(a) => a.free_vars(),
        }
    }

    fn bound_vars(&self) -> VarSet {
        match self {
            Program::Test(_) => VarSet::new(),
            Program::Assign(x, _) => VarSet::singleton(x.clone()),
            Program::Ode(ode) => ode.variables().collect(),
            Program::Seq(a, b) | Program::Choice(a, b) => a.bound_vars().union(&b.bound_vars()),
            Program::Loop(a) => a.bound_vars(),
        }
    }
}

pub fn free_vars<T: StaticSemantics + ?Sized>(x: &T) -> VarSet {
    x.free_vars()
}

pub fn bound_vars<T: StaticSemantics + ?Sized>(x: &T) -> VarSet {
    x.bound_vars()
}

pub fn all_vars<T: StaticSemantics + ?Sized>(x: &T) -> VarSet {
    x.all_vars()
}

/// Variables written on every execution path.
pub fn must_bound_vars(p: &Program) -> VarSet {
    match p {
        Program::Test(_) | Program::Loop(_) => VarSet::new(),
        Program::Assign(x, _) => VarSet::singleton(x.clone()),
        Program::Ode(ode) => ode.variables().collect(),
        Program::Seq(a, b) => must_bound_vars(a).union(&must_bound_vars(b)),
        Program::Choice(a, b) => must_bound_vars(a).intersection(&must_bound_vars(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Formula, OdeSystem, Program, Term};

    fn set(xs: &[&str]) -> VarSet {
        xs.iter().copied().collect()
    }

    /// `(v := a ∪ v := 2); {x' = v & x <= 5}`
    fn textbook_example() -> Program {
        Program::seq(
            Program::choice(
                Program::assign("v", Term::var("a")),
                Program::assign("v", Term::int(2)),
            ),
            Program::Ode(
                OdeSystem::new(
                    vec![("x".into(), Term::var("v"))],
                    Formula::le(Term::var("x"), Term::int(5)),
                )
                .unwrap(),
            ),
        )
    }

    #[test]
    fn textbook_example_sets() {
        let p = textbook_example();
        assert_eq!(p.free_vars(), set(&["a", "x"]));
        assert_eq!(p.bound_vars(), set(&["v", "x"]));
        assert_eq!(p.all_vars(), set(&["a", "v", "x"]));
        let choice = match &p {
            Program::Seq(a, _) => a.as_ref().clone(),
            _ => unreachable!(),
        };
        assert_eq!(must_bound_vars(&choice), set(&["v"]));
    }

    #[test]
    fn trivial_test_binds_and_reads_nothing() {
        let p = Program::test(Formula::True);
        assert!(p.free_vars().is_empty());
        assert!(p.bound_vars().is_empty());
        assert!(p.all_vars().is_empty());
        let q = Program::test(Formula::ge(Term::var("x"), Term::int(0)));
        assert!(q.bound_vars().is_empty());
    }

    #[test]
    fn loop_binds_nothing_for_sure() {
        let p = Program::repeat(Program::assign("x", Term::int(1)));
        assert!(must_bound_vars(&p).is_empty());
        assert_eq!(p.bound_vars(), set(&["x"]));
    }

    #[test]
    fn must_bound_intersects_branches() {
        let p = Program::choice(
            Program::assign("v", Term::int(1)),
            Program::seq(
                Program::assign("v", Term::int(2)),
                Program::assign("w", Term::int(3)),
            ),
        );
        assert_eq!(must_bound_vars(&p), set(&["v"]));
        // w is only bound on one path, so a later read of w stays free.
        let read_w = Program::seq(p, Program::assign("z", Term::var("w")));
        assert_eq!(read_w.free_vars(), set(&["w"]));
    }

    #[test]
    fn box_and_quantifier_binding() {
        let f = Formula::boxed(
            Program::assign("x", Term::var("y")),
            Formula::ge(Term::var("x"), Term::var("z")),
        );
        assert_eq!(f.free_vars(), set(&["y", "z"]));
        assert_eq!(f.bound_vars(), set(&["x"]));
        let q = Formula::forall("x", Formula::ge(Term::var("x"), Term::var("y"))).unwrap();
        assert_eq!(q.free_vars(), set(&["y"]));
        assert_eq!(q.bound_vars(), set(&["x"]));
    }

    #[test]
    fn domain_variables_are_free_not_bound() {
        let p = Program::Ode(
            OdeSystem::new(
                vec![("x".into(), Term::int(1))],
                Formula::le(Term::var("h"), Term::int(3)),
            )
            .unwrap(),
        );
        assert_eq!(p.free_vars(), set(&["h", "x"]));
        assert_eq!(p.bound_vars(), set(&["x"]));
    }
}
