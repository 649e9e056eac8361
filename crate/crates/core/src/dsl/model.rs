//! Surface-level model files: declarations as written, before elaboration.

use crate::ast::{Formula, Program, Rational, Term};

use super::lexer::Pos;

/// A node with its source position. Equality ignores the position.
#[derive(Debug, Clone)]
pub struct Located<T> {
    pub node: T,
    pub pos: Pos,
}

impl<T: PartialEq> PartialEq for Located<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl<T: Eq> Eq for Located<T> {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemExpr {
    Name(String),
    /// `a || b`
    Par(Box<SystemExpr>, Box<SystemExpr>),
    /// `ccs(ctrl, plant)`
    Ccs(Box<SystemExpr>, Box<SystemExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioValue {
    Value(Rational),
    Interval(Rational, Rational),
    /// Start equal to another variable.
    Copy(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    Env(Formula),
    Controller {
        name: String,
        reactivity: Rational,
        timestamp: Option<String>,
        body: Program,
    },
    Plant {
        name: String,
        controllability: Rational,
        equations: Vec<(String, Term)>,
        domain: Formula,
    },
    Contract {
        name: String,
        assume: Formula,
        guarantee: Formula,
        init: Formula,
    },
    Invariant {
        name: String,
        formula: Formula,
    },
    Resource {
        name: String,
        controllers: Vec<String>,
    },
    Scenario(Vec<(String, ScenarioValue)>),
    System {
        name: String,
        expr: SystemExpr,
        invariants: Vec<String>,
    },
}

impl Decl {
    /// Name introduced by the declaration, if any.
    pub fn name(&self) -> Option<&str> {
        match self {
            Decl::Controller { name, .. }
            | Decl::Plant { name, .. }
            | Decl::Invariant { name, .. }
            | Decl::System { name, .. } => Some(name),
            Decl::Env(_) | Decl::Contract { .. } | Decl::Resource { .. } | Decl::Scenario(_) => {
                None
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelFile {
    pub decls: Vec<Located<Decl>>,
}

impl ModelFile {
    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Decl> {
        self.decls.iter().map(|d| &d.node)
    }

    /// Conjunction of every `env` block.
    pub fn environment(&self) -> Formula {
        Formula::conj_nontrivial(self.iter().filter_map(|d| match d {
            Decl::Env(f) => Some(f.clone()),
            _ => None,
        }))
    }

    pub fn components(&self) -> impl Iterator<Item = &Decl> {
        self.iter()
            .filter(|d| matches!(d, Decl::Controller { .. } | Decl::Plant { .. }))
    }

    pub fn invariants(&self) -> impl Iterator<Item = (&str, &Formula)> {
        self.iter().filter_map(|d| match d {
            Decl::Invariant { name, formula } => Some((name.as_str(), formula)),
            _ => None,
        })
    }

    pub fn systems(&self) -> impl Iterator<Item = (&str, &SystemExpr)> {
        self.iter().filter_map(|d| match d {
            Decl::System { name, expr, .. } => Some((name.as_str(), expr)),
            _ => None,
        })
    }
}
