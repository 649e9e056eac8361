//! Bounded falsification of proof obligations.
//!
//! Initial states are sampled on a grid, every nondeterministic branch is
//! executed, loops are unrolled a fixed number of times and ODEs are sampled
//! along their solutions. A `Holds` verdict only means no counterexample was
//! found at this resolution.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{rational_to_f64, Formula};
use crate::component::Environment;
use crate::eval::{refute, CFormula, EvalError, Exploration, Scope, State};
use crate::obligation::{ProofObligation, Status};
use crate::par::{self, Execution};
use crate::semantics::StaticSemantics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("free variable `{0}` has no interval")]
    UnboundedVariable(String),
    #[error("grid size 0")]
    EmptyGrid,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Closed interval per variable; `lo == hi` pins a value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct DomainBox {
    pub intervals: BTreeMap<String, (f64, f64)>,
}

impl DomainBox {
    pub fn new() -> DomainBox {
        DomainBox::default()
    }

    pub fn interval(mut self, name: &str, lo: f64, hi: f64) -> DomainBox {
        self.intervals.insert(name.to_string(), (lo.min(hi), lo.max(hi)));
        self
    }

    pub fn point(self, name: &str, v: f64) -> DomainBox {
        self.interval(name, v, v)
    }

    /// Pin every constant fixed by the environment, keeping explicit entries.
    pub fn with_constants(mut self, env: &Environment) -> DomainBox {
        for (k, v) in env.constants() {
            let v = rational_to_f64(&v);
            self.intervals.entry(k).or_insert((v, v));
        }
        self
    }

    fn samples(&self, name: &str, grid: usize) -> Vec<f64> {
        let (lo, hi) = self.intervals[name];
        if lo == hi {
            return vec![lo];
        }
        if grid == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..grid)
            .map(|k| {
                if k == grid - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (grid - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedConfig {
    pub grid: usize,
    pub exploration: Exploration,
    pub execution: Execution,
}

impl Default for BoundedConfig {
    fn default() -> Self {
        BoundedConfig {
            grid: 5,
            exploration: Exploration::default(),
            execution: Execution::default(),
        }
    }
}

impl BoundedConfig {
    pub fn with_unroll(mut self, unroll: usize) -> BoundedConfig {
        self.exploration.unroll = unroll;
        self
    }

    pub fn with_grid(mut self, grid: usize) -> BoundedConfig {
        self.grid = grid;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> BoundedConfig {
        self.execution = execution;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    /// No counterexample among `points` samples; `satisfied` of them met the
    /// hypotheses.
    Holds { points: usize, satisfied: usize },
    Counterexample {
        /// Index of the grid point in enumeration order.
        point: usize,
        initial: BTreeMap<String, f64>,
        /// State at which the failing postcondition was evaluated.
        witness: BTreeMap<String, f64>,
    },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn status(&self) -> Status {
        match self {
            Verdict::Holds { .. } => Status::Holds,
            Verdict::Counterexample { .. } => Status::Counterexample,
            Verdict::Inconclusive { .. } => Status::Inconclusive,
        }
    }
}

/// Falsify `goal` over the grid spanned by `dbox`.
pub fn check_formula(goal: &Formula, dbox: &DomainBox, cfg: &BoundedConfig) -> Result<Verdict, CheckError> {
    if cfg.grid == 0 {
        return Err(CheckError::EmptyGrid);
    }
    let free = goal.free_vars();
    if let Some(x) = free.iter().find(|x| !dbox.intervals.contains_key(*x)) {
        return Err(CheckError::UnboundedVariable(x.to_string()));
    }
    let scope = Arc::new(Scope::new(goal.all_vars()));
    let compiled = CFormula::compile(goal, &scope)?;
    let hypothesis = match &compiled {
        CFormula::Implies(h, _) => Some((**h).clone()),
        _ => None,
    };
    let dims: Vec<(usize, Vec<f64>)> = free
        .iter()
        .map(|x| (scope.get(x).expect("in scope"), dbox.samples(x, cfg.grid)))
        .collect();
    let total: usize = dims.iter().map(|(_, s)| s.len()).product();
    let point = |mut k: usize| {
        let mut s = State::zeros(scope.clone());
        for (slot, samples) in dims.iter().rev() {
            s.set_at(*slot, samples[k % samples.len()]);
            k /= samples.len();
        }
        s
    };
    let ex = cfg.exploration;

    let failure = par::find_first(cfg.execution, total, |k| {
        let s = point(k);
        match refute(&compiled, &s, &ex) {
            Ok(None) => None,
            Ok(Some(w)) => Some(Ok((k, s, w))),
            Err(e) => Some(Err(e)),
        }
    });
    match failure {
        Some(Err(EvalError::Unsupported(what))) => {
            return Ok(Verdict::Inconclusive {
                reason: format!("cannot evaluate {what}"),
            })
        }
        Some(Err(e)) => return Err(e.into()),
        Some(Ok((k, s, w))) => {
            return Ok(Verdict::Counterexample {
                point: k,
                initial: s.to_map(),
                witness: w.to_map(),
            })
        }
        None => {}
    }
    let satisfied = match &hypothesis {
        None => total,
        Some(h) => par::map_indices(cfg.execution, total, |k| {
            matches!(refute(h, &point(k), &ex), Ok(None))
        })
        .into_iter()
        .filter(|b| *b)
        .count(),
    };
    if satisfied == 0 {
        return Ok(Verdict::Inconclusive {
            reason: "no sampled state satisfies the hypotheses".into(),
        });
    }
    Ok(Verdict::Holds {
        points: total,
        satisfied,
    })
}

pub fn check_bounded(o: &ProofObligation, dbox: &DomainBox, cfg: &BoundedConfig) -> Result<Verdict, CheckError> {
    check_formula(&o.goal, dbox, cfg)
}

/// Check a whole set, recording each verdict in the obligation's status.
pub fn check_all(
    obligations: &mut [ProofObligation],
    dbox: &DomainBox,
    cfg: &BoundedConfig,
) -> Result<Vec<Verdict>, CheckError> {
    let mut out = Vec::with_capacity(obligations.len());
    for o in obligations.iter_mut() {
        let v = check_bounded(o, dbox, cfg)?;
        o.status = v.status();
        out.push(v);
    }
    Ok(out)
}
