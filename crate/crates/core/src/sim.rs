//! Execution of multi computer-controlled systems under explicit schedules.
//!
//! Each loop iteration either lets the plant flow for a positive duration or
//! fires one enabled controller. Flows never pass the earliest deadline
//! `τ_i + δ`, and guarantees and the composition invariant are monitored at
//! every loop boundary without stopping the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ast::{parse_decimal, rational_to_f64, Formula, Rational, CLOCK};
use crate::component::Mccs;
use crate::dsl::ScenarioValue;
use crate::eval::{reachable, CFormula, COde, CProgram, EvalError, Exploration, Scope, State};
use crate::par::{self, Execution};
use crate::semantics::StaticSemantics;

/// Time tolerance of domain-exit bisection.
pub const TIME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("initial state violates `{0}`")]
    InitViolatesAssumptions(String),
    #[error("no branch enabled at t = {time}")]
    StuckState { time: f64, state: BTreeMap<String, f64> },
    #[error("no initial value for `{0}`")]
    MissingInitialValue(String),
    #[error("initial value of `{name}`: {reason}")]
    BadInitialValue { name: String, reason: String },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Uniform choice among enabled options, flows of uniform length.
    Random,
    /// Flow until just before the earliest deadline, then fire that controller.
    Lazy,
    /// Alternate flows and controllers in declaration order.
    RoundRobin,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Strategy> {
        Some(match s {
            "random" | "uniform-random" => Strategy::Random,
            "lazy" | "lazy-controller" => Strategy::Lazy,
            "round-robin" => Strategy::RoundRobin,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub strategy: Strategy,
    pub seed: u64,
    pub horizon: f64,
    pub max_iterations: usize,
}

impl Schedule {
    pub fn new(strategy: Strategy, seed: u64, horizon: f64) -> Schedule {
        Schedule {
            strategy,
            seed,
            horizon,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    LoopBoundary,
    OdeStep,
    GuardExpiry,
    CtrlFired(String),
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Event::LoopBoundary => f.write_str("loop-boundary"),
            Event::OdeStep => f.write_str("ode-step"),
            Event::GuardExpiry => f.write_str("guard-expiry"),
            Event::CtrlFired(n) => write!(f, "ctrl-fired({n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub event: Event,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub time: f64,
    pub monitor: String,
    pub formula: String,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<Sample>,
    pub violations: Vec<Violation>,
    /// The run hit `max_iterations` before the horizon.
    pub truncated: bool,
}

impl Trace {
    /// `time,event,<one column per variable>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.samples.first() else {
            return "time,event\n".into();
        };
        let names = first.state.scope().names();
        out.push_str("time,event");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{},{}", s.time, s.event);
            for v in s.state.values() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Initial values: constants, intervals sampled per run, or copies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitSpec {
    pub entries: Vec<(String, ScenarioValue)>,
}

impl InitSpec {
    pub fn new(entries: Vec<(String, ScenarioValue)>) -> InitSpec {
        InitSpec { entries }
    }

    pub fn value(mut self, name: &str, v: Rational) -> InitSpec {
        self.entries.push((name.into(), ScenarioValue::Value(v)));
        self
    }

    pub fn interval(mut self, name: &str, lo: Rational, hi: Rational) -> InitSpec {
        self.entries.push((name.into(), ScenarioValue::Interval(lo, hi)));
        self
    }

    pub fn copy(mut self, name: &str, from: &str) -> InitSpec {
        self.entries.push((name.into(), ScenarioValue::Copy(from.into())));
        self
    }

    /// Later entries override earlier ones with the same name.
    pub fn overlay(&self, other: &InitSpec) -> InitSpec {
        let mut entries: Vec<(String, ScenarioValue)> = self
            .entries
            .iter()
            .filter(|(k, _)| !other.entries.iter().any(|(o, _)| o == k))
            .cloned()
            .collect();
        entries.extend(other.entries.iter().cloned());
        InitSpec { entries }
    }

    /// `{"wl": [3.6, 6.4], "wlm": "wl", "fin": 1}`
    pub fn from_json(v: &serde_json::Value) -> Result<InitSpec, SimError> {
        let obj = v.as_object().ok_or_else(|| SimError::BadInitialValue {
            name: "<root>".into(),
            reason: "expected an object".into(),
        })?;
        let num = |name: &str, v: &serde_json::Value| -> Result<Rational, SimError> {
            let bad = |reason: &str| SimError::BadInitialValue {
                name: name.to_string(),
                reason: reason.to_string(),
            };
            match v {
                serde_json::Value::Number(n) => {
                    parse_decimal(&n.to_string()).ok_or_else(|| bad("not a plain decimal"))
                }
                _ => Err(bad("expected a number")),
            }
        };
        let mut entries = Vec::new();
        for (k, v) in obj {
            let value = match v {
                serde_json::Value::Number(_) => ScenarioValue::Value(num(k, v)?),
                serde_json::Value::String(s) => ScenarioValue::Copy(s.clone()),
                serde_json::Value::Array(a) if a.len() == 2 => {
                    ScenarioValue::Interval(num(k, &a[0])?, num(k, &a[1])?)
                }
                _ => {
                    return Err(SimError::BadInitialValue {
                        name: k.clone(),
                        reason: "expected a number, [lo, hi] or a variable name".into(),
                    })
                }
            };
            entries.push((k.clone(), value));
        }
        Ok(InitSpec { entries })
    }
}

struct Controller {
    name: String,
    timestamp: usize,
    program: CProgram,
}

struct Monitor {
    label: String,
    text: String,
    formula: CFormula,
}

/// A system compiled for simulation.
pub struct Simulator {
    scope: Arc<Scope>,
    clock: usize,
    controllers: Vec<Controller>,
    plant: COde,
    delta: f64,
    step: f64,
    monitors: Vec<Monitor>,
    initial: Vec<(String, CFormula)>,
    constants: BTreeMap<String, f64>,
    discrete: Exploration,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `i`-th member of a batch.
pub fn member_seed(seed: u64, i: usize) -> u64 {
    splitmix64(seed ^ splitmix64(i as u64))
}

impl Simulator {
    pub fn new(system: &Mccs) -> Result<Simulator, SimError> {
        let program = system.to_program();
        let ctrl_contract = system.controller_contract();
        let plant_contract = system.plant_contract();
        let j = &system.invariant.formula;
        let env = &system.environment;

        let mut vars = program.all_vars();
        for c in ctrl_contract.iter().chain(plant_contract.iter()) {
            for f in [&c.assumptions, &c.guarantees, &c.init] {
                vars.extend(f.all_vars());
            }
        }
        vars.extend(j.all_vars());
        vars.extend(env.constraint.all_vars());
        let scope = Arc::new(Scope::new(vars));

        let delta = system.reactivity();
        let mut controllers = Vec::new();
        for rc in &system.controller.choices {
            controllers.push(Controller {
                name: rc.name.clone(),
                timestamp: scope.get(&rc.timestamp).expect("timestamp in scope"),
                program: CProgram::compile(&rc.program_with_bound(&delta), &scope)?,
            });
        }
        let crate::ast::Program::Ode(ode) = system.plant.ode_with([]) else {
            unreachable!("plant programs are ODEs")
        };
        let plant = COde::compile(&ode, &scope)?;

        let mut monitors = Vec::new();
        let mut watch = |label: String, f: &Formula| -> Result<(), SimError> {
            if *f != Formula::True {
                monitors.push(Monitor {
                    label,
                    text: f.to_string(),
                    formula: CFormula::compile(f, &scope)?,
                });
            }
            Ok(())
        };
        for rc in &system.controller.choices {
            if let Some(c) = &rc.contract {
                watch(format!("G_{}", rc.name), &c.guarantees)?;
            }
        }
        if let Some(c) = &plant_contract {
            watch(format!("G_{}", system.plant.name), &c.guarantees)?;
        }
        watch("J".into(), j)?;

        let mut initial = Vec::new();
        let mut pre = vec![env.constraint.clone()];
        for c in ctrl_contract.iter().chain(plant_contract.iter()) {
            pre.push(c.init.clone());
            pre.push(c.assumptions.clone());
        }
        for f in pre {
            for part in f.conjuncts() {
                if *part != Formula::True {
                    initial.push((part.to_string(), CFormula::compile(part, &scope)?));
                }
            }
        }

        let delta_f = rational_to_f64(&delta);
        let step = delta_f.min(rational_to_f64(&system.controllability())) / 100.0;
        Ok(Simulator {
            clock: scope.get(CLOCK).expect("clock in scope"),
            scope,
            controllers,
            plant,
            delta: delta_f,
            step,
            monitors,
            initial,
            constants: env
                .constants()
                .into_iter()
                .map(|(k, v)| (k, rational_to_f64(&v)))
                .collect(),
            discrete: Exploration {
                unroll: 3,
                ode_samples: 1,
                max_duration: 0.0,
                step: 1.0,
            },
        })
    }

    pub fn scope(&self) -> &Arc<Scope> {
        &self.scope
    }

    /// Integration step `min(δ, Δ) / 100`.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn reactivity(&self) -> f64 {
        self.delta
    }

    pub fn monitor_labels(&self) -> Vec<&str> {
        self.monitors.iter().map(|m| m.label.as_str()).collect()
    }

    /// Draw an initial state. Clock and timestamps default to 0 and
    /// environment constants to their values.
    pub fn initial_state(&self, spec: &InitSpec, rng: &mut impl Rng) -> Result<State, SimError> {
        let mut s = State::zeros(self.scope.clone());
        let mut known: BTreeMap<&str, f64> = BTreeMap::new();
        known.insert(CLOCK, 0.0);
        for c in &self.controllers {
            known.insert(&self.scope.names()[c.timestamp], 0.0);
        }
        for (k, v) in &self.constants {
            known.insert(k, *v);
        }
        let mut copies = Vec::new();
        for (name, v) in &spec.entries {
            if self.scope.get(name).is_none() {
                return Err(SimError::BadInitialValue {
                    name: name.clone(),
                    reason: "not a variable of the system".into(),
                });
            }
            match v {
                ScenarioValue::Value(r) => {
                    known.insert(name, rational_to_f64(r));
                }
                ScenarioValue::Interval(lo, hi) => {
                    let (lo, hi) = (rational_to_f64(lo), rational_to_f64(hi));
                    known.insert(name, lo + (hi - lo) * rng.random::<f64>());
                }
                ScenarioValue::Copy(from) => copies.push((name.as_str(), from.as_str())),
            }
        }
        while !copies.is_empty() {
            let before = copies.len();
            copies.retain(|(name, from)| match known.get(from) {
                Some(&v) => {
                    known.insert(name, v);
                    false
                }
                None => true,
            });
            if copies.len() == before {
                return Err(SimError::MissingInitialValue(copies[0].1.to_string()));
            }
        }
        for name in self.scope.names() {
            let v = known
                .get(name.as_str())
                .ok_or_else(|| SimError::MissingInitialValue(name.clone()))?;
            s.set(name, *v)?;
        }
        Ok(s)
    }

    fn check_initial(&self, s: &State) -> Result<(), SimError> {
        for (text, f) in &self.initial {
            if !f.eval(s)? {
                return Err(SimError::InitViolatesAssumptions(text.clone()));
            }
        }
        Ok(())
    }

    fn monitor(&self, s: &State, out: &mut Vec<Violation>) -> Result<(), SimError> {
        for m in &self.monitors {
            if !m.formula.eval(s)? {
                out.push(Violation {
                    time: s.at(self.clock),
                    monitor: m.label.clone(),
                    formula: m.text.clone(),
                    state: s.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn run(&self, schedule: &Schedule, init: State) -> Result<Trace, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        self.run_with(schedule, init, &mut rng)
    }

    fn run_with(&self, schedule: &Schedule, init: State, rng: &mut ChaCha8Rng) -> Result<Trace, SimError> {
        if schedule.horizon.is_nan() || schedule.horizon <= 0.0 {
            return Err(SimError::InvalidSchedule("horizon must be positive".into()));
        }
        self.check_initial(&init)?;
        let mut trace = Trace {
            samples: Vec::new(),
            violations: Vec::new(),
            truncated: false,
        };
        let mut s = init;
        self.monitor(&s, &mut trace.violations)?;
        trace.samples.push(Sample {
            time: s.at(self.clock),
            event: Event::LoopBoundary,
            state: s.clone(),
        });
        let eps = self.step / 10.0;
        let mut next_ctrl = 0usize;
        let mut last_flowed = false;
        let mut iterations = 0usize;

        while s.at(self.clock) < schedule.horizon {
            if iterations == schedule.max_iterations {
                trace.truncated = true;
                break;
            }
            iterations += 1;
            let t = s.at(self.clock);
            let deadlines: Vec<f64> = self
                .controllers
                .iter()
                .map(|c| s.at(c.timestamp) + self.delta)
                .collect();
            let earliest = deadlines.iter().copied().fold(f64::INFINITY, f64::min);
            let slack = (earliest - t).max(0.0);
            let cap = slack.min(schedule.horizon - t);
            let room = self
                .plant
                .max_duration(&s, cap, self.step, TIME_TOLERANCE)?
                .unwrap_or(0.0);
            let mut outcomes: Vec<Vec<State>> = Vec::with_capacity(self.controllers.len());
            for c in &self.controllers {
                outcomes.push(reachable(&c.program, &s, &self.discrete)?);
            }
            let enabled: Vec<usize> = (0..self.controllers.len())
                .filter(|&i| !outcomes[i].is_empty())
                .collect();
            let can_flow = room > 0.0;

            let action = match schedule.strategy {
                Strategy::Random => {
                    let options = enabled.len() + usize::from(can_flow);
                    if options == 0 {
                        None
                    } else {
                        let k = rng.random_range(0..options);
                        if k < enabled.len() {
                            Some(Action::Fire(enabled[k]))
                        } else {
                            Some(Action::Flow(room * (1.0 - rng.random::<f64>())))
                        }
                    }
                }
                Strategy::Lazy => {
                    let target = slack - eps;
                    if can_flow && target > TIME_TOLERANCE {
                        Some(Action::Flow(target.min(room)))
                    } else {
                        enabled
                            .iter()
                            .copied()
                            .min_by(|&a, &b| deadlines[a].total_cmp(&deadlines[b]))
                            .map(Action::Fire)
                            .or(can_flow.then_some(Action::Flow(room)))
                    }
                }
                Strategy::RoundRobin => {
                    let n = self.controllers.len();
                    let pick = (0..n)
                        .map(|k| (next_ctrl + k) % n)
                        .find(|i| enabled.contains(i));
                    if can_flow && (!last_flowed || pick.is_none()) {
                        Some(Action::Flow(room.min(self.delta / n.max(1) as f64)))
                    } else {
                        pick.map(|i| {
                            next_ctrl = (i + 1) % n;
                            Action::Fire(i)
                        })
                    }
                }
            };

            match action {
                None => {
                    return Err(SimError::StuckState {
                        time: t,
                        state: s.to_map(),
                    })
                }
                Some(Action::Flow(d)) => {
                    let mut next = self.plant.advance(&s, d, self.step)?;
                    let at_deadline = d >= slack;
                    if at_deadline {
                        next.set_at(self.clock, earliest);
                    }
                    let event = if at_deadline || d >= room && room < cap {
                        Event::GuardExpiry
                    } else {
                        Event::OdeStep
                    };
                    s = next;
                    last_flowed = true;
                    self.monitor(&s, &mut trace.violations)?;
                    trace.samples.push(Sample {
                        time: s.at(self.clock),
                        event,
                        state: s.clone(),
                    });
                }
                Some(Action::Fire(i)) => {
                    let choices = &outcomes[i];
                    let k = if choices.len() == 1 {
                        0
                    } else {
                        rng.random_range(0..choices.len())
                    };
                    s = choices[k].clone();
                    last_flowed = false;
                    self.monitor(&s, &mut trace.violations)?;
                    trace.samples.push(Sample {
                        time: s.at(self.clock),
                        event: Event::CtrlFired(self.controllers[i].name.clone()),
                        state: s.clone(),
                    });
                }
            }
        }
        Ok(trace)
    }
}

enum Action {
    Flow(f64),
    Fire(usize),
}

/// Compile and run in one go.
pub fn run(system: &Mccs, schedule: &Schedule, init: &BTreeMap<String, f64>) -> Result<Trace, SimError> {
    let sim = Simulator::new(system)?;
    let mut s = State::zeros(sim.scope.clone());
    for name in sim.scope.names() {
        let v = init
            .get(name)
            .copied()
            .or_else(|| sim.constants.get(name).copied())
            .or_else(|| {
                (name == CLOCK || sim.controllers.iter().any(|c| sim.scope.names()[c.timestamp] == *name))
                    .then_some(0.0)
            })
            .ok_or_else(|| SimError::MissingInitialValue(name.clone()))?;
        s.set(name, v)?;
    }
    sim.run(schedule, s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchConfig {
    pub runs: usize,
    pub seed: u64,
    pub horizon: f64,
    pub strategy: Strategy,
    pub max_iterations: usize,
    pub execution: Execution,
}

impl BatchConfig {
    pub fn new(runs: usize, seed: u64, horizon: f64) -> BatchConfig {
        BatchConfig {
            runs,
            seed,
            horizon,
            strategy: Strategy::Random,
            max_iterations: 1_000_000,
            execution: Execution::default(),
        }
    }

    /// The schedule of the `i`-th run.
    pub fn schedule(&self, i: usize) -> Schedule {
        Schedule {
            strategy: self.strategy,
            seed: member_seed(self.seed, i),
            horizon: self.horizon,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub seed: u64,
    pub horizon: f64,
    pub strategy: Strategy,
    pub runs_with_violations: usize,
    pub violations: usize,
    /// Violation count per monitored formula, including zero counts.
    pub per_monitor: BTreeMap<String, usize>,
    pub extrema: BTreeMap<String, Extrema>,
    pub truncated_runs: usize,
    pub samples: usize,
    /// First violation of the lowest-numbered failing run.
    pub first_violation: Option<Violation>,
}

/// Trace of the `i`-th member of a batch: the initial state and the
/// schedule are both drawn from that member's seed.
pub fn batch_member(sim: &Simulator, init: &InitSpec, cfg: &BatchConfig, i: usize) -> Result<Trace, SimError> {
    let schedule = cfg.schedule(i);
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let s = sim.initial_state(init, &mut rng)?;
    sim.run_with(&schedule, s, &mut rng)
}

pub fn run_batch(sim: &Simulator, init: &InitSpec, cfg: &BatchConfig) -> Result<Summary, SimError> {
    if cfg.runs == 0 {
        return Err(SimError::InvalidSchedule("at least one run is required".into()));
    }
    let partials = par::map_indices(cfg.execution, cfg.runs, |i| {
        batch_member(sim, init, cfg, i).map(|t| Partial::of(sim, &t))
    });
    let mut summary = Summary {
        runs: cfg.runs,
        seed: cfg.seed,
        horizon: cfg.horizon,
        strategy: cfg.strategy,
        runs_with_violations: 0,
        violations: 0,
        per_monitor: sim
            .monitor_labels()
            .into_iter()
            .map(|l| (l.to_string(), 0))
            .collect(),
        extrema: BTreeMap::new(),
        truncated_runs: 0,
        samples: 0,
        first_violation: None,
    };
    for p in partials {
        let p = p?;
        summary.samples += p.samples;
        summary.violations += p.violations.len();
        summary.truncated_runs += usize::from(p.truncated);
        if !p.violations.is_empty() {
            summary.runs_with_violations += 1;
            if summary.first_violation.is_none() {
                summary.first_violation = Some(p.violations[0].clone());
            }
        }
        for v in &p.violations {
            *summary.per_monitor.entry(v.monitor.clone()).or_default() += 1;
        }
        for (name, e) in p.extrema {
            summary
                .extrema
                .entry(name)
                .and_modify(|x| {
                    x.min = x.min.min(e.min);
                    x.max = x.max.max(e.max);
                })
                .or_insert(e);
        }
    }
    Ok(summary)
}

struct Partial {
    samples: usize,
    violations: Vec<Violation>,
    truncated: bool,
    extrema: BTreeMap<String, Extrema>,
}

impl Partial {
    fn of(sim: &Simulator, t: &Trace) -> Partial {
        let names = sim.scope.names();
        let mut lo = vec![f64::INFINITY; names.len()];
        let mut hi = vec![f64::NEG_INFINITY; names.len()];
        for s in &t.samples {
            for (k, v) in s.state.values().iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        Partial {
            samples: t.samples.len(),
            violations: t.violations.clone(),
            truncated: t.truncated,
            extrema: names
                .iter()
                .enumerate()
                .map(|(k, n)| (n.clone(), Extrema { min: lo[k], max: hi[k] }))
                .collect(),
        }
    }
}
