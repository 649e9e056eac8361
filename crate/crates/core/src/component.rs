//! Reactive controllers, controllable plants, multi-choice controllers and
//! multi computer-controlled systems, with their contracts.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::ast::{
    self, format_rational, is_identifier, AstError, Formula, OdeSystem, Program, Rational, Term,
    CLOCK, TIMESTAMP_PREFIX,
};
use crate::composition::{self, Violation};
use crate::semantics::{StaticSemantics, VarSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComponentError {
    #[error("controller `{0}` contains an ODE")]
    NotDiscrete(String),
    #[error("timestamp `{timestamp}` of `{name}` is not fresh")]
    NonFreshTimestamp { name: String, timestamp: String },
    #[error("bound of `{name}` must be positive, got {value}")]
    NonPositiveBound { name: String, value: String },
    #[error("`{0}` redefines the reserved clock `t`")]
    ClockRedefined(String),
    #[error("reactivity {reactivity} exceeds controllability {controllability}")]
    ReactivityExceedsControllability {
        reactivity: Rational,
        controllability: Rational,
    },
    #[error("interference: {}", render_violations(.0))]
    Interference(Vec<Violation>),
    #[error("`{0}` has no contract")]
    MissingContract(String),
    #[error("controller `{0}` is not mapped to a resource")]
    UnmappedController(String),
    #[error("{what} of `{name}` must not contain a modality")]
    ModalFormula { name: String, what: &'static str },
    #[error("environment constants {0} are written by the system")]
    EnvironmentNotConstant(VarSet),
    #[error("timestamps must be pairwise distinct, `{0}` repeats")]
    DuplicateTimestamp(String),
    #[error("a multi-choice controller needs at least one choice")]
    EmptyController,
    #[error(transparent)]
    Ast(#[from] AstError),
}

fn render_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Assumptions, guarantees and initial condition of a component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contract {
    pub assumptions: Formula,
    pub guarantees: Formula,
    pub init: Formula,
}

impl Contract {
    pub fn new(
        assumptions: Formula,
        guarantees: Formula,
        init: Formula,
    ) -> Result<Contract, ComponentError> {
        for (what, f) in [
            ("assumption", &assumptions),
            ("guarantee", &guarantees),
            ("init", &init),
        ] {
            if f.has_modality() {
                return Err(ComponentError::ModalFormula {
                    name: "contract".into(),
                    what,
                });
            }
        }
        Ok(Contract {
            assumptions,
            guarantees,
            init,
        })
    }

    pub fn trivial() -> Contract {
        Contract {
            assumptions: Formula::True,
            guarantees: Formula::True,
            init: Formula::True,
        }
    }

    pub fn conjoin<'a>(parts: impl IntoIterator<Item = &'a Contract>) -> Contract {
        let parts: Vec<&Contract> = parts.into_iter().collect();
        Contract {
            assumptions: Formula::conj_nontrivial(parts.iter().map(|c| c.assumptions.clone())),
            guarantees: Formula::conj_nontrivial(parts.iter().map(|c| c.guarantees.clone())),
            init: Formula::conj_nontrivial(parts.iter().map(|c| c.init.clone())),
        }
    }
}

/// Constraint over constants shared by all components.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Environment {
    pub constraint: Formula,
}

impl Environment {
    pub fn new(constraint: Formula) -> Result<Environment, ComponentError> {
        if constraint.has_modality() {
            return Err(ComponentError::ModalFormula {
                name: "env".into(),
                what: "constraint",
            });
        }
        Ok(Environment { constraint })
    }

    /// Constants pinned by a top-level conjunct `x = c` or `c = x`.
    pub fn constants(&self) -> BTreeMap<String, Rational> {
        let mut out = BTreeMap::new();
        for c in self.constraint.conjuncts() {
            if let Formula::Cmp(ast::CmpOp::Eq, a, b) = c {
                match (a, b) {
                    (Term::Var(x), Term::Const(r)) | (Term::Const(r), Term::Var(x)) => {
                        out.insert(x.clone(), *r);
                    }
                    (Term::Var(x), Term::Neg(inner)) | (Term::Neg(inner), Term::Var(x)) => {
                        if let Term::Const(r) = inner.as_ref() {
                            out.insert(x.clone(), -*r);
                        }
                    }
                    _ => {}
                }
            }
        }
        out
    }

    /// Conjunction of both environments without repeated conjuncts.
    pub fn merge(&self, other: &Environment) -> Environment {
        let mut seen = BTreeSet::new();
        let parts: Vec<Formula> = self
            .constraint
            .conjuncts()
            .into_iter()
            .chain(other.constraint.conjuncts())
            .filter(|f| **f != Formula::True && seen.insert((*f).clone()))
            .cloned()
            .collect();
        Environment {
            constraint: Formula::conj(parts),
        }
    }

    /// `FV(Env) ∩ BV(program)` must be empty.
    pub fn check_constant(&self, program: &Program) -> Result<(), ComponentError> {
        let clash = self.constraint.free_vars().intersection(&program.bound_vars());
        if clash.is_empty() {
            Ok(())
        } else {
            Err(ComponentError::EnvironmentNotConstant(clash))
        }
    }
}

/// Relation between plant truth and controller measurements.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompositionInvariant {
    pub formula: Formula,
}

impl CompositionInvariant {
    pub fn new(formula: Formula) -> Result<CompositionInvariant, ComponentError> {
        if formula.has_modality() {
            return Err(ComponentError::ModalFormula {
                name: "invariant".into(),
                what: "formula",
            });
        }
        Ok(CompositionInvariant { formula })
    }

    pub fn trivial() -> CompositionInvariant {
        CompositionInvariant {
            formula: Formula::True,
        }
    }
}

/// Name of the environment constant carrying a controller's reactivity.
pub fn reactivity_constant(controller: &str) -> String {
    format!("delta_{controller}")
}

/// Name of the environment constant carrying a plant's controllability.
pub fn controllability_constant(plant: &str) -> String {
    format!("Delta_{plant}")
}

fn check_positive(name: &str, value: &Rational) -> Result<(), ComponentError> {
    if value.is_zero() || *value < Rational::zero() {
        return Err(ComponentError::NonPositiveBound {
            name: name.to_string(),
            value: format_rational(value),
        });
    }
    Ok(())
}

/// `?(t <= tau + delta); ctrl; tau := t`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactiveController {
    pub name: String,
    pub body: Program,
    pub reactivity: Rational,
    pub timestamp: String,
    pub contract: Option<Contract>,
}

impl ReactiveController {
    pub fn new(
        name: impl Into<String>,
        body: Program,
        reactivity: Rational,
        timestamp: impl Into<String>,
    ) -> Result<ReactiveController, ComponentError> {
        let name = name.into();
        let timestamp = timestamp.into();
        if !is_identifier(&timestamp) || timestamp == CLOCK {
            return Err(AstError::InvalidIdentifier(timestamp).into());
        }
        if !body.is_discrete() {
            return Err(ComponentError::NotDiscrete(name));
        }
        check_positive(&name, &reactivity)?;
        if body.mentions(&timestamp) {
            return Err(ComponentError::NonFreshTimestamp { name, timestamp });
        }
        if body.bound_vars().contains(CLOCK) {
            return Err(ComponentError::ClockRedefined(name));
        }
        Ok(ReactiveController {
            name,
            body,
            reactivity,
            timestamp,
            contract: None,
        })
    }

    pub fn with_contract(mut self, contract: Contract) -> ReactiveController {
        self.contract = Some(contract);
        self
    }

    pub fn bound_constant(&self) -> String {
        reactivity_constant(&self.name)
    }

    /// `t <= tau + bound`
    pub fn guard(&self, bound: &Rational) -> Formula {
        Formula::le(
            Term::var(CLOCK),
            Term::add(Term::var(&self.timestamp), Term::constant(*bound)),
        )
    }

    /// The reactive shape re-emitted with an overall bound.
    pub fn program_with_bound(&self, bound: &Rational) -> Program {
        Program::seq_all(
            std::iter::once(Program::test(self.guard(bound)))
                .chain(self.body.seq_operands().into_iter().cloned())
                .chain(std::iter::once(Program::assign(
                    &self.timestamp,
                    Term::var(CLOCK),
                ))),
        )
    }

    pub fn to_program(&self) -> Program {
        self.program_with_bound(&self.reactivity)
    }
}

pub fn make_reactive_controller(
    name: impl Into<String>,
    ctrl: Program,
    reactivity: Rational,
    timestamp: impl Into<String>,
) -> Result<ReactiveController, ComponentError> {
    ReactiveController::new(name, ctrl, reactivity, timestamp)
}

/// `{x' = θ, t' = 1 & t >= 0 & H & t <= Δ}`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllablePlant {
    pub name: String,
    pub equations: Vec<(String, Term)>,
    pub domain: Formula,
    pub controllability: Rational,
    pub contract: Option<Contract>,
}

impl ControllablePlant {
    pub fn new(
        name: impl Into<String>,
        equations: Vec<(String, Term)>,
        domain: Formula,
        controllability: Rational,
    ) -> Result<ControllablePlant, ComponentError> {
        let name = name.into();
        if equations.iter().any(|(x, _)| x == CLOCK) {
            return Err(ComponentError::ClockRedefined(name));
        }
        check_positive(&name, &controllability)?;
        if domain.has_modality() {
            return Err(ComponentError::ModalFormula {
                name,
                what: "evolution domain",
            });
        }
        OdeSystem::new(equations.clone(), domain.clone())?;
        Ok(ControllablePlant {
            name,
            equations,
            domain,
            controllability,
            contract: None,
        })
    }

    pub fn with_contract(mut self, contract: Contract) -> ControllablePlant {
        self.contract = Some(contract);
        self
    }

    pub fn bound_constant(&self) -> String {
        controllability_constant(&self.name)
    }

    /// The user-level ODE `{x' = θ & H}` without the clock.
    pub fn user_ode(&self) -> Program {
        Program::Ode(OdeSystem {
            equations: self.equations.clone(),
            domain: self.domain.clone(),
        })
    }

    fn timed_equations(&self) -> Vec<(String, Term)> {
        let mut eqs = self.equations.clone();
        eqs.push((CLOCK.to_string(), Term::int(1)));
        eqs
    }

    /// The plant ODE with `t >= 0 & H` followed by `extra` domain conjuncts.
    pub fn ode_with(&self, extra: impl IntoIterator<Item = Formula>) -> Program {
        let clock_nonneg = Formula::ge(Term::var(CLOCK), Term::int(0));
        let domain = Formula::conj(
            std::iter::once(clock_nonneg)
                .chain(
                    self.domain
                        .conjuncts()
                        .into_iter()
                        .filter(|h| **h != Formula::True)
                        .cloned(),
                )
                .chain(extra),
        );
        Program::Ode(OdeSystem {
            equations: self.timed_equations(),
            domain,
        })
    }

    pub fn to_program(&self) -> Program {
        self.ode_with([Formula::le(
            Term::var(CLOCK),
            Term::constant(self.controllability),
        )])
    }

    /// Controllability measured from the last control action of each timestamp.
    pub fn relative_program(&self, timestamps: &[String]) -> Program {
        self.ode_with(timestamps.iter().map(|tau| {
            Formula::le(
                Term::var(CLOCK),
                Term::add(Term::var(tau), Term::constant(self.controllability)),
            )
        }))
    }

    pub fn state_vars(&self) -> VarSet {
        self.equations.iter().map(|(x, _)| x.clone()).collect()
    }
}

pub fn make_controllable_plant(
    name: impl Into<String>,
    equations: Vec<(String, Term)>,
    domain: Formula,
    controllability: Rational,
) -> Result<ControllablePlant, ComponentError> {
    ControllablePlant::new(name, equations, domain, controllability)
}

/// Union of reactive controllers sharing one overall reactivity bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiChoiceController {
    pub choices: Vec<ReactiveController>,
    pub reactivity: Rational,
}

impl MultiChoiceController {
    pub fn new(
        choices: Vec<ReactiveController>,
        reactivity: Rational,
    ) -> Result<MultiChoiceController, ComponentError> {
        if choices.is_empty() {
            return Err(ComponentError::EmptyController);
        }
        let mut seen = BTreeSet::new();
        for c in &choices {
            if !seen.insert(c.timestamp.as_str()) {
                return Err(ComponentError::DuplicateTimestamp(c.timestamp.clone()));
            }
        }
        check_positive("multi-choice controller", &reactivity)?;
        Ok(MultiChoiceController {
            choices,
            reactivity,
        })
    }

    pub fn single(rc: ReactiveController) -> MultiChoiceController {
        let reactivity = rc.reactivity;
        MultiChoiceController {
            choices: vec![rc],
            reactivity,
        }
    }

    pub fn name(&self) -> String {
        self.choices
            .iter()
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()
            .join("||")
    }

    pub fn timestamps(&self) -> Vec<String> {
        self.choices.iter().map(|c| c.timestamp.clone()).collect()
    }

    /// Atomic `(name, reactivity)` pairs the cost model combines.
    pub fn cost_inputs(&self) -> Vec<(String, Rational)> {
        self.choices
            .iter()
            .map(|c| (c.name.clone(), c.reactivity))
            .collect()
    }

    pub fn guards(&self) -> Vec<Formula> {
        self.choices
            .iter()
            .map(|c| c.guard(&self.reactivity))
            .collect()
    }

    pub fn to_program(&self) -> Program {
        Program::choice_all(
            self.choices
                .iter()
                .map(|c| c.program_with_bound(&self.reactivity)),
        )
    }

    /// `∪ ctrl_i` without the reactive guards.
    pub fn behavior(&self) -> Program {
        Program::choice_all(self.choices.iter().map(|c| c.body.clone()))
    }

    /// Conjunction of the choices' contracts; `None` if any is missing.
    pub fn contract(&self) -> Option<Contract> {
        let parts: Option<Vec<&Contract>> =
            self.choices.iter().map(|c| c.contract.as_ref()).collect();
        parts.map(Contract::conjoin)
    }

    pub fn guarantees(&self) -> Formula {
        Formula::conj_nontrivial(
            self.choices
                .iter()
                .filter_map(|c| c.contract.as_ref().map(|k| k.guarantees.clone())),
        )
    }
}

/// Multi-choice controller running against a controllable plant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mccs {
    pub controller: MultiChoiceController,
    pub plant: ControllablePlant,
    pub environment: Environment,
    pub invariant: CompositionInvariant,
}

impl Mccs {
    pub fn new(
        controller: MultiChoiceController,
        plant: ControllablePlant,
    ) -> Result<Mccs, ComponentError> {
        if controller.reactivity > plant.controllability {
            return Err(ComponentError::ReactivityExceedsControllability {
                reactivity: controller.reactivity,
                controllability: plant.controllability,
            });
        }
        let report = composition::non_interference_ctrl_plant(&controller, &plant);
        report.into_result()?;
        Ok(Mccs {
            controller,
            plant,
            environment: Environment::default(),
            invariant: CompositionInvariant::trivial(),
        })
    }

    pub fn with_environment(mut self, env: Environment) -> Result<Mccs, ComponentError> {
        env.check_constant(&self.to_program())?;
        self.environment = env;
        Ok(self)
    }

    pub fn with_invariant(mut self, invariant: CompositionInvariant) -> Mccs {
        self.invariant = invariant;
        self
    }

    pub fn reactivity(&self) -> Rational {
        self.controller.reactivity
    }

    pub fn controllability(&self) -> Rational {
        self.plant.controllability
    }

    /// Plant ODE with every controller guard replacing `t <= Δ`.
    pub fn flow(&self) -> Program {
        self.plant.ode_with(self.controller.guards())
    }

    pub fn to_program(&self) -> Program {
        Program::repeat(Program::choice(self.flow(), self.controller.to_program()))
    }

    pub fn controller_contract(&self) -> Option<Contract> {
        self.controller.contract()
    }

    pub fn plant_contract(&self) -> Option<Contract> {
        self.plant.contract.clone()
    }
}

/// Single controller and single plant.
pub fn make_ccs(rc: ReactiveController, cp: ControllablePlant) -> Result<Mccs, ComponentError> {
    Mccs::new(MultiChoiceController::single(rc), cp)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Component {
    Reactive(ReactiveController),
    Plant(ControllablePlant),
    MultiChoice(MultiChoiceController),
    Mccs(Mccs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    ReactiveController,
    ControllablePlant,
    MultiChoiceController,
    Mccs,
}

impl Component {
    pub fn kind(&self) -> ComponentKind {
        match self {
            Component::Reactive(_) => ComponentKind::ReactiveController,
            Component::Plant(_) => ComponentKind::ControllablePlant,
            Component::MultiChoice(_) => ComponentKind::MultiChoiceController,
            Component::Mccs(_) => ComponentKind::Mccs,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Component::Reactive(c) => c.name.clone(),
            Component::Plant(p) => p.name.clone(),
            Component::MultiChoice(m) => m.name(),
            Component::Mccs(s) => format!("ccs({}, {})", s.controller.name(), s.plant.name),
        }
    }

    pub fn to_program(&self) -> Program {
        match self {
            Component::Reactive(c) => c.to_program(),
            Component::Plant(p) => p.to_program(),
            Component::MultiChoice(m) => m.to_program(),
            Component::Mccs(s) => s.to_program(),
        }
    }

    pub fn contract(&self) -> Option<Contract> {
        match self {
            Component::Reactive(c) => c.contract.clone(),
            Component::Plant(p) => p.contract.clone(),
            Component::MultiChoice(m) => m.contract(),
            Component::Mccs(s) => Some(Contract::conjoin(&[
                s.controller_contract()?,
                s.plant_contract()?,
            ])),
        }
    }

    pub fn reactivity(&self) -> Option<Rational> {
        match self {
            Component::Reactive(c) => Some(c.reactivity),
            Component::MultiChoice(m) => Some(m.reactivity),
            Component::Mccs(s) => Some(s.reactivity()),
            Component::Plant(_) => None,
        }
    }

    pub fn controllability(&self) -> Option<Rational> {
        match self {
            Component::Plant(p) => Some(p.controllability),
            Component::Mccs(s) => Some(s.controllability()),
            _ => None,
        }
    }

    pub fn environment(&self) -> Option<&Environment> {
        match self {
            Component::Mccs(s) => Some(&s.environment),
            _ => None,
        }
    }
}

/// `(Env ∧ A ∧ Init) → [α*] G`. A program that already is a loop is not starred twice.
pub fn contract_validity_goal(c: &Component, env: &Environment) -> Result<Formula, ComponentError> {
    let contract = c
        .contract()
        .ok_or_else(|| ComponentError::MissingContract(c.name()))?;
    let program = match c.to_program() {
        p @ Program::Loop(_) => p,
        p => Program::repeat(p),
    };
    Ok(Formula::implies(
        Formula::conj([
            env.constraint.clone(),
            contract.assumptions,
            contract.init,
        ]),
        Formula::boxed(program, contract.guarantees),
    ))
}

/// Allocates `tau_1, tau_2, ...` while honoring explicitly claimed names.
#[derive(Debug, Clone, Default)]
pub struct TimestampRegistry {
    taken: BTreeSet<String>,
    next: usize,
}

impl TimestampRegistry {
    pub fn new() -> TimestampRegistry {
        TimestampRegistry {
            taken: BTreeSet::new(),
            next: 1,
        }
    }

    /// Mark a name as unavailable (explicit claim or use elsewhere).
    pub fn block(&mut self, name: impl Into<String>) {
        self.taken.insert(name.into());
    }

    pub fn claim(&mut self, name: &str) -> bool {
        self.taken.insert(name.to_string())
    }

    pub fn fresh(&mut self) -> String {
        loop {
            let candidate = format!("{TIMESTAMP_PREFIX}{}", self.next.max(1));
            self.next = self.next.max(1) + 1;
            if self.taken.insert(candidate.clone()) {
                return candidate;
            }
        }
    }
}
