//! Timed parallel composition of controllers, plants and multi
//! computer-controlled systems, the max+ cost model, and the
//! non-interference gates guarding every composition.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::{Formula, OdeSystem, Program, Rational};
use crate::component::{
    ComponentError, CompositionInvariant, Contract, ControllablePlant, Mccs,
    MultiChoiceController,
};
use crate::semantics::{StaticSemantics, VarSet};

/// Maps each atomic controller to the compute resource it runs on.
///
/// The induced cost of a multiset of controllers is the maximum, over
/// resources, of the summed reactivities on that resource.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostModel {
    pub resource_of: BTreeMap<String, String>,
}

impl CostModel {
    pub fn new() -> CostModel {
        CostModel::default()
    }

    pub fn assign(mut self, controller: impl Into<String>, resource: impl Into<String>) -> Self {
        self.resource_of.insert(controller.into(), resource.into());
        self
    }

    /// Every named controller on one shared resource.
    pub fn shared<S: Into<String>>(resource: &str, controllers: impl IntoIterator<Item = S>) -> Self {
        let mut cm = CostModel::new();
        for c in controllers {
            cm.resource_of.insert(c.into(), resource.to_string());
        }
        cm
    }

    /// Every named controller on its own resource.
    pub fn independent<S: Into<String>>(controllers: impl IntoIterator<Item = S>) -> Self {
        let mut cm = CostModel::new();
        for c in controllers {
            let c = c.into();
            cm.resource_of.insert(c.clone(), c);
        }
        cm
    }

    pub fn merge(&self, other: &CostModel) -> CostModel {
        let mut out = self.clone();
        out.resource_of
            .extend(other.resource_of.iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }

    pub fn cost(&self, controllers: &[(String, Rational)]) -> Result<Rational, ComponentError> {
        cost(self, controllers)
    }
}

pub fn cost(cm: &CostModel, controllers: &[(String, Rational)]) -> Result<Rational, ComponentError> {
    let mut per_resource: BTreeMap<&str, Rational> = BTreeMap::new();
    for (name, delta) in controllers {
        let resource = cm
            .resource_of
            .get(name)
            .ok_or_else(|| ComponentError::UnmappedController(name.clone()))?;
        *per_resource
            .entry(resource.as_str())
            .or_insert_with(|| Rational::from_integer(0)) += *delta;
    }
    per_resource
        .into_values()
        .max()
        .ok_or(ComponentError::EmptyController)
}

/// One failed emptiness check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// e.g. `fv(G_a) ∩ bv(b)`
    pub check: String,
    pub left: String,
    pub right: String,
    pub variables: VarSet,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} for `{}` / `{}` = {}",
            self.check, self.left, self.right, self.variables
        )
    }
}

/// Outcome of a gate: failed checks are violations, advisory findings are warnings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GateReport {
    pub gate: String,
    pub checks: Vec<String>,
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl GateReport {
    fn new(gate: &str) -> GateReport {
        GateReport {
            gate: gate.to_string(),
            ..GateReport::default()
        }
    }

    fn require(&mut self, check: &str, left: &str, right: &str, a: &VarSet, b: &VarSet) {
        self.checks.push(check.to_string());
        let overlap = a.intersection(b);
        if !overlap.is_empty() {
            self.violations.push(Violation {
                check: check.to_string(),
                left: left.to_string(),
                right: right.to_string(),
                variables: overlap,
            });
        }
    }

    fn advise(&mut self, check: &str, left: &str, right: &str, a: &VarSet, b: &VarSet) {
        let overlap = a.intersection(b);
        if !overlap.is_empty() {
            self.warnings.push(Violation {
                check: check.to_string(),
                left: left.to_string(),
                right: right.to_string(),
                variables: overlap,
            });
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<GateReport, ComponentError> {
        if self.passed() {
            Ok(self)
        } else {
            Err(ComponentError::Interference(self.violations))
        }
    }

    pub fn absorb(&mut self, other: GateReport) {
        self.checks.extend(other.checks);
        self.violations.extend(other.violations);
        self.warnings.extend(other.warnings);
    }
}

/// Outputs separated and neither controller writes what the other guarantees.
///
/// The self check `fv(G_a) ∩ bv(a)` is reported as a warning only.
pub fn non_interference_controllers(
    a: &MultiChoiceController,
    b: &MultiChoiceController,
) -> GateReport {
    let (na, nb) = (a.name(), b.name());
    let (bv_a, bv_b) = (a.to_program().bound_vars(), b.to_program().bound_vars());
    let (g_a, g_b) = (a.guarantees().free_vars(), b.guarantees().free_vars());
    let mut report = GateReport::new("controllers");
    report.require("bv(a) ∩ bv(b)", &na, &nb, &bv_a, &bv_b);
    report.require("fv(G_a) ∩ bv(b)", &na, &nb, &g_a, &bv_b);
    report.require("fv(G_b) ∩ bv(a)", &nb, &na, &g_b, &bv_a);
    report.advise("fv(G_a) ∩ bv(a)", &na, &na, &g_a, &bv_a);
    report.advise("fv(G_b) ∩ bv(b)", &nb, &nb, &g_b, &bv_b);
    report
}

/// Neither ODE writes what the other's right-hand sides or guarantee read.
pub fn non_interference_plants(a: &ControllablePlant, b: &ControllablePlant) -> GateReport {
    let (na, nb) = (&a.name, &b.name);
    let (bv_a, bv_b) = (a.user_ode().bound_vars(), b.user_ode().bound_vars());
    let rhs = |p: &ControllablePlant| -> VarSet {
        let mut s = VarSet::new();
        for (_, e) in &p.equations {
            s.extend(e.free_vars());
        }
        s
    };
    let guarantee = |p: &ControllablePlant| -> VarSet {
        p.contract
            .as_ref()
            .map(|c| c.guarantees.free_vars())
            .unwrap_or_default()
    };
    let mut report = GateReport::new("plants");
    report.require("bv(ode_a) ∩ bv(ode_b)", na, nb, &bv_a, &bv_b);
    report.require("bv(ode_a) ∩ fv(rhs_b)", na, nb, &bv_a, &rhs(b));
    report.require("bv(ode_b) ∩ fv(rhs_a)", nb, na, &bv_b, &rhs(a));
    report.require("bv(ode_a) ∩ fv(G_b)", na, nb, &bv_a, &guarantee(b));
    report.require("bv(ode_b) ∩ fv(G_a)", nb, na, &bv_b, &guarantee(a));
    report
}

pub fn non_interference_ctrl_plant(c: &MultiChoiceController, p: &ControllablePlant) -> GateReport {
    let (nc, np) = (c.name(), p.name.clone());
    let bv_ctrl = c.to_program().bound_vars();
    let bv_ode = p.user_ode().bound_vars();
    let g_ctrl = c.guarantees().free_vars();
    let g_plant = p
        .contract
        .as_ref()
        .map(|k| k.guarantees.free_vars())
        .unwrap_or_default();
    let mut report = GateReport::new("controller-plant");
    report.require("fv(G_ctrl) ∩ bv(ode)", &nc, &np, &g_ctrl, &bv_ode);
    report.require("fv(G_plant) ∩ bv(ctrl)", &np, &nc, &g_plant, &bv_ctrl);
    report.require("bv(ctrl) ∩ bv(ode)", &nc, &np, &bv_ctrl, &bv_ode);
    report
}

/// Union of all choices, each re-guarded with the combined cost.
pub fn compose_controllers(
    a: &MultiChoiceController,
    b: &MultiChoiceController,
    cm: &CostModel,
) -> Result<MultiChoiceController, ComponentError> {
    non_interference_controllers(a, b).into_result()?;
    let choices: Vec<_> = a.choices.iter().chain(&b.choices).cloned().collect();
    let inputs: Vec<(String, Rational)> = choices
        .iter()
        .map(|c| (c.name.clone(), c.reactivity))
        .collect();
    let reactivity = cm.cost(&inputs)?;
    MultiChoiceController::new(choices, reactivity)
}

/// Joint ODE with conjoined domains and the smaller controllability.
pub fn compose_plants(
    a: &ControllablePlant,
    b: &ControllablePlant,
) -> Result<ControllablePlant, ComponentError> {
    non_interference_plants(a, b).into_result()?;
    let equations = a.equations.iter().chain(&b.equations).cloned().collect();
    let domain = Formula::conj_nontrivial([a.domain.clone(), b.domain.clone()]);
    let controllability = a.controllability.min(b.controllability);
    let contract = match (&a.contract, &b.contract) {
        (Some(x), Some(y)) => Some(Contract::conjoin([x, y])),
        _ => None,
    };
    let mut plant = ControllablePlant::new(
        format!("{}||{}", a.name, b.name),
        equations,
        domain,
        controllability,
    )?;
    plant.contract = contract;
    Ok(plant)
}

/// Every pairwise gate between the parts of two systems.
pub fn non_interference_mccs(a: &Mccs, b: &Mccs) -> GateReport {
    let mut report = GateReport::new("mccs");
    report.absorb(non_interference_controllers(&a.controller, &b.controller));
    report.absorb(non_interference_plants(&a.plant, &b.plant));
    report.absorb(non_interference_ctrl_plant(&a.controller, &b.plant));
    report.absorb(non_interference_ctrl_plant(&b.controller, &a.plant));
    report
}

pub fn compose_mccs(a: &Mccs, b: &Mccs, cm: &CostModel) -> Result<Mccs, ComponentError> {
    non_interference_mccs(a, b).into_result()?;
    let controller = compose_controllers(&a.controller, &b.controller, cm)?;
    let plant = compose_plants(&a.plant, &b.plant)?;
    if controller.reactivity > plant.controllability {
        return Err(ComponentError::ReactivityExceedsControllability {
            reactivity: controller.reactivity,
            controllability: plant.controllability,
        });
    }
    let env = a.environment.merge(&b.environment);
    let invariant = CompositionInvariant::new(Formula::conj_nontrivial([
        a.invariant.formula.clone(),
        b.invariant.formula.clone(),
    ]))?;
    Ok(Mccs::new(controller, plant)?
        .with_environment(env)?
        .with_invariant(invariant))
}

/// Untimed `(disc ∪ cont)*` component, the pattern every timed operator refines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceComponent {
    pub discrete: Program,
    pub continuous: OdeSystem,
}

impl ChoiceComponent {
    pub fn to_program(&self) -> Program {
        Program::repeat(Program::choice(
            self.discrete.clone(),
            Program::Ode(self.continuous.clone()),
        ))
    }
}

/// `((d1 ∪ d2) ∪ {x1' = θ1, x2' = θ2 & H1 ∧ H2})*`
pub fn choice_compose(a: &ChoiceComponent, b: &ChoiceComponent) -> ChoiceComponent {
    ChoiceComponent {
        discrete: Program::choice(a.discrete.clone(), b.discrete.clone()),
        continuous: OdeSystem {
            equations: a
                .continuous
                .equations
                .iter()
                .chain(&b.continuous.equations)
                .cloned()
                .collect(),
            domain: Formula::and(a.continuous.domain.clone(), b.continuous.domain.clone()),
        },
    }
}
