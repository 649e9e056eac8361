//! Turn a parsed model file into checked components and systems.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::ast::{format_rational, is_timestamp, CmpOp, Formula, Program, Rational, Term};
use crate::component::{
    ComponentError, CompositionInvariant, Contract, ControllablePlant, Environment, Mccs,
    MultiChoiceController, ReactiveController, TimestampRegistry,
};
use crate::composition::{self, CostModel, GateReport};
use crate::semantics::StaticSemantics;

use super::lexer::Pos;
use super::model::{Decl, Located, ModelFile, ScenarioValue, SystemExpr};
use super::parser::parse_model;
use super::DslError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Controller(MultiChoiceController),
    Plant(ControllablePlant),
    Mccs(Mccs),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Controller(_) => "a controller",
            Value::Plant(_) => "a plant",
            Value::Mccs(_) => "a system",
        }
    }

    pub fn to_program(&self) -> Program {
        match self {
            Value::Controller(c) => c.to_program(),
            Value::Plant(p) => p.to_program(),
            Value::Mccs(s) => s.to_program(),
        }
    }

    pub fn contract(&self) -> Option<Contract> {
        match self {
            Value::Controller(c) => c.contract(),
            Value::Plant(p) => p.contract.clone(),
            Value::Mccs(s) => Some(Contract::conjoin(&[
                s.controller_contract()?,
                s.plant_contract()?,
            ])),
        }
    }
}

/// How a value was built; obligation generation follows this tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Leaf(String),
    Par(Box<Elaborated>, Box<Elaborated>),
    Ccs(Box<Elaborated>, Box<Elaborated>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Elaborated {
    pub value: Value,
    pub origin: Origin,
    /// Composition invariant attached at this node with `with`, conjoined
    /// with the invariants of composed systems.
    pub invariant: CompositionInvariant,
}

impl Elaborated {
    /// Non-interference reports for every composition in the build tree,
    /// innermost first.
    pub fn gates(&self) -> Vec<GateReport> {
        let mut out = Vec::new();
        self.collect_gates(&mut out);
        out
    }

    fn collect_gates(&self, out: &mut Vec<GateReport>) {
        match &self.origin {
            Origin::Leaf(_) => {}
            Origin::Ccs(c, p) => {
                c.collect_gates(out);
                p.collect_gates(out);
                if let (Value::Controller(c), Value::Plant(p)) = (&c.value, &p.value) {
                    out.push(composition::non_interference_ctrl_plant(c, p));
                }
            }
            Origin::Par(a, b) => {
                a.collect_gates(out);
                b.collect_gates(out);
                out.push(match (&a.value, &b.value) {
                    (Value::Controller(x), Value::Controller(y)) => {
                        composition::non_interference_controllers(x, y)
                    }
                    (Value::Plant(x), Value::Plant(y)) => composition::non_interference_plants(x, y),
                    (Value::Mccs(x), Value::Mccs(y)) => composition::non_interference_mccs(x, y),
                    _ => unreachable!("operand kinds are checked during elaboration"),
                });
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub file: ModelFile,
    pub environment: Environment,
    pub controllers: Vec<ReactiveController>,
    pub plants: Vec<ControllablePlant>,
    pub invariants: BTreeMap<String, CompositionInvariant>,
    pub cost_model: CostModel,
    pub scenario: Vec<(String, ScenarioValue)>,
    pub systems: Vec<(String, Elaborated)>,
}

impl Model {
    pub fn system(&self, name: &str) -> Option<&Elaborated> {
        self.systems.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    /// The last declared system, which by convention is the model's top level.
    pub fn main_system(&self) -> Option<(&str, &Elaborated)> {
        self.systems.last().map(|(n, e)| (n.as_str(), e))
    }

    pub fn controller(&self, name: &str) -> Option<&ReactiveController> {
        self.controllers.iter().find(|c| c.name == name)
    }

    pub fn plant(&self, name: &str) -> Option<&ControllablePlant> {
        self.plants.iter().find(|p| p.name == name)
    }
}

impl Model {
    /// The system as one plant under a parallel of controllers, written
    /// back as a model file that loads to an equivalent system.
    pub fn flatten(&self, system: &str) -> Option<ModelFile> {
        let Value::Mccs(s) = &self.system(system)?.value else {
            return None;
        };
        let at = |node| Located {
            node,
            pos: Pos { line: 0, col: 0 },
        };
        let contract = |name: &str, c: &Contract| Decl::Contract {
            name: name.to_string(),
            assume: c.assumptions.clone(),
            guarantee: c.guarantees.clone(),
            init: c.init.clone(),
        };
        let mut decls = vec![at(Decl::Env(s.environment.constraint.clone()))];
        for rc in &s.controller.choices {
            decls.push(at(Decl::Controller {
                name: rc.name.clone(),
                reactivity: rc.reactivity,
                timestamp: Some(rc.timestamp.clone()),
                body: rc.body.clone(),
            }));
        }
        let plant = s.plant.name.replace("||", "_");
        decls.push(at(Decl::Plant {
            name: plant.clone(),
            controllability: s.plant.controllability,
            equations: s.plant.equations.clone(),
            domain: s.plant.domain.clone(),
        }));
        for rc in &s.controller.choices {
            if let Some(c) = &rc.contract {
                decls.push(at(contract(&rc.name, c)));
            }
        }
        if let Some(c) = &s.plant.contract {
            decls.push(at(contract(&plant, c)));
        }
        let mut resources: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for rc in &s.controller.choices {
            if let Some(r) = self.cost_model.resource_of.get(&rc.name) {
                resources.entry(r).or_default().push(rc.name.clone());
            }
        }
        for (name, controllers) in resources {
            decls.push(at(Decl::Resource {
                name: name.to_string(),
                controllers,
            }));
        }
        let mut invariants = Vec::new();
        if s.invariant.formula != Formula::True {
            decls.push(at(Decl::Invariant {
                name: "jcmp".into(),
                formula: s.invariant.formula.clone(),
            }));
            invariants.push("jcmp".to_string());
        }
        if !self.scenario.is_empty() {
            decls.push(at(Decl::Scenario(self.scenario.clone())));
        }
        let ctrl = s
            .controller
            .choices
            .iter()
            .rev()
            .map(|rc| SystemExpr::Name(rc.name.clone()))
            .reduce(|acc, c| SystemExpr::Par(Box::new(c), Box::new(acc)))?;
        decls.push(at(Decl::System {
            name: system.to_string(),
            expr: SystemExpr::Ccs(Box::new(ctrl), Box::new(SystemExpr::Name(plant))),
            invariants,
        }));
        Some(ModelFile { decls })
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<Model, DslError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DslError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_str(&text)
}

pub fn load_str(text: &str) -> Result<Model, DslError> {
    elaborate(parse_model(text)?, None)
}

fn gate(pos: Pos) -> impl Fn(ComponentError) -> DslError {
    move |source| DslError::Component { pos, source }
}

/// Every identifier occurring in a declaration.
fn mentioned(decl: &Decl) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let add_formula = |f: &Formula, out: &mut BTreeSet<String>| {
        out.extend(f.all_vars());
    };
    match decl {
        Decl::Env(f) => add_formula(f, &mut out),
        Decl::Controller { body, .. } => out.extend(body.all_vars()),
        Decl::Plant {
            equations, domain, ..
        } => {
            for (x, e) in equations {
                out.insert(x.clone());
                out.extend(e.free_vars());
            }
            add_formula(domain, &mut out);
        }
        Decl::Contract {
            assume,
            guarantee,
            init,
            ..
        } => {
            for f in [assume, guarantee, init] {
                add_formula(f, &mut out);
            }
        }
        Decl::Invariant { formula, .. } => add_formula(formula, &mut out),
        Decl::Resource { .. } | Decl::Scenario(_) | Decl::System { .. } => {}
    }
    out
}

/// Elaborate a parsed file. `cost_override` entries take precedence over
/// `resource` declarations.
pub fn elaborate(file: ModelFile, cost_override: Option<&CostModel>) -> Result<Model, DslError> {
    let mut names: BTreeMap<String, Pos> = BTreeMap::new();
    for d in &file.decls {
        if let Some(n) = d.node.name() {
            if names.insert(n.to_string(), d.pos).is_some() {
                return Err(DslError::Duplicate {
                    pos: d.pos,
                    name: n.to_string(),
                });
            }
        }
    }

    let env_pos = file
        .decls
        .iter()
        .find(|d| matches!(d.node, Decl::Env(_)))
        .map(|d| d.pos)
        .unwrap_or_default();
    let mut env_formula = file.environment();
    Environment::new(env_formula.clone()).map_err(gate(env_pos))?;

    // Timestamps: explicit claims first, then every mentioned name is taken,
    // then fresh names for the rest in declaration order.
    let mut registry = TimestampRegistry::new();
    let mut explicit: BTreeMap<String, String> = BTreeMap::new();
    for d in &file.decls {
        if let Decl::Controller {
            name,
            timestamp: Some(ts),
            ..
        } = &d.node
        {
            if !registry.claim(ts) {
                return Err(gate(d.pos)(ComponentError::DuplicateTimestamp(ts.clone())));
            }
            explicit.insert(name.clone(), ts.clone());
        }
    }
    for d in &file.decls {
        for x in mentioned(&d.node) {
            if is_timestamp(&x) {
                registry.block(x);
            }
        }
    }

    let mut contracts: BTreeMap<String, (Pos, Contract)> = BTreeMap::new();
    for d in &file.decls {
        if let Decl::Contract {
            name,
            assume,
            guarantee,
            init,
        } = &d.node
        {
            match names.get(name) {
                Some(_) => {}
                None => {
                    return Err(DslError::Name {
                        pos: d.pos,
                        name: name.clone(),
                        what: "component",
                    })
                }
            }
            let c = Contract::new(assume.clone(), guarantee.clone(), init.clone())
                .map_err(gate(d.pos))?;
            if contracts.insert(name.clone(), (d.pos, c)).is_some() {
                return Err(DslError::Duplicate {
                    pos: d.pos,
                    name: format!("contract {name}"),
                });
            }
        }
    }

    let mut controllers = Vec::new();
    let mut plants = Vec::new();
    let mut invariants = BTreeMap::new();
    let mut resources = CostModel::new();
    let mut scenario = Vec::new();
    for d in &file.decls {
        match &d.node {
            Decl::Controller {
                name,
                reactivity,
                body,
                ..
            } => {
                let ts = match explicit.get(name) {
                    Some(ts) => ts.clone(),
                    None => registry.fresh(),
                };
                let mut rc = ReactiveController::new(name.clone(), body.clone(), *reactivity, ts)
                    .map_err(gate(d.pos))?;
                if let Some((_, c)) = contracts.get(name) {
                    rc = rc.with_contract(c.clone());
                }
                bind_bound(&mut env_formula, &rc.bound_constant(), reactivity, d.pos)?;
                controllers.push(rc);
            }
            Decl::Plant {
                name,
                controllability,
                equations,
                domain,
            } => {
                let mut p = ControllablePlant::new(
                    name.clone(),
                    equations.clone(),
                    domain.clone(),
                    *controllability,
                )
                .map_err(gate(d.pos))?;
                if let Some((_, c)) = contracts.get(name) {
                    p = p.with_contract(c.clone());
                }
                bind_bound(&mut env_formula, &p.bound_constant(), controllability, d.pos)?;
                plants.push(p);
            }
            Decl::Invariant { name, formula } => {
                let j = CompositionInvariant::new(formula.clone()).map_err(gate(d.pos))?;
                invariants.insert(name.clone(), j);
            }
            Decl::Resource { name, controllers } => {
                for c in controllers {
                    resources.resource_of.insert(c.clone(), name.clone());
                }
            }
            Decl::Scenario(entries) => scenario.extend(entries.iter().cloned()),
            Decl::Env(_) | Decl::Contract { .. } | Decl::System { .. } => {}
        }
    }
    check_freshness(&file, &controllers, &plants, &contracts)?;

    let environment = Environment {
        constraint: env_formula,
    };
    let cost_model = match cost_override {
        Some(cm) => resources.merge(cm),
        None => resources,
    };

    let mut systems: Vec<(String, Elaborated)> = Vec::new();
    for d in &file.decls {
        if let Decl::System {
            name,
            expr,
            invariants: with,
        } = &d.node
        {
            let scope = Scope {
                controllers: &controllers,
                plants: &plants,
                systems: &systems,
                environment: &environment,
                cost_model: &cost_model,
                pos: d.pos,
            };
            let mut extra = Vec::new();
            for j in with {
                let inv = invariants.get(j).ok_or_else(|| DslError::Name {
                    pos: d.pos,
                    name: j.clone(),
                    what: "invariant",
                })?;
                extra.push(inv.formula.clone());
            }
            let value = scope.eval(expr, &Formula::conj_nontrivial(extra))?;
            systems.push((name.clone(), value));
        }
    }

    Ok(Model {
        file,
        environment,
        controllers,
        plants,
        invariants,
        cost_model,
        scenario,
        systems,
    })
}

/// Record `name = value` in the environment, or check an existing binding.
fn bind_bound(env: &mut Formula, name: &str, value: &Rational, pos: Pos) -> Result<(), DslError> {
    let existing = Environment {
        constraint: env.clone(),
    }
    .constants();
    match existing.get(name) {
        Some(v) if v == value => Ok(()),
        Some(v) => Err(DslError::BoundMismatch {
            pos,
            name: name.to_string(),
            declared: format_rational(value),
            env: format_rational(v),
        }),
        None if env.mentions(name) => Err(DslError::BoundMismatch {
            pos,
            name: name.to_string(),
            declared: format_rational(value),
            env: "a non-constant constraint".into(),
        }),
        None => {
            let binding = Formula::cmp(CmpOp::Eq, Term::var(name), Term::constant(*value));
            *env = Formula::conj_nontrivial([env.clone(), binding]);
            Ok(())
        }
    }
}

/// A timestamp may not appear in any other component's program or contract.
fn check_freshness(
    file: &ModelFile,
    controllers: &[ReactiveController],
    plants: &[ControllablePlant],
    contracts: &BTreeMap<String, (Pos, Contract)>,
) -> Result<(), DslError> {
    for rc in controllers {
        let pos = file
            .decls
            .iter()
            .find(|d| matches!(&d.node, Decl::Controller { name, .. } if *name == rc.name))
            .map(|d| d.pos)
            .unwrap_or_default();
        let clash = |owner: &str| {
            gate(pos)(ComponentError::NonFreshTimestamp {
                name: owner.to_string(),
                timestamp: rc.timestamp.clone(),
            })
        };
        for other in controllers.iter().filter(|o| o.name != rc.name) {
            if other.body.mentions(&rc.timestamp) {
                return Err(clash(&other.name));
            }
        }
        for p in plants {
            if p.user_ode().mentions(&rc.timestamp) {
                return Err(clash(&p.name));
            }
        }
        for (owner, (_, c)) in contracts.iter().filter(|(o, _)| **o != rc.name) {
            if [&c.assumptions, &c.guarantees, &c.init]
                .iter()
                .any(|f| f.free_vars().contains(&rc.timestamp))
            {
                return Err(clash(owner));
            }
        }
    }
    Ok(())
}

struct Scope<'a> {
    controllers: &'a [ReactiveController],
    plants: &'a [ControllablePlant],
    systems: &'a [(String, Elaborated)],
    environment: &'a Environment,
    cost_model: &'a CostModel,
    pos: Pos,
}

impl Scope<'_> {
    fn eval(&self, expr: &SystemExpr, with: &Formula) -> Result<Elaborated, DslError> {
        let mut e = self.eval_inner(expr)?;
        if *with != Formula::True {
            let j = CompositionInvariant {
                formula: Formula::conj_nontrivial([e.invariant.formula.clone(), with.clone()]),
            };
            if let Value::Mccs(s) = &mut e.value {
                s.invariant = j.clone();
            }
            e.invariant = j;
        }
        Ok(e)
    }

    fn eval_inner(&self, expr: &SystemExpr) -> Result<Elaborated, DslError> {
        let err = gate(self.pos);
        match expr {
            SystemExpr::Name(n) => self.lookup(n),
            SystemExpr::Par(a, b) => {
                let (a, b) = (self.eval_inner(a)?, self.eval_inner(b)?);
                let value = match (&a.value, &b.value) {
                    (Value::Controller(x), Value::Controller(y)) => Value::Controller(
                        composition::compose_controllers(x, y, self.cost_model).map_err(&err)?,
                    ),
                    (Value::Plant(x), Value::Plant(y)) => {
                        Value::Plant(composition::compose_plants(x, y).map_err(&err)?)
                    }
                    (Value::Mccs(x), Value::Mccs(y)) => {
                        Value::Mccs(composition::compose_mccs(x, y, self.cost_model).map_err(&err)?)
                    }
                    (x, y) => {
                        return Err(DslError::Kind {
                            pos: self.pos,
                            name: describe(&b.origin),
                            expected: x.kind(),
                            found: y.kind(),
                        })
                    }
                };
                let invariant = match &value {
                    Value::Mccs(s) => s.invariant.clone(),
                    _ => CompositionInvariant::trivial(),
                };
                Ok(Elaborated {
                    value,
                    origin: Origin::Par(Box::new(a), Box::new(b)),
                    invariant,
                })
            }
            SystemExpr::Ccs(c, p) => {
                let (c, p) = (self.eval_inner(c)?, self.eval_inner(p)?);
                let Value::Controller(ctrl) = &c.value else {
                    return Err(DslError::Kind {
                        pos: self.pos,
                        name: describe(&c.origin),
                        expected: "a controller",
                        found: c.value.kind(),
                    });
                };
                let Value::Plant(plant) = &p.value else {
                    return Err(DslError::Kind {
                        pos: self.pos,
                        name: describe(&p.origin),
                        expected: "a plant",
                        found: p.value.kind(),
                    });
                };
                let system = Mccs::new(ctrl.clone(), plant.clone())
                    .and_then(|s| s.with_environment(self.environment.clone()))
                    .map_err(&err)?;
                Ok(Elaborated {
                    value: Value::Mccs(system),
                    origin: Origin::Ccs(Box::new(c), Box::new(p)),
                    invariant: CompositionInvariant::trivial(),
                })
            }
        }
    }

    fn lookup(&self, n: &str) -> Result<Elaborated, DslError> {
        let leaf = |value| Elaborated {
            value,
            origin: Origin::Leaf(n.to_string()),
            invariant: CompositionInvariant::trivial(),
        };
        if let Some(rc) = self.controllers.iter().find(|c| c.name == n) {
            return Ok(leaf(Value::Controller(MultiChoiceController::single(rc.clone()))));
        }
        if let Some(p) = self.plants.iter().find(|p| p.name == n) {
            return Ok(leaf(Value::Plant(p.clone())));
        }
        if let Some((_, e)) = self.systems.iter().find(|(s, _)| s == n) {
            return Ok(e.clone());
        }
        Err(DslError::Name {
            pos: self.pos,
            name: n.to_string(),
            what: "component or system",
        })
    }
}

fn describe(origin: &Origin) -> String {
    match origin {
        Origin::Leaf(n) => n.clone(),
        Origin::Par(a, b) => format!("{} || {}", describe(&a.origin), describe(&b.origin)),
        Origin::Ccs(c, p) => format!("ccs({}, {})", describe(&c.origin), describe(&p.origin)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_decimal;

    const TANK: &str = "
env { fout = 0.75 & delta_wlctrl = 0.05 & Delta_wl = 0.2 }
controller wlctrl reactivity 0.05 timestamp tau_1 {
  wlm := wl; ((?(wlm >= 6.5); fin := 0) U (?(wlm <= 3.5); fin := 1))
}
plant wl controllability 0.2 { wl' = fin - fout & wl >= 0 }
contract wlctrl assume 3 <= wl & wl <= 7 guarantee (wlm <= 3.5 -> fin = 1) & (6.5 <= wlm -> fin = 0) init wl = wlm
contract wl assume (wlm <= 3.5 -> fin = 1) & (6.5 <= wlm -> fin = 0) guarantee 3 <= wl & wl <= 7 init wl = wlm
invariant j { wl = (fin - fout) * (t - tau_1) + wlm }
system tank = ccs(wlctrl, wl) with j
";

    #[test]
    fn loads_the_tank() {
        let m = load_str(TANK).unwrap();
        let (name, sys) = m.main_system().unwrap();
        assert_eq!(name, "tank");
        match &sys.value {
            Value::Mccs(s) => {
                assert_eq!(s.reactivity(), parse_decimal("0.05").unwrap());
                assert!(s.invariant.formula.mentions("tau_1"));
                assert!(s.controller_contract().is_some());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bounds_must_agree_with_env() {
        let src = TANK.replace("delta_wlctrl = 0.05", "delta_wlctrl = 0.1");
        assert!(matches!(
            load_str(&src),
            Err(DslError::BoundMismatch { .. })
        ));
        let src = TANK.replace("& delta_wlctrl = 0.05 & Delta_wl = 0.2", "");
        let m = load_str(&src).unwrap();
        let consts = m.environment.constants();
        assert_eq!(consts["Delta_wl"], parse_decimal("0.2").unwrap());
    }

    #[test]
    fn zero_reactivity_is_located() {
        let src = TANK.replace("reactivity 0.05", "reactivity 0");
        match load_str(&src) {
            Err(DslError::Component {
                pos,
                source: ComponentError::NonPositiveBound { .. },
            }) => assert_eq!(pos.line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unresolved_names() {
        let src = TANK.replace("ccs(wlctrl, wl)", "ccs(wlctrl, wl9)");
        assert!(matches!(load_str(&src), Err(DslError::Name { .. })));
        let src = TANK.replace("with j", "with k");
        assert!(matches!(load_str(&src), Err(DslError::Name { .. })));
        let src = TANK.replace("ccs(wlctrl, wl)", "ccs(wl, wlctrl)");
        assert!(matches!(load_str(&src), Err(DslError::Kind { .. })));
    }

    #[test]
    fn fresh_timestamps_are_allocated() {
        let src = TANK.replace(" timestamp tau_1", "").replace("tau_1", "tau_5");
        let m = load_str(&src).unwrap();
        assert_eq!(m.controllers[0].timestamp, "tau_1");
    }
}
