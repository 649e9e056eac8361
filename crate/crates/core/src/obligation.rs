//! Proof obligations that the composition theorems reduce to.
//!
//! Each generator mirrors the case split of the corresponding theorem: a base
//! case, a use case and eight induction-step cases over the loop invariant
//! `A_a & G_a & A_b & G_b & J`, followed by the composition-invariant and
//! compatibility side conditions. Obligations are emitted, not proved.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{format_rational, Formula, Program, Rational, Term, CLOCK};
use crate::component::{
    ComponentError, CompositionInvariant, Contract, ControllablePlant, Environment, Mccs,
    MultiChoiceController,
};
use crate::composition::{self, CostModel};
use crate::dsl::{self, Elaborated, Origin, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObligationError {
    #[error("reactivity constant `{constant}` of `{controller}` occurs in its {place}")]
    BoundOccursInBehavior {
        controller: String,
        constant: String,
        place: &'static str,
    },
    #[error(transparent)]
    Component(#[from] ComponentError),
    #[error("theorem {theorem} does not apply: {reason}")]
    NotApplicable { theorem: Theorem, reason: String },
    #[error("obligation `{id}`: {message}")]
    Parse { id: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    /// Single reactive controller with a controllable plant.
    Thm1,
    /// Two multi-choice controllers.
    Thm2,
    /// Two controllable plants.
    Thm3,
    /// Two multi computer-controlled systems.
    Thm4,
    /// Multi-choice controller with a controllable plant.
    Cor1,
}

impl Theorem {
    pub fn as_str(self) -> &'static str {
        match self {
            Theorem::Thm1 => "thm1",
            Theorem::Thm2 => "thm2",
            Theorem::Thm3 => "thm3",
            Theorem::Thm4 => "thm4",
            Theorem::Cor1 => "cor1",
        }
    }

    pub fn parse(s: &str) -> Option<Theorem> {
        Some(match s {
            "thm1" => Theorem::Thm1,
            "thm2" => Theorem::Thm2,
            "thm3" => Theorem::Thm3,
            "thm4" => Theorem::Thm4,
            "cor1" => Theorem::Cor1,
            _ => return None,
        })
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hint {
    ComponentProofReuse,
    FvBvSeparation,
    Compatibility,
    CompositionInvariant,
    DifferentialRefinement,
    /// Follows from the hypotheses by propositional reasoning alone.
    Propositional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    #[default]
    Open,
    /// Closed by exact arithmetic during generation.
    Discharged,
    /// No counterexample at the checked resolution.
    Holds,
    Counterexample,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub theorem: Theorem,
    pub case: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// A supporting fact the obligation's justification relies on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Premise {
    pub label: String,
    pub goal: Formula,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofObligation {
    pub id: String,
    pub provenance: Provenance,
    pub hint: Hint,
    pub goal: Formula,
    pub premises: Vec<Premise>,
    pub status: Status,
}

#[derive(Serialize, Deserialize)]
struct PremiseRecord {
    label: String,
    goal: String,
    status: Status,
}

#[derive(Serialize, Deserialize)]
struct ObligationRecord {
    id: String,
    provenance: Provenance,
    hint: Hint,
    goal: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    premises: Vec<PremiseRecord>,
    status: Status,
}

impl Serialize for ProofObligation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ObligationRecord {
            id: self.id.clone(),
            provenance: self.provenance.clone(),
            hint: self.hint,
            goal: dsl::print::formula(&self.goal),
            premises: self
                .premises
                .iter()
                .map(|p| PremiseRecord {
                    label: p.label.clone(),
                    goal: dsl::print::formula(&p.goal),
                    status: p.status,
                })
                .collect(),
            status: self.status,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProofObligation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = ObligationRecord::deserialize(d)?;
        let parse = |text: &str| {
            dsl::parse_formula(text).map_err(|e| serde::de::Error::custom(format!("{}: {e}", r.id)))
        };
        let goal = parse(&r.goal)?;
        let premises = r
            .premises
            .iter()
            .map(|p| {
                Ok(Premise {
                    label: p.label.clone(),
                    goal: parse(&p.goal)?,
                    status: p.status,
                })
            })
            .collect::<Result<_, D::Error>>()?;
        Ok(ProofObligation {
            id: r.id,
            provenance: r.provenance,
            hint: r.hint,
            goal,
            premises,
            status: r.status,
        })
    }
}

/// One side of a binary composition as seen by the generators.
struct Side {
    name: String,
    contract: Contract,
    /// The component's own program, used by invariant and compatibility goals.
    program: Program,
}

fn required_contract(name: &str, c: Option<Contract>) -> Result<Contract, ObligationError> {
    c.ok_or_else(|| ComponentError::MissingContract(name.to_string()).into())
}

/// `⋀ τ_i = t`: timestamps start at the current time.
fn time_init(timestamps: &[String]) -> Formula {
    Formula::conj(
        timestamps
            .iter()
            .map(|tau| Formula::eq(Term::var(tau), Term::var(CLOCK))),
    )
}

struct Builder {
    theorem: Theorem,
    prefix: String,
    out: Vec<ProofObligation>,
}

impl Builder {
    fn new(theorem: Theorem, prefix: &str) -> Builder {
        Builder {
            theorem,
            prefix: prefix.to_string(),
            out: Vec::new(),
        }
    }

    fn push(&mut self, case: &str, hint: Hint, goal: Formula) -> &mut ProofObligation {
        let id = if let Some(n) = case.strip_prefix("step-") {
            format!("{}{}.step.{n}", self.prefix, self.theorem)
        } else {
            format!("{}{}.{case}", self.prefix, self.theorem)
        };
        self.out.push(ProofObligation {
            id,
            provenance: Provenance {
                theorem: self.theorem,
                case: case.to_string(),
                notes: Vec::new(),
            },
            hint,
            goal,
            premises: Vec::new(),
            status: Status::Open,
        });
        self.out.last_mut().expect("just pushed")
    }
}

fn note(o: &mut ProofObligation, text: impl Into<String>) {
    o.provenance.notes.push(text.into());
}

/// Loop invariant `A_a & G_a & A_b & G_b & J`.
fn loop_invariant(a: &Contract, b: &Contract, j: &Formula) -> Formula {
    Formula::conj_nontrivial([
        a.assumptions.clone(),
        a.guarantees.clone(),
        b.assumptions.clone(),
        b.guarantees.clone(),
        j.clone(),
    ])
}

fn hyp(env: &Environment, f: Formula) -> Formula {
    Formula::conj_nontrivial([env.constraint.clone(), f])
}

fn both(a: &Formula, b: &Formula) -> Formula {
    Formula::conj_nontrivial([a.clone(), b.clone()])
}

/// Base, use, invariant and compatibility obligations shared by every theorem.
#[allow(clippy::too_many_arguments)]
fn frame(
    bld: &mut Builder,
    a: &Side,
    b: &Side,
    j: &Formula,
    env: &Environment,
    timestamps: &[String],
    steps: impl FnOnce(&mut Builder, &Formula),
) {
    let inv = loop_invariant(&a.contract, &b.contract, j);
    let init = Formula::conj_nontrivial([
        a.contract.init.clone(),
        b.contract.init.clone(),
        time_init(timestamps),
    ]);
    let base_hyp = hyp(
        env,
        Formula::conj_nontrivial([
            init.clone(),
            a.contract.assumptions.clone(),
            b.contract.assumptions.clone(),
        ]),
    );
    let base_post = Formula::conj_nontrivial([
        a.contract.guarantees.clone(),
        b.contract.guarantees.clone(),
        j.clone(),
    ]);
    let o = bld.push(
        "base",
        Hint::ComponentProofReuse,
        Formula::implies(base_hyp, base_post),
    );
    note(o, "base cases of both component proofs and jcmp-init");
    bld.push(
        "use",
        Hint::Propositional,
        Formula::implies(
            hyp(env, inv.clone()),
            both(&a.contract.guarantees, &b.contract.guarantees),
        ),
    );

    steps(bld, &hyp(env, inv));

    bld.push(
        "jcmp-init",
        Hint::CompositionInvariant,
        Formula::implies(hyp(env, init), j.clone()),
    );
    let (ja, jb) = match bld.theorem {
        Theorem::Thm1 | Theorem::Cor1 => ("jcmp-ctrl", "jcmp-plant"),
        _ => ("jcmp-a", "jcmp-b"),
    };
    for (case, side) in [(ja, a), (jb, b)] {
        let o = bld.push(
            case,
            Hint::CompositionInvariant,
            Formula::implies(
                hyp(env, j.clone()),
                Formula::boxed(side.program.clone(), j.clone()),
            ),
        );
        note(o, format!("{} preserves J", side.name));
    }
    for (case, x, y) in [("compat-ab", a, b), ("compat-ba", b, a)] {
        let post = Formula::implies(both(&y.contract.guarantees, j), x.contract.assumptions.clone());
        let o = bld.push(
            case,
            Hint::Compatibility,
            Formula::implies(
                hyp(env, x.contract.assumptions.clone()),
                Formula::boxed(y.program.clone(), post),
            ),
        );
        note(o, format!("{} preserves the assumptions of {}", y.name, x.name));
    }
}

fn steps_goal(h: &Formula, p: &Program, post: Formula) -> Formula {
    Formula::implies(h.clone(), Formula::boxed(p.clone(), post))
}

/// Controller with plant: single reactive controller (`Thm1`) or a
/// multi-choice controller (`Cor1`).
pub fn obligations_ccs(
    system: &Mccs,
    invariant: &CompositionInvariant,
) -> Result<Vec<ProofObligation>, ObligationError> {
    let theorem = if system.controller.choices.len() == 1 {
        Theorem::Thm1
    } else {
        Theorem::Cor1
    };
    obligations_ccs_as(theorem, "", system, invariant)
}

fn obligations_ccs_as(
    theorem: Theorem,
    prefix: &str,
    system: &Mccs,
    invariant: &CompositionInvariant,
) -> Result<Vec<ProofObligation>, ObligationError> {
    let ctrl = &system.controller;
    let plant = &system.plant;
    let env = &system.environment;
    let j = &invariant.formula;
    let timestamps = ctrl.timestamps();
    let rctrl = ctrl.to_program();
    let flow = system.flow();
    let plant_delta = plant.relative_program(&timestamps);

    let c = Side {
        name: ctrl.name(),
        contract: required_contract(&ctrl.name(), ctrl.contract())?,
        program: rctrl.clone(),
    };
    let p = Side {
        name: plant.name.clone(),
        contract: required_contract(&plant.name, plant.contract.clone())?,
        program: plant_delta.clone(),
    };
    let (ac, gc) = (&c.contract.assumptions, &c.contract.guarantees);
    let (ap, gp) = (&p.contract.assumptions, &p.contract.guarantees);
    let delta = ctrl.reactivity;
    let big_delta = plant.controllability;

    let mut bld = Builder::new(theorem, prefix);
    frame(&mut bld, &c, &p, j, env, &timestamps, |bld, h| {
        let o = bld.push("step-1", Hint::ComponentProofReuse, steps_goal(h, &rctrl, both(ac, gc)));
        o.premises.push(Premise {
            label: "component induction step".into(),
            goal: Formula::implies(
                hyp(env, gc.clone()),
                Formula::boxed(ctrl.behavior(), gc.clone()),
            ),
            status: Status::Open,
        });
        bld.push("step-2", Hint::CompositionInvariant, steps_goal(h, &rctrl, j.clone()));
        bld.push("step-3", Hint::FvBvSeparation, steps_goal(h, &rctrl, gp.clone()));
        let o = bld.push("step-4", Hint::Compatibility, steps_goal(h, &rctrl, ap.clone()));
        note(o, "from step-1 and step-2 with compat-ba");
        let o = bld.push("step-5", Hint::FvBvSeparation, steps_goal(h, &flow, gc.clone()));
        note(
            o,
            "plant bounded by the reactivity δ as in the proof case; the theorem statement bounds it by Δ",
        );
        for (case, post, component_post) in [
            ("step-6", both(ap, gp), both(ap, gp)),
            ("step-7", j.clone(), j.clone()),
        ] {
            let hint = Hint::DifferentialRefinement;
            let o = bld.push(case, hint, steps_goal(h, &flow, post));
            refinement_premises(o, env, &component_post, &plant_delta, delta, big_delta);
        }
        let o = bld.push("step-8", Hint::Compatibility, steps_goal(h, &flow, ac.clone()));
        note(o, "from step-6 and step-7 with compat-ab");
    });
    Ok(bld.out)
}

/// Both forms of the plant obligation plus the arithmetic link `δ <= Δ`.
fn refinement_premises(
    o: &mut ProofObligation,
    env: &Environment,
    post: &Formula,
    plant_delta: &Program,
    delta: Rational,
    big_delta: Rational,
) {
    o.premises.push(Premise {
        label: "Δ-bounded plant".into(),
        goal: Formula::implies(
            hyp(env, post.clone()),
            Formula::boxed(plant_delta.clone(), post.clone()),
        ),
        status: Status::Open,
    });
    o.premises.push(Premise {
        label: "δ <= Δ".into(),
        goal: Formula::le(Term::constant(delta), Term::constant(big_delta)),
        status: if delta <= big_delta {
            Status::Discharged
        } else {
            Status::Counterexample
        },
    });
    note(
        o,
        format!(
            "differential refinement with δ = {} <= Δ = {}",
            format_rational(&delta),
            format_rational(&big_delta)
        ),
    );
}

/// The reactivity constants of a controller must not occur in its behavior,
/// guarantees or the composition invariant.
pub fn check_bound_nonoccurrence(
    c: &MultiChoiceController,
    j: &Formula,
) -> Result<(), ObligationError> {
    let behavior = c.behavior();
    let guarantees = c.guarantees();
    for rc in &c.choices {
        let constant = rc.bound_constant();
        let place = if behavior.mentions(&constant) {
            Some("behavior")
        } else if guarantees.mentions(&constant) {
            Some("guarantee")
        } else if j.mentions(&constant) {
            Some("composition invariant")
        } else {
            None
        };
        if let Some(place) = place {
            return Err(ObligationError::BoundOccursInBehavior {
                controller: rc.name.clone(),
                constant,
                place,
            });
        }
    }
    Ok(())
}

/// Two multi-choice controllers composed under a shared cost.
pub fn obligations_controllers(
    a: &MultiChoiceController,
    b: &MultiChoiceController,
    cm: &CostModel,
    invariant: &CompositionInvariant,
    env: &Environment,
) -> Result<Vec<ProofObligation>, ObligationError> {
    obligations_controllers_as("", a, b, cm, invariant, env)
}

fn obligations_controllers_as(
    prefix: &str,
    a: &MultiChoiceController,
    b: &MultiChoiceController,
    cm: &CostModel,
    invariant: &CompositionInvariant,
    env: &Environment,
) -> Result<Vec<ProofObligation>, ObligationError> {
    let j = &invariant.formula;
    check_bound_nonoccurrence(a, j)?;
    check_bound_nonoccurrence(b, j)?;
    composition::non_interference_controllers(a, b).into_result()?;
    let joint = composition::compose_controllers(a, b, cm)?;
    let cost = joint.reactivity;
    let rebound = |c: &MultiChoiceController| MultiChoiceController {
        choices: c.choices.clone(),
        reactivity: cost,
    };
    let (ra, rb) = (rebound(a).to_program(), rebound(b).to_program());

    let sa = Side {
        name: a.name(),
        contract: required_contract(&a.name(), a.contract())?,
        program: a.to_program(),
    };
    let sb = Side {
        name: b.name(),
        contract: required_contract(&b.name(), b.contract())?,
        program: b.to_program(),
    };
    let (aa, ga) = (&sa.contract.assumptions, &sa.contract.guarantees);
    let (ab, gb) = (&sb.contract.assumptions, &sb.contract.guarantees);
    let mut timestamps = a.timestamps();
    timestamps.extend(b.timestamps());

    let mut bld = Builder::new(Theorem::Thm2, prefix);
    frame(&mut bld, &sa, &sb, j, env, &timestamps, |bld, h| {
        let cases: [(&str, Hint, &Program, Formula, &Side); 8] = [
            ("step-1", Hint::ComponentProofReuse, &ra, both(aa, ga), &sa),
            ("step-2", Hint::CompositionInvariant, &ra, j.clone(), &sa),
            ("step-3", Hint::FvBvSeparation, &ra, gb.clone(), &sa),
            ("step-4", Hint::Compatibility, &ra, ab.clone(), &sa),
            ("step-5", Hint::FvBvSeparation, &rb, ga.clone(), &sb),
            ("step-6", Hint::ComponentProofReuse, &rb, both(ab, gb), &sb),
            ("step-7", Hint::CompositionInvariant, &rb, j.clone(), &sb),
            ("step-8", Hint::Compatibility, &rb, aa.clone(), &sb),
        ];
        for (case, hint, prog, post, side) in cases {
            let o = bld.push(case, hint, steps_goal(h, prog, post.clone()));
            match hint {
                Hint::ComponentProofReuse | Hint::CompositionInvariant => {
                    o.premises.push(Premise {
                        label: format!("component proof of {}", side.name),
                        goal: Formula::implies(
                            hyp(env, post.clone()),
                            Formula::boxed(side.program.clone(), post),
                        ),
                        status: Status::Open,
                    });
                    note(
                        o,
                        format!(
                            "reactivity constant of {} occurs neither in its behavior nor in its guarantee; cost {}",
                            side.name,
                            format_rational(&cost)
                        ),
                    );
                }
                Hint::Compatibility => {
                    note(o, "from the two preceding cases with compatibility");
                }
                _ => {}
            }
        }
    });
    Ok(bld.out)
}

/// Two controllable plants evolving jointly.
pub fn obligations_plants(
    a: &ControllablePlant,
    b: &ControllablePlant,
    invariant: &CompositionInvariant,
    env: &Environment,
) -> Result<Vec<ProofObligation>, ObligationError> {
    obligations_plants_as("", a, b, invariant, env)
}

fn obligations_plants_as(
    prefix: &str,
    a: &ControllablePlant,
    b: &ControllablePlant,
    invariant: &CompositionInvariant,
    env: &Environment,
) -> Result<Vec<ProofObligation>, ObligationError> {
    let j = &invariant.formula;
    let joint = composition::compose_plants(a, b)?;
    let joint_program = joint.to_program();
    let sa = Side {
        name: a.name.clone(),
        contract: required_contract(&a.name, a.contract.clone())?,
        program: a.to_program(),
    };
    let sb = Side {
        name: b.name.clone(),
        contract: required_contract(&b.name, b.contract.clone())?,
        program: b.to_program(),
    };
    let min_delta = joint.controllability;

    let mut bld = Builder::new(Theorem::Thm3, prefix);
    frame(&mut bld, &sa, &sb, j, env, &[], |bld, h| {
        for (case, own, side) in [("step-1", a, &sa), ("step-2", b, &sb)] {
            let post = both(&side.contract.assumptions, &side.contract.guarantees);
            let o = bld.push(
                case,
                Hint::ComponentProofReuse,
                steps_goal(h, &joint_program, post.clone()),
            );
            let projected = ControllablePlant {
                name: own.name.clone(),
                equations: own.equations.clone(),
                domain: joint.domain.clone(),
                controllability: min_delta,
                contract: None,
            }
            .to_program();
            o.premises.push(Premise {
                label: format!("{} alone on the joint domain", side.name),
                goal: steps_goal(h, &projected, post),
                status: Status::Open,
            });
            note(
                o,
                format!(
                    "separate the other plant by differential ghosts; controllability min = {}",
                    format_rational(&min_delta)
                ),
            );
        }
        bld.push(
            "step-3",
            Hint::CompositionInvariant,
            steps_goal(h, &joint_program, j.clone()),
        );
    });
    Ok(bld.out)
}

/// Two multi computer-controlled systems: controllers, then plants, then the
/// composed controller against the composed plant.
pub fn obligations_mccs(
    a: &Mccs,
    b: &Mccs,
    cm: &CostModel,
    invariant: &CompositionInvariant,
) -> Result<Vec<ProofObligation>, ObligationError> {
    let env = a.environment.merge(&b.environment);
    let composed = composition::compose_mccs(a, b, cm)?;
    let mut parts: Vec<Formula> = Vec::new();
    for f in [&a.invariant.formula, &b.invariant.formula, &invariant.formula] {
        for c in f.conjuncts() {
            if !parts.contains(c) {
                parts.push(c.clone());
            }
        }
    }
    let j = CompositionInvariant {
        formula: Formula::conj_nontrivial(parts),
    };
    let mut out = obligations_controllers_as("thm4.", &a.controller, &b.controller, cm, &j, &env)?;
    out.extend(obligations_plants_as("thm4.", &a.plant, &b.plant, &j, &env)?);
    let whole = composed.with_environment(env)?;
    out.extend(obligations_ccs_as(Theorem::Cor1, "thm4.", &whole, &j)?);
    Ok(out)
}

/// Pick the theorem from how the value was built.
pub fn auto_theorem(e: &Elaborated) -> Option<Theorem> {
    match (&e.origin, &e.value) {
        (Origin::Ccs(c, _), _) => Some(match &c.value {
            Value::Controller(mc) if mc.choices.len() == 1 => Theorem::Thm1,
            _ => Theorem::Cor1,
        }),
        (Origin::Par(..), Value::Controller(_)) => Some(Theorem::Thm2),
        (Origin::Par(..), Value::Plant(_)) => Some(Theorem::Thm3),
        (Origin::Par(..), Value::Mccs(_)) => Some(Theorem::Thm4),
        (Origin::Leaf(_), _) => None,
    }
}

/// Generate obligations for an elaborated system.
pub fn generate(
    e: &Elaborated,
    theorem: Option<Theorem>,
    cm: &CostModel,
    env: &Environment,
) -> Result<Vec<ProofObligation>, ObligationError> {
    let auto = auto_theorem(e);
    let theorem = match (theorem, auto) {
        (Some(t), _) => t,
        (None, Some(t)) => t,
        (None, None) => {
            return Err(ObligationError::NotApplicable {
                theorem: Theorem::Thm1,
                reason: "a single component has no composition obligations".into(),
            })
        }
    };
    let mismatch = |reason: &str| ObligationError::NotApplicable {
        theorem,
        reason: reason.into(),
    };
    let out = match (theorem, &e.origin, &e.value) {
        (Theorem::Thm1 | Theorem::Cor1, _, Value::Mccs(s)) => {
            if theorem == Theorem::Thm1 && s.controller.choices.len() != 1 {
                return Err(mismatch("the controller has several choices"));
            }
            obligations_ccs_as(theorem, "", s, &e.invariant)?
        }
        (Theorem::Thm2, Origin::Par(a, b), _) => match (&a.value, &b.value) {
            (Value::Controller(x), Value::Controller(y)) => {
                obligations_controllers(x, y, cm, &e.invariant, env)?
            }
            (Value::Mccs(x), Value::Mccs(y)) => {
                obligations_controllers(&x.controller, &y.controller, cm, &e.invariant, env)?
            }
            _ => return Err(mismatch("operands are not controllers")),
        },
        (Theorem::Thm3, Origin::Par(a, b), _) => match (&a.value, &b.value) {
            (Value::Plant(x), Value::Plant(y)) => obligations_plants(x, y, &e.invariant, env)?,
            (Value::Mccs(x), Value::Mccs(y)) => {
                obligations_plants(&x.plant, &y.plant, &e.invariant, env)?
            }
            _ => return Err(mismatch("operands are not plants")),
        },
        (Theorem::Thm4, Origin::Par(a, b), _) => match (&a.value, &b.value) {
            (Value::Mccs(x), Value::Mccs(y)) => obligations_mccs(x, y, cm, &e.invariant)?,
            _ => return Err(mismatch("operands are not systems")),
        },
        _ => return Err(mismatch("the system is not built by this composition")),
    };
    debug_assert_eq!(
        out.iter().map(|o| &o.id).collect::<BTreeSet<_>>().len(),
        out.len()
    );
    Ok(out)
}

/// The induction-step, base and use obligations of a set.
pub fn core_cases(obligations: &[ProofObligation]) -> Vec<&ProofObligation> {
    obligations
        .iter()
        .filter(|o| {
            let c = o.provenance.case.as_str();
            c == "base" || c == "use" || c.starts_with("step-")
        })
        .collect()
}
