//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p ccs-core --test acceptance`.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use ccs_core::ast::{normalize_ac, Rational};
use ccs_core::check::{check_bounded, BoundedConfig, DomainBox, Verdict};
use ccs_core::component::{ComponentError, MultiChoiceController};
use ccs_core::composition::{
    choice_compose, compose_controllers, compose_mccs, compose_plants, ChoiceComponent, CostModel,
};
use ccs_core::dsl::{self, load, parse_model, parse_program, print, DslError, Model, Value};
use ccs_core::obligation::{core_cases, generate, ProofObligation};
use ccs_core::par::{self, Execution};
use ccs_core::semantics::{StaticSemantics, VarSet};
use ccs_core::sim::{batch_member, run_batch, BatchConfig, InitSpec, Simulator};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use common::{controller, corpus, discrete, mccs, plant, CORPUS};

const FV_BV_BUDGET: Duration = Duration::from_millis(1);
const LAW_CASES: u32 = 1000;
const LAW_BUDGET: Duration = Duration::from_secs(30);
const SIM_RUNS: usize = 500;
const SIM_SEED: u64 = 20;
const SIM_HORIZON: f64 = 20.0;
const SIM_BUDGET: Duration = Duration::from_secs(60);
const J_RESIDUAL: f64 = 1e-9;
const CHECK_GRID: usize = 9;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn model(name: &str) -> Model {
    load(corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn names(v: VarSet) -> Vec<String> {
    v.into_iter().collect()
}

fn static_semantics() -> Outcome {
    let p = parse_program("(v := a U v := 2); {x' = v & x <= 5}").map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (fv, bv) = (p.free_vars(), p.bound_vars());
    let elapsed = start.elapsed();
    let (fv, bv) = (names(fv), names(bv));
    ensure(fv == ["a", "x"], format!("FV = {fv:?}"))?;
    ensure(bv == ["v", "x"], format!("BV = {bv:?}"))?;
    ensure(elapsed < FV_BV_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("FV = {{a, x}}, BV = {{v, x}} in {elapsed:?}"))
}

fn ac_laws() -> Outcome {
    let start = Instant::now();
    let runner = || {
        TestRunner::new(Config {
            cases: LAW_CASES,
            failure_persistence: None,
            ..Config::default()
        })
    };
    let cm = || {
        prop::collection::vec(any::<bool>(), 3).prop_map(|bits| {
            bits.iter().enumerate().fold(CostModel::new(), |cm, (i, b)| {
                cm.assign(format!("c{i}"), if *b { "r1" } else { "r0" })
            })
        })
    };

    runner()
        .run(&(controller(0), controller(1), controller(2), cm()), |(a, b, c, cm)| {
            let (a, b, c) = (
                MultiChoiceController::single(a),
                MultiChoiceController::single(b),
                MultiChoiceController::single(c),
            );
            let ab = compose_controllers(&a, &b, &cm).unwrap();
            let ba = compose_controllers(&b, &a, &cm).unwrap();
            prop_assert_eq!(ab.reactivity, ba.reactivity);
            prop_assert_eq!(normalize_ac(&ab.to_program()), normalize_ac(&ba.to_program()));
            let l = compose_controllers(&ab, &c, &cm).unwrap();
            let r = compose_controllers(&a, &compose_controllers(&b, &c, &cm).unwrap(), &cm).unwrap();
            prop_assert_eq!(l.reactivity, r.reactivity);
            prop_assert_eq!(normalize_ac(&l.to_program()), normalize_ac(&r.to_program()));
            Ok(())
        })
        .map_err(|e| format!("controllers: {e}"))?;

    runner()
        .run(&(plant(0), plant(1), plant(2)), |(a, b, c)| {
            let ab = compose_plants(&a, &b).unwrap();
            let ba = compose_plants(&b, &a).unwrap();
            prop_assert_eq!(ab.controllability, ba.controllability);
            prop_assert_eq!(normalize_ac(&ab.to_program()), normalize_ac(&ba.to_program()));
            let l = compose_plants(&ab, &c).unwrap();
            let r = compose_plants(&a, &compose_plants(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(l.controllability, r.controllability);
            prop_assert_eq!(normalize_ac(&l.to_program()), normalize_ac(&r.to_program()));
            Ok(())
        })
        .map_err(|e| format!("plants: {e}"))?;

    runner()
        .run(&(mccs(0), mccs(1), mccs(2), cm()), |(a, b, c, cm)| {
            let same = |x: &ccs_core::component::Mccs, y: &ccs_core::component::Mccs| {
                x.reactivity() == y.reactivity()
                    && x.controllability() == y.controllability()
                    && normalize_ac(&x.to_program()) == normalize_ac(&y.to_program())
            };
            let ab = compose_mccs(&a, &b, &cm).unwrap();
            prop_assert!(same(&ab, &compose_mccs(&b, &a, &cm).unwrap()));
            let l = compose_mccs(&ab, &c, &cm).unwrap();
            let r = compose_mccs(&a, &compose_mccs(&b, &c, &cm).unwrap(), &cm).unwrap();
            prop_assert!(same(&l, &r));
            Ok(())
        })
        .map_err(|e| format!("systems: {e}"))?;

    let choice = |i: usize| {
        (
            discrete(vec![format!("p{i}_x0")], vec![format!("p{i}_u0")]),
            plant(i),
        )
            .prop_map(|(d, p)| {
                let ccs_core::ast::Program::Ode(continuous) = p.user_ode() else {
                    unreachable!()
                };
                ChoiceComponent {
                    discrete: d,
                    continuous,
                }
            })
    };
    runner()
        .run(&(choice(0), choice(1), choice(2)), |(a, b, c)| {
            let n = |x: &ChoiceComponent| normalize_ac(&x.to_program());
            prop_assert_eq!(n(&choice_compose(&a, &b)), n(&choice_compose(&b, &a)));
            prop_assert_eq!(
                n(&choice_compose(&choice_compose(&a, &b), &c)),
                n(&choice_compose(&a, &choice_compose(&b, &c)))
            );
            Ok(())
        })
        .map_err(|e| format!("choice: {e}"))?;

    let elapsed = start.elapsed();
    ensure(elapsed < LAW_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("4 operators x {LAW_CASES} triples, 100% equal, {elapsed:.2?}"))
}

fn cost_model() -> Outcome {
    let m = model("two_tanks.ccs");
    let inputs: Vec<(String, Rational)> = ["wlctrl1", "wlctrl2"]
        .iter()
        .map(|n| (n.to_string(), m.controller(n).unwrap().reactivity))
        .collect();
    let sum = inputs[0].1 + inputs[1].1;
    let max = inputs[0].1.max(inputs[1].1);
    let shared = CostModel::shared("cpu", ["wlctrl1", "wlctrl2"]).cost(&inputs).map_err(|e| e.to_string())?;
    let independent = CostModel::independent(["wlctrl1", "wlctrl2"])
        .cost(&inputs)
        .map_err(|e| e.to_string())?;
    ensure(shared == sum && shared == Rational::new(7, 100), format!("shared = {shared}"))?;
    ensure(
        independent == max && independent == Rational::new(1, 20),
        format!("independent = {independent}"),
    )?;
    Ok(format!("shared {shared}, independent {independent}"))
}

fn gate_arithmetic() -> Outcome {
    let m = model("two_tanks.ccs");
    let Value::Mccs(s) = &m.system("tanks").unwrap().value else {
        return Err("tanks is not a system".into());
    };
    let (c, d) = (s.reactivity(), s.controllability());
    ensure(c == Rational::new(7, 100), format!("C = {c}"))?;
    ensure(d == Rational::new(3, 20), format!("min Δ = {d}"))?;
    match load(corpus("two_tanks_slow.ccs")) {
        Err(DslError::Component {
            source:
                ComponentError::ReactivityExceedsControllability {
                    reactivity,
                    controllability,
                },
            ..
        }) if reactivity == Rational::new(1, 5) && controllability == Rational::new(3, 20) => {}
        other => return Err(format!("slow model: {other:?}")),
    }
    Ok(format!("accepted C = {c} <= {d}; C = 1/5 rejected"))
}

fn obligation_shape() -> Outcome {
    let m = model("watertank.ccs");
    let (_, e) = m.main_system().unwrap();
    let Value::Mccs(s) = &e.value else {
        return Err("not a system".into());
    };
    let obs = generate(e, None, &m.cost_model, &s.environment).map_err(|e| e.to_string())?;
    let core: Vec<&str> = core_cases(&obs).iter().map(|o| o.provenance.case.as_str()).collect();
    let expected = [
        "base", "use", "step-1", "step-2", "step-3", "step-4", "step-5", "step-6", "step-7", "step-8",
    ];
    ensure(core == expected, format!("core cases {core:?}"))?;
    let rest: Vec<&str> = obs
        .iter()
        .map(|o| o.provenance.case.as_str())
        .filter(|c| !expected.contains(c))
        .collect();
    ensure(
        rest == ["jcmp-init", "jcmp-ctrl", "jcmp-plant", "compat-ab", "compat-ba"],
        format!("other cases {rest:?}"),
    )?;
    let golden = fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/watertank.json"),
    )
    .map_err(|e| e.to_string())?;
    let golden: Vec<ProofObligation> = serde_json::from_str(&golden).map_err(|e| e.to_string())?;
    ensure(golden == obs, "differs from tests/golden/watertank.json")?;
    Ok(format!("{} core + {} invariant/compatibility, golden match", core.len(), rest.len()))
}

fn batch(name: &str, runs: usize) -> (Simulator, InitSpec, BatchConfig) {
    let m = model(name);
    let (_, e) = m.main_system().unwrap();
    let Value::Mccs(s) = &e.value else { panic!("{name}") };
    let sim = Simulator::new(s).unwrap();
    let init = InitSpec::new(m.scenario.clone());
    (sim, init, BatchConfig::new(runs, SIM_SEED, SIM_HORIZON))
}

fn simulation_safety() -> Outcome {
    let (sim, init, cfg) = batch("watertank.ccs", SIM_RUNS);
    let start = Instant::now();
    let summary = run_batch(&sim, &init, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(summary.violations == 0, format!("{} violations: {:?}", summary.violations, summary.first_violation))?;
    let wl = summary.extrema["wl"];
    ensure(3.0 <= wl.min && wl.max <= 7.0, format!("wl in [{}, {}]", wl.min, wl.max))?;

    let residuals = par::map_indices(Execution::Parallel, SIM_RUNS, |i| {
        let trace = batch_member(&sim, &init, &cfg, i).expect("run");
        let first = &trace.samples[0].state;
        let start_ok = (first.get("wl").unwrap() - first.get("wlm").unwrap()).abs() == 0.0
            && (3.6..=6.4).contains(&first.get("wl").unwrap());
        let worst = trace
            .samples
            .iter()
            .map(|s| {
                let v = |x: &str| s.state.get(x).unwrap();
                let j = (v("fin") - v("fout")) * (v("t") - v("tau_1")) + v("wlm");
                (v("wl") - j).abs()
            })
            .fold(0.0f64, f64::max);
        (start_ok, worst)
    });
    ensure(residuals.iter().all(|(ok, _)| *ok), "initial state outside wl = wlm in [3.6, 6.4]")?;
    let worst = residuals.iter().map(|(_, r)| *r).fold(0.0f64, f64::max);
    ensure(worst <= J_RESIDUAL, format!("J residual {worst:e}"))?;
    ensure(elapsed < SIM_BUDGET, format!("took {elapsed:?}"))?;

    let (sim, init, cfg) = batch("watertank_broken_threshold.ccs", 50);
    let broken = run_batch(&sim, &init, &cfg).map_err(|e| e.to_string())?;
    ensure(broken.per_monitor["G_wl"] >= 1, "threshold 7.5 mutation has no G_wl violation")?;
    Ok(format!(
        "{SIM_RUNS} runs, 0 violations, wl in [{:.3}, {:.3}], max J residual {worst:.1e}, {elapsed:.2?}; mutation: {} violations",
        wl.min, wl.max, broken.violations
    ))
}

fn tank_box(env: &ccs_core::component::Environment) -> DomainBox {
    DomainBox::new()
        .interval("wl", 3.0, 7.0)
        .interval("wlm", 3.0, 7.0)
        .interval("fin", 0.0, 1.0)
        .interval("t", 0.0, 0.05)
        .point("tau_1", 0.0)
        .with_constants(env)
}

fn bounded_checker() -> Outcome {
    let text = fs::read_to_string(corpus("watertank.ccs")).map_err(|e| e.to_string())?;
    let mut file = parse_model(&text).map_err(|e| e.to_string())?;
    for d in &mut file.decls {
        match &mut d.node {
            dsl::Decl::Contract { assume, guarantee, init, .. } => {
                *assume = ccs_core::ast::Formula::True;
                *guarantee = ccs_core::ast::Formula::True;
                *init = ccs_core::ast::Formula::True;
            }
            dsl::Decl::System { invariants, .. } => invariants.clear(),
            _ => {}
        }
    }
    let trivial = dsl::elaborate(file, None).map_err(|e| e.to_string())?;
    let cfg = BoundedConfig::default().with_grid(CHECK_GRID);
    let (_, e) = trivial.main_system().unwrap();
    let Value::Mccs(s) = &e.value else { return Err("not a system".into()) };
    let obs = generate(e, None, &trivial.cost_model, &s.environment).map_err(|e| e.to_string())?;
    for o in &obs {
        let v = check_bounded(o, &tank_box(&s.environment), &cfg).map_err(|e| e.to_string())?;
        ensure(matches!(v, Verdict::Holds { .. }), format!("{}: {v:?}", o.id))?;
    }

    let m = model("watertank_tight_guarantee.ccs");
    let (_, e) = m.main_system().unwrap();
    let Value::Mccs(s) = &e.value else { return Err("not a system".into()) };
    let tight = generate(e, None, &m.cost_model, &s.environment).map_err(|e| e.to_string())?;
    let step6 = tight.iter().find(|o| o.id == "thm1.step.6").ok_or("no step 6")?;
    let v = check_bounded(step6, &tank_box(&s.environment), &cfg).map_err(|e| e.to_string())?;
    let Verdict::Counterexample { witness, .. } = &v else {
        return Err(format!("tightened guarantee: {v:?}"));
    };
    let wl = witness["wl"];
    ensure(6.0 < wl && wl <= 7.0, format!("witness wl = {wl}"))?;
    Ok(format!("{} trivial-contract obligations hold; tightened step 6 fails at wl = {wl}", obs.len()))
}

fn round_trip() -> Outcome {
    for name in CORPUS {
        let text = fs::read_to_string(corpus(name)).map_err(|e| e.to_string())?;
        let parsed = parse_model(&text).map_err(|e| format!("{name}: {e}"))?;
        let again = parse_model(&print::model(&parsed)).map_err(|e| format!("{name}: {e}"))?;
        ensure(again == parsed, format!("{name} changes under print/parse"))?;
    }
    Ok(format!("{} models are print/parse fixpoints", CORPUS.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("static semantics golden vector", static_semantics),
        ("AC laws of composition", ac_laws),
        ("cost model", cost_model),
        ("gate arithmetic", gate_arithmetic),
        ("obligation shape", obligation_shape),
        ("simulation safety", simulation_safety),
        ("bounded checker", bounded_checker),
        ("corpus round trip", round_trip),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
