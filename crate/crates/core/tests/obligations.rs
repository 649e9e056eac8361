mod common;

use ccs_core::check::{check_bounded, BoundedConfig, DomainBox, Verdict};
use ccs_core::dsl::{load, load_str, Model, Value};
use ccs_core::export;
use ccs_core::obligation::{auto_theorem, core_cases, generate, ObligationError, ProofObligation, Status, Theorem};
use ccs_core::semantics::StaticSemantics;
use common::corpus;

fn obligations(m: &Model, system: &str, theorem: Option<Theorem>) -> Result<Vec<ProofObligation>, ObligationError> {
    let e = m.system(system).unwrap();
    let env = match &e.value {
        Value::Mccs(s) => s.environment.clone(),
        _ => Default::default(),
    };
    generate(e, theorem, &m.cost_model, &env)
}

const CONTROLLERS: &str = "
controller a reactivity 0.01 timestamp tau_1 { ?(x <= LIMIT); u := 1; }
controller b reactivity 0.02 timestamp tau_2 { v := 0; }
contract a assume true guarantee u = 1 init true
contract b assume true guarantee v = 0 init true
resource cpu { a, b }
system both = a || b
";

#[test]
fn theorem_is_picked_from_the_construction() {
    let tank = load(corpus("watertank.ccs")).unwrap();
    assert_eq!(auto_theorem(tank.system("tank").unwrap()), Some(Theorem::Thm1));
    let tanks = load(corpus("two_tanks.ccs")).unwrap();
    assert_eq!(auto_theorem(tanks.system("tank1").unwrap()), Some(Theorem::Thm1));
    assert_eq!(auto_theorem(tanks.system("tanks").unwrap()), Some(Theorem::Thm4));
    let ctrl = load_str(&CONTROLLERS.replace("LIMIT", "1")).unwrap();
    assert_eq!(auto_theorem(ctrl.system("both").unwrap()), Some(Theorem::Thm2));
}

#[test]
fn single_controller_shape() {
    let m = load(corpus("watertank.ccs")).unwrap();
    let obs = obligations(&m, "tank", None).unwrap();
    assert_eq!(obs.len(), 15);
    assert_eq!(core_cases(&obs).len(), 10);
    assert!(obs.iter().all(|o| o.id.starts_with("thm1.") && o.status == Status::Open));
    assert_eq!(obs[7].id, "thm1.step.6");
    let cor = obligations(&m, "tank", Some(Theorem::Cor1)).unwrap();
    assert_eq!(cor.len(), 15);
    assert!(cor[0].id.starts_with("cor1."));
}

#[test]
fn nested_ids_of_the_full_composition() {
    let m = load(corpus("two_tanks.ccs")).unwrap();
    let obs = obligations(&m, "tanks", None).unwrap();
    assert_eq!(obs.len(), 40);
    for (prefix, count) in [("thm4.thm2.", 15), ("thm4.thm3.", 10), ("thm4.cor1.", 15)] {
        assert_eq!(obs.iter().filter(|o| o.id.starts_with(prefix)).count(), count, "{prefix}");
    }
    let steps = obs.iter().filter(|o| o.id.starts_with("thm4.thm3.step.")).count();
    assert_eq!(steps, 3);
}

#[test]
fn goals_only_mention_model_variables() {
    let m = load(corpus("two_tanks.ccs")).unwrap();
    let known = [
        "t", "tau_1", "tau_2", "wl1", "wl2", "wlm1", "wlm2", "fin", "fout1", "fout2",
        "delta_wlctrl1", "delta_wlctrl2", "Delta_wl1", "Delta_wl2",
    ];
    for o in obligations(&m, "tanks", None).unwrap() {
        for x in o.goal.all_vars() {
            assert!(known.contains(&x.as_str()), "{}: {x}", o.id);
        }
    }
}

#[test]
fn mismatched_theorems_are_rejected() {
    let m = load(corpus("watertank.ccs")).unwrap();
    for t in [Theorem::Thm2, Theorem::Thm3, Theorem::Thm4] {
        assert!(matches!(
            obligations(&m, "tank", Some(t)),
            Err(ObligationError::NotApplicable { .. })
        ));
    }
}

#[test]
fn reactivity_constant_must_not_occur_in_behavior() {
    let ok = load_str(&CONTROLLERS.replace("LIMIT", "1")).unwrap();
    assert_eq!(obligations(&ok, "both", None).unwrap().len(), 15);
    let bad = load_str(&CONTROLLERS.replace("LIMIT", "delta_a")).unwrap();
    match obligations(&bad, "both", None) {
        Err(ObligationError::BoundOccursInBehavior { controller, constant, place }) => {
            assert_eq!((controller.as_str(), constant.as_str(), place), ("a", "delta_a", "behavior"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn json_round_trip() {
    let m = load(corpus("two_tanks.ccs")).unwrap();
    let obs = obligations(&m, "tanks", None).unwrap();
    let text = serde_json::to_string(&obs).unwrap();
    let back: Vec<ProofObligation> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, obs);
}

#[test]
fn archive_has_one_entry_per_obligation() {
    let m = load(corpus("watertank.ccs")).unwrap();
    let obs = obligations(&m, "tank", None).unwrap();
    let kyx = export::archive(&obs);
    assert_eq!(kyx.matches("ArchiveEntry ").count(), 15);
    assert_eq!(kyx.matches("\nEnd.\n").count(), 15);
    assert!(kyx.is_ascii());
}

#[test]
fn statuses_follow_verdicts() {
    let m = load(corpus("watertank.ccs")).unwrap();
    let obs = obligations(&m, "tank", None).unwrap();
    let init = obs.iter().find(|o| o.id == "thm1.jcmp-init").unwrap();
    let b = DomainBox::new()
        .interval("wl", 3.0, 7.0)
        .interval("wlm", 3.0, 7.0)
        .interval("fin", 0.0, 1.0)
        .interval("t", 0.0, 0.05)
        .point("tau_1", 0.0)
        .with_constants(&match &m.system("tank").unwrap().value {
            Value::Mccs(s) => s.environment.clone(),
            _ => unreachable!(),
        });
    let v = check_bounded(init, &b, &BoundedConfig::default()).unwrap();
    assert!(matches!(v, Verdict::Holds { .. }), "{v:?}");
    assert_eq!(v.status(), Status::Holds);
}
