#![allow(dead_code)]

use std::path::PathBuf;

use ccs_core::ast::{CmpOp, Formula, Program, Rational, Term};
use ccs_core::component::{
    Contract, ControllablePlant, Mccs, MultiChoiceController, ReactiveController,
};
use proptest::prelude::*;

pub fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

pub const CORPUS: [&str; 6] = [
    "watertank.ccs",
    "two_tanks.ccs",
    "watertank_broken_threshold.ccs",
    "watertank_tight_guarantee.ccs",
    "two_tanks_slow.ccs",
    "bad_shared_output.ccs",
];

pub fn term(vars: Vec<String>) -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vars).prop_map(Term::var),
        (-20i64..20).prop_map(Term::int),
        (1i64..200).prop_map(|n| Term::constant(Rational::new(n, 100))),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::mul(a, b)),
            inner.prop_map(Term::neg),
        ]
    })
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(vec![
        CmpOp::Le,
        CmpOp::Lt,
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Gt,
        CmpOp::Ge,
    ])
}

/// First-order formulas without modalities.
pub fn formula(vars: Vec<String>) -> impl Strategy<Value = Formula> {
    let atom = (cmp_op(), term(vars.clone()), term(vars)).prop_map(|(op, a, b)| Formula::cmp(op, a, b));
    let leaf = prop_oneof![8 => atom, 1 => Just(Formula::True), 1 => Just(Formula::False)];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            inner.prop_map(Formula::not),
        ]
    })
}

/// Discrete programs reading `reads` and writing `writes`.
pub fn discrete(reads: Vec<String>, writes: Vec<String>) -> impl Strategy<Value = Program> {
    let all: Vec<String> = reads.iter().chain(&writes).cloned().collect();
    let leaf = prop_oneof![
        (prop::sample::select(writes), term(all.clone())).prop_map(|(x, e)| Program::assign(x, e)),
        formula(all).prop_map(Program::test),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Program::seq(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Program::choice(a, b)),
            inner.prop_map(Program::repeat),
        ]
    })
}

/// Hybrid programs over `vars`, including ODEs with domains.
pub fn hybrid(vars: Vec<String>) -> impl Strategy<Value = Program> {
    let ode = (
        prop::sample::subsequence(vars.clone(), 1..=vars.len().min(3)),
        prop::collection::vec(term(vars.clone()), 3),
        formula(vars.clone()),
    )
        .prop_map(|(xs, rhs, dom)| {
            Program::Ode(ccs_core::ast::OdeSystem {
                equations: xs.into_iter().zip(rhs).collect(),
                domain: dom,
            })
        });
    let leaf = prop_oneof![
        2 => (prop::sample::select(vars.clone()), term(vars.clone())).prop_map(|(x, e)| Program::assign(x, e)),
        2 => formula(vars).prop_map(Program::test),
        1 => ode,
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Program::seq(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Program::choice(a, b)),
            inner.prop_map(Program::repeat),
        ]
    })
}

fn names(prefix: &str, stem: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}_{stem}{k}")).collect()
}

/// Controller `c{i}` reading `p{i}_x*`, writing `p{i}_u*`, with timestamp `tau_{i+1}`.
pub fn controller(i: usize) -> impl Strategy<Value = ReactiveController> {
    let p = format!("p{i}");
    let reads = names(&p, "x", 2);
    let writes = names(&p, "u", 2);
    let out = writes[0].clone();
    (discrete(reads, writes), 1i64..=15, any::<bool>()).prop_map(move |(body, d, with_contract)| {
        let rc = ReactiveController::new(
            format!("c{i}"),
            body,
            Rational::new(d, 100),
            format!("tau_{}", i + 1),
        )
        .expect("well-formed controller");
        if with_contract {
            let g = Formula::ge(Term::var(&out), Term::int(0));
            rc.with_contract(Contract::new(Formula::True, g, Formula::True).unwrap())
        } else {
            rc
        }
    })
}

/// Plant `pl{i}` evolving `p{i}_x*` driven by `p{i}_u*`.
pub fn plant(i: usize) -> impl Strategy<Value = ControllablePlant> {
    let p = format!("p{i}");
    let xs = names(&p, "x", 2);
    let inputs: Vec<String> = xs.iter().chain(&names(&p, "u", 2)).cloned().collect();
    (
        prop::collection::vec(term(inputs), 2),
        prop::option::of(formula(xs.clone())),
        50i64..=100,
    )
        .prop_map(move |(rhs, dom, cap)| {
            ControllablePlant::new(
                format!("pl{i}"),
                xs.iter().cloned().zip(rhs).collect(),
                dom.unwrap_or(Formula::True),
                Rational::new(cap, 100),
            )
            .expect("well-formed plant")
        })
}

pub fn mccs(i: usize) -> impl Strategy<Value = Mccs> {
    (controller(i), plant(i)).prop_map(|(c, p)| {
        Mccs::new(MultiChoiceController::single(c), p).expect("δ ≤ 0.15 < 0.5 ≤ Δ")
    })
}
