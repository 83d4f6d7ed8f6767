use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use aclwright_core::conflict::Intent;
use aclwright_core::deploy::{Limits, Strategy};
use aclwright_core::engine::{Engine, Evaluation};
use aclwright_core::flowset::{Action, Rule};
use aclwright_core::net::{Interface, Prefix, ProtocolPort};
use aclwright_core::scenario::{composite, fig2, fig3, protect_example, Fig2Case, Scenario};

fn engine(s: &Scenario) -> Engine {
    let rules: Vec<&Rule> = s
        .acls
        .rules()
        .chain(s.intents.iter().flat_map(|i| i.rules.iter().chain(i.protects.iter().flat_map(|p| &p.rules))))
        .collect();
    Engine::new(Arc::new(s.network().unwrap()), &s.apps, rules).unwrap()
}

fn intents(s: &Scenario) -> Vec<Intent> {
    s.intents.iter().map(|i| Intent::new(i.id, i.action, i.rules.clone())).collect()
}

fn protects(s: &Scenario) -> BTreeMap<usize, Vec<Vec<Rule>>> {
    s.intents.iter().map(|i| (i.id, i.protects.iter().map(|p| p.rules.clone()).collect())).collect()
}

fn evaluate(s: &Scenario) -> (Engine, Evaluation) {
    let e = engine(s);
    let ev = e.evaluate(&intents(s), &protects(s), &s.acls, &Strategy::ALL, Limits::default()).unwrap();
    (e, ev)
}

fn p(s: &str) -> Prefix {
    s.parse().unwrap()
}

fn iface(s: &str) -> Interface {
    s.parse().unwrap()
}

#[test]
fn fig2_case_a_conflicts_on_the_traversed_interface() {
    let s = fig2(Fig2Case::A);
    let (e, ev) = evaluate(&s);
    assert_eq!(ev.conflicts.len(), 1);
    let c = &ev.conflicts[0];
    assert_eq!(c.interface, iface("R_B@2"));
    assert_eq!(c.position, 1);
    let flows: BTreeSet<_> = c.flows.elements().map(|(_, f)| e.gft.key(f)).collect();
    let http = ProtocolPort::tcp(80);
    assert!(flows.iter().all(|k| k.src == p("10.2.0.0/16") && k.dst == p("10.3.0.0/16") && k.app == http));
    assert_eq!(flows.len(), 1);
}

#[test]
fn fig2_cases_b_and_c_have_no_conflict() {
    for case in [Fig2Case::B, Fig2Case::C] {
        let (_, ev) = evaluate(&fig2(case));
        assert!(ev.conflicts.is_empty(), "{case:?}: {:?}", ev.conflicts);
    }
}

#[test]
fn fig3_plan_sizes() {
    let (_, ev) = evaluate(&fig3());
    assert_eq!(ev.objective(Strategy::Endpoint), Some(7));
    assert_eq!(ev.objective(Strategy::Bottleneck), Some(4));
    assert_eq!(ev.objective(Strategy::Optimized), Some(3));
    for (s, d) in &ev.deployments {
        assert!(d.verification.passed(), "{s}: {:?}", d.verification);
    }
}

#[test]
fn protect_flows_are_the_http_part_of_the_conflicts() {
    let s = protect_example();
    let (e, ev) = evaluate(&s);
    let r = &ev.resolved[0];
    let got: BTreeSet<_> = r.protect_flows.elements().map(|(a, f)| (a, e.gft.key(f))).collect();
    let mut want = BTreeSet::new();
    let (dc1, dc2, dc3) = (p("10.1.0.0/16"), p("10.2.0.0/16"), p("10.3.0.0/16"));
    for atom in 0..e.ctx.time.len() {
        for k in (0..e.gft.len()).map(|i| e.gft.key(i)) {
            let http = k.app == ProtocolPort::tcp(80);
            if http && ((k.src == dc1 && k.dst == dc2) || (k.src == dc3 && k.dst != dc3)) {
                want.insert((atom, k));
            }
        }
    }
    assert_eq!(got, want);
    assert!(r.protect_rules.iter().all(|x| x.action == Action::Deny));
    assert!(r.protect_at.values().flatten().all(|x| x.action == Action::Deny));
    let d = &ev.deployments[&Strategy::Optimized];
    assert!(d.verification.passed(), "{:?}", d.verification);
}

#[test]
fn composite_keeps_both_results() {
    let (_, ev) = evaluate(&composite());
    assert_eq!(ev.objective(Strategy::Optimized), Some(3 + 1));
    assert!(ev.deployments.values().all(|d| d.verification.passed()));
}

#[test]
fn fixtures_round_trip_as_json() {
    for s in [fig2(Fig2Case::A), fig3(), protect_example(), composite()] {
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }
}
