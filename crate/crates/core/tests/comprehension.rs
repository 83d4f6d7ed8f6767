use std::collections::BTreeSet;

use aclwright_core::comprehension::{
    comprehend, distinct_rules, generate_rules, refine, validate_ir, AppPair, ApplicationField, BackendConfig, ComprehendError,
    DiagnosticKind, Endpoint, assemble_system_prompt, estimate_tokens, render_entry, FeedbackRecord, Ir, IrAction, MockBackend, slice_snmt,
};
use aclwright_core::flowset::{Action, Rule};
use aclwright_core::net::{GatewayPrefix, Snmt, SnmtEntry, TimeRange};
use aclwright_core::scenario::{fig2, generate_scenario, protect_example, Fig2Case, ScenarioParams, Template};
use proptest::prelude::*;

fn triangle_snmt() -> Snmt {
    fig2(Fig2Case::A).network().unwrap().snmt().clone()
}

fn wide_snmt(n: usize) -> Snmt {
    let entries: Vec<SnmtEntry> = (0..n)
        .map(|i| SnmtEntry {
            name: format!("Branch {}", i + 100),
            pairs: vec![GatewayPrefix { gateway: format!("E{}@1", i + 100).parse().unwrap(), prefix: format!("10.{}.0.0/16", i + 100).parse().unwrap() }],
        })
        .collect();
    let finest = entries.iter().map(|e| e.pairs[0].prefix).collect();
    Snmt::new(entries, finest)
}

/// A budget holding about `per_slice` entries next to the fixed sections.
fn budget_for(snmt: &Snmt, per_slice: usize) -> BackendConfig {
    let e = &snmt.entries()[0];
    let base = assemble_system_prompt(std::slice::from_ref(e), &BackendConfig::default()).unwrap().tokens();
    let per = estimate_tokens(&render_entry(e));
    BackendConfig { context_budget: ((base + (per_slice - 1) * per) as f64 / 0.9).ceil() as usize, ..Default::default() }
}

#[test]
fn dns_intent_gives_both_transports_and_four_rules() {
    let snmt = triangle_snmt();
    let c = comprehend("Deny DNS traffic from DC1 to group x.", &MockBackend::new(), &snmt, &BackendConfig::default()).unwrap();
    assert!(c.diagnostics.is_empty(), "{:?}", c.diagnostics);
    let apps: BTreeSet<AppPair> = c.ir.application.pairs.iter().cloned().collect();
    assert_eq!(apps, ["tcp/53".parse().unwrap(), "udp/53".parse().unwrap()].into_iter().collect());
    let rules = generate_rules(&c.ir, Action::Permit).unwrap();
    assert_eq!(rules.len(), 4);
    assert_eq!(c.slices_used, 1);
}

#[test]
fn entity_in_the_last_slice_resolves() {
    let snmt = wide_snmt(40);
    let cfg = budget_for(&snmt, 15);
    let slices = slice_snmt(&snmt, &cfg).unwrap();
    assert!(slices.len() >= 3, "{}", slices.len());
    assert_eq!(slices.concat(), snmt.entries());
    let last = slices.last().unwrap().last().unwrap().name.clone();
    let first = slices[0][0].name.clone();
    let c = comprehend(&format!("Permit SSH traffic from {first} to {last}."), &MockBackend::new(), &snmt, &cfg).unwrap();
    assert_eq!(c.slices_used, slices.len());
    assert_eq!(c.ir.source.name, first);
    assert_eq!(c.ir.destination.name, last);
    assert!(c.diagnostics.is_empty());
}

#[test]
fn campus_fits_one_slice() {
    let s = generate_scenario(&ScenarioParams { template: Template::Campus, ..Default::default() }).unwrap();
    let snmt = s.network().unwrap().snmt().clone();
    let slices = slice_snmt(&snmt, &BackendConfig::default()).unwrap();
    assert_eq!(slices.len(), 1);
    assert_eq!(slices[0].len(), 60);
}

#[test]
fn unknown_entity_is_diagnosed_not_invented() {
    let snmt = wide_snmt(40);
    let cfg = budget_for(&snmt, 15);
    let c = comprehend("Permit SSH traffic from Branch 100 to Atlantis.", &MockBackend::new(), &snmt, &cfg).unwrap();
    assert!(c.ir.destination.not_found);
    assert!(c.diagnostics.iter().any(|d| d.kind == DiagnosticKind::Unresolved));
    assert!(generate_rules(&c.ir, Action::Deny).is_err());
}

#[test]
fn typo_resolves_to_dc1() {
    let c = comprehend("Permit HTTPS traffic from datecetre 1 to DC2.", &MockBackend::new(), &triangle_snmt(), &BackendConfig::default()).unwrap();
    assert_eq!(c.ir.source.name, "DC1");
    assert_eq!(c.ir.source.pairs[0].gateway.to_string(), "R_C@2");
}

#[test]
fn scripted_error_fixed_by_feedback() {
    let snmt = triangle_snmt();
    let mut wrong = comprehend("Deny SSH traffic from DC1 to DC3.", &MockBackend::new(), &snmt, &BackendConfig::default()).unwrap().ir;
    wrong.destination.pairs[0].prefix = "10.2.0.0/16".parse().unwrap();
    let mock = MockBackend::new().with_script([format!("IR:\n{}", wrong.to_json())]);
    let cfg = BackendConfig::default();
    let first = comprehend("Deny SSH traffic from DC1 to DC3.", &mock, &snmt, &cfg).unwrap();
    assert!(!first.diagnostics.is_empty());
    let record = FeedbackRecord { prior: first.ir.clone(), feedback: "destination should be DC3".into(), intent: "Deny SSH traffic from DC1 to DC3.".into(), round: first.round };
    let fixed = refine(&record, &mock, &snmt, &cfg).unwrap();
    assert_eq!(fixed.round, 1);
    assert!(fixed.diagnostics.is_empty());
    assert_eq!(fixed.ir.destination.pairs[0].prefix.to_string(), "10.3.0.0/16");
    let calls = mock.calls();
    assert_eq!(calls.len(), 2);
    assert!(calls[1][1].content.contains("Operator feedback: destination should be DC3"));
    assert!(calls[1][1].content.contains("Previous IR:"));
}

#[test]
fn rounds_are_bounded() {
    let snmt = triangle_snmt();
    let cfg = BackendConfig { max_rounds: 2, ..Default::default() };
    let ir = comprehend("Deny SSH traffic from DC1 to DC3.", &MockBackend::new(), &snmt, &cfg).unwrap().ir;
    let record = FeedbackRecord { prior: ir, feedback: "ok".into(), intent: "Deny SSH traffic from DC1 to DC3.".into(), round: 2 };
    assert!(matches!(refine(&record, &MockBackend::new(), &snmt, &cfg), Err(ComprehendError::RoundsExhausted { rounds: 2 })));
}

#[test]
fn garbage_twice_is_malformed() {
    let mock = MockBackend::new().with_script(["no idea".to_string(), "still none".to_string()]);
    let err = comprehend("Deny SSH traffic from DC1 to DC3.", &mock, &triangle_snmt(), &BackendConfig::default()).unwrap_err();
    assert!(matches!(err, ComprehendError::Malformed { ref raw } if raw == "still none"));
    let repaired = MockBackend::new().with_script(["no idea".to_string()]);
    assert!(comprehend("Deny SSH traffic from DC1 to DC3.", &repaired, &triangle_snmt(), &BackendConfig::default()).is_ok());
}

#[test]
fn protect_intent_of_the_example() {
    let s = protect_example();
    let snmt = s.network().unwrap().snmt().clone();
    let spec = &s.intents[0].protects[0];
    let c = comprehend(&spec.text, &MockBackend::new(), &snmt, &BackendConfig::default()).unwrap();
    assert_eq!(c.ir.action, IrAction::Protect);
    let rules = distinct_rules(&generate_rules(&c.ir, Action::Deny).unwrap());
    assert_eq!(rules, spec.rules);
}

fn same_rules(a: &[Rule], b: &[Rule]) -> bool {
    a.iter().collect::<BTreeSet<_>>() == b.iter().collect::<BTreeSet<_>>()
}

#[test]
fn generated_intents_comprehend_to_their_truth() {
    for (template, seed) in [(Template::Cloud, 1), (Template::Cloud, 2), (Template::Campus, 3)] {
        let p = ScenarioParams { template, seed, typo_rate: 0.3, protect_intents: 2, ..Default::default() };
        let s = generate_scenario(&p).unwrap();
        let snmt = s.network().unwrap().snmt().clone();
        for i in &s.intents {
            let c = comprehend(&i.text, &MockBackend::new(), &snmt, &BackendConfig::default()).unwrap();
            assert!(c.diagnostics.is_empty(), "{}: {:?}", i.text, c.diagnostics);
            assert_eq!(c.ir.action.as_action(), Some(i.action));
            let rules = distinct_rules(&generate_rules(&c.ir, i.action.opposite()).unwrap());
            assert!(same_rules(&rules, &i.rules), "{}", i.text);
            for pr in &i.protects {
                let c = comprehend(&pr.text, &MockBackend::new(), &snmt, &BackendConfig::default()).unwrap();
                let rules = distinct_rules(&generate_rules(&c.ir, i.action.opposite()).unwrap());
                assert!(same_rules(&rules, &pr.rules), "{}", pr.text);
            }
        }
    }
}

fn arb_ir() -> impl Strategy<Value = Ir> {
    let pair = |tag: &'static str| {
        (0u8..200, 1u16..9).prop_map(move |(n, g)| GatewayPrefix {
            gateway: format!("{tag}{g}@1").parse().unwrap(),
            prefix: format!("10.{n}.0.0/16").parse().unwrap(),
        })
    };
    let endpoint = |tag: &'static str| {
        prop_oneof![Just(Endpoint::any()), prop::collection::vec(pair(tag), 1..5).prop_map(|pairs| Endpoint { name: "e".into(), pairs, not_found: false })]
    };
    let app = prop_oneof![
        Just(ApplicationField::any()),
        prop::collection::vec((prop::bool::ANY, 1u16..1000), 1..4).prop_map(|v| ApplicationField {
            name: "a".into(),
            pairs: v.into_iter().map(|(t, p)| AppPair { protocol: if t { "tcp" } else { "udp" }.into(), port: Some(p) }).collect(),
        })
    ];
    (endpoint("S"), endpoint("D"), app, prop::bool::ANY).prop_map(|(source, destination, application, deny)| Ir {
        source,
        destination,
        application,
        time: TimeRange::ANY,
        action: if deny { IrAction::Deny } else { IrAction::Permit },
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn rule_count_is_the_product(ir in arb_ir()) {
        let n = |k: usize| k.max(1);
        let want = n(ir.source.pairs.len()) * n(ir.destination.pairs.len()) * n(ir.application.pairs.len());
        prop_assert_eq!(generate_rules(&ir, Action::Permit).unwrap().len(), want);
    }
}

#[test]
fn validation_catches_cross_entity_pairs() {
    let snmt = triangle_snmt();
    let mut ir = comprehend("Deny SSH traffic from DC1 to DC3.", &MockBackend::new(), &snmt, &BackendConfig::default()).unwrap().ir;
    ir.source.pairs = snmt.entry("DC2").unwrap().pairs.clone();
    let d = validate_ir(&ir, &snmt);
    assert!(d.iter().any(|x| x.kind == DiagnosticKind::Dependency));
}
