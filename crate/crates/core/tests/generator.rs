use std::sync::Arc;

use aclwright_core::engine::Engine;
use aclwright_core::flowset::Action;
use aclwright_core::scenario::{conflict_ratio, fig3, generate_scenario, ScenarioParams, Template};

fn params(template: Template, seed: u64, ratio: f64) -> ScenarioParams {
    ScenarioParams { template, seed, conflict_ratio: ratio, ..Default::default() }
}

fn measured(p: &ScenarioParams) -> f64 {
    let s = generate_scenario(p).unwrap();
    let rules: Vec<_> = s.acls.rules().chain(s.intents.iter().flat_map(|i| &i.rules)).collect();
    let e = Engine::new(Arc::new(s.network().unwrap()), &s.apps, rules).unwrap();
    conflict_ratio(&e, &s.intents, &s.acls).unwrap()
}

#[test]
fn mean_ratio_tracks_target() {
    let ratios: Vec<f64> = (0..20).map(|seed| measured(&params(Template::Cloud, seed, 0.5))).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((0.45..=0.55).contains(&mean), "{ratios:?}");
    assert!(ratios.iter().all(|r| (r - 0.5).abs() <= 0.05), "{ratios:?}");
}

#[test]
fn extreme_targets() {
    for target in [0.0, 1.0] {
        let r = measured(&params(Template::Cloud, 11, target));
        assert!((r - target).abs() <= 0.05, "{target}: {r}");
    }
}

#[test]
fn campus_defaults_to_deny() {
    let s = generate_scenario(&params(Template::Campus, 1, 0.5)).unwrap();
    assert_eq!(s.acls.default, Action::Deny);
    assert_eq!(s.network().unwrap().stats().interfaces, 361);
    assert!(s.acls.acls.values().all(|a| a.rules.len() >= 20));
}

#[test]
fn fig3_template_is_the_fixture() {
    assert_eq!(generate_scenario(&params(Template::Fig3, 99, 0.1)).unwrap(), fig3());
}

#[test]
fn texts_and_truth_line_up() {
    let s = generate_scenario(&ScenarioParams { protect_intents: 3, ..params(Template::Cloud, 5, 0.5) }).unwrap();
    assert_eq!(s.intents.len(), 6);
    for i in &s.intents {
        assert!(i.text.contains(" traffic from "), "{}", i.text);
        assert!(i.rules.iter().all(|r| r.action == i.action));
        for p in &i.protects {
            assert!(p.text.starts_with("Protect "));
            assert!(p.rules.iter().all(|r| r.action == i.action.opposite()));
        }
    }
}
