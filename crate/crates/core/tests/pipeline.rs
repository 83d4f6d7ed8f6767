use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use aclwright_core::comprehension::MockBackend;
use aclwright_core::deploy::Strategy;
use aclwright_core::pipeline::{run_pipeline, FailPoint, PipelineError, RunConfig, RunDir, RunReport, Session, Stage};
use aclwright_core::scenario::{composite, fig2, fig3, protect_example, Fig2Case, Scenario};

fn run(dir: &Path, s: &Scenario, cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    run_pipeline(dir, s, cfg, &MockBackend::new())
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Artifacts only: numbered JSON files under the run directory.
fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    files(dir).into_iter().filter(|(k, _)| k.rsplit('.').nth(1).is_some_and(|n| n.parse::<u32>().is_ok())).collect()
}

#[test]
fn composite_batch_run_verifies_with_three_grid_rules() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), &composite(), &RunConfig::default()).unwrap();
    assert_eq!(r.verified, Some(true));
    assert_eq!(r.applied, Some(Strategy::Optimized));
    assert!(r.intents.iter().all(|i| i.stage == Stage::Verified), "{:?}", r.intents);
    let opt = r.strategy(Strategy::Optimized).unwrap();
    assert_eq!(opt.per_intent.get(&1).unwrap_or(&0) + opt.per_intent.get(&2).unwrap_or(&0), 3);
    for s in &r.strategies {
        assert!(s.verified, "{}", s.strategy);
        assert!(opt.objective <= s.objective);
    }
    assert_eq!(r.strategies.len(), Strategy::ALL.len());
    for f in ["report.json", "conflicts.json", "comparison.csv", "state.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(tmp.path().join("comparison.csv")).unwrap();
    assert!(csv.starts_with("strategy,objective,dedup_savings,verified\noptimized,"), "{csv}");
}

#[test]
fn fig2_case_a_reports_the_conflict_at_b2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { until: Stage::Detected, full_sets: true, ..Default::default() };
    run(tmp.path(), &fig2(Fig2Case::A), &cfg).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("conflicts.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 1, "{rows:?}");
    assert_eq!(rows[0]["interface"], "R_B@2");
    assert_eq!(rows[0]["rule_position"], 1);
    assert!(rows[0]["flow_sets"].as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn resume_after_detection_failure_reuses_detection() {
    let clean_dir = tempfile::tempdir().unwrap();
    let clean = run(clean_dir.path(), &composite(), &RunConfig::default()).unwrap();

    let tmp = tempfile::tempdir().unwrap();
    let failing = RunConfig { fail_point: Some(FailPoint::After(Stage::Detected)), ..Default::default() };
    let err = run(tmp.path(), &composite(), &failing).unwrap_err();
    assert!(matches!(err, PipelineError::Injected(FailPoint::After(Stage::Detected))), "{err}");
    let state = Session::open(RunDir::create(tmp.path()).unwrap()).unwrap().unwrap();
    assert!(state.state().intents.iter().all(|i| i.stage == Stage::Detected));
    let before = artifacts(tmp.path());

    let resumed = run(tmp.path(), &composite(), &RunConfig::default()).unwrap();
    assert!(!resumed.stages_run.contains(&Stage::Detected), "{:?}", resumed.stages_run);
    assert!(!resumed.stages_run.contains(&Stage::AwaitingReview));
    assert_eq!(resumed.stages_run.first(), Some(&Stage::Resolved));
    assert_eq!(resumed.strategies, clean.strategies);
    assert_eq!(resumed.verified, Some(true));
    let after = artifacts(tmp.path());
    for (name, bytes) in &before {
        assert_eq!(after.get(name), Some(bytes), "{name} changed");
    }
}

#[test]
fn failure_before_detection_recomputes_it_on_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let failing = RunConfig { fail_point: Some(FailPoint::Before(Stage::Detected)), ..Default::default() };
    assert!(run(tmp.path(), &fig3(), &failing).is_err());
    let resumed = run(tmp.path(), &fig3(), &RunConfig::default()).unwrap();
    assert_eq!(resumed.stages_run.first(), Some(&Stage::Detected));
    assert_eq!(resumed.strategy(Strategy::Optimized).unwrap().objective, 3);
}

#[test]
fn every_stage_can_be_interrupted_and_resumed() {
    let clean_dir = tempfile::tempdir().unwrap();
    let clean = run(clean_dir.path(), &protect_example(), &RunConfig::default()).unwrap();
    for stage in Stage::ALL.into_iter().skip(1) {
        for fp in [FailPoint::Before(stage), FailPoint::After(stage)] {
            let tmp = tempfile::tempdir().unwrap();
            let _ = run(tmp.path(), &protect_example(), &RunConfig { fail_point: Some(fp), ..Default::default() });
            let r = run(tmp.path(), &protect_example(), &RunConfig::default()).unwrap();
            assert_eq!(r.strategies, clean.strategies, "{fp:?}");
            assert_eq!(r.verified, Some(true), "{fp:?}");
        }
    }
}

#[test]
fn zero_intents_give_an_empty_report() {
    let tmp = tempfile::tempdir().unwrap();
    let mut s = fig3();
    s.intents.clear();
    let r = run(tmp.path(), &s, &RunConfig::default()).unwrap();
    assert!(r.intents.is_empty() && r.strategies.is_empty());
    assert_eq!((r.applied, r.verified), (None, None));
}

#[test]
fn without_auto_approve_the_run_waits_at_review() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), &fig3(), &RunConfig { auto_approve: false, ..Default::default() }).unwrap();
    assert!(r.intents.iter().all(|i| i.stage == Stage::AwaitingReview));
    assert!(r.strategies.is_empty());
    assert!(!tmp.path().join("conflicts.json").exists());
}

#[test]
fn scripted_protect_keeps_http_on_its_old_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), &protect_example(), &RunConfig::default()).unwrap();
    assert_eq!(r.verified, Some(true));
    let i = &r.intents[0];
    assert!(i.protect_rules > 0 && i.protect_flows > 0, "{i:?}");
}

#[test]
fn interactive_session_walks_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let backend = MockBackend::new();
    let mut s = Session::open_or_create(RunDir::create(tmp.path()).unwrap(), "s1", &fig2(Fig2Case::A), false).unwrap();
    assert!(s.state().intents.is_empty());
    let k = s.add_intent("Permit all traffic from DC2 to any destination.").unwrap();
    assert!(matches!(s.approve(k), Err(PipelineError::Blocked { stage: Stage::Drafted, .. })));
    s.comprehend(k, &backend).unwrap();
    let c = s.feedback(k, "destination should be any", &backend).unwrap();
    assert_eq!(c.round, 1);
    assert_eq!(s.intent(k).unwrap().round, 1);
    assert!(matches!(s.plan(Strategy::Optimized), Err(PipelineError::NothingToPlan)));
    s.approve(k).unwrap();
    assert!(matches!(s.plan(Strategy::Optimized), Err(PipelineError::Blocked { stage: Stage::Approved, .. })));
    let conflicts = s.conflicts(k).unwrap();
    assert_eq!(conflicts.len(), 1);
    assert_eq!(s.intent(k).unwrap().stage, Stage::Resolving);
    s.protect(k, None, &backend).unwrap();
    assert_eq!(s.intent(k).unwrap().stage, Stage::Resolved);
    assert_eq!(s.plan(Strategy::Optimized).unwrap().objective, 1);
    assert!(matches!(s.apply(Strategy::Endpoint), Err(PipelineError::NoPlan(Strategy::Endpoint))));
    s.apply(Strategy::Optimized).unwrap();
    assert!(s.verify().unwrap().passed());
    assert_eq!(s.intent(k).unwrap().stage, Stage::Verified);

    let reopened = Session::open(RunDir::create(tmp.path()).unwrap()).unwrap().unwrap();
    assert_eq!(reopened.state(), s.state());
    assert_eq!(reopened.acls(), s.acls());
}

#[test]
fn rejected_protect_leaves_the_state_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let backend = MockBackend::new();
    let mut scenario = protect_example();
    scenario.intents[0].protects.clear();
    let mut s = Session::open_or_create(RunDir::create(tmp.path()).unwrap(), "s", &scenario, true).unwrap();
    s.comprehend(0, &backend).unwrap();
    s.approve(0).unwrap();
    s.detect(&[0]).unwrap();
    let before = s.state().clone();
    assert!(matches!(s.protect(0, Some("Protect all HTTP traffic to Atlantis."), &backend), Err(PipelineError::BadProtect { .. })));
    assert_eq!(s.state().intents, before.intents);
    let r = s.protect(0, Some("Protect all HTTP traffic."), &backend).unwrap();
    assert!(!r.resolved.protect_rules.is_empty());
}
