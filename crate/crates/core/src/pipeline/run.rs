use std::path::Path;

use super::report::{conflict_report, RunReport};
use super::session::{Detection, FailPoint, PipelineError, Session};
use super::stage::Stage;
use super::store::RunDir;
use crate::comprehension::{BackendConfig, ChatBackend};
use crate::deploy::{Limits, Strategy};
use crate::scenario::Scenario;

pub const REPORT_FILE: &str = "report.json";
pub const CONFLICTS_FILE: &str = "conflicts.json";
pub const COMPARISON_FILE: &str = "comparison.csv";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backend: BackendConfig,
    /// Strategy whose plan is applied.
    pub strategy: Strategy,
    /// Approves every IR that validates. Without it the run stops at review.
    pub auto_approve: bool,
    pub full_sets: bool,
    pub limits: Limits,
    /// Last stage to reach.
    pub until: Stage,
    pub fail_point: Option<FailPoint>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            strategy: Strategy::Optimized,
            auto_approve: true,
            full_sets: false,
            limits: Limits::default(),
            until: Stage::Verified,
            fail_point: None,
        }
    }
}

/// Runs `scenario` through every stage up to `cfg.until`, persisting into
/// `dir`. A directory holding an interrupted run is resumed from its last
/// persisted stage.
pub fn run_pipeline(dir: &Path, scenario: &Scenario, cfg: &RunConfig, backend: &dyn ChatBackend) -> Result<RunReport, PipelineError> {
    let mut s = Session::open_or_create(RunDir::create(dir)?, "run", scenario, true)?;
    s.backend_config = cfg.backend.clone();
    s.limits = cfg.limits;
    s.fail_point = cfg.fail_point;
    advance(&mut s, cfg, backend)?;
    report(&s, cfg)
}

fn advance(s: &mut Session, cfg: &RunConfig, backend: &dyn ChatBackend) -> Result<(), PipelineError> {
    for k in s.intents_at(Stage::Drafted) {
        s.comprehend(k, backend)?;
    }
    if !cfg.auto_approve || cfg.until < Stage::Approved {
        return Ok(());
    }
    for k in s.intents_at(Stage::AwaitingReview) {
        if s.approval_issues(k)?.is_empty() {
            s.approve(k)?;
        }
    }
    if cfg.until < Stage::Detected {
        return Ok(());
    }
    let approved = s.intents_at(Stage::Approved);
    s.detect(&approved)?;
    let detected = s.intents_at(Stage::Detected);
    s.settle(&detected)?;
    write_conflicts(s, cfg)?;
    if cfg.until < Stage::Resolved {
        return Ok(());
    }
    for k in s.intents_at(Stage::Resolving).into_iter().chain(s.intents_at(Stage::Resolved)) {
        let i = s.intent(k)?;
        let pending: Vec<String> = i.scripted_protects.iter().skip(i.protects.len()).cloned().collect();
        if i.stage == Stage::Resolving && pending.is_empty() {
            s.protect(k, None, backend)?;
        }
        for text in pending {
            s.protect(k, Some(&text), backend)?;
        }
    }
    let ready = !s.intents_at(Stage::Resolved).is_empty() || !s.intents_at(Stage::Planned).is_empty();
    if cfg.until < Stage::Planned || !ready {
        return verify_pending(s, cfg);
    }
    for strategy in Strategy::ALL {
        if !s.state().plans.contains_key(&strategy) {
            s.plan(strategy)?;
        }
    }
    if cfg.until < Stage::Applied {
        return Ok(());
    }
    for strategy in Strategy::ALL {
        if strategy != cfg.strategy && !s.state().checked.contains(&strategy) {
            s.check(strategy)?;
        }
    }
    s.apply(cfg.strategy)?;
    verify_pending(s, cfg)
}

/// Verifies an applied plan left unverified by an earlier interruption.
fn verify_pending(s: &mut Session, cfg: &RunConfig) -> Result<(), PipelineError> {
    if cfg.until >= Stage::Verified && !s.intents_at(Stage::Applied).is_empty() {
        s.verify()?;
    }
    Ok(())
}

fn write_conflicts(s: &Session, cfg: &RunConfig) -> Result<(), PipelineError> {
    let mut records = Vec::new();
    for i in &s.state().intents {
        if let Some(n) = &i.conflicts {
            let det: Detection = s.dir().get(n)?;
            if det.time_ranges == s.engine().ctx.time.ranges() {
                records.extend(det.records);
            }
        }
    }
    s.dir().write_json(CONFLICTS_FILE, &conflict_report(&records, &s.engine().ctx, cfg.full_sets))?;
    Ok(())
}

fn report(s: &Session, cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    let state = s.state();
    let verification = s.verification()?;
    let report = RunReport {
        scenario: s.scenario().name.clone(),
        intents: s.summaries()?,
        strategies: state.outcomes.values().cloned().collect(),
        applied: state.applied.as_ref().map(|a| a.strategy).filter(|_| cfg.until >= Stage::Applied),
        verified: verification.map(|v| v.passed()),
        stages_run: s.work().to_vec(),
    };
    s.dir().write_json(REPORT_FILE, &report)?;
    s.dir().write(COMPARISON_FILE, &report.comparison_csv())?;
    Ok(report)
}
