use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::{IntentSummary, StrategySummary};
use super::stage::{check_transition, Stage, TransitionError};
use super::store::{RunDir, StoreError};
use crate::comprehension::{
    comprehend, distinct_rules, generate_rules, refine, BackendConfig, ChatBackend, ComprehendError, Comprehension, Diagnostic,
    FeedbackRecord, Ir,
};
use crate::conflict::{ConflictRecord, Intent, ResolveWarning, ResolvedIntent};
use crate::deploy::{apply_plan, DeploymentPlan, Limits, Strategy};
use crate::engine::{Engine, EngineError};
use crate::error::{FlowError, NetworkError};
use crate::flowset::{AclSet, Action, Rule};
use crate::net::{Network, TimeRange};
use crate::oracle::{verify_intents, VerifyReport};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "when", content = "stage")]
pub enum FailPoint {
    Before(Stage),
    After(Stage),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Comprehend(#[from] ComprehendError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error("no intent {0} in this session")]
    NoSuchIntent(usize),
    #[error("intent {intent} cannot be approved: {reason}")]
    NotApprovable { intent: usize, reason: String },
    #[error("protect intent rejected: {reason}")]
    BadProtect { reason: String },
    #[error("intent {intent} is at stage {stage}")]
    Blocked { intent: usize, stage: Stage },
    #[error("no intents are ready to plan")]
    NothingToPlan,
    #[error("no {0} plan for the current intents")]
    NoPlan(Strategy),
    #[error("nothing has been applied")]
    NothingApplied,
    #[error("injected failure {0:?}")]
    Injected(FailPoint),
}

impl From<FlowError> for PipelineError {
    fn from(e: FlowError) -> Self {
        PipelineError::Engine(EngineError::Flow(e))
    }
}

/// A protect intent as comprehended and approved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectState {
    pub text: String,
    pub ir: Ir,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentState {
    pub id: usize,
    pub text: String,
    pub stage: Stage,
    pub round: u32,
    pub ir: Option<Ir>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    pub action: Option<Action>,
    #[serde(default)]
    pub rules: Vec<Rule>,
    /// Protect texts a batch run enters once conflicts are known.
    #[serde(default)]
    pub scripted_protects: Vec<String>,
    #[serde(default)]
    pub protects: Vec<ProtectState>,
    pub conflicts: Option<String>,
    pub resolution: Option<String>,
    /// Every artifact written for this intent, oldest first.
    #[serde(default)]
    pub artifacts: Vec<String>,
}

impl IntentState {
    fn new(id: usize, text: String, scripted_protects: Vec<String>) -> Self {
        Self {
            id,
            text,
            stage: Stage::Drafted,
            round: 0,
            ir: None,
            diagnostics: vec![],
            action: None,
            rules: vec![],
            scripted_protects,
            protects: vec![],
            conflicts: None,
            resolution: None,
            artifacts: vec![],
        }
    }

    fn intent(&self) -> Option<Intent> {
        self.action.map(|a| Intent::new(self.id, a, self.rules.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRef {
    pub artifact: String,
    /// Resolution artifact of each planned intent.
    pub resolutions: BTreeMap<usize, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedRef {
    pub strategy: Strategy,
    pub plan: String,
    pub before: String,
    pub after: String,
    pub resolutions: BTreeMap<usize, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub scenario: String,
    /// Current ACLs of the network.
    pub acls: String,
    pub intents: Vec<IntentState>,
    #[serde(default)]
    pub plans: BTreeMap<Strategy, PlanRef>,
    #[serde(default)]
    pub outcomes: BTreeMap<Strategy, StrategySummary>,
    /// Strategies whose plans were replayed without being applied.
    #[serde(default)]
    pub checked: BTreeSet<Strategy>,
    pub applied: Option<AppliedRef>,
    pub verification: Option<String>,
}

/// Conflicts of one intent under the time context they were computed in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub time_ranges: Vec<TimeRange>,
    pub records: Vec<ConflictRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub time_ranges: Vec<TimeRange>,
    pub resolved: ResolvedIntent,
    pub warnings: Vec<ResolveWarning>,
}

/// One operator workspace: a scenario, its intents and their artifacts.
/// Every operation persists before returning and leaves the state
/// unchanged when it fails.
pub struct Session {
    dir: RunDir,
    state: SessionState,
    scenario: Scenario,
    network: Arc<Network>,
    engine: Engine,
    acls: AclSet,
    pub backend_config: BackendConfig,
    pub limits: Limits,
    pub fail_point: Option<FailPoint>,
    work: Vec<Stage>,
}

fn context_rules<'a>(state: &'a SessionState, acls: &'a AclSet) -> impl Iterator<Item = &'a Rule> {
    acls.rules().chain(
        state
            .intents
            .iter()
            .flat_map(|i| i.rules.iter().chain(i.protects.iter().flat_map(|p| p.rules.iter()))),
    )
}

fn range_set<'a>(rules: impl Iterator<Item = &'a Rule>) -> Vec<TimeRange> {
    let set: BTreeSet<TimeRange> = rules.map(|r| r.time).chain([TimeRange::ANY]).collect();
    set.into_iter().collect()
}

fn plan_additions(plan: &DeploymentPlan) -> BTreeMap<usize, u64> {
    let mut out: BTreeMap<usize, u64> = BTreeMap::new();
    for s in &plan.selections {
        *out.entry(s.intent_id).or_default() += plan.per_intent_rule_counts.get(&s.intent_id).copied().unwrap_or(1);
    }
    out
}

impl Session {
    /// Opens the session stored in `dir`, or starts one from `scenario`.
    /// The scenario's intents are drafted when `with_intents` is set.
    pub fn open_or_create(dir: RunDir, id: &str, scenario: &Scenario, with_intents: bool) -> Result<Self, PipelineError> {
        if let Some(s) = Self::open(dir.clone())? {
            return Ok(s);
        }
        let scenario_name = dir.put("scenario", scenario)?;
        let acls = dir.put("acls", &scenario.acls)?;
        let intents = if with_intents {
            scenario
                .intents
                .iter()
                .enumerate()
                .map(|(k, i)| IntentState::new(k, i.text.clone(), i.protects.iter().map(|p| p.text.clone()).collect()))
                .collect()
        } else {
            vec![]
        };
        let state = SessionState {
            id: id.to_string(),
            scenario: scenario_name,
            acls,
            intents,
            plans: BTreeMap::new(),
            outcomes: BTreeMap::new(),
            checked: BTreeSet::new(),
            applied: None,
            verification: None,
        };
        dir.save_state(&state)?;
        Self::load(dir, state)
    }

    pub fn open(dir: RunDir) -> Result<Option<Self>, PipelineError> {
        match dir.load_state::<SessionState>()? {
            Some(state) => Self::load(dir, state).map(Some),
            None => Ok(None),
        }
    }

    fn load(dir: RunDir, state: SessionState) -> Result<Self, PipelineError> {
        let scenario: Scenario = dir.get(&state.scenario)?;
        let acls: AclSet = dir.get(&state.acls)?;
        let network = Arc::new(scenario.network()?);
        let engine = Engine::new(network.clone(), &scenario.apps, context_rules(&state, &acls))?;
        Ok(Self {
            dir,
            state,
            scenario,
            network,
            engine,
            acls,
            backend_config: BackendConfig::default(),
            limits: Limits::default(),
            fail_point: None,
            work: vec![],
        })
    }

    pub fn id(&self) -> &str {
        &self.state.id
    }

    pub fn dir(&self) -> &RunDir {
        &self.dir
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn acls(&self) -> &AclSet {
        &self.acls
    }

    /// Stages computed since the session was opened, in order.
    pub fn work(&self) -> &[Stage] {
        &self.work
    }

    pub fn intent(&self, k: usize) -> Result<&IntentState, PipelineError> {
        self.state.intents.get(k).ok_or(PipelineError::NoSuchIntent(k))
    }

    pub fn intents_at(&self, stage: Stage) -> Vec<usize> {
        self.state.intents.iter().filter(|i| i.stage == stage).map(|i| i.id).collect()
    }

    fn trip(&self, fp: FailPoint) -> Result<(), PipelineError> {
        if self.fail_point == Some(fp) {
            return Err(PipelineError::Injected(fp));
        }
        Ok(())
    }

    fn commit(&mut self, next: SessionState) -> Result<(), PipelineError> {
        self.dir.save_state(&next)?;
        self.state = next;
        Ok(())
    }

    fn move_to(next: &mut SessionState, k: usize, to: Stage) -> Result<(), PipelineError> {
        let i = &mut next.intents[k];
        check_transition(k, i.stage, to)?;
        i.stage = to;
        Ok(())
    }

    fn expect_stage(&self, k: usize, allowed: &[Stage]) -> Result<&IntentState, PipelineError> {
        let i = self.intent(k)?;
        if allowed.contains(&i.stage) {
            Ok(i)
        } else {
            Err(PipelineError::Blocked { intent: k, stage: i.stage })
        }
    }

    /// Retimes the engine when the rules in play changed the time ranges.
    fn sync_engine(&mut self) {
        let wanted = range_set(context_rules(&self.state, &self.acls));
        if self.engine.ctx.time.ranges() != wanted.as_slice() {
            self.engine = self.engine.retimed(context_rules(&self.state, &self.acls));
        }
    }

    fn current_ranges(&self) -> Vec<TimeRange> {
        self.engine.ctx.time.ranges().to_vec()
    }

    pub fn add_intent(&mut self, text: &str) -> Result<usize, PipelineError> {
        let k = self.state.intents.len();
        let mut next = self.state.clone();
        next.intents.push(IntentState::new(k, text.to_string(), vec![]));
        self.commit(next)?;
        Ok(k)
    }

    pub fn comprehend(&mut self, k: usize, backend: &dyn ChatBackend) -> Result<Comprehension, PipelineError> {
        check_transition(k, self.intent(k)?.stage, Stage::AwaitingReview)?;
        self.trip(FailPoint::Before(Stage::AwaitingReview))?;
        let c = comprehend(&self.intent(k)?.text, backend, self.network.snmt(), &self.backend_config)?;
        self.record_ir(k, &c)?;
        Ok(c)
    }

    /// Regenerates the IR of an intent under review from operator feedback.
    pub fn feedback(&mut self, k: usize, feedback: &str, backend: &dyn ChatBackend) -> Result<Comprehension, PipelineError> {
        let i = self.expect_stage(k, &[Stage::AwaitingReview])?;
        let record = FeedbackRecord {
            prior: i.ir.clone().expect("intents under review carry an IR"),
            feedback: feedback.to_string(),
            intent: i.text.clone(),
            round: i.round,
        };
        let c = refine(&record, backend, self.network.snmt(), &self.backend_config)?;
        self.record_ir(k, &c)?;
        Ok(c)
    }

    fn record_ir(&mut self, k: usize, c: &Comprehension) -> Result<(), PipelineError> {
        let name = self.dir.put(&format!("intents/{k}/ir"), c)?;
        let mut next = self.state.clone();
        Self::move_to(&mut next, k, Stage::AwaitingReview)?;
        let i = &mut next.intents[k];
        i.ir = Some(c.ir.clone());
        i.diagnostics = c.diagnostics.clone();
        i.round = c.round;
        i.artifacts.push(name);
        self.commit(next)?;
        self.work.push(Stage::AwaitingReview);
        self.trip(FailPoint::After(Stage::AwaitingReview))
    }

    /// Why the current IR of an intent cannot be approved, if it cannot.
    pub fn approval_issues(&self, k: usize) -> Result<Vec<String>, PipelineError> {
        Ok(match self.rules_for_approval(k) {
            Ok(_) => vec![],
            Err(PipelineError::NotApprovable { reason, .. }) => vec![reason],
            Err(e) => return Err(e),
        })
    }

    fn rules_for_approval(&self, k: usize) -> Result<(Action, Vec<Rule>), PipelineError> {
        let i = self.expect_stage(k, &[Stage::AwaitingReview])?;
        let bad = |reason: String| PipelineError::NotApprovable { intent: k, reason };
        let ir = i.ir.as_ref().ok_or_else(|| bad("no IR yet".into()))?;
        if !i.diagnostics.is_empty() {
            let msgs: Vec<&str> = i.diagnostics.iter().map(|d| d.message.as_str()).collect();
            return Err(bad(msgs.join("; ")));
        }
        let action = ir.action.as_action().ok_or_else(|| bad("a protect intent must be attached to the intent it protects".into()))?;
        let rules = distinct_rules(&generate_rules(ir, action.opposite()).map_err(|e| bad(e.to_string()))?);
        for r in &rules {
            self.engine.gft.expand_rule(r).map_err(|e| bad(e.to_string()))?;
        }
        Ok((action, rules))
    }

    pub fn approve(&mut self, k: usize) -> Result<&IntentState, PipelineError> {
        let (action, rules) = self.rules_for_approval(k)?;
        self.trip(FailPoint::Before(Stage::Approved))?;
        let mut next = self.state.clone();
        Self::move_to(&mut next, k, Stage::Approved)?;
        next.intents[k].action = Some(action);
        next.intents[k].rules = rules;
        self.commit(next)?;
        self.work.push(Stage::Approved);
        self.trip(FailPoint::After(Stage::Approved))?;
        self.intent(k)
    }

    /// Detects conflicts of approved intents, then moves each to
    /// `resolving`, or straight to `resolved` when it has no conflicts.
    pub fn detect(&mut self, ids: &[usize]) -> Result<(), PipelineError> {
        for &k in ids {
            self.expect_stage(k, &[Stage::Approved])?;
        }
        if ids.is_empty() {
            return Ok(());
        }
        self.trip(FailPoint::Before(Stage::Detected))?;
        self.sync_engine();
        let intents: Vec<Intent> = ids.iter().map(|&k| self.state.intents[k].intent().expect("approved")).collect();
        let tmfs = self.engine.tmfs(&self.acls)?;
        let records = self.engine.detect(&intents, &tmfs)?;
        let ranges = self.current_ranges();
        let mut next = self.state.clone();
        for &k in ids {
            let det = Detection { time_ranges: ranges.clone(), records: records.iter().filter(|r| r.intent_id == k).cloned().collect() };
            let name = self.dir.put(&format!("intents/{k}/conflicts"), &det)?;
            Self::move_to(&mut next, k, Stage::Detected)?;
            next.intents[k].conflicts = Some(name.clone());
            next.intents[k].artifacts.push(name);
        }
        self.commit(next)?;
        self.work.push(Stage::Detected);
        self.trip(FailPoint::After(Stage::Detected))?;
        self.settle(ids)
    }

    /// Moves detected intents on: to `resolving` when they conflict,
    /// otherwise resolved as they are.
    pub fn settle(&mut self, ids: &[usize]) -> Result<(), PipelineError> {
        for &k in ids {
            if self.intent(k)?.stage != Stage::Detected {
                continue;
            }
            if self.detection(k)?.is_empty() {
                self.resolve_now(k)?;
            } else {
                let mut next = self.state.clone();
                Self::move_to(&mut next, k, Stage::Resolving)?;
                self.commit(next)?;
            }
        }
        Ok(())
    }

    /// Conflicts of an intent, detecting them first if it is only approved.
    pub fn conflicts(&mut self, k: usize) -> Result<Vec<ConflictRecord>, PipelineError> {
        if self.intent(k)?.stage == Stage::Approved {
            self.detect(&[k])?;
        }
        if self.intent(k)?.conflicts.is_none() {
            return Err(PipelineError::Blocked { intent: k, stage: self.intent(k)?.stage });
        }
        self.detection(k)
    }

    /// Stored conflicts of an intent, recomputed if the time context moved.
    fn detection(&mut self, k: usize) -> Result<Vec<ConflictRecord>, PipelineError> {
        self.sync_engine();
        let name = self.intent(k)?.conflicts.clone().ok_or(PipelineError::Blocked { intent: k, stage: self.intent(k)?.stage })?;
        let stored: Detection = self.dir.get(&name)?;
        if stored.time_ranges == self.current_ranges() {
            return Ok(stored.records);
        }
        let intent = self.state.intents[k].intent().expect("detected intents are approved");
        let tmfs = self.engine.tmfs(&self.acls)?;
        let records = self.engine.detect(&[intent], &tmfs)?;
        let det = Detection { time_ranges: self.current_ranges(), records };
        let name = self.dir.put(&format!("intents/{k}/conflicts"), &det)?;
        let mut next = self.state.clone();
        next.intents[k].conflicts = Some(name.clone());
        next.intents[k].artifacts.push(name);
        self.commit(next)?;
        self.work.push(Stage::Detected);
        Ok(det.records)
    }

    /// Adds a protect intent and resolves the intent's conflicts with every
    /// protect intent so far. `None` or blank text resolves without adding.
    pub fn protect(&mut self, k: usize, text: Option<&str>, backend: &dyn ChatBackend) -> Result<Resolution, PipelineError> {
        let host = self.expect_stage(k, &[Stage::Resolving, Stage::Resolved])?;
        let action = host.action.expect("resolving intents are approved");
        self.trip(FailPoint::Before(Stage::Resolved))?;
        let text = text.map(str::trim).filter(|t| !t.is_empty());
        let Some(text) = text else {
            return self.resolve_now(k);
        };
        let c = comprehend(text, backend, self.network.snmt(), &self.backend_config)?;
        let name = self.dir.put(&format!("intents/{k}/protect"), &c)?;
        let bad = |reason: String| PipelineError::BadProtect { reason };
        if !c.diagnostics.is_empty() {
            return Err(bad(c.diagnostics.iter().map(|d| d.message.as_str()).collect::<Vec<_>>().join("; ")));
        }
        let rules = distinct_rules(&generate_rules(&c.ir, action.opposite()).map_err(|e| bad(e.to_string()))?);
        for r in &rules {
            self.engine.gft.expand_rule(r).map_err(|e| bad(e.to_string()))?;
        }
        let prev = self.state.clone();
        let i = &mut self.state.intents[k];
        i.protects.push(ProtectState { text: text.to_string(), ir: c.ir, rules });
        i.artifacts.push(name);
        match self.resolve_now(k) {
            Ok(r) => Ok(r),
            Err(e) => {
                self.state = prev;
                self.dir.save_state(&self.state)?;
                self.sync_engine();
                Err(e)
            }
        }
    }

    fn compute_resolution(&mut self, k: usize) -> Result<(Resolution, String), PipelineError> {
        let conflicts = self.detection(k)?;
        let i = &self.state.intents[k];
        let intent = i.intent().expect("resolving intents are approved");
        let protects = BTreeMap::from([(k, i.protects.iter().map(|p| p.rules.clone()).collect())]);
        let (mut resolved, warnings) = self.engine.resolve_all(&[intent], &protects, &conflicts)?;
        let res = Resolution { time_ranges: self.current_ranges(), resolved: resolved.remove(0), warnings };
        let name = self.dir.put(&format!("intents/{k}/resolution"), &res)?;
        Ok((res, name))
    }

    fn resolve_now(&mut self, k: usize) -> Result<Resolution, PipelineError> {
        let (res, name) = self.compute_resolution(k)?;
        let mut next = self.state.clone();
        Self::move_to(&mut next, k, Stage::Resolved)?;
        next.intents[k].resolution = Some(name.clone());
        next.intents[k].artifacts.push(name);
        self.commit(next)?;
        self.work.push(Stage::Resolved);
        self.trip(FailPoint::After(Stage::Resolved))?;
        Ok(res)
    }

    /// Stored resolution of an intent, recomputed if the time context moved.
    fn resolution(&mut self, k: usize) -> Result<(Resolution, String), PipelineError> {
        self.sync_engine();
        let name = self.intent(k)?.resolution.clone().ok_or(PipelineError::Blocked { intent: k, stage: self.intent(k)?.stage })?;
        let stored: Resolution = self.dir.get(&name)?;
        if stored.time_ranges == self.current_ranges() {
            return Ok((stored, name));
        }
        let (res, name) = self.compute_resolution(k)?;
        let mut next = self.state.clone();
        next.intents[k].resolution = Some(name.clone());
        next.intents[k].artifacts.push(name.clone());
        self.commit(next)?;
        self.work.push(Stage::Resolved);
        Ok((res, name))
    }

    pub fn resolved(&self, k: usize) -> Result<Resolution, PipelineError> {
        let i = self.intent(k)?;
        let name = i.resolution.as_ref().ok_or(PipelineError::Blocked { intent: k, stage: i.stage })?;
        Ok(self.dir.get(name)?)
    }

    /// Plans every resolved intent not yet applied. Intents between
    /// approval and resolution block planning.
    pub fn plan(&mut self, strategy: Strategy) -> Result<DeploymentPlan, PipelineError> {
        if let Some(i) = self.state.intents.iter().find(|i| (Stage::Approved..=Stage::Resolving).contains(&i.stage)) {
            return Err(PipelineError::Blocked { intent: i.id, stage: i.stage });
        }
        let ids: Vec<usize> =
            self.state.intents.iter().filter(|i| matches!(i.stage, Stage::Resolved | Stage::Planned)).map(|i| i.id).collect();
        if ids.is_empty() {
            return Err(PipelineError::NothingToPlan);
        }
        self.trip(FailPoint::Before(Stage::Planned))?;
        self.sync_engine();
        let mut conflicts = Vec::new();
        let mut resolved = Vec::new();
        let mut resolutions = BTreeMap::new();
        for &k in &ids {
            conflicts.extend(self.detection(k)?);
            let (r, name) = self.resolution(k)?;
            resolved.push(r.resolved);
            resolutions.insert(k, name);
        }
        let tmfs = self.engine.tmfs(&self.acls)?;
        let problem = self.engine.problem(&resolved, &conflicts, &tmfs);
        let mut plan = crate::deploy::plan(strategy, &problem, self.limits).map_err(EngineError::from)?;
        plan.dedup_savings = apply_plan(&self.acls, &plan, &resolved).1;
        let name = self.dir.put(&format!("plans/{strategy}"), &plan)?;

        let mut next = self.state.clone();
        next.plans.retain(|_, p| p.resolutions == resolutions);
        next.plans.insert(strategy, PlanRef { artifact: name, resolutions });
        next.checked.retain(|s| next.plans.contains_key(s));
        next.outcomes.retain(|s, _| next.plans.contains_key(s));
        next.outcomes.insert(
            strategy,
            StrategySummary {
                strategy,
                objective: plan.objective,
                dedup_savings: plan.dedup_savings,
                per_intent: plan_additions(&plan),
                verified: false,
            },
        );
        for &k in &ids {
            Self::move_to(&mut next, k, Stage::Planned)?;
        }
        self.commit(next)?;
        self.work.push(Stage::Planned);
        self.trip(FailPoint::After(Stage::Planned))?;
        Ok(plan)
    }

    fn plan_ref(&self, strategy: Strategy) -> Result<&PlanRef, PipelineError> {
        let p = self.state.plans.get(&strategy).ok_or(PipelineError::NoPlan(strategy))?;
        for &k in p.resolutions.keys() {
            self.expect_stage(k, &[Stage::Planned])?;
        }
        Ok(p)
    }

    pub fn stored_plan(&self, strategy: Strategy) -> Result<DeploymentPlan, PipelineError> {
        Ok(self.dir.get(&self.plan_ref(strategy)?.artifact)?)
    }

    fn load_resolved(&self, names: &BTreeMap<usize, String>) -> Result<Vec<ResolvedIntent>, PipelineError> {
        names.values().map(|n| Ok(self.dir.get::<Resolution>(n)?.resolved)).collect()
    }

    /// Replays a plan without applying it.
    pub fn check(&mut self, strategy: Strategy) -> Result<VerifyReport, PipelineError> {
        let p = self.plan_ref(strategy)?.clone();
        let plan: DeploymentPlan = self.dir.get(&p.artifact)?;
        let resolved = self.load_resolved(&p.resolutions)?;
        let (after, _) = apply_plan(&self.acls, &plan, &resolved);
        let report = verify_intents(&self.network, &self.engine.apps, &self.acls, &after, &resolved).map_err(EngineError::from)?;
        self.dir.put(&format!("checks/{strategy}"), &report)?;
        let mut next = self.state.clone();
        next.checked.insert(strategy);
        if let Some(o) = next.outcomes.get_mut(&strategy) {
            o.verified = report.passed();
        }
        self.commit(next)?;
        Ok(report)
    }

    /// Inserts the plan's rules into the ACLs.
    pub fn apply(&mut self, strategy: Strategy) -> Result<DeploymentPlan, PipelineError> {
        let p = self.plan_ref(strategy)?.clone();
        self.trip(FailPoint::Before(Stage::Applied))?;
        let plan: DeploymentPlan = self.dir.get(&p.artifact)?;
        let resolved = self.load_resolved(&p.resolutions)?;
        let (after, _) = apply_plan(&self.acls, &plan, &resolved);
        let after_name = self.dir.put("acls", &after)?;
        let mut next = self.state.clone();
        for &k in p.resolutions.keys() {
            Self::move_to(&mut next, k, Stage::Applied)?;
        }
        next.applied = Some(AppliedRef {
            strategy,
            plan: p.artifact,
            before: next.acls.clone(),
            after: after_name.clone(),
            resolutions: p.resolutions,
        });
        next.acls = after_name;
        next.plans.clear();
        next.verification = None;
        self.commit(next)?;
        self.acls = after;
        self.work.push(Stage::Applied);
        self.trip(FailPoint::After(Stage::Applied))?;
        Ok(plan)
    }

    /// Replays the applied intents against the ACLs before and after.
    pub fn verify(&mut self) -> Result<VerifyReport, PipelineError> {
        let applied = self.state.applied.clone().ok_or(PipelineError::NothingApplied)?;
        if let Some(v) = &self.state.verification {
            return Ok(self.dir.get(v)?);
        }
        self.trip(FailPoint::Before(Stage::Verified))?;
        let before: AclSet = self.dir.get(&applied.before)?;
        let resolved = self.load_resolved(&applied.resolutions)?;
        let report = verify_intents(&self.network, &self.engine.apps, &before, &self.acls, &resolved).map_err(EngineError::from)?;
        let name = self.dir.put("verification", &report)?;
        let mut next = self.state.clone();
        for &k in applied.resolutions.keys() {
            Self::move_to(&mut next, k, Stage::Verified)?;
        }
        next.verification = Some(name);
        if let Some(o) = next.outcomes.get_mut(&applied.strategy) {
            o.verified = report.passed();
        }
        self.commit(next)?;
        self.work.push(Stage::Verified);
        self.trip(FailPoint::After(Stage::Verified))?;
        Ok(report)
    }

    pub fn verification(&self) -> Result<Option<VerifyReport>, PipelineError> {
        match &self.state.verification {
            Some(v) => Ok(Some(self.dir.get(v)?)),
            None => Ok(None),
        }
    }

    pub fn summaries(&self) -> Result<Vec<IntentSummary>, PipelineError> {
        self.state
            .intents
            .iter()
            .map(|i| {
                let conflicts = match &i.conflicts {
                    Some(n) => self.dir.get::<Detection>(n)?.records.len(),
                    None => 0,
                };
                let (protect_rules, protect_flows) = match &i.resolution {
                    Some(n) => {
                        let r: Resolution = self.dir.get(n)?;
                        (r.resolved.protect_rules.len(), r.resolved.protect_flows.count())
                    }
                    None => (0, 0),
                };
                let issues = if i.stage == Stage::AwaitingReview { self.approval_issues(i.id)? } else { vec![] };
                Ok(IntentSummary {
                    id: i.id,
                    text: i.text.clone(),
                    stage: i.stage,
                    round: i.round,
                    rules: i.rules.len(),
                    conflicts,
                    protect_rules,
                    protect_flows,
                    issues,
                })
            })
            .collect()
    }
}
