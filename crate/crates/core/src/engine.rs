//! One-shot evaluation of intents against a network: detection, resolution,
//! deployment planning, application and verification.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflict::{detect_with, resolve, tmf_tables, ConflictRecord, Intent, ResolveWarning, ResolvedIntent, RouteIndex, TmfTable};
use crate::deploy::{apply_plan, build_problem, plan, DeploymentPlan, DeploymentProblem, Limits, SolverError, Strategy};
use crate::error::FlowError;
use crate::flowset::{build_universe, AclSet, FlowContext, GlobalFlowTable, Rule};
use crate::net::{Interface, Network, NotFound, ProtocolPort};
use crate::oracle::{verify_intents, VerifyReport};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    NotFound(#[from] NotFound),
}

/// Universe, time context and routes shared by every stage.
#[derive(Debug, Clone)]
pub struct Engine {
    pub network: Arc<Network>,
    pub apps: Vec<ProtocolPort>,
    pub gft: Arc<GlobalFlowTable>,
    pub ctx: FlowContext,
    pub routes: Arc<RouteIndex>,
}

impl Engine {
    /// `rules` must include every rule whose time range the engine will see.
    pub fn new<'a>(network: Arc<Network>, apps: &[ProtocolPort], rules: impl IntoIterator<Item = &'a Rule>) -> Result<Self, FlowError> {
        let gft = Arc::new(build_universe(network.snmt(), apps)?);
        let ctx = FlowContext::new(gft.clone(), rules);
        let routes = Arc::new(RouteIndex::new(&network, &gft));
        Ok(Self { network, apps: gft.apps().to_vec(), gft, ctx, routes })
    }

    /// Same universe and routes under a time context rebuilt from `rules`.
    pub fn retimed<'a>(&self, rules: impl IntoIterator<Item = &'a Rule>) -> Self {
        Self { ctx: FlowContext::new(self.gft.clone(), rules), ..self.clone() }
    }

    pub fn tmfs(&self, acls: &AclSet) -> Result<BTreeMap<Interface, TmfTable>, FlowError> {
        tmf_tables(acls, &self.routes, &self.ctx)
    }

    pub fn detect(&self, intents: &[Intent], tmfs: &BTreeMap<Interface, TmfTable>) -> Result<Vec<ConflictRecord>, FlowError> {
        detect_with(intents, tmfs, &self.routes, &self.ctx)
    }

    pub fn resolve_all(
        &self,
        intents: &[Intent],
        protects: &BTreeMap<usize, Vec<Vec<Rule>>>,
        conflicts: &[ConflictRecord],
    ) -> Result<(Vec<ResolvedIntent>, Vec<ResolveWarning>), FlowError> {
        let mut resolved = Vec::new();
        let mut warnings = Vec::new();
        for intent in intents {
            let p = protects.get(&intent.id).map_or(&[][..], |v| v.as_slice());
            let (r, w) = resolve(intent, p, conflicts, &self.ctx)?;
            resolved.push(r);
            warnings.extend(w);
        }
        Ok((resolved, warnings))
    }

    pub fn problem(
        &self,
        resolved: &[ResolvedIntent],
        conflicts: &[ConflictRecord],
        tmfs: &BTreeMap<Interface, TmfTable>,
    ) -> DeploymentProblem {
        build_problem(resolved, conflicts, tmfs, &self.routes, &self.ctx)
    }

    /// Plans with `strategy`, applies the plan and replays the result.
    pub fn deploy(
        &self,
        strategy: Strategy,
        problem: &DeploymentProblem,
        acls: &AclSet,
        resolved: &[ResolvedIntent],
        limits: Limits,
    ) -> Result<Deployment, EngineError> {
        let mut p = plan(strategy, problem, limits)?;
        let (after, saved) = apply_plan(acls, &p, resolved);
        p.dedup_savings = saved;
        let verification = verify_intents(&self.network, &self.apps, acls, &after, resolved)?;
        Ok(Deployment { plan: p, acls: after, verification })
    }

    /// Every stage for every strategy.
    pub fn evaluate(
        &self,
        intents: &[Intent],
        protects: &BTreeMap<usize, Vec<Vec<Rule>>>,
        acls: &AclSet,
        strategies: &[Strategy],
        limits: Limits,
    ) -> Result<Evaluation, EngineError> {
        let tmfs = self.tmfs(acls)?;
        let conflicts = self.detect(intents, &tmfs)?;
        let (resolved, warnings) = self.resolve_all(intents, protects, &conflicts)?;
        let problem = self.problem(&resolved, &conflicts, &tmfs);
        let mut deployments = BTreeMap::new();
        for &s in strategies {
            deployments.insert(s, self.deploy(s, &problem, acls, &resolved, limits)?);
        }
        Ok(Evaluation { conflicts, resolved, warnings, problem, deployments })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Deployment {
    pub plan: DeploymentPlan,
    pub acls: AclSet,
    pub verification: VerifyReport,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub conflicts: Vec<ConflictRecord>,
    pub resolved: Vec<ResolvedIntent>,
    pub warnings: Vec<ResolveWarning>,
    pub problem: DeploymentProblem,
    pub deployments: BTreeMap<Strategy, Deployment>,
}

impl Evaluation {
    pub fn objective(&self, s: Strategy) -> Option<u64> {
        self.deployments.get(&s).map(|d| d.plan.objective)
    }
}
