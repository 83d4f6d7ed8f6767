use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solver::{solve, CoverProblem, Limits, SolverError};
use super::DeploymentProblem;
use crate::flowset::Action;
use crate::net::Interface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Exact permit and deny programs with equivalent intents.
    Optimized,
    /// Deny intents on every source or every destination gateway.
    Endpoint,
    /// Permit intents on every candidate interface.
    CatchAll,
    /// Deny program without equivalent intents.
    Bottleneck,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Optimized, Strategy::Endpoint, Strategy::CatchAll, Strategy::Bottleneck];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Optimized => "optimized",
            Strategy::Endpoint => "endpoint",
            Strategy::CatchAll => "catch-all",
            Strategy::Bottleneck => "bottleneck",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "optimized" | "xumi" => Ok(Strategy::Optimized),
            "endpoint" => Ok(Strategy::Endpoint),
            "catchall" | "catch-all" => Ok(Strategy::CatchAll),
            "bottleneck" => Ok(Strategy::Bottleneck),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Selection {
    pub interface: Interface,
    pub intent_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentPlan {
    pub strategy: Strategy,
    pub selections: BTreeSet<Selection>,
    pub objective: u64,
    pub per_intent_rule_counts: BTreeMap<usize, u64>,
    /// Protect rules dropped as duplicates when the plan is applied.
    #[serde(default)]
    pub dedup_savings: u64,
}

impl DeploymentPlan {
    fn new(strategy: Strategy, selections: BTreeSet<Selection>, problem: &DeploymentProblem) -> Self {
        let objective = selections.iter().map(|s| problem.cost(s.intent_id)).sum();
        Self { strategy, selections, objective, per_intent_rule_counts: problem.intents.iter().map(|(i, (_, t))| (*i, *t)).collect(), dedup_savings: 0 }
    }

    pub fn contains(&self, iface: &Interface, intent: usize) -> bool {
        self.selections.contains(&Selection { interface: iface.clone(), intent_id: intent })
    }
}

fn select(pairs: impl IntoIterator<Item = (Interface, usize)>) -> BTreeSet<Selection> {
    pairs.into_iter().map(|(interface, intent_id)| Selection { interface, intent_id }).collect()
}

/// Solves a covering program whose columns are (interface, intent) pairs.
fn solve_pairs(columns: Vec<(Interface, usize)>, rows: Vec<Vec<usize>>, problem: &DeploymentProblem, limits: Limits) -> Result<BTreeSet<Selection>, SolverError> {
    let costs = columns.iter().map(|(_, i)| problem.cost(*i)).collect();
    let sol = solve(&CoverProblem { costs, rows }, limits)?;
    Ok(select(sol.chosen.into_iter().map(|c| columns[c].clone())))
}

/// Per interface, the cheapest set of permit intents such that every
/// candidate intent there has an equivalent deployed.
pub fn optimize_permit(problem: &DeploymentProblem, limits: Limits) -> Result<BTreeSet<Selection>, SolverError> {
    let group: BTreeSet<usize> = problem.group(Action::Permit).into_iter().collect();
    let mut by_iface: BTreeMap<&Interface, Vec<usize>> = BTreeMap::new();
    for (p, i) in &problem.candidates {
        if group.contains(i) {
            by_iface.entry(p).or_default().push(*i);
        }
    }
    let parts: Vec<BTreeSet<Selection>> = by_iface
        .into_par_iter()
        .map(|(p, here)| {
            let columns: Vec<(Interface, usize)> = here.iter().map(|&j| (p.clone(), j)).collect();
            let rows = here
                .iter()
                .map(|&i| {
                    let eq = problem.equivalents_of(p, i, true);
                    (0..here.len()).filter(|&c| eq.contains(&here[c])).collect()
                })
                .collect();
            solve_pairs(columns, rows, problem, limits)
        })
        .collect::<Result<_, _>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// The cheapest deny deployment that puts, on every constrained path of
/// every deny intent, an intent equivalent to it at some interface.
pub fn optimize_deny(problem: &DeploymentProblem, with_equivalents: bool, limits: Limits) -> Result<BTreeSet<Selection>, SolverError> {
    let group = problem.group(Action::Deny);
    let group_set: BTreeSet<usize> = group.iter().copied().collect();
    let columns: Vec<(Interface, usize)> = problem.candidates.iter().filter(|(_, i)| group_set.contains(i)).cloned().collect();
    let index: BTreeMap<&(Interface, usize), usize> = columns.iter().enumerate().map(|(c, k)| (k, c)).collect();
    let mut rows: BTreeSet<Vec<usize>> = BTreeSet::new();
    for &i in &group {
        for path in problem.constrained_paths(i) {
            let mut row: Vec<usize> = path
                .interfaces()
                .iter()
                .flat_map(|p| problem.equivalents_of(p, i, with_equivalents).into_iter().map(move |j| (p.clone(), j)))
                .filter_map(|k| index.get(&k).copied())
                .collect();
            row.sort_unstable();
            row.dedup();
            rows.insert(row);
        }
    }
    solve_pairs(columns, rows.into_iter().collect(), problem, limits)
}

/// Every permit intent on every interface where it is a candidate.
pub fn catch_all(problem: &DeploymentProblem) -> BTreeSet<Selection> {
    let group: BTreeSet<usize> = problem.group(Action::Permit).into_iter().collect();
    select(problem.candidates.iter().filter(|(_, i)| group.contains(i)).cloned())
}

/// Each deny intent on all source gateways of its constrained paths, or on
/// all destination gateways when there are fewer of those.
pub fn endpoint(problem: &DeploymentProblem) -> BTreeSet<Selection> {
    let mut out = BTreeSet::new();
    for i in problem.group(Action::Deny) {
        let paths = problem.constrained_paths(i);
        let srcs: BTreeSet<&Interface> = paths.iter().map(|p| p.source()).collect();
        let dsts: BTreeSet<&Interface> = paths.iter().map(|p| p.destination()).collect();
        let side = if dsts.len() < srcs.len() { dsts } else { srcs };
        out.extend(side.into_iter().map(|p| Selection { interface: p.clone(), intent_id: i }));
    }
    out
}

/// Deployment plan for `strategy`: permit and deny intents are planned
/// separately and combined.
pub fn plan(strategy: Strategy, problem: &DeploymentProblem, limits: Limits) -> Result<DeploymentPlan, SolverError> {
    let (permit, deny) = match strategy {
        Strategy::Optimized => (optimize_permit(problem, limits)?, optimize_deny(problem, true, limits)?),
        Strategy::Bottleneck => (catch_all(problem), optimize_deny(problem, false, limits)?),
        Strategy::Endpoint | Strategy::CatchAll => (catch_all(problem), endpoint(problem)),
    };
    Ok(DeploymentPlan::new(strategy, permit.into_iter().chain(deny).collect(), problem))
}

/// Objective of the deny intents only.
pub fn deny_objective(plan: &DeploymentPlan, problem: &DeploymentProblem) -> u64 {
    plan.selections.iter().filter(|s| problem.action(s.intent_id) == Action::Deny).map(|s| problem.cost(s.intent_id)).sum()
}

/// Objective of the permit intents only.
pub fn permit_objective(plan: &DeploymentPlan, problem: &DeploymentProblem) -> u64 {
    plan.objective - deny_objective(plan, problem)
}
