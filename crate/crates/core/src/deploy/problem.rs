use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::conflict::{conflict_union, ConflictRecord, ResolvedIntent, RouteIndex, TmfTable};
use crate::flowset::{Action, FlowContext, TimedFlowSet};
use crate::net::{Interface, Path};

/// Facts the deployment programs are built from.
#[derive(Debug, Clone)]
pub struct DeploymentProblem {
    /// Intent id to (action, rule count).
    pub intents: BTreeMap<usize, (Action, u64)>,
    /// Candidate (interface, intent) pairs.
    pub candidates: BTreeSet<(Interface, usize)>,
    /// For each candidate, the intents whose deployment there also serves it.
    pub equivalents: BTreeMap<(Interface, usize), BTreeSet<usize>>,
    /// Paths carrying each intent's flow.
    pub paths: BTreeMap<usize, Vec<Path>>,
}

impl DeploymentProblem {
    pub fn is_candidate(&self, iface: &Interface, intent: usize) -> bool {
        self.candidates.contains(&(iface.clone(), intent))
    }

    pub fn cost(&self, intent: usize) -> u64 {
        self.intents[&intent].1
    }

    pub fn action(&self, intent: usize) -> Action {
        self.intents[&intent].0
    }

    pub fn group(&self, action: Action) -> Vec<usize> {
        self.intents.iter().filter(|(_, (a, _))| *a == action).map(|(i, _)| *i).collect()
    }

    /// Equivalent intents at a candidate, or only the intent itself when
    /// `with_equivalents` is off.
    pub fn equivalents_of(&self, iface: &Interface, intent: usize, with_equivalents: bool) -> BTreeSet<usize> {
        if with_equivalents {
            self.equivalents.get(&(iface.clone(), intent)).cloned().unwrap_or_else(|| BTreeSet::from([intent]))
        } else {
            BTreeSet::from([intent])
        }
    }

    /// Paths of `intent` whose every interface is a candidate; paths with a
    /// non-candidate interface already handle the flow there.
    pub fn constrained_paths(&self, intent: usize) -> Vec<&Path> {
        self.paths
            .get(&intent)
            .into_iter()
            .flatten()
            .filter(|p| p.interfaces().iter().all(|i| self.is_candidate(i, intent)))
            .collect()
    }
}

/// Builds candidates, equivalents and paths for resolved intents.
///
/// An intent is a candidate at an interface when part of its flow conflicts
/// there. Intent j is equivalent to i at p when j is also a candidate at p,
/// every flow of i crossing p either already gets i's action from the
/// existing rules at p or belongs to j's flow, and none of those flows is
/// caught by j's protect rules at p.
pub fn build_problem(
    resolved: &[ResolvedIntent],
    conflicts: &[ConflictRecord],
    tmfs: &BTreeMap<Interface, TmfTable>,
    routes: &RouteIndex,
    ctx: &FlowContext,
) -> DeploymentProblem {
    let intents = resolved.iter().map(|r| (r.id, (r.action, r.cost()))).collect();
    let by_id: BTreeMap<usize, &ResolvedIntent> = resolved.iter().map(|r| (r.id, r)).collect();

    let mut candidates = BTreeSet::new();
    for c in conflicts {
        let Some(ri) = by_id.get(&c.intent_id) else { continue };
        if c.flows.intersects(&ri.flow).expect("shared context") {
            candidates.insert((c.interface.clone(), c.intent_id));
        }
    }

    let paths = resolved
        .par_iter()
        .map(|ri| {
            let flat = ri.flow.flatten().unwrap_or_else(|| ctx.gft.empty_set());
            (ri.id, routes.paths_of(&ctx.gft, &flat).into_iter().collect())
        })
        .collect();

    let ifaces: BTreeSet<&Interface> = candidates.iter().map(|(i, _)| i).collect();
    let equivalents = ifaces
        .into_par_iter()
        .flat_map_iter(|iface| {
            let here: Vec<usize> = candidates.iter().filter(|(i, _)| i == iface).map(|(_, n)| *n).collect();
            let mask = routes.on_path(iface);
            let tmf = &tmfs[iface];
            let mut same: BTreeMap<Action, TimedFlowSet> = BTreeMap::new();
            let mut out = Vec::new();
            for &i in &here {
                let ri = by_id[&i];
                let crossing = ri.flow.and_flows(&mask).expect("shared context");
                let covered = same.entry(ri.action).or_insert_with(|| tmf.with_action(ctx, ri.action)).clone();
                let mut eq = BTreeSet::from([i]);
                for &j in here.iter().filter(|&&j| j != i) {
                    let rj = by_id[&j];
                    if rj.action != ri.action {
                        continue;
                    }
                    let served = crossing.is_subset(&covered.or(&rj.flow).expect("shared context")).expect("shared context");
                    let caught = rj.protect_at.contains_key(iface)
                        && conflict_union(conflicts, j, Some(iface), ctx)
                            .and(&rj.protect_flows)
                            .expect("shared context")
                            .intersects(&crossing)
                            .expect("shared context");
                    if served && !caught {
                        eq.insert(j);
                    }
                }
                out.push(((iface.clone(), i), eq));
            }
            out
        })
        .collect();

    DeploymentProblem { intents, candidates, equivalents, paths }
}
