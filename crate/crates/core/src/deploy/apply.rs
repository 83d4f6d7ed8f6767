use std::collections::{BTreeMap, BTreeSet};

use super::{DeploymentPlan, DeploymentProblem};
use crate::conflict::ResolvedIntent;
use crate::flowset::{Acl, AclSet, Action, Rule};
use crate::net::Interface;

/// Inserts each selected intent's protect and intent rules at the top of
/// the chosen ACLs, lower intent ids above higher ones. A protect rule
/// repeated within one ACL keeps only its highest copy. Returns the updated
/// ACLs and the number of duplicates dropped.
pub fn apply_plan(acls: &AclSet, plan: &DeploymentPlan, resolved: &[ResolvedIntent]) -> (AclSet, u64) {
    let by_id: BTreeMap<usize, &ResolvedIntent> = resolved.iter().map(|r| (r.id, r)).collect();
    let mut per_iface: BTreeMap<&Interface, Vec<usize>> = BTreeMap::new();
    for s in &plan.selections {
        per_iface.entry(&s.interface).or_default().push(s.intent_id);
    }
    let mut out = acls.clone();
    let mut saved = 0;
    for (iface, mut ids) in per_iface {
        ids.sort_unstable();
        let mut seen_protect: BTreeSet<&Rule> = BTreeSet::new();
        let mut top: Vec<Rule> = Vec::new();
        for id in ids {
            let Some(ri) = by_id.get(&id) else { continue };
            for r in ri.protect_at.get(iface).into_iter().flatten() {
                if seen_protect.insert(r) {
                    top.push(r.clone());
                } else {
                    saved += 1;
                }
            }
            top.extend(ri.intent_rules.iter().cloned());
        }
        let existing = acls.get(iface);
        top.extend(existing.rules.iter().cloned());
        out.set(iface.clone(), Acl::new(top, existing.default));
    }
    (out, saved)
}

/// Constraints of the deployment programs that `plan` leaves unmet, checked
/// without the solver.
pub fn unmet_constraints(plan: &DeploymentPlan, problem: &DeploymentProblem, with_equivalents: bool) -> Vec<String> {
    let mut unmet = Vec::new();
    for s in &plan.selections {
        if !problem.is_candidate(&s.interface, s.intent_id) {
            unmet.push(format!("intent {} selected on non-candidate {}", s.intent_id, s.interface));
        }
    }
    let served = |p: &Interface, i: usize| problem.equivalents_of(p, i, with_equivalents).into_iter().any(|j| plan.contains(p, j));
    for (p, i) in &problem.candidates {
        if problem.action(*i) == Action::Permit && !served(p, *i) {
            unmet.push(format!("permit intent {i} has no equivalent deployed on {p}"));
        }
    }
    for i in problem.group(Action::Deny) {
        for path in problem.constrained_paths(i) {
            if !path.interfaces().iter().any(|p| served(p, i)) {
                unmet.push(format!("deny intent {i} uncovered on path {path}"));
            }
        }
    }
    unmet
}
