use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_tmf, overlap_intent, RouteIndex, TmfTable};
use crate::error::FlowError;
use crate::flowset::{AclSet, Action, FlowContext, Rule, TimedFlowSet};
use crate::net::Interface;

/// A comprehended, non-protect intent: its rules share one action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub id: usize,
    pub action: Action,
    pub rules: Vec<Rule>,
}

impl Intent {
    pub fn new(id: usize, action: Action, rules: Vec<Rule>) -> Self {
        let rules = rules.into_iter().map(|r| Rule { action, ..r }).collect();
        Self { id, action, rules }
    }

    pub fn traffic(&self, ctx: &FlowContext) -> Result<TimedFlowSet, FlowError> {
        ctx.expand_all(&self.rules)
    }
}

/// Intent flows that an existing rule at `interface` handles the opposite
/// way. `position` is 1-based; the default rule sits one past the last rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub intent_id: usize,
    pub interface: Interface,
    pub position: usize,
    pub is_default: bool,
    pub flows: TimedFlowSet,
}

impl ConflictRecord {
    pub fn key(&self) -> (usize, &Interface, usize) {
        (self.intent_id, &self.interface, self.position)
    }
}

/// TMF tables of every interface that carries traffic, computed once.
pub fn tmf_tables(acls: &AclSet, routes: &RouteIndex, ctx: &FlowContext) -> Result<BTreeMap<Interface, TmfTable>, FlowError> {
    let ifaces: Vec<Interface> = routes.interfaces().cloned().collect();
    ifaces
        .into_par_iter()
        .map(|i| compute_tmf(&acls.get(&i), ctx).map(|t| (i, t)))
        .collect()
}

/// Path-validated conflicts of every intent on every interface.
pub fn detect_all(
    intents: &[Intent],
    acls: &AclSet,
    routes: &RouteIndex,
    ctx: &FlowContext,
) -> Result<Vec<ConflictRecord>, FlowError> {
    let tmfs = tmf_tables(acls, routes, ctx)?;
    detect_with(intents, &tmfs, routes, ctx)
}

pub fn detect_with(
    intents: &[Intent],
    tmfs: &BTreeMap<Interface, TmfTable>,
    routes: &RouteIndex,
    ctx: &FlowContext,
) -> Result<Vec<ConflictRecord>, FlowError> {
    let mut jobs = Vec::new();
    for intent in intents {
        let traffic = intent.traffic(ctx)?;
        let Some(flat) = traffic.flatten() else { continue };
        for iface in routes.interfaces_of(&flat) {
            jobs.push((intent, traffic.clone(), iface));
        }
    }
    let mut out: Vec<ConflictRecord> = jobs
        .into_par_iter()
        .flat_map_iter(|(intent, traffic, iface)| {
            let tmf = &tmfs[&iface];
            let mask = routes.on_path(&iface);
            let scan = overlap_intent(intent.action, &traffic, tmf, true);
            let default = tmf.default_position();
            scan.hits
                .into_iter()
                .filter_map(|(position, hit)| {
                    let flows = hit.and_flows(&mask).expect("masks share the universe");
                    (!flows.is_empty()).then(|| ConflictRecord {
                        intent_id: intent.id,
                        interface: iface.clone(),
                        position,
                        is_default: position == default,
                        flows,
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(out)
}

/// Ablation without TMF and path validation: the raw overlap of every
/// opposite-action rule, the default included, on every given interface.
pub fn detect_blind(
    intents: &[Intent],
    acls: &AclSet,
    interfaces: &[Interface],
    ctx: &FlowContext,
) -> Result<Vec<ConflictRecord>, FlowError> {
    let mut out = Vec::new();
    for intent in intents {
        let traffic = intent.traffic(ctx)?;
        for iface in interfaces {
            let acl = acls.get(iface);
            for k in 1..=acl.default_position() {
                let rule = acl.rule_at(k);
                if rule.action == intent.action {
                    continue;
                }
                let flows = traffic.and(&ctx.expand(&rule)?)?;
                if !flows.is_empty() {
                    out.push(ConflictRecord {
                        intent_id: intent.id,
                        interface: iface.clone(),
                        position: k,
                        is_default: k == acl.default_position(),
                        flows,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(out)
}

/// Union of the conflict flows of `intent_id`, optionally at one interface.
pub fn conflict_union(records: &[ConflictRecord], intent_id: usize, at: Option<&Interface>, ctx: &FlowContext) -> TimedFlowSet {
    let mut acc = ctx.empty();
    for r in records.iter().filter(|r| r.intent_id == intent_id && at.is_none_or(|i| *i == r.interface)) {
        acc.or_assign(&r.flows).expect("records share the context");
    }
    acc
}
