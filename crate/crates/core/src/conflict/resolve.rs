use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{conflict_union, decompose, ConflictRecord, Intent};
use crate::error::FlowError;
use crate::flowset::{Action, FlowContext, Rule, TimedFlowSet};
use crate::net::Interface;

/// An intent together with the protect rules that keep selected conflict
/// flows on their existing behavior.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedIntent {
    pub id: usize,
    pub action: Action,
    pub intent_rules: Vec<Rule>,
    /// Anti-intent rules for every protected flow.
    pub protect_rules: Vec<Rule>,
    /// Protect rules clipped to the flows that conflict at each interface.
    pub protect_at: BTreeMap<Interface, Vec<Rule>>,
    pub protect_flows: TimedFlowSet,
    /// Intent traffic that follows the intent's action.
    pub flow: TimedFlowSet,
}

impl ResolvedIntent {
    /// Rule count charged per deployment.
    pub fn cost(&self) -> u64 {
        (self.intent_rules.len() + self.protect_rules.len()).max(1) as u64
    }

    /// Rules to place on `iface`, highest priority first.
    pub fn rules_at(&self, iface: &Interface) -> Vec<Rule> {
        let mut out = self.protect_at.get(iface).cloned().unwrap_or_default();
        out.extend(self.intent_rules.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolveWarning {
    /// A protect intent matched none of the intent's conflicts.
    ProtectWithoutEffect { intent_id: usize, protect_index: usize },
}

/// Splits the intent's conflicts into flows to protect and flows that follow
/// the intent. `protects` holds one rule list per protect intent; their
/// actions are ignored.
pub fn resolve(
    intent: &Intent,
    protects: &[Vec<Rule>],
    conflicts: &[ConflictRecord],
    ctx: &FlowContext,
) -> Result<(ResolvedIntent, Vec<ResolveWarning>), FlowError> {
    let all_conflicts = conflict_union(conflicts, intent.id, None, ctx);
    let mut protect_flows = ctx.empty();
    let mut warnings = Vec::new();
    for (idx, rules) in protects.iter().enumerate() {
        let hit = ctx.expand_all(rules)?.and(&all_conflicts)?;
        if hit.is_empty() {
            warnings.push(ResolveWarning::ProtectWithoutEffect { intent_id: intent.id, protect_index: idx });
        }
        protect_flows.or_assign(&hit)?;
    }
    let anti = intent.action.opposite();
    let mut protect_at = BTreeMap::new();
    if !protect_flows.is_empty() {
        let ifaces: BTreeSet<&Interface> =
            conflicts.iter().filter(|c| c.intent_id == intent.id).map(|c| &c.interface).collect();
        for iface in ifaces {
            let here = conflict_union(conflicts, intent.id, Some(iface), ctx).and(&protect_flows)?;
            if !here.is_empty() {
                protect_at.insert(iface.clone(), decompose(&here, anti, ctx));
            }
        }
    }
    let flow = intent.traffic(ctx)?.diff(&protect_flows)?;
    let resolved = ResolvedIntent {
        id: intent.id,
        action: intent.action,
        intent_rules: intent.rules.clone(),
        protect_rules: decompose(&protect_flows, anti, ctx),
        protect_at,
        protect_flows,
        flow,
    };
    Ok((resolved, warnings))
}
