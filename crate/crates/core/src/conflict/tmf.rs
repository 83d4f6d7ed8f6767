use serde::Serialize;

use crate::error::FlowError;
use crate::flowset::{Acl, Action, FlowContext, TimedFlowSet};

/// Truly-matched flows of every ACL position, the default included.
#[derive(Debug, Clone, Serialize)]
pub struct TmfTable {
    sets: Vec<TimedFlowSet>,
    actions: Vec<Action>,
}

impl TmfTable {
    /// Number of positions, the default included.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// TMF at 1-based position `k`.
    pub fn at(&self, k: usize) -> &TimedFlowSet {
        &self.sets[k - 1]
    }

    pub fn action_at(&self, k: usize) -> Action {
        self.actions[k - 1]
    }

    pub fn default_position(&self) -> usize {
        self.sets.len()
    }

    /// Position whose TMF holds `flow` in `atom`.
    pub fn position_of(&self, atom: usize, flow: usize) -> Option<usize> {
        self.sets.iter().position(|s| s.at(atom).contains(flow)).map(|i| i + 1)
    }

    /// Union of the TMFs whose action is `action`.
    pub fn with_action(&self, ctx: &FlowContext, action: Action) -> TimedFlowSet {
        let mut acc = ctx.empty();
        for (s, _) in self.sets.iter().zip(&self.actions).filter(|(_, a)| **a == action) {
            acc.or_assign(s).expect("TMFs share the context");
        }
        acc
    }
}

pub fn compute_tmf(acl: &Acl, ctx: &FlowContext) -> Result<TmfTable, FlowError> {
    let mut seen = ctx.empty();
    let mut sets = Vec::with_capacity(acl.rules.len() + 1);
    let mut actions = Vec::with_capacity(acl.rules.len() + 1);
    for r in &acl.rules {
        let mut t = ctx.expand(r)?;
        t.diff_assign(&seen)?;
        seen.or_assign(&t)?;
        sets.push(t);
        actions.push(r.action);
    }
    sets.push(ctx.full().diff(&seen)?);
    actions.push(acl.default);
    Ok(TmfTable { sets, actions })
}

/// Overlaps found at one ACL, with the number of positions inspected.
#[derive(Debug, Clone)]
pub struct OverlapScan {
    pub hits: Vec<(usize, TimedFlowSet)>,
    pub scanned: usize,
}

/// Intersects `traffic` with the TMF of every position whose action opposes
/// `action`. With `early_stop`, scanning ends once the positions seen so far
/// cover the whole of `traffic`.
pub fn overlap_intent(action: Action, traffic: &TimedFlowSet, tmf: &TmfTable, early_stop: bool) -> OverlapScan {
    let mut hits = Vec::new();
    let mut remaining = traffic.clone();
    let mut scanned = 0;
    for k in 1..=tmf.len() {
        if early_stop && remaining.is_empty() {
            break;
        }
        scanned += 1;
        let t = tmf.at(k);
        if tmf.action_at(k) != action {
            let hit = traffic.and(t).expect("TMFs share the context");
            if !hit.is_empty() {
                hits.push((k, hit));
            }
        }
        remaining.diff_assign(t).expect("TMFs share the context");
    }
    OverlapScan { hits, scanned }
}
