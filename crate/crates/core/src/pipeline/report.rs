use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Stage;
use crate::conflict::ConflictRecord;
use crate::deploy::Strategy;
use crate::flowset::{FlowContext, FlowKey};

/// Flows listed per conflict record.
const SAMPLES: usize = 5;

/// One row of a conflict report file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictEntry {
    pub intent_id: usize,
    pub interface: String,
    pub rule_position: usize,
    pub is_default: bool,
    /// Each atom as the time ranges covering exactly it.
    pub time_atoms: Vec<String>,
    pub flow_count: usize,
    pub sample_flows: Vec<FlowKey>,
    /// Hex bit-string per listed atom, present with full sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_sets: Option<Vec<String>>,
}

pub fn conflict_report(records: &[ConflictRecord], ctx: &FlowContext, full_sets: bool) -> Vec<ConflictEntry> {
    let mut rows: Vec<ConflictEntry> = records
        .iter()
        .map(|r| {
            let atoms: Vec<usize> = r.flows.iter().filter(|(_, s)| !s.is_empty()).map(|(a, _)| a).collect();
            let time_atoms = atoms
                .iter()
                .map(|&a| ctx.time.cover(&[a]).iter().map(ToString::to_string).collect::<Vec<_>>().join(" | "))
                .collect();
            let mut sample: Vec<usize> = r.flows.elements().map(|(_, i)| i).collect();
            sample.sort_unstable();
            sample.dedup();
            ConflictEntry {
                intent_id: r.intent_id,
                interface: r.interface.to_string(),
                rule_position: r.position,
                is_default: r.is_default,
                time_atoms,
                flow_count: r.flows.count(),
                sample_flows: sample.into_iter().take(SAMPLES).map(|i| ctx.gft.key(i)).collect(),
                flow_sets: full_sets.then(|| atoms.iter().map(|&a| r.flows.at(a).to_hex()).collect()),
            }
        })
        .collect();
    rows.sort_by(|a, b| (a.intent_id, &a.interface, a.rule_position).cmp(&(b.intent_id, &b.interface, b.rule_position)));
    rows
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentSummary {
    pub id: usize,
    pub text: String,
    pub stage: Stage,
    pub round: u32,
    pub rules: usize,
    pub conflicts: usize,
    pub protect_rules: usize,
    pub protect_flows: usize,
    /// Why the intent was not approved, when it was not.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub objective: u64,
    pub dedup_savings: u64,
    /// Rules added per intent.
    pub per_intent: BTreeMap<usize, u64>,
    pub verified: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub intents: Vec<IntentSummary>,
    pub strategies: Vec<StrategySummary>,
    pub applied: Option<Strategy>,
    pub verified: Option<bool>,
    /// Stages computed by this invocation, in order.
    pub stages_run: Vec<Stage>,
}

impl RunReport {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategySummary> {
        self.strategies.iter().find(|x| x.strategy == s)
    }

    /// `strategy,objective,dedup_savings,verified` rows.
    pub fn comparison_csv(&self) -> String {
        let mut out = String::from("strategy,objective,dedup_savings,verified\n");
        for s in &self.strategies {
            let _ = writeln!(out, "{},{},{},{}", s.strategy, s.objective, s.dedup_savings, s.verified);
        }
        out
    }
}
