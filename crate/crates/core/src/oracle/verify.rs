use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{enumerate_flows, flow_paths, rule_matches, sample_dates, simulate_path};
use crate::conflict::ResolvedIntent;
use crate::flowset::{AclSet, Action, FlowKey};
use crate::net::{Network, NotFound, Path, ProtocolPort};

/// Violations listed per intent; further ones are only counted.
const LISTED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub flow: FlowKey,
    pub date: NaiveDate,
    pub path: Path,
    pub expected: Action,
    pub got: Action,
    pub protected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentReport {
    pub intent_id: usize,
    pub status: Status,
    pub checked_flows: usize,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
    /// Protected paths whose outcome held but whose deciding interface moved.
    pub deciding_drift: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub intents: Vec<IntentReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.intents.iter().all(|r| r.status == Status::Pass)
    }
}

enum Check {
    Ok { drift: bool },
    Bad(Violation),
}

/// Replays every intent flow on every path before and after deployment.
/// Permit flows must pass every interface, deny flows must be dropped on
/// every path, and protected flows must keep their previous outcome.
pub fn verify_intents(
    network: &Network,
    apps: &[ProtocolPort],
    before: &AclSet,
    after: &AclSet,
    resolved: &[ResolvedIntent],
) -> Result<VerifyReport, NotFound> {
    let ranges = before
        .rules()
        .chain(after.rules())
        .chain(resolved.iter().flat_map(|r| r.intent_rules.iter().chain(&r.protect_rules)))
        .map(|r| &r.time);
    let dates = sample_dates(ranges);
    let flows = enumerate_flows(network, apps);
    let routed: Vec<(FlowKey, Vec<Path>)> = flows
        .into_iter()
        .map(|f| flow_paths(network, &f).map(|p| (f, p)))
        .collect::<Result<_, _>>()?;

    let mut intents = Vec::new();
    for ri in resolved {
        let checks: Vec<Check> = routed
            .par_iter()
            .flat_map_iter(|(flow, paths)| {
                dates.iter().flat_map(move |&date| {
                    let wanted = ri.intent_rules.iter().any(|r| rule_matches(r, flow, date));
                    let protected = wanted && ri.protect_rules.iter().any(|r| rule_matches(r, flow, date));
                    paths.iter().filter(move |_| wanted).map(move |path| {
                        let now = simulate_path(after, path, flow, date);
                        let expected = if protected { simulate_path(before, path, flow, date) } else { now.clone() };
                        let expected_outcome = if protected { expected.outcome } else { ri.action };
                        if now.outcome == expected_outcome {
                            Check::Ok { drift: protected && now.deciding != expected.deciding }
                        } else {
                            Check::Bad(Violation {
                                flow: *flow,
                                date,
                                path: path.clone(),
                                expected: expected_outcome,
                                got: now.outcome,
                                protected,
                            })
                        }
                    })
                })
            })
            .collect();
        let checked_flows = routed
            .iter()
            .filter(|(f, _)| dates.iter().any(|&d| ri.intent_rules.iter().any(|r| rule_matches(r, f, d))))
            .count();
        let mut violations = Vec::new();
        let mut violation_count = 0;
        let mut deciding_drift = 0;
        for c in checks {
            match c {
                Check::Ok { drift } => deciding_drift += usize::from(drift),
                Check::Bad(v) => {
                    violation_count += 1;
                    if violations.len() < LISTED {
                        violations.push(v);
                    }
                }
            }
        }
        intents.push(IntentReport {
            intent_id: ri.id,
            status: if violation_count == 0 { Status::Pass } else { Status::Fail },
            checked_flows,
            violation_count,
            violations,
            deciding_drift,
        });
    }
    Ok(VerifyReport { intents })
}
