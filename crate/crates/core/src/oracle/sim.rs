use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::flowset::{earliest_date, latest_date, Acl, AclSet, Action, FlowKey, Rule};
use crate::net::{snmt_match, Interface, Network, NotFound, Path, Prefix, ProtocolPort, TimeRange};

/// Whether `rule` matches the flow on `date`.
pub fn rule_matches(rule: &Rule, flow: &FlowKey, date: NaiveDate) -> bool {
    rule.src.is_none_or(|s| s.contains(&flow.src))
        && rule.dst.is_none_or(|d| d.contains(&flow.dst))
        && rule.app.covers(&flow.app)
        && rule.time.contains(date)
}

/// Action and 1-based position of the first rule matching the flow; the
/// default answers at `rules.len() + 1`.
pub fn first_match(acl: &Acl, flow: &FlowKey, date: NaiveDate) -> (Action, usize) {
    for (i, r) in acl.rules.iter().enumerate() {
        if rule_matches(r, flow, date) {
            return (r.action, i + 1);
        }
    }
    (acl.default, acl.rules.len() + 1)
}

/// Paths between every gateway of the flow's source and of its destination.
pub fn flow_paths(network: &Network, flow: &FlowKey) -> Result<Vec<Path>, NotFound> {
    let srcs = snmt_match(&flow.src, network.snmt())?;
    let dsts = snmt_match(&flow.dst, network.snmt())?;
    let mut out = BTreeSet::new();
    if flow.src != flow.dst {
        for s in &srcs {
            for d in &dsts {
                if s.gateway != d.gateway {
                    out.extend(network.topology().paths_between(&s.gateway, &d.gateway));
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub path: Path,
    pub outcome: Action,
    /// Interface and position that decided the outcome.
    pub deciding: (Interface, usize),
}

/// Outcome on each path: denied at the first denying interface, permitted
/// when every interface permits.
pub fn simulate_flow(network: &Network, acls: &AclSet, flow: &FlowKey, date: NaiveDate) -> Result<Vec<Verdict>, NotFound> {
    Ok(flow_paths(network, flow)?
        .into_iter()
        .map(|path| simulate_path(acls, &path, flow, date))
        .collect())
}

pub fn simulate_path(acls: &AclSet, path: &Path, flow: &FlowKey, date: NaiveDate) -> Verdict {
    let mut last = None;
    for iface in path.interfaces() {
        let (action, pos) = first_match(&acls.get(iface), flow, date);
        if action == Action::Deny {
            return Verdict { path: path.clone(), outcome: Action::Deny, deciding: (iface.clone(), pos) };
        }
        last = Some((iface.clone(), pos));
    }
    let deciding = last.expect("paths have at least two interfaces");
    Verdict { path: path.clone(), outcome: Action::Permit, deciding }
}

/// Dates that hit every (date interval, weekday) region cut out by the
/// windows of `ranges`: the week starting at each window boundary. Dates
/// outside the modeled span are skipped.
pub fn sample_dates<'a>(ranges: impl IntoIterator<Item = &'a TimeRange>) -> Vec<NaiveDate> {
    let mut starts = BTreeSet::from([earliest_date()]);
    for r in ranges {
        if let Some((s, e)) = r.window() {
            starts.insert(s);
            if let Some(after) = e.checked_add_days(Days::new(1)) {
                starts.insert(after);
            }
        }
    }
    let mut out = BTreeSet::new();
    for s in starts {
        for k in 0..7 {
            if let Some(d) = s.checked_add_days(Days::new(k)).filter(|d| *d <= latest_date()) {
                out.insert(d);
            }
        }
    }
    out.into_iter().collect()
}

/// Every (src, dst, app) combination over the network's finest prefixes.
pub fn enumerate_flows(network: &Network, apps: &[ProtocolPort]) -> Vec<FlowKey> {
    let atoms: &[Prefix] = network.snmt().finest_prefixes();
    let mut out = Vec::with_capacity(atoms.len() * atoms.len() * apps.len());
    for &app in apps {
        for &dst in atoms {
            for &src in atoms {
                out.push(FlowKey { src, dst, app });
            }
        }
    }
    out
}
