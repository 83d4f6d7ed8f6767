use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{first_match, flow_paths, rule_matches};
use crate::conflict::{ConflictRecord, Intent};
use crate::flowset::{AclSet, FlowContext};
use crate::net::{Interface, Network, NotFound};

/// Largest universe the brute-force referee accepts.
pub const ORACLE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("universe of {0} flows exceeds the oracle limit of {ORACLE_LIMIT}")]
    TooLarge(usize),
    #[error(transparent)]
    NotFound(#[from] NotFound),
}

/// Conflicts found flow by flow: for each intent flow and time atom, every
/// interface on one of the flow's paths whose first matching rule takes the
/// opposite action. `ctx` only names flows and atoms in the output.
pub fn brute_force_conflicts(
    intents: &[Intent],
    network: &Network,
    acls: &AclSet,
    ctx: &FlowContext,
) -> Result<Vec<ConflictRecord>, OracleError> {
    let gft = &ctx.gft;
    if gft.len() > ORACLE_LIMIT {
        return Err(OracleError::TooLarge(gft.len()));
    }
    let mut found: BTreeMap<(usize, Interface, usize), Vec<(usize, usize)>> = BTreeMap::new();
    let mut defaults: BTreeMap<Interface, usize> = BTreeMap::new();
    for intent in intents {
        for atom in 0..ctx.time.len() {
            let date = ctx.time.representative(atom);
            for i in 0..gft.len() {
                let flow = gft.key(i);
                if !intent.rules.iter().any(|r| rule_matches(r, &flow, date)) {
                    continue;
                }
                let ifaces: BTreeSet<Interface> =
                    flow_paths(network, &flow)?.into_iter().flat_map(|p| p.0).collect();
                for iface in ifaces {
                    let acl = acls.get(&iface);
                    let (action, pos) = first_match(&acl, &flow, date);
                    if action != intent.action {
                        defaults.insert(iface.clone(), acl.rules.len() + 1);
                        found.entry((intent.id, iface, pos)).or_default().push((atom, i));
                    }
                }
            }
        }
    }
    Ok(found
        .into_iter()
        .map(|((intent_id, interface, position), members)| {
            let mut flows = ctx.empty();
            for (atom, i) in members {
                flows.at_mut(atom).insert(i);
            }
            ConflictRecord { is_default: defaults[&interface] == position, intent_id, interface, position, flows }
        })
        .collect())
}
