use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Interface, Prefix};

/// One (gateway, prefix) pair of an entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GatewayPrefix {
    pub gateway: Interface,
    pub prefix: Prefix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnmtEntry {
    pub name: String,
    pub pairs: Vec<GatewayPrefix>,
}

/// A hit returned by [`Snmt::lookup`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SnmtMatch {
    pub entity: String,
    pub gateway: Interface,
    pub prefix: Prefix,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no SNMT entry covers {0}")]
pub struct NotFound(pub Prefix);

/// Semantics-network mapping table: natural-language entity names mapped to
/// gateway interfaces and prefixes, plus the registry of finest prefixes that
/// atomize the flow universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snmt {
    entries: Vec<SnmtEntry>,
    finest: Vec<Prefix>,
}

impl Snmt {
    /// Entries keep the given order; [`super::Network::new`] validates them.
    pub fn new(entries: Vec<SnmtEntry>, mut finest: Vec<Prefix>) -> Self {
        finest.sort();
        finest.dedup();
        Self { entries, finest }
    }

    pub fn entries(&self) -> &[SnmtEntry] {
        &self.entries
    }

    pub fn finest_prefixes(&self) -> &[Prefix] {
        &self.finest
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, name: &str) -> Option<&SnmtEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn has_pair(&self, gateway: &Interface, prefix: &Prefix) -> bool {
        self.entries
            .iter()
            .flat_map(|e| &e.pairs)
            .any(|p| &p.gateway == gateway && &p.prefix == prefix)
    }

    /// Every pair whose prefix equals or contains `p`.
    pub fn lookup(&self, p: &Prefix) -> Result<Vec<SnmtMatch>, NotFound> {
        let hits: Vec<SnmtMatch> = self
            .entries
            .iter()
            .flat_map(|e| {
                e.pairs.iter().filter(|gp| gp.prefix.contains(p)).map(|gp| SnmtMatch {
                    entity: e.name.clone(),
                    gateway: gp.gateway.clone(),
                    prefix: gp.prefix,
                })
            })
            .collect();
        if hits.is_empty() {
            Err(NotFound(*p))
        } else {
            Ok(hits)
        }
    }

    pub fn gateways_for(&self, p: &Prefix) -> BTreeSet<Interface> {
        self.lookup(p).map(|m| m.into_iter().map(|m| m.gateway).collect()).unwrap_or_default()
    }

    pub fn all_gateways(&self) -> BTreeSet<Interface> {
        self.entries.iter().flat_map(|e| e.pairs.iter().map(|p| p.gateway.clone())).collect()
    }

    /// Finest prefixes nested inside `p`.
    pub fn atoms_within(&self, p: &Prefix) -> Vec<Prefix> {
        self.finest.iter().filter(|a| p.contains(a)).copied().collect()
    }

    /// Split into consecutive fragments, preserving entry order.
    pub fn slice(&self, ranges: &[std::ops::Range<usize>]) -> Vec<Snmt> {
        ranges
            .iter()
            .map(|r| Snmt { entries: self.entries[r.clone()].to_vec(), finest: self.finest.clone() })
            .collect()
    }
}

pub fn snmt_match(p: &Prefix, snmt: &Snmt) -> Result<Vec<SnmtMatch>, NotFound> {
    snmt.lookup(p)
}
