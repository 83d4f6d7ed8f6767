use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{GatewayPrefix, Interface, Path, Prefix, Snmt, SnmtEntry, Topology};
use crate::error::NetworkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routing {
    pub k: usize,
}

impl Default for Routing {
    fn default() -> Self {
        Self { k: 4 }
    }
}

/// Entity table kept in document order so duplicates can be reported.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityList(pub Vec<(String, Vec<GatewayPrefix>)>);

impl Serialize for EntityList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for EntityList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = EntityList;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from entity name to gateway-prefix pairs")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<EntityList, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = m.next_entry::<String, Vec<GatewayPrefix>>()? {
                    out.push((k, v));
                }
                Ok(EntityList(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// On-disk network fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub routers: Vec<String>,
    pub interfaces: Vec<Interface>,
    pub links: Vec<(Interface, Interface)>,
    pub snmt: EntityList,
    pub finest_prefixes: Vec<Prefix>,
    #[serde(default)]
    pub routing: Routing,
}

/// Summary counts reported after parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NetworkStats {
    pub routers: usize,
    pub links: usize,
    pub interfaces: usize,
    pub entities: usize,
}

/// Topology, SNMT and the precomputed paths between every pair of SNMT
/// gateways. Immutable once built.
#[derive(Debug, Clone)]
pub struct Network {
    topology: Topology,
    snmt: Snmt,
    paths: Arc<BTreeMap<(Interface, Interface), Vec<Path>>>,
}

impl Network {
    pub fn new(topology: Topology, snmt: Snmt) -> Result<Self, NetworkError> {
        let mut names = HashSet::new();
        for e in snmt.entries() {
            if !names.insert(e.name.as_str()) {
                return Err(NetworkError::DuplicateEntity(e.name.clone()));
            }
            for gp in &e.pairs {
                if !topology.has_interface(&gp.gateway) {
                    return Err(NetworkError::UnknownGateway {
                        entity: e.name.clone(),
                        gateway: gp.gateway.to_string(),
                    });
                }
                let covered = snmt.finest_prefixes().iter().any(|a| gp.prefix.contains(a))
                    && !snmt.finest_prefixes().iter().any(|a| a.contains(&gp.prefix) && *a != gp.prefix);
                if !covered {
                    return Err(NetworkError::UncoveredPrefix {
                        entity: e.name.clone(),
                        prefix: gp.prefix.to_string(),
                    });
                }
            }
        }
        let gateways: Vec<Interface> = snmt.all_gateways().into_iter().collect();
        let pairs: Vec<(Interface, Interface)> = gateways
            .iter()
            .flat_map(|s| gateways.iter().filter(move |d| *d != s).map(move |d| (s.clone(), d.clone())))
            .collect();
        let paths = pairs
            .into_par_iter()
            .map(|(s, d)| {
                let p = topology.paths_between(&s, &d);
                ((s, d), p)
            })
            .collect::<BTreeMap<_, _>>();
        Ok(Self { topology, snmt, paths: Arc::new(paths) })
    }

    pub fn from_doc(doc: &NetworkDoc) -> Result<Self, NetworkError> {
        let topology = Topology::new(
            doc.routers.clone(),
            doc.interfaces.clone(),
            doc.links.clone(),
            doc.routing.k,
        )?;
        let entries = doc
            .snmt
            .0
            .iter()
            .map(|(name, pairs)| SnmtEntry { name: name.clone(), pairs: pairs.clone() })
            .collect();
        let snmt = Snmt::new(entries, doc.finest_prefixes.clone());
        Network::new(topology, snmt)
    }

    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            routers: self.topology.routers().to_vec(),
            interfaces: self.topology.interfaces().to_vec(),
            links: self.topology.links().to_vec(),
            snmt: EntityList(
                self.snmt.entries().iter().map(|e| (e.name.clone(), e.pairs.clone())).collect(),
            ),
            finest_prefixes: self.snmt.finest_prefixes().to_vec(),
            routing: Routing { k: self.topology.k() },
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn snmt(&self) -> &Snmt {
        &self.snmt
    }

    pub fn stats(&self) -> NetworkStats {
        NetworkStats {
            routers: self.topology.routers().len(),
            links: self.topology.links().len(),
            interfaces: self.topology.interfaces().len(),
            entities: self.snmt.len(),
        }
    }

    /// Cached paths between two SNMT gateways.
    pub fn paths(&self, src: &Interface, dst: &Interface) -> &[Path] {
        self.paths.get(&(src.clone(), dst.clone())).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All paths between any source gateway and any destination gateway.
    pub fn paths_for_gateways(
        &self,
        src: &BTreeSet<Interface>,
        dst: &BTreeSet<Interface>,
    ) -> BTreeSet<Path> {
        let mut out = BTreeSet::new();
        for s in src {
            for d in dst {
                out.extend(self.paths(s, d).iter().cloned());
            }
        }
        out
    }

    /// Paths carrying traffic from prefix `src` to prefix `dst`. Traffic
    /// between identical prefixes never enters the network.
    pub fn paths_for_prefixes(&self, src: &Prefix, dst: &Prefix) -> BTreeSet<Path> {
        if src == dst {
            return BTreeSet::new();
        }
        self.paths_for_gateways(&self.snmt.gateways_for(src), &self.snmt.gateways_for(dst))
    }
}

pub fn parse_network(text: &str) -> Result<Network, NetworkError> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| NetworkError::Json(e.to_string()))?;
    Network::from_doc(&doc)
}

pub fn print_network(net: &Network) -> String {
    serde_json::to_string_pretty(&net.to_doc()).expect("network documents always serialize")
}
