use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::flowset::{FlowCoord, FlowKey, FlowSet, GlobalFlowTable};
use crate::net::{snmt_match, Interface, Network, NotFound, Path};

/// Routing facts for every (source atom, destination atom) pair of a
/// universe: the paths the pair's traffic may take and, per interface, the
/// flows whose paths traverse it.
#[derive(Debug, Clone)]
pub struct RouteIndex {
    n_src: usize,
    pair_paths: Vec<Arc<BTreeSet<Path>>>,
    on_path: BTreeMap<Interface, FlowSet>,
    len: usize,
}

impl RouteIndex {
    pub fn new(network: &Network, gft: &GlobalFlowTable) -> Self {
        let (srcs, dsts) = (gft.src_atoms(), gft.dst_atoms());
        let mut shared: HashMap<(BTreeSet<Interface>, BTreeSet<Interface>), Arc<BTreeSet<Path>>> = HashMap::new();
        let mut pair_paths = Vec::with_capacity(srcs.len() * dsts.len());
        let mut pairs_at: BTreeMap<Interface, Vec<(usize, usize)>> = BTreeMap::new();
        for (di, d) in dsts.iter().enumerate() {
            let dgw = network.snmt().gateways_for(d);
            for (si, s) in srcs.iter().enumerate() {
                let paths = if s == d {
                    Arc::new(BTreeSet::new())
                } else {
                    let sgw = network.snmt().gateways_for(s);
                    shared
                        .entry((sgw, dgw.clone()))
                        .or_insert_with_key(|(a, b)| Arc::new(network.paths_for_gateways(a, b)))
                        .clone()
                };
                let ifaces: BTreeSet<&Interface> = paths.iter().flat_map(|p| p.interfaces()).collect();
                for i in ifaces {
                    pairs_at.entry(i.clone()).or_default().push((si, di));
                }
                pair_paths.push(paths);
            }
        }
        let on_path = pairs_at
            .into_iter()
            .map(|(iface, pairs)| {
                let mut mask = gft.empty_set();
                for app in 0..gft.apps().len() {
                    for &(src, dst) in &pairs {
                        mask.insert(gft.position(FlowCoord { src, dst, app }));
                    }
                }
                (iface, mask)
            })
            .collect();
        Self { n_src: srcs.len(), pair_paths, on_path, len: gft.len() }
    }

    /// Paths of the flows at universe coordinates `(src, dst)`.
    pub fn pair_paths(&self, src: usize, dst: usize) -> &BTreeSet<Path> {
        &self.pair_paths[dst * self.n_src + src]
    }

    /// Flows whose paths traverse `iface`.
    pub fn on_path(&self, iface: &Interface) -> FlowSet {
        self.on_path.get(iface).cloned().unwrap_or_else(|| FlowSet::empty(self.len))
    }

    pub fn on_path_ref(&self, iface: &Interface) -> Option<&FlowSet> {
        self.on_path.get(iface)
    }

    /// Interfaces lying on a path of at least one flow.
    pub fn interfaces(&self) -> impl Iterator<Item = &Interface> {
        self.on_path.keys()
    }

    /// Union of the paths of every flow in `flows`.
    pub fn paths_of(&self, gft: &GlobalFlowTable, flows: &FlowSet) -> BTreeSet<Path> {
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        for i in flows.iter() {
            let c = gft.coord(i);
            if seen.insert((c.src, c.dst)) {
                out.extend(self.pair_paths(c.src, c.dst).iter().cloned());
            }
        }
        out
    }

    /// Interfaces on which any flow of `flows` travels.
    pub fn interfaces_of(&self, flows: &FlowSet) -> Vec<Interface> {
        self.on_path
            .iter()
            .filter(|(_, m)| m.intersects(flows).expect("masks share the universe"))
            .map(|(i, _)| i.clone())
            .collect()
    }
}

/// True when `iface` lies on a path between a gateway matching the flow's
/// source and one matching its destination.
pub fn validate_interface_path(iface: &Interface, flow: &FlowKey, network: &Network) -> Result<bool, NotFound> {
    let src = snmt_match(&flow.src, network.snmt())?;
    let dst = snmt_match(&flow.dst, network.snmt())?;
    if flow.src == flow.dst {
        return Ok(false);
    }
    let sgw: BTreeSet<Interface> = src.into_iter().map(|m| m.gateway).collect();
    let dgw: BTreeSet<Interface> = dst.into_iter().map(|m| m.gateway).collect();
    Ok(network.paths_for_gateways(&sgw, &dgw).iter().any(|p| p.contains(iface)))
}
