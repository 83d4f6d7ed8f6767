use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{NetworkError, ParseError};

/// A router interface, written `ROUTER@INDEX` (e.g. `R_C@2`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interface {
    router: String,
    index: u16,
}

impl Interface {
    pub fn new(router: impl Into<String>, index: u16) -> Self {
        Self { router: router.into(), index }
    }

    pub fn router(&self) -> &str {
        &self.router
    }

    pub fn index(&self) -> u16 {
        self.index
    }
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.router, self.index)
    }
}

impl FromStr for Interface {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, i) = s.trim().rsplit_once('@').ok_or_else(|| ParseError::Interface(s.into()))?;
        if r.is_empty() {
            return Err(ParseError::Interface(s.into()));
        }
        let index = i.parse().map_err(|_| ParseError::Interface(s.into()))?;
        Ok(Interface::new(r, index))
    }
}

impl Serialize for Interface {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Interface {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Interfaces traversed from a source gateway to a destination gateway,
/// including both ends of every link crossed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(pub Vec<Interface>);

impl Path {
    pub fn interfaces(&self) -> &[Interface] {
        &self.0
    }

    pub fn contains(&self, iface: &Interface) -> bool {
        self.0.contains(iface)
    }

    pub fn source(&self) -> &Interface {
        &self.0[0]
    }

    pub fn destination(&self) -> &Interface {
        self.0.last().expect("paths are never empty")
    }

    /// Router hops: number of links crossed.
    pub fn hops(&self) -> usize {
        (self.0.len() - 2) / 2
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join(" > "))
    }
}

#[derive(Debug, Clone, Copy)]
struct Hop {
    out_iface: usize,
    in_iface: usize,
    to_router: usize,
}

/// Routers, their interfaces, and point-to-point links between interfaces.
#[derive(Debug, Clone)]
pub struct Topology {
    routers: Vec<String>,
    interfaces: Vec<Interface>,
    links: Vec<(Interface, Interface)>,
    k: usize,
    iface_ids: HashMap<Interface, usize>,
    router_ids: HashMap<String, usize>,
    iface_router: Vec<usize>,
    linked: Vec<bool>,
    // sorted by (out_iface, in_iface) so DFS yields lexicographic order
    adjacency: Vec<Vec<Hop>>,
}

impl Topology {
    pub fn new(
        routers: Vec<String>,
        interfaces: Vec<Interface>,
        links: Vec<(Interface, Interface)>,
        k: usize,
    ) -> Result<Self, NetworkError> {
        if routers.is_empty() {
            return Err(NetworkError::NoRouters);
        }
        if k == 0 {
            return Err(NetworkError::BadFanOut);
        }
        let mut router_ids = HashMap::new();
        for (i, r) in routers.iter().enumerate() {
            if router_ids.insert(r.clone(), i).is_some() {
                return Err(NetworkError::DuplicateRouter(r.clone()));
            }
        }
        let mut interfaces = interfaces;
        interfaces.sort();
        let mut iface_ids = HashMap::new();
        let mut iface_router = Vec::with_capacity(interfaces.len());
        for (i, iface) in interfaces.iter().enumerate() {
            if iface_ids.insert(iface.clone(), i).is_some() {
                return Err(NetworkError::DuplicateInterface(iface.to_string()));
            }
            let r = *router_ids
                .get(iface.router())
                .ok_or_else(|| NetworkError::UnknownRouter(iface.to_string()))?;
            iface_router.push(r);
        }
        let mut linked = vec![false; interfaces.len()];
        let mut adjacency: Vec<Vec<Hop>> = vec![Vec::new(); routers.len()];
        for (a, b) in &links {
            let ia = *iface_ids.get(a).ok_or_else(|| NetworkError::DanglingLink(a.to_string()))?;
            let ib = *iface_ids.get(b).ok_or_else(|| NetworkError::DanglingLink(b.to_string()))?;
            for i in [ia, ib] {
                if linked[i] {
                    return Err(NetworkError::InterfaceReused(interfaces[i].to_string()));
                }
                linked[i] = true;
            }
            let (ra, rb) = (iface_router[ia], iface_router[ib]);
            if ra == rb {
                return Err(NetworkError::SelfLink(routers[ra].clone()));
            }
            adjacency[ra].push(Hop { out_iface: ia, in_iface: ib, to_router: rb });
            adjacency[rb].push(Hop { out_iface: ib, in_iface: ia, to_router: ra });
        }
        for hops in &mut adjacency {
            hops.sort_by_key(|h| (h.out_iface, h.in_iface));
        }
        Ok(Self {
            routers,
            interfaces,
            links,
            k,
            iface_ids,
            router_ids,
            iface_router,
            linked,
            adjacency,
        })
    }

    pub fn routers(&self) -> &[String] {
        &self.routers
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn links(&self) -> &[(Interface, Interface)] {
        &self.links
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn has_interface(&self, iface: &Interface) -> bool {
        self.iface_ids.contains_key(iface)
    }

    pub fn has_router(&self, router: &str) -> bool {
        self.router_ids.contains_key(router)
    }

    /// Host-facing interfaces: those not attached to any link.
    pub fn is_edge(&self, iface: &Interface) -> bool {
        self.iface_ids.get(iface).is_some_and(|&i| !self.linked[i])
    }

    fn hop_distances(&self, target: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.routers.len()];
        dist[target] = 0;
        let mut queue = VecDeque::from([target]);
        while let Some(u) = queue.pop_front() {
            for hop in &self.adjacency[u] {
                if dist[hop.to_router] == usize::MAX {
                    dist[hop.to_router] = dist[u] + 1;
                    queue.push_back(hop.to_router);
                }
            }
        }
        dist
    }

    /// Up to `k` loop-free paths between two gateway interfaces, ordered by
    /// hop count and then by interface sequence.
    ///
    /// Identical gateways yield no path; gateways on the same router yield the
    /// single zero-hop path.
    pub fn paths_between(&self, src: &Interface, dst: &Interface) -> Vec<Path> {
        let (Some(&s), Some(&d)) = (self.iface_ids.get(src), self.iface_ids.get(dst)) else {
            return Vec::new();
        };
        if s == d {
            return Vec::new();
        }
        let (rs, rd) = (self.iface_router[s], self.iface_router[d]);
        if rs == rd {
            return vec![Path(vec![src.clone(), dst.clone()])];
        }
        let dist = self.hop_distances(rd);
        if dist[rs] == usize::MAX {
            return Vec::new();
        }
        let mut found: Vec<Vec<usize>> = Vec::new();
        let mut visited = vec![false; self.routers.len()];
        for length in dist[rs]..self.routers.len() {
            let mut seq = vec![s];
            visited[rs] = true;
            self.walk(rs, rd, length, &dist, &mut visited, &mut seq, &mut found);
            visited[rs] = false;
            if found.len() >= self.k {
                break;
            }
        }
        found
            .into_iter()
            .take(self.k)
            .map(|mut seq| {
                seq.push(d);
                Path(seq.into_iter().map(|i| self.interfaces[i].clone()).collect())
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        at: usize,
        target: usize,
        remaining: usize,
        dist: &[usize],
        visited: &mut [bool],
        seq: &mut Vec<usize>,
        found: &mut Vec<Vec<usize>>,
    ) {
        if found.len() >= self.k {
            return;
        }
        if at == target {
            if remaining == 0 {
                found.push(seq.clone());
            }
            return;
        }
        if remaining == 0 {
            return;
        }
        for hop in &self.adjacency[at] {
            let v = hop.to_router;
            if visited[v] || dist[v] == usize::MAX || dist[v] > remaining - 1 {
                continue;
            }
            visited[v] = true;
            seq.push(hop.out_iface);
            seq.push(hop.in_iface);
            self.walk(v, target, remaining - 1, dist, visited, seq, found);
            seq.truncate(seq.len() - 2);
            visited[v] = false;
        }
    }

    /// Paths for every (source, destination) gateway pair, keyed by the pair.
    pub fn k_shortest_paths(
        &self,
        src_gws: &BTreeSet<Interface>,
        dst_gws: &BTreeSet<Interface>,
    ) -> BTreeMap<(Interface, Interface), Vec<Path>> {
        let mut out = BTreeMap::new();
        for s in src_gws {
            for d in dst_gws {
                if s != d {
                    out.insert((s.clone(), d.clone()), self.paths_between(s, d));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iface(s: &str) -> Interface {
        s.parse().unwrap()
    }

    /// Every simple path, sorted and truncated: the slow reference.
    fn brute_force(topo: &Topology, src: &Interface, dst: &Interface) -> Vec<Path> {
        let mut all = Vec::new();
        let (s, d) = (topo.iface_ids[src], topo.iface_ids[dst]);
        if s == d {
            return all;
        }
        let (rs, rd) = (topo.iface_router[s], topo.iface_router[d]);
        fn dfs(
            t: &Topology,
            at: usize,
            rd: usize,
            seen: &mut Vec<usize>,
            seq: &mut Vec<usize>,
            all: &mut Vec<Vec<usize>>,
        ) {
            if at == rd {
                all.push(seq.clone());
                return;
            }
            for hop in &t.adjacency[at] {
                if seen.contains(&hop.to_router) {
                    continue;
                }
                seen.push(hop.to_router);
                seq.push(hop.out_iface);
                seq.push(hop.in_iface);
                dfs(t, hop.to_router, rd, seen, seq, all);
                seq.truncate(seq.len() - 2);
                seen.pop();
            }
        }
        let mut raw = Vec::new();
        dfs(topo, rs, rd, &mut vec![rs], &mut vec![s], &mut raw);
        for mut seq in raw {
            seq.push(d);
            all.push(Path(seq.into_iter().map(|i| topo.interfaces[i].clone()).collect()));
        }
        all.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.cmp(b)));
        all.truncate(topo.k);
        all
    }

    #[test]
    fn chain_has_one_path() {
        let routers = ["S", "A", "B", "D"].map(String::from).to_vec();
        let ifaces = ["S@0", "S@1", "A@1", "A@2", "B@1", "B@2", "D@1", "D@0"].map(iface).to_vec();
        let links = vec![
            (iface("S@1"), iface("A@1")),
            (iface("A@2"), iface("B@1")),
            (iface("B@2"), iface("D@1")),
        ];
        let topo = Topology::new(routers, ifaces, links, 4).unwrap();
        let paths = topo.paths_between(&iface("S@0"), &iface("D@0"));
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].to_string(), "S@0 > S@1 > A@1 > A@2 > B@1 > B@2 > D@1 > D@0");
        assert_eq!(paths[0].hops(), 3);
    }

    #[test]
    fn rejects_bad_documents() {
        assert_eq!(Topology::new(vec![], vec![], vec![], 4).unwrap_err(), NetworkError::NoRouters);
        let err = Topology::new(
            vec!["A".into(), "B".into()],
            vec![iface("A@1")],
            vec![(iface("A@1"), iface("B@1"))],
            4,
        )
        .unwrap_err();
        assert_eq!(err, NetworkError::DanglingLink("B@1".into()));
    }

    fn random_topology(rng: &mut ChaCha8Rng, n: usize) -> Topology {
        let routers: Vec<String> = (0..n).map(|i| format!("R{i}")).collect();
        let mut next = vec![1u16; n];
        let mut ifaces = Vec::new();
        let mut links = Vec::new();
        // spanning tree plus random chords
        let mut edges = Vec::new();
        for v in 1..n {
            edges.push((rng.gen_range(0..v), v));
        }
        for _ in 0..n {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b {
                edges.push((a, b));
            }
        }
        for (a, b) in edges {
            let ia = Interface::new(routers[a].clone(), next[a]);
            next[a] += 1;
            let ib = Interface::new(routers[b].clone(), next[b]);
            next[b] += 1;
            ifaces.push(ia.clone());
            ifaces.push(ib.clone());
            links.push((ia, ib));
        }
        for r in &routers {
            ifaces.push(Interface::new(r.clone(), 0));
        }
        Topology::new(routers, ifaces, links, 4).unwrap()
    }

    #[test]
    fn matches_exhaustive_enumeration_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let topo = random_topology(&mut rng, 10);
            for s in 0..10 {
                for d in 0..10 {
                    let src = Interface::new(format!("R{s}"), 0);
                    let dst = Interface::new(format!("R{d}"), 0);
                    assert_eq!(topo.paths_between(&src, &dst), brute_force(&topo, &src, &dst));
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let (ta, tb) = (random_topology(&mut a, 8), random_topology(&mut b, 8));
        let (s, d) = (Interface::new("R0", 0), Interface::new("R7", 0));
        assert_eq!(ta.paths_between(&s, &d), tb.paths_between(&s, &d));
    }
}
