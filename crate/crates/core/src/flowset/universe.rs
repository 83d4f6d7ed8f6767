use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{FlowSet, Rule};
use crate::error::FlowError;
use crate::net::{Prefix, Protocol, ProtocolPort, Snmt};

/// One fine-grained flow: a source atom, a destination atom and an
/// application atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub src: Prefix,
    pub dst: Prefix,
    pub app: ProtocolPort,
}

/// Coordinates of a flow inside the universe grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowCoord {
    pub src: usize,
    pub dst: usize,
    pub app: usize,
}

/// The universe of fine-grained flows with one precomputed index set per
/// attribute value.
///
/// Positions are laid out with the source atom varying fastest, then the
/// destination atom, then the application atom.
#[derive(Debug, Clone)]
pub struct GlobalFlowTable {
    srcs: Vec<Prefix>,
    dsts: Vec<Prefix>,
    apps: Vec<ProtocolPort>,
    src_pos: HashMap<Prefix, usize>,
    dst_pos: HashMap<Prefix, usize>,
    app_pos: HashMap<ProtocolPort, usize>,
    src_index: Vec<FlowSet>,
    dst_index: Vec<FlowSet>,
    app_index: Vec<FlowSet>,
}

pub fn build_universe(snmt: &Snmt, app_catalog: &[ProtocolPort]) -> Result<GlobalFlowTable, FlowError> {
    GlobalFlowTable::new(snmt.finest_prefixes().to_vec(), app_catalog.to_vec())
}

impl GlobalFlowTable {
    /// Builds the universe over `atoms` (used for both source and destination)
    /// and the concrete application atoms `apps`.
    pub fn new(atoms: Vec<Prefix>, apps: Vec<ProtocolPort>) -> Result<Self, FlowError> {
        Self::with_axes(atoms.clone(), atoms, apps)
    }

    /// Universe with distinct source and destination atom lists.
    pub fn with_axes(srcs: Vec<Prefix>, dsts: Vec<Prefix>, mut apps: Vec<ProtocolPort>) -> Result<Self, FlowError> {
        let srcs = normalize_atoms(srcs)?;
        let dsts = normalize_atoms(dsts)?;
        if apps.is_empty() {
            return Err(FlowError::EmptyCatalog);
        }
        apps.sort();
        for w in apps.windows(2) {
            if w[0] == w[1] {
                return Err(FlowError::DuplicateApp(w[0].to_string()));
            }
        }
        if let Some(a) = apps.iter().find(|a| a.is_any() || (a.protocol().takes_port() && a.port().is_none())) {
            return Err(FlowError::AbstractApp(a.to_string()));
        }

        let (ns, nd, na) = (srcs.len(), dsts.len(), apps.len());
        let len = ns * nd * na;
        let mut src_index = vec![FlowSet::empty(len); ns];
        let mut dst_index = vec![FlowSet::empty(len); nd];
        let mut app_index = vec![FlowSet::empty(len); na];
        for i in 0..len {
            src_index[i % ns].insert(i);
            dst_index[i / ns % nd].insert(i);
            app_index[i / (ns * nd)].insert(i);
        }
        Ok(Self {
            src_pos: srcs.iter().enumerate().map(|(i, a)| (*a, i)).collect(),
            dst_pos: dsts.iter().enumerate().map(|(i, a)| (*a, i)).collect(),
            app_pos: apps.iter().enumerate().map(|(i, a)| (*a, i)).collect(),
            srcs,
            dsts,
            apps,
            src_index,
            dst_index,
            app_index,
        })
    }

    pub fn len(&self) -> usize {
        self.srcs.len() * self.dsts.len() * self.apps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn src_atoms(&self) -> &[Prefix] {
        &self.srcs
    }

    pub fn dst_atoms(&self) -> &[Prefix] {
        &self.dsts
    }

    pub fn apps(&self) -> &[ProtocolPort] {
        &self.apps
    }

    pub fn empty_set(&self) -> FlowSet {
        FlowSet::empty(self.len())
    }

    pub fn full_set(&self) -> FlowSet {
        FlowSet::full(self.len())
    }

    pub fn position(&self, c: FlowCoord) -> usize {
        let (ns, nd) = (self.srcs.len(), self.dsts.len());
        (c.app * nd + c.dst) * ns + c.src
    }

    pub fn coord(&self, i: usize) -> FlowCoord {
        let (ns, nd) = (self.srcs.len(), self.dsts.len());
        FlowCoord { src: i % ns, dst: i / ns % nd, app: i / (ns * nd) }
    }

    pub fn key(&self, i: usize) -> FlowKey {
        let c = self.coord(i);
        FlowKey { src: self.srcs[c.src], dst: self.dsts[c.dst], app: self.apps[c.app] }
    }

    pub fn index_of(&self, k: &FlowKey) -> Option<usize> {
        let src = self.src_atom_index(&k.src)?;
        let dst = self.dst_atom_index(&k.dst)?;
        let app = self.app_index(&k.app)?;
        Some(self.position(FlowCoord { src, dst, app }))
    }

    pub fn src_atom_index(&self, p: &Prefix) -> Option<usize> {
        self.src_pos.get(p).copied()
    }

    pub fn dst_atom_index(&self, p: &Prefix) -> Option<usize> {
        self.dst_pos.get(p).copied()
    }

    pub fn app_index(&self, a: &ProtocolPort) -> Option<usize> {
        self.app_pos.get(a).copied()
    }

    /// Index set of flows whose source atom is `atom`.
    pub fn src_attr(&self, atom: &Prefix) -> Option<&FlowSet> {
        self.src_atom_index(atom).map(|i| &self.src_index[i])
    }

    pub fn dst_attr(&self, atom: &Prefix) -> Option<&FlowSet> {
        self.dst_atom_index(atom).map(|i| &self.dst_index[i])
    }

    pub fn app_attr(&self, app: &ProtocolPort) -> Option<&FlowSet> {
        self.app_index(app).map(|i| &self.app_index[i])
    }

    /// Source atoms covered by `p`; `None` means every atom. Fails when `p`
    /// cuts through an atom.
    pub fn src_atoms_within(&self, p: Option<&Prefix>) -> Result<Vec<usize>, FlowError> {
        atoms_within(&self.srcs, p)
    }

    pub fn dst_atoms_within(&self, p: Option<&Prefix>) -> Result<Vec<usize>, FlowError> {
        atoms_within(&self.dsts, p)
    }

    pub fn apps_covered(&self, app: &ProtocolPort) -> Vec<usize> {
        (0..self.apps.len()).filter(|&i| app.covers(&self.apps[i])).collect()
    }

    fn union_of(&self, index: &[FlowSet], members: &[usize]) -> FlowSet {
        if members.len() == index.len() {
            return self.full_set();
        }
        let mut acc = self.empty_set();
        for &m in members {
            acc.or_assign(&index[m]).expect("index sets share the universe length");
        }
        acc
    }

    /// Flows matched by the rule's src, dst and application fields; time is
    /// handled by [`super::TimeAtoms`].
    pub fn expand_rule(&self, r: &Rule) -> Result<FlowSet, FlowError> {
        let src = self.src_atoms_within(r.src.as_ref())?;
        let dst = self.dst_atoms_within(r.dst.as_ref())?;
        let apps = self.apps_covered(&r.app);
        let mut set = self.union_of(&self.src_index, &src);
        set.and_assign(&self.union_of(&self.dst_index, &dst))?;
        set.and_assign(&self.union_of(&self.app_index, &apps))?;
        Ok(set)
    }

    /// One flow per line as `idx,src,dst,proto,port`, followed by
    /// `name=hex` lines for the given sets.
    pub fn debug_dump(&self, named: &[(&str, &FlowSet)]) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let k = self.key(i);
            let port = k.app.port().map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{i},{},{},{},{port}", k.src, k.dst, k.app.protocol().name());
        }
        for (name, set) in named {
            let _ = writeln!(out, "{name}={}", set.to_hex());
        }
        out
    }
}

fn normalize_atoms(mut atoms: Vec<Prefix>) -> Result<Vec<Prefix>, FlowError> {
    if atoms.is_empty() {
        return Err(FlowError::NoAtoms);
    }
    atoms.sort();
    atoms.dedup();
    for w in atoms.windows(2) {
        if w[0].overlaps(&w[1]) {
            return Err(FlowError::OverlappingAtoms(w[0].to_string(), w[1].to_string()));
        }
    }
    Ok(atoms)
}

fn atoms_within(atoms: &[Prefix], p: Option<&Prefix>) -> Result<Vec<usize>, FlowError> {
    let Some(p) = p else {
        return Ok((0..atoms.len()).collect());
    };
    let mut out = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        if p.contains(a) {
            out.push(i);
        } else if a.contains(p) {
            return Err(FlowError::NotDecomposable(p.to_string()));
        }
    }
    Ok(out)
}

/// Concrete application atoms for a catalog: drops abstract entries such as
/// `ip` or a bare `tcp`.
pub fn concrete_apps(apps: impl IntoIterator<Item = ProtocolPort>) -> Vec<ProtocolPort> {
    let mut out: Vec<ProtocolPort> = apps
        .into_iter()
        .filter(|a| a.protocol() != Protocol::AnyIp && (!a.protocol().takes_port() || a.port().is_some()))
        .collect();
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::flowset::Action;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    fn two_by_two() -> GlobalFlowTable {
        GlobalFlowTable::with_axes(
            vec![p("10.0.0.0/32"), p("10.0.0.1/32")],
            vec![p("11.0.0.0/32"), p("11.0.0.1/32")],
            vec![ProtocolPort::tcp(80)],
        )
        .unwrap()
    }

    #[test]
    fn product_size() {
        let atoms = vec![p("10.0.0.0/24"), p("10.0.1.0/24"), p("10.0.2.0/24")];
        let apps = (1..=5).map(ProtocolPort::tcp).collect();
        assert_eq!(GlobalFlowTable::new(atoms, apps).unwrap().len(), 45);
    }

    #[test]
    fn rejects_bad_inputs() {
        let apps = vec![ProtocolPort::tcp(80)];
        assert!(matches!(
            GlobalFlowTable::new(vec![p("10.0.0.0/8"), p("10.1.0.0/16")], apps.clone()),
            Err(FlowError::OverlappingAtoms(..))
        ));
        assert_eq!(GlobalFlowTable::new(vec![p("10.0.0.0/8")], vec![]).unwrap_err(), FlowError::EmptyCatalog);
        assert!(GlobalFlowTable::new(vec![p("10.0.0.0/8")], vec![ProtocolPort::ANY]).is_err());
        assert!(GlobalFlowTable::new(vec![p("10.0.0.0/8")], vec![ProtocolPort::tcp(1), ProtocolPort::tcp(1)]).is_err());
    }

    #[test]
    fn expansion_errors_name_the_prefix() {
        let gft = two_by_two();
        let r = Rule::new(Action::Deny, Some(p("10.0.0.0/31")), None, ProtocolPort::ANY);
        assert!(gft.expand_rule(&r).is_ok());
        let table = GlobalFlowTable::new(vec![p("10.0.0.0/24")], vec![ProtocolPort::tcp(80)]).unwrap();
        let r = Rule::new(Action::Deny, Some(p("10.0.0.0/25")), None, ProtocolPort::ANY);
        assert_eq!(table.expand_rule(&r), Err(FlowError::NotDecomposable("10.0.0.0/25".into())));
    }

    #[test]
    fn attr_index_matches_universe() {
        let gft = GlobalFlowTable::new(
            vec![p("10.0.0.0/24"), p("10.0.1.0/24"), p("10.0.2.0/24")],
            vec![ProtocolPort::tcp(80), ProtocolPort::udp(53)],
        )
        .unwrap();
        for i in 0..gft.len() {
            let k = gft.key(i);
            assert_eq!(gft.index_of(&k), Some(i));
            for a in gft.src_atoms() {
                assert_eq!(gft.src_attr(a).unwrap().contains(i), k.src == *a);
                assert_eq!(gft.dst_attr(a).unwrap().contains(i), k.dst == *a);
            }
            for a in gft.apps() {
                assert_eq!(gft.app_attr(a).unwrap().contains(i), k.app == *a);
            }
        }
    }

    #[test]
    fn dump_lists_every_flow() {
        let gft = two_by_two();
        let set = gft.src_attr(&p("10.0.0.0/32")).unwrap();
        let dump = gft.debug_dump(&[("src0", set)]);
        assert_eq!(dump.lines().count(), gft.len() + 1);
        assert!(dump.starts_with("0,10.0.0.0/32,11.0.0.0/32,tcp,80\n1,10.0.0.1/32,11.0.0.0/32,tcp,80\n"));
        assert!(dump.ends_with("\nsrc0=a\n"));
    }

    fn widen(r: &Rule, which: u8) -> Rule {
        let mut w = r.clone();
        match which {
            0 => w.src = w.src.and_then(|s| s.parent()),
            1 => w.dst = w.dst.and_then(|d| d.parent()),
            _ => w.app = ProtocolPort::proto(w.app.protocol()),
        }
        w
    }

    proptest! {
        #[test]
        fn widening_is_monotone(s in 0u32..8, d in 0u32..8, port in 1u16..4, which in 0u8..3) {
            let atoms: Vec<Prefix> = (0..8).map(|i| Prefix::truncating(0x0a00_0000 + i, 32)).collect();
            let gft = GlobalFlowTable::new(atoms, (1..4).map(ProtocolPort::tcp).collect()).unwrap();
            let r = Rule::new(
                Action::Deny,
                Some(Prefix::truncating(0x0a00_0000 + s, 32)),
                Some(Prefix::truncating(0x0a00_0000 + d, 32)),
                ProtocolPort::tcp(port),
            );
            let narrow = gft.expand_rule(&r).unwrap();
            let wide = gft.expand_rule(&widen(&r, which)).unwrap();
            prop_assert!(narrow.is_subset(&wide).unwrap());
        }
    }
}
