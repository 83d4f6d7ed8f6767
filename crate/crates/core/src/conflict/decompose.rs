use std::collections::{BTreeMap, BTreeSet};

use crate::flowset::{Action, FlowContext, FlowSet, GlobalFlowTable, Rule, TimedFlowSet};
use crate::net::{Prefix, Protocol, ProtocolPort};

/// Rules with `action` matching exactly the flows of `set` inside the
/// universe and time atoms of `ctx`.
pub fn decompose(set: &TimedFlowSet, action: Action, ctx: &FlowContext) -> Vec<Rule> {
    let mut by_flows: BTreeMap<&FlowSet, Vec<usize>> = BTreeMap::new();
    for (atom, flows) in set.iter().filter(|(_, f)| !f.is_empty()) {
        by_flows.entry(flows).or_default().push(atom);
    }
    let mut rules = Vec::new();
    for (flows, atoms) in by_flows {
        let times = ctx.time.cover(&atoms);
        let bodies = decompose_flows(flows, &ctx.gft);
        for time in &times {
            for &(src, dst, app) in &bodies {
                rules.push(Rule { src, dst, app, time: *time, action });
            }
        }
    }
    rules
}

type Body = (Option<Prefix>, Option<Prefix>, ProtocolPort);

fn decompose_flows(flows: &FlowSet, gft: &GlobalFlowTable) -> Vec<Body> {
    let mut grids: BTreeMap<usize, BTreeSet<(usize, usize)>> = BTreeMap::new();
    for i in flows.iter() {
        let c = gft.coord(i);
        grids.entry(c.app).or_default().insert((c.src, c.dst));
    }
    let mut by_grid: BTreeMap<BTreeSet<(usize, usize)>, Vec<usize>> = BTreeMap::new();
    for (app, grid) in grids {
        by_grid.entry(grid).or_default().push(app);
    }
    let mut out = Vec::new();
    for (grid, apps) in by_grid {
        let apps = cover_apps(gft, &apps);
        for (srcs, dsts) in rectangles(gft, &grid) {
            for app in &apps {
                for s in &srcs {
                    for d in &dsts {
                        out.push((*s, *d, *app));
                    }
                }
            }
        }
    }
    out
}

type Rect = (Vec<Option<Prefix>>, Vec<Option<Prefix>>);

/// Splits a (src, dst) grid into products of prefix covers, trying both
/// row- and column-major grouping and keeping the one with fewer rules.
fn rectangles(gft: &GlobalFlowTable, grid: &BTreeSet<(usize, usize)>) -> Vec<Rect> {
    let mut rows: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut cols: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(s, d) in grid {
        rows.entry(s).or_default().insert(d);
        cols.entry(d).or_default().insert(s);
    }
    let group = |lines: BTreeMap<usize, BTreeSet<usize>>| {
        let mut g: BTreeMap<BTreeSet<usize>, Vec<usize>> = BTreeMap::new();
        for (k, v) in lines {
            g.entry(v).or_default().push(k);
        }
        g
    };
    let by_row: Vec<Rect> = group(rows)
        .into_iter()
        .map(|(dsts, srcs)| (cover_atoms(gft.src_atoms(), &srcs), cover_atoms(gft.dst_atoms(), &dsts.into_iter().collect::<Vec<_>>())))
        .collect();
    let by_col: Vec<Rect> = group(cols)
        .into_iter()
        .map(|(srcs, dsts)| (cover_atoms(gft.src_atoms(), &srcs.into_iter().collect::<Vec<_>>()), cover_atoms(gft.dst_atoms(), &dsts)))
        .collect();
    let size = |rs: &[Rect]| rs.iter().map(|(s, d)| s.len() * d.len()).sum::<usize>();
    if size(&by_col) < size(&by_row) {
        by_col
    } else {
        by_row
    }
}

/// Prefixes whose atoms are exactly `members`, each widened only while it
/// gains atoms; `None` stands for every atom.
fn cover_atoms(atoms: &[Prefix], members: &[usize]) -> Vec<Option<Prefix>> {
    if members.len() == atoms.len() {
        return vec![None];
    }
    let set: BTreeSet<usize> = members.iter().copied().collect();
    let inside = |p: &Prefix| {
        atoms.iter().enumerate().all(|(i, a)| !p.overlaps(a) || (p.contains(a) && set.contains(&i)))
    };
    let mut picked: Vec<Prefix> = Vec::new();
    for &m in members {
        let mut p = atoms[m];
        if picked.iter().any(|q| q.contains(&p)) {
            continue;
        }
        let count = |q: &Prefix| atoms.iter().filter(|a| q.contains(a)).count();
        let mut probe = p;
        while let Some(up) = probe.parent().filter(|up| inside(up)) {
            probe = up;
            if count(&probe) > count(&p) {
                p = probe;
            }
        }
        picked.retain(|q| !p.contains(q));
        picked.push(p);
    }
    picked.sort();
    picked.into_iter().map(Some).collect()
}

fn cover_apps(gft: &GlobalFlowTable, members: &[usize]) -> Vec<ProtocolPort> {
    let apps = gft.apps();
    if members.len() == apps.len() {
        return vec![ProtocolPort::ANY];
    }
    let chosen: BTreeSet<usize> = members.iter().copied().collect();
    let mut out = Vec::new();
    for proto in [Protocol::Tcp, Protocol::Udp, Protocol::Icmp] {
        let of_proto: Vec<usize> = (0..apps.len()).filter(|&i| apps[i].protocol() == proto).collect();
        let picked: Vec<usize> = of_proto.iter().copied().filter(|i| chosen.contains(i)).collect();
        if picked.len() > 1 && picked.len() == of_proto.len() {
            out.push(ProtocolPort::proto(proto));
        } else {
            out.extend(picked.iter().map(|&i| apps[i]));
        }
    }
    out
}
