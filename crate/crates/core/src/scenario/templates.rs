use crate::net::{EntityList, GatewayPrefix, Interface, NetworkDoc, Prefix, Routing};

/// Accumulates routers, numbered interfaces and links.
#[derive(Default)]
struct Builder {
    routers: Vec<String>,
    next: Vec<u16>,
    links: Vec<(Interface, Interface)>,
    entities: Vec<(String, Vec<GatewayPrefix>)>,
}

impl Builder {
    fn router(&mut self, name: String) -> usize {
        self.routers.push(name);
        self.next.push(0);
        self.routers.len() - 1
    }

    fn port(&mut self, r: usize) -> Interface {
        self.next[r] += 1;
        Interface::new(self.routers[r].clone(), self.next[r])
    }

    fn link(&mut self, a: usize, b: usize) {
        let (x, y) = (self.port(a), self.port(b));
        self.links.push((x, y));
    }

    fn entity(&mut self, name: String, at: &[(usize, Prefix)]) {
        let pairs = at.iter().map(|(r, p)| GatewayPrefix { gateway: self.port(*r), prefix: *p }).collect();
        self.entities.push((name, pairs));
    }

    fn pad_to(&mut self, total: usize, among: &[usize]) {
        let mut used: usize = self.next.iter().map(|&n| n as usize).sum();
        for r in among.iter().cycle() {
            if used >= total {
                break;
            }
            self.next[*r] += 1;
            used += 1;
        }
    }

    fn finish(self) -> NetworkDoc {
        let interfaces = self
            .routers
            .iter()
            .zip(&self.next)
            .flat_map(|(r, &n)| (1..=n).map(move |i| Interface::new(r.clone(), i)))
            .collect();
        let mut finest: Vec<Prefix> = self.entities.iter().flat_map(|(_, ps)| ps.iter().map(|p| p.prefix)).collect();
        finest.sort();
        finest.dedup();
        NetworkDoc {
            routers: self.routers,
            interfaces,
            links: self.links,
            snmt: EntityList(self.entities),
            finest_prefixes: finest,
            routing: Routing::default(),
        }
    }
}

fn pfx(a: u8, b: u8, c: u8, len: u8) -> Prefix {
    half(a, b, c, 0, len)
}

fn half(a: u8, b: u8, c: u8, d: u8, len: u8) -> Prefix {
    format!("{a}.{b}.{c}.{d}/{len}").parse().expect("generated prefix")
}

const CAMPUS_KINDS: [&str; 6] = ["Dorm", "Lab", "Library", "Office", "Lecture Hall", "Clinic"];

/// Three-tier campus: 2 core, 7 distribution and 32 access routers joined by
/// 66 links, 361 interfaces in total, and 60 entities behind access
/// routers. Every sixth entity is split into two /25 halves on different
/// access routers.
pub fn campus_network() -> NetworkDoc {
    let mut b = Builder::default();
    let core: Vec<usize> = (1..=2).map(|i| b.router(format!("Core{i}"))).collect();
    let dist: Vec<usize> = (1..=7).map(|i| b.router(format!("Dist{i}"))).collect();
    let acc: Vec<usize> = (1..=32).map(|i| b.router(format!("Acc{i}"))).collect();
    b.link(core[0], core[1]);
    for &d in &dist {
        b.link(d, core[0]);
        b.link(d, core[1]);
    }
    for (j, &a) in acc.iter().enumerate() {
        b.link(a, dist[j % 7]);
    }
    for (j, &a) in acc.iter().enumerate().take(19) {
        b.link(a, dist[(j + 3) % 7]);
    }
    for k in 0..60usize {
        let name = format!("{} {}", CAMPUS_KINDS[k / 10], k % 10 + 1);
        let home = acc[k % 32];
        if k % 6 == 0 {
            let other = acc[(k + 7) % 32];
            b.entity(name, &[(home, pfx(172, 16, k as u8, 25)), (other, half(172, 16, k as u8, 128, 25))]);
        } else {
            b.entity(name, &[(home, pfx(172, 16, k as u8, 24))]);
        }
    }
    b.pad_to(361, &acc);
    b.finish()
}

const REGIONS: [&str; 4] = ["East Asia", "West Europe", "US East", "US West"];

/// Cloud WAN of four fully meshed regions with two DCs each, plus a k=4
/// fat-tree data-center network hanging off East Asia DC1 whose eight edge
/// switches each host a server group. 16 entities.
pub fn cloud_network() -> NetworkDoc {
    let mut b = Builder::default();
    let wan: Vec<usize> = REGIONS.iter().map(|r| b.router(format!("WAN-{}", r.replace(' ', "")))).collect();
    for i in 0..wan.len() {
        for j in i + 1..wan.len() {
            b.link(wan[i], wan[j]);
        }
    }
    let mut dcs = Vec::new();
    for (ri, region) in REGIONS.iter().enumerate() {
        let pair: Vec<usize> = (1..=2).map(|d| b.router(format!("{}-DC{d}", region.replace(' ', "")))).collect();
        b.link(pair[0], wan[ri]);
        b.link(pair[1], wan[ri]);
        b.link(pair[0], pair[1]);
        for (d, &r) in pair.iter().enumerate() {
            dcs.push((format!("{region} DC{}", d + 1), r, pfx(10, 10 + ri as u8, d as u8, 24)));
        }
    }
    let cores: Vec<usize> = (1..=4).map(|i| b.router(format!("FT-Core{i}"))).collect();
    for &c in &cores {
        b.link(c, dcs[0].1);
    }
    let mut edges = Vec::new();
    for pod in 0..4 {
        let aggs: Vec<usize> = (1..=2).map(|i| b.router(format!("FT-Agg{pod}{i}"))).collect();
        let eds: Vec<usize> = (1..=2).map(|i| b.router(format!("FT-Edge{pod}{i}"))).collect();
        for (ai, &a) in aggs.iter().enumerate() {
            for &c in &cores[ai * 2..ai * 2 + 2] {
                b.link(a, c);
            }
            for &e in &eds {
                b.link(e, a);
            }
        }
        edges.extend(eds);
    }
    for (name, r, p) in dcs {
        b.entity(name, &[(r, p)]);
    }
    for (g, &e) in edges.iter().enumerate() {
        b.entity(format!("Server group {}", g + 1), &[(e, pfx(10, 100, g as u8, 24))]);
    }
    b.finish()
}
