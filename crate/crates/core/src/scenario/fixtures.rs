use super::{IntentSpec, ProtectSpec, Scenario};
use crate::flowset::{Acl, AclSet, Action, Rule};
use crate::net::{EntityList, GatewayPrefix, Interface, NetworkDoc, Prefix, ProtocolPort, Routing};

fn iface(s: &str) -> Interface {
    s.parse().expect("fixture interface")
}

fn rule(s: &str) -> Rule {
    s.parse().expect("fixture rule")
}

fn prefix(s: &str) -> Prefix {
    s.parse().expect("fixture prefix")
}

/// Builds a network document from compact tables: `(router, interface
/// count)`, links as interface-name pairs, and entities as
/// `(name, [(gateway, prefix)])`.
fn doc(routers: &[(&str, u16)], links: &[(&str, &str)], entities: &[(&str, &[(&str, &str)])]) -> NetworkDoc {
    let interfaces = routers.iter().flat_map(|(r, n)| (1..=*n).map(move |i| Interface::new(*r, i))).collect();
    let snmt = EntityList(
        entities
            .iter()
            .map(|(name, pairs)| {
                let pairs = pairs.iter().map(|(g, p)| GatewayPrefix { gateway: iface(g), prefix: prefix(p) }).collect();
                (name.to_string(), pairs)
            })
            .collect(),
    );
    let mut finest: Vec<Prefix> = entities.iter().flat_map(|(_, ps)| ps.iter().map(|(_, p)| prefix(p))).collect();
    finest.sort();
    finest.dedup();
    NetworkDoc {
        routers: routers.iter().map(|(r, _)| r.to_string()).collect(),
        interfaces,
        links: links.iter().map(|(a, b)| (iface(a), iface(b))).collect(),
        snmt,
        finest_prefixes: finest,
        routing: Routing::default(),
    }
}

fn merge(a: NetworkDoc, b: NetworkDoc) -> NetworkDoc {
    let mut out = a;
    out.routers.extend(b.routers);
    out.interfaces.extend(b.interfaces);
    out.links.extend(b.links);
    out.snmt.0.extend(b.snmt.0);
    out.finest_prefixes.extend(b.finest_prefixes);
    out.finest_prefixes.sort();
    out.finest_prefixes.dedup();
    out
}

fn triangle() -> NetworkDoc {
    doc(
        &[("R_A", 4), ("R_B", 4), ("R_C", 3)],
        &[("R_A@2", "R_B@2"), ("R_A@3", "R_C@1"), ("R_B@3", "R_C@3")],
        &[
            ("DC1", &[("R_C@2", "10.1.0.0/16")]),
            ("DC2", &[("R_A@1", "10.2.0.0/16")]),
            ("DC3", &[("R_B@1", "10.3.0.0/16")]),
            ("group x", &[("R_A@4", "10.4.0.0/16"), ("R_B@4", "10.5.0.0/16")]),
        ],
    )
}

fn triangle_apps() -> Vec<ProtocolPort> {
    vec![ProtocolPort::tcp(22), ProtocolPort::tcp(53), ProtocolPort::tcp(80), ProtocolPort::tcp(443), ProtocolPort::udp(53)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig2Case {
    /// Conflicting rule on a traversed interface.
    A,
    /// Opposite-action rule shadowed by an earlier rule.
    B,
    /// Conflicting rule on an interface off the intent's paths.
    C,
}

/// The triangle network of the three conflict cases, with the ACL and the
/// intent of `case`. Each case carries the intent's action as default.
pub fn fig2(case: Fig2Case) -> Scenario {
    let (name, iface_name, rules, default, intent) = match case {
        Fig2Case::A => (
            "fig2a",
            "R_B@2",
            vec![rule("deny any -> 10.3.0.0/16 tcp/80")],
            Action::Permit,
            ("Permit all traffic from DC2 to any destination.", "permit 10.2.0.0/16 -> any ip"),
        ),
        Fig2Case::B => (
            "fig2b",
            "R_B@1",
            vec![rule("deny 10.2.0.0/16 -> 10.3.0.0/16 ip"), rule("permit any -> 10.3.0.0/16 tcp/80")],
            Action::Deny,
            ("Deny all traffic from DC2 to any destination.", "deny 10.2.0.0/16 -> any ip"),
        ),
        Fig2Case::C => (
            "fig2c",
            "R_A@1",
            vec![rule("deny any -> 10.3.0.0/16 tcp/80")],
            Action::Permit,
            ("Permit all traffic from DC1 to any destination.", "permit 10.1.0.0/16 -> any ip"),
        ),
    };
    let mut acls = AclSet::new(default);
    acls.set(iface(iface_name), Acl::new(rules, default));
    let r = rule(intent.1);
    Scenario {
        name: name.into(),
        network: triangle(),
        apps: triangle_apps(),
        acls,
        intents: vec![IntentSpec { id: 0, text: intent.0.into(), action: r.action, rules: vec![r], protects: vec![] }],
    }
}

/// Triangle with TCP blocked from DC1 to DC2 and from DC3 outward, a TCP
/// permit intent over everything, and a protect intent for HTTP.
pub fn protect_example() -> Scenario {
    let mut acls = AclSet::new(Action::Permit);
    acls.set(iface("R_C@2"), Acl::new(vec![rule("deny 10.1.0.0/16 -> 10.2.0.0/16 tcp")], Action::Permit));
    acls.set(iface("R_B@1"), Acl::new(vec![rule("deny 10.3.0.0/16 -> any tcp")], Action::Permit));
    Scenario {
        name: "protect".into(),
        network: triangle(),
        apps: triangle_apps(),
        acls,
        intents: vec![IntentSpec {
            id: 0,
            text: "Permit TCP traffic from any source to any destination.".into(),
            action: Action::Permit,
            rules: vec![rule("permit any -> any tcp")],
            protects: vec![ProtectSpec { text: "Protect all HTTP traffic.".into(), rules: vec![rule("deny any -> any tcp/80")] }],
        }],
    }
}

fn grid() -> NetworkDoc {
    doc(
        &[("A", 5), ("B", 6), ("C", 2), ("D", 2)],
        &[("A@1", "B@1"), ("A@2", "C@1"), ("C@2", "D@1")],
        &[
            ("a", &[("A@3", "10.0.1.0/24"), ("A@4", "10.0.1.0/24"), ("A@5", "10.0.1.0/24")]),
            ("b", &[("B@2", "10.0.2.0/24")]),
            ("c", &[("B@3", "10.0.3.0/24"), ("B@4", "10.0.3.0/24"), ("B@5", "10.0.3.0/24"), ("B@6", "10.0.3.0/24")]),
            ("d", &[("D@2", "10.0.4.0/24")]),
        ],
    )
}

fn grid_apps() -> Vec<ProtocolPort> {
    vec![ProtocolPort::tcp(22), ProtocolPort::tcp(80), ProtocolPort::udp(53)]
}

fn grid_intents(first_id: usize) -> Vec<IntentSpec> {
    vec![
        IntentSpec {
            id: first_id,
            text: "Deny TCP traffic from a to any destination.".into(),
            action: Action::Deny,
            rules: vec![rule("deny 10.0.1.0/24 -> any tcp")],
            protects: vec![],
        },
        IntentSpec {
            id: first_id + 1,
            text: "Deny TCP traffic from any source to c.".into(),
            action: Action::Deny,
            rules: vec![rule("deny any -> 10.0.3.0/24 tcp")],
            protects: vec![],
        },
    ]
}

/// Entity `a` sits behind three gateways of router A, whose two uplinks
/// lead to B (gateways of b and of c) and through C to D (gateway of d).
/// B@1 already denies TCP from a to b; defaults permit everything.
pub fn fig3() -> Scenario {
    let mut acls = AclSet::new(Action::Permit);
    acls.set(iface("B@1"), Acl::new(vec![rule("deny 10.0.1.0/24 -> 10.0.2.0/24 tcp")], Action::Permit));
    Scenario { name: "fig3".into(), network: grid(), apps: grid_apps(), acls, intents: grid_intents(0) }
}

/// The triangle of case A and the grid in one network.
pub fn composite() -> Scenario {
    let a = fig2(Fig2Case::A);
    let g = fig3();
    let mut acls = a.acls.clone();
    acls.acls.extend(g.acls.acls);
    let mut apps = a.apps.clone();
    apps.extend(g.apps);
    apps.sort();
    apps.dedup();
    let mut intents = a.intents;
    intents.extend(grid_intents(1));
    Scenario { name: "composite".into(), network: merge(triangle(), grid()), apps, acls, intents }
}
