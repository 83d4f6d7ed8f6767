use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;
use crate::net::{Interface, Prefix, ProtocolPort, TimeRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Permit,
    Deny,
}

impl Action {
    pub fn opposite(self) -> Action {
        match self {
            Action::Permit => Action::Deny,
            Action::Deny => Action::Permit,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Permit => "permit",
            Action::Deny => "deny",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "permit" | "allow" | "accept" => Ok(Action::Permit),
            "deny" | "block" | "drop" => Ok(Action::Deny),
            _ => Err(ParseError::Rule(format!("unknown action {s:?}"))),
        }
    }
}

/// A concrete ACL rule. `None` on src or dst matches any address.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    #[serde(with = "any_prefix")]
    pub src: Option<Prefix>,
    #[serde(with = "any_prefix")]
    pub dst: Option<Prefix>,
    pub app: ProtocolPort,
    #[serde(default = "any_time")]
    pub time: TimeRange,
    pub action: Action,
}

fn any_time() -> TimeRange {
    TimeRange::ANY
}

impl Rule {
    pub fn new(action: Action, src: Option<Prefix>, dst: Option<Prefix>, app: ProtocolPort) -> Self {
        Self { src, dst, app, time: TimeRange::ANY, action }
    }

    pub fn with_time(mut self, time: TimeRange) -> Self {
        self.time = time;
        self
    }

    /// The rule matching everything with `action`; used as the closing default.
    pub fn catch_all(action: Action) -> Self {
        Self::new(action, None, None, ProtocolPort::ANY)
    }

    pub fn matches_src(&self, p: &Prefix) -> bool {
        self.src.is_none_or(|s| s.contains(p))
    }

    pub fn matches_dst(&self, p: &Prefix) -> bool {
        self.dst.is_none_or(|d| d.contains(p))
    }
}

fn fmt_endpoint(p: &Option<Prefix>) -> String {
    p.map_or_else(|| "any".to_string(), |p| p.to_string())
}

/// `permit 10.0.0.0/8 -> any tcp/80`, with ` @ <time>` appended when restricted.
impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} -> {} {}", self.action, fmt_endpoint(&self.src), fmt_endpoint(&self.dst), self.app)?;
        if !self.time.is_any() {
            write!(f, " @ {}", self.time)?;
        }
        Ok(())
    }
}

fn parse_endpoint(s: &str) -> Result<Option<Prefix>, ParseError> {
    if s.eq_ignore_ascii_case("any") {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

impl FromStr for Rule {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseError::Rule(s.to_string());
        let (body, time) = match s.split_once('@') {
            Some((b, t)) => (b, t.trim().parse()?),
            None => (s, TimeRange::ANY),
        };
        let mut words = body.split_whitespace();
        let action: Action = words.next().ok_or_else(bad)?.parse()?;
        let src = parse_endpoint(words.next().ok_or_else(bad)?)?;
        if words.next() != Some("->") {
            return Err(bad());
        }
        let dst = parse_endpoint(words.next().ok_or_else(bad)?)?;
        let app = words.next().map_or(Ok(ProtocolPort::ANY), str::parse)?;
        if words.next().is_some() {
            return Err(bad());
        }
        Ok(Rule { src, dst, app, time, action })
    }
}

mod any_prefix {
    use super::*;

    pub fn serialize<S: Serializer>(p: &Option<Prefix>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&fmt_endpoint(p))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Prefix>, D::Error> {
        parse_endpoint(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Ordered rule list closed by a virtual catch-all default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acl {
    pub rules: Vec<Rule>,
    pub default: Action,
}

impl Acl {
    pub fn new(rules: Vec<Rule>, default: Action) -> Self {
        Self { rules, default }
    }

    pub fn empty(default: Action) -> Self {
        Self::new(Vec::new(), default)
    }

    /// 1-based position of the virtual default rule.
    pub fn default_position(&self) -> usize {
        self.rules.len() + 1
    }

    /// Rule at 1-based position `k`, synthesizing the default at the end.
    pub fn rule_at(&self, k: usize) -> Rule {
        assert!(k >= 1 && k <= self.default_position(), "position {k} outside ACL");
        self.rules.get(k - 1).cloned().unwrap_or_else(|| Rule::catch_all(self.default))
    }

    pub fn action_at(&self, k: usize) -> Action {
        self.rules.get(k - 1).map_or(self.default, |r| r.action)
    }
}

/// ACLs of a whole network. Interfaces without an entry carry only the
/// default rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclSet {
    pub default: Action,
    #[serde(default)]
    pub acls: BTreeMap<Interface, Acl>,
}

impl AclSet {
    pub fn new(default: Action) -> Self {
        Self { default, acls: BTreeMap::new() }
    }

    pub fn get(&self, iface: &Interface) -> Cow<'_, Acl> {
        match self.acls.get(iface) {
            Some(a) => Cow::Borrowed(a),
            None => Cow::Owned(Acl::empty(self.default)),
        }
    }

    pub fn set(&mut self, iface: Interface, acl: Acl) {
        self.acls.insert(iface, acl);
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.acls.values().flat_map(|a| a.rules.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for text in [
            "deny 10.0.0.0/31 -> 11.0.0.0/31 tcp/80",
            "permit any -> 10.3.0.0/16 ip",
            "deny any -> any udp/53 @ weekdays 2024-01-01..2024-03-31",
        ] {
            let r: Rule = text.parse().unwrap();
            assert_eq!(r.to_string(), text);
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(serde_json::from_str::<Rule>(&json).unwrap(), r);
        }
    }

    #[test]
    fn malformed_rules() {
        assert!("deny 10.0.0.0/8 11.0.0.0/8".parse::<Rule>().is_err());
        assert!("maybe any -> any".parse::<Rule>().is_err());
        assert!("deny any -> any tcp/80 extra".parse::<Rule>().is_err());
    }

    #[test]
    fn default_is_virtual_last_rule() {
        let acl = Acl::new(vec!["deny any -> any tcp/80".parse().unwrap()], Action::Permit);
        assert_eq!(acl.default_position(), 2);
        assert_eq!(acl.rule_at(2), Rule::catch_all(Action::Permit));
        assert_eq!(acl.action_at(1), Action::Deny);
    }
}
