use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::flowset::{Action, Rule};
use crate::net::{GatewayPrefix, Interface, Protocol, ProtocolPort, Snmt, TimeRange};

pub const ANY: &str = "any";

/// An endpoint as named in the intent and the SNMT pairs it maps to.
/// `any` has no pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub name: String,
    #[serde(default)]
    pub pairs: Vec<GatewayPrefix>,
    /// Set when no SNMT slice contained the entity.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub not_found: bool,
}

impl Endpoint {
    pub fn any() -> Self {
        Self { name: ANY.into(), pairs: vec![], not_found: false }
    }

    pub fn not_found(name: impl Into<String>) -> Self {
        Self { name: name.into(), pairs: vec![], not_found: true }
    }

    pub fn is_any(&self) -> bool {
        self.name.eq_ignore_ascii_case(ANY) && self.pairs.is_empty() && !self.not_found
    }

    pub fn is_resolved(&self) -> bool {
        !self.not_found && (self.is_any() || !self.pairs.is_empty())
    }
}

/// A protocol with an optional port as written by the backend; legality is
/// checked by [`validate_ir`], not on parse.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AppPair {
    pub protocol: String,
    pub port: Option<u16>,
}

impl AppPair {
    pub fn to_protocol_port(&self) -> Option<ProtocolPort> {
        let proto: Protocol = self.protocol.parse().ok()?;
        ProtocolPort::new(proto, self.port).ok()
    }
}

impl From<ProtocolPort> for AppPair {
    fn from(p: ProtocolPort) -> Self {
        Self { protocol: p.protocol().name().into(), port: p.port() }
    }
}

impl fmt::Display for AppPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.port {
            Some(p) => write!(f, "{}/{p}", self.protocol),
            None => f.write_str(&self.protocol),
        }
    }
}

impl FromStr for AppPair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once('/') {
            Some((p, port)) => {
                let port = port.trim().parse().map_err(|_| format!("bad port in {s:?}"))?;
                Ok(Self { protocol: p.trim().into(), port: Some(port) })
            }
            None if !s.is_empty() => Ok(Self { protocol: s, port: None }),
            None => Err("empty application pair".into()),
        }
    }
}

impl Serialize for AppPair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AppPair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicationField {
    pub name: String,
    #[serde(default)]
    pub pairs: Vec<AppPair>,
}

impl ApplicationField {
    pub fn any() -> Self {
        Self { name: ANY.into(), pairs: vec![] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrAction {
    Permit,
    Deny,
    Protect,
}

impl IrAction {
    pub fn as_action(self) -> Option<Action> {
        match self {
            IrAction::Permit => Some(Action::Permit),
            IrAction::Deny => Some(Action::Deny),
            IrAction::Protect => None,
        }
    }
}

/// Intermediate representation of one intent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ir {
    #[serde(default = "Endpoint::any")]
    pub source: Endpoint,
    #[serde(default = "Endpoint::any")]
    pub destination: Endpoint,
    #[serde(default = "ApplicationField::any")]
    pub application: ApplicationField,
    #[serde(default)]
    pub time: TimeRange,
    pub action: IrAction,
}

impl Ir {
    pub fn is_resolved(&self) -> bool {
        self.source.is_resolved() && self.destination.is_resolved()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("IR always serializes")
    }
}

/// Parses the first well-formed IR object in free-form backend output.
pub fn parse_ir_lenient(text: &str) -> Option<Ir> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<serde_json::Value>();
        if let Some(Ok(v)) = stream.next() {
            if let Ok(ir) = serde_json::from_value::<Ir>(v) {
                return Some(ir);
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Source,
    Destination,
    Application,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    /// An element outside what the SNMT or the protocol table allows.
    NonExistent,
    /// Elements that exist but do not belong together.
    Dependency,
    /// An endpoint no SNMT slice could resolve.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: Field,
    pub kind: DiagnosticKind,
    pub message: String,
}

fn diag(field: Field, kind: DiagnosticKind, message: String) -> Diagnostic {
    Diagnostic { field, kind, message }
}

fn check_endpoint(field: Field, e: &Endpoint, snmt: &Snmt, out: &mut Vec<Diagnostic>) {
    if e.not_found || (!e.name.eq_ignore_ascii_case(ANY) && e.pairs.is_empty()) {
        out.push(diag(field, DiagnosticKind::Unresolved, format!("{:?} is not in the SNMT", e.name)));
        return;
    }
    if e.name.eq_ignore_ascii_case(ANY) {
        if !e.pairs.is_empty() {
            out.push(diag(field, DiagnosticKind::Dependency, "\"any\" must not list gateway-prefix pairs".into()));
        }
        return;
    }
    let entry = snmt.entry(&e.name);
    if entry.is_none() {
        out.push(diag(field, DiagnosticKind::NonExistent, format!("entity {:?} is not in the SNMT", e.name)));
    }
    for p in &e.pairs {
        if !snmt.has_pair(&p.gateway, &p.prefix) {
            out.push(diag(field, DiagnosticKind::NonExistent, format!("pair ({}, {}) is not in the SNMT", p.gateway, p.prefix)));
        } else if entry.is_some_and(|en| !en.pairs.contains(p)) {
            out.push(diag(field, DiagnosticKind::Dependency, format!("pair ({}, {}) belongs to another entity", p.gateway, p.prefix)));
        }
    }
    if let Some(en) = entry {
        let missing = en.pairs.iter().filter(|p| !e.pairs.contains(p)).count();
        if missing > 0 {
            out.push(diag(field, DiagnosticKind::Dependency, format!("{missing} pair(s) of {:?} are missing", e.name)));
        }
    }
}

fn check_application(a: &ApplicationField, out: &mut Vec<Diagnostic>) {
    if a.pairs.is_empty() && !a.name.eq_ignore_ascii_case(ANY) {
        out.push(diag(Field::Application, DiagnosticKind::NonExistent, format!("application {:?} lists no protocol", a.name)));
    }
    for p in &a.pairs {
        match p.protocol.parse::<Protocol>() {
            Err(_) => out.push(diag(Field::Application, DiagnosticKind::NonExistent, format!("unknown protocol {:?}", p.protocol))),
            Ok(proto) if p.port.is_some() && !proto.takes_port() => {
                out.push(diag(Field::Application, DiagnosticKind::Dependency, format!("protocol {} cannot carry port {}", p.protocol, p.port.unwrap_or(0))))
            }
            Ok(_) => {}
        }
    }
}

/// Diagnostics of `ir` against `snmt`; empty when the IR is usable.
pub fn validate_ir(ir: &Ir, snmt: &Snmt) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_endpoint(Field::Source, &ir.source, snmt, &mut out);
    check_endpoint(Field::Destination, &ir.destination, snmt, &mut out);
    check_application(&ir.application, &mut out);
    out
}

/// One rule of an IR with the gateways of its endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedRule {
    pub rule: Rule,
    pub src_gateways: Vec<Interface>,
    pub dst_gateways: Vec<Interface>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleGenError {
    #[error("{0:?} endpoint is unresolved")]
    Unresolved(Field),
    #[error("application pair {0} is not a valid protocol-port pair")]
    BadApplication(String),
}

fn endpoint_options(e: &Endpoint, field: Field) -> Result<Vec<(Option<crate::net::Prefix>, Vec<Interface>)>, RuleGenError> {
    if !e.is_resolved() {
        return Err(RuleGenError::Unresolved(field));
    }
    if e.is_any() {
        return Ok(vec![(None, vec![])]);
    }
    Ok(e.pairs.iter().map(|p| (Some(p.prefix), vec![p.gateway.clone()])).collect())
}

/// One rule per element of sources × destinations × applications. Protect
/// IRs get `protect_action`, the opposite of the intent they protect.
pub fn generate_rules(ir: &Ir, protect_action: Action) -> Result<Vec<GeneratedRule>, RuleGenError> {
    let action = ir.action.as_action().unwrap_or(protect_action);
    let srcs = endpoint_options(&ir.source, Field::Source)?;
    let dsts = endpoint_options(&ir.destination, Field::Destination)?;
    let apps: Vec<ProtocolPort> = if ir.application.pairs.is_empty() {
        vec![ProtocolPort::ANY]
    } else {
        ir.application
            .pairs
            .iter()
            .map(|p| p.to_protocol_port().ok_or_else(|| RuleGenError::BadApplication(p.to_string())))
            .collect::<Result<_, _>>()?
    };
    let mut out = Vec::with_capacity(srcs.len() * dsts.len() * apps.len());
    for (s, sg) in &srcs {
        for (d, dg) in &dsts {
            for a in &apps {
                out.push(GeneratedRule {
                    rule: Rule::new(action, *s, *d, *a).with_time(ir.time),
                    src_gateways: sg.clone(),
                    dst_gateways: dg.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Distinct rules of a generated list, in first-seen order.
pub fn distinct_rules(generated: &[GeneratedRule]) -> Vec<Rule> {
    let mut out: Vec<Rule> = Vec::new();
    for g in generated {
        if !out.contains(&g.rule) {
            out.push(g.rule.clone());
        }
    }
    out
}
