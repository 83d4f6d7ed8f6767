use std::collections::VecDeque;
use std::sync::Mutex;

use chrono::NaiveDate;
use regex::Regex;

use super::backend::{BackendError, ChatBackend, Message, Role};
use super::fuzzy;
use super::ir::{parse_ir_lenient, AppPair, ApplicationField, Endpoint, Ir, IrAction};
use super::prompt::{FEEDBACK_LABEL, INTENT_LABEL, PARTIAL_LABEL, SNMT_HEADER};
use crate::net::{default_catalog, Application, GatewayPrefix, ProtocolPort, TimeRange, ALL_DAYS, WEEKDAYS, WEEKENDS};

const PERMIT_VERBS: [&str; 5] = ["permit", "allow", "authorize", "accept", "enable"];
const DENY_VERBS: [&str; 6] = ["deny", "block", "prohibit", "forbid", "drop", "reject"];
const PROTECT_VERBS: [&str; 3] = ["protect", "preserve", "keep"];
const ANY_PHRASES: [&str; 8] =
    ["any", "any source", "any destination", "anywhere", "everywhere", "all sources", "all destinations", "any host"];

/// Deterministic stand-in for a chat model. Reads the SNMT slice out of the
/// system prompt and the intent out of the user message, resolves endpoints
/// by name (optionally tolerating typos) and answers with an IR. Scripted
/// replies, when queued, are returned first.
pub struct MockBackend {
    catalog: Vec<Application>,
    fuzzy: bool,
    script: Mutex<VecDeque<String>>,
    calls: Mutex<Vec<Vec<Message>>>,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self { catalog: default_catalog(), fuzzy: true, script: Mutex::new(VecDeque::new()), calls: Mutex::new(Vec::new()) }
    }

    /// Exact, case-insensitive entity matching only.
    pub fn exact() -> Self {
        Self { fuzzy: false, ..Self::new() }
    }

    pub fn with_script(self, replies: impl IntoIterator<Item = String>) -> Self {
        self.script.lock().expect("script lock").extend(replies);
        self
    }

    /// Conversations received so far.
    pub fn calls(&self) -> Vec<Vec<Message>> {
        self.calls.lock().expect("calls lock").clone()
    }

    fn derive(&self, intent: &str, slice: &[(String, Vec<GatewayPrefix>)]) -> Ir {
        let lower = intent.to_lowercase();
        let (src_text, dst_text) = endpoints_text(intent);
        Ir {
            source: src_text.map_or_else(Endpoint::any, |t| self.endpoint(&t, slice)),
            destination: dst_text.map_or_else(Endpoint::any, |t| self.endpoint(&t, slice)),
            application: self.application(intent),
            time: time_of(&lower),
            action: action_of(&lower),
        }
    }

    fn endpoint(&self, text: &str, slice: &[(String, Vec<GatewayPrefix>)]) -> Endpoint {
        let t = text.trim();
        if ANY_PHRASES.contains(&t.to_lowercase().as_str()) {
            return Endpoint::any();
        }
        let names = slice.iter().map(|(n, _)| n.as_str());
        let hit = if self.fuzzy {
            fuzzy::resolve(names, t)
        } else {
            names.into_iter().find(|n| n.eq_ignore_ascii_case(t))
        };
        match hit.and_then(|n| slice.iter().find(|(m, _)| m == n)) {
            Some((name, pairs)) => Endpoint { name: name.clone(), pairs: pairs.clone(), not_found: false },
            None => Endpoint::not_found(t),
        }
    }

    fn application(&self, intent: &str) -> ApplicationField {
        let phrase = app_phrase(intent);
        let phrase = match phrase.trim().split_once(' ') {
            Some((all, rest)) if all.eq_ignore_ascii_case("all") => rest.to_string(),
            _ => phrase,
        };
        let p = phrase.trim().to_lowercase();
        if p.is_empty() || p == "all" || p == "any" {
            return ApplicationField::any();
        }
        if let Some(a) = self.catalog.iter().find(|a| a.name.eq_ignore_ascii_case(&p)) {
            return ApplicationField { name: a.name.clone(), pairs: a.pairs.iter().map(|x| AppPair::from(*x)).collect() };
        }
        let keyword: Option<Vec<ProtocolPort>> = match p.as_str() {
            "tcp" | "udp" | "icmp" => p.parse().ok().map(|x| vec![ProtocolPort::proto(x)]),
            "web" => Some(vec![ProtocolPort::tcp(80), ProtocolPort::tcp(443)]),
            "ping" => "icmp".parse().ok().map(|x| vec![ProtocolPort::proto(x)]),
            _ => None,
        };
        match keyword {
            Some(pairs) => ApplicationField { name: phrase.trim().to_string(), pairs: pairs.into_iter().map(AppPair::from).collect() },
            None => ApplicationField { name: phrase.trim().to_string(), pairs: vec![] },
        }
    }

    /// Applies `<field> should be <value>` corrections.
    fn apply_feedback(&self, mut ir: Ir, feedback: &str, slice: &[(String, Vec<GatewayPrefix>)]) -> Ir {
        let re = Regex::new(r"(?i)\b(source|destination|application|time|action)\s+should\s+be\s+([^.;]+)").expect("static regex");
        for c in re.captures_iter(feedback) {
            let value = c[2].trim().trim_matches('"');
            match c[1].to_lowercase().as_str() {
                "source" => ir.source = self.endpoint(value, slice),
                "destination" => ir.destination = self.endpoint(value, slice),
                "application" => ir.application = self.application(&format!("x {value} traffic")),
                "time" => ir.time = value.parse().unwrap_or(ir.time),
                _ => ir.action = action_of(&value.to_lowercase()),
            }
        }
        ir
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, messages: &[Message]) -> Result<String, BackendError> {
        self.calls.lock().expect("calls lock").push(messages.to_vec());
        if let Some(r) = self.script.lock().expect("script lock").pop_front() {
            return Ok(r);
        }
        let system = messages.iter().find(|m| m.role == Role::System).map_or("", |m| m.content.as_str());
        let user = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User && m.content.contains(INTENT_LABEL))
            .map_or("", |m| m.content.as_str());
        let slice = parse_slice(system);
        let intent = labelled_line(user, INTENT_LABEL).ok_or_else(|| BackendError::Response("no intent in request".into()))?;
        let mut ir = self.derive(&intent, &slice);
        if let Some(fb) = labelled_line(user, FEEDBACK_LABEL) {
            ir = self.apply_feedback(ir, &fb, &slice);
        } else if let Some(partial) = user.split_once(PARTIAL_LABEL).and_then(|(_, rest)| parse_ir_lenient(rest)) {
            if partial.source.is_resolved() {
                ir.source = partial.source;
            }
            if partial.destination.is_resolved() {
                ir.destination = partial.destination;
            }
        }
        Ok(format!("Following the steps, the IR is:\n```json\n{}\n```\n", ir.to_json()))
    }
}

fn labelled_line(text: &str, label: &str) -> Option<String> {
    text.lines().find_map(|l| l.strip_prefix(label.trim_end()).map(|r| r.trim().to_string()))
}

/// Entities listed in the SNMT section of a system prompt.
pub fn parse_slice(system: &str) -> Vec<(String, Vec<GatewayPrefix>)> {
    let Some((_, rest)) = system.split_once(SNMT_HEADER) else { return vec![] };
    let mut out = Vec::new();
    for line in rest.lines() {
        if line.starts_with("### ") {
            break;
        }
        let Some((name, pairs)) = line.strip_prefix("- ").and_then(|l| l.rsplit_once(": ")) else { continue };
        let pairs = pairs
            .split(';')
            .filter_map(|p| {
                let (g, x) = p.trim().split_once(' ')?;
                Some(GatewayPrefix { gateway: g.parse().ok()?, prefix: x.trim().parse().ok()? })
            })
            .collect();
        out.push((name.to_string(), pairs));
    }
    out
}

fn strip_sentence(s: &str) -> &str {
    s.trim().trim_end_matches(['.', '!'])
}

/// Source and destination phrases of `from X to Y`.
fn endpoints_text(intent: &str) -> (Option<String>, Option<String>) {
    let body = strip_sentence(intent);
    let Some(fi) = body.find(" from ") else {
        return (None, body.find(" to ").map(|i| cut_tail(&body[i + 4..])));
    };
    let after = &body[fi + 6..];
    match after.find(" to ") {
        Some(ti) => (Some(after[..ti].trim().to_string()), Some(cut_tail(&after[ti + 4..]))),
        None => (Some(cut_tail(after)), None),
    }
}

/// Drops a trailing time clause from an endpoint phrase.
fn cut_tail(s: &str) -> String {
    let mut end = s.len();
    for marker in [" on ", " from ", " during ", " between "] {
        if let Some(i) = s.find(marker) {
            end = end.min(i);
        }
    }
    s[..end].trim().to_string()
}

/// Words between the leading verb and `traffic`.
fn app_phrase(intent: &str) -> String {
    let body = strip_sentence(intent);
    let Some(ti) = body.to_lowercase().find(" traffic") else { return String::new() };
    let head = &body[..ti];
    head.split_once(' ').map_or(String::new(), |(_, rest)| rest.to_string())
}

fn action_of(lower: &str) -> IrAction {
    let first = lower.split_whitespace().next().unwrap_or("");
    if PROTECT_VERBS.contains(&first) {
        IrAction::Protect
    } else if DENY_VERBS.contains(&first) {
        IrAction::Deny
    } else if PERMIT_VERBS.contains(&first) {
        IrAction::Permit
    } else if DENY_VERBS.iter().any(|v| lower.contains(v)) {
        IrAction::Deny
    } else {
        IrAction::Permit
    }
}

fn time_of(lower: &str) -> TimeRange {
    let days = if lower.contains(" on weekdays") {
        WEEKDAYS
    } else if lower.contains(" on weekends") {
        WEEKENDS
    } else {
        Regex::new(r" on ((?:mon|tue|wed|thu|fri|sat|sun)(?:,(?:mon|tue|wed|thu|fri|sat|sun))*)\b")
            .expect("static regex")
            .captures(lower)
            .and_then(|c| c[1].parse::<TimeRange>().ok())
            .map_or(ALL_DAYS, |t| t.days())
    };
    let window = Regex::new(r"(\d{4}-\d{2}-\d{2})\s+(?:to|until|\.\.)\s+(\d{4}-\d{2}-\d{2})")
        .expect("static regex")
        .captures(lower)
        .and_then(|c| {
            let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok();
            Some((d(&c[1])?, d(&c[2])?))
        });
    TimeRange::new(days, window).unwrap_or(TimeRange::ANY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comprehension::prompt::{assemble_system_prompt, intent_message, BackendConfig};
    use crate::net::SnmtEntry;

    fn slice() -> Vec<SnmtEntry> {
        let gp = |g: &str, p: &str| GatewayPrefix { gateway: g.parse().unwrap(), prefix: p.parse().unwrap() };
        vec![
            SnmtEntry { name: "DC1".into(), pairs: vec![gp("R_C@2", "10.1.0.0/16")] },
            SnmtEntry { name: "group x".into(), pairs: vec![gp("R_A@4", "10.4.0.0/16"), gp("R_B@4", "10.5.0.0/16")] },
        ]
    }

    fn ask(mock: &MockBackend, intent: &str) -> Ir {
        let sys = assemble_system_prompt(&slice(), &BackendConfig::default()).unwrap().text();
        let reply = mock.complete(&[Message::system(sys), Message::user(intent_message(intent, None))]).unwrap();
        parse_ir_lenient(&reply).unwrap()
    }

    #[test]
    fn slice_round_trips_through_the_prompt() {
        let sys = assemble_system_prompt(&slice(), &BackendConfig::default()).unwrap().text();
        let got = parse_slice(&sys);
        let want: Vec<(String, Vec<GatewayPrefix>)> = slice().into_iter().map(|e| (e.name, e.pairs)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn dns_to_a_group() {
        let ir = ask(&MockBackend::new(), "Deny DNS traffic from DC1 to group x.");
        assert_eq!(ir.action, IrAction::Deny);
        assert_eq!(ir.application.pairs, vec!["tcp/53".parse().unwrap(), "udp/53".parse::<AppPair>().unwrap()]);
        assert_eq!(ir.destination.pairs.len(), 2);
        assert_eq!(ir.source.name, "DC1");
    }

    #[test]
    fn typo_needs_fuzzy_matching() {
        let intent = "Block SSH traffic from datecetre 1 to any destination on weekends.";
        let ir = ask(&MockBackend::new(), intent);
        assert_eq!(ir.source.name, "DC1");
        assert_eq!(ir.time, "weekends".parse().unwrap());
        let strict = ask(&MockBackend::exact(), intent);
        assert!(strict.source.not_found);
    }

    #[test]
    fn absent_entity_is_not_found() {
        let ir = ask(&MockBackend::new(), "Permit all traffic from Mars base to DC1 from 2026-01-01 to 2026-03-31.");
        assert!(ir.source.not_found);
        assert_eq!(ir.destination.name, "DC1");
        assert_eq!(ir.time, "daily 2026-01-01..2026-03-31".parse().unwrap());
        assert!(ir.application.pairs.is_empty());
    }

    #[test]
    fn script_goes_first() {
        let mock = MockBackend::new().with_script(["scripted".to_string()]);
        let sys = Message::system("x");
        assert_eq!(mock.complete(&[sys.clone(), Message::user("Intent: a")]).unwrap(), "scripted");
        assert_eq!(mock.calls().len(), 1);
    }
}
