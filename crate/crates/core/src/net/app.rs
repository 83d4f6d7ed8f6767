use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    #[serde(rename = "ip")]
    AnyIp,
    Tcp,
    Udp,
    Icmp,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::AnyIp => "ip",
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
        }
    }

    pub fn takes_port(self) -> bool {
        matches!(self, Protocol::Tcp | Protocol::Udp)
    }
}

impl FromStr for Protocol {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ip" | "any" | "any-ip" | "all" => Ok(Protocol::AnyIp),
            "tcp" => Ok(Protocol::Tcp),
            "udp" => Ok(Protocol::Udp),
            "icmp" => Ok(Protocol::Icmp),
            other => Err(ParseError::Application(other.to_string())),
        }
    }
}

/// A protocol with an optional port. A missing port on tcp/udp means every port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProtocolPort {
    protocol: Protocol,
    port: Option<u16>,
}

impl ProtocolPort {
    pub const ANY: ProtocolPort = ProtocolPort { protocol: Protocol::AnyIp, port: None };

    pub fn new(protocol: Protocol, port: Option<u16>) -> Result<Self, ParseError> {
        if port.is_some() && !protocol.takes_port() {
            return Err(ParseError::Application(format!(
                "{} does not carry ports",
                protocol.name()
            )));
        }
        Ok(Self { protocol, port })
    }

    pub fn tcp(port: u16) -> Self {
        Self { protocol: Protocol::Tcp, port: Some(port) }
    }

    pub fn udp(port: u16) -> Self {
        Self { protocol: Protocol::Udp, port: Some(port) }
    }

    pub fn proto(protocol: Protocol) -> Self {
        Self { protocol, port: None }
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn port(&self) -> Option<u16> {
        self.port
    }

    pub fn is_any(&self) -> bool {
        self.protocol == Protocol::AnyIp
    }

    /// True when every packet matched by `other` is matched by `self`.
    pub fn covers(&self, other: &ProtocolPort) -> bool {
        match (self.protocol, other.protocol) {
            (Protocol::AnyIp, _) => true,
            (a, b) if a == b => self.port.is_none() || self.port == other.port,
            _ => false,
        }
    }
}

impl fmt::Display for ProtocolPort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.port {
            Some(p) => write!(f, "{}/{}", self.protocol.name(), p),
            None => f.write_str(self.protocol.name()),
        }
    }
}

impl FromStr for ProtocolPort {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (proto, port) = match s.split_once('/') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let protocol: Protocol = proto.parse()?;
        let port = port
            .map(|p| p.trim().parse::<u16>().map_err(|_| ParseError::Application(s.to_string())))
            .transpose()?;
        ProtocolPort::new(protocol, port)
    }
}

impl Serialize for ProtocolPort {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProtocolPort {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A named service and the protocol-port atoms it consists of.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Application {
    pub name: String,
    pub pairs: Vec<ProtocolPort>,
}

/// Services used by the scenario generator and the comprehension mock.
pub fn default_catalog() -> Vec<Application> {
    let app = |name: &str, pairs: Vec<ProtocolPort>| Application { name: name.to_string(), pairs };
    vec![
        app("HTTP", vec![ProtocolPort::tcp(80)]),
        app("HTTPS", vec![ProtocolPort::tcp(443)]),
        app("DNS", vec![ProtocolPort::tcp(53), ProtocolPort::udp(53)]),
        app("SSH", vec![ProtocolPort::tcp(22)]),
        app("Telnet", vec![ProtocolPort::tcp(23)]),
        app("FTP", vec![ProtocolPort::tcp(21)]),
        app("SMTP", vec![ProtocolPort::tcp(25)]),
        app("NTP", vec![ProtocolPort::udp(123)]),
        app("SNMP", vec![ProtocolPort::udp(161)]),
        app("Syslog", vec![ProtocolPort::udp(514)]),
        app("LDAP", vec![ProtocolPort::tcp(389)]),
        app("RDP", vec![ProtocolPort::tcp(3389)]),
        app("MySQL", vec![ProtocolPort::tcp(3306)]),
        app("SunRPC", vec![ProtocolPort::tcp(111), ProtocolPort::udp(111)]),
        app("BGP", vec![ProtocolPort::tcp(179)]),
        app("OSPF", vec![ProtocolPort::tcp(89)]),
        app("DHCP", vec![ProtocolPort::udp(67)]),
        app("TFTP", vec![ProtocolPort::udp(69)]),
        app("Kerberos", vec![ProtocolPort::tcp(88), ProtocolPort::udp(88)]),
        app("ICMP", vec![ProtocolPort::proto(Protocol::Icmp)]),
    ]
}

/// Distinct protocol-port atoms appearing in `apps`, in first-seen order.
pub fn catalog_atoms(apps: &[Application]) -> Vec<ProtocolPort> {
    let mut out: Vec<ProtocolPort> = Vec::new();
    for a in apps {
        for p in &a.pairs {
            if !out.contains(p) {
                out.push(*p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_only_on_tcp_udp() {
        assert!(ProtocolPort::new(Protocol::Icmp, Some(53)).is_err());
        assert!(ProtocolPort::new(Protocol::AnyIp, Some(1)).is_err());
        assert!("udp/53".parse::<ProtocolPort>().is_ok());
        assert!("icmp/8".parse::<ProtocolPort>().is_err());
    }

    #[test]
    fn coverage() {
        let tcp = ProtocolPort::proto(Protocol::Tcp);
        assert!(tcp.covers(&ProtocolPort::tcp(80)));
        assert!(!ProtocolPort::tcp(80).covers(&tcp));
        assert!(ProtocolPort::ANY.covers(&ProtocolPort::udp(53)));
        assert!(!tcp.covers(&ProtocolPort::udp(53)));
    }

    #[test]
    fn catalog_is_about_twenty_services() {
        let cat = default_catalog();
        assert_eq!(cat.len(), 20);
        let atoms = catalog_atoms(&cat);
        assert_eq!(atoms.len(), atoms.iter().collect::<std::collections::BTreeSet<_>>().len());
    }
}
