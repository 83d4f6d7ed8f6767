use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;

/// An IPv4 network in CIDR notation with all host bits cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    addr: u32,
    len: u8,
}

impl Prefix {
    pub fn new(addr: Ipv4Addr, len: u8) -> Result<Self, ParseError> {
        if len > 32 {
            return Err(ParseError::Prefix(format!("{addr}/{len}: length above 32")));
        }
        let raw = u32::from(addr);
        if raw & !Self::mask(len) != 0 {
            return Err(ParseError::Prefix(format!("{addr}/{len}: host bits set")));
        }
        Ok(Self { addr: raw, len })
    }

    /// Builds a prefix by clearing host bits instead of rejecting them.
    pub fn truncating(addr: u32, len: u8) -> Self {
        let len = len.min(32);
        Self { addr: addr & Self::mask(len), len }
    }

    fn mask(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - u32::from(len))
        }
    }

    pub fn network(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.addr)
    }

    pub fn bits(&self) -> u32 {
        self.addr
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_host(&self) -> bool {
        self.len == 32
    }

    pub fn first(&self) -> u32 {
        self.addr
    }

    pub fn last(&self) -> u32 {
        self.addr | !Self::mask(self.len)
    }

    /// True when `other` is equal to or nested inside `self`.
    pub fn contains(&self, other: &Prefix) -> bool {
        other.len >= self.len && other.addr & Self::mask(self.len) == self.addr
    }

    pub fn contains_addr(&self, addr: u32) -> bool {
        addr & Self::mask(self.len) == self.addr
    }

    pub fn overlaps(&self, other: &Prefix) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// The enclosing prefix one bit shorter, if any.
    pub fn parent(&self) -> Option<Prefix> {
        (self.len > 0).then(|| Prefix::truncating(self.addr, self.len - 1))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network(), self.len)
    }
}

impl FromStr for Prefix {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (addr, len) = match s.split_once('/') {
            Some((a, l)) => (a, l),
            None => (s, "32"),
        };
        let addr: Ipv4Addr = addr
            .parse()
            .map_err(|_| ParseError::Prefix(format!("{s}: bad address")))?;
        let len: u8 = len
            .parse()
            .map_err(|_| ParseError::Prefix(format!("{s}: bad length")))?;
        Prefix::new(addr, len)
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_host_bits() {
        assert!("10.1.0.1/16".parse::<Prefix>().is_err());
        assert!("10.1.0.0/33".parse::<Prefix>().is_err());
        assert!("10.1.0.0".parse::<Prefix>().unwrap().is_host());
    }

    #[test]
    fn containment() {
        let dc1: Prefix = "10.1.0.0/16".parse().unwrap();
        let sub: Prefix = "10.1.5.0/24".parse().unwrap();
        assert!(dc1.contains(&sub));
        assert!(!sub.contains(&dc1));
        assert!(dc1.contains(&dc1));
        assert!(!dc1.contains(&"10.2.0.0/24".parse().unwrap()));
        let any: Prefix = "0.0.0.0/0".parse().unwrap();
        assert!(any.contains(&dc1));
    }

    proptest! {
        #[test]
        fn text_round_trip(addr in any::<u32>(), len in 0u8..=32) {
            let p = Prefix::truncating(addr, len);
            let back: Prefix = p.to_string().parse().unwrap();
            prop_assert_eq!(p, back);
        }

        #[test]
        fn containment_matches_address_enumeration(a in any::<u32>(), la in 24u8..=32, b in any::<u32>(), lb in 24u8..=32) {
            // both prefixes live in the same /24 half the time
            let b = if b % 2 == 0 { (a & 0xffff_ff00) | (b & 0xff) } else { b };
            let p = Prefix::truncating(a, la);
            let q = Prefix::truncating(b, lb);
            let every = (q.first()..=q.last()).all(|x| p.contains_addr(x));
            prop_assert_eq!(p.contains(&q), every);
        }
    }
}
