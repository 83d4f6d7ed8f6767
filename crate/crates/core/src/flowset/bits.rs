use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::FlowError;

/// Bit-vector over a flow universe; bit `i` marks universe position `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowSet {
    len: usize,
    words: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    And,
    Or,
    Diff,
    Subset,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetOpResult {
    Set(FlowSet),
    Bool(bool),
}

fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

impl FlowSet {
    pub fn empty(len: usize) -> Self {
        Self { len, words: vec![0; word_count(len)] }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self { len, words: vec![u64::MAX; word_count(len)] };
        s.clear_tail();
        s
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Parses a string of `0`/`1` characters, position 0 first.
    pub fn from_bit_string(text: &str) -> Result<Self, FlowError> {
        let mut s = Self::empty(text.len());
        for (i, c) in text.chars().enumerate() {
            match c {
                '1' => s.insert(i),
                '0' => {}
                _ => return Err(FlowError::BitString(text.to_string())),
            }
        }
        Ok(s)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "flow index {i} outside universe of {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        if i < self.len {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.len
    }

    fn check(&self, other: &FlowSet) -> Result<(), FlowError> {
        if self.len == other.len {
            Ok(())
        } else {
            Err(FlowError::LengthMismatch { left: self.len, right: other.len })
        }
    }

    fn zip_with(&self, other: &FlowSet, f: impl Fn(u64, u64) -> u64) -> Result<FlowSet, FlowError> {
        self.check(other)?;
        let words = self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect();
        Ok(FlowSet { len: self.len, words })
    }

    pub fn and(&self, other: &FlowSet) -> Result<FlowSet, FlowError> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &FlowSet) -> Result<FlowSet, FlowError> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn diff(&self, other: &FlowSet) -> Result<FlowSet, FlowError> {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn and_assign(&mut self, other: &FlowSet) -> Result<(), FlowError> {
        self.check(other)?;
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a &= b);
        Ok(())
    }

    pub fn or_assign(&mut self, other: &FlowSet) -> Result<(), FlowError> {
        self.check(other)?;
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a |= b);
        Ok(())
    }

    pub fn diff_assign(&mut self, other: &FlowSet) -> Result<(), FlowError> {
        self.check(other)?;
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a &= !b);
        Ok(())
    }

    pub fn complement(&self) -> FlowSet {
        let mut s = FlowSet { len: self.len, words: self.words.iter().map(|w| !w).collect() };
        s.clear_tail();
        s
    }

    /// True when every flow of `self` is in `other`.
    pub fn is_subset(&self, other: &FlowSet) -> Result<bool, FlowError> {
        self.check(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    pub fn intersects(&self, other: &FlowSet) -> Result<bool, FlowError> {
        self.check(other)?;
        Ok(self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.len).map(|i| if self.contains(i) { '1' } else { '0' }).collect()
    }

    /// Hex form of [`Self::to_bit_string`]: four positions per digit, the
    /// lowest position in the digit's high bit, zero-padded at the end.
    pub fn to_hex(&self) -> String {
        (0..self.len.div_ceil(4))
            .map(|d| {
                let nibble = (0..4).fold(0u32, |acc, k| acc << 1 | self.contains(d * 4 + k) as u32);
                char::from_digit(nibble, 16).unwrap()
            })
            .collect()
    }
}

pub fn setop(op: SetOp, a: &FlowSet, b: Option<&FlowSet>) -> Result<SetOpResult, FlowError> {
    let rhs = || b.ok_or(FlowError::LengthMismatch { left: a.len(), right: 0 });
    Ok(match op {
        SetOp::And => SetOpResult::Set(a.and(rhs()?)?),
        SetOp::Or => SetOpResult::Set(a.or(rhs()?)?),
        SetOp::Diff => SetOpResult::Set(a.diff(rhs()?)?),
        SetOp::Subset => SetOpResult::Bool(a.is_subset(rhs()?)?),
        SetOp::Empty => SetOpResult::Bool(a.is_empty()),
    })
}

impl fmt::Debug for FlowSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            write!(f, "FlowSet({})", self.to_bit_string())
        } else {
            write!(f, "FlowSet(len={}, count={})", self.len, self.count())
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    len: usize,
    ones: Vec<usize>,
}

impl Serialize for FlowSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Wire { len: self.len, ones: self.iter().collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FlowSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = Wire::deserialize(d)?;
        if let Some(bad) = w.ones.iter().find(|&&i| i >= w.len) {
            return Err(serde::de::Error::custom(format!("flow index {bad} outside universe of {}", w.len)));
        }
        Ok(FlowSet::from_indices(w.len, w.ones))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;

    #[test]
    fn or_of_complements_is_full() {
        let a = FlowSet::from_bit_string("1010").unwrap();
        let b = FlowSet::from_bit_string("0101").unwrap();
        assert_eq!(a.or(&b).unwrap().to_bit_string(), "1111");
        assert_eq!(a.diff(&a).unwrap().to_bit_string(), "0000");
        assert!(a.is_subset(&a).unwrap());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = FlowSet::empty(4);
        let b = FlowSet::empty(5);
        assert_eq!(a.and(&b), Err(FlowError::LengthMismatch { left: 4, right: 5 }));
        assert!(setop(SetOp::Subset, &a, Some(&b)).is_err());
        assert!(setop(SetOp::Or, &a, None).is_err());
        assert_eq!(setop(SetOp::Empty, &a, None).unwrap(), SetOpResult::Bool(true));
    }

    #[test]
    fn hex_dump() {
        assert_eq!(FlowSet::from_bit_string("1010").unwrap().to_hex(), "a");
        assert_eq!(FlowSet::from_bit_string("100000001").unwrap().to_hex(), "808");
    }

    #[test]
    fn complement_respects_length() {
        let s = FlowSet::from_indices(70, [0, 69]);
        let c = s.complement();
        assert_eq!(c.count(), 68);
        assert!(FlowSet::full(70).is_full());
    }

    fn arb_pair() -> impl Strategy<Value = (usize, BTreeSet<usize>, BTreeSet<usize>)> {
        (1usize..300).prop_flat_map(|n| {
            (Just(n), prop::collection::btree_set(0..n, 0..n), prop::collection::btree_set(0..n, 0..n))
        })
    }

    proptest! {
        #[test]
        fn matches_set_semantics((n, a, b) in arb_pair()) {
            let fa = FlowSet::from_indices(n, a.iter().copied());
            let fb = FlowSet::from_indices(n, b.iter().copied());
            let collect = |s: FlowSet| s.iter().collect::<BTreeSet<_>>();
            prop_assert_eq!(collect(fa.and(&fb).unwrap()), a.intersection(&b).copied().collect());
            prop_assert_eq!(collect(fa.or(&fb).unwrap()), a.union(&b).copied().collect());
            prop_assert_eq!(collect(fa.diff(&fb).unwrap()), a.difference(&b).copied().collect());
            prop_assert_eq!(fa.is_subset(&fb).unwrap(), a.is_subset(&b));
            prop_assert_eq!(fa.is_empty(), a.is_empty());
            prop_assert_eq!(fa.count(), a.len());
        }

        #[test]
        fn serde_round_trip((n, a, _b) in arb_pair()) {
            let fa = FlowSet::from_indices(n, a);
            let back: FlowSet = serde_json::from_str(&serde_json::to_string(&fa).unwrap()).unwrap();
            prop_assert_eq!(back, fa);
        }
    }
}
