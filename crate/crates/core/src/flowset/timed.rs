use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{FlowSet, GlobalFlowTable, Rule};
use crate::error::FlowError;
use crate::net::{day_bit, TimeRange};

pub fn earliest_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()
}

pub fn latest_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(9999, 12, 31).unwrap()
}

/// A single weekday inside an inclusive date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Cell {
    interval: usize,
    day: u8,
}

/// Minimal time regions generated by a set of time ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeAtoms {
    ranges: Vec<TimeRange>,
    intervals: Vec<(NaiveDate, NaiveDate)>,
    atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Atom {
    cells: Vec<Cell>,
    members: Vec<usize>,
    representative: NaiveDate,
}

fn first_day_in(day: u8, start: NaiveDate, end: NaiveDate) -> Option<NaiveDate> {
    start.iter_days().take_while(|d| *d <= end).take(7).find(|d| day_bit(*d) == day)
}

fn clamp_window(r: &TimeRange) -> (NaiveDate, NaiveDate) {
    let (s, e) = r.window().unwrap_or((earliest_date(), latest_date()));
    (s.max(earliest_date()), e.min(latest_date()))
}

impl TimeAtoms {
    /// Atoms of the algebra generated by `ranges`. Instants outside every
    /// range belong to no atom.
    pub fn new(ranges: impl IntoIterator<Item = TimeRange>) -> Self {
        let mut ranges: Vec<TimeRange> = ranges.into_iter().collect();
        ranges.sort();
        ranges.dedup();

        let mut cuts = vec![earliest_date(), latest_date().succ_opt().unwrap()];
        for r in &ranges {
            let (s, e) = clamp_window(r);
            cuts.push(s);
            cuts.push(e.succ_opt().unwrap());
        }
        cuts.sort();
        cuts.dedup();
        let intervals: Vec<(NaiveDate, NaiveDate)> =
            cuts.windows(2).map(|w| (w[0], w[1].pred_opt().unwrap())).collect();

        let mut groups: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut atoms: Vec<Atom> = Vec::new();
        for (ii, &(s, e)) in intervals.iter().enumerate() {
            for bit in 0..7 {
                let day = 1u8 << bit;
                let Some(first) = first_day_in(day, s, e) else { continue };
                let members: Vec<usize> = (0..ranges.len()).filter(|&ri| ranges[ri].contains(first)).collect();
                if members.is_empty() {
                    continue;
                }
                let cell = Cell { interval: ii, day };
                match groups.get(&members) {
                    Some(&ai) => atoms[ai].cells.push(cell),
                    None => {
                        groups.insert(members.clone(), atoms.len());
                        atoms.push(Atom { cells: vec![cell], members, representative: first });
                    }
                }
            }
        }
        Self { ranges, intervals, atoms }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn ranges(&self) -> &[TimeRange] {
        &self.ranges
    }

    /// A date lying inside atom `i`.
    pub fn representative(&self, i: usize) -> NaiveDate {
        self.atoms[i].representative
    }

    /// Context ranges that contain atom `i`.
    pub fn members(&self, i: usize) -> impl Iterator<Item = &TimeRange> {
        self.atoms[i].members.iter().map(|&m| &self.ranges[m])
    }

    pub fn atom_containing(&self, date: NaiveDate) -> Option<usize> {
        (0..self.atoms.len()).find(|&i| self.atom_contains(i, date))
    }

    pub fn atom_contains(&self, i: usize, date: NaiveDate) -> bool {
        self.atoms[i].cells.iter().any(|c| {
            let (s, e) = self.intervals[c.interval];
            day_bit(date) == c.day && s <= date && date <= e
        })
    }

    /// Atoms whose region lies inside `r`. Fails when `r` splits an atom.
    pub fn atoms_of(&self, r: &TimeRange) -> Result<Vec<usize>, FlowError> {
        let (ws, we) = clamp_window(r);
        let mut out = Vec::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            let (mut inside, mut touching) = (0, 0);
            for c in &atom.cells {
                let (s, e) = self.intervals[c.interval];
                if r.days() & c.day == 0 || e < ws || s > we {
                    continue;
                }
                touching += 1;
                if ws <= s && e <= we {
                    inside += 1;
                }
            }
            if inside == atom.cells.len() {
                out.push(i);
            } else if touching > 0 {
                return Err(FlowError::TimeNotInContext(r.to_string()));
            }
        }
        Ok(out)
    }

    /// Time ranges whose union is exactly the union of the given atoms.
    pub fn cover(&self, atoms: &[usize]) -> Vec<TimeRange> {
        let mut by_interval: BTreeMap<usize, u8> = BTreeMap::new();
        for &a in atoms {
            for c in &self.atoms[a].cells {
                *by_interval.entry(c.interval).or_default() |= c.day;
            }
        }
        let mut out: Vec<(u8, NaiveDate, NaiveDate)> = Vec::new();
        for (ii, days) in by_interval {
            let (s, e) = self.intervals[ii];
            match out.last_mut() {
                Some(last) if last.0 == days && last.2.succ_opt() == Some(s) => last.2 = e,
                _ => out.push((days, s, e)),
            }
        }
        out.into_iter()
            .map(|(days, s, e)| {
                let window = (s != earliest_date() || e != latest_date()).then_some((s, e));
                TimeRange::new(days, window).expect("cells carry at least one day")
            })
            .collect()
    }
}

/// A flow set per time atom of a shared [`TimeAtoms`] context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimedFlowSet {
    sets: Vec<FlowSet>,
}

impl TimedFlowSet {
    pub fn empty(atoms: usize, len: usize) -> Self {
        Self { sets: vec![FlowSet::empty(len); atoms] }
    }

    pub fn from_sets(sets: Vec<FlowSet>) -> Self {
        Self { sets }
    }

    pub fn atoms(&self) -> usize {
        self.sets.len()
    }

    pub fn at(&self, atom: usize) -> &FlowSet {
        &self.sets[atom]
    }

    pub fn at_mut(&mut self, atom: usize) -> &mut FlowSet {
        &mut self.sets[atom]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &FlowSet)> {
        self.sets.iter().enumerate()
    }

    /// `(atom, flow)` pairs present in the set.
    pub fn elements(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.iter().flat_map(|(a, s)| s.iter().map(move |f| (a, f)))
    }

    pub fn count(&self) -> usize {
        self.sets.iter().map(FlowSet::count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.iter().all(FlowSet::is_empty)
    }

    /// Flows present in at least one atom.
    pub fn flatten(&self) -> Option<FlowSet> {
        let mut it = self.sets.iter();
        let mut acc = it.next()?.clone();
        for s in it {
            acc.or_assign(s).expect("atoms share the universe length");
        }
        Some(acc)
    }

    fn check(&self, other: &TimedFlowSet) -> Result<(), FlowError> {
        if self.sets.len() == other.sets.len() {
            Ok(())
        } else {
            Err(FlowError::AtomMismatch)
        }
    }

    fn zip(&self, other: &TimedFlowSet, f: impl Fn(&FlowSet, &FlowSet) -> Result<FlowSet, FlowError>) -> Result<TimedFlowSet, FlowError> {
        self.check(other)?;
        let sets = self.sets.iter().zip(&other.sets).map(|(a, b)| f(a, b)).collect::<Result<_, _>>()?;
        Ok(TimedFlowSet { sets })
    }

    pub fn and(&self, other: &TimedFlowSet) -> Result<TimedFlowSet, FlowError> {
        self.zip(other, FlowSet::and)
    }

    pub fn or(&self, other: &TimedFlowSet) -> Result<TimedFlowSet, FlowError> {
        self.zip(other, FlowSet::or)
    }

    pub fn diff(&self, other: &TimedFlowSet) -> Result<TimedFlowSet, FlowError> {
        self.zip(other, FlowSet::diff)
    }

    pub fn or_assign(&mut self, other: &TimedFlowSet) -> Result<(), FlowError> {
        self.check(other)?;
        self.sets.iter_mut().zip(&other.sets).try_for_each(|(a, b)| a.or_assign(b))
    }

    pub fn diff_assign(&mut self, other: &TimedFlowSet) -> Result<(), FlowError> {
        self.check(other)?;
        self.sets.iter_mut().zip(&other.sets).try_for_each(|(a, b)| a.diff_assign(b))
    }

    pub fn and_assign(&mut self, other: &TimedFlowSet) -> Result<(), FlowError> {
        self.check(other)?;
        self.sets.iter_mut().zip(&other.sets).try_for_each(|(a, b)| a.and_assign(b))
    }

    /// Restricts every atom to `mask`.
    pub fn and_flows(&self, mask: &FlowSet) -> Result<TimedFlowSet, FlowError> {
        let sets = self.sets.iter().map(|s| s.and(mask)).collect::<Result<_, _>>()?;
        Ok(TimedFlowSet { sets })
    }

    pub fn is_subset(&self, other: &TimedFlowSet) -> Result<bool, FlowError> {
        self.check(other)?;
        for (a, b) in self.sets.iter().zip(&other.sets) {
            if !a.is_subset(b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn intersects(&self, other: &TimedFlowSet) -> Result<bool, FlowError> {
        self.check(other)?;
        for (a, b) in self.sets.iter().zip(&other.sets) {
            if a.intersects(b)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Flow universe plus the time atoms of one working context. Cheap to clone.
#[derive(Debug, Clone)]
pub struct FlowContext {
    pub gft: Arc<GlobalFlowTable>,
    pub time: Arc<TimeAtoms>,
}

impl FlowContext {
    /// Context whose time atoms are generated by the ranges of `rules` plus
    /// the unrestricted range.
    pub fn new<'a>(gft: Arc<GlobalFlowTable>, rules: impl IntoIterator<Item = &'a Rule>) -> Self {
        let ranges = rules.into_iter().map(|r| r.time).chain([TimeRange::ANY]);
        Self { gft, time: Arc::new(TimeAtoms::new(ranges)) }
    }

    pub fn empty(&self) -> TimedFlowSet {
        TimedFlowSet::empty(self.time.len(), self.gft.len())
    }

    pub fn full(&self) -> TimedFlowSet {
        TimedFlowSet::from_sets(vec![self.gft.full_set(); self.time.len()])
    }

    /// The same flows in every atom of `atoms`.
    pub fn place(&self, flows: &FlowSet, atoms: &[usize]) -> TimedFlowSet {
        let mut out = self.empty();
        for &a in atoms {
            out.sets[a] = flows.clone();
        }
        out
    }

    pub fn expand(&self, r: &Rule) -> Result<TimedFlowSet, FlowError> {
        let flows = self.gft.expand_rule(r)?;
        Ok(self.place(&flows, &self.time.atoms_of(&r.time)?))
    }

    pub fn expand_all<'a>(&self, rules: impl IntoIterator<Item = &'a Rule>) -> Result<TimedFlowSet, FlowError> {
        let mut acc = self.empty();
        for r in rules {
            acc.or_assign(&self.expand(r)?)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{WEEKDAYS, WEEKENDS};

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn vocabulary() -> Vec<TimeRange> {
        vec![
            TimeRange::ANY,
            TimeRange::new(WEEKDAYS, None).unwrap(),
            TimeRange::new(WEEKENDS, None).unwrap(),
            TimeRange::new(WEEKDAYS, Some((d(2024, 1, 1), d(2024, 3, 31)))).unwrap(),
            TimeRange::new(0b101, Some((d(2024, 2, 14), d(2024, 2, 20)))).unwrap(),
            TimeRange::new(crate::net::ALL_DAYS, Some((d(2024, 3, 1), d(2024, 6, 30)))).unwrap(),
        ]
    }

    fn check_partition(ranges: &[TimeRange]) {
        let atoms = TimeAtoms::new(ranges.iter().copied());
        for date in d(2023, 12, 1).iter_days().take_while(|x| *x <= d(2024, 8, 1)) {
            let holders: Vec<usize> = (0..atoms.len()).filter(|&i| atoms.atom_contains(i, date)).collect();
            let covered = ranges.iter().any(|r| r.contains(date));
            assert_eq!(holders.len(), usize::from(covered), "{date}");
            if let Some(&a) = holders.first() {
                for r in ranges {
                    assert_eq!(r.contains(date), atoms.members(a).any(|m| m == r), "{date} {r}");
                }
            }
        }
        for i in 0..atoms.len() {
            assert!(atoms.atom_contains(i, atoms.representative(i)));
        }
    }

    #[test]
    fn atoms_partition_the_vocabulary() {
        let v = vocabulary();
        check_partition(&v);
        for k in 1..v.len() {
            check_partition(&v[k..]);
            check_partition(&v[..k]);
        }
    }

    #[test]
    fn every_context_range_is_a_union_of_atoms() {
        let v = vocabulary();
        let atoms = TimeAtoms::new(v.iter().copied());
        for r in &v {
            let ids = atoms.atoms_of(r).unwrap();
            let cover = atoms.cover(&ids);
            for date in d(2023, 12, 1).iter_days().take_while(|x| *x <= d(2024, 8, 1)) {
                assert_eq!(r.contains(date), cover.iter().any(|c| c.contains(date)), "{r} {date}");
            }
        }
        assert_eq!(atoms.cover(&atoms.atoms_of(&TimeRange::ANY).unwrap()), vec![TimeRange::ANY]);
    }

    #[test]
    fn foreign_range_that_splits_an_atom_is_rejected() {
        let atoms = TimeAtoms::new([TimeRange::ANY]);
        assert_eq!(atoms.len(), 1);
        let weekdays = TimeRange::new(WEEKDAYS, None).unwrap();
        assert!(atoms.atoms_of(&weekdays).is_err());
    }

    #[test]
    fn timed_algebra_is_atomwise() {
        let a = TimedFlowSet::from_sets(vec![FlowSet::from_bit_string("1100").unwrap(), FlowSet::empty(4)]);
        let b = TimedFlowSet::from_sets(vec![FlowSet::from_bit_string("0110").unwrap(), FlowSet::full(4)]);
        let and = a.and(&b).unwrap();
        assert_eq!(and.at(0).to_bit_string(), "0100");
        assert!(and.at(1).is_empty());
        assert_eq!(a.or(&b).unwrap().count(), 7);
        assert!(a.diff(&b).unwrap().elements().eq([(0, 0)]));
        assert!(!a.is_subset(&b).unwrap());
        assert_eq!(a.and(&TimedFlowSet::empty(3, 4)), Err(FlowError::AtomMismatch));
    }
}
