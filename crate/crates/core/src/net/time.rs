use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;

const DAY_NAMES: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
pub const ALL_DAYS: u8 = 0b111_1111;
pub const WEEKDAYS: u8 = 0b001_1111;
pub const WEEKENDS: u8 = 0b110_0000;

/// Day-of-week bit for a date, Monday = bit 0.
pub fn day_bit(date: NaiveDate) -> u8 {
    1 << date.weekday().num_days_from_monday()
}

/// A recurring time range: a set of weekdays, optionally limited to an
/// inclusive date window. `TimeRange::ANY` matches every instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeRange {
    days: u8,
    window: Option<(NaiveDate, NaiveDate)>,
}

impl TimeRange {
    pub const ANY: TimeRange = TimeRange { days: ALL_DAYS, window: None };

    pub fn new(days: u8, window: Option<(NaiveDate, NaiveDate)>) -> Result<Self, ParseError> {
        let days = days & ALL_DAYS;
        if days == 0 {
            return Err(ParseError::Time("empty day-of-week set".into()));
        }
        if let Some((s, e)) = window {
            if s > e {
                return Err(ParseError::Time(format!("window {s}..{e} ends before it starts")));
            }
        }
        Ok(Self { days, window })
    }

    pub fn days(&self) -> u8 {
        self.days
    }

    pub fn window(&self) -> Option<(NaiveDate, NaiveDate)> {
        self.window
    }

    pub fn is_any(&self) -> bool {
        *self == Self::ANY
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.days & day_bit(date) != 0
            && self.window.is_none_or(|(s, e)| s <= date && date <= e)
    }

    /// Intersection of two ranges; `None` when they share no day at all.
    pub fn intersect(&self, other: &TimeRange) -> Option<TimeRange> {
        let days = self.days & other.days;
        let window = match (self.window, other.window) {
            (None, w) | (w, None) => w,
            (Some((a, b)), Some((c, d))) => Some((a.max(c), b.min(d))),
        };
        let range = TimeRange::new(days, window).ok()?;
        range.is_inhabited().then_some(range)
    }

    /// False when the window is too short to contain any of the selected days.
    pub fn is_inhabited(&self) -> bool {
        match self.window {
            None => true,
            Some((s, e)) => s
                .iter_days()
                .take_while(|d| *d <= e)
                .take(7)
                .any(|d| self.days & day_bit(d) != 0),
        }
    }
}

impl Default for TimeRange {
    fn default() -> Self {
        Self::ANY
    }
}

impl fmt::Display for TimeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_any() {
            return f.write_str("any");
        }
        match self.days {
            ALL_DAYS => f.write_str("daily")?,
            WEEKDAYS => f.write_str("weekdays")?,
            WEEKENDS => f.write_str("weekends")?,
            d => {
                let names: Vec<&str> =
                    (0..7).filter(|i| d & (1 << i) != 0).map(|i| DAY_NAMES[i]).collect();
                f.write_str(&names.join(","))?
            }
        }
        if let Some((s, e)) = self.window {
            write!(f, " {s}..{e}")?;
        }
        Ok(())
    }
}

impl FromStr for TimeRange {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("any") || s.is_empty() {
            return Ok(Self::ANY);
        }
        let (days_txt, window_txt) = match s.split_once(' ') {
            Some((d, w)) => (d, Some(w.trim())),
            None => (s, None),
        };
        let days = match days_txt.to_ascii_lowercase().as_str() {
            "daily" => ALL_DAYS,
            "weekdays" => WEEKDAYS,
            "weekends" => WEEKENDS,
            list => {
                let mut mask = 0u8;
                for name in list.split(',') {
                    let i = DAY_NAMES
                        .iter()
                        .position(|d| *d == name.trim())
                        .ok_or_else(|| ParseError::Time(s.to_string()))?;
                    mask |= 1 << i;
                }
                mask
            }
        };
        let window = window_txt
            .map(|w| {
                let (a, b) = w.split_once("..").ok_or_else(|| ParseError::Time(s.to_string()))?;
                let parse = |x: &str| {
                    NaiveDate::parse_from_str(x.trim(), "%Y-%m-%d")
                        .map_err(|_| ParseError::Time(s.to_string()))
                };
                Ok::<_, ParseError>((parse(a)?, parse(b)?))
            })
            .transpose()?;
        TimeRange::new(days, window)
    }
}

impl Serialize for TimeRange {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn weekdays_in_may() {
        let r: TimeRange = "weekdays 2025-05-01..2025-05-31".parse().unwrap();
        assert!(r.contains(date("2025-05-05"))); // Monday
        assert!(!r.contains(date("2025-05-04"))); // Sunday
        assert!(!r.contains(date("2025-06-02")));
        assert_eq!(r.to_string(), "weekdays 2025-05-01..2025-05-31");
    }

    #[test]
    fn invariants() {
        assert!(TimeRange::new(0, None).is_err());
        assert!(TimeRange::new(1, Some((date("2025-02-01"), date("2025-01-01")))).is_err());
        assert_eq!("any".parse::<TimeRange>().unwrap(), TimeRange::ANY);
        assert_eq!("mon,wed".parse::<TimeRange>().unwrap().days(), 0b101);
    }

    #[test]
    fn intersection_can_be_empty() {
        let sat: TimeRange = "sat".parse().unwrap();
        let monday_only: TimeRange = "daily 2025-05-05..2025-05-05".parse().unwrap();
        assert!(sat.intersect(&monday_only).is_none());
        let wk: TimeRange = "weekdays".parse().unwrap();
        assert_eq!(wk.intersect(&TimeRange::ANY), Some(wk));
    }
}
