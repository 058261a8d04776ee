use std::fmt;

use chrono::{Datelike, NaiveDate};

/// Ordinal monthly period. For year-month axes the ordinal is
/// `year * 12 + (month - 1)`; for integer axes it is the index itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period(pub i64);

impl Period {
    pub fn from_year_month(year: i32, month: u32) -> Self {
        debug_assert!((1..=12).contains(&month));
        Period(i64::from(year) * 12 + i64::from(month) - 1)
    }

    pub fn year_month(self) -> (i32, u32) {
        (self.0.div_euclid(12) as i32, self.0.rem_euclid(12) as u32 + 1)
    }

    pub fn offset(self, months: i64) -> Self {
        Period(self.0 + months)
    }
}

/// How `time` values are written in files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeAxis {
    /// `YYYY-MM`
    #[default]
    YearMonth,
    /// Plain integers.
    Index,
}

impl TimeAxis {
    /// Infers the axis from one textual value.
    pub fn detect(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        if parse_year_month(raw).is_some() {
            Some(TimeAxis::YearMonth)
        } else if raw.parse::<i64>().is_ok() {
            Some(TimeAxis::Index)
        } else {
            None
        }
    }

    pub fn parse(self, raw: &str) -> Option<Period> {
        let raw = raw.trim();
        match self {
            TimeAxis::YearMonth => parse_year_month(raw).map(|(y, m)| Period::from_year_month(y, m)),
            TimeAxis::Index => raw.parse::<i64>().ok().map(Period),
        }
    }

    pub fn format(self, period: Period) -> String {
        match self {
            TimeAxis::YearMonth => {
                let (y, m) = period.year_month();
                format!("{y:04}-{m:02}")
            }
            TimeAxis::Index => period.0.to_string(),
        }
    }

    pub fn display(self, period: Period) -> PeriodDisplay {
        PeriodDisplay { axis: self, period }
    }
}

pub struct PeriodDisplay {
    axis: TimeAxis,
    period: Period,
}

impl fmt::Display for PeriodDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.axis.format(self.period))
    }
}

fn parse_year_month(raw: &str) -> Option<(i32, u32)> {
    let (y, m) = raw.split_once('-')?;
    if y.len() != 4 || m.is_empty() || m.len() > 2 {
        return None;
    }
    let year: i32 = y.parse().ok()?;
    let month: u32 = m.parse().ok()?;
    (1..=12).contains(&month).then_some((year, month))
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    (next - first).num_days() as u32
}

pub fn month_bounds(year: i32, month: u32) -> (NaiveDate, NaiveDate) {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let last = first.with_day(days_in_month(year, month)).expect("valid day");
    (first, last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_month_round_trip() {
        let p = TimeAxis::YearMonth.parse("2024-09").unwrap();
        assert_eq!(p.year_month(), (2024, 9));
        assert_eq!(TimeAxis::YearMonth.format(p), "2024-09");
        assert_eq!(p.offset(4).year_month(), (2025, 1));
    }

    #[test]
    fn detects_axis() {
        assert_eq!(TimeAxis::detect("2023-01"), Some(TimeAxis::YearMonth));
        assert_eq!(TimeAxis::detect("17"), Some(TimeAxis::Index));
        assert_eq!(TimeAxis::detect("Jan"), None);
        assert_eq!(TimeAxis::detect("2023-13"), None);
    }

    #[test]
    fn month_lengths() {
        assert_eq!(days_in_month(2024, 2), 29);
        assert_eq!(days_in_month(2025, 2), 28);
        assert_eq!(days_in_month(2025, 12), 31);
        assert_eq!(days_in_month(2025, 4), 30);
    }
}
