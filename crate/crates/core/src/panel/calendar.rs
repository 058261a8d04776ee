use std::collections::BTreeSet;
use std::io::Read;

use chrono::NaiveDate;
use thiserror::Error;

use super::period::{days_in_month, month_bounds, Period};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalendarError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("row {row}: invalid date `{value}`")]
    Date { row: usize, value: String },
    #[error("event for unit={unit} ends {end} before it starts {start}")]
    Reversed { unit: String, start: NaiveDate, end: NaiveDate },
    #[error("undeclared event type `{0}`")]
    UnknownType(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventEntry {
    pub unit: String,
    pub event_type: String,
    pub start: NaiveDate,
    /// Inclusive.
    pub end: NaiveDate,
}

/// Events per unit, summarised into monthly event-day counts per type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventCalendar {
    types: Vec<String>,
    entries: Vec<EventEntry>,
}

impl EventCalendar {
    /// `types` is the declared taxonomy; every entry must use one of them.
    pub fn new(types: Vec<String>, entries: Vec<EventEntry>) -> Result<Self, CalendarError> {
        let declared: BTreeSet<&str> = types.iter().map(String::as_str).collect();
        for e in &entries {
            if e.end < e.start {
                return Err(CalendarError::Reversed { unit: e.unit.clone(), start: e.start, end: e.end });
            }
            if !declared.contains(e.event_type.as_str()) {
                return Err(CalendarError::UnknownType(e.event_type.clone()));
            }
        }
        Ok(Self { types, entries })
    }

    /// Reads `unit,event_type,start_date,end_date` rows. Without a declared
    /// taxonomy the types found in the file are used, sorted.
    pub fn from_csv<R: Read>(source: R, declared: Option<Vec<String>>) -> Result<Self, CalendarError> {
        #[derive(serde::Deserialize)]
        struct Row {
            unit: String,
            event_type: String,
            start_date: String,
            end_date: String,
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| CalendarError::Csv(e.to_string()))?;
            let date = |s: &str| {
                NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map_err(|_| CalendarError::Date { row: i + 2, value: s.to_string() })
            };
            entries.push(EventEntry {
                start: date(&row.start_date)?,
                end: date(&row.end_date)?,
                unit: row.unit,
                event_type: row.event_type,
            });
        }
        let types = declared.unwrap_or_else(|| {
            entries.iter().map(|e| e.event_type.clone()).collect::<BTreeSet<_>>().into_iter().collect()
        });
        Self::new(types, entries)
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn entries(&self) -> &[EventEntry] {
        &self.entries
    }

    /// Summed overlap (in days) of all `event_type` events of `unit` with the
    /// month, capped at the month's length.
    pub fn cap_event_days(&self, unit: &str, event_type: &str, year: i32, month: u32) -> u32 {
        let (first, last) = month_bounds(year, month);
        let total: i64 = self
            .entries
            .iter()
            .filter(|e| e.unit == unit && e.event_type == event_type)
            .map(|e| {
                let lo = e.start.max(first);
                let hi = e.end.min(last);
                if hi < lo {
                    0
                } else {
                    (hi - lo).num_days() + 1
                }
            })
            .sum();
        total.min(i64::from(days_in_month(year, month))) as u32
    }

    /// One `event_days_<type>` column per declared type, laid out unit-major
    /// over the given (year-month) periods.
    pub fn event_day_columns(&self, units: &[String], periods: &[Period]) -> Vec<(String, Vec<f64>)> {
        self.types
            .iter()
            .map(|t| {
                let values = units
                    .iter()
                    .flat_map(|u| {
                        periods.iter().map(move |p| {
                            let (y, m) = p.year_month();
                            f64::from(self.cap_event_days(u, t, y, m))
                        })
                    })
                    .collect();
                (format!("event_days_{t}"), values)
            })
            .collect()
    }
}
