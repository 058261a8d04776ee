//! Balanced unit × period panels.
//!
//! A [`PanelDataset`] is immutable once built: every transform returns a new
//! dataset. Cells are stored unit-major, so the row for `(unit u, period p)`
//! is `u * n_periods + p` with both indices taken from the sorted axes.

mod calendar;
mod io;
mod period;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::scalar::Scalar;

pub use calendar::{CalendarError, EventCalendar, EventEntry};
pub use io::{load_panel, write_panel, PanelSchema};
pub use period::{days_in_month, month_bounds, Period, TimeAxis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse {column} value `{value}`")]
    Parse { row: usize, column: String, value: String },
    #[error("duplicate cell unit={unit} period={period}")]
    DuplicateCell { unit: String, period: String },
    #[error("unbalanced panel: missing cell unit={unit} period={period}")]
    MissingCell { unit: String, period: String },
    #[error("treatment must be 0 or 1, got {value} at unit={unit} period={period}")]
    InvalidTreatment { unit: String, period: String, value: String },
    #[error("negative outcome {value} at unit={unit} period={period}")]
    NegativeOutcome { unit: String, period: String, value: f64 },
    #[error("non-finite {column} at unit={unit} period={period}")]
    NonFinite { column: String, unit: String, period: String },
    #[error("treatment switches off at unit={unit} period={period}; treatment must be absorbing")]
    NonAbsorbingTreatment { unit: String, period: String },
    #[error("log of non-positive {column} value {value} at unit={unit} period={period}")]
    LogDomain { column: String, unit: String, period: String, value: f64 },
    #[error("observation has {got} controls, expected {expected}")]
    ControlArity { expected: usize, got: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` already exists")]
    DuplicateColumn(String),
    #[error("panel is empty")]
    Empty,
}

/// One unit-period cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub unit: String,
    pub period: Period,
    pub outcome: T,
    pub treatment: u8,
    /// Aligned with the dataset's control names.
    pub controls: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset<T> {
    units: Vec<String>,
    periods: Vec<Period>,
    time_axis: TimeAxis,
    control_names: Vec<String>,
    outcome: Vec<T>,
    treatment: Vec<u8>,
    controls: Vec<Vec<T>>,
}

impl<T: Scalar> PanelDataset<T> {
    /// Validates and assembles observations given in any order.
    pub fn from_observations(
        time_axis: TimeAxis,
        control_names: Vec<String>,
        observations: Vec<Observation<T>>,
    ) -> Result<Self, PanelError> {
        if observations.is_empty() {
            return Err(PanelError::Empty);
        }
        let mut seen = BTreeSet::new();
        for name in &control_names {
            if !seen.insert(name.as_str()) {
                return Err(PanelError::DuplicateColumn(name.clone()));
            }
        }
        let units: Vec<String> =
            observations.iter().map(|o| o.unit.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        // The axis is every period from the first to the last, so a period
        // missing for all units is reported rather than skipped.
        let first = observations.iter().map(|o| o.period).min().expect("non-empty");
        let last = observations.iter().map(|o| o.period).max().expect("non-empty");
        let periods: Vec<Period> = (first.0..=last.0).map(Period).collect();
        let unit_pos: BTreeMap<&str, usize> = units.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        let period_pos: BTreeMap<Period, usize> = periods.iter().enumerate().map(|(i, p)| (*p, i)).collect();

        let n = units.len() * periods.len();
        let n_controls = control_names.len();
        let mut filled = vec![false; n];
        let mut outcome = vec![T::zero(); n];
        let mut treatment = vec![0u8; n];
        let mut controls = vec![vec![T::zero(); n]; n_controls];
        for obs in observations {
            let fmt = |o: &Observation<T>| (o.unit.clone(), time_axis.format(o.period));
            if obs.controls.len() != n_controls {
                return Err(PanelError::ControlArity { expected: n_controls, got: obs.controls.len() });
            }
            let idx = unit_pos[obs.unit.as_str()] * periods.len() + period_pos[&obs.period];
            if filled[idx] {
                let (unit, period) = fmt(&obs);
                return Err(PanelError::DuplicateCell { unit, period });
            }
            if obs.treatment > 1 {
                let (unit, period) = fmt(&obs);
                return Err(PanelError::InvalidTreatment { unit, period, value: obs.treatment.to_string() });
            }
            if !obs.outcome.is_finite() {
                let (unit, period) = fmt(&obs);
                return Err(PanelError::NonFinite { column: "outcome".into(), unit, period });
            }
            if obs.outcome < T::zero() {
                let (unit, period) = fmt(&obs);
                return Err(PanelError::NegativeOutcome { unit, period, value: obs.outcome.as_f64() });
            }
            if let Some(c) = obs.controls.iter().position(|v| !v.is_finite()) {
                let (unit, period) = fmt(&obs);
                return Err(PanelError::NonFinite { column: control_names[c].clone(), unit, period });
            }
            filled[idx] = true;
            outcome[idx] = obs.outcome;
            treatment[idx] = obs.treatment;
            for (col, v) in controls.iter_mut().zip(obs.controls) {
                col[idx] = v;
            }
        }
        if let Some(idx) = filled.iter().position(|f| !f) {
            return Err(PanelError::MissingCell {
                unit: units[idx / periods.len()].clone(),
                period: time_axis.format(periods[idx % periods.len()]),
            });
        }

        let panel = Self { units, periods, time_axis, control_names, outcome, treatment, controls };
        panel.check_absorbing()?;
        Ok(panel)
    }

    fn check_absorbing(&self) -> Result<(), PanelError> {
        for u in 0..self.n_units() {
            let row = &self.treatment[u * self.n_periods()..(u + 1) * self.n_periods()];
            if let Some(p) = row.windows(2).position(|w| w[0] == 1 && w[1] == 0) {
                return Err(PanelError::NonAbsorbingTreatment {
                    unit: self.units[u].clone(),
                    period: self.time_axis.format(self.periods[p + 1]),
                });
            }
        }
        Ok(())
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn time_axis(&self) -> TimeAxis {
        self.time_axis
    }

    pub fn control_names(&self) -> &[String] {
        &self.control_names
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn cell(&self, unit: usize, period: usize) -> usize {
        unit * self.n_periods() + period
    }

    pub fn unit_index(&self, unit: &str) -> Option<usize> {
        self.units.binary_search_by(|u| u.as_str().cmp(unit)).ok()
    }

    pub fn period_index(&self, period: Period) -> Option<usize> {
        self.periods.binary_search(&period).ok()
    }

    pub fn outcome(&self) -> &[T] {
        &self.outcome
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn control(&self, name: &str) -> Option<&[T]> {
        self.control_names.iter().position(|c| c == name).map(|i| self.controls[i].as_slice())
    }

    /// `"outcome"` or any control name.
    pub fn column(&self, name: &str) -> Option<&[T]> {
        if name == "outcome" {
            Some(&self.outcome)
        } else {
            self.control(name)
        }
    }

    pub fn observation(&self, idx: usize) -> Observation<T> {
        Observation {
            unit: self.units[idx / self.n_periods()].clone(),
            period: self.periods[idx % self.n_periods()],
            outcome: self.outcome[idx],
            treatment: self.treatment[idx],
            controls: self.controls.iter().map(|c| c[idx]).collect(),
        }
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation<T>> + '_ {
        (0..self.len()).map(|i| self.observation(i))
    }

    /// Units with at least one treated period, as indices.
    pub fn treated_units(&self) -> Vec<usize> {
        (0..self.n_units())
            .filter(|&u| (0..self.n_periods()).any(|p| self.treatment[self.cell(u, p)] == 1))
            .collect()
    }

    /// First treated period index of a unit.
    pub fn onset(&self, unit: usize) -> Option<usize> {
        (0..self.n_periods()).find(|&p| self.treatment[self.cell(unit, p)] == 1)
    }

    /// Replaces `column` with its natural logarithm.
    pub fn log_transform(&self, column: &str) -> Result<Self, PanelError> {
        let values = self.column(column).ok_or_else(|| PanelError::UnknownColumn(column.to_string()))?;
        if let Some(idx) = values.iter().position(|v| *v <= T::zero()) {
            return Err(PanelError::LogDomain {
                column: column.to_string(),
                unit: self.units[idx / self.n_periods()].clone(),
                period: self.time_axis.format(self.periods[idx % self.n_periods()]),
                value: values[idx].as_f64(),
            });
        }
        let logged: Vec<T> = values.iter().map(|v| v.ln()).collect();
        self.replace_column(column, logged)
    }

    /// Returns a copy with `column` (outcome or a control) replaced.
    pub fn replace_column(&self, column: &str, values: Vec<T>) -> Result<Self, PanelError> {
        assert_eq!(values.len(), self.len(), "replacement column has wrong length");
        let mut out = self.clone();
        if column == "outcome" {
            out.outcome = values;
        } else {
            let i = self
                .control_names
                .iter()
                .position(|c| c == column)
                .ok_or_else(|| PanelError::UnknownColumn(column.to_string()))?;
            out.controls[i] = values;
        }
        Ok(out)
    }

    /// Appends a control column.
    pub fn with_control(&self, name: &str, values: Vec<T>) -> Result<Self, PanelError> {
        assert_eq!(values.len(), self.len(), "control column has wrong length");
        if name == "outcome" || self.control_names.iter().any(|c| c == name) {
            return Err(PanelError::DuplicateColumn(name.to_string()));
        }
        let mut out = self.clone();
        out.control_names.push(name.to_string());
        out.controls.push(values);
        Ok(out)
    }

    /// Keeps only the listed units (by index), preserving sorted order.
    pub fn select_units(&self, keep: &[usize]) -> Self {
        let keep: BTreeSet<usize> = keep.iter().copied().collect();
        let rows: Vec<usize> =
            keep.iter().flat_map(|&u| (0..self.n_periods()).map(move |p| u * self.n_periods() + p)).collect();
        let pick = |col: &[T]| rows.iter().map(|&r| col[r]).collect::<Vec<T>>();
        Self {
            units: keep.iter().map(|&u| self.units[u].clone()).collect(),
            periods: self.periods.clone(),
            time_axis: self.time_axis,
            control_names: self.control_names.clone(),
            outcome: pick(&self.outcome),
            treatment: rows.iter().map(|&r| self.treatment[r]).collect(),
            controls: self.controls.iter().map(|c| pick(c)).collect(),
        }
    }

    /// Keeps the periods in `range` (indices into the sorted period axis).
    pub fn select_periods(&self, range: std::ops::Range<usize>) -> Self {
        let np = self.n_periods();
        let rows: Vec<usize> = (0..self.n_units()).flat_map(|u| range.clone().map(move |p| u * np + p)).collect();
        let pick = |col: &[T]| rows.iter().map(|&r| col[r]).collect::<Vec<T>>();
        Self {
            units: self.units.clone(),
            periods: self.periods[range.clone()].to_vec(),
            time_axis: self.time_axis,
            control_names: self.control_names.clone(),
            outcome: pick(&self.outcome),
            treatment: rows.iter().map(|&r| self.treatment[r]).collect(),
            controls: self.controls.iter().map(|c| pick(c)).collect(),
        }
    }

    pub fn format_period(&self, period: usize) -> String {
        self.time_axis.format(self.periods[period])
    }
}
