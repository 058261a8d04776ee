use std::io::{Read, Write};

use super::{Observation, PanelDataset, PanelError, TimeAxis};
use crate::scalar::Scalar;

/// Maps CSV headers onto panel roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelSchema {
    pub unit: String,
    pub time: String,
    pub outcome: String,
    pub treatment: String,
    /// `None` takes every remaining column, in file order.
    pub controls: Option<Vec<String>>,
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self {
            unit: "unit".into(),
            time: "time".into(),
            outcome: "outcome".into(),
            treatment: "treatment".into(),
            controls: None,
        }
    }
}

/// Reads a long-format panel (one row per unit-period) and validates it.
pub fn load_panel<T: Scalar, R: Read>(source: R, schema: &PanelSchema) -> Result<PanelDataset<T>, PanelError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| PanelError::Csv(e.to_string()))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| PanelError::MissingColumn(name.to_string()))
    };
    let unit_col = find(&schema.unit)?;
    let time_col = find(&schema.time)?;
    let outcome_col = find(&schema.outcome)?;
    let treat_col = find(&schema.treatment)?;
    let control_names: Vec<String> = match &schema.controls {
        Some(names) => names.clone(),
        None => {
            let reserved = [unit_col, time_col, outcome_col, treat_col];
            headers
                .iter()
                .enumerate()
                .filter(|(i, _)| !reserved.contains(i))
                .map(|(_, h)| h.to_string())
                .collect()
        }
    };
    let control_cols = control_names.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;

    let mut axis: Option<TimeAxis> = None;
    let mut observations = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| PanelError::Csv(e.to_string()))?;
        let get = |c: usize| record.get(c).unwrap_or("");
        let parse_err = |column: &str, value: &str| PanelError::Parse {
            row,
            column: column.to_string(),
            value: value.to_string(),
        };

        let raw_time = get(time_col);
        let axis = *axis.get_or_insert(TimeAxis::detect(raw_time).ok_or_else(|| parse_err(&schema.time, raw_time))?);
        let period = axis.parse(raw_time).ok_or_else(|| parse_err(&schema.time, raw_time))?;
        let unit = get(unit_col).to_string();
        if unit.is_empty() {
            return Err(parse_err(&schema.unit, ""));
        }
        let number = |c: usize, name: &str| -> Result<T, PanelError> {
            let raw = get(c);
            raw.parse::<f64>()
                .ok()
                .and_then(T::from_f64)
                .ok_or_else(|| parse_err(name, raw))
        };
        let outcome = number(outcome_col, &schema.outcome)?;
        let raw_treat = get(treat_col);
        let treatment = match raw_treat.parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            Ok(_) => {
                return Err(PanelError::InvalidTreatment {
                    unit,
                    period: axis.format(period),
                    value: raw_treat.to_string(),
                })
            }
            Err(_) => return Err(parse_err(&schema.treatment, raw_treat)),
        };
        let controls = control_cols
            .iter()
            .zip(&control_names)
            .map(|(&c, name)| number(c, name))
            .collect::<Result<Vec<_>, _>>()?;
        observations.push(Observation { unit, period, outcome, treatment, controls });
    }
    PanelDataset::from_observations(axis.unwrap_or_default(), control_names, observations)
}

/// Writes the canonical long format. Floats use shortest round-trip notation.
pub fn write_panel<T: Scalar, W: Write>(panel: &PanelDataset<T>, sink: W) -> Result<(), PanelError> {
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| PanelError::Csv(e.to_string());
    let mut header = vec!["unit".to_string(), "time".into(), "outcome".into(), "treatment".into()];
    header.extend(panel.control_names().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for obs in panel.observations() {
        let mut rec = vec![
            obs.unit,
            panel.time_axis().format(obs.period),
            obs.outcome.to_string(),
            obs.treatment.to_string(),
        ];
        rec.extend(obs.controls.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| PanelError::Csv(e.to_string()))
}
