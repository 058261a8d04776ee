//! Difference-in-differences models on top of the two-way estimator.
//!
//! Each treatment phase gets its own mutually exclusive indicator column.
//! Phase windows are closed-open `[onset, next onset)`, and the last phase of
//! a unit runs to its `end` (inclusive) or to the end of the panel.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::estimator::{fit_ols, ColumnKind, DesignMatrix, EstimatorError, FitResult, FixedEffects, Regressor};
use crate::panel::{PanelDataset, PanelError, Period};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DidError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("treatment window for unit={unit} phase={phase} lies outside the panel's periods")]
    WindowOutOfRange { unit: String, phase: String },
    #[error("treatment windows overlap for unit={unit} ({first} / {second})")]
    PhaseOverlap { unit: String, first: String, second: String },
    #[error("treatment window for unit={unit} ends before it starts")]
    ReversedWindow { unit: String },
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("model has no treated cell; the treatment effect is not identified")]
    NoTreatedUnit,
    #[error("alpha must lie in (0, 0.5], got {0}")]
    InvalidAlpha(f64),
    #[error("unknown treatment phase `{0}`")]
    UnknownPhase(String),
    #[error("phase `{0}` has zero length")]
    EmptyPhase(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlSpec {
    pub name: String,
    pub log: bool,
}

impl ControlSpec {
    pub fn level(name: &str) -> Self {
        Self { name: name.into(), log: false }
    }

    pub fn logged(name: &str) -> Self {
        Self { name: name.into(), log: true }
    }

    pub fn column_name(&self) -> String {
        if self.log {
            format!("ln({})", self.name)
        } else {
            self.name.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreatmentWindow {
    pub unit: String,
    pub onset: Period,
    /// Inclusive; `None` runs to the end of the panel.
    pub end: Option<Period>,
    pub phase: String,
}

/// One phase of a split relative to each unit's onset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSplit {
    pub label: String,
    /// Length in periods; `None` means open-ended (must be last).
    pub length: Option<usize>,
}

impl PhaseSplit {
    pub fn new(label: &str, length: Option<usize>) -> Self {
        Self { label: label.into(), length }
    }
}

/// Declarative description of one regression.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub outcome: String,
    pub log_outcome: bool,
    pub treatment_windows: Vec<TreatmentWindow>,
    pub controls: Vec<ControlSpec>,
    /// Significance level for pass/fail verdicts.
    pub alpha: f64,
}

impl ModelSpec {
    /// Log outcome, no controls, alpha = 0.1.
    pub fn new(outcome: &str, treatment_windows: Vec<TreatmentWindow>) -> Self {
        Self {
            outcome: outcome.into(),
            log_outcome: true,
            treatment_windows,
            controls: Vec::new(),
            alpha: 0.1,
        }
    }

    pub fn with_controls(mut self, controls: Vec<ControlSpec>) -> Self {
        self.controls = controls;
        self
    }

    /// Phase labels in order of first appearance.
    pub fn phases(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for w in &self.treatment_windows {
            if !out.contains(&w.phase) {
                out.push(w.phase.clone());
            }
        }
        out
    }

    pub fn validate<T: Scalar>(&self, panel: &PanelDataset<T>) -> Result<(), DidError> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(DidError::InvalidAlpha(self.alpha));
        }
        if panel.column(&self.outcome).is_none() {
            return Err(DidError::UnknownColumn(self.outcome.clone()));
        }
        for c in &self.controls {
            if panel.control(&c.name).is_none() {
                return Err(DidError::UnknownColumn(c.name.clone()));
            }
        }
        let first = *panel.periods().first().ok_or(DidError::NoTreatedUnit)?;
        let last = *panel.periods().last().ok_or(DidError::NoTreatedUnit)?;
        let mut by_unit: BTreeMap<&str, Vec<&TreatmentWindow>> = BTreeMap::new();
        for w in &self.treatment_windows {
            if panel.unit_index(&w.unit).is_none() {
                return Err(DidError::UnknownUnit(w.unit.clone()));
            }
            let end = w.end.unwrap_or(last);
            if w.onset < first || w.onset > last || end > last {
                return Err(DidError::WindowOutOfRange { unit: w.unit.clone(), phase: w.phase.clone() });
            }
            if end < w.onset {
                return Err(DidError::ReversedWindow { unit: w.unit.clone() });
            }
            by_unit.entry(w.unit.as_str()).or_default().push(w);
        }
        for (unit, mut windows) in by_unit {
            windows.sort_by_key(|w| w.onset);
            for pair in windows.windows(2) {
                let prev_end = pair[0].end.unwrap_or(last);
                if pair[1].onset <= prev_end {
                    return Err(DidError::PhaseOverlap {
                        unit: unit.to_string(),
                        first: pair[0].phase.clone(),
                        second: pair[1].phase.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Windows for every unit treated in the data's treatment column, split into
/// consecutive phases starting at the unit's first treated period.
pub fn phases_from_onsets<T: Scalar>(
    panel: &PanelDataset<T>,
    phases: &[PhaseSplit],
) -> Result<Vec<TreatmentWindow>, DidError> {
    let mut windows = Vec::new();
    let last = panel.n_periods() - 1;
    for u in panel.treated_units() {
        let onset = panel.onset(u).expect("treated unit has an onset");
        let mut start = onset;
        for phase in phases {
            if start > last {
                break;
            }
            let end = match phase.length {
                Some(0) => return Err(DidError::EmptyPhase(phase.label.clone())),
                Some(len) => Some((start + len - 1).min(last)),
                None => None,
            };
            windows.push(TreatmentWindow {
                unit: panel.units()[u].clone(),
                onset: panel.periods()[start],
                end: end.map(|e| panel.periods()[e]),
                phase: phase.label.clone(),
            });
            match end {
                Some(e) => start = e + 1,
                None => break,
            }
        }
    }
    Ok(windows)
}

/// Single-phase windows taken straight from the treatment column.
pub fn single_phase<T: Scalar>(panel: &PanelDataset<T>, label: &str) -> Vec<TreatmentWindow> {
    phases_from_onsets(panel, &[PhaseSplit::new(label, None)]).expect("open-ended phase is valid")
}

pub fn treatment_column_name(phase: &str) -> String {
    format!("treatment[{phase}]")
}

/// One 0/1 column per phase, in panel row order.
pub fn treatment_indicators<T: Scalar>(panel: &PanelDataset<T>, spec: &ModelSpec) -> Vec<(String, Vec<T>)> {
    let last = *panel.periods().last().expect("non-empty panel");
    spec.phases()
        .into_iter()
        .map(|phase| {
            let mut col = vec![T::zero(); panel.len()];
            for w in spec.treatment_windows.iter().filter(|w| w.phase == phase) {
                let u = panel.unit_index(&w.unit).expect("validated unit");
                let end = w.end.unwrap_or(last);
                for (p, period) in panel.periods().iter().enumerate() {
                    if *period >= w.onset && *period <= end {
                        col[panel.cell(u, p)] = T::one();
                    }
                }
            }
            (phase, col)
        })
        .collect()
}

/// Outcome vector and regressors (treatment phases, then controls).
pub fn model_regressors<T: Scalar>(
    panel: &PanelDataset<T>,
    spec: &ModelSpec,
) -> Result<(Vec<T>, Vec<Regressor<T>>), DidError> {
    spec.validate(panel)?;
    let indicators = treatment_indicators(panel, spec);
    if indicators.is_empty() || indicators.iter().all(|(_, c)| c.iter().all(|v| *v == T::zero())) {
        return Err(DidError::NoTreatedUnit);
    }
    let y = if spec.log_outcome {
        panel.log_transform(&spec.outcome)?.column(&spec.outcome).expect("validated").to_vec()
    } else {
        panel.column(&spec.outcome).expect("validated").to_vec()
    };
    let mut regressors: Vec<Regressor<T>> = indicators
        .into_iter()
        .map(|(phase, values)| Regressor {
            name: treatment_column_name(&phase),
            kind: ColumnKind::Treatment(phase),
            values,
        })
        .collect();
    for c in &spec.controls {
        let values = if c.log {
            panel.log_transform(&c.name)?.control(&c.name).expect("validated").to_vec()
        } else {
            panel.control(&c.name).expect("validated").to_vec()
        };
        regressors.push(Regressor { name: c.column_name(), kind: ColumnKind::Control, values });
    }
    Ok((y, regressors))
}

/// Design (intercept, phases, controls, unit and period dummies) and outcome.
pub fn build_did_model<T: Scalar>(
    panel: &PanelDataset<T>,
    spec: &ModelSpec,
) -> Result<(DesignMatrix<T>, Vec<T>), DidError> {
    let (y, regressors) = model_regressors(panel, spec)?;
    let design = DesignMatrix::two_way(panel, regressors, FixedEffects::TWO_WAY)?;
    Ok((design, y))
}

pub fn build_design<T: Scalar>(panel: &PanelDataset<T>, spec: &ModelSpec) -> Result<DesignMatrix<T>, DidError> {
    build_did_model(panel, spec).map(|(x, _)| x)
}

/// A fitted model with the design it came from.
#[derive(Debug, Clone)]
pub struct ModelFit<T> {
    pub spec: ModelSpec,
    pub design: DesignMatrix<T>,
    pub fit: FitResult<T>,
}

pub fn fit_model<T: Scalar>(panel: &PanelDataset<T>, spec: &ModelSpec) -> Result<ModelFit<T>, DidError> {
    let (design, y) = build_did_model(panel, spec)?;
    let fit = fit_ols(&design, &y)?;
    Ok(ModelFit { spec: spec.clone(), design, fit })
}

/// Treatment effect of one phase on the log scale.
#[derive(Debug, Clone, PartialEq)]
pub struct AteEstimate<T> {
    pub phase: String,
    pub delta: T,
    pub se: T,
    pub p_value: T,
    /// `100 · (exp(δ) − 1)`
    pub pct_change: T,
}

/// Percentage change implied by a log-point coefficient.
pub fn pct_change<T: Scalar>(delta: T) -> T {
    T::lit(100.0) * delta.exp_m1()
}

pub fn extract_ate<T: Scalar>(fit: &FitResult<T>, phase: &str) -> Result<AteEstimate<T>, DidError> {
    let name = treatment_column_name(phase);
    let row = fit.row(&name).map_err(|_| DidError::UnknownPhase(phase.to_string()))?;
    let (se, p) = match (row.se, row.p) {
        (Some(se), Some(p)) => (se, p),
        _ => return Err(EstimatorError::NoInference.into()),
    };
    Ok(AteEstimate { phase: phase.to_string(), delta: row.estimate, se, p_value: p, pct_change: pct_change(row.estimate) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{Observation, TimeAxis};

    /// 3 units × 24 months from 2023-01; unit "H" treated from 2024-09.
    fn panel() -> PanelDataset<f64> {
        let onset = Period::from_year_month(2024, 9);
        let mut obs = Vec::new();
        for (u, unit) in ["A", "B", "H"].iter().enumerate() {
            for m in 0..24 {
                let period = Period::from_year_month(2023, 1).offset(m);
                let treated = *unit == "H" && period >= onset;
                obs.push(Observation {
                    unit: unit.to_string(),
                    period,
                    outcome: 100.0 + 10.0 * u as f64 + (m as f64 * 0.7).sin() * 5.0 + if treated { 8.0 } else { 0.0 },
                    treatment: u8::from(treated),
                    controls: vec![50.0 + ((u * 7 + m as usize) % 5) as f64],
                });
            }
        }
        PanelDataset::from_observations(TimeAxis::YearMonth, vec!["beds".into()], obs).unwrap()
    }

    #[test]
    fn single_phase_window_counts() {
        let p = panel();
        let spec = ModelSpec::new("outcome", single_phase(&p, "open"));
        let ind = treatment_indicators(&p, &spec);
        assert_eq!(ind.len(), 1);
        assert_eq!(ind[0].1.iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn two_phase_split_is_exclusive() {
        let p = panel();
        let windows =
            phases_from_onsets(&p, &[PhaseSplit::new("first", Some(2)), PhaseSplit::new("after", None)]).unwrap();
        assert_eq!(windows.len(), 2);
        assert_eq!(windows[0].end, Some(Period::from_year_month(2024, 10)));
        assert_eq!(windows[1].onset, Period::from_year_month(2024, 11));
        let spec = ModelSpec::new("outcome", windows);
        let ind = treatment_indicators(&p, &spec);
        assert_eq!(ind[0].1.iter().sum::<f64>(), 2.0);
        assert_eq!(ind[1].1.iter().sum::<f64>(), 2.0);
        assert!(ind[0].1.iter().zip(&ind[1].1).all(|(a, b)| a * b == 0.0));
    }

    #[test]
    fn design_column_count_and_order() {
        let p = panel();
        let spec = ModelSpec::new("outcome", single_phase(&p, "open")).with_controls(vec![ControlSpec::logged("beds")]);
        let (x, y) = build_did_model(&p, &spec).unwrap();
        assert_eq!(x.n_params(), 1 + 1 + 1 + 2 + 23);
        assert_eq!(&x.column_names()[..3], ["intercept", "treatment[open]", "ln(beds)"]);
        assert_eq!(x.column_names()[3], "unit[B]");
        assert_eq!(x.column_names()[5], "period[2023-02]");
        assert!((y[0] - 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn no_treated_unit_is_degenerate() {
        let p = panel();
        let spec = ModelSpec::new("outcome", vec![]);
        assert_eq!(build_did_model(&p, &spec).unwrap_err(), DidError::NoTreatedUnit);
    }

    #[test]
    fn window_validation() {
        let p = panel();
        let mut spec = ModelSpec::new(
            "outcome",
            vec![TreatmentWindow {
                unit: "H".into(),
                onset: Period::from_year_month(2026, 1),
                end: None,
                phase: "x".into(),
            }],
        );
        assert!(matches!(spec.validate(&p), Err(DidError::WindowOutOfRange { .. })));

        spec.treatment_windows = vec![
            TreatmentWindow { unit: "H".into(), onset: Period::from_year_month(2024, 9), end: Some(Period::from_year_month(2024, 11)), phase: "a".into() },
            TreatmentWindow { unit: "H".into(), onset: Period::from_year_month(2024, 11), end: None, phase: "b".into() },
        ];
        assert!(matches!(spec.validate(&p), Err(DidError::PhaseOverlap { .. })));

        spec.treatment_windows.truncate(1);
        spec.alpha = 0.7;
        assert_eq!(spec.validate(&p), Err(DidError::InvalidAlpha(0.7)));
    }

    #[test]
    fn pct_change_values() {
        assert!((pct_change(0.047_f64) - 4.8122).abs() < 1e-3);
        assert!((pct_change(0.0343_f64) - 3.4895).abs() < 1e-3);
        assert_eq!(pct_change(0.0_f64), 0.0);
    }

    #[test]
    fn extract_unknown_phase() {
        let p = panel();
        let fitted = fit_model(&p, &ModelSpec::new("outcome", single_phase(&p, "open"))).unwrap();
        assert!(extract_ate(&fitted.fit, "open").is_ok());
        assert_eq!(extract_ate(&fitted.fit, "later").unwrap_err(), DidError::UnknownPhase("later".into()));
    }
}
