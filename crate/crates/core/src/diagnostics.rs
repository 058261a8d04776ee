//! Robustness checks: a pre-treatment trend comparison and a placebo
//! design run on the control units alone.

use rayon::prelude::*;
use thiserror::Error;

use crate::did::{extract_ate, fit_model, DidError, ModelSpec, TreatmentWindow};
use crate::estimator::{fit_ols, ColumnKind, DesignMatrix, FixedEffects, Regressor};
use crate::panel::PanelDataset;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Model(#[from] DidError),
    #[error("parallel-trends test needs at least 2 pre-treatment periods, found {0}")]
    PrePeriodTooShort(usize),
    #[error("parallel-trends test needs both treated and control units")]
    SingleGroup,
    #[error("placebo test needs at least 2 control units, found {0}")]
    TooFewControls(usize),
    #[error("model has no treated unit")]
    NoTreatedUnit,
}

impl From<crate::estimator::EstimatorError> for DiagnosticsError {
    fn from(e: crate::estimator::EstimatorError) -> Self {
        DiagnosticsError::Model(DidError::Estimator(e))
    }
}

impl From<crate::panel::PanelError> for DiagnosticsError {
    fn from(e: crate::panel::PanelError) -> Self {
        DiagnosticsError::Model(DidError::Panel(e))
    }
}

pub const GROUP_TREND: &str = "group:trend";

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelTrends<T> {
    /// Coefficient on group × period index.
    pub interaction: T,
    pub p_value: T,
    pub passed: bool,
    pub pre_periods: usize,
    /// Controls left out because they are constant over the pre-period.
    pub dropped_controls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreTrendOptions {
    pub include_controls: bool,
    /// Replaces the default `0, 1, 2, …` period index (one value per
    /// pre-treatment period).
    pub time_index: Option<Vec<f64>>,
}

impl Default for PreTrendOptions {
    fn default() -> Self {
        Self { include_controls: true, time_index: None }
    }
}

/// Pre-period regression `ln Y = a + g·GROUP + γ·t + η·GROUP·t + controls`,
/// clustered by unit. Passes when η is not significant at `spec.alpha`.
pub fn parallel_trends_test<T: Scalar>(
    panel: &PanelDataset<T>,
    spec: &ModelSpec,
) -> Result<ParallelTrends<T>, DiagnosticsError> {
    parallel_trends_with(panel, spec, &PreTrendOptions::default())
}

pub fn parallel_trends_with<T: Scalar>(
    panel: &PanelDataset<T>,
    spec: &ModelSpec,
    options: &PreTrendOptions,
) -> Result<ParallelTrends<T>, DiagnosticsError> {
    spec.validate(panel)?;
    let treated = treated_units(panel, spec);
    if treated.is_empty() || treated.len() == panel.n_units() {
        return Err(DiagnosticsError::SingleGroup);
    }
    let first_onset = spec.treatment_windows.iter().map(|w| w.onset).min().ok_or(DiagnosticsError::NoTreatedUnit)?;
    let pre = panel.periods().iter().take_while(|p| **p < first_onset).count();
    if pre < 2 {
        return Err(DiagnosticsError::PrePeriodTooShort(pre));
    }
    let sub = panel.select_periods(0..pre);

    let y: Vec<T> = if spec.log_outcome {
        sub.log_transform(&spec.outcome)?.column(&spec.outcome).expect("validated").to_vec()
    } else {
        sub.column(&spec.outcome).expect("validated").to_vec()
    };
    let time: Vec<T> = match &options.time_index {
        Some(idx) => {
            assert_eq!(idx.len(), pre, "time index must cover the pre-period");
            idx.iter().map(|v| T::lit(*v)).collect()
        }
        None => (0..pre).map(T::count).collect(),
    };
    let n = sub.len();
    let group: Vec<T> =
        (0..n).map(|r| if treated.contains(&(r / pre)) { T::one() } else { T::zero() }).collect();
    let trend: Vec<T> = (0..n).map(|r| time[r % pre]).collect();
    let interaction: Vec<T> = group.iter().zip(&trend).map(|(g, t)| *g * *t).collect();
    let mut regressors = vec![
        Regressor { name: "group".into(), kind: ColumnKind::Other, values: group },
        Regressor { name: "trend".into(), kind: ColumnKind::Other, values: trend },
        Regressor { name: GROUP_TREND.into(), kind: ColumnKind::Other, values: interaction },
    ];
    let mut dropped = Vec::new();
    if options.include_controls {
        for c in &spec.controls {
            let raw = sub.control(&c.name).expect("validated");
            if is_constant(raw) {
                dropped.push(c.column_name());
                continue;
            }
            let values = if c.log {
                sub.log_transform(&c.name)?.control(&c.name).expect("validated").to_vec()
            } else {
                raw.to_vec()
            };
            regressors.push(Regressor { name: c.column_name(), kind: ColumnKind::Control, values });
        }
    }

    let design = DesignMatrix::two_way(&sub, regressors, FixedEffects::NONE)?;
    let fit = fit_ols(&design, &y)?;
    let row = fit.row(GROUP_TREND)?;
    let p_value = row.p.ok_or(crate::estimator::EstimatorError::NoInference)?;
    Ok(ParallelTrends {
        interaction: row.estimate,
        p_value,
        passed: p_value.as_f64() >= spec.alpha,
        pre_periods: pre,
        dropped_controls: dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceboEstimate<T> {
    pub pseudo_unit: String,
    pub phase: String,
    pub delta: T,
    pub p_value: T,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placebo<T> {
    /// Sorted by pseudo-treated unit, then phase.
    pub estimates: Vec<PlaceboEstimate<T>>,
    pub passed: bool,
    pub dropped_controls: Vec<String>,
}

/// Drops the treated units and gives each control unit in turn the first
/// treated unit's schedule, refitting the full model every time.
pub fn placebo_test<T: Scalar>(panel: &PanelDataset<T>, spec: &ModelSpec) -> Result<Placebo<T>, DiagnosticsError> {
    spec.validate(panel)?;
    let treated = treated_units(panel, spec);
    let first = *treated.first().ok_or(DiagnosticsError::NoTreatedUnit)?;
    let controls: Vec<usize> = (0..panel.n_units()).filter(|u| !treated.contains(u)).collect();
    if controls.len() < 2 {
        return Err(DiagnosticsError::TooFewControls(controls.len()));
    }
    let schedule: Vec<TreatmentWindow> = spec
        .treatment_windows
        .iter()
        .filter(|w| w.unit == panel.units()[first])
        .cloned()
        .collect();

    let sub = panel.select_units(&controls);
    let (base, dropped) = without_constant_controls(&sub, spec);
    let alpha = spec.alpha;

    let per_unit: Vec<Vec<PlaceboEstimate<T>>> = sub
        .units()
        .par_iter()
        .map(|unit| -> Result<Vec<PlaceboEstimate<T>>, DiagnosticsError> {
            let mut pseudo = base.clone();
            pseudo.treatment_windows =
                schedule.iter().map(|w| TreatmentWindow { unit: unit.clone(), ..w.clone() }).collect();
            let fitted = fit_model(&sub, &pseudo)?;
            pseudo
                .phases()
                .iter()
                .map(|phase| {
                    let ate = extract_ate(&fitted.fit, phase)?;
                    Ok(PlaceboEstimate {
                        pseudo_unit: unit.clone(),
                        phase: phase.clone(),
                        delta: ate.delta,
                        p_value: ate.p_value,
                        significant: ate.p_value.as_f64() < alpha,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let estimates: Vec<PlaceboEstimate<T>> = per_unit.into_iter().flatten().collect();
    let passed = estimates.iter().all(|e| !e.significant);
    Ok(Placebo { estimates, passed, dropped_controls: dropped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport<T> {
    pub parallel_trends: ParallelTrends<T>,
    pub placebo: Placebo<T>,
    pub alpha: f64,
}

pub fn run_diagnostics<T: Scalar>(
    panel: &PanelDataset<T>,
    spec: &ModelSpec,
    options: &PreTrendOptions,
) -> Result<DiagnosticsReport<T>, DiagnosticsError> {
    Ok(DiagnosticsReport {
        parallel_trends: parallel_trends_with(panel, spec, options)?,
        placebo: placebo_test(panel, spec)?,
        alpha: spec.alpha,
    })
}

fn treated_units<T: Scalar>(panel: &PanelDataset<T>, spec: &ModelSpec) -> Vec<usize> {
    let mut out: Vec<usize> =
        spec.treatment_windows.iter().filter_map(|w| panel.unit_index(&w.unit)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn is_constant<T: Scalar>(values: &[T]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

fn without_constant_controls<T: Scalar>(panel: &PanelDataset<T>, spec: &ModelSpec) -> (ModelSpec, Vec<String>) {
    let mut out = spec.clone();
    let mut dropped = Vec::new();
    out.controls.retain(|c| {
        let keep = !is_constant(panel.control(&c.name).expect("validated"));
        if !keep {
            dropped.push(c.column_name());
        }
        keep
    });
    (out, dropped)
}
