//! No-treatment predictions for treated units and the additional outcome
//! they imply.
//!
//! The counterfactual linear predictor is the fitted model with every
//! treatment indicator zeroed and controls at their observed values. For log
//! outcomes it is exponentiated, optionally times Duan's smearing factor
//! `mean(exp(e))`.

use thiserror::Error;

use crate::did::ModelFit;
use crate::estimator::ColumnKind;
use crate::panel::{PanelDataset, Period};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CounterfactualError {
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("period {0} is outside the panel")]
    PeriodOutsidePanel(String),
    #[error("counterfactual window is empty")]
    EmptyWindow,
    #[error("unit={0} is untreated throughout the window")]
    UntreatedInWindow(String),
}

/// How log-scale predictions were brought back to levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retransform<T> {
    /// Outcome modelled in levels; nothing to undo.
    Identity,
    /// `exp(x'β)`
    Naive,
    /// `exp(x'β) · factor`
    Smearing(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CounterfactualOptions {
    pub smearing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualSeries<T> {
    pub unit: String,
    pub window: Vec<Period>,
    pub observed: Vec<T>,
    pub expected: Vec<T>,
    /// `observed − expected`, per period.
    pub gap: Vec<T>,
    pub cumulative_gap: T,
    pub retransform: Retransform<T>,
}

/// Counterfactual for a unit that is treated somewhere in `window`.
pub fn predict_counterfactual<T: Scalar>(
    model: &ModelFit<T>,
    panel: &PanelDataset<T>,
    unit: &str,
    window: &[Period],
    options: CounterfactualOptions,
) -> Result<CounterfactualSeries<T>, CounterfactualError> {
    let rows = window_rows(panel, unit, window)?;
    let treatment_cols = treatment_columns(model);
    let x = model.design.matrix();
    let treated = rows.iter().any(|&r| treatment_cols.iter().any(|&j| x[(r, j)] != T::zero()));
    if !treated {
        return Err(CounterfactualError::UntreatedInWindow(unit.to_string()));
    }
    counterfactual_path(model, panel, unit, window, options)
}

/// Counterfactual without the treatment check; for an untreated unit this
/// is just its fitted path.
pub fn counterfactual_path<T: Scalar>(
    model: &ModelFit<T>,
    panel: &PanelDataset<T>,
    unit: &str,
    window: &[Period],
    options: CounterfactualOptions,
) -> Result<CounterfactualSeries<T>, CounterfactualError> {
    let rows = window_rows(panel, unit, window)?;
    let treatment_cols = treatment_columns(model);
    let fit = &model.fit;
    let x = model.design.matrix();
    let retransform = retransform_for(model, options);

    let mut observed = Vec::with_capacity(rows.len());
    let mut expected = Vec::with_capacity(rows.len());
    for &r in &rows {
        let lp: T = x
            .row(r)
            .iter()
            .zip(&fit.coefficients)
            .enumerate()
            .filter(|(j, _)| !treatment_cols.contains(j))
            .map(|(_, (xv, b))| *xv * *b)
            .sum();
        let y = fit.fitted[r] + fit.residuals[r];
        let (obs, exp) = match retransform {
            Retransform::Identity => (y, lp),
            Retransform::Naive => (y.exp(), lp.exp()),
            Retransform::Smearing(f) => (y.exp(), lp.exp() * f),
        };
        observed.push(obs);
        expected.push(exp);
    }
    let gap: Vec<T> = observed.iter().zip(&expected).map(|(o, e)| *o - *e).collect();
    let cumulative_gap = gap.iter().copied().sum();
    Ok(CounterfactualSeries { unit: unit.to_string(), window: window.to_vec(), observed, expected, gap, cumulative_gap, retransform })
}

/// Periods in which `unit` is treated under the model, optionally limited to
/// one phase.
pub fn treated_window<T: Scalar>(model: &ModelFit<T>, panel: &PanelDataset<T>, unit: &str, phase: Option<&str>) -> Vec<Period> {
    let last = match panel.periods().last() {
        Some(p) => *p,
        None => return Vec::new(),
    };
    panel
        .periods()
        .iter()
        .copied()
        .filter(|p| {
            model.spec.treatment_windows.iter().any(|w| {
                w.unit == unit && phase.is_none_or(|ph| ph == w.phase) && *p >= w.onset && *p <= w.end.unwrap_or(last)
            })
        })
        .collect()
}

/// Group means per period of observed and fitted outcomes (in levels).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSeries<T> {
    pub periods: Vec<Period>,
    pub treated_observed: Vec<T>,
    pub treated_estimated: Vec<T>,
    pub control_observed: Vec<T>,
    pub control_estimated: Vec<T>,
}

pub fn group_series<T: Scalar>(model: &ModelFit<T>, panel: &PanelDataset<T>) -> GroupSeries<T> {
    let treated: Vec<usize> = panel
        .units()
        .iter()
        .enumerate()
        .filter(|(_, u)| model.spec.treatment_windows.iter().any(|w| &w.unit == *u))
        .map(|(i, _)| i)
        .collect();
    let controls: Vec<usize> = (0..panel.n_units()).filter(|u| !treated.contains(u)).collect();
    let level = |v: T| match retransform_for(model, CounterfactualOptions::default()) {
        Retransform::Identity => v,
        _ => v.exp(),
    };
    let fit = &model.fit;
    let mean_over = |units: &[usize], p: usize, observed: bool| -> T {
        if units.is_empty() {
            return T::nan();
        }
        let s: T = units
            .iter()
            .map(|&u| {
                let r = panel.cell(u, p);
                level(if observed { fit.fitted[r] + fit.residuals[r] } else { fit.fitted[r] })
            })
            .sum();
        s / T::count(units.len())
    };
    let np = panel.n_periods();
    GroupSeries {
        periods: panel.periods().to_vec(),
        treated_observed: (0..np).map(|p| mean_over(&treated, p, true)).collect(),
        treated_estimated: (0..np).map(|p| mean_over(&treated, p, false)).collect(),
        control_observed: (0..np).map(|p| mean_over(&controls, p, true)).collect(),
        control_estimated: (0..np).map(|p| mean_over(&controls, p, false)).collect(),
    }
}

fn retransform_for<T: Scalar>(model: &ModelFit<T>, options: CounterfactualOptions) -> Retransform<T> {
    if !model.spec.log_outcome {
        Retransform::Identity
    } else if options.smearing {
        let r = &model.fit.residuals;
        Retransform::Smearing(r.iter().map(|e| e.exp()).sum::<T>() / T::count(r.len()))
    } else {
        Retransform::Naive
    }
}

fn treatment_columns<T: Scalar>(model: &ModelFit<T>) -> Vec<usize> {
    model
        .fit
        .kinds
        .iter()
        .enumerate()
        .filter(|(_, k)| matches!(k, ColumnKind::Treatment(_)))
        .map(|(j, _)| j)
        .collect()
}

fn window_rows<T: Scalar>(panel: &PanelDataset<T>, unit: &str, window: &[Period]) -> Result<Vec<usize>, CounterfactualError> {
    if window.is_empty() {
        return Err(CounterfactualError::EmptyWindow);
    }
    let u = panel.unit_index(unit).ok_or_else(|| CounterfactualError::UnknownUnit(unit.to_string()))?;
    window
        .iter()
        .map(|p| {
            panel
                .period_index(*p)
                .map(|pi| panel.cell(u, pi))
                .ok_or_else(|| CounterfactualError::PeriodOutsidePanel(panel.time_axis().format(*p)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::did::{fit_model, single_phase, ModelSpec};
    use crate::panel::{Observation, TimeAxis};

    /// Noiseless log-linear panel: ln y = a_u + l_t + δ·D.
    fn exact_panel(delta: f64) -> PanelDataset<f64> {
        let mut obs = Vec::new();
        for u in 0..3 {
            for t in 0..8 {
                let d = u == 0 && t >= 5;
                let ln_y = 4.0 + 0.3 * u as f64 + 0.2 * (t as f64).sin() + if d { delta } else { 0.0 };
                obs.push(Observation {
                    unit: format!("u{u}"),
                    period: Period(t),
                    outcome: ln_y.exp(),
                    treatment: u8::from(d),
                    controls: vec![],
                });
            }
        }
        PanelDataset::from_observations(TimeAxis::Index, vec![], obs).unwrap()
    }

    #[test]
    fn exact_fit_gap_matches_closed_form() {
        let delta = 0.3;
        let p = exact_panel(delta);
        let m = fit_model(&p, &ModelSpec::new("outcome", single_phase(&p, "open"))).unwrap();
        let window = treated_window(&m, &p, "u0", None);
        assert_eq!(window.len(), 3);
        let cf = predict_counterfactual(&m, &p, "u0", &window, CounterfactualOptions::default()).unwrap();
        let closed: f64 = (5..8).map(|t| p.outcome()[t] * (1.0 - (-delta).exp())).sum();
        assert!((cf.cumulative_gap - closed).abs() < 1e-9 * closed);
        assert!(cf.gap.iter().all(|g| *g > 0.0));
        assert_eq!(cf.retransform, Retransform::Naive);
    }

    #[test]
    fn untreated_unit_and_bad_windows() {
        let p = exact_panel(0.3);
        let m = fit_model(&p, &ModelSpec::new("outcome", single_phase(&p, "open"))).unwrap();
        let w = [Period(5), Period(6)];
        assert_eq!(
            predict_counterfactual(&m, &p, "u1", &w, CounterfactualOptions::default()).unwrap_err(),
            CounterfactualError::UntreatedInWindow("u1".into())
        );
        assert_eq!(
            predict_counterfactual(&m, &p, "u0", &[Period(99)], CounterfactualOptions::default()).unwrap_err(),
            CounterfactualError::PeriodOutsidePanel("99".into())
        );
        assert_eq!(
            predict_counterfactual(&m, &p, "u0", &[], CounterfactualOptions::default()).unwrap_err(),
            CounterfactualError::EmptyWindow
        );
    }

    #[test]
    fn control_counterfactual_is_fitted_path() {
        let p = exact_panel(0.3);
        let m = fit_model(&p, &ModelSpec::new("outcome", single_phase(&p, "open"))).unwrap();
        let window: Vec<Period> = p.periods().to_vec();
        let cf = counterfactual_path(&m, &p, "u2", &window, CounterfactualOptions::default()).unwrap();
        for (i, e) in cf.expected.iter().enumerate() {
            assert_eq!(*e, m.fit.fitted[p.cell(2, i)].exp());
        }
    }

    #[test]
    fn smearing_factor_is_one_on_exact_fit() {
        let p = exact_panel(0.1);
        let m = fit_model(&p, &ModelSpec::new("outcome", single_phase(&p, "open"))).unwrap();
        let w = treated_window(&m, &p, "u0", None);
        let cf = predict_counterfactual(&m, &p, "u0", &w, CounterfactualOptions { smearing: true }).unwrap();
        match cf.retransform {
            Retransform::Smearing(f) => assert!((f - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn group_series_shapes() {
        let p = exact_panel(0.2);
        let m = fit_model(&p, &ModelSpec::new("outcome", single_phase(&p, "open"))).unwrap();
        let g = group_series(&m, &p);
        assert_eq!(g.periods.len(), 8);
        let control_mean0 = (p.outcome()[8] + p.outcome()[16]) / 2.0;
        assert!((g.control_observed[0] - control_mean0).abs() < 1e-9);
        assert!((g.treated_estimated[7] - g.treated_observed[7]).abs() < 1e-9);
    }
}
