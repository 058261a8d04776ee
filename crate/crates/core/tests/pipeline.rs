mod common;

use common::{fixture_panel, fixture_spec, model2, two_phase_schedule, ONSET};
use didimpact::counterfactual::{predict_counterfactual, treated_window, CounterfactualOptions};
use didimpact::diagnostics::{parallel_trends_test, placebo_test, run_diagnostics, PreTrendOptions};
use didimpact::did::{
    extract_ate, fit_model, single_phase, treatment_indicators, ModelSpec, PhaseSplit, TreatmentWindow,
};
use didimpact::impact::{build_impact_table, parse_preset, DEFAULT_PRESET};
use didimpact::panel::PanelDataset;
use didimpact::synth::{generate_panel, DgpSpec};
use proptest::prelude::*;

fn seasonal(seed: u64, noise: f64, delta: f64) -> (DgpSpec, PanelDataset<f64>) {
    let spec = DgpSpec::seasonal(8, 36, 7.0, 0.4, seed).with_delta("open", delta).with_noise(noise);
    let panel = generate_panel(&spec, &[spec.window(0, ONSET, None, "open")], &[]).unwrap();
    (spec, panel)
}

#[test]
fn noiseless_panel_recovers_delta() {
    let (_, p) = seasonal(1, 0.0, 0.5);
    let m = fit_model(&p, &ModelSpec::new("outcome", single_phase(&p, "open"))).unwrap();
    assert!((m.fit.coefficient("treatment[open]").unwrap() - 0.5).abs() < 1e-10);

    let p = fixture_panel(2, 0.0);
    let m = fit_model(&p, &model2(&p)).unwrap();
    assert!((m.fit.coefficient("treatment[first_year]").unwrap() - 0.047).abs() < 1e-10);
    assert!((m.fit.coefficient("treatment[after_first_year]").unwrap() + 0.11).abs() < 1e-10);
    assert!((m.fit.coefficient("ln(beds)").unwrap() - 0.21).abs() < 1e-9);
    assert!((m.fit.coefficient("events").unwrap() - 0.034).abs() < 1e-10);
}

#[test]
fn phase_dummies_are_mutually_exclusive() {
    let p = fixture_panel(0, 0.05);
    let spec = model2(&p);
    let ind = treatment_indicators(&p, &spec);
    assert_eq!(ind.len(), 2);
    for r in 0..p.len() {
        let s: f64 = ind.iter().map(|(_, c)| c[r]).sum();
        assert!(s <= 1.0);
        assert_eq!(s, f64::from(p.treatment()[r]));
    }
    assert_eq!(ind[0].1.iter().sum::<f64>(), 12.0);
}

#[test]
fn saturated_two_by_two_on_synthetic_data() {
    let (spec, p) = seasonal(9, 0.0, 0.3);
    for control in 1..spec.n_units() {
        let sub = p.select_units(&[0, control]);
        for (pre, post) in [(0, ONSET), (ONSET - 1, ONSET + 5), (3, 30)] {
            // Relabel the two chosen months as consecutive periods 0 and 1.
            let two = [pre, post]
                .iter()
                .enumerate()
                .flat_map(|(k, &t)| {
                    let cells: Vec<_> = sub.select_periods(t..t + 1).observations().collect();
                    cells.into_iter().map(move |mut o| {
                        o.period = didimpact::panel::Period(k as i64);
                        o.controls.clear();
                        o
                    })
                })
                .collect();
            let two = PanelDataset::from_observations(didimpact::panel::TimeAxis::Index, vec![], two).unwrap();
            let mut ms = ModelSpec::new("outcome", single_phase(&two, "open"));
            ms.log_outcome = true;
            let m = fit_model(&two, &ms).unwrap();
            let ln = |u: usize, t: usize| two.outcome()[two.cell(u, t)].ln();
            let hand = (ln(0, 1) - ln(0, 0)) - (ln(1, 1) - ln(1, 0));
            assert!((m.fit.coefficient("treatment[open]").unwrap() - hand).abs() < 1e-10);
            assert!((hand - 0.3).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// With one treated unit and no controls the pooled effect is a weighted
    /// average of the phase effects.
    #[test]
    fn pooled_effect_lies_between_phase_effects(seed in 0u64..10_000, noise in 0.01f64..0.2) {
        let spec = DgpSpec::seasonal(8, 36, 7.0, 0.4, seed)
            .with_delta("first_year", 0.05)
            .with_delta("after_first_year", -0.1)
            .with_noise(noise);
        let p: PanelDataset<f64> = generate_panel(&spec, &two_phase_schedule(&spec, 0), &[]).unwrap();
        let m1 = fit_model(&p, &ModelSpec::new("outcome", single_phase(&p, "open"))).unwrap();
        let windows = didimpact::did::phases_from_onsets(
            &p,
            &[PhaseSplit::new("first_year", Some(12)), PhaseSplit::new("after_first_year", None)],
        ).unwrap();
        let m2 = fit_model(&p, &ModelSpec::new("outcome", windows)).unwrap();
        let d = m1.fit.coefficient("treatment[open]").unwrap();
        let a = m2.fit.coefficient("treatment[first_year]").unwrap();
        let b = m2.fit.coefficient("treatment[after_first_year]").unwrap();
        prop_assert!(d >= a.min(b) - 1e-12 && d <= a.max(b) + 1e-12, "{} not in [{}, {}]", d, a, b);
    }
}

#[test]
fn placebo_never_reads_the_treated_unit() {
    let p = fixture_panel(11, 0.05);
    let spec = model2(&p);
    let base = placebo_test(&p, &spec).unwrap();
    let bumped: Vec<f64> =
        p.outcome().iter().enumerate().map(|(r, v)| if r < p.n_periods() { v * 7.3 + 11.0 } else { *v }).collect();
    let mutated = p.replace_column("outcome", bumped).unwrap();
    let again = placebo_test(&mutated, &spec).unwrap();
    assert_eq!(base, again);
    assert_eq!(base.estimates.len(), 7 * 2);
    assert!(base.estimates.iter().all(|e| e.pseudo_unit != "u01"));
}

#[test]
fn parallel_trends_flags_a_planted_divergence() {
    let mut spec = fixture_spec(5, 0.02);
    spec.unit_trends[0] = 0.05;
    let p: PanelDataset<f64> = generate_panel(&spec, &two_phase_schedule(&spec, 0), &[]).unwrap();
    let pt = parallel_trends_test(&p, &model2(&p)).unwrap();
    assert!(!pt.passed, "p = {}", pt.p_value);
    assert_eq!(pt.pre_periods, ONSET);
    assert!((pt.interaction - 0.05).abs() < 0.01);

    let clean = fixture_panel(5, 0.02);
    let report = run_diagnostics(&clean, &model2(&clean), &PreTrendOptions::default()).unwrap();
    assert!(report.parallel_trends.p_value > 0.0 && report.parallel_trends.p_value <= 1.0);
}

#[test]
fn placebo_detects_a_planted_effect_on_a_control() {
    let spec = fixture_spec(3, 0.01).with_delta("hidden", 0.4);
    let schedule = two_phase_schedule(&spec, 0);
    let planted = [spec.window(4, ONSET, None, "hidden")];
    let p: PanelDataset<f64> = generate_panel(&spec, &schedule, &planted).unwrap();
    let placebo = placebo_test(&p, &model2(&p)).unwrap();
    assert!(!placebo.passed);
    assert!(placebo.estimates.iter().any(|e| e.pseudo_unit == "u05" && e.significant && e.delta > 0.2));
}

#[test]
fn counterfactual_gap_on_noiseless_data() {
    let p = fixture_panel(7, 0.0);
    let m = fit_model(&p, &model2(&p)).unwrap();
    let window = treated_window(&m, &p, "u01", Some("first_year"));
    assert_eq!(window.len(), 12);
    let cf = predict_counterfactual(&m, &p, "u01", &window, CounterfactualOptions::default()).unwrap();
    for (i, per) in window.iter().enumerate() {
        let r = p.cell(0, p.period_index(*per).unwrap());
        let y = p.outcome()[r];
        assert!((cf.expected[i] - y * (-0.047f64).exp()).abs() < 1e-8 * y);
    }
    let expected_total: f64 = cf.observed.iter().map(|y| y * (1.0 - (-0.047f64).exp())).sum();
    assert!((cf.cumulative_gap - expected_total).abs() < 1e-8 * expected_total);
    let table = build_impact_table(&cf, &parse_preset(DEFAULT_PRESET).unwrap()).unwrap();
    assert_eq!(table.additional_units, cf.cumulative_gap);
}

#[test]
fn ate_reports_percentage_change() {
    let p = fixture_panel(1, 0.02);
    let m = fit_model(&p, &model2(&p)).unwrap();
    let ate = extract_ate(&m.fit, "first_year").unwrap();
    assert!((ate.pct_change - 100.0 * (ate.delta.exp() - 1.0)).abs() < 1e-12);
    assert!(ate.se > 0.0 && ate.p_value > 0.0 && ate.p_value <= 1.0);
    assert!(extract_ate(&m.fit, "nope").is_err());
}

#[test]
fn explicit_windows_match_onset_phases() {
    let p = fixture_panel(2, 0.05);
    let auto = model2(&p);
    let spec = fixture_spec(2, 0.05);
    let manual = ModelSpec::new(
        "outcome",
        vec![
            TreatmentWindow { ..spec.window(0, ONSET, Some(12), "first_year") },
            spec.window(0, ONSET + 12, None, "after_first_year"),
        ],
    )
    .with_controls(common::controls());
    assert_eq!(auto.treatment_windows, manual.treatment_windows);
}
