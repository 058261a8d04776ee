#![allow(dead_code)]

use didimpact::did::{ControlSpec, ModelSpec, PhaseSplit, TreatmentWindow};
use didimpact::panel::PanelDataset;
use didimpact::synth::{generate_panel, ControlFamily, ControlGenerator, DgpSpec};

pub const ONSET: usize = 20;

/// 8 units × 36 months, unit 0 treated from month 20, with a supply control
/// and one event-count control.
pub fn fixture_spec(seed: u64, noise: f64) -> DgpSpec {
    DgpSpec::seasonal(8, 36, 8.0, 0.35, seed)
        .with_delta("first_year", 0.047)
        .with_delta("after_first_year", -0.11)
        .with_noise(noise)
        .with_control(ControlGenerator {
            name: "beds".into(),
            family: ControlFamily::LogNormal { mu: 9.0, sigma: 0.08 },
            beta: 0.21,
            enters_as_log: true,
        })
        .with_control(ControlGenerator {
            name: "events".into(),
            family: ControlFamily::Poisson { lambda: 1.5 },
            beta: 0.034,
            enters_as_log: false,
        })
}

pub fn two_phase_schedule(spec: &DgpSpec, unit: usize) -> Vec<TreatmentWindow> {
    vec![spec.window(unit, ONSET, Some(12), "first_year"), spec.window(unit, ONSET + 12, None, "after_first_year")]
}

pub fn fixture_panel(seed: u64, noise: f64) -> PanelDataset<f64> {
    let spec = fixture_spec(seed, noise);
    generate_panel(&spec, &two_phase_schedule(&spec, 0), &[]).unwrap()
}

pub fn controls() -> Vec<ControlSpec> {
    vec![ControlSpec::logged("beds"), ControlSpec::level("events")]
}

pub fn model2(panel: &PanelDataset<f64>) -> ModelSpec {
    let windows = didimpact::did::phases_from_onsets(
        panel,
        &[PhaseSplit::new("first_year", Some(12)), PhaseSplit::new("after_first_year", None)],
    )
    .unwrap();
    ModelSpec::new("outcome", windows).with_controls(controls())
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
