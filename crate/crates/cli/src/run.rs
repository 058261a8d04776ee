use std::fs;
use std::path::{Path, PathBuf};

use didimpact::counterfactual::{
    group_series, predict_counterfactual, treated_window, CounterfactualOptions, CounterfactualSeries, GroupSeries,
};
use didimpact::diagnostics::{run_diagnostics, DiagnosticsReport, PreTrendOptions};
use didimpact::did::{fit_model, phases_from_onsets, ControlSpec, ModelFit, ModelSpec, PhaseSplit, TreatmentWindow};
use didimpact::impact::{build_impact_table, parse_preset, DEFAULT_PRESET};
use didimpact::panel::{load_panel, write_panel, EventCalendar, PanelDataset, Period, TimeAxis};
use didimpact::report::{self, ModelColumn};
use didimpact::synth::generate_panel;

use crate::config::{ModelConfig, RunConfig, SynthConfig};
use crate::plot::{line_chart, Series};
use crate::Failure;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Files written by a run, in write order.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

pub fn analyze(config_path: &Path, overrides: &Overrides) -> Result<Artifacts, Failure> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(dir) = &overrides.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = overrides.seed {
        match cfg.synth.as_mut() {
            Some(s) => s.seed = seed,
            None => return Err(Failure::config("--seed needs a [synth] section".into())),
        }
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Failure::io(&cfg.output_dir, e))?;

    let mut writer = Writer { dir: cfg.output_dir.clone(), files: Vec::new() };
    let panel = match &cfg.panel_path {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Failure::io(path, e))?;
            load_panel::<f64, _>(file, &(&cfg.schema).into())?
        }
        None => {
            let synth = cfg.synth.as_ref().expect("validated");
            let panel = synthesize(synth)?;
            let mut buf = Vec::new();
            write_panel(&panel, &mut buf)?;
            writer.write("panel.csv", &String::from_utf8(buf).expect("csv is utf-8"))?;
            panel
        }
    };
    let panel = match &cfg.event_calendar_path {
        Some(path) => with_event_days(panel, path)?,
        None => panel,
    };

    let mut fits = Vec::new();
    for m in &cfg.models {
        let spec = model_spec(&panel, m, cfg.diagnostics.alpha)?;
        let fit = fit_model(&panel, &spec)?;
        let diagnostics = if cfg.diagnostics.enabled {
            let opts = PreTrendOptions { include_controls: cfg.diagnostics.include_controls, time_index: None };
            Some(run_diagnostics(&panel, &spec, &opts)?)
        } else {
            None
        };
        fits.push((m, fit, diagnostics));
    }

    let cf_index = match &cfg.counterfactual.model {
        Some(name) => cfg.models.iter().position(|m| &m.name == name).expect("validated"),
        None => fits.len() - 1,
    };
    let (cf_config, cf_model, _) = &fits[cf_index];
    let series = counterfactual(&cfg, &panel, cf_model)?;
    let groups = group_series(cf_model, &panel);
    let preset = match &cfg.coefficient_preset_path {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::io(p, e))?,
        None => DEFAULT_PRESET.to_string(),
    };
    let coefficients = parse_preset(&preset)?;
    let table = build_impact_table(&series, &coefficients)?;

    let columns: Vec<ModelColumn<'_, f64>> = fits
        .iter()
        .map(|(m, f, d)| ModelColumn { label: &m.name, fit: &f.fit, diagnostics: d.as_ref() })
        .collect();
    let axis = panel.time_axis();
    let coeff_text = report::coefficient_table(&columns);
    writer.write("coefficients.txt", &coeff_text)?;
    writer.write("coefficients.csv", &report::coefficients_csv(&columns))?;
    writer.write("counterfactual.csv", &report::counterfactual_csv(&series, axis))?;
    writer.write("group_series.csv", &report::group_series_csv(&groups, axis))?;
    let impact_text = report::impact_text(&table);
    writer.write("impact.txt", &impact_text)?;
    writer.write("impact.csv", &report::impact_csv(&table))?;
    writer.write("counterfactual.svg", &counterfactual_chart(&series, axis, &cf_config.name))?;
    writer.write("group_series.svg", &group_chart(&groups, axis, &cf_config.name))?;
    let full = full_report(&cfg, &fits, &coeff_text, &series, &impact_text, axis);
    writer.write("report.txt", &full)?;
    Ok(Artifacts { output_dir: writer.dir, files: writer.files })
}

/// Writes the synthetic panel described by `[synth]`; returns its path.
pub fn synth(config_path: &Path, overrides: &Overrides) -> Result<PathBuf, Failure> {
    let cfg = RunConfig::load(config_path)?;
    let mut synth = cfg.synth.clone().ok_or_else(|| Failure::config("config has no [synth] section".into()))?;
    if let Some(seed) = overrides.seed {
        synth.seed = seed;
    }
    let out = match (&overrides.output_dir, &synth.output) {
        (Some(dir), _) => dir.join("panel.csv"),
        (None, Some(path)) => path.clone(),
        (None, None) => cfg.output_dir.join("panel.csv"),
    };
    let panel = synthesize(&synth)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::io(parent, e))?;
    }
    let file = fs::File::create(&out).map_err(|e| Failure::io(&out, e))?;
    write_panel(&panel, file)?;
    Ok(out)
}

/// Impact table for a given gap, as aligned text or CSV.
pub fn impact(gap: f64, coeffs: Option<&Path>, csv: bool) -> Result<String, Failure> {
    let preset = match coeffs {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::io(p, e))?,
        None => DEFAULT_PRESET.to_string(),
    };
    let table = didimpact::impact::impact_table(gap, &parse_preset(&preset)?)?;
    Ok(if csv { report::impact_csv(&table) } else { report::impact_text(&table) })
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

fn synthesize(cfg: &SynthConfig) -> Result<PanelDataset<f64>, Failure> {
    let spec = cfg.dgp()?;
    let mut schedule = Vec::new();
    let mut planted = Vec::new();
    for w in &cfg.windows {
        let unit = spec
            .unit_names
            .iter()
            .position(|n| *n == w.unit)
            .ok_or_else(|| Failure::new("synth", format!("unknown unit `{}` in synth.windows", w.unit)))?;
        if w.onset >= spec.n_periods() || w.length.is_some_and(|l| l == 0 || w.onset + l > spec.n_periods()) {
            return Err(Failure::new("synth", format!("window for `{}` outside the panel", w.unit)));
        }
        let window = spec.window(unit, w.onset, w.length, &w.phase);
        if w.hidden { planted.push(window) } else { schedule.push(window) }
    }
    Ok(generate_panel(&spec, &schedule, &planted)?)
}

fn with_event_days(panel: PanelDataset<f64>, path: &Path) -> Result<PanelDataset<f64>, Failure> {
    if panel.time_axis() != TimeAxis::YearMonth {
        return Err(Failure::new("panel", "event calendar needs a YYYY-MM time axis".into()));
    }
    let file = fs::File::open(path).map_err(|e| Failure::io(path, e))?;
    let calendar = EventCalendar::from_csv(file, None)?;
    let mut panel = panel;
    for (name, values) in calendar.event_day_columns(panel.units(), panel.periods()) {
        panel = panel.with_control(&name, values)?;
    }
    Ok(panel)
}

fn parse_period(panel: &PanelDataset<f64>, raw: &str) -> Result<Period, Failure> {
    panel
        .time_axis()
        .parse(raw)
        .ok_or_else(|| Failure::config(format!("cannot parse period `{raw}` for a {:?} time axis", panel.time_axis())))
}

fn model_spec(panel: &PanelDataset<f64>, m: &ModelConfig, alpha: f64) -> Result<ModelSpec, Failure> {
    let windows = if m.windows.is_empty() {
        let splits: Vec<PhaseSplit> = m.phases.iter().map(|p| PhaseSplit::new(&p.label, p.length)).collect();
        phases_from_onsets(panel, &splits)?
    } else {
        m.windows
            .iter()
            .map(|w| {
                Ok(TreatmentWindow {
                    unit: w.unit.clone(),
                    onset: parse_period(panel, &w.onset)?,
                    end: w.end.as_deref().map(|e| parse_period(panel, e)).transpose()?,
                    phase: w.phase.clone(),
                })
            })
            .collect::<Result<_, Failure>>()?
    };
    let mut spec = ModelSpec::new(&m.outcome, windows)
        .with_controls(m.controls.iter().map(|c| ControlSpec { name: c.name.clone(), log: c.log }).collect());
    spec.log_outcome = m.log_outcome;
    spec.alpha = alpha;
    Ok(spec)
}

fn counterfactual(
    cfg: &RunConfig,
    panel: &PanelDataset<f64>,
    model: &ModelFit<f64>,
) -> Result<CounterfactualSeries<f64>, Failure> {
    let c = &cfg.counterfactual;
    let unit = match &c.unit {
        Some(u) => u.clone(),
        None => {
            let mut treated: Vec<&str> = model.spec.treatment_windows.iter().map(|w| w.unit.as_str()).collect();
            treated.sort_unstable();
            treated.first().map(|u| u.to_string()).ok_or_else(|| Failure::new("did", "model has no treated unit".into()))?
        }
    };
    let window: Vec<Period> = match &c.window {
        Some([first, last]) => {
            let (a, b) = (parse_period(panel, first)?, parse_period(panel, last)?);
            (a.0..=b.0).map(Period).collect()
        }
        None => treated_window(model, panel, &unit, c.phase.as_deref()),
    };
    Ok(predict_counterfactual(model, panel, &unit, &window, CounterfactualOptions { smearing: c.smearing })?)
}

fn labels(periods: &[Period], axis: TimeAxis) -> Vec<String> {
    periods.iter().map(|p| axis.format(*p)).collect()
}

fn counterfactual_chart(s: &CounterfactualSeries<f64>, axis: TimeAxis, model: &str) -> String {
    line_chart(
        &format!("{}: observed and counterfactual ({model})", s.unit),
        "outcome",
        &labels(&s.window, axis),
        &[
            Series { name: "observed", values: &s.observed, color: "#1f4e79", dashed: false },
            Series { name: "counterfactual", values: &s.expected, color: "#c0504d", dashed: true },
        ],
    )
}

fn group_chart(g: &GroupSeries<f64>, axis: TimeAxis, model: &str) -> String {
    line_chart(
        &format!("Treated and control group means ({model})"),
        "outcome",
        &labels(&g.periods, axis),
        &[
            Series { name: "treated observed", values: &g.treated_observed, color: "#1f4e79", dashed: false },
            Series { name: "treated estimated", values: &g.treated_estimated, color: "#1f4e79", dashed: true },
            Series { name: "control observed", values: &g.control_observed, color: "#9bbb59", dashed: false },
            Series { name: "control estimated", values: &g.control_estimated, color: "#9bbb59", dashed: true },
        ],
    )
}

fn full_report(
    cfg: &RunConfig,
    fits: &[(&ModelConfig, ModelFit<f64>, Option<DiagnosticsReport<f64>>)],
    coeff_text: &str,
    series: &CounterfactualSeries<f64>,
    impact_text: &str,
    axis: TimeAxis,
) -> String {
    let mut s = String::new();
    s.push_str("Difference-in-differences estimates\n\n");
    s.push_str(coeff_text);
    let details: Vec<String> =
        fits.iter().filter_map(|(m, _, d)| d.as_ref().map(|d| report::diagnostics_detail(&m.name, d))).collect();
    if !details.is_empty() {
        s.push_str("\nDiagnostics\n");
        for d in details {
            s.push_str(&d);
        }
    }
    s.push_str("\nCounterfactual\n");
    s.push_str(&report::counterfactual_summary(series, axis));
    s.push_str("\nImpact\n");
    s.push_str(impact_text);
    let supply: Vec<String> = cfg
        .models
        .iter()
        .flat_map(|m| m.controls.iter().filter(|c| c.supply_side))
        .map(|c| ControlSpec { name: c.name.clone(), log: c.log }.column_name())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if !supply.is_empty() {
        s.push_str("\nNotes\n");
        s.push_str(report::CETERIS_PARIBUS_NOTE);
        s.push_str(&format!(" Supply-side controls: {}.\n", supply.join(", ")));
    }
    s
}
