//! Text and CSV renderings of fits, diagnostics, counterfactuals and impact
//! tables. Rounding happens here and nowhere else.

use std::fmt::Write as _;

use crate::counterfactual::{CounterfactualSeries, GroupSeries, Retransform};
use crate::diagnostics::DiagnosticsReport;
use crate::estimator::{ColumnKind, FitResult};
use crate::impact::{ImpactRow, ImpactTable};
use crate::panel::TimeAxis;
use crate::scalar::Scalar;

pub const STAR_LEGEND: &str = "* p < 0.1, ** p < 0.05, *** p < 0.01.";

/// `1234567.4` → `"1,234,567"` at 0 decimals. Ties go to even.
pub fn thousands(value: f64, decimals: usize) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    let s = format!("{:.*}", decimals, value.abs());
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s.as_str(), None),
    };
    let mut out = String::new();
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    if let Some(f) = frac {
        out.push('.');
        out.push_str(f);
    }
    let zero = out.chars().all(|c| matches!(c, '0' | ',' | '.'));
    if value.is_sign_negative() && !zero {
        out.insert(0, '-');
    }
    out
}

/// Coefficient with three decimals, standard error in parentheses and stars:
/// `0.047 (0.024)**`.
pub fn coefficient_cell(estimate: f64, se: Option<f64>, p: Option<f64>) -> String {
    let mut s = format!("{estimate:.3}");
    if let Some(se) = se {
        let _ = write!(s, " ({se:.3})");
    }
    if let Some(p) = p {
        s.push_str(crate::estimator::significance_stars(p));
    }
    s
}

/// One column of the coefficient table.
pub struct ModelColumn<'a, T> {
    pub label: &'a str,
    pub fit: &'a FitResult<T>,
    pub diagnostics: Option<&'a DiagnosticsReport<T>>,
}

/// Aligned text table: treatment rows, control rows, fixed-effect flags,
/// R², observation count and, when diagnostics ran, the footer rows.
pub fn coefficient_table<T: Scalar>(columns: &[ModelColumn<'_, T>]) -> String {
    let mut treatment_rows: Vec<String> = Vec::new();
    let mut control_rows: Vec<String> = Vec::new();
    let mut other_rows: Vec<String> = Vec::new();
    for col in columns {
        for (name, kind) in col.fit.names.iter().zip(&col.fit.kinds) {
            let bucket = match kind {
                ColumnKind::Treatment(_) => &mut treatment_rows,
                ColumnKind::Control => &mut control_rows,
                ColumnKind::Other => &mut other_rows,
                _ => continue,
            };
            if !bucket.contains(name) {
                bucket.push(name.clone());
            }
        }
    }
    let cell = |col: &ModelColumn<'_, T>, name: &str| match col.fit.row(name) {
        Ok(r) => coefficient_cell(r.estimate.as_f64(), r.se.map(|v| v.as_f64()), r.p.map(|v| v.as_f64())),
        Err(_) => "--".to_string(),
    };
    let yes_no = |b: bool| if b { "Yes" } else { "No" }.to_string();

    let mut rows: Vec<Vec<String>> = Vec::new();
    let header = std::iter::once("Dependent variables".to_string()).chain(columns.iter().map(|c| c.label.to_string()));
    rows.push(header.collect());
    let section = |rows: &mut Vec<Vec<String>>, title: Option<&str>, names: &[String]| {
        if names.is_empty() {
            return;
        }
        if let Some(t) = title {
            rows.push(vec![t.to_string()]);
        }
        for n in names {
            rows.push(std::iter::once(n.clone()).chain(columns.iter().map(|c| cell(c, n))).collect());
        }
    };
    section(&mut rows, None, &treatment_rows);
    section(&mut rows, None, &other_rows);
    section(&mut rows, Some("Control variables"), &control_rows);
    let has_kind = |c: &ModelColumn<'_, T>, k: ColumnKind| c.fit.kinds.contains(&k);
    rows.push(vec!["Fixed effects".to_string()]);
    rows.push(
        std::iter::once("Units".to_string())
            .chain(columns.iter().map(|c| yes_no(has_kind(c, ColumnKind::UnitEffect))))
            .collect(),
    );
    rows.push(
        std::iter::once("Time points".to_string())
            .chain(columns.iter().map(|c| yes_no(has_kind(c, ColumnKind::PeriodEffect))))
            .collect(),
    );
    rows.push(
        std::iter::once("R²".to_string())
            .chain(columns.iter().map(|c| c.fit.r_squared.map_or("--".into(), |r| format!("{:.3}", r.as_f64()))))
            .collect(),
    );
    rows.push(
        std::iter::once("No. of observations".to_string())
            .chain(columns.iter().map(|c| thousands(c.fit.n_obs as f64, 0)))
            .collect(),
    );
    if columns.iter().any(|c| c.diagnostics.is_some()) {
        rows.push(
            std::iter::once("Parallel trends".to_string())
                .chain(columns.iter().map(|c| c.diagnostics.map_or("--".into(), |d| yes_no(d.parallel_trends.passed))))
                .collect(),
        );
        rows.push(
            std::iter::once("Placebo effect".to_string())
                .chain(columns.iter().map(|c| c.diagnostics.map_or("--".into(), |d| yes_no(!d.placebo.passed))))
                .collect(),
        );
    }
    let mut out = align(&rows);
    out.push('\n');
    out.push_str(STAR_LEGEND);
    out.push('\n');
    out
}

/// Raw p-values behind the footer verdicts.
pub fn diagnostics_detail<T: Scalar>(label: &str, d: &DiagnosticsReport<T>) -> String {
    let mut s = String::new();
    let pt = &d.parallel_trends;
    let _ = writeln!(
        s,
        "{label}: parallel trends interaction {:.4} (p = {:.4}, {} pre-periods, alpha = {})",
        pt.interaction.as_f64(),
        pt.p_value.as_f64(),
        pt.pre_periods,
        d.alpha
    );
    for e in &d.placebo.estimates {
        let _ = writeln!(
            s,
            "{label}: placebo {} [{}] delta {:.4} (p = {:.4}){}",
            e.pseudo_unit,
            e.phase,
            e.delta.as_f64(),
            e.p_value.as_f64(),
            if e.significant { " significant" } else { "" }
        );
    }
    let mut dropped: Vec<&String> = pt.dropped_controls.iter().chain(&d.placebo.dropped_controls).collect();
    dropped.sort();
    dropped.dedup();
    if !dropped.is_empty() {
        let names: Vec<&str> = dropped.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(s, "{label}: constant controls left out of diagnostics: {}", names.join(", "));
    }
    s
}

/// `model,name,estimate,se,t,p,stars`, fixed effects excluded.
pub fn coefficients_csv<T: Scalar>(columns: &[ModelColumn<'_, T>]) -> String {
    let mut s = String::from("model,name,estimate,se,t,p,stars\n");
    let opt = |v: Option<T>| v.map_or(String::new(), |v| v.as_f64().to_string());
    for c in columns {
        for r in c.fit.table() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                csv_field(c.label),
                csv_field(&r.name),
                r.estimate.as_f64(),
                opt(r.se),
                opt(r.t),
                opt(r.p),
                r.stars()
            );
        }
    }
    s
}

/// `period,observed,expected,gap`, unrounded.
pub fn counterfactual_csv<T: Scalar>(series: &CounterfactualSeries<T>, axis: TimeAxis) -> String {
    let mut s = String::from("period,observed,expected,gap\n");
    for i in 0..series.window.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            axis.format(series.window[i]),
            series.observed[i].as_f64(),
            series.expected[i].as_f64(),
            series.gap[i].as_f64()
        );
    }
    s
}

pub fn group_series_csv<T: Scalar>(g: &GroupSeries<T>, axis: TimeAxis) -> String {
    let mut s = String::from("period,treated_observed,treated_estimated,control_observed,control_estimated\n");
    for i in 0..g.periods.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            axis.format(g.periods[i]),
            g.treated_observed[i].as_f64(),
            g.treated_estimated[i].as_f64(),
            g.control_observed[i].as_f64(),
            g.control_estimated[i].as_f64()
        );
    }
    s
}

pub fn counterfactual_summary<T: Scalar>(series: &CounterfactualSeries<T>, axis: TimeAxis) -> String {
    let first = series.window.first().map(|p| axis.format(*p)).unwrap_or_default();
    let last = series.window.last().map(|p| axis.format(*p)).unwrap_or_default();
    let mut s = format!(
        "Additional outcome for {} over {first}..{last}: {}\n",
        series.unit,
        thousands(series.cumulative_gap.as_f64(), 0)
    );
    s.push_str(&retransform_note(series.retransform));
    s.push('\n');
    s.push_str(OBSERVED_CONTROLS_NOTE);
    s.push('\n');
    s
}

pub fn retransform_note<T: Scalar>(r: Retransform<T>) -> String {
    match r {
        Retransform::Identity => "Outcome modelled in levels; no retransformation.".into(),
        Retransform::Naive => "Log predictions retransformed by plain exponentiation (no smearing).".into(),
        Retransform::Smearing(f) => format!("Log predictions retransformed with smearing factor {:.6}.", f.as_f64()),
    }
}

pub const OBSERVED_CONTROLS_NOTE: &str =
    "Counterfactual uses observed control values; controls that responded to the treatment shift the gap.";

pub const CETERIS_PARIBUS_NOTE: &str =
    "Treatment effects hold ceteris paribus, i.e. with the supply-side controls at their observed values.";

const IMPACT_HEADER: [&str; 6] = [
    "Industry",
    "Gross turnover [EUR]",
    "Net turnover [EUR]",
    "Production value [EUR]",
    "Direct effects [EUR]",
    "Indirect effects [EUR]",
];

fn impact_cells<T: Scalar>(r: &ImpactRow<T>) -> [f64; 5] {
    [
        r.gross_turnover.as_f64(),
        r.net_turnover.as_f64(),
        r.production_value.as_f64(),
        r.direct_effects.as_f64(),
        r.indirect_effects.as_f64(),
    ]
}

pub fn impact_text<T: Scalar>(table: &ImpactTable<T>) -> String {
    let mut rows = vec![IMPACT_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for r in table.rows.iter().chain(std::iter::once(&table.total)) {
        rows.push(std::iter::once(r.industry.clone()).chain(impact_cells(r).iter().map(|v| thousands(*v, 0))).collect());
    }
    format!("Additional units: {}\n{}", thousands(table.additional_units.as_f64(), 0), align(&rows))
}

/// Unrounded cells, total last.
pub fn impact_csv<T: Scalar>(table: &ImpactTable<T>) -> String {
    let mut s = String::from("industry,gross_turnover,net_turnover,production_value,direct_effects,indirect_effects\n");
    for r in table.rows.iter().chain(std::iter::once(&table.total)) {
        let c = impact_cells(r);
        let _ = writeln!(s, "{},{},{},{},{},{}", csv_field(&r.industry), c[0], c[1], c[2], c[3], c[4]);
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// First column left-aligned, the rest right-aligned, two spaces apart.
fn align(rows: &[Vec<String>]) -> String {
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width: Vec<usize> = (0..ncol)
        .map(|j| rows.iter().filter(|r| r.len() > 1).filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (j, c) in r.iter().enumerate() {
            if j == 0 {
                let _ = write!(line, "{c:<w$}", w = width[0]);
            } else {
                let _ = write!(line, "  {c:>w$}", w = width[j]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands_separators() {
        assert_eq!(thousands(560_576.4, 0), "560,576");
        assert_eq!(thousands(999.5, 0), "1,000");
        assert_eq!(thousands(-1234.0, 0), "-1,234");
        assert_eq!(thousands(-0.2, 0), "0");
        assert_eq!(thousands(12.345, 2), "12.35");
        assert_eq!(thousands(100.0, 0), "100");
    }

    #[test]
    fn cells_follow_table_style() {
        assert_eq!(coefficient_cell(0.047, Some(0.024), Some(0.04)), "0.047 (0.024)**");
        assert_eq!(coefficient_cell(-0.008, Some(0.0026), Some(0.001)), "-0.008 (0.003)***");
        assert_eq!(coefficient_cell(0.019, Some(0.028), Some(0.5)), "0.019 (0.028)");
        assert_eq!(coefficient_cell(1.0, None, None), "1.000");
    }

    #[test]
    fn csv_fields_are_quoted() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
