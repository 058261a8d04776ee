//! Demand-side impact cascade.
//!
//! Additional overnight stays become gross turnover per industry
//! (`stays × avex`), VAT is removed (`× (1 − θ/100)`), the production-value
//! share is applied (`× ψ/100`) and production value is split into direct
//! effects (gross value added, `× ω/100`) and indirect effects (the rest).
//!
//! The cascade functions are generic over [`Amount`], so they run on exact
//! rationals as well as floats. Nothing is rounded here; rounding is a
//! display concern.

use serde::Deserialize;
use thiserror::Error;

use crate::counterfactual::CounterfactualSeries;
use crate::scalar::{round_half_even, Amount, Scalar};

/// ψ may exceed 100 % slightly because production value includes inventory
/// changes; anything above this is treated as a data error.
pub const PSI_MAX_PCT: f64 = 110.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpactError {
    #[error("additional units must be non-negative, got {0}; the cascade has no meaning for losses")]
    NoUplift(String),
    #[error("average expenditure must be non-negative, got {0}")]
    NegativeExpenditure(String),
    #[error("VAT share theta must lie in [0, 100), got {0}")]
    ThetaOutOfRange(String),
    #[error("production share psi must lie in (0, {PSI_MAX_PCT}], got {0}")]
    PsiOutOfRange(String),
    #[error("value-added share omega must lie in (0, 100], got {0}")]
    OmegaOutOfRange(String),
    #[error("taxable turnover must be positive")]
    ZeroTurnover,
    #[error("VAT collected must be non-negative")]
    NegativeVat,
    #[error("net turnover, production value and gross value added must be positive")]
    NonPositiveAccount,
    #[error("gross value added exceeds production value")]
    GvaExceedsProduction,
    #[error("no expenditure samples present")]
    NoSamples,
    #[error("preset: {0}")]
    Preset(String),
}

fn pct<T: Amount>() -> T {
    T::from_u32(100).expect("100 representable")
}

fn show<T: Amount>(v: &T) -> String {
    format!("{v:?}")
}

/// `units × avex`.
pub fn gross_turnover<T: Amount>(additional_units: T, avex: T) -> Result<T, ImpactError> {
    if additional_units < T::zero() {
        return Err(ImpactError::NoUplift(show(&additional_units)));
    }
    if avex < T::zero() {
        return Err(ImpactError::NegativeExpenditure(show(&avex)));
    }
    Ok(additional_units * avex)
}

/// `T × (1 − θ/100)`.
pub fn net_turnover<T: Amount>(gross: T, theta: T) -> Result<T, ImpactError> {
    if theta < T::zero() || theta >= pct() {
        return Err(ImpactError::ThetaOutOfRange(show(&theta)));
    }
    Ok(gross * (T::one() - theta / pct()))
}

/// `t × ψ/100`.
pub fn production_value<T: Amount>(net: T, psi: T) -> Result<T, ImpactError> {
    if psi <= T::zero() {
        return Err(ImpactError::PsiOutOfRange(show(&psi)));
    }
    Ok(net * psi / pct())
}

/// `(PV × ω/100, PV − DE)`.
pub fn split_effects<T: Amount>(production: T, omega: T) -> Result<(T, T), ImpactError> {
    if omega <= T::zero() || omega > pct() {
        return Err(ImpactError::OmegaOutOfRange(show(&omega)));
    }
    let direct = production.clone() * omega / pct();
    let indirect = production - direct.clone();
    Ok((direct, indirect))
}

/// Average VAT share in percent.
pub fn derive_theta<T: Amount>(taxable_turnover: T, vat_collected: T) -> Result<T, ImpactError> {
    if taxable_turnover <= T::zero() {
        return Err(ImpactError::ZeroTurnover);
    }
    if vat_collected < T::zero() {
        return Err(ImpactError::NegativeVat);
    }
    Ok(pct::<T>() * vat_collected / taxable_turnover)
}

/// `(ψ, ω)` in percent from national accounts.
pub fn derive_psi_omega<T: Amount>(
    net_turnover: T,
    production_value: T,
    gross_value_added: T,
) -> Result<(T, T), ImpactError> {
    if net_turnover <= T::zero() || production_value <= T::zero() || gross_value_added <= T::zero() {
        return Err(ImpactError::NonPositiveAccount);
    }
    if gross_value_added > production_value {
        return Err(ImpactError::GvaExceedsProduction);
    }
    let psi = pct::<T>() * production_value.clone() / net_turnover;
    let omega = pct::<T>() * gross_value_added / production_value;
    Ok((psi, omega))
}

/// Arithmetic mean and population (divide-by-n) standard deviation of the
/// available samples.
pub fn aggregate_avex<T: Scalar>(samples: &[Option<T>]) -> Result<(T, T), ImpactError> {
    let present: Vec<T> = samples.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(ImpactError::NoSamples);
    }
    let n = T::count(present.len());
    let mean = present.iter().copied().sum::<T>() / n;
    let var = present.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndustryCoefficients<T> {
    pub industry: String,
    /// EUR per additional unit (overnight stay).
    pub avex: T,
    /// Average VAT, percent.
    pub theta: T,
    /// Production value share of net turnover, percent.
    pub psi: T,
    /// Gross value added share of production value, percent.
    pub omega: T,
}

impl<T: Amount> IndustryCoefficients<T> {
    pub fn validate(&self) -> Result<(), ImpactError> {
        if self.avex < T::zero() {
            return Err(ImpactError::NegativeExpenditure(show(&self.avex)));
        }
        if self.theta < T::zero() || self.theta >= pct() {
            return Err(ImpactError::ThetaOutOfRange(show(&self.theta)));
        }
        let psi_max = T::from_f64(PSI_MAX_PCT).expect("representable");
        if self.psi <= T::zero() || self.psi > psi_max {
            return Err(ImpactError::PsiOutOfRange(show(&self.psi)));
        }
        if self.omega <= T::zero() || self.omega > pct() {
            return Err(ImpactError::OmegaOutOfRange(show(&self.omega)));
        }
        Ok(())
    }
}

impl<T: Scalar> IndustryCoefficients<T> {
    /// Rounds every coefficient half-to-even, as printed in published tables.
    pub fn rounded(&self, decimals: u32) -> Self {
        Self {
            industry: self.industry.clone(),
            avex: round_half_even(self.avex, decimals),
            theta: round_half_even(self.theta, decimals),
            psi: round_half_even(self.psi, decimals),
            omega: round_half_even(self.omega, decimals),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactRow<T> {
    pub industry: String,
    pub gross_turnover: T,
    pub net_turnover: T,
    pub production_value: T,
    pub direct_effects: T,
    pub indirect_effects: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTable<T> {
    pub additional_units: T,
    pub coefficients: Vec<IndustryCoefficients<T>>,
    pub rows: Vec<ImpactRow<T>>,
    pub total: ImpactRow<T>,
}

pub fn impact_row<T: Amount>(additional_units: T, coeffs: &IndustryCoefficients<T>) -> Result<ImpactRow<T>, ImpactError> {
    coeffs.validate()?;
    let gross = gross_turnover(additional_units, coeffs.avex.clone())?;
    let net = net_turnover(gross.clone(), coeffs.theta.clone())?;
    let production = production_value(net.clone(), coeffs.psi.clone())?;
    let (direct, indirect) = split_effects(production.clone(), coeffs.omega.clone())?;
    Ok(ImpactRow {
        industry: coeffs.industry.clone(),
        gross_turnover: gross,
        net_turnover: net,
        production_value: production,
        direct_effects: direct,
        indirect_effects: indirect,
    })
}

/// Runs the cascade for every industry and sums the columns.
pub fn impact_table<T: Amount>(
    additional_units: T,
    coefficients: &[IndustryCoefficients<T>],
) -> Result<ImpactTable<T>, ImpactError> {
    let rows = coefficients
        .iter()
        .map(|c| impact_row(additional_units.clone(), c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = ImpactRow {
        industry: "Total".into(),
        gross_turnover: T::zero(),
        net_turnover: T::zero(),
        production_value: T::zero(),
        direct_effects: T::zero(),
        indirect_effects: T::zero(),
    };
    for r in &rows {
        total.gross_turnover = total.gross_turnover + r.gross_turnover.clone();
        total.net_turnover = total.net_turnover + r.net_turnover.clone();
        total.production_value = total.production_value + r.production_value.clone();
        total.direct_effects = total.direct_effects + r.direct_effects.clone();
        total.indirect_effects = total.indirect_effects + r.indirect_effects.clone();
    }
    Ok(ImpactTable { additional_units, coefficients: coefficients.to_vec(), rows, total })
}

/// Cascade driven by a counterfactual's cumulative gap.
pub fn build_impact_table<T: Scalar>(
    gap: &CounterfactualSeries<T>,
    coefficients: &[IndustryCoefficients<T>],
) -> Result<ImpactTable<T>, ImpactError> {
    impact_table(gap.cumulative_gap, coefficients)
}

/// Coefficient preset shipped with the crate (published 2-decimal values).
pub const DEFAULT_PRESET: &str = include_str!("../presets/default.toml");

/// The same industries described by raw national-accounts columns and
/// survey samples; coefficients are derived and rounded on load.
pub const RAW_STATISTICS_PRESET: &str = include_str!("../presets/raw_statistics.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    /// Rounds derived coefficients to this many decimals before use.
    publish_decimals: Option<u32>,
    industry: Vec<PresetIndustry>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Sample {
    Value(f64),
    Missing(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetIndustry {
    label: String,
    avex: Option<f64>,
    avex_samples: Option<Vec<Sample>>,
    theta: Option<f64>,
    taxable_turnover: Option<f64>,
    vat_collected: Option<f64>,
    psi: Option<f64>,
    omega: Option<f64>,
    net_turnover: Option<f64>,
    production_value: Option<f64>,
    gross_value_added: Option<f64>,
}

/// Parses a TOML coefficient preset. Each `[[industry]]` gives either the
/// coefficient directly or the raw columns it is derived from.
pub fn parse_preset(text: &str) -> Result<Vec<IndustryCoefficients<f64>>, ImpactError> {
    let file: PresetFile = toml::from_str(text).map_err(|e| ImpactError::Preset(e.to_string()))?;
    let publish = |v: f64| file.publish_decimals.map_or(v, |d| round_half_even(v, d));
    let missing = |label: &str, what: &str| ImpactError::Preset(format!("industry `{label}`: missing {what}"));
    file.industry
        .iter()
        .map(|ind| {
            let label = ind.label.as_str();
            let avex = match (ind.avex, &ind.avex_samples) {
                (Some(v), None) => v,
                (None, Some(samples)) => {
                    let parsed = samples
                        .iter()
                        .map(|s| match s {
                            Sample::Value(v) => Ok(Some(*v)),
                            Sample::Missing(m) if m.is_empty() || m.eq_ignore_ascii_case("n/a") => Ok(None),
                            Sample::Missing(m) => Err(ImpactError::Preset(format!("industry `{label}`: bad sample `{m}`"))),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    publish(aggregate_avex(&parsed)?.0)
                }
                _ => return Err(missing(label, "exactly one of avex / avex_samples")),
            };
            let theta = match (ind.theta, ind.taxable_turnover, ind.vat_collected) {
                (Some(t), None, None) => t,
                (None, Some(tt), Some(vat)) => publish(derive_theta(tt, vat)?),
                _ => return Err(missing(label, "theta or taxable_turnover + vat_collected")),
            };
            let (psi, omega) = match (ind.psi, ind.omega, ind.net_turnover, ind.production_value, ind.gross_value_added) {
                (Some(p), Some(o), None, None, None) => (p, o),
                (None, None, Some(nt), Some(pv), Some(gva)) => {
                    let (p, o) = derive_psi_omega(nt, pv, gva)?;
                    (publish(p), publish(o))
                }
                _ => return Err(missing(label, "psi + omega or net_turnover + production_value + gross_value_added")),
            };
            let c = IndustryCoefficients { industry: label.to_string(), avex, theta, psi, omega };
            c.validate()?;
            Ok(c)
        })
        .collect()
}
