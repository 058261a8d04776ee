//! Seeded synthetic panels with a known data-generating process:
//!
//! `ln Y_jt = α_j + λ_t + κ_j·t + δ_phase·D_jt + Σ β_c V_cjt + ε_jt`,
//! `ε ~ N(0, noise_sd²)`.
//!
//! Every cell draws from its own ChaCha stream keyed by `(seed, unit,
//! period)`, so output does not depend on generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::did::TreatmentWindow;
use crate::estimator::DesignMatrix;
use crate::panel::{Observation, PanelDataset, PanelError, Period, TimeAxis};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid DGP: {0}")]
    InvalidSpec(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlFamily {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Poisson { lambda: f64 },
    /// `exp(N(mu, sigma²))`, e.g. bed days offered.
    LogNormal { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlGenerator {
    pub name: String,
    pub family: ControlFamily,
    /// True coefficient in the log-outcome equation.
    pub beta: f64,
    /// The control enters the equation as `β·ln V` rather than `β·V`.
    pub enters_as_log: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub unit_names: Vec<String>,
    pub start: Period,
    pub time_axis: TimeAxis,
    /// α_j, one per unit.
    pub unit_effects: Vec<f64>,
    /// λ_t, one per period.
    pub period_effects: Vec<f64>,
    /// κ_j, per-unit linear trend on the period index (zeros by default).
    pub unit_trends: Vec<f64>,
    /// δ per phase label.
    pub true_delta: Vec<(String, f64)>,
    pub controls: Vec<ControlGenerator>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl DgpSpec {
    /// `n_units` units named `u01…`, monthly periods from January 2023,
    /// unit levels spread evenly over `base ± 0.5`, and annual sinusoidal
    /// seasonality of the given amplitude.
    pub fn seasonal(n_units: usize, n_periods: usize, base: f64, amplitude: f64, seed: u64) -> Self {
        let unit_effects = (0..n_units)
            .map(|u| if n_units > 1 { base - 0.5 + u as f64 / (n_units - 1) as f64 } else { base })
            .collect();
        let period_effects =
            (0..n_periods).map(|t| amplitude * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin()).collect();
        Self {
            unit_names: (1..=n_units).map(|u| format!("u{u:02}")).collect(),
            start: Period::from_year_month(2023, 1),
            time_axis: TimeAxis::YearMonth,
            unit_effects,
            period_effects,
            unit_trends: vec![0.0; n_units],
            true_delta: Vec::new(),
            controls: Vec::new(),
            noise_sd: 0.0,
            seed,
        }
    }

    pub fn n_units(&self) -> usize {
        self.unit_names.len()
    }

    pub fn n_periods(&self) -> usize {
        self.period_effects.len()
    }

    pub fn with_delta(mut self, phase: &str, delta: f64) -> Self {
        self.true_delta.retain(|(p, _)| p != phase);
        self.true_delta.push((phase.into(), delta));
        self
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_control(mut self, control: ControlGenerator) -> Self {
        self.controls.push(control);
        self
    }

    pub fn periods(&self) -> Vec<Period> {
        (0..self.n_periods()).map(|t| self.start.offset(t as i64)).collect()
    }

    /// Window covering `[onset, onset + length)` period indices.
    pub fn window(&self, unit: usize, onset: usize, length: Option<usize>, phase: &str) -> TreatmentWindow {
        TreatmentWindow {
            unit: self.unit_names[unit].clone(),
            onset: self.start.offset(onset as i64),
            end: length.map(|l| self.start.offset((onset + l - 1) as i64)),
            phase: phase.into(),
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.unit_names.is_empty() || self.period_effects.is_empty() {
            return bad("panel needs at least one unit and one period".into());
        }
        if self.unit_effects.len() != self.n_units() || self.unit_trends.len() != self.n_units() {
            return bad("unit effects and trends need one entry per unit".into());
        }
        if !(self.noise_sd >= 0.0) {
            return bad(format!("noise_sd must be non-negative, got {}", self.noise_sd));
        }
        for c in &self.controls {
            let ok = match c.family {
                ControlFamily::Normal { sd, .. } => sd >= 0.0,
                ControlFamily::Uniform { low, high } => low < high,
                ControlFamily::Poisson { lambda } => lambda > 0.0,
                ControlFamily::LogNormal { sigma, .. } => sigma >= 0.0,
            };
            if !ok {
                return bad(format!("control `{}` has invalid parameters", c.name));
            }
        }
        Ok(())
    }
}

/// Generates the panel. `schedule` marks treatment (and the treatment column);
/// `planted` applies phase effects without marking treatment, for detection
/// tests.
pub fn generate_panel<T: Scalar>(
    spec: &DgpSpec,
    schedule: &[TreatmentWindow],
    planted: &[TreatmentWindow],
) -> Result<PanelDataset<T>, SynthError> {
    spec.validate()?;
    let periods = spec.periods();
    let last = *periods.last().expect("validated");
    let delta_of = |phase: &str| -> Result<f64, SynthError> {
        spec.true_delta
            .iter()
            .find(|(p, _)| p == phase)
            .map(|(_, d)| *d)
            .ok_or_else(|| SynthError::InvalidSchedule(format!("no true delta for phase `{phase}`")))
    };
    let mut effects = vec![0.0; spec.n_units() * spec.n_periods()];
    let mut treated = vec![0u8; effects.len()];
    for (windows, mark) in [(schedule, true), (planted, false)] {
        for w in windows {
            let u = spec
                .unit_names
                .iter()
                .position(|n| *n == w.unit)
                .ok_or_else(|| SynthError::InvalidSchedule(format!("unknown unit `{}`", w.unit)))?;
            let end = w.end.unwrap_or(last);
            if w.onset < spec.start || end > last || end < w.onset {
                return Err(SynthError::InvalidSchedule(format!("window for `{}` outside the panel", w.unit)));
            }
            let d = delta_of(&w.phase)?;
            for (t, p) in periods.iter().enumerate() {
                if *p >= w.onset && *p <= end {
                    effects[u * spec.n_periods() + t] += d;
                    if mark {
                        treated[u * spec.n_periods() + t] = 1;
                    }
                }
            }
        }
    }

    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let np = spec.n_periods();
    let observations: Vec<Observation<T>> = (0..spec.n_units() * np)
        .into_par_iter()
        .map(|cell| {
            let (u, t) = (cell / np, cell % np);
            let mut rng = cell_rng(spec.seed, u, t);
            let mut ln_y = spec.unit_effects[u] + spec.period_effects[t] + spec.unit_trends[u] * t as f64 + effects[cell];
            let controls: Vec<T> = spec
                .controls
                .iter()
                .map(|c| {
                    let v = draw(&c.family, &mut rng);
                    ln_y += c.beta * if c.enters_as_log { v.ln() } else { v };
                    T::lit(v)
                })
                .collect();
            ln_y += noise.sample(&mut rng);
            Observation {
                unit: spec.unit_names[u].clone(),
                period: periods[t],
                outcome: T::lit(ln_y.exp()),
                treatment: treated[cell],
                controls,
            }
        })
        .collect();
    let names = spec.controls.iter().map(|c| c.name.clone()).collect();
    Ok(PanelDataset::from_observations(spec.time_axis, names, observations)?)
}

/// Noise standard deviation at which the homoskedastic sampling SE of
/// column `j` equals `target_se`: `target_se / sqrt([(XᵀX)⁻¹]_jj)`.
pub fn noise_for_se<T: Scalar>(design: &DesignMatrix<T>, j: usize, target_se: T) -> T {
    target_se / design.gram_inverse()[(j, j)].sqrt()
}

fn cell_rng(seed: u64, unit: usize, period: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit as u64);
    // Each cell draws far fewer than 2^16 words.
    rng.set_word_pos((period as u128) << 16);
    rng
}

fn draw(family: &ControlFamily, rng: &mut ChaCha8Rng) -> f64 {
    match *family {
        ControlFamily::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
        ControlFamily::Uniform { low, high } => rng.random_range(low..high),
        ControlFamily::Poisson { lambda } => Poisson::new(lambda).expect("validated").sample(rng),
        ControlFamily::LogNormal { mu, sigma } => Normal::new(mu, sigma).expect("validated").sample(rng).exp(),
    }
}
