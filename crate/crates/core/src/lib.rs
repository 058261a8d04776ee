//! Difference-in-differences on balanced municipal panels, counterfactual
//! gaps, and a demand-side impact cascade that turns the gap into turnover
//! and value added.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod counterfactual;
pub mod did;
pub mod diagnostics;
pub mod estimator;
pub mod impact;
pub mod linalg;
pub mod panel;
pub mod report;
pub mod scalar;
pub mod synth;

use thiserror::Error;

pub use scalar::{round_half_even, Amount, Scalar};

pub type Panel = panel::PanelDataset<f64>;
pub type Design = estimator::DesignMatrix<f64>;
pub type Fit = estimator::FitResult<f64>;
pub type Model = did::ModelFit<f64>;
pub type Ate = did::AteEstimate<f64>;
pub type Diagnostics = diagnostics::DiagnosticsReport<f64>;
pub type Counterfactual = counterfactual::CounterfactualSeries<f64>;
pub type Coefficients = impact::IndustryCoefficients<f64>;
pub type Impact = impact::ImpactTable<f64>;

/// Any library error, tagged with the module it came from.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Panel(#[from] panel::PanelError),
    #[error(transparent)]
    Calendar(#[from] panel::CalendarError),
    #[error(transparent)]
    Estimator(#[from] estimator::EstimatorError),
    #[error(transparent)]
    Did(#[from] did::DidError),
    #[error(transparent)]
    Diagnostics(#[from] diagnostics::DiagnosticsError),
    #[error(transparent)]
    Counterfactual(#[from] counterfactual::CounterfactualError),
    #[error(transparent)]
    Impact(#[from] impact::ImpactError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
}

impl Error {
    /// Name of the innermost module that raised the error.
    pub fn module(&self) -> &'static str {
        use did::DidError;
        use diagnostics::DiagnosticsError;
        match self {
            Error::Panel(_) | Error::Calendar(_) => "panel",
            Error::Estimator(_) => "estimator",
            Error::Did(DidError::Panel(_)) => "panel",
            Error::Did(DidError::Estimator(_)) => "estimator",
            Error::Did(_) => "did",
            Error::Diagnostics(DiagnosticsError::Model(DidError::Panel(_))) => "panel",
            Error::Diagnostics(DiagnosticsError::Model(DidError::Estimator(_))) => "estimator",
            Error::Diagnostics(_) => "diagnostics",
            Error::Counterfactual(_) => "counterfactual",
            Error::Impact(_) => "impact",
            Error::Synth(synth::SynthError::Panel(_)) => "panel",
            Error::Synth(_) => "synth",
        }
    }
}
