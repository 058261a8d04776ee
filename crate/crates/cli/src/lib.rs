//! Pipeline runner behind the `didimpact` binary.

pub mod config;
pub mod plot;
mod run;

pub use run::{analyze, impact, synth, Artifacts, Overrides};

use std::fmt;

/// A failed run: the module that raised it and a one-line message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub module: String,
    pub message: String,
}

impl Failure {
    pub fn new(module: &str, message: String) -> Self {
        Self { module: module.to_string(), message }
    }

    pub fn config(message: String) -> Self {
        Self::new("config", message)
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new("io", format!("{}: {err}", path.display()))
    }
}

/// `error module=<name>: <message>` on a single line.
impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat: String = self.message.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect();
        write!(f, "error module={}: {}", self.module, flat)
    }
}

impl std::error::Error for Failure {}

impl<E: Into<didimpact::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e: didimpact::Error = e.into();
        Self::new(e.module(), e.to_string())
    }
}
