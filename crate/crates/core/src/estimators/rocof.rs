//! ROCOF from a frequency stream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocofMode {
    /// Incremental ratio of consecutive frequency estimates.
    FiniteDifference,
    /// Per-window instantaneous ROCOF of a dynamic model.
    Derivative,
}

impl RocofMode {
    pub const ALL: [RocofMode; 2] = [RocofMode::FiniteDifference, RocofMode::Derivative];

    pub fn name(self) -> &'static str {
        match self {
            RocofMode::FiniteDifference => "fin",
            RocofMode::Derivative => "der",
        }
    }
}

impl std::fmt::Display for RocofMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RocofMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fin" | "finite_difference" | "finite-difference" => Ok(RocofMode::FiniteDifference),
            "der" | "derivative" => Ok(RocofMode::Derivative),
            other => Err(Error::config(format!("unknown ROCOF mode {other:?}"))),
        }
    }
}

/// ROCOF per reporting instant; the first finite-difference value is `None`.
pub fn rocof_from_stream(
    freq: &[f64],
    tr: f64,
    mode: RocofMode,
    derivative: Option<&[f64]>,
) -> Result<Vec<Option<f64>>> {
    match mode {
        RocofMode::FiniteDifference => {
            if !(tr > 0.0) {
                return Err(Error::invalid("reporting period must be positive"));
            }
            let mut prev: Option<f64> = None;
            Ok(freq
                .iter()
                .map(|&f| {
                    let r = prev.map(|p| (f - p) / tr);
                    prev = Some(f);
                    r
                })
                .collect())
        }
        RocofMode::Derivative => {
            let d = derivative.ok_or_else(|| {
                Error::config("derivative ROCOF requires a dynamic-model estimator")
            })?;
            if d.len() != freq.len() {
                return Err(Error::invalid("derivative stream length differs from frequency stream"));
            }
            Ok(d.iter().map(|&v| Some(v)).collect())
        }
    }
}
