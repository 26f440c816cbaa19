//! Load-shedding relays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::grid::GridModel;

/// One under-frequency stage; `fraction` is of the sheddable load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub threshold: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RelayScheme {
    /// Fixed blocks at descending frequency thresholds.
    FrequencyStaged {
        stages: Vec<Stage>,
        /// Operating time from measurement to breaker opening, s.
        delay: f64,
    },
    /// Sheds `2 H |rocof| / f0 * base`, with `rocof` the mean over the
    /// confirmation run, once ROCOF stays below `-threshold` for `confirm`
    /// consecutive reports while the frequency is below `supervision`.
    RocofProportional {
        threshold: f64,
        confirm: usize,
        /// Frequency element enabling the ROCOF element, Hz.
        supervision: f64,
        delay: f64,
        /// Hold-off after an operation before the relay re-arms, s.
        rearm: f64,
        /// Inertia used for sizing; the grid's own when absent.
        #[serde(default)]
        inertia: Option<f64>,
    },
}

impl RelayScheme {
    /// Four stages from 49.0 Hz to 48.4 Hz, 12.5 % each.
    pub fn frequency_default() -> Self {
        RelayScheme::FrequencyStaged {
            stages: [49.0, 48.8, 48.6, 48.4]
                .iter()
                .map(|&threshold| Stage { threshold, fraction: 0.125 })
                .collect(),
            delay: 0.1,
        }
    }

    pub fn rocof_default() -> Self {
        RelayScheme::RocofProportional {
            threshold: 0.5,
            confirm: 2,
            supervision: 49.8,
            delay: 0.1,
            rearm: 0.2,
            inertia: None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RelayScheme::FrequencyStaged { .. } => "frequency_staged",
            RelayScheme::RocofProportional { .. } => "rocof_proportional",
        }
    }

    pub fn delay(&self) -> f64 {
        match *self {
            RelayScheme::FrequencyStaged { delay, .. } | RelayScheme::RocofProportional { delay, .. } => delay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay() >= 0.0 && self.delay().is_finite()) {
            return Err(Error::config("relay delay must be non-negative"));
        }
        match self {
            RelayScheme::FrequencyStaged { stages, .. } => {
                if stages.is_empty() {
                    return Err(Error::config("frequency relay needs at least one stage"));
                }
                if stages.windows(2).any(|w| !(w[1].threshold < w[0].threshold)) {
                    return Err(Error::config("stage thresholds must be strictly decreasing"));
                }
                if stages.iter().any(|s| !(s.fraction > 0.0 && s.fraction <= 1.0)) {
                    return Err(Error::config("stage fractions must lie in (0, 1]"));
                }
            }
            RelayScheme::RocofProportional { threshold, confirm, rearm, inertia, supervision, .. } => {
                if !(*threshold > 0.0) || *confirm == 0 || !(*rearm >= 0.0) || !supervision.is_finite() {
                    return Err(Error::config(
                        "rocof relay needs threshold > 0, confirm >= 1 and rearm >= 0",
                    ));
                }
                if inertia.is_some_and(|h| !(h > 0.0)) {
                    return Err(Error::config("rocof relay inertia must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// A measurement as seen by a relay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    /// Time of the newest sample the measurement depends on.
    pub t: f64,
    pub freq: f64,
    pub rocof: Option<f64>,
}

/// A decided shedding action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Order {
    pub trigger_t: f64,
    pub due_t: f64,
    pub mw: f64,
}

#[derive(Debug, Clone)]
pub struct Relay {
    scheme: RelayScheme,
    f0: f64,
    h: f64,
    base: f64,
    pool: f64,
    next_stage: usize,
    run: Vec<f64>,
    armed_at: f64,
}

impl Relay {
    pub fn new(scheme: RelayScheme, grid: &GridModel) -> Result<Self> {
        scheme.validate()?;
        Ok(Relay {
            f0: grid.f0,
            h: match scheme {
                RelayScheme::RocofProportional { inertia: Some(h), .. } => h,
                _ => grid.h,
            },
            base: grid.base_power,
            pool: grid.sheddable_mw(),
            next_stage: 0,
            run: Vec::new(),
            armed_at: f64::NEG_INFINITY,
            scheme,
        })
    }

    pub fn observe(&mut self, r: Reading) -> Option<Order> {
        match &self.scheme {
            RelayScheme::FrequencyStaged { stages, delay } => {
                let mut mw = 0.0;
                while self.next_stage < stages.len() && r.freq < stages[self.next_stage].threshold {
                    mw += stages[self.next_stage].fraction * self.pool;
                    self.next_stage += 1;
                }
                (mw > 0.0).then_some(Order { trigger_t: r.t, due_t: r.t + delay, mw })
            }
            RelayScheme::RocofProportional { threshold, confirm, supervision, delay, rearm, .. } => {
                let Some(rocof) = r.rocof else {
                    self.run.clear();
                    return None;
                };
                if rocof < -threshold && r.freq < *supervision {
                    self.run.push(rocof);
                } else {
                    self.run.clear();
                }
                if self.run.len() < *confirm || r.t < self.armed_at {
                    return None;
                }
                let tail = &self.run[self.run.len() - confirm..];
                let mean = tail.iter().sum::<f64>() / *confirm as f64;
                self.run.clear();
                self.armed_at = r.t + delay + rearm;
                let mw = 2.0 * self.h * mean.abs() / self.f0 * self.base;
                Some(Order { trigger_t: r.t, due_t: r.t + delay, mw })
            }
        }
    }
}

/// Blocks to open for a request: in priority order, while each next block
/// brings the total closer to the request.
pub fn pick_blocks(remaining: &[f64], request: f64) -> usize {
    let mut total = 0.0;
    let mut k = 0;
    for &b in remaining {
        if total + b / 2.0 > request {
            break;
        }
        total += b;
        k += 1;
    }
    k
}
