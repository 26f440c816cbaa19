//! Single-bus aggregated swing dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sheddable load feeder; lower `priority` is shed first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadBlock {
    pub size_mw: f64,
    pub priority: u32,
}

/// Generation lost at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outage {
    pub t: f64,
    pub mw: f64,
    /// Step of the measured bus voltage angle at the trip, rad.
    #[serde(default)]
    pub phase_step: f64,
}

/// Default angle step of the measured voltage at the trip, rad.
pub const PHASE_STEP: f64 = 0.0;

/// Surrogate grid. Defaults are calibration choices, not measured data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridModel {
    pub f0: f64,
    /// Aggregate inertia constant, s.
    pub h: f64,
    /// Load damping, pu power per pu frequency.
    pub d: f64,
    /// System base and scheduled load, MW.
    pub base_power: f64,
    pub load_blocks: Vec<LoadBlock>,
    pub outages: Vec<Outage>,
    /// Generator protection floor; crossing it is a blackout.
    pub f_collapse: f64,
}

impl Default for GridModel {
    fn default() -> Self {
        GridModel {
            f0: 50.0,
            h: 3.0,
            d: 1.0,
            base_power: 6000.0,
            load_blocks: (1..=24).map(|p| LoadBlock { size_mw: 75.0, priority: p }).collect(),
            outages: vec![Outage { t: 180.0, mw: 1500.0, phase_step: PHASE_STEP }],
            f_collapse: 47.5,
        }
    }
}

impl GridModel {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.f0) || !pos(self.h) || !pos(self.base_power) {
            return Err(Error::config("grid f0, h and base_power must be positive"));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::config("grid damping must be non-negative"));
        }
        if self.load_blocks.iter().any(|b| !pos(b.size_mw)) {
            return Err(Error::config("load block sizes must be positive"));
        }
        if self.sheddable_mw() > self.base_power * (1.0 + 1e-12) {
            return Err(Error::config("load blocks exceed the base power"));
        }
        if self.outages.iter().any(|o| !o.t.is_finite() || !(o.mw >= 0.0) || !o.phase_step.is_finite()) {
            return Err(Error::config("outages need a finite time and non-negative power"));
        }
        if !(self.f_collapse < self.f0 && self.f_collapse > 0.0) {
            return Err(Error::config("f_collapse must lie in (0, f0)"));
        }
        Ok(())
    }

    pub fn sheddable_mw(&self) -> f64 {
        self.load_blocks.iter().map(|b| b.size_mw).sum()
    }

    /// Generation lost up to and including time `t`, MW.
    pub fn lost_generation(&self, t: f64) -> f64 {
        self.outages.iter().filter(|o| o.t <= t).map(|o| o.mw).sum()
    }

    /// Blocks in shedding order.
    pub fn shed_order(&self) -> Vec<LoadBlock> {
        let mut b = self.load_blocks.clone();
        b.sort_by_key(|x| x.priority);
        b
    }

    /// Instantaneous df/dt for a net imbalance (positive = surplus).
    pub fn rocof(&self, f: f64, imbalance_pu: f64) -> f64 {
        let df_pu = (f - self.f0) / self.f0;
        self.f0 / (2.0 * self.h) * (imbalance_pu - self.d * df_pu)
    }
}

/// One explicit Euler step of the swing equation.
///
/// `dt` should not exceed 1 ms; the run loop uses one sample period.
pub fn step_dynamics(grid: &GridModel, f: f64, imbalance_pu: f64, dt: f64) -> f64 {
    f + dt * grid.rocof(f, imbalance_pu)
}
