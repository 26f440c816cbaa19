//! Single-phase PLL frequency meter.
//!
//! A second-order generalized integrator (SOGI) tuned to the loop's own
//! frequency produces the in-phase and quadrature components; their
//! projection on the local oscillator gives `sin(theta - theta_hat)` free of
//! the double-frequency term. A PI controller drives the oscillator.
//! Linearized, the loop is `(kp s + ki) / (s^2 + kp s + ki)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PllConfig {
    pub kp: f64,
    /// 1/s.
    pub ki: f64,
    pub fs: f64,
    pub f0: f64,
    /// SOGI damping gain.
    pub sogi_gain: f64,
    /// Cycles during which the loop is held open while the SOGI fills.
    pub warmup_cycles: f64,
}

impl Default for PllConfig {
    fn default() -> Self {
        PllConfig {
            kp: 180.0,
            ki: 3200.0,
            fs: 5000.0,
            f0: 50.0,
            sogi_gain: std::f64::consts::SQRT_2,
            warmup_cycles: 2.0,
        }
    }
}

impl PllConfig {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.kp, "kp"),
            (self.ki, "ki"),
            (self.fs, "fs"),
            (self.f0, "f0"),
            (self.sogi_gain, "sogi_gain"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("pll {name} must be positive")));
            }
        }
        if !(self.warmup_cycles >= 0.0) {
            return Err(Error::config("pll warmup_cycles must be non-negative"));
        }
        Ok(())
    }

    /// Natural frequency and damping of the linearized loop.
    pub fn second_order(&self) -> (f64, f64) {
        let wn = self.ki.sqrt();
        (wn, self.kp / (2.0 * wn))
    }
}

#[derive(Debug, Clone)]
pub struct Pll {
    cfg: PllConfig,
    dt: f64,
    v: f64,
    qv: f64,
    x_prev: f64,
    theta: f64,
    integ: f64,
    omega: f64,
    n: u64,
    warmup: u64,
    unlocked_run: u64,
    lost_lock: bool,
}

impl Pll {
    pub fn new(cfg: PllConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Pll {
            dt: 1.0 / cfg.fs,
            v: 0.0,
            qv: 0.0,
            x_prev: 0.0,
            theta: 0.0,
            integ: 0.0,
            omega: 2.0 * PI * cfg.f0,
            n: 0,
            warmup: (cfg.warmup_cycles * cfg.fs / cfg.f0).round() as u64,
            unlocked_run: 0,
            lost_lock: false,
            cfg,
        })
    }

    /// Consumes one sample of `A sin(theta)` and returns the frequency, Hz.
    pub fn push(&mut self, x: f64) -> f64 {
        let c = &self.cfg;
        let dt = self.dt;
        // Trapezoidal SOGI step, tuned to the integral branch to keep the
        // proportional kick out of the filter.
        let w = 2.0 * PI * c.f0 + self.integ;
        let a = c.sogi_gain * w * dt / 2.0;
        let b = w * dt / 2.0;
        let u = c.sogi_gain * w * dt * (x + self.x_prev) / 2.0;
        // [1+a, b; -b, 1] s' = [1-a, -b; b, 1] s + [u, 0]
        let r0 = (1.0 - a) * self.v - b * self.qv + u;
        let r1 = b * self.v + self.qv;
        let det = 1.0 + a + b * b;
        self.v = (r0 - b * r1) / det;
        self.qv = (r1 * (1.0 + a) + b * r0) / det;
        self.x_prev = x;

        let amp = self.v.hypot(self.qv);
        let (s, co) = self.theta.sin_cos();
        let (err, cos_err) = if amp > 0.0 {
            ((self.v * co + self.qv * s) / amp, (self.v * s - self.qv * co) / amp)
        } else {
            (0.0, 1.0)
        };
        self.n += 1;
        let err = if self.n <= self.warmup { 0.0 } else { err };
        if self.n > self.warmup && cos_err < 0.0 {
            self.unlocked_run += 1;
            if self.unlocked_run as f64 > c.fs / c.f0 {
                self.lost_lock = true;
            }
        } else {
            self.unlocked_run = 0;
        }
        self.integ += c.ki * err * dt;
        self.omega = 2.0 * PI * c.f0 + c.kp * err + self.integ;
        self.theta = (self.theta + self.omega * dt) % (2.0 * PI);
        self.freq()
    }

    pub fn freq(&self) -> f64 {
        self.omega / (2.0 * PI)
    }

    /// Set once the phase error has stayed beyond +/- pi/2 for a full cycle.
    pub fn lost_lock(&self) -> bool {
        self.lost_lock
    }
}

/// PLL output on a reporting grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PllTrack {
    /// Time of the last sample feeding each report, relative to sample 0.
    pub t: Vec<f64>,
    pub freq: Vec<f64>,
    pub lost_lock: bool,
}

/// Runs the PLL over `samples` and decimates to `reporting_rate`.
pub fn pll_track(samples: &[f64], cfg: PllConfig, reporting_rate: f64) -> Result<PllTrack> {
    let mut pll = Pll::new(cfg)?;
    let step = cfg.fs / reporting_rate;
    if !(step >= 1.0) || (step - step.round()).abs() > 1e-9 {
        return Err(Error::config("reporting period is not a whole number of samples"));
    }
    let step = step.round() as usize;
    let mut out = PllTrack { t: vec![], freq: vec![], lost_lock: false };
    for (i, &x) in samples.iter().enumerate() {
        let f = pll.push(x);
        if i % step == step - 1 {
            out.t.push(i as f64 / cfg.fs);
            out.freq.push(f);
        }
    }
    out.lost_lock = pll.lost_lock();
    Ok(out)
}
