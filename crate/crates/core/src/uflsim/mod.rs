//! Closed-loop under-frequency load-shedding surrogate.
//!
//! A single-bus swing equation stands in for the network. Its frequency
//! drives a constant-amplitude voltage carrier sampled at `fs` with white
//! noise; a measurement chain (PLL, PMU estimator, or the ideal state) turns
//! the samples into frequency and ROCOF readings at the reporting rate; a
//! relay sheds load blocks whose power feeds back into the imbalance.
//! Energy not served is the trapezoidal integral of shed (or, after a
//! blackout, all) load over the recorded trajectory.

pub mod grid;
pub mod pll;
pub mod relay;

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use grid::{step_dynamics, GridModel, LoadBlock, Outage};
pub use pll::{pll_track, Pll, PllConfig, PllTrack};
pub use relay::{Order, Reading, Relay, RelayScheme, Stage};

use crate::error::{Error, Result};
use crate::estimators::{Algorithm, Estimator, EstimatorConfig, PmuClass, RocofMode};
use crate::wavegen::{ToneComponent, ToneSet};

/// Where the relay's readings come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementSource {
    /// Simulated frequency and df/dt, sampled on the reporting grid.
    Ideal,
    Pll {
        #[serde(default)]
        pll: PllConfig,
    },
    Pmu {
        class: PmuClass,
        algorithm: Algorithm,
        rocof_mode: RocofMode,
    },
}

impl MeasurementSource {
    /// Class P, static model, finite-difference ROCOF.
    pub fn pmu1() -> Self {
        MeasurementSource::Pmu {
            class: PmuClass::P,
            algorithm: Algorithm::EIpdft,
            rocof_mode: RocofMode::FiniteDifference,
        }
    }

    /// Class M, dynamic model, derivative ROCOF.
    pub fn pmu2() -> Self {
        MeasurementSource::Pmu {
            class: PmuClass::M,
            algorithm: Algorithm::Tfm,
            rocof_mode: RocofMode::Derivative,
        }
    }

    pub fn pll() -> Self {
        MeasurementSource::Pll { pll: PllConfig::default() }
    }

    pub fn label(&self) -> String {
        match self {
            MeasurementSource::Ideal => "ideal".into(),
            MeasurementSource::Pll { .. } => "pll".into(),
            MeasurementSource::Pmu { class, algorithm, rocof_mode } => {
                format!("pmu_{class}_{algorithm}_{rocof_mode}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Carrier SNR, dB; `None` disables noise.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { snr_db: Some(80.0), seed: 1 }
    }
}

/// Scale applied to the multitone interference set for the default carrier.
pub const DISTORTION_SCALE: f64 = 0.1;

/// The non-fundamental tones of the multitone test set, scaled by `c`.
pub fn default_distortion(c: f64) -> Vec<ToneComponent> {
    ToneSet::table_i(50.0)
        .components
        .into_iter()
        .filter(|t| t.harm_index != 1.0)
        .map(|t| ToneComponent { norm_amplitude: t.norm_amplitude * c, ..t })
        .collect()
}

/// Time base and carrier of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub t_start: f64,
    pub t_end: f64,
    /// Sample rate of the carrier; also the integration rate.
    pub fs: f64,
    pub reporting_rate: f64,
    pub amplitude: f64,
    /// Trajectory rows are kept every this many samples.
    pub record_every: usize,
    /// Fixed-frequency tones added to the carrier; `harm_index` is relative
    /// to the grid's nominal frequency and amplitudes to the carrier.
    pub distortion: Vec<ToneComponent>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_start: 178.0,
            t_end: 190.0,
            fs: 5000.0,
            reporting_rate: 50.0,
            amplitude: 1.0,
            record_every: 10,
            distortion: default_distortion(DISTORTION_SCALE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UflsScenario {
    #[serde(default)]
    pub grid: GridModel,
    pub relay: RelayScheme,
    pub measurement: MeasurementSource,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub sim: SimConfig,
}

impl UflsScenario {
    /// Calibrated default grid with the given chain and relay.
    pub fn new(measurement: MeasurementSource, relay: RelayScheme) -> Self {
        UflsScenario {
            grid: GridModel::default(),
            relay,
            measurement,
            noise: NoiseConfig::default(),
            sim: SimConfig::default(),
        }
    }

    /// PLL with the frequency-staged relay.
    pub fn pll_staged() -> Self {
        Self::new(MeasurementSource::pll(), RelayScheme::frequency_default())
    }

    /// A PMU chain with the ROCOF-proportional relay.
    pub fn pmu_rocof(measurement: MeasurementSource) -> Self {
        Self::new(measurement, RelayScheme::rocof_default())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.relay.validate()?;
        let s = &self.sim;
        if !(s.t_end > s.t_start) || !s.t_start.is_finite() || !s.t_end.is_finite() {
            return Err(Error::config("sim t_end must exceed t_start"));
        }
        if !(s.fs >= 1000.0 && s.fs.is_finite()) {
            return Err(Error::config("sim fs must be at least 1 kHz (integration step <= 1 ms)"));
        }
        if !(s.amplitude > 0.0) || s.record_every == 0 {
            return Err(Error::config("sim amplitude and record_every must be positive"));
        }
        let step = s.fs / s.reporting_rate;
        if !(step >= 1.0) || (step - step.round()).abs() > 1e-9 {
            return Err(Error::config("reporting period is not a whole number of samples"));
        }
        if s.distortion.iter().any(|c| !(c.harm_index > 0.0) || !(c.norm_amplitude >= 0.0)) {
            return Err(Error::config("distortion tones need positive index and non-negative amplitude"));
        }
        if self.noise.snr_db.is_some_and(|v| !v.is_finite()) {
            return Err(Error::config("noise snr_db must be finite"));
        }
        match &self.measurement {
            MeasurementSource::Pll { pll } => pll.validate()?,
            MeasurementSource::Pmu { .. } => self.pmu_config()?.validate()?,
            MeasurementSource::Ideal => {}
        }
        Ok(())
    }

    fn pmu_config(&self) -> Result<EstimatorConfig> {
        let MeasurementSource::Pmu { class, algorithm, rocof_mode } = self.measurement else {
            return Err(Error::config("not a PMU measurement source"));
        };
        let mut c = EstimatorConfig::new(class, algorithm, rocof_mode);
        c.fs = self.sim.fs;
        c.f_nominal = self.grid.f0;
        c.reporting_rate = self.sim.reporting_rate;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub freq: f64,
    pub served_mw: f64,
    pub shed_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Outage,
    Shed,
    Blackout,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Outage => "outage",
            EventKind::Shed => "shed",
            EventKind::Blackout => "blackout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub mw: f64,
    /// For sheds, the time of the newest sample behind the decision.
    pub trigger_t: Option<f64>,
}

/// Outcome of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UflsResult {
    pub trajectory: Vec<TrajectoryRow>,
    /// Relay readings, `(t, freq, rocof)`.
    pub readings: Vec<(f64, f64, Option<f64>)>,
    pub events: Vec<Event>,
    pub blackout: Option<f64>,
    pub eens_mwh: f64,
    pub scheduled_mw: f64,
    pub pll_lost_lock: bool,
}

impl UflsResult {
    pub fn is_blackout(&self) -> bool {
        self.blackout.is_some()
    }

    pub fn total_shed_mw(&self) -> f64 {
        self.events.iter().filter(|e| e.kind == EventKind::Shed).map(|e| e.mw).sum()
    }

    /// Lowest recorded frequency and its time.
    pub fn nadir(&self) -> (f64, f64) {
        self.trajectory
            .iter()
            .fold((f64::NAN, f64::INFINITY), |(t, f), r| if r.freq < f { (r.t, r.freq) } else { (t, f) })
    }

    /// First recorded time after `t0` at which the frequency stops falling,
    /// `None` if it never does before the end or a blackout.
    pub fn arrest_time(&self, t0: f64) -> Option<f64> {
        if self.blackout.is_some() {
            return None;
        }
        self.trajectory
            .windows(2)
            .find(|w| w[0].t > t0 && w[1].freq >= w[0].freq)
            .map(|w| w[0].t)
    }

    pub fn write_trajectory_csv<W: Write>(&self, meta: &[String], mut out: W) -> Result<()> {
        for m in meta {
            writeln!(out, "# {m}")?;
        }
        writeln!(out, "t,freq,served_mw,shed_mw")?;
        for r in &self.trajectory {
            writeln!(out, "{:.4},{:.6},{:.3},{:.3}", r.t, r.freq, r.served_mw, r.shed_mw)?;
        }
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, meta: &[String], mut out: W) -> Result<()> {
        for m in meta {
            writeln!(out, "# {m}")?;
        }
        writeln!(out, "t,kind,mw")?;
        for e in &self.events {
            writeln!(out, "{:.4},{},{:.3}", e.t, e.kind.name(), e.mw)?;
        }
        Ok(())
    }

    /// `blackout,eens_mwh`
    pub fn summary_line(&self) -> String {
        format!("{},{:.6}", self.is_blackout(), self.eens_mwh)
    }
}

/// Trapezoidal energy not served over the rows, MWh.
pub fn eens_mwh(rows: &[TrajectoryRow], scheduled_mw: f64) -> f64 {
    rows.windows(2)
        .map(|w| {
            let a = scheduled_mw - w[0].served_mw;
            let b = scheduled_mw - w[1].served_mw;
            0.5 * (a + b) * (w[1].t - w[0].t)
        })
        .sum::<f64>()
        / 3600.0
}

enum Chain {
    Ideal,
    Pll(Pll),
    Pmu {
        est: Estimator,
        mode: RocofMode,
        buf: Vec<f64>,
        prev: Option<f64>,
    },
}

/// Runs one closed-loop scenario.
pub fn run_ufls(sc: &UflsScenario) -> Result<UflsResult> {
    sc.validate()?;
    let g = &sc.grid;
    let s = &sc.sim;
    let dt = 1.0 / s.fs;
    let n = ((s.t_end - s.t_start) * s.fs).round() as usize;
    let step = (s.fs / s.reporting_rate).round() as usize;
    let tr = 1.0 / s.reporting_rate;

    let sigma = sc
        .noise
        .snr_db
        .map(|snr| (s.amplitude * s.amplitude / 2.0 / 10f64.powf(snr / 10.0)).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(sc.noise.seed);

    let mut chain = match &sc.measurement {
        MeasurementSource::Ideal => Chain::Ideal,
        MeasurementSource::Pll { pll } => Chain::Pll(Pll::new(PllConfig { fs: s.fs, f0: g.f0, ..*pll })?),
        MeasurementSource::Pmu { .. } => {
            let cfg = sc.pmu_config()?;
            Chain::Pmu {
                est: Estimator::new(cfg)?,
                mode: cfg.rocof_mode,
                buf: Vec::with_capacity(n),
                prev: None,
            }
        }
    };
    let mut relay = Relay::new(sc.relay.clone(), g)?;

    let blocks: Vec<f64> = g.shed_order().iter().map(|b| b.size_mw).collect();
    let mut opened = 0usize;
    let mut shed = 0.0;
    let mut pending: Vec<Order> = Vec::new();
    let mut outages: Vec<Outage> = g.outages.clone();
    outages.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut next_outage = 0;

    let mut f = g.f0;
    let mut theta = 0.0f64;
    let mut prev_pll_f: Option<f64> = None;
    let mut out = UflsResult {
        trajectory: Vec::with_capacity(n / s.record_every + 2),
        readings: Vec::new(),
        events: Vec::new(),
        blackout: None,
        eens_mwh: 0.0,
        scheduled_mw: g.base_power,
        pll_lost_lock: false,
    };

    for i in 0..=n {
        let t = s.t_start + i as f64 * dt;
        if out.blackout.is_none() {
            while next_outage < outages.len() && outages[next_outage].t <= t + 0.5 * dt {
                out.events.push(Event { t, kind: EventKind::Outage, mw: outages[next_outage].mw, trigger_t: None });
                next_outage += 1;
            }
            pending.retain(|o| {
                if o.due_t > t + 1e-9 {
                    return true;
                }
                let k = relay::pick_blocks(&blocks[opened..], o.mw);
                if k > 0 {
                    let mw: f64 = blocks[opened..opened + k].iter().sum();
                    opened += k;
                    shed += mw;
                    out.events.push(Event { t, kind: EventKind::Shed, mw, trigger_t: Some(o.trigger_t) });
                }
                false
            });
        }
        let served = if out.blackout.is_some() { 0.0 } else { g.base_power - shed };
        if i % s.record_every == 0 || i == n {
            out.trajectory.push(TrajectoryRow { t, freq: f, served_mw: served, shed_mw: shed });
        }
        if i == n {
            break;
        }
        if out.blackout.is_some() {
            continue;
        }

        let lost: f64 = outages[..next_outage].iter().map(|o| o.mw).sum();
        let imbalance = (shed - lost) / g.base_power;
        let noise = sigma.map_or(0.0, |sd| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        });
        let jump: f64 = outages[..next_outage].iter().map(|o| o.phase_step).sum();
        let hum: f64 = s
            .distortion
            .iter()
            .map(|c| c.norm_amplitude * (2.0 * PI * c.harm_index * g.f0 * t + c.phase).cos())
            .sum();
        let x = s.amplitude * ((theta + jump).sin() + hum) + noise;
        let report = i % step == step - 1;
        let reading = match &mut chain {
            Chain::Ideal => report.then(|| Reading { t, freq: f, rocof: Some(g.rocof(f, imbalance)) }),
            Chain::Pll(p) => {
                let fp = p.push(x);
                report.then(|| {
                    let r = prev_pll_f.map(|q| (fp - q) / tr);
                    prev_pll_f = Some(fp);
                    Reading { t, freq: fp, rocof: r }
                })
            }
            Chain::Pmu { est, mode, buf, prev } => {
                buf.push(x);
                let w = est.window_len();
                if report && buf.len() >= w {
                    let e = est.estimate_window(&buf[buf.len() - w..])?;
                    let r = match mode {
                        RocofMode::FiniteDifference => prev.map(|q| (e.freq - q) / tr),
                        RocofMode::Derivative => e.rocof_derivative,
                    };
                    *prev = Some(e.freq);
                    e.converged.then_some(Reading { t, freq: e.freq, rocof: r })
                } else {
                    None
                }
            }
        };
        if let Some(r) = reading {
            out.readings.push((r.t, r.freq, r.rocof));
            if let Some(o) = relay.observe(r) {
                pending.push(o);
            }
        }

        theta = (theta + 2.0 * PI * f * dt) % (2.0 * PI);
        f = step_dynamics(g, f, imbalance, dt);
        if !f.is_finite() {
            return Err(Error::numerical("frequency diverged"));
        }
        if f < g.f_collapse {
            let tb = t + dt;
            out.blackout = Some(tb);
            out.events.push(Event { t: tb, kind: EventKind::Blackout, mw: g.base_power - shed, trigger_t: None });
        }
    }
    if let Chain::Pll(p) = &chain {
        out.pll_lost_lock = p.lost_lock();
    }
    out.eens_mwh = eens_mwh(&out.trajectory, g.base_power);
    Ok(out)
}
