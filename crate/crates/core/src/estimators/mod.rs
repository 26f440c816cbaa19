//! Window-based phasor, frequency and ROCOF estimators.
//!
//! A stream is produced by sliding a window of `window_cycles / f_nominal`
//! seconds over the record in steps of one reporting period and stamping
//! every estimate at the window midpoint. Windows are processed in parallel;
//! the finite-difference ROCOF is folded sequentially afterwards.

pub mod ipdft;
pub mod rocof;
pub mod spectrum;
pub mod tfm;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ipdft::{e_ipdft, i_ipdft, ipdft_core, InterfererSettings, Interpolation, ToneEstimate};
pub use rocof::{rocof_from_stream, RocofMode};
pub use tfm::{tfm_fit, TfmFit, TfmSettings};

use crate::error::{Error, Result};
use crate::units::wrap_phase;
use crate::waveform::Waveform;
use spectrum::SpectrumAnalyzer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    EIpdft,
    IIpdft,
    Tfm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::EIpdft, Algorithm::IIpdft, Algorithm::Tfm];

    /// True for estimators with a dynamic (Taylor) envelope.
    pub fn is_dynamic(self) -> bool {
        matches!(self, Algorithm::Tfm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::EIpdft => "e_ipdft",
            Algorithm::IIpdft => "i_ipdft",
            Algorithm::Tfm => "tfm",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "e_ipdft" => Ok(Algorithm::EIpdft),
            "i_ipdft" => Ok(Algorithm::IIpdft),
            "tfm" | "cs_tfm" => Ok(Algorithm::Tfm),
            other => Err(Error::config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Protection (P) and measurement (M) window classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PmuClass {
    P,
    M,
}

impl PmuClass {
    pub const ALL: [PmuClass; 2] = [PmuClass::P, PmuClass::M];

    pub fn window_cycles(self) -> u32 {
        match self {
            PmuClass::P => 3,
            PmuClass::M => 5,
        }
    }
}

impl fmt::Display for PmuClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PmuClass::P => "P",
            PmuClass::M => "M",
        })
    }
}

impl FromStr for PmuClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "P" | "p" => Ok(PmuClass::P),
            "M" | "m" => Ok(PmuClass::M),
            other => Err(Error::config(format!("unknown PMU class {other:?}"))),
        }
    }
}

/// Algorithm tunables; defaults are the documented design choices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tunables {
    /// Interpolation rule of the e-IpDFT and i-IpDFT stages.
    pub interpolation: Interpolation,
    /// Image-compensation passes of the e-IpDFT stage.
    pub image_iterations: usize,
    /// Outer iterations of the i-IpDFT interferer loop.
    pub interferer_iterations: usize,
    /// Interferer-to-fundamental energy ratio required to accept an interferer.
    pub interferer_threshold: f64,
    /// Optional band `[lo, hi]` Hz excluded from the interferer search.
    pub interferer_exclude: Option<[f64; 2]>,
    pub tfm: TfmSettings,
}

impl Default for Tunables {
    fn default() -> Self {
        Tunables {
            interpolation: Interpolation::TwoPoint,
            image_iterations: 4,
            interferer_iterations: 3,
            interferer_threshold: 1e-3,
            interferer_exclude: None,
            tfm: TfmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub window_cycles: u32,
    pub fs: f64,
    pub f_nominal: f64,
    pub reporting_rate: f64,
    pub rocof_mode: RocofMode,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub tunables: Tunables,
}

impl EstimatorConfig {
    /// 5 kHz sampling, 50 Hz nominal, 50 frames/s.
    pub fn new(class: PmuClass, algorithm: Algorithm, rocof_mode: RocofMode) -> Self {
        EstimatorConfig {
            window_cycles: class.window_cycles(),
            fs: 5000.0,
            f_nominal: 50.0,
            reporting_rate: 50.0,
            rocof_mode,
            algorithm,
            tunables: Tunables::default(),
        }
    }

    pub fn window_seconds(&self) -> f64 {
        self.window_cycles as f64 / self.f_nominal
    }

    pub fn reporting_period(&self) -> f64 {
        1.0 / self.reporting_rate
    }

    fn integral(x: f64, what: &str) -> Result<usize> {
        let r = x.round();
        if !(r >= 1.0) || (x - r).abs() > 1e-9 * r {
            return Err(Error::config(format!("{what} is not a whole number of samples ({x})")));
        }
        Ok(r as usize)
    }

    /// Window length in samples.
    pub fn window_len(&self) -> Result<usize> {
        Self::integral(self.window_seconds() * self.fs, "window length")
    }

    /// Reporting period in samples.
    pub fn report_step(&self) -> Result<usize> {
        Self::integral(self.fs / self.reporting_rate, "reporting period")
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.fs, "fs"),
            (self.f_nominal, "f_nominal"),
            (self.reporting_rate, "reporting_rate"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.window_cycles == 0 {
            return Err(Error::config("window_cycles must be positive"));
        }
        let n = self.window_len()?;
        if n % 2 != 0 || n < 8 {
            return Err(Error::config(format!("window length {n} must be even and >= 8")));
        }
        self.report_step()?;
        if 1.5 * self.f_nominal >= 0.5 * self.fs {
            return Err(Error::config("nominal frequency too close to Nyquist"));
        }
        if self.rocof_mode == RocofMode::Derivative && !self.algorithm.is_dynamic() {
            return Err(Error::config(format!(
                "derivative ROCOF requested for static estimator {}",
                self.algorithm
            )));
        }
        if self.tunables.tfm.max_components == 0 {
            return Err(Error::config("tfm.max_components must be at least 1"));
        }
        if self.algorithm.is_dynamic()
            && self.rocof_mode == RocofMode::Derivative
            && self.tunables.tfm.order < 2
        {
            return Err(Error::config("derivative ROCOF needs Taylor order >= 2"));
        }
        Ok(())
    }

    /// Echo used as `#` metadata in output files.
    pub fn describe(&self) -> String {
        format!(
            "algorithm={} window_cycles={} fs={} f_nominal={} reporting_rate={} rocof_mode={}",
            self.algorithm,
            self.window_cycles,
            self.fs,
            self.f_nominal,
            self.reporting_rate,
            self.rocof_mode
        )
    }
}

/// Per-estimate condition flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EstimateFlags {
    pub first_sample_rocof_undefined: bool,
    pub convergence_failed: bool,
}

impl EstimateFlags {
    pub fn any(self) -> bool {
        self.first_sample_rocof_undefined || self.convergence_failed
    }
}

impl fmt::Display for EstimateFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.first_sample_rocof_undefined {
            parts.push("rocof_undefined");
        }
        if self.convergence_failed {
            parts.push("convergence_failed");
        }
        if parts.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&parts.join("|"))
        }
    }
}

/// The signal model an estimate stands for, used to rebuild the window.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeModel {
    /// Constant amplitude, linear phase.
    Static,
    /// `Re{p(t) exp(j 2 pi f_pre t)}` with polynomial `p`.
    Dynamic { f_pre: f64, coeffs: Vec<Complex64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasorEstimate {
    pub t_mid: f64,
    /// Index of the first window sample in the record.
    pub start: usize,
    pub amplitude: f64,
    /// Phase at `t_mid`, wrapped to (-pi, pi].
    pub phase: f64,
    pub freq: f64,
    /// ROCOF in the configured formulation.
    pub rocof: Option<f64>,
    /// Instantaneous ROCOF of a dynamic model, whatever the configured mode.
    pub rocof_derivative: Option<f64>,
    pub nrmse_ppm: Option<f64>,
    pub flags: EstimateFlags,
    pub model: EnvelopeModel,
}

impl PhasorEstimate {
    /// Model value at `dt` seconds from the window midpoint.
    pub fn reconstruct(&self, dt: f64) -> f64 {
        match &self.model {
            EnvelopeModel::Static => {
                self.amplitude * (std::f64::consts::TAU * self.freq * dt + self.phase).cos()
            }
            EnvelopeModel::Dynamic { f_pre, coeffs } => tfm::envelope_value(*f_pre, coeffs, dt),
        }
    }

    /// True when the ROCOF value may be scored.
    pub fn scorable(&self) -> bool {
        self.rocof.is_some() && !self.flags.any()
    }
}

/// Estimate of a single window before stream-level ROCOF.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEstimate {
    pub amplitude: f64,
    pub phase: f64,
    pub freq: f64,
    pub rocof_derivative: Option<f64>,
    pub converged: bool,
    pub model: EnvelopeModel,
}

/// A window position within a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    pub start: usize,
    pub t_mid: f64,
    pub samples: &'a [f64],
}

/// Windows advancing by one reporting period, stamped at their midpoints.
pub fn windows<'a>(w: &'a Waveform, cfg: &EstimatorConfig) -> Result<Vec<Window<'a>>> {
    cfg.validate()?;
    if (w.fs - cfg.fs).abs() > 1e-9 * cfg.fs {
        return Err(Error::config(format!(
            "record sampled at {} Hz, estimator configured for {} Hz",
            w.fs, cfg.fs
        )));
    }
    let n = cfg.window_len()?;
    let step = cfg.report_step()?;
    if w.len() < n {
        return Err(Error::invalid(format!(
            "record of {} samples is shorter than one {n}-sample window",
            w.len()
        )));
    }
    let count = (w.len() - n) / step + 1;
    Ok((0..count)
        .map(|i| {
            let start = i * step;
            Window {
                start,
                t_mid: w.t0 + (start as f64 + n as f64 / 2.0) / w.fs,
                samples: &w.samples[start..start + n],
            }
        })
        .collect())
}

/// Per-window estimator with precomputed plans; shareable across threads.
#[derive(Debug, Clone)]
pub struct Estimator {
    cfg: EstimatorConfig,
    analyzer: SpectrumAnalyzer,
    band: (usize, usize),
}

impl Estimator {
    pub fn new(cfg: EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.window_len()?;
        Ok(Estimator {
            cfg,
            analyzer: SpectrumAnalyzer::new(n)?,
            band: ipdft::search_band(n, cfg.fs, cfg.f_nominal),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn window_len(&self) -> usize {
        self.analyzer.len()
    }

    /// Estimates one window of exactly `window_len()` samples.
    pub fn estimate_window(&self, x: &[f64]) -> Result<WindowEstimate> {
        if x.len() != self.window_len() {
            return Err(Error::invalid(format!(
                "window has {} samples, expected {}",
                x.len(),
                self.window_len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("window contains non-finite samples"));
        }
        let c = &self.cfg;
        let t = &c.tunables;
        let n = self.window_len();
        let spec = self.analyzer.spectrum(x);
        let (lo, hi) = self.band;
        let stat = |e: ToneEstimate| WindowEstimate {
            amplitude: e.amplitude,
            phase: wrap_phase(e.phase),
            freq: e.freq,
            rocof_derivative: None,
            converged: e.converged,
            model: EnvelopeModel::Static,
        };
        let mut out = match c.algorithm {
            Algorithm::EIpdft => stat(ipdft::e_ipdft_on(&spec, lo, hi, c.fs, n, t.image_iterations, t.interpolation)),
            Algorithm::IIpdft => {
                let s = InterfererSettings {
                    image_iterations: t.image_iterations,
                    max_iterations: t.interferer_iterations,
                    energy_threshold: t.interferer_threshold,
                    exclude_band: t.interferer_exclude.map(|[a, b]| (a, b)),
                    rule: t.interpolation,
                };
                stat(ipdft::i_ipdft_on(&spec, lo, hi, c.fs, n, &s).fundamental)
            }
            Algorithm::Tfm => {
                let pre = ipdft::e_ipdft_on(&spec, lo, hi, c.fs, n, t.image_iterations, t.interpolation);
                let f = tfm_fit(x, c.fs, c.f_nominal, pre.freq, &t.tfm);
                WindowEstimate {
                    amplitude: f.amplitude,
                    phase: wrap_phase(f.phase),
                    freq: f.freq,
                    rocof_derivative: f.rocof,
                    converged: f.converged && pre.converged,
                    model: EnvelopeModel::Dynamic {
                        f_pre: f.f_pre,
                        coeffs: f.coeffs,
                    },
                }
            }
        };
        let res = c.fs / n as f64;
        let in_band = out.freq >= lo as f64 * res - res && out.freq <= hi as f64 * res + res;
        out.converged &= in_band && out.amplitude.is_finite();
        Ok(out)
    }
}

/// Runs the configured estimator over the whole record.
pub fn estimate_stream(w: &Waveform, cfg: &EstimatorConfig) -> Result<Vec<PhasorEstimate>> {
    let est = Estimator::new(*cfg)?;
    let wins = windows(w, cfg)?;
    let per: Vec<WindowEstimate> = wins
        .par_iter()
        .map(|win| est.estimate_window(win.samples))
        .collect::<Result<_>>()?;
    let freq: Vec<f64> = per.iter().map(|e| e.freq).collect();
    let der: Option<Vec<f64>> = per
        .iter()
        .map(|e| e.rocof_derivative)
        .collect::<Option<Vec<f64>>>();
    let rocof = rocof_from_stream(&freq, cfg.reporting_period(), cfg.rocof_mode, der.as_deref())?;
    Ok(wins
        .iter()
        .zip(per)
        .zip(rocof)
        .map(|((win, e), r)| PhasorEstimate {
            t_mid: win.t_mid,
            start: win.start,
            amplitude: e.amplitude,
            phase: e.phase,
            freq: e.freq,
            rocof: r,
            rocof_derivative: e.rocof_derivative,
            nrmse_ppm: None,
            flags: EstimateFlags {
                first_sample_rocof_undefined: r.is_none(),
                convergence_failed: !e.converged,
            },
            model: e.model,
        })
        .collect())
}

/// Writes `t_mid,amplitude,phase,freq,rocof,flags` with `#` metadata lines.
pub fn write_estimates_csv<W: Write>(
    est: &[PhasorEstimate],
    cfg: &EstimatorConfig,
    meta: &[String],
    mut out: W,
) -> Result<()> {
    writeln!(out, "# {}", cfg.describe())?;
    for m in meta {
        writeln!(out, "# {m}")?;
    }
    writeln!(out, "t_mid,amplitude,phase,freq,rocof,flags")?;
    for e in est {
        let r = e.rocof.map_or_else(String::new, |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.t_mid, e.amplitude, e.phase, e.freq, r, e.flags
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn tone(fs: f64, n: usize, f: f64) -> Waveform {
        Waveform::new(fs, (0..n).map(|i| (TAU * f * i as f64 / fs).cos()).collect()).unwrap()
    }

    #[test]
    fn window_counts() {
        let w = tone(5000.0, 25_000, 50.0);
        let p = EstimatorConfig::new(PmuClass::P, Algorithm::EIpdft, RocofMode::FiniteDifference);
        let m = EstimatorConfig::new(PmuClass::M, Algorithm::EIpdft, RocofMode::FiniteDifference);
        assert_eq!(windows(&w, &p).unwrap().len(), 248);
        assert_eq!(windows(&w, &m).unwrap().len(), 246);

        let short = tone(5000.0, 300, 50.0);
        let ws = windows(&short, &p).unwrap();
        assert_eq!(ws.len(), 1);
        assert!((ws[0].t_mid - 0.03).abs() < 1e-15);
        assert!(windows(&tone(5000.0, 299, 50.0), &p).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = EstimatorConfig::new(PmuClass::P, Algorithm::EIpdft, RocofMode::Derivative);
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let mut odd = EstimatorConfig::new(PmuClass::P, Algorithm::Tfm, RocofMode::Derivative);
        odd.fs = 4999.0;
        assert!(odd.validate().is_err());
        let ok = EstimatorConfig::new(PmuClass::M, Algorithm::Tfm, RocofMode::Derivative);
        ok.validate().unwrap();
        let text = toml::to_string(&ok).unwrap();
        let back: EstimatorConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, ok);
    }

    #[test]
    fn stream_flags_first_rocof() {
        let w = tone(5000.0, 5000, 50.0);
        for alg in Algorithm::ALL {
            let cfg = EstimatorConfig::new(PmuClass::P, alg, RocofMode::FiniteDifference);
            let s = estimate_stream(&w, &cfg).unwrap();
            assert!(s[0].flags.first_sample_rocof_undefined);
            assert!(s[1..].iter().all(|e| e.scorable()));
            assert!(s.iter().all(|e| (e.freq - 50.0).abs() < 1e-6));
        }
        let cfg = EstimatorConfig::new(PmuClass::P, Algorithm::Tfm, RocofMode::Derivative);
        let s = estimate_stream(&w, &cfg).unwrap();
        assert!(s.iter().all(|e| e.scorable()));
    }

    #[test]
    fn csv_layout() {
        let w = tone(5000.0, 1000, 50.0);
        let cfg = EstimatorConfig::new(PmuClass::P, Algorithm::EIpdft, RocofMode::FiniteDifference);
        let s = estimate_stream(&w, &cfg).unwrap();
        let mut buf = Vec::new();
        write_estimates_csv(&s, &cfg, &["dataset=test".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# algorithm=e_ipdft"));
        assert_eq!(lines[1], "# dataset=test");
        assert_eq!(lines[2], "t_mid,amplitude,phase,freq,rocof,flags");
        assert!(lines[3].ends_with(",,rocof_undefined"));
        assert_eq!(lines.len(), 3 + s.len());
    }
}
