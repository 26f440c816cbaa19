//! Test waveform synthesis, noise injection and distortion figures.
//!
//! Three parametric scenario models are provided:
//!
//! * [`ToneSet`]: a steady fundamental with harmonic, inter-harmonic,
//!   sub-harmonic and inter-modulation tones (multitone grid scenario);
//! * [`OscillationModel`]: amplitude and phase modulation on top of a
//!   piecewise-linear frequency ramp profile (inter-area oscillation);
//! * [`StepModel`]: an amplitude/phase step between two steady cosines
//!   (islanding maneuver).

use std::f64::consts::{PI, TAU};
use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::Decibels;
use crate::waveform::Waveform;

/// ChaCha stream used for additive measurement noise.
pub const NOISE_STREAM: u64 = 0x6e6f_6973_65;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneComponent {
    /// Frequency as a multiple of the system frequency.
    pub harm_index: f64,
    /// Amplitude relative to the fundamental.
    pub norm_amplitude: f64,
    /// Initial phase, rad.
    #[serde(default)]
    pub phase: f64,
}

impl ToneComponent {
    pub fn new(harm_index: f64, norm_amplitude: f64) -> Self {
        ToneComponent {
            harm_index,
            norm_amplitude,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneSet {
    pub system_freq: f64,
    pub fundamental_amplitude: f64,
    /// Sorted by `harm_index`; contains exactly one entry with index 1.
    pub components: Vec<ToneComponent>,
}

impl ToneSet {
    /// Builds a validated tone set; components are sorted by harmonic index.
    pub fn new(
        system_freq: f64,
        fundamental_amplitude: f64,
        mut components: Vec<ToneComponent>,
    ) -> Result<Self> {
        if !(system_freq > 0.0) {
            return Err(Error::invalid("system frequency must be positive"));
        }
        if components.is_empty() {
            return Err(Error::invalid("tone set has no components"));
        }
        for c in &components {
            if !(c.harm_index > 0.0) || !(c.norm_amplitude >= 0.0) {
                return Err(Error::invalid(format!("invalid tone component {c:?}")));
            }
        }
        if components.iter().filter(|c| c.harm_index == 1.0).count() != 1 {
            return Err(Error::invalid(
                "tone set needs exactly one fundamental (harm_index = 1)",
            ));
        }
        components.sort_by(|a, b| a.harm_index.total_cmp(&b.harm_index));
        Ok(ToneSet {
            system_freq,
            fundamental_amplitude,
            components,
        })
    }

    /// A single fundamental tone.
    pub fn pure(system_freq: f64, amplitude: f64) -> Self {
        ToneSet::new(system_freq, amplitude, vec![ToneComponent::new(1.0, 1.0)])
            .expect("valid by construction")
    }

    /// Multitone grid scenario: fundamental, two asymmetric inter-modulation
    /// tones, harmonics 2-10, one inter-harmonic and one sub-harmonic.
    pub fn table_i(system_freq: f64) -> Self {
        let mut c = vec![
            ToneComponent::new(1.0, 1.0),
            ToneComponent::new(0.936, 0.01),
            ToneComponent::new(1.082, 0.005),
            ToneComponent::new(1.625, 0.075),
            ToneComponent::new(0.243, 0.02),
        ];
        c.extend((2..=6).map(|h| ToneComponent::new(h as f64, 0.05)));
        c.extend((7..=10).map(|h| ToneComponent::new(h as f64, 0.02)));
        ToneSet::new(system_freq, 1.0, c).expect("valid by construction")
    }

    pub fn fundamental(&self) -> &ToneComponent {
        self.components
            .iter()
            .find(|c| c.harm_index == 1.0)
            .expect("validated")
    }

    /// Components whose absolute frequency lies in `[lo, hi]` Hz.
    pub fn restricted(&self, lo: f64, hi: f64) -> Result<ToneSet> {
        let kept: Vec<_> = self
            .components
            .iter()
            .copied()
            .filter(|c| {
                let f = c.harm_index * self.system_freq;
                f >= lo && f <= hi
            })
            .collect();
        ToneSet::new(self.system_freq, self.fundamental_amplitude, kept)
    }

    /// Fundamental plus the tones inside the fundamental band (+-10 % of the
    /// system frequency, i.e. [45, 55] Hz at 50 Hz).
    pub fn in_band(&self) -> Result<ToneSet> {
        self.restricted(0.9 * self.system_freq, 1.1 * self.system_freq)
    }

    /// `(frequency Hz, amplitude, phase)` for every component.
    pub fn tones(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.components.iter().map(|c| {
            (
                c.harm_index * self.system_freq,
                c.norm_amplitude * self.fundamental_amplitude,
                c.phase,
            )
        })
    }

    /// Closed-form THD over integer harmonic indices in `span`.
    pub fn nominal_thd(&self, span: RangeInclusive<u32>) -> f64 {
        let s: f64 = self
            .components
            .iter()
            .filter(|c| c.harm_index.fract() == 0.0 && span.contains(&(c.harm_index as u32)))
            .filter(|c| c.harm_index != 1.0)
            .map(|c| c.norm_amplitude * c.norm_amplitude)
            .sum();
        s.sqrt() / self.fundamental().norm_amplitude
    }

    pub fn scaled(&self, c: f64) -> ToneSet {
        ToneSet {
            fundamental_amplitude: self.fundamental_amplitude * c,
            ..self.clone()
        }
    }
}

fn sample_count(fs: f64, duration: f64) -> Result<usize> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::invalid(format!("sample rate must be positive, got {fs}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(format!("duration must be positive, got {duration}")));
    }
    let n = duration * fs;
    let r = n.round();
    if (n - r).abs() > 1e-6 * r.max(1.0) || r < 1.0 {
        return Err(Error::invalid(format!(
            "duration {duration} s at {fs} Hz is not an integer sample count"
        )));
    }
    Ok(r as usize)
}

/// Noiseless sum of cosines `A * a_k * cos(2 pi h_k f_sys t + theta_k)`.
pub fn synth_multitone(model: &ToneSet, fs: f64, duration: f64) -> Result<Waveform> {
    if model.components.is_empty() {
        return Err(Error::invalid("tone set has no components"));
    }
    let n = sample_count(fs, duration)?;
    let tones: Vec<_> = model.tones().collect();
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            tones
                .iter()
                .map(|&(f, a, th)| a * (TAU * f * t + th).cos())
                .sum()
        })
        .collect();
    Ok(Waveform::new(fs, samples)?.with_label("multitone"))
}

/// How the ramp term of the oscillation model enters the phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampConvention {
    /// The phase is the exact integral of a frequency ramp of slope `R_f`,
    /// so the true ROCOF equals `R_f` on each segment.
    #[default]
    Integrated,
    /// The phase term is `R_f * tau^2` literally, i.e. a frequency slope of
    /// `R_f / pi`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSegment {
    pub t_start: f64,
    pub t_stop: f64,
    /// Ramp parameter, Hz/s (0 for flat segments).
    pub rate: f64,
}

/// Amplitude/phase modulated cosine riding a piecewise-linear frequency ramp.
///
/// Fields missing from a deserialized model take the inter-area fit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default = "OscillationModel::table_iii_iv")]
pub struct OscillationModel {
    pub amplitude: f64,
    pub freq: f64,
    pub phase: f64,
    /// Amplitude modulation depth (fraction).
    pub am_depth: f64,
    pub am_freq: f64,
    /// Phase modulation depth, rad.
    pub pm_depth: f64,
    pub pm_freq: f64,
    pub segments: Vec<RampSegment>,
    #[serde(default)]
    pub ramp_convention: RampConvention,
}

/// Cumulative ramp state at the start of each segment.
#[derive(Debug, Clone)]
struct RampProfile {
    starts: Vec<f64>,
    slopes: Vec<f64>,
    offset0: Vec<f64>,
    phase0: Vec<f64>,
}

impl RampProfile {
    fn index(&self, t: f64) -> usize {
        // segment i covers [start_i, start_{i+1}); the last one extends forever
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    fn offset(&self, t: f64) -> f64 {
        let i = self.index(t);
        self.offset0[i] + self.slopes[i] * (t - self.starts[i])
    }

    fn phase(&self, t: f64) -> f64 {
        let i = self.index(t);
        let tau = t - self.starts[i];
        self.phase0[i] + TAU * (self.offset0[i] * tau + 0.5 * self.slopes[i] * tau * tau)
    }
}

impl OscillationModel {
    /// Inter-area oscillation fit: 71.45 kV, 50.02 Hz, 13.6 % AM at 153.1 mHz,
    /// 56.4 mrad PM at 152.6 mHz, seven ramp segments over 220.5 s.
    pub fn table_iii_iv() -> Self {
        let bounds = [0.0, 30.5, 78.5, 98.5, 140.5, 180.5, 204.5, 220.5];
        let rates_mhz = [0.0, 2.28, -2.29, -2.05, 2.53, -1.42, 0.0];
        let segments = bounds
            .windows(2)
            .zip(rates_mhz)
            .map(|(b, r)| RampSegment {
                t_start: b[0],
                t_stop: b[1],
                rate: r * 1e-3,
            })
            .collect();
        OscillationModel {
            amplitude: 71.45,
            freq: 50.02,
            phase: -1.80,
            am_depth: 0.136,
            am_freq: 0.1531,
            pm_depth: 0.0564,
            pm_freq: 0.1526,
            segments,
            ramp_convention: RampConvention::Integrated,
        }
    }

    /// A single flat segment of length `duration` with all modulation off.
    pub fn steady(amplitude: f64, freq: f64, phase: f64, duration: f64) -> Self {
        OscillationModel {
            amplitude,
            freq,
            phase,
            am_depth: 0.0,
            am_freq: 0.0,
            pm_depth: 0.0,
            pm_freq: 0.0,
            segments: vec![RampSegment {
                t_start: 0.0,
                t_stop: duration,
                rate: 0.0,
            }],
            ramp_convention: RampConvention::Integrated,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::invalid("oscillation model has no segments"));
        }
        if self.segments[0].t_start != 0.0 {
            return Err(Error::invalid("first ramp segment must start at t = 0"));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.t_stop > s.t_start) || !s.rate.is_finite() {
                return Err(Error::invalid(format!("segment {} is empty or invalid", i + 1)));
            }
            if let Some(next) = self.segments.get(i + 1) {
                if next.t_start < s.t_stop {
                    return Err(Error::invalid(format!(
                        "segments {} and {} overlap",
                        i + 1,
                        i + 2
                    )));
                }
                if next.t_start > s.t_stop {
                    return Err(Error::invalid(format!(
                        "gap between segments {} and {}",
                        i + 1,
                        i + 2
                    )));
                }
            }
        }
        if !(0.0..1.0).contains(&self.am_depth) {
            return Err(Error::invalid("amplitude modulation depth must be in [0, 1)"));
        }
        if !(self.freq > 0.0) {
            return Err(Error::invalid("carrier frequency must be positive"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_stop)
    }

    fn effective_slope(&self, rate: f64) -> f64 {
        match self.ramp_convention {
            RampConvention::Integrated => rate,
            RampConvention::Literal => rate / PI,
        }
    }

    fn profile(&self) -> RampProfile {
        let mut p = RampProfile {
            starts: Vec::with_capacity(self.segments.len()),
            slopes: Vec::with_capacity(self.segments.len()),
            offset0: Vec::with_capacity(self.segments.len()),
            phase0: Vec::with_capacity(self.segments.len()),
        };
        let (mut off, mut ph) = (0.0, 0.0);
        for s in &self.segments {
            let k = self.effective_slope(s.rate);
            p.starts.push(s.t_start);
            p.slopes.push(k);
            p.offset0.push(off);
            p.phase0.push(ph);
            let d = s.t_stop - s.t_start;
            ph += TAU * (off * d + 0.5 * k * d * d);
            off += k * d;
        }
        p
    }

    /// Ramp frequency offset r(t), Hz.
    pub fn ramp_offset(&self, t: f64) -> f64 {
        self.profile().offset(t)
    }

    /// Slope of the ramp profile at `t`, Hz/s.
    pub fn ramp_slope(&self, t: f64) -> f64 {
        let p = self.profile();
        p.slopes[p.index(t)]
    }

    /// Amplitude envelope `A (1 + k_A cos(2 pi f_A t))`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.amplitude * (1.0 + self.am_depth * (TAU * self.am_freq * t).cos())
    }

    /// Instantaneous frequency `f + r(t) - k_phi f_phi sin(2 pi f_phi t)`.
    pub fn inst_freq(&self, t: f64) -> f64 {
        self.freq + self.ramp_offset(t) - self.pm_depth * self.pm_freq * (TAU * self.pm_freq * t).sin()
    }

    /// Instantaneous ROCOF `R(t) - 2 pi k_phi f_phi^2 cos(2 pi f_phi t)`.
    pub fn inst_rocof(&self, t: f64) -> f64 {
        self.ramp_slope(t)
            - TAU * self.pm_depth * self.pm_freq * self.pm_freq * (TAU * self.pm_freq * t).cos()
    }

    /// Evaluates `(freq, rocof)` on a grid, reusing the ramp profile.
    pub fn inst_freq_rocof(&self, t_grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.profile();
        let w = TAU * self.pm_freq;
        t_grid
            .iter()
            .map(|&t| {
                let f = self.freq + p.offset(t) - self.pm_depth * self.pm_freq * (w * t).sin();
                let r = p.slopes[p.index(t)] - w * self.pm_depth * self.pm_freq * (w * t).cos();
                (f, r)
            })
            .unzip()
    }

    /// Total phase argument of the carrier at `t`.
    pub fn total_phase(&self, t: f64) -> f64 {
        TAU * self.freq * t
            + self.profile().phase(t)
            + self.phase
            + self.pm_depth * (TAU * self.pm_freq * t).cos()
    }
}

/// Samples the oscillation model over `[0, T)` where `T` is the end of the
/// last ramp segment.
pub fn synth_oscillation(model: &OscillationModel, fs: f64) -> Result<Waveform> {
    model.validate()?;
    if !(fs > 2.0 * model.freq) {
        return Err(Error::invalid(format!(
            "sample rate {fs} Hz does not exceed twice the carrier frequency"
        )));
    }
    let n = (model.duration() * fs).round() as usize;
    if n == 0 {
        return Err(Error::invalid("oscillation model is shorter than one sample"));
    }
    let p = model.profile();
    let (wa, wp) = (TAU * model.am_freq, TAU * model.pm_freq);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let env = model.amplitude * (1.0 + model.am_depth * (wa * t).cos());
            let ph = TAU * model.freq * t
                + p.phase(t)
                + model.phase
                + model.pm_depth * (wp * t).cos();
            env * ph.cos()
        })
        .collect();
    Ok(Waveform::new(fs, samples)?
        .with_unit("kV")
        .with_label("oscillation"))
}

/// Amplitude, frequency and phase of one steady cosine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTriple {
    pub amplitude: f64,
    pub freq: f64,
    pub phase: f64,
}

/// Fields missing from a deserialized model take the islanding fit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default = "StepModel::table_vi")]
pub struct StepModel {
    pub pre: PhaseTriple,
    pub post: PhaseTriple,
    pub t_step: f64,
    /// Harmonic add-ons relative to the active segment's amplitude and
    /// frequency.
    #[serde(default)]
    pub distortion: Vec<ToneComponent>,
}

impl StepModel {
    /// Islanding maneuver fit: 77.66 -> 80.14 kV, 50.07 Hz, 1.032 -> 0.884 rad
    /// at t = 14 s, without harmonic distortion.
    pub fn table_vi() -> Self {
        StepModel {
            pre: PhaseTriple {
                amplitude: 77.66,
                freq: 50.07,
                phase: 1.032,
            },
            post: PhaseTriple {
                amplitude: 80.14,
                freq: 50.07,
                phase: 0.884,
            },
            t_step: 14.0,
            distortion: Vec::new(),
        }
    }

    /// Replaces the distortion with equal-power harmonics hitting `thd`
    /// (fraction, e.g. 0.0231).
    pub fn with_thd(mut self, thd: f64, harmonics: &[u32]) -> Self {
        self.distortion = if thd > 0.0 && !harmonics.is_empty() {
            let a = thd / (harmonics.len() as f64).sqrt();
            harmonics
                .iter()
                .map(|&h| ToneComponent::new(h as f64, a))
                .collect()
        } else {
            Vec::new()
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        for seg in [&self.pre, &self.post] {
            if !(seg.freq > 0.0) {
                return Err(Error::invalid("step segment frequencies must be positive"));
            }
        }
        Ok(())
    }
}

/// Pre-step / post-step cosines switched at the sample nearest `t_step`.
pub fn synth_step(model: &StepModel, fs: f64, duration: f64) -> Result<Waveform> {
    model.validate()?;
    let n = sample_count(fs, duration)?;
    if !(model.t_step > 0.0 && model.t_step < duration) {
        return Err(Error::invalid(format!(
            "step time {} s outside the record (0, {duration})",
            model.t_step
        )));
    }
    let n_step = (model.t_step * fs).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let seg = if i < n_step { &model.pre } else { &model.post };
            let mut x = seg.amplitude * (TAU * seg.freq * t + seg.phase).cos();
            for d in &model.distortion {
                x += seg.amplitude
                    * d.norm_amplitude
                    * (TAU * d.harm_index * seg.freq * t + d.harm_index * seg.phase + d.phase).cos();
            }
            x
        })
        .collect();
    Ok(Waveform::new(fs, samples)?.with_unit("kV").with_label("step"))
}

/// Adds white Gaussian noise with variance `P_signal / 10^(snr/10)`.
///
/// The noise sequence depends only on `seed`; [`Decibels::Infinite`] returns
/// the input unchanged.
pub fn add_noise(w: &Waveform, snr: Decibels, seed: u64) -> Result<Waveform> {
    if w.is_empty() {
        return Err(Error::invalid("cannot add noise to an empty waveform"));
    }
    let Some(ratio) = snr.power_ratio() else {
        return Ok(w.clone());
    };
    let sigma = (w.power() / ratio).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    let samples = w
        .samples
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x + sigma * z
        })
        .collect();
    Ok(Waveform {
        samples,
        seed: Some(seed),
        ..w.clone()
    })
}

/// Distortion and noise figures of a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub snr_db: Decibels,
    /// Total harmonic distortion, percent.
    pub thd_pct: f64,
    pub sinad_db: Decibels,
    pub harmonic_span: (u32, u32),
    /// Fitted amplitude per harmonic order 1..=H.
    pub harmonic_amplitudes: Vec<f64>,
    pub dc: f64,
    /// Mean power of the analysed (trimmed) record.
    pub total_power: f64,
    /// Power left after removing DC and harmonics 1..=H.
    pub residual_power: f64,
}

impl QualityReport {
    /// Power of each fitted component (DC, then harmonics 1..=H).
    pub fn component_powers(&self) -> Vec<f64> {
        std::iter::once(self.dc * self.dc)
            .chain(self.harmonic_amplitudes.iter().map(|a| 0.5 * a * a))
            .collect()
    }
}

/// Ratios below this are indistinguishable from rounding noise in `f64`.
const POWER_FLOOR: f64 = 1e-14;

/// SNR, THD and SINAD of `w` with fundamental `f_sys`.
///
/// The record is trimmed to the largest whole number of fundamental cycles,
/// then DC and harmonics `1..=max(span)` are fitted by least squares. THD
/// sums harmonics inside `harmonic_span`; SNR treats everything outside the
/// fitted harmonics as noise; SINAD compares the fundamental with all other
/// AC power.
pub fn measure_quality(
    w: &Waveform,
    f_sys: f64,
    harmonic_span: RangeInclusive<u32>,
) -> Result<QualityReport> {
    if !(f_sys > 0.0) {
        return Err(Error::invalid("system frequency must be positive"));
    }
    let per_cycle = w.fs / f_sys;
    let cycles = (w.len() as f64 / per_cycle + 1e-9).floor();
    if cycles < 1.0 {
        return Err(Error::invalid(format!(
            "record of {} samples is shorter than one fundamental cycle",
            w.len()
        )));
    }
    let n = ((cycles * per_cycle).round() as usize).min(w.len());
    let x = &w.samples[..n];

    let top = (*harmonic_span.end()).max(1);
    let hmax = (1..=top)
        .take_while(|&h| (h as f64) * f_sys < 0.5 * w.fs)
        .last()
        .unwrap_or(1) as usize;
    let m = 1 + 2 * hmax;

    // Gram matrix accumulation keeps memory flat for megasample records.
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut row = vec![0.0; m];
    let fill = |row: &mut [f64], i: usize| {
        let t = i as f64 / w.fs;
        row[0] = 1.0;
        for h in 1..=hmax {
            let a = TAU * h as f64 * f_sys * t;
            row[2 * h - 1] = a.cos();
            row[2 * h] = a.sin();
        }
    };
    for (i, &xi) in x.iter().enumerate() {
        fill(&mut row, i);
        for r in 0..m {
            rhs[r] += row[r] * xi;
            for c in r..m {
                gram[(r, c)] += row[r] * row[c];
            }
        }
    }
    for r in 0..m {
        for c in 0..r {
            gram[(r, c)] = gram[(c, r)];
        }
    }
    let coef = gram
        .cholesky()
        .ok_or_else(|| Error::numerical("harmonic fit normal matrix is singular"))?
        .solve(&rhs);

    let mut total = 0.0;
    let mut resid = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        fill(&mut row, i);
        let fit: f64 = row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
        total += xi * xi;
        resid += (xi - fit) * (xi - fit);
    }
    total /= n as f64;
    resid /= n as f64;

    let amps: Vec<f64> = (1..=hmax)
        .map(|h| coef[2 * h - 1].hypot(coef[2 * h]))
        .collect();
    let dc = coef[0];
    let p1 = 0.5 * amps[0] * amps[0];
    let harm_power: f64 = amps[1..].iter().map(|a| 0.5 * a * a).sum();
    let span_sq: f64 = (2..=hmax as u32)
        .filter(|h| harmonic_span.contains(h))
        .map(|h| amps[h as usize - 1].powi(2))
        .sum();
    if !(p1 > 0.0) {
        return Err(Error::invalid(format!("record has no component at {f_sys} Hz")));
    }
    let thd = span_sq.sqrt() / amps[0];
    let ratio = |den: f64| {
        if den <= POWER_FLOOR * p1 {
            Decibels::Infinite
        } else {
            Decibels::from_power_ratio(p1, den)
        }
    };

    Ok(QualityReport {
        snr_db: ratio(resid),
        thd_pct: 100.0 * thd,
        sinad_db: ratio(harm_power + resid),
        harmonic_span: (*harmonic_span.start(), *harmonic_span.end()),
        harmonic_amplitudes: amps,
        dc,
        total_power: total,
        residual_power: resid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_set_validation() {
        assert!(ToneSet::new(50.0, 1.0, vec![]).is_err());
        assert!(ToneSet::new(50.0, 1.0, vec![ToneComponent::new(2.0, 0.1)]).is_err());
        assert!(ToneSet::new(
            50.0,
            1.0,
            vec![ToneComponent::new(1.0, 1.0), ToneComponent::new(1.0, 0.1)]
        )
        .is_err());
        assert!(ToneSet::new(
            50.0,
            1.0,
            vec![ToneComponent::new(1.0, 1.0), ToneComponent::new(2.0, -0.1)]
        )
        .is_err());
        let t = ToneSet::table_i(50.0);
        assert!(t.components.windows(2).all(|w| w[0].harm_index <= w[1].harm_index));
        assert_eq!(t.components.len(), 14);
    }

    #[test]
    fn multitone_rejects_bad_grid() {
        let t = ToneSet::pure(50.0, 1.0);
        assert!(synth_multitone(&t, 0.0, 1.0).is_err());
        assert!(synth_multitone(&t, 5000.0, -1.0).is_err());
        assert!(synth_multitone(&t, 5000.0, 0.00011).is_err());
    }

    #[test]
    fn pure_tone_is_cosine() {
        let w = synth_multitone(&ToneSet::pure(50.0, 2.0), 5000.0, 1.0).unwrap();
        assert_eq!(w.len(), 5000);
        for (i, x) in w.samples.iter().enumerate() {
            let t = i as f64 / 5000.0;
            assert!((x - 2.0 * (TAU * 50.0 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn nominal_thd_closed_forms() {
        let t = ToneSet::table_i(50.0);
        assert!((t.nominal_thd(2..=6) - (5.0f64 * 0.05 * 0.05).sqrt()).abs() < 1e-15);
        let full = (5.0 * 0.05f64.powi(2) + 4.0 * 0.02f64.powi(2)).sqrt();
        assert!((t.nominal_thd(2..=10) - full).abs() < 1e-15);
        assert!((100.0 * t.nominal_thd(2..=6) - 11.18).abs() < 0.005);
        assert!((100.0 * full - 11.87).abs() < 0.005);
    }

    #[test]
    fn measured_thd_matches_table_spans() {
        let t = ToneSet::table_i(50.0);
        let w = synth_multitone(&t, 5000.0, 20.0).unwrap();
        let q26 = measure_quality(&w, 50.0, 2..=6).unwrap();
        let q210 = measure_quality(&w, 50.0, 2..=10).unwrap();
        assert!((q26.thd_pct - 11.180).abs() < 0.01, "{}", q26.thd_pct);
        assert!((q210.thd_pct - 11.874).abs() < 0.01, "{}", q210.thd_pct);
    }

    #[test]
    fn pure_cosine_quality_is_unbounded() {
        let w = synth_multitone(&ToneSet::pure(50.0, 1.0), 5000.0, 1.0).unwrap();
        let q = measure_quality(&w, 50.0, 2..=10).unwrap();
        assert!(q.thd_pct < 1e-10);
        assert_eq!(q.sinad_db, Decibels::Infinite);
        assert_eq!(q.snr_db, Decibels::Infinite);
    }

    #[test]
    fn quality_rejects_short_record() {
        let w = Waveform::new(5000.0, vec![1.0; 50]).unwrap();
        assert!(measure_quality(&w, 50.0, 2..=10).is_err());
    }

    #[test]
    fn oscillation_validation() {
        let mut m = OscillationModel::table_iii_iv();
        m.validate().unwrap();
        m.segments[2].t_start = 70.0;
        assert!(m.validate().is_err());
        let mut m = OscillationModel::table_iii_iv();
        m.am_depth = 1.0;
        assert!(m.validate().is_err());
        let mut m = OscillationModel::table_iii_iv();
        m.segments[3].t_start = 99.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn ramp_profile_is_continuous() {
        let m = OscillationModel::table_iii_iv();
        // segment 2 spans 48 s at 2.28 mHz/s
        let rise = m.ramp_offset(78.5) - m.ramp_offset(30.5);
        assert!((rise - 2.28e-3 * 48.0).abs() < 1e-12);
        assert!((rise - 0.1094).abs() < 1e-4);
        for s in &m.segments[1..] {
            let (l, r) = (m.inst_freq(s.t_start - 1e-9), m.inst_freq(s.t_start + 1e-9));
            assert!((l - r).abs() < 1e-10);
            let (l, r) = (
                m.total_phase(s.t_start - 1e-9),
                m.total_phase(s.t_start + 1e-9),
            );
            assert!((l - r).abs() < 1e-5);
        }
        assert!((m.ramp_slope(120.0) + 2.05e-3).abs() < 1e-15);
    }

    #[test]
    fn literal_ramp_convention_scales_slope() {
        let mut m = OscillationModel::table_iii_iv();
        m.ramp_convention = RampConvention::Literal;
        assert!((m.ramp_slope(50.0) - 2.28e-3 / PI).abs() < 1e-15);
    }

    #[test]
    fn steady_oscillation_is_pure_cosine() {
        let m = OscillationModel::steady(1.0, 50.0, 0.3, 1.0);
        let w = synth_oscillation(&m, 5000.0).unwrap();
        for (i, x) in w.samples.iter().enumerate() {
            let t = i as f64 / 5000.0;
            assert!((x - (TAU * 50.0 * t + 0.3).cos()).abs() < 1e-12);
        }
        assert!(synth_oscillation(&m, 90.0).is_err());
    }

    #[test]
    fn envelope_peak() {
        let m = OscillationModel::table_iii_iv();
        assert!((m.envelope(0.0) - 81.167).abs() < 1e-3);
        assert!((m.envelope(0.0) - 71.45 * 1.136).abs() < 1e-12);
    }

    #[test]
    fn step_model_numbers() {
        let m = StepModel::table_vi();
        let ratio = m.post.amplitude / m.pre.amplitude;
        assert!((ratio - 1.0319).abs() < 1e-4);
        assert!((m.pre.phase - m.post.phase - 0.148).abs() < 1e-12);
        assert!(synth_step(&m, 5000.0, 10.0).is_err());
        assert!(synth_step(&m, 5000.0, 20.0).is_ok());
    }

    #[test]
    fn degenerate_step_is_steady() {
        let mut m = StepModel::table_vi();
        m.post = m.pre;
        let w = synth_step(&m, 5000.0, 20.0).unwrap();
        let t = ToneSet::new(50.07, 77.66, vec![ToneComponent {
            harm_index: 1.0,
            norm_amplitude: 1.0,
            phase: 1.032,
        }])
        .unwrap();
        for (i, x) in w.samples.iter().enumerate().step_by(97) {
            let tt = i as f64 / 5000.0;
            let y: f64 = t.tones().map(|(f, a, p)| a * (TAU * f * tt + p).cos()).sum();
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn step_switches_at_nearest_sample() {
        let mut m = StepModel::table_vi();
        m.t_step = 14.00009; // nearest sample is 70000
        let w = synth_step(&m, 5000.0, 20.0).unwrap();
        let t = 70000.0 / 5000.0;
        let post = 80.14 * (TAU * 50.07 * t + 0.884).cos();
        assert!((w.samples[70000] - post).abs() < 1e-9);
        let t = 69999.0 / 5000.0;
        let pre = 77.66 * (TAU * 50.07 * t + 1.032).cos();
        assert!((w.samples[69999] - pre).abs() < 1e-9);
    }

    #[test]
    fn noise_disabled_is_identity() {
        let w = synth_multitone(&ToneSet::pure(50.0, 1.0), 5000.0, 0.1).unwrap();
        assert_eq!(add_noise(&w, Decibels::Infinite, 3).unwrap(), w);
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let w = synth_multitone(&ToneSet::pure(50.0, 1.0), 5000.0, 0.1).unwrap();
        let a = add_noise(&w, Decibels::Finite(40.0), 9).unwrap();
        let b = add_noise(&w, Decibels::Finite(40.0), 9).unwrap();
        let c = add_noise(&w, Decibels::Finite(40.0), 10).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_ne!(a.samples, c.samples);
        assert_eq!(a.seed, Some(9));
    }

    #[test]
    fn realized_snr_one_second() {
        // sample-variance estimate over N = 5000: relative std ~ sqrt(2/N) = 2 %
        let w = synth_multitone(&ToneSet::pure(50.0, 1.0), 5000.0, 1.0).unwrap();
        for seed in 0..5 {
            let y = add_noise(&w, Decibels::Finite(60.0), seed).unwrap();
            let pn: f64 = y
                .samples
                .iter()
                .zip(&w.samples)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / 5000.0;
            let snr = 10.0 * (w.power() / pn).log10();
            assert!((snr - 60.0).abs() < 0.3, "seed {seed}: {snr}");
        }
    }
}
