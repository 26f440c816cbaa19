//! Interpolated-DFT estimators of a dominant tone.
//!
//! The plain interpolation reads `(k, delta)` from three bins; the e-IpDFT
//! then iteratively removes the tone's own negative-frequency image from
//! those bins, and the i-IpDFT additionally estimates and removes the
//! strongest remaining interferer.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectrum::{amplitude_factor, bin_at, interp_delta, tone_bin, SpectrumAnalyzer};
use crate::error::{Error, Result};

/// Parameters of one interpolated tone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneEstimate {
    pub freq: f64,
    pub amplitude: f64,
    /// Phase at the window midpoint, rad.
    pub phase: f64,
    pub bin: usize,
    pub delta: f64,
    /// False when `delta` left (-0.5, 0.5) or the peak was not a local maximum.
    pub converged: bool,
}

impl ToneEstimate {
    /// Fractional bin position `k + delta`.
    pub fn lambda(&self) -> f64 {
        self.bin as f64 + self.delta
    }

    /// Contribution of this tone (both spectral lines) at bin `k`.
    pub fn bin_value(&self, k: f64, n: usize) -> Complex64 {
        tone_bin(self.amplitude, self.phase, self.lambda(), k, n)
    }
}

/// Bin range searched for the fundamental: `f_nominal +- f_nominal / 2`.
pub fn search_band(n: usize, fs: f64, f_nominal: f64) -> (usize, usize) {
    let res = fs / n as f64;
    let lo = ((0.5 * f_nominal / res).ceil() as usize).max(1);
    let hi = ((1.5 * f_nominal / res).floor() as usize).min(n / 2 - 1);
    (lo, hi.max(lo))
}

/// Largest-magnitude bin in `lo..=hi`, and whether it is a local maximum of the full spectrum.
pub fn peak_bin(spec: &[Complex64], lo: usize, hi: usize) -> (usize, bool) {
    let k = (lo..=hi)
        .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
        .expect("non-empty band");
    let m = spec[k].norm();
    let local = k >= 1 && k + 1 < spec.len() && spec[k - 1].norm() <= m && spec[k + 1].norm() <= m;
    (k, local)
}

/// Rule mapping bin magnitudes to the fractional offset `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// `2 (|X+| - |X-|) / (|X-| + 2|X0| + |X+|)`.
    ThreePoint,
    /// Hann two-point ratio on the peak and its larger neighbour.
    #[default]
    TwoPoint,
}

impl Interpolation {
    pub fn delta(self, prev: f64, peak: f64, next: f64) -> f64 {
        match self {
            Interpolation::ThreePoint => interp_delta(prev, peak, next),
            Interpolation::TwoPoint => {
                if !(peak > 0.0) {
                    return 0.0;
                }
                let (eps, side) = if next > prev { (1.0, next) } else { (-1.0, prev) };
                let alpha = side / peak;
                eps * (2.0 * alpha - 1.0) / (alpha + 1.0)
            }
        }
    }
}

/// Interpolates from the bins `k-1, k, k+1`.
pub fn interpolate(
    bins: [Complex64; 3],
    k: usize,
    fs: f64,
    n: usize,
    rule: Interpolation,
) -> ToneEstimate {
    let delta = rule.delta(bins[0].norm(), bins[1].norm(), bins[2].norm());
    let amplitude = bins[1].norm() * amplitude_factor(delta);
    let converged = delta.is_finite() && delta.abs() < 0.5 && amplitude.is_finite();
    ToneEstimate {
        freq: (k as f64 + delta) * fs / n as f64,
        amplitude,
        phase: bins[1].arg(),
        bin: k,
        delta,
        converged,
    }
}

fn triple(spec: &[Complex64], k: usize) -> [Complex64; 3] {
    let k = k as isize;
    [bin_at(spec, k - 1), bin_at(spec, k), bin_at(spec, k + 1)]
}

/// Iteratively removes the estimate's own image from `bins` and re-interpolates.
pub fn compensate_image(
    bins: [Complex64; 3],
    first: ToneEstimate,
    fs: f64,
    n: usize,
    iterations: usize,
    rule: Interpolation,
) -> ToneEstimate {
    let k = first.bin;
    let mut est = first;
    for _ in 0..iterations {
        let lambda = est.lambda();
        let image = Complex64::from_polar(0.5 * est.amplitude, -est.phase);
        let mut y = bins;
        for (i, b) in y.iter_mut().enumerate() {
            let kk = (k + i) as f64 - 1.0;
            *b -= image * super::spectrum::kernel(kk + lambda, n);
        }
        let next = interpolate(y, k, fs, n, rule);
        est = ToneEstimate {
            converged: next.converged && first.converged,
            ..next
        };
    }
    est
}

/// Plain three-point IpDFT on one window.
pub fn ipdft_core(window: &[f64], fs: f64, f_nominal: f64) -> Result<ToneEstimate> {
    let (spec, n) = analyze(window)?;
    let (lo, hi) = search_band(n, fs, f_nominal);
    Ok(core_on(&spec, lo, hi, fs, n, Interpolation::ThreePoint))
}

fn analyze(window: &[f64]) -> Result<(Vec<Complex64>, usize)> {
    let a = SpectrumAnalyzer::new(window.len())?;
    if window.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("window contains non-finite samples"));
    }
    Ok((a.spectrum(window), window.len()))
}

pub(crate) fn core_on(
    spec: &[Complex64],
    lo: usize,
    hi: usize,
    fs: f64,
    n: usize,
    rule: Interpolation,
) -> ToneEstimate {
    let (k, local) = peak_bin(spec, lo, hi);
    let mut est = interpolate(triple(spec, k), k, fs, n, rule);
    est.converged &= local;
    est
}

/// e-IpDFT on one window with `iterations` image-compensation passes.
pub fn e_ipdft(
    window: &[f64],
    fs: f64,
    f_nominal: f64,
    iterations: usize,
    rule: Interpolation,
) -> Result<ToneEstimate> {
    let (spec, n) = analyze(window)?;
    let (lo, hi) = search_band(n, fs, f_nominal);
    Ok(e_ipdft_on(&spec, lo, hi, fs, n, iterations, rule))
}

pub(crate) fn e_ipdft_on(
    spec: &[Complex64],
    lo: usize,
    hi: usize,
    fs: f64,
    n: usize,
    iterations: usize,
    rule: Interpolation,
) -> ToneEstimate {
    let first = core_on(spec, lo, hi, fs, n, rule);
    compensate_image(triple(spec, first.bin), first, fs, n, iterations, rule)
}

/// Settings of the interference-compensating loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfererSettings {
    pub image_iterations: usize,
    pub max_iterations: usize,
    /// Minimum interferer-to-fundamental energy ratio for acceptance.
    pub energy_threshold: f64,
    /// When set, interferers are only searched outside this band (Hz).
    pub exclude_band: Option<(f64, f64)>,
    pub rule: Interpolation,
}

/// Fundamental and (if one was accepted) the compensated interferer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceFit {
    pub fundamental: ToneEstimate,
    pub interferer: Option<ToneEstimate>,
}

pub fn i_ipdft(
    window: &[f64],
    fs: f64,
    f_nominal: f64,
    settings: &InterfererSettings,
) -> Result<InterferenceFit> {
    let (spec, n) = analyze(window)?;
    let (lo, hi) = search_band(n, fs, f_nominal);
    Ok(i_ipdft_on(&spec, lo, hi, fs, n, settings))
}

pub(crate) fn i_ipdft_on(
    spec: &[Complex64],
    lo: usize,
    hi: usize,
    fs: f64,
    n: usize,
    s: &InterfererSettings,
) -> InterferenceFit {
    let mut fund = e_ipdft_on(spec, lo, hi, fs, n, s.image_iterations, s.rule);
    let k0 = fund.bin;
    let res = fs / n as f64;
    let mut interferer = None;
    let mut resid = vec![Complex64::new(0.0, 0.0); spec.len()];
    for _ in 0..s.max_iterations {
        for (k, r) in resid.iter_mut().enumerate() {
            *r = spec[k] - fund.bin_value(k as f64, n);
        }
        let allowed = |k: usize| {
            k.abs_diff(k0) > 1
                && s.exclude_band
                    .is_none_or(|(a, b)| !((a..=b).contains(&(k as f64 * res))))
        };
        let Some(ki) = (1..n / 2)
            .filter(|&k| allowed(k))
            .max_by(|&a, &b| resid[a].norm().total_cmp(&resid[b].norm()))
        else {
            break;
        };
        let bins = triple(&resid, ki);
        let first = interpolate(bins, ki, fs, n, s.rule);
        let it = compensate_image(bins, first, fs, n, s.image_iterations, s.rule);
        if !(it.amplitude * it.amplitude > s.energy_threshold * fund.amplitude * fund.amplitude) {
            break;
        }
        let mut z = triple(spec, k0);
        for (i, b) in z.iter_mut().enumerate() {
            *b -= it.bin_value((k0 + i) as f64 - 1.0, n);
        }
        let first = interpolate(z, k0, fs, n, s.rule);
        let next = compensate_image(z, first, fs, n, s.image_iterations, s.rule);
        let settled = (next.freq - fund.freq).abs() < 1e-9 * fs;
        fund = ToneEstimate {
            converged: next.converged && fund.converged,
            ..next
        };
        interferer = Some(it);
        if settled {
            break;
        }
    }
    InterferenceFit {
        fundamental: fund,
        interferer,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const FS: f64 = 5000.0;

    fn tone(n: usize, f: f64, a: f64, ph: f64) -> Vec<f64> {
        (0..n)
            .map(|i| a * (2.0 * PI * f * (i as f64 - n as f64 / 2.0) / FS + ph).cos())
            .collect()
    }

    #[test]
    fn band_limits() {
        assert_eq!(search_band(300, FS, 50.0), (2, 4));
        assert_eq!(search_band(500, FS, 50.0), (3, 7));
    }

    #[test]
    fn bin_centred_is_exact() {
        let x = tone(500, 50.0, 2.0, 0.3);
        let e = ipdft_core(&x, FS, 50.0).unwrap();
        assert_eq!(e.bin, 5);
        assert!(e.delta.abs() < 1e-12);
        assert!((e.freq - 50.0).abs() < 1e-10);
        assert!((e.amplitude - 2.0).abs() < 1e-12);
        assert!((e.phase - 0.3).abs() < 1e-12);
        let c = e_ipdft(&x, FS, 50.0, 2, Interpolation::default()).unwrap();
        assert!((c.freq - e.freq).abs() < 1e-9);
        assert!((c.amplitude - e.amplitude).abs() < 1e-9);
    }

    #[test]
    fn image_compensation_reduces_bias() {
        for &n in &[300usize, 500] {
            for &f in &[47.1, 49.3, 50.7, 52.9] {
                let x = tone(n, f, 1.0, 0.4);
                let raw = ipdft_core(&x, FS, 50.0).unwrap();
                let comp = e_ipdft(&x, FS, 50.0, 2, Interpolation::default()).unwrap();
                assert!(comp.converged);
                assert!((comp.freq - f).abs() < 1e-3, "n={n} f={f} {}", comp.freq);
                assert!((comp.freq - f).abs() <= (raw.freq - f).abs());
                assert!((comp.amplitude - 1.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn interferer_is_removed() {
        let n = 500;
        let x: Vec<f64> = tone(n, 50.0, 1.0, 0.2)
            .iter()
            .zip(tone(n, 81.25, 0.075, 1.1))
            .map(|(a, b)| a + b)
            .collect();
        let s = InterfererSettings {
            image_iterations: 2,
            max_iterations: 3,
            energy_threshold: 1e-3,
            exclude_band: None,
            rule: Interpolation::default(),
        };
        let e = e_ipdft(&x, FS, 50.0, 2, Interpolation::default()).unwrap();
        let i = i_ipdft(&x, FS, 50.0, &s).unwrap();
        let it = i.interferer.expect("interferer detected");
        assert!((it.freq - 81.25).abs() < 0.5, "{}", it.freq);
        let (ee, ei) = ((e.freq - 50.0).abs(), (i.fundamental.freq - 50.0).abs());
        assert!(ei * 10.0 < ee, "e {ee} i {ei}");
    }

    #[test]
    fn pure_tone_has_no_interferer() {
        let x = tone(300, 49.3, 1.0, 0.0);
        let s = InterfererSettings {
            image_iterations: 2,
            max_iterations: 3,
            energy_threshold: 1e-3,
            exclude_band: None,
            rule: Interpolation::default(),
        };
        let i = i_ipdft(&x, FS, 50.0, &s).unwrap();
        assert!(i.interferer.is_none());
        let e = e_ipdft(&x, FS, 50.0, 2, Interpolation::default()).unwrap();
        assert_eq!(i.fundamental, e);
    }

    #[test]
    fn off_band_peak_is_flagged() {
        // strongest content at 20 Hz, outside the 25-75 Hz search band
        let x = tone(500, 20.0, 1.0, 0.0);
        let e = ipdft_core(&x, FS, 50.0).unwrap();
        assert!(!e.converged);
    }
}
