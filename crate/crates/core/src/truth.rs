//! Reference frequency and ROCOF series for scoring estimators.
//!
//! For the multitone scenario the reference is the instantaneous frequency
//! of the in-band analytic sum `z(t) = sum_k A_k exp(j(2 pi f_k t + theta_k))`,
//! i.e. the fundamental merged with its inter-modulation tones; out-of-band
//! tones are disturbances and take no part in it. ROCOF references follow the
//! reporting-rate incremental ratio.

use std::f64::consts::TAU;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::wavegen::{OscillationModel, ToneSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    Analytic,
    NumericDifferentiation,
}

/// How [`instantaneous_frequency`] differentiates the analytic-sum phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Differentiation {
    /// Closed form `Im(z' / z) / 2 pi`.
    Analytic,
    /// Five-point central stencil on the phase sampled at `fs`.
    Numeric { fs: f64 },
}

/// Reference values at reporting instants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSeries {
    pub t: Vec<f64>,
    pub freq: Vec<f64>,
    /// `None` where the reference is undefined (first incremental ratio).
    pub rocof: Vec<Option<f64>>,
    pub source: ReferenceSource,
}

impl ReferenceSeries {
    pub fn new(
        t: Vec<f64>,
        freq: Vec<f64>,
        rocof: Vec<Option<f64>>,
        source: ReferenceSource,
    ) -> Result<Self> {
        if t.len() != freq.len() || t.len() != rocof.len() {
            return Err(Error::invalid("reference columns differ in length"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("reference timestamps must increase strictly"));
        }
        if t.len() > 2 {
            let p0 = t[1] - t[0];
            if t.windows(2).any(|w| ((w[1] - w[0]) - p0).abs() > 1e-6 * p0) {
                return Err(Error::invalid("reference reporting period is not constant"));
            }
        }
        Ok(ReferenceSeries {
            t,
            freq,
            rocof,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Reporting period (0 for single-point series).
    pub fn period(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[1] - self.t[0]
        }
    }

    /// Frequency `f` and ROCOF 0 at every instant.
    pub fn constant(t_grid: &[f64], f: f64) -> Result<Self> {
        ReferenceSeries::new(
            t_grid.to_vec(),
            vec![f; t_grid.len()],
            vec![Some(0.0); t_grid.len()],
            ReferenceSource::Analytic,
        )
    }

    /// In-band instantaneous frequency of `tones` on `t_grid`, with ROCOF as
    /// the incremental ratio at the grid period.
    pub fn multitone(tones: &ToneSet, t_grid: &[f64], method: Differentiation) -> Result<Self> {
        let band = tones.in_band()?;
        let freq = instantaneous_frequency(&band, t_grid, method)?;
        let tr = grid_period(t_grid)?;
        let rocof = rocof_reference(&freq, tr)?;
        let source = match method {
            Differentiation::Analytic => ReferenceSource::Analytic,
            Differentiation::Numeric { .. } => ReferenceSource::NumericDifferentiation,
        };
        ReferenceSeries::new(t_grid.to_vec(), freq, rocof, source)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,freq,rocof")?;
        for i in 0..self.len() {
            match self.rocof[i] {
                Some(r) => writeln!(out, "{},{},{}", self.t[i], self.freq[i], r)?,
                None => writeln!(out, "{},{},", self.t[i], self.freq[i])?,
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, origin: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = input.lines().enumerate().filter(|(_, l)| {
            l.as_ref()
                .map(|s| !s.trim().is_empty() && !s.starts_with('#'))
                .unwrap_or(true)
        });
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        let header = header?;
        if header.trim() != "t,freq,rocof" {
            return Err(perr(hl + 1, format!("expected header t,freq,rocof, got {header:?}")));
        }
        let (mut t, mut freq, mut rocof) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            let line = line?;
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(perr(i + 1, format!("expected 3 columns, got {}", cols.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| perr(i + 1, format!("{s:?}: {e}")))
            };
            t.push(num(cols[0])?);
            freq.push(num(cols[1])?);
            rocof.push(match cols[2] {
                "" | "nan" | "NaN" => None,
                s => Some(num(s)?),
            });
        }
        ReferenceSeries::new(t, freq, rocof, ReferenceSource::Analytic)
    }
}

fn grid_period(t_grid: &[f64]) -> Result<f64> {
    if t_grid.len() < 2 {
        return Err(Error::invalid("reference grid needs at least two instants"));
    }
    Ok(t_grid[1] - t_grid[0])
}

fn check_narrowband(narrowband: &ToneSet) -> Result<Vec<(f64, f64, f64)>> {
    let f_sys = narrowband.system_freq;
    let (lo, hi) = (0.9 * f_sys, 1.1 * f_sys);
    let tones: Vec<_> = narrowband.tones().collect();
    if let Some(&(f, _, _)) = tones.iter().find(|&&(f, _, _)| f < lo || f > hi) {
        return Err(Error::invalid(format!(
            "component at {f} Hz lies outside the fundamental band [{lo}, {hi}] Hz"
        )));
    }
    // |z| >= A_1 - sum(others) > 0 keeps the phase defined everywhere
    let fund = narrowband.fundamental().norm_amplitude * narrowband.fundamental_amplitude;
    let others: f64 = tones.iter().map(|t| t.1).sum::<f64>() - fund;
    if !(fund > others) {
        return Err(Error::invalid(
            "in-band envelope can vanish: fundamental does not dominate the other tones",
        ));
    }
    Ok(tones)
}

fn analytic_sum(tones: &[(f64, f64, f64)], t: f64) -> (Complex64, Complex64, Complex64) {
    let mut z = Complex64::new(0.0, 0.0);
    let mut dz = z;
    let mut ddz = z;
    for &(f, a, th) in tones {
        let w = TAU * f;
        let e = Complex64::from_polar(a, w * t + th);
        z += e;
        dz += Complex64::new(0.0, w) * e;
        ddz += -w * w * e;
    }
    (z, dz, ddz)
}

/// Instantaneous frequency of the in-band analytic sum, Hz.
pub fn instantaneous_frequency(
    narrowband: &ToneSet,
    t_grid: &[f64],
    method: Differentiation,
) -> Result<Vec<f64>> {
    let tones = check_narrowband(narrowband)?;
    Ok(match method {
        Differentiation::Analytic => t_grid
            .iter()
            .map(|&t| {
                let (z, dz, _) = analytic_sum(&tones, t);
                (dz / z).im / TAU
            })
            .collect(),
        Differentiation::Numeric { fs } => {
            let h = 1.0 / fs;
            t_grid
                .iter()
                .map(|&t| {
                    let psi = rel_phases(&tones, t, h);
                    (-psi[4] + 8.0 * psi[3] - 8.0 * psi[1] + psi[0]) / (12.0 * h) / TAU
                })
                .collect()
        }
    })
}

/// Instantaneous ROCOF of the in-band analytic sum, Hz/s.
pub fn instantaneous_rocof(
    narrowband: &ToneSet,
    t_grid: &[f64],
    method: Differentiation,
) -> Result<Vec<f64>> {
    let tones = check_narrowband(narrowband)?;
    Ok(match method {
        Differentiation::Analytic => t_grid
            .iter()
            .map(|&t| {
                let (z, dz, ddz) = analytic_sum(&tones, t);
                let r = dz / z;
                (ddz / z - r * r).im / TAU
            })
            .collect(),
        Differentiation::Numeric { fs } => {
            let h = 1.0 / fs;
            t_grid
                .iter()
                .map(|&t| {
                    let psi = rel_phases(&tones, t, h);
                    (-psi[4] + 16.0 * psi[3] - 30.0 * psi[2] + 16.0 * psi[1] - psi[0])
                        / (12.0 * h * h)
                        / TAU
                })
                .collect()
        }
    })
}

/// Phase of `z(t + k h)` relative to `z(t)` for k = -2..=2.
fn rel_phases(tones: &[(f64, f64, f64)], t: f64, h: f64) -> [f64; 5] {
    let z0 = analytic_sum(tones, t).0;
    let mut out = [0.0; 5];
    for (i, k) in (-2i32..=2).enumerate() {
        let z = analytic_sum(tones, t + k as f64 * h).0;
        out[i] = (z * z0.conj()).arg();
    }
    out
}

/// Incremental ratio `(f[n] - f[n-1]) / tr`; the first entry is undefined.
pub fn rocof_reference(freq: &[f64], tr: f64) -> Result<Vec<Option<f64>>> {
    if freq.len() < 2 {
        return Err(Error::invalid("ROCOF reference needs at least two frequency points"));
    }
    if !(tr > 0.0) {
        return Err(Error::invalid("reporting period must be positive"));
    }
    Ok(std::iter::once(None)
        .chain(freq.windows(2).map(|w| Some((w[1] - w[0]) / tr)))
        .collect())
}

/// Analytic frequency and ROCOF of the oscillation model.
pub fn oscillation_reference(model: &OscillationModel, t_grid: &[f64]) -> Result<ReferenceSeries> {
    model.validate()?;
    let (freq, rocof) = model.inst_freq_rocof(t_grid);
    ReferenceSeries::new(
        t_grid.to_vec(),
        freq,
        rocof.into_iter().map(Some).collect(),
        ReferenceSource::Analytic,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavegen::ToneComponent;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn single_tone_is_constant() {
        let t = ToneSet::pure(50.0, 1.0);
        let f = instantaneous_frequency(&t, &grid(50, 0.02), Differentiation::Analytic).unwrap();
        assert!(f.iter().all(|v| (v - 50.0).abs() < 1e-12));
        let r = instantaneous_rocof(&t, &grid(50, 0.02), Differentiation::Analytic).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9));
    }

    fn two_tone() -> ToneSet {
        ToneSet::new(
            50.0,
            1.0,
            vec![ToneComponent::new(1.0, 1.0), ToneComponent::new(0.936, 0.01)],
        )
        .unwrap()
    }

    #[test]
    fn two_tone_closed_form() {
        // z = e^{jw1 t} (1 + a e^{-j dw t}) -> f = f1 - a df (a + cos)/(1 + 2a cos + a^2)
        let tones = two_tone();
        let (a, df) = (0.01, 50.0 * (1.0 - 0.936));
        let ts = grid(400, 0.00173);
        let f = instantaneous_frequency(&tones, &ts, Differentiation::Analytic).unwrap();
        for (t, v) in ts.iter().zip(&f) {
            let c = (TAU * df * t).cos();
            let want = 50.0 - a * df * (a + c) / (1.0 + 2.0 * a * c + a * a);
            assert!((v - want).abs() < 1e-12, "t={t}: {v} vs {want}");
        }
        // periodic with period 1/(50 (1 - 0.936)) = 0.3125 s
        let p = 1.0 / df;
        assert!((p - 0.3125).abs() < 1e-12);
        let shifted: Vec<f64> = ts.iter().map(|t| t + p).collect();
        let g = instantaneous_frequency(&tones, &shifted, Differentiation::Analytic).unwrap();
        for (x, y) in f.iter().zip(&g) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn numeric_matches_closed_form() {
        let tones = two_tone();
        let ts = grid(250, 0.02);
        let m = Differentiation::Numeric { fs: 5000.0 };
        let fa = instantaneous_frequency(&tones, &ts, Differentiation::Analytic).unwrap();
        let fn_ = instantaneous_frequency(&tones, &ts, m).unwrap();
        let ra = instantaneous_rocof(&tones, &ts, Differentiation::Analytic).unwrap();
        let rn = instantaneous_rocof(&tones, &ts, m).unwrap();
        for i in 0..ts.len() {
            assert!((fa[i] - fn_[i]).abs() < 1e-6, "{} {}", fa[i], fn_[i]);
            assert!((ra[i] - rn[i]).abs() < 1e-4, "{} {}", ra[i], rn[i]);
        }
    }

    #[test]
    fn common_phase_offset_is_invisible() {
        let tones = ToneSet::table_i(50.0).in_band().unwrap();
        let mut shifted = tones.clone();
        for c in &mut shifted.components {
            c.phase += 0.77;
        }
        let ts = grid(100, 0.013);
        let a = instantaneous_frequency(&tones, &ts, Differentiation::Analytic).unwrap();
        let b = instantaneous_frequency(&shifted, &ts, Differentiation::Analytic).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn multitone_rocof_range() {
        let tones = ToneSet::table_i(50.0);
        let ts: Vec<f64> = (0..500).map(|i| 0.05 + 0.02 * i as f64).collect();
        let r = ReferenceSeries::multitone(&tones, &ts, Differentiation::Analytic).unwrap();
        assert_eq!(r.rocof[0], None);
        let peak = r.rocof.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 1.5 && peak > 0.8, "peak {peak}");
    }

    #[test]
    fn rejects_out_of_band_and_vanishing_envelope() {
        let t = ToneSet::table_i(50.0);
        assert!(instantaneous_frequency(&t, &[0.0], Differentiation::Analytic).is_err());
        let t = ToneSet::new(
            50.0,
            1.0,
            vec![ToneComponent::new(1.0, 1.0), ToneComponent::new(1.05, 1.0)],
        )
        .unwrap();
        assert!(instantaneous_frequency(&t, &[0.0], Differentiation::Analytic).is_err());
    }

    #[test]
    fn rocof_reference_basics() {
        assert!(rocof_reference(&[50.0], 0.02).is_err());
        let r = rocof_reference(&[50.0; 5], 0.02).unwrap();
        assert_eq!(r[0], None);
        assert!(r[1..].iter().all(|v| *v == Some(0.0)));
        let ramp: Vec<f64> = (0..10).map(|i| 50.0 + 0.02 * i as f64).collect();
        let r = rocof_reference(&ramp, 0.02).unwrap();
        assert!(r[1..].iter().all(|v| (v.unwrap() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn oscillation_reference_values() {
        let flat = OscillationModel::steady(1.0, 50.0, 0.0, 10.0);
        let ts = grid(100, 0.02);
        let r = oscillation_reference(&flat, &ts).unwrap();
        assert!(r.freq.iter().all(|f| *f == 50.0));
        assert!(r.rocof.iter().all(|v| *v == Some(0.0)));

        let m = OscillationModel::table_iii_iv();
        // segment 4 ramp contribution is -2.05 mHz/s
        assert!((m.ramp_slope(120.0) - (-2.05e-3)).abs() < 1e-15);
        let ts: Vec<f64> = (0..2400).map(|i| 30.5 + 0.02 * i as f64).collect();
        let r = oscillation_reference(&m, &ts).unwrap();
        let osc: Vec<f64> = r.rocof.iter().map(|v| v.unwrap() - 2.28e-3).collect();
        let peak = osc.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let want = TAU * 0.0564 * 0.1526 * 0.1526;
        assert!((want - 8.25e-3).abs() < 1e-5);
        assert!((peak - want).abs() < 1e-6, "{peak}");

        for s in &m.segments[1..] {
            let lr = oscillation_reference(&m, &[s.t_start - 1e-9, s.t_start]).unwrap();
            assert!((lr.freq[0] - lr.freq[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_roundtrip() {
        let r = ReferenceSeries::new(
            vec![0.0, 0.02, 0.04],
            vec![50.0, 50.01, 50.0],
            vec![None, Some(0.5), Some(-0.5)],
            ReferenceSource::Analytic,
        )
        .unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let back = ReferenceSeries::read_csv(&buf[..], Path::new("r.csv")).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn series_validation() {
        assert!(ReferenceSeries::new(vec![0.0, 0.0], vec![1.0; 2], vec![None; 2], ReferenceSource::Analytic).is_err());
        assert!(ReferenceSeries::new(vec![0.0, 1.0, 3.0], vec![1.0; 3], vec![None; 3], ReferenceSource::Analytic).is_err());
        assert!(ReferenceSeries::new(vec![0.0], vec![1.0; 2], vec![None; 2], ReferenceSource::Analytic).is_err());
    }
}
