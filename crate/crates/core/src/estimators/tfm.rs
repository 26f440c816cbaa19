//! Taylor-Fourier estimator with greedy component selection.
//!
//! The window is fitted, in the least-squares sense, by
//! `Re{ sum_c p_c(tau) exp(j 2 pi f_c t) }` where `t` is measured from the
//! window midpoint, `tau = t / T_h` with `T_h` the half-window length, and
//! each `p_c` is a complex polynomial. The fundamental carries order `K`;
//! further components (harmonics on the nominal grid and inter-harmonics
//! seeded from residual peaks) are added one at a time by residual-energy
//! gain. Working with real columns keeps every negative-frequency image in
//! the model.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ipdft::{compensate_image, interpolate, Interpolation};
use super::spectrum::{hann, SpectrumAnalyzer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfmSettings {
    /// Taylor order of the fundamental envelope.
    pub order: usize,
    /// Taylor order of every other component.
    pub interferer_order: usize,
    /// Component budget, fundamental included.
    pub max_components: usize,
    pub max_interharmonics: usize,
    /// Highest harmonic index in the dictionary.
    pub harmonics: u32,
    /// Stop once the best gain falls below this fraction of window energy.
    pub min_gain: f64,
    /// Half-width (Hz) around the fundamental kept out of the inter-harmonic search.
    pub passband: f64,
    /// Passes re-estimating seeded inter-harmonic frequencies after selection.
    pub seed_refinements: usize,
    /// Weight the fit with a Hann taper.
    pub taper: bool,
    /// Refit once with the carrier moved to the first frequency estimate.
    pub refine: bool,
    pub condition_limit: f64,
}

impl Default for TfmSettings {
    fn default() -> Self {
        TfmSettings {
            order: 2,
            interferer_order: 0,
            max_components: 7,
            max_interharmonics: 2,
            harmonics: 10,
            min_gain: 1e-6,
            passband: 25.0,
            seed_refinements: 2,
            taper: true,
            refine: true,
            condition_limit: 1e10,
        }
    }
}

/// Fundamental envelope extracted from a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct TfmFit {
    /// Carrier frequency of the fundamental atoms.
    pub f_pre: f64,
    /// Physical envelope coefficients `p(t) = sum_p coeffs[p] t^p`.
    pub coeffs: Vec<Complex64>,
    pub freq: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// Instantaneous ROCOF at the midpoint; `None` for order < 2.
    pub rocof: Option<f64>,
    /// Frequencies of the non-fundamental components retained.
    pub components: Vec<f64>,
    pub condition: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Component {
    freq: f64,
    order: usize,
    /// Inter-harmonic seeded from a residual peak; its frequency is refined.
    seeded: bool,
}

impl Component {
    fn width(&self) -> usize {
        2 * (self.order + 1)
    }
}

struct Design<'a> {
    t: Vec<f64>,
    tau: Vec<f64>,
    weight: Option<Vec<f64>>,
    x: &'a [f64],
}

impl Design<'_> {
    fn columns(&self, c: Component, out: &mut Vec<Vec<f64>>) {
        let n = self.t.len();
        let mut cs = Vec::with_capacity(n);
        let mut sn = Vec::with_capacity(n);
        for &t in &self.t {
            let (s, co) = (TAU * c.freq * t).sin_cos();
            cs.push(co);
            sn.push(-s);
        }
        for p in 0..=c.order {
            let pw = |i: usize| self.tau[i].powi(p as i32) * self.weight.as_ref().map_or(1.0, |w| w[i]);
            out.push((0..n).map(|i| pw(i) * cs[i]).collect());
            out.push((0..n).map(|i| pw(i) * sn[i]).collect());
        }
    }

    fn target(&self) -> DVector<f64> {
        match &self.weight {
            Some(w) => DVector::from_iterator(self.x.len(), self.x.iter().zip(w).map(|(x, w)| x * w)),
            None => DVector::from_column_slice(self.x),
        }
    }

    fn matrix(&self, comps: &[Component]) -> DMatrix<f64> {
        let mut cols = Vec::new();
        for &c in comps {
            self.columns(c, &mut cols);
        }
        DMatrix::from_fn(self.t.len(), cols.len(), |i, j| cols[j][i])
    }

    /// Unweighted model of `comps` with their slice of `coef`.
    fn model(&self, comps: &[Component], coef: &[f64]) -> Vec<f64> {
        let plain = Design {
            t: self.t.clone(),
            tau: self.tau.clone(),
            weight: None,
            x: self.x,
        };
        let a = plain.matrix(comps);
        (a * DVector::from_column_slice(coef)).iter().copied().collect()
    }
}

struct Solved {
    coef: DVector<f64>,
    resid: DVector<f64>,
    condition: f64,
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<Solved> {
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (mx, mn) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let condition = if mn > 0.0 { mx / mn } else { f64::INFINITY };
    let coef = svd.solve(b, 0.0).ok()?;
    let resid = b - a * &coef;
    Some(Solved {
        coef,
        resid,
        condition,
    })
}

/// Energy of `r` captured by the span of one component's columns.
fn gain(design: &Design, c: Component, r: &DVector<f64>) -> f64 {
    let q = design.matrix(&[c]).qr().q();
    (q.transpose() * r).norm_squared()
}

/// Image-compensated interpolation of the peak nearest bin `k`.
fn peak_freq(spec: &[Complex64], k: usize, fs: f64, n: usize) -> f64 {
    let bins = [spec[k - 1], spec[k], spec[k + 1]];
    let first = interpolate(bins, k, fs, n, Interpolation::ThreePoint);
    compensate_image(bins, first, fs, n, 2, Interpolation::ThreePoint).freq
}

/// Up to `count` residual spectral peaks outside the fundamental passband
/// and at least one bin away from every frequency in `avoid`.
fn interharmonic_seeds(
    an: &SpectrumAnalyzer,
    resid: &[f64],
    fs: f64,
    f_fund: f64,
    s: &TfmSettings,
    avoid: &[f64],
    count: usize,
) -> Vec<f64> {
    let n = resid.len();
    let spec = an.spectrum(resid);
    let res = fs / n as f64;
    let mut peaks: Vec<(f64, f64)> = (1..n / 2)
        .filter(|&k| {
            let m = spec[k].norm();
            m >= spec[k - 1].norm() && m >= spec[k + 1].norm()
        })
        .map(|k| (peak_freq(&spec, k, fs, n), spec[k].norm()))
        .filter(|&(f, _)| f > 0.0 && f < 0.5 * fs && (f - f_fund).abs() > s.passband)
        .filter(|&(f, _)| avoid.iter().all(|&h| (f - h).abs() > res))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.truncate(count);
    peaks.into_iter().map(|p| p.0).collect()
}

/// Re-estimates a seeded component from the residual plus its own fitted contribution.
fn refine_seed(an: &SpectrumAnalyzer, isolated: &[f64], f: f64, fs: f64) -> f64 {
    let n = isolated.len();
    let spec = an.spectrum(isolated);
    let k0 = ((f * n as f64 / fs).round() as usize).clamp(1, n / 2 - 1);
    let k = (k0.saturating_sub(1).max(1)..=(k0 + 1).min(n / 2 - 1))
        .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
        .unwrap_or(k0);
    let g = peak_freq(&spec, k, fs, n);
    if g.is_finite() && (g - f).abs() <= fs / n as f64 {
        g
    } else {
        f
    }
}

/// Fits the window around the pre-estimate `f_pre`.
pub fn tfm_fit(x: &[f64], fs: f64, f_nominal: f64, f_pre: f64, s: &TfmSettings) -> TfmFit {
    let n = x.len();
    let half = n as f64 / 2.0;
    let th = half / fs;
    let design = Design {
        t: (0..n).map(|i| (i as f64 - half) / fs).collect(),
        tau: (0..n).map(|i| (i as f64 - half) / half).collect(),
        weight: s.taper.then(|| hann(n).into_iter().map(f64::sqrt).collect()),
        x,
    };
    let b = design.target();
    let energy = b.norm_squared();
    let res = fs / n as f64;

    let harmonics: Vec<f64> = (2..=s.harmonics)
        .map(|h| h as f64 * f_nominal)
        .filter(|&f| f < 0.5 * fs - res)
        .collect();
    let analyzer = SpectrumAnalyzer::new(n).ok();

    let mut selected = vec![Component {
        freq: f_pre,
        order: s.order,
        seeded: false,
    }];
    let mut fit = solve(&design.matrix(&selected), &b);

    while selected.len() < s.max_components {
        let Some(cur) = &fit else { break };
        let mut cands: Vec<Component> = harmonics
            .iter()
            .filter(|&&f| selected.iter().all(|c| c.freq != f))
            .map(|&f| Component {
                freq: f,
                order: s.interferer_order,
                seeded: false,
            })
            .collect();
        let seeded = selected.iter().filter(|c| c.seeded).count();
        if let (Some(an), true) = (&analyzer, seeded < s.max_interharmonics) {
            let model = design.model(&selected, cur.coef.as_slice());
            let r: Vec<f64> = x.iter().zip(&model).map(|(a, m)| a - m).collect();
            let avoid: Vec<f64> = harmonics
                .iter()
                .copied()
                .chain(selected.iter().map(|c| c.freq))
                .collect();
            let seeds = interharmonic_seeds(an, &r, fs, f_pre, s, &avoid, s.max_interharmonics - seeded);
            cands.extend(seeds.into_iter().map(|f| Component {
                freq: f,
                order: s.interferer_order,
                seeded: true,
            }));
        }
        let best = cands
            .iter()
            .enumerate()
            .map(|(i, &c)| (i, gain(&design, c, &cur.resid)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, g)) = best else { break };
        if !(g > s.min_gain * energy) {
            break;
        }
        selected.push(cands[i]);
        fit = solve(&design.matrix(&selected), &b);
    }

    if let Some(an) = &analyzer {
        for _ in 0..s.seed_refinements {
            let Some(cur) = &fit else { break };
            if !selected.iter().any(|c| c.seeded) {
                break;
            }
            let coef = cur.coef.as_slice();
            let model = design.model(&selected, coef);
            let mut off = 0;
            let mut moved = selected.clone();
            for (j, c) in selected.iter().enumerate() {
                if c.seeded {
                    let own = design.model(&[*c], &coef[off..off + c.width()]);
                    let iso: Vec<f64> = (0..n).map(|i| x[i] - model[i] + own[i]).collect();
                    moved[j].freq = refine_seed(an, &iso, c.freq, fs);
                }
                off += c.width();
            }
            selected = moved;
            fit = solve(&design.matrix(&selected), &b);
        }
    }

    let mut out = extract(fit.as_ref(), f_pre, th, s);
    if s.refine && out.converged && (out.freq - f_pre).abs() > 0.0 {
        selected[0].freq = out.freq;
        let again = solve(&design.matrix(&selected), &b);
        let refined = extract(again.as_ref(), out.freq, th, s);
        if refined.converged {
            out = refined;
        }
    }
    out.components = selected[1..].iter().map(|c| c.freq).collect();
    out
}

fn extract(fit: Option<&Solved>, f_pre: f64, th: f64, s: &TfmSettings) -> TfmFit {
    let failed = TfmFit {
        f_pre,
        coeffs: Vec::new(),
        freq: f_pre,
        amplitude: 0.0,
        phase: 0.0,
        rocof: None,
        components: Vec::new(),
        condition: f64::INFINITY,
        converged: false,
    };
    let Some(fit) = fit else { return failed };
    let coeffs: Vec<Complex64> = (0..=s.order)
        .map(|p| Complex64::new(fit.coef[2 * p], fit.coef[2 * p + 1]) / th.powi(p as i32))
        .collect();
    let p0 = coeffs[0];
    if !(p0.norm() > 0.0) {
        return TfmFit {
            condition: fit.condition,
            ..failed
        };
    }
    let r1 = coeffs.get(1).map_or(Complex64::new(0.0, 0.0), |p1| p1 / p0);
    let freq = f_pre + r1.im / TAU;
    let rocof = coeffs.get(2).map(|p2| (2.0 * p2 / p0 - r1 * r1).im / TAU);
    let converged = fit.condition <= s.condition_limit
        && freq.is_finite()
        && rocof.is_none_or(f64::is_finite);
    TfmFit {
        f_pre,
        freq,
        amplitude: p0.norm(),
        phase: p0.arg(),
        rocof,
        coeffs,
        components: Vec::new(),
        condition: fit.condition,
        converged,
    }
}

/// Evaluates the fitted fundamental `Re{p(t) exp(j 2 pi f_pre t)}` at offset `t` from the midpoint.
pub fn envelope_value(f_pre: f64, coeffs: &[Complex64], t: f64) -> f64 {
    envelope(coeffs, t).re * (TAU * f_pre * t).cos() - envelope(coeffs, t).im * (TAU * f_pre * t).sin()
}

/// Complex envelope `p(t)`.
pub fn envelope(coeffs: &[Complex64], t: f64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c)
}

/// Unwrapped total phase `arg p(t) + 2 pi f_pre t` of the fitted fundamental.
pub fn fitted_phase(f_pre: f64, coeffs: &[Complex64], t: f64) -> f64 {
    let p0 = coeffs[0];
    (envelope(coeffs, t) / p0).arg() + p0.arg() + TAU * f_pre * t
}
