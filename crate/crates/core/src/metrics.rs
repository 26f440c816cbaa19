//! Error statistics, empirical CDFs, the nRMSE reliability index and
//! threshold-based transient flags.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::PhasorEstimate;
use crate::truth::ReferenceSeries;
use crate::waveform::Waveform;

/// Signed-error summary of an estimate stream against its reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std: f64,
    /// 95th percentile of |error|.
    pub p95_abs: f64,
    /// `None` when either series is constant.
    pub pearson: Option<f64>,
    pub n: usize,
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

/// Pearson correlation; `None` for constant or too-short input.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 || is_constant(a) || is_constant(b) {
        return None;
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let den = (saa * sbb).sqrt();
    (den > 0.0).then(|| (sab / den).clamp(-1.0, 1.0))
}

/// Index (1-based) of the `ceil(q n)`-th order statistic.
fn order_rank(q: f64, n: usize) -> usize {
    // the guard absorbs representation error in q * n (0.95 * 20 = 19.000000000000004)
    let r = (q * n as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(n)
}

/// Statistics of `e = est - reference`.
pub fn rfe_stats(est: &[f64], reference: &[f64]) -> Result<ErrorStats> {
    if est.len() != reference.len() {
        return Err(Error::invalid(format!(
            "estimate and reference lengths differ ({} vs {})",
            est.len(),
            reference.len()
        )));
    }
    let n = est.len();
    if n < 2 {
        return Err(Error::invalid("error statistics need at least two pairs"));
    }
    if est.iter().chain(reference).any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite value in scored series"));
    }
    let e: Vec<f64> = est.iter().zip(reference).map(|(a, b)| a - b).collect();
    let m = mean(&e);
    let mut ss = 0.0;
    for v in &e {
        ss += (v - m) * (v - m);
    }
    let cdf = EmpiricalCdf::new(&e)?;
    Ok(ErrorStats {
        mean: m,
        std: (ss / (n - 1) as f64).sqrt(),
        p95_abs: cdf.quantile(0.95),
        pearson: pearson(est, reference),
        n,
    })
}

/// Pairs scorable estimates with reference values at the same instant.
///
/// Estimates with flags or without ROCOF, and reference points with an
/// undefined ROCOF, are dropped pairwise.
pub fn paired_rocof(
    est: &[PhasorEstimate],
    reference: &ReferenceSeries,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let tol = 1e-6 * reference.period().max(1e-3);
    let mut j = 0;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for e in est {
        while j < reference.len() && reference.t[j] < e.t_mid - tol {
            j += 1;
        }
        if j == reference.len() {
            break;
        }
        if (reference.t[j] - e.t_mid).abs() > tol {
            continue;
        }
        if let (true, Some(r), Some(x)) = (e.scorable(), reference.rocof[j], e.rocof) {
            a.push(x);
            b.push(r);
        }
    }
    if a.is_empty() {
        return Err(Error::invalid("no estimate instant matches the reference grid"));
    }
    Ok((a, b))
}

/// Step CDF of error magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::invalid("empirical CDF of an empty sample"));
        }
        let mut sorted: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
        if sorted.iter().any(|v| v.is_nan()) {
            return Err(Error::numerical("NaN in CDF sample"));
        }
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of magnitudes `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    /// The `ceil(q n)`-th order statistic, `q` clamped to [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        self.sorted[order_rank(q, self.sorted.len()) - 1]
    }

    /// Two-column `x,F` dump, one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,F")?;
        let n = self.sorted.len() as f64;
        for (i, x) in self.sorted.iter().enumerate() {
            writeln!(out, "{},{}", x, (i + 1) as f64 / n)?;
        }
        Ok(())
    }
}

/// Residual energy over window energy, in ppm.
pub fn nrmse(window: &[f64], est: &PhasorEstimate, fs: f64) -> Result<f64> {
    let n = window.len();
    let half = n as f64 / 2.0;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, x) in window.iter().enumerate() {
        let r = x - est.reconstruct((i as f64 - half) / fs);
        num += r * r;
        den += x * x;
    }
    if !(den > 0.0) {
        return Err(Error::invalid("nRMSE of a zero-energy window"));
    }
    Ok(1e6 * num / den)
}

/// Per-window nRMSE with summary figures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NrmseReport {
    pub per_window: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

impl NrmseReport {
    pub fn from_values(per_window: Vec<f64>) -> Result<Self> {
        if per_window.is_empty() {
            return Err(Error::invalid("nRMSE report of an empty stream"));
        }
        let m = mean(&per_window);
        let std = if per_window.len() > 1 {
            let ss: f64 = per_window.iter().map(|v| (v - m) * (v - m)).sum();
            (ss / (per_window.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let max = per_window.iter().copied().fold(0.0, f64::max);
        Ok(NrmseReport {
            per_window,
            mean: m,
            std,
            max,
        })
    }

    /// Summary over the entries whose window midpoint lies in `[t0, t1)`.
    pub fn slice(&self, est: &[PhasorEstimate], t0: f64, t1: f64) -> Result<NrmseReport> {
        NrmseReport::from_values(
            est.iter()
                .zip(&self.per_window)
                .filter(|(e, _)| e.t_mid >= t0 && e.t_mid < t1)
                .map(|(_, v)| *v)
                .collect(),
        )
    }
}

/// Computes nRMSE for each estimate (stored into `nrmse_ppm`) from the record it came from.
pub fn nrmse_stream(
    w: &Waveform,
    est: &mut [PhasorEstimate],
    window_len: usize,
) -> Result<NrmseReport> {
    let mut vals = Vec::with_capacity(est.len());
    for e in est.iter_mut() {
        let end = e.start + window_len;
        if end > w.len() {
            return Err(Error::invalid("estimate window extends past the record"));
        }
        let v = nrmse(&w.samples[e.start..end], e, w.fs)?;
        e.nrmse_ppm = Some(v);
        vals.push(v);
    }
    NrmseReport::from_values(vals)
}

/// Transient-detection threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Ppm(f64),
    /// Never fires.
    Never,
}

impl Threshold {
    /// Steady-state maximum scaled by `1 + margin`.
    pub fn calibrate(steady: &[f64], margin: f64) -> Result<Threshold> {
        if steady.is_empty() {
            return Err(Error::invalid("threshold calibration needs steady-state values"));
        }
        if !(margin >= 0.0) {
            return Err(Error::invalid("margin must be non-negative"));
        }
        let max = steady.iter().copied().fold(0.0, f64::max);
        Ok(Threshold::Ppm(max * (1.0 + margin)))
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Ppm(v) => write!(f, "{v} ppm"),
            Threshold::Never => f.write_str("never"),
        }
    }
}

/// True where the nRMSE exceeds the threshold.
pub fn detect_transient(stream: &[f64], threshold: Threshold) -> Result<Vec<bool>> {
    match threshold {
        Threshold::Never => Ok(vec![false; stream.len()]),
        Threshold::Ppm(th) if th > 0.0 => Ok(stream.iter().map(|v| *v > th).collect()),
        Threshold::Ppm(th) => Err(Error::invalid(format!("threshold must be positive, got {th}"))),
    }
}

/// One line of a statistics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub dataset: String,
    pub algorithm: String,
    pub class: String,
    pub rocof_mode: String,
    pub stats: ErrorStats,
}

pub fn write_stats_csv<W: Write>(rows: &[StatsRow], mut out: W) -> Result<()> {
    writeln!(out, "dataset,algorithm,class,rocof_mode,mean,std,p95,pearson,n")?;
    for r in rows {
        let p = r.stats.pearson.map_or_else(|| "undefined".to_owned(), |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.dataset, r.algorithm, r.class, r.rocof_mode, r.stats.mean, r.stats.std, r.stats.p95_abs, p, r.stats.n
        )?;
    }
    Ok(())
}
