//! Dataset runs and report bundles.
//!
//! A run writes one directory with fixed file names. Every file opens with
//! `#` lines echoing the resolved configuration and carries no timestamp, so
//! two bundles built from the same configuration are byte-identical.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_stream, write_estimates_csv, Algorithm, EstimatorConfig, PhasorEstimate, PmuClass,
    RocofMode, Tunables,
};
use crate::metrics::{
    detect_transient, nrmse_stream, paired_rocof, rfe_stats, write_stats_csv, EmpiricalCdf,
    ErrorStats, NrmseReport, StatsRow, Threshold,
};
use crate::truth::{oscillation_reference, Differentiation, ReferenceSeries};
use crate::uflsim::{
    run_ufls, GridModel, MeasurementSource, NoiseConfig, PllConfig, RelayScheme, SimConfig,
    UflsResult, UflsScenario,
};
use crate::units::Decibels;
use crate::waveform::Waveform;
use crate::wavegen::{
    add_noise, synth_multitone, synth_oscillation, synth_step, OscillationModel, StepModel,
    ToneSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// Multitone record of a distorted transmission grid.
    Dataset1,
    /// Inter-area oscillation on a slow frequency ramp.
    Dataset2,
    /// Islanding maneuver: amplitude and phase step.
    Dataset3,
    Ufls,
    /// A recorded waveform scored against a reference file.
    Custom,
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Dataset1 => "dataset1",
            Dataset::Dataset2 => "dataset2",
            Dataset::Dataset3 => "dataset3",
            Dataset::Ufls => "ufls",
            Dataset::Custom => "custom",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dataset1" | "1" => Ok(Dataset::Dataset1),
            "dataset2" | "2" => Ok(Dataset::Dataset2),
            "dataset3" | "3" => Ok(Dataset::Dataset3),
            "ufls" => Ok(Dataset::Ufls),
            "custom" => Ok(Dataset::Custom),
            other => Err(Error::config(format!("unknown dataset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dataset1Config {
    pub duration: f64,
    /// `None` leaves the record noise-free.
    pub snr_db: Option<f64>,
    pub tones: ToneSet,
}

impl Default for Dataset1Config {
    fn default() -> Self {
        Dataset1Config { duration: 5.0, snr_db: Some(60.0), tones: ToneSet::table_i(50.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dataset2Config {
    pub snr_db: Option<f64>,
    pub model: OscillationModel,
}

impl Default for Dataset2Config {
    fn default() -> Self {
        Dataset2Config { snr_db: Some(60.0), model: OscillationModel::table_iii_iv() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dataset3Config {
    pub duration: f64,
    pub snr_db: Option<f64>,
    /// Harmonic distortion added to both segments (fraction); 0 disables it.
    pub thd: f64,
    pub thd_harmonics: Vec<u32>,
    /// Length of the steady stretch before the step used for calibration, s.
    pub steady_span: f64,
    /// Relative margin over the steady-state maximum.
    pub margin: f64,
    /// Fixed detection threshold in ppm; calibrated from the run when absent.
    pub threshold_ppm: Option<f64>,
    pub model: StepModel,
}

impl Default for Dataset3Config {
    fn default() -> Self {
        Dataset3Config {
            duration: 20.0,
            snr_db: Some(46.24),
            thd: 0.0,
            thd_harmonics: vec![3, 5, 7],
            steady_span: 10.0,
            margin: 0.5,
            threshold_ppm: None,
            model: StepModel::table_vi(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomConfig {
    pub waveform: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UflsConfig {
    /// Carrier SNR, dB; `None` disables noise.
    pub snr_db: Option<f64>,
    /// Inertia values to sweep, s; empty skips the sweep.
    pub sweep_h: Vec<f64>,
    pub grid: GridModel,
    pub sim: SimConfig,
    pub pll: PllConfig,
    /// Relay fed by the PLL chain.
    pub staged_relay: RelayScheme,
    /// Relay fed by both PMU chains.
    pub rocof_relay: RelayScheme,
    pub pmu1: MeasurementSource,
    pub pmu2: MeasurementSource,
}

impl Default for UflsConfig {
    fn default() -> Self {
        UflsConfig {
            snr_db: NoiseConfig::default().snr_db,
            sweep_h: Vec::new(),
            grid: GridModel::default(),
            sim: SimConfig::default(),
            pll: PllConfig::default(),
            staged_relay: RelayScheme::frequency_default(),
            rocof_relay: RelayScheme::rocof_default(),
            pmu1: MeasurementSource::pmu1(),
            pmu2: MeasurementSource::pmu2(),
        }
    }
}

/// Resolved configuration of a run. Every field has a default, so an empty
/// TOML file reproduces the reference experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithms: Vec<Algorithm>,
    pub classes: Vec<PmuClass>,
    pub rocof_modes: Vec<RocofMode>,
    /// Seed of every noise stream of the run.
    pub seed: u64,
    pub fs: f64,
    pub f_nominal: f64,
    pub reporting_rate: f64,
    pub tunables: Tunables,
    pub dataset1: Dataset1Config,
    pub dataset2: Dataset2Config,
    pub dataset3: Dataset3Config,
    pub custom: CustomConfig,
    pub ufls: UflsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithms: Algorithm::ALL.to_vec(),
            classes: PmuClass::ALL.to_vec(),
            rocof_modes: RocofMode::ALL.to_vec(),
            seed: 1,
            fs: 5000.0,
            f_nominal: 50.0,
            reporting_rate: 50.0,
            tunables: Tunables::default(),
            dataset1: Dataset1Config::default(),
            dataset2: Dataset2Config::default(),
            dataset3: Dataset3Config::default(),
            custom: CustomConfig::default(),
            ufls: UflsConfig::default(),
        }
    }
}

/// One (class, algorithm, ROCOF mode) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Combo {
    pub class: PmuClass,
    pub algorithm: Algorithm,
    pub rocof_mode: RocofMode,
}

impl Combo {
    /// File-name stem, e.g. `tfm_M_der`.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.algorithm, self.class, self.rocof_mode)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.classes.is_empty() || self.rocof_modes.is_empty() {
            return Err(Error::config("select at least one algorithm, class and ROCOF mode"));
        }
        if self.combos().is_empty() {
            return Err(Error::config(
                "no valid combination: derivative ROCOF needs a dynamic algorithm",
            ));
        }
        for c in self.combos() {
            self.estimator_config(c, self.fs).validate()?;
        }
        Ok(())
    }

    /// Every selected combination; derivative ROCOF is skipped for static
    /// estimators.
    pub fn combos(&self) -> Vec<Combo> {
        let mut out = Vec::new();
        for &class in &self.classes {
            for &algorithm in &self.algorithms {
                for &rocof_mode in &self.rocof_modes {
                    if rocof_mode == RocofMode::Derivative && !algorithm.is_dynamic() {
                        continue;
                    }
                    let c = Combo { class, algorithm, rocof_mode };
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    pub fn estimator_config(&self, c: Combo, fs: f64) -> EstimatorConfig {
        let mut e = EstimatorConfig::new(c.class, c.algorithm, c.rocof_mode);
        e.fs = fs;
        e.f_nominal = self.f_nominal;
        e.reporting_rate = self.reporting_rate;
        e.tunables = self.tunables;
        e
    }

    /// `#` metadata shared by every file of a bundle.
    pub fn echo(&self, dataset: Dataset) -> Result<Vec<String>> {
        let mut m = vec![format!("rocofbench {} dataset={dataset}", env!("CARGO_PKG_VERSION"))];
        m.extend(self.to_toml()?.lines().filter(|l| !l.is_empty()).map(str::to_owned));
        Ok(m)
    }

    /// Three measurement chains of the comparison with their relays.
    pub fn ufls_scenarios(&self) -> Vec<(&'static str, UflsScenario)> {
        let u = &self.ufls;
        let mk = |measurement: MeasurementSource, relay: &RelayScheme| UflsScenario {
            grid: u.grid.clone(),
            relay: relay.clone(),
            measurement,
            noise: NoiseConfig { snr_db: u.snr_db, seed: self.seed },
            sim: u.sim.clone(),
        };
        vec![
            ("pll", mk(MeasurementSource::Pll { pll: u.pll }, &u.staged_relay)),
            ("pmu1", mk(u.pmu1.clone(), &u.rocof_relay)),
            ("pmu2", mk(u.pmu2.clone(), &u.rocof_relay)),
        ]
    }
}

/// Steady-state and event flags of one nRMSE stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientSummary {
    pub threshold_ppm: f64,
    pub steady_windows: usize,
    pub steady_flagged: usize,
    pub event_windows: usize,
    pub event_flagged: usize,
    pub steady_mean_ppm: f64,
    pub steady_max_ppm: f64,
    /// Largest nRMSE among the windows straddling the step.
    pub event_peak_ppm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComboResult {
    pub combo: Combo,
    pub window_ms: f64,
    pub stats: ErrorStats,
    pub nrmse: NrmseReport,
    pub transient: Option<TransientSummary>,
    pub estimates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub dataset: Dataset,
    pub results: Vec<ComboResult>,
    pub summary: String,
}

impl Report {
    pub fn get(&self, class: PmuClass, algorithm: Algorithm, rocof_mode: RocofMode) -> Option<&ComboResult> {
        let c = Combo { class, algorithm, rocof_mode };
        self.results.iter().find(|r| r.combo == c)
    }
}

type RefFn = Box<dyn Fn(&[f64]) -> Result<ReferenceSeries>>;

fn snr(v: Option<f64>) -> Decibels {
    v.map_or(Decibels::Infinite, Decibels::Finite)
}

/// The record of a dataset and a reference builder for any grid.
fn dataset_input(cfg: &RunConfig, dataset: Dataset) -> Result<(Waveform, RefFn, Option<usize>)> {
    match dataset {
        Dataset::Dataset1 => {
            let d = &cfg.dataset1;
            let tones = ToneSet::new(d.tones.system_freq, d.tones.fundamental_amplitude, d.tones.components.clone())?;
            let w = add_noise(&synth_multitone(&tones, cfg.fs, d.duration)?, snr(d.snr_db), cfg.seed)?;
            let r: RefFn = Box::new(move |ts| ReferenceSeries::multitone(&tones, ts, Differentiation::Analytic));
            Ok((w, r, None))
        }
        Dataset::Dataset2 => {
            let d = &cfg.dataset2;
            let model = d.model.clone();
            let w = add_noise(&synth_oscillation(&model, cfg.fs)?, snr(d.snr_db), cfg.seed)?;
            let r: RefFn = Box::new(move |ts| oscillation_reference(&model, ts));
            Ok((w, r, None))
        }
        Dataset::Dataset3 => {
            let d = &cfg.dataset3;
            let mut model = d.model.clone();
            if d.thd > 0.0 {
                model = model.with_thd(d.thd, &d.thd_harmonics);
            }
            let w = add_noise(&synth_step(&model, cfg.fs, d.duration)?, snr(d.snr_db), cfg.seed)?;
            // The reference ROCOF of the maneuver is fixed at zero.
            let f = model.pre.freq;
            let r: RefFn = Box::new(move |ts| ReferenceSeries::constant(ts, f));
            let n_step = (model.t_step * cfg.fs).round() as usize;
            Ok((w, r, Some(n_step)))
        }
        Dataset::Custom => {
            let (Some(wp), Some(rp)) = (&cfg.custom.waveform, &cfg.custom.reference) else {
                return Err(Error::config("custom dataset needs custom.waveform and custom.reference"));
            };
            let w = Waveform::load(wp)?;
            let reference = ReferenceSeries::read_csv(BufReader::new(File::open(rp)?), rp)?;
            let r: RefFn = Box::new(move |_| Ok(reference.clone()));
            Ok((w, r, None))
        }
        Dataset::Ufls => Err(Error::config("ufls is not a waveform dataset")),
    }
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_meta<W: Write>(out: &mut W, meta: &[String]) -> Result<()> {
    for m in meta {
        writeln!(out, "# {m}")?;
    }
    Ok(())
}

fn transient_summary(
    est: &[PhasorEstimate],
    nrmse: &NrmseReport,
    n_step: usize,
    window_len: usize,
    fs: f64,
    d: &Dataset3Config,
) -> Result<(TransientSummary, Vec<bool>)> {
    let span = (d.steady_span * fs).round() as usize;
    let lo = n_step.saturating_sub(span);
    let steady: Vec<f64> = est
        .iter()
        .zip(&nrmse.per_window)
        .filter(|(e, _)| e.start >= lo && e.start + window_len <= n_step)
        .map(|(_, v)| *v)
        .collect();
    let event = |e: &PhasorEstimate| e.start < n_step && e.start + window_len > n_step;
    let threshold = match d.threshold_ppm {
        Some(v) => Threshold::Ppm(v),
        None => Threshold::calibrate(&steady, d.margin)?,
    };
    let flags = detect_transient(&nrmse.per_window, threshold)?;
    let steady_rep = NrmseReport::from_values(steady)?;
    let (mut sw, mut sf, mut ew, mut ef, mut peak) = (0, 0, 0, 0, 0.0f64);
    for ((e, v), f) in est.iter().zip(&nrmse.per_window).zip(&flags) {
        if e.start >= lo && e.start + window_len <= n_step {
            sw += 1;
            sf += *f as usize;
        } else if event(e) {
            ew += 1;
            ef += *f as usize;
            peak = peak.max(*v);
        }
    }
    let Threshold::Ppm(th) = threshold else { unreachable!("calibrated thresholds are finite") };
    Ok((
        TransientSummary {
            threshold_ppm: th,
            steady_windows: sw,
            steady_flagged: sf,
            event_windows: ew,
            event_flagged: ef,
            steady_mean_ppm: steady_rep.mean,
            steady_max_ppm: steady_rep.max,
            event_peak_ppm: peak,
        },
        flags,
    ))
}

/// Synthesizes (or loads) the dataset, runs every selected combination and
/// writes the report bundle into `out`.
pub fn run_dataset(cfg: &RunConfig, dataset: Dataset, out: &Path) -> Result<Report> {
    cfg.validate()?;
    let (w, reference, n_step) = dataset_input(cfg, dataset)?;
    fs::create_dir_all(out)?;
    let meta = cfg.echo(dataset)?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut ref_written = Vec::new();
    for combo in cfg.combos() {
        let ec = cfg.estimator_config(combo, w.fs);
        let n = ec.window_len()?;
        let mut est = estimate_stream(&w, &ec)?;
        let ts: Vec<f64> = est.iter().map(|e| e.t_mid).collect();
        let r = reference(&ts)?;
        let nrmse = nrmse_stream(&w, &mut est, n)?;
        let (a, b) = paired_rocof(&est, &r)?;
        let stats = rfe_stats(&a, &b)?;
        let errors: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();

        let mut f = create(out, &format!("estimates_{}.csv", combo.stem()))?;
        write_estimates_csv(&est, &ec, &meta, &mut f)?;
        f.flush()?;

        let mut f = create(out, &format!("cdf_{}.csv", combo.stem()))?;
        write_meta(&mut f, &meta)?;
        EmpiricalCdf::new(&errors)?.write_csv(&mut f)?;
        f.flush()?;

        if !ref_written.contains(&combo.class) {
            let mut f = create(out, &format!("reference_{}.csv", combo.class))?;
            write_meta(&mut f, &meta)?;
            r.write_csv(&mut f)?;
            f.flush()?;
            ref_written.push(combo.class);
        }

        let transient = match n_step {
            Some(ns) => Some(transient_summary(&est, &nrmse, ns, n, w.fs, &cfg.dataset3)?),
            None => None,
        };
        let mut f = create(out, &format!("nrmse_{}.csv", combo.stem()))?;
        write_meta(&mut f, &meta)?;
        match &transient {
            Some((_, flags)) => {
                writeln!(f, "t_mid,nrmse_ppm,transient")?;
                for ((e, v), fl) in est.iter().zip(&nrmse.per_window).zip(flags) {
                    writeln!(f, "{},{},{}", e.t_mid, v, *fl as u8)?;
                }
            }
            None => {
                writeln!(f, "t_mid,nrmse_ppm")?;
                for (e, v) in est.iter().zip(&nrmse.per_window) {
                    writeln!(f, "{},{}", e.t_mid, v)?;
                }
            }
        }
        f.flush()?;

        rows.push(StatsRow {
            dataset: dataset.to_string(),
            algorithm: combo.algorithm.to_string(),
            class: combo.class.to_string(),
            rocof_mode: combo.rocof_mode.to_string(),
            stats,
        });
        results.push(ComboResult {
            combo,
            window_ms: ec.window_seconds() * 1e3,
            stats,
            nrmse,
            transient: transient.map(|t| t.0),
            estimates: est.len(),
        });
    }
    let mut f = create(out, "stats.csv")?;
    write_meta(&mut f, &meta)?;
    write_stats_csv(&rows, &mut f)?;
    f.flush()?;

    let summary = summary_table(dataset, &results);
    let mut f = create(out, "summary.txt")?;
    write_meta(&mut f, &meta)?;
    f.write_all(summary.as_bytes())?;
    f.flush()?;
    Ok(Report { dataset, results, summary })
}

const COLUMNS: [(Algorithm, RocofMode, &str); 4] = [
    (Algorithm::EIpdft, RocofMode::FiniteDifference, "e-IpDFT(fin)"),
    (Algorithm::IIpdft, RocofMode::FiniteDifference, "i-IpDFT(fin)"),
    (Algorithm::Tfm, RocofMode::FiniteDifference, "cs-TFM(fin)"),
    (Algorithm::Tfm, RocofMode::Derivative, "cs-TFM(der)"),
];

/// Published accuracy figures and IEEE limits per class.
fn published(dataset: Dataset, class: PmuClass) -> Option<([&'static str; 4], &'static str)> {
    use PmuClass::*;
    Some(match (dataset, class) {
        (Dataset::Dataset1, P) => (["10.51", "5.59", "1.12", "1.11"], "0.4"),
        (Dataset::Dataset1, M) => (["2.03", "0.57", "0.38", "0.56"], "suspended"),
        (Dataset::Dataset2, P) => (["0.24", "0.20", "0.09", "0.16"], "0.4"),
        (Dataset::Dataset2, M) => (["0.09", "0.07", "0.03", "0.04"], "0.2"),
        (Dataset::Dataset3, P) => (["263", "297", "112", "146"], "-"),
        (Dataset::Dataset3, M) => (["161", "180", "62", "84"], "-"),
        _ => return None,
    })
}

/// Plain-text accuracy table: measured figures beside the published ones.
pub fn summary_table(dataset: Dataset, results: &[ComboResult]) -> String {
    let (metric, waveform) = match dataset {
        Dataset::Dataset1 => ("RFE p95 [Hz/s]", "multitone power system"),
        Dataset::Dataset2 => ("RFE p95 [Hz/s]", "inter-area oscillation"),
        Dataset::Dataset3 => ("nRMSE peak at step [ppm]", "islanding maneuver"),
        _ => ("RFE p95 [Hz/s]", "custom record"),
    };
    let mut s = String::new();
    s.push_str("ROCOF estimation accuracy vs IEEE Std requirements\n");
    s.push_str(&format!("dataset: {dataset}  test waveform: {waveform}  metric: {metric}\n\n"));
    s.push_str(&format!("{:<18} {:<11}", "window", "row"));
    for (_, _, name) in COLUMNS {
        s.push_str(&format!(" {name:>13}"));
    }
    s.push_str("  IEEE limit\n");
    let mut classes: Vec<PmuClass> = Vec::new();
    for r in results {
        if !classes.contains(&r.combo.class) {
            classes.push(r.combo.class);
        }
    }
    for class in classes {
        let Some(first) = results.iter().find(|r| r.combo.class == class) else { continue };
        let window = format!("class {class} - {:.0} ms", first.window_ms);
        let pubd = published(dataset, class);
        let limit = pubd.map_or("-", |p| p.1);
        s.push_str(&format!("{window:<18} {:<11}", "measured"));
        for (alg, mode, _) in COLUMNS {
            let cell = results
                .iter()
                .find(|r| r.combo == Combo { class, algorithm: alg, rocof_mode: mode })
                .map(|r| match (dataset, r.transient) {
                    (Dataset::Dataset3, Some(t)) => format!("{:.1}", t.event_peak_ppm),
                    _ => format!("{:.3}", r.stats.p95_abs),
                })
                .unwrap_or_else(|| "-".into());
            s.push_str(&format!(" {cell:>13}"));
        }
        s.push_str(&format!("  {limit}\n"));
        if let Some((vals, limit)) = pubd {
            s.push_str(&format!("{window:<18} {:<11}", "paper ref."));
            for v in vals {
                s.push_str(&format!(" {v:>13}"));
            }
            s.push_str(&format!("  {limit}\n"));
        }
    }
    s.push_str("\nper combination\n");
    for r in results {
        let p = r.stats.pearson.map_or_else(|| "undefined".into(), |v| format!("{:.2}%", 100.0 * v));
        s.push_str(&format!(
            "{:<12} RFE mean {:+.4} std {:.4} p95 {:.4} Hz/s  pearson {p}  n {}  nRMSE mean {:.1} max {:.1} ppm\n",
            r.combo.stem(),
            r.stats.mean,
            r.stats.std,
            r.stats.p95_abs,
            r.stats.n,
            r.nrmse.mean,
            r.nrmse.max
        ));
        if let Some(t) = r.transient {
            s.push_str(&format!(
                "{:<12} pre-step nRMSE mean {:.2} max {:.2} ppm; threshold {:.2} ppm; steady flagged {}/{}; step flagged {}/{}\n",
                "",
                t.steady_mean_ppm,
                t.steady_max_ppm,
                t.threshold_ppm,
                t.steady_flagged,
                t.steady_windows,
                t.event_flagged,
                t.event_windows
            ));
        }
    }
    s
}

/// One point of the inertia sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub chain: String,
    pub blackout: Option<f64>,
    pub eens_mwh: f64,
    pub nadir_hz: f64,
    pub shed_mw: f64,
}

#[derive(Debug, Clone)]
pub struct UflsComparison {
    /// `(label, result)` for the PLL, PMU-1 and PMU-2 chains.
    pub runs: Vec<(String, UflsResult)>,
    pub sweep: Vec<SweepRow>,
    pub summary: String,
}

impl UflsComparison {
    pub fn run(&self, label: &str) -> Option<&UflsResult> {
        self.runs.iter().find(|(l, _)| l == label).map(|(_, r)| r)
    }

    /// `blackout flags, EENS values and EENS ordering` on one line.
    pub fn comparison_line(&self) -> String {
        let mut parts = Vec::new();
        for (l, r) in &self.runs {
            parts.push(format!("{l}_blackout={}", r.is_blackout()));
        }
        for (l, r) in &self.runs {
            parts.push(format!("{l}_eens_mwh={:.3}", r.eens_mwh));
        }
        let mut order: Vec<&(String, UflsResult)> = self.runs.iter().collect();
        order.sort_by(|a, b| a.1.eens_mwh.total_cmp(&b.1.eens_mwh));
        let chain: Vec<&str> = order.iter().map(|(l, _)| l.as_str()).collect();
        parts.push(format!("eens_order={}", chain.join("<")));
        parts.join(" ")
    }
}

/// Runs the PLL, PMU-1 and PMU-2 chains on the configured grid, plus the
/// optional inertia sweep, and writes trajectories, events and a summary.
pub fn run_ufls_compare(cfg: &RunConfig, out: &Path) -> Result<UflsComparison> {
    let scenarios = cfg.ufls_scenarios();
    for (_, sc) in &scenarios {
        sc.validate()?;
    }
    if cfg.ufls.sweep_h.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::config("sweep_h values must be positive"));
    }
    fs::create_dir_all(out)?;
    let meta = cfg.echo(Dataset::Ufls)?;

    let runs: Vec<(String, UflsResult)> = scenarios
        .par_iter()
        .map(|(l, sc)| run_ufls(sc).map(|r| (l.to_string(), r)))
        .collect::<Result<_>>()?;

    let points: Vec<(f64, &str, UflsScenario)> = cfg
        .ufls
        .sweep_h
        .iter()
        .flat_map(|&h| {
            scenarios.iter().map(move |(l, sc)| {
                let mut sc = sc.clone();
                sc.grid.h = h;
                (h, *l, sc)
            })
        })
        .collect();
    let sweep: Vec<SweepRow> = points
        .par_iter()
        .map(|(h, l, sc)| {
            let r = run_ufls(sc)?;
            Ok(SweepRow {
                h: *h,
                chain: l.to_string(),
                blackout: r.blackout,
                eens_mwh: r.eens_mwh,
                nadir_hz: r.nadir().1,
                shed_mw: r.total_shed_mw(),
            })
        })
        .collect::<Result<_>>()?;

    for (l, r) in &runs {
        let mut f = create(out, &format!("trajectory_{l}.csv"))?;
        r.write_trajectory_csv(&meta, &mut f)?;
        f.flush()?;
        let mut f = create(out, &format!("events_{l}.csv"))?;
        r.write_events_csv(&meta, &mut f)?;
        f.flush()?;
    }
    if !sweep.is_empty() {
        let mut f = create(out, "sweep.csv")?;
        write_meta(&mut f, &meta)?;
        writeln!(f, "h,chain,blackout_t,eens_mwh,nadir_hz,shed_mw")?;
        for s in &sweep {
            let b = s.blackout.map_or_else(String::new, |t| t.to_string());
            writeln!(f, "{},{},{},{},{},{}", s.h, s.chain, b, s.eens_mwh, s.nadir_hz, s.shed_mw)?;
        }
        f.flush()?;
    }

    let mut cmp = UflsComparison { runs, sweep, summary: String::new() };
    let mut s = String::from("UFLS comparison\n\n");
    s.push_str(&format!(
        "{:<6} {:<26} {:<20} {:>10} {:>10} {:>9} {:>9}\n",
        "chain", "measurement", "relay", "blackout", "EENS MWh", "shed MW", "nadir Hz"
    ));
    for ((l, r), (_, sc)) in cmp.runs.iter().zip(&scenarios) {
        let b = r.blackout.map_or_else(|| "no".into(), |t| format!("{t:.3} s"));
        s.push_str(&format!(
            "{l:<6} {:<26} {:<20} {b:>10} {:>10.3} {:>9.0} {:>9.3}\n",
            sc.measurement.label(),
            sc.relay.kind(),
            r.eens_mwh,
            r.total_shed_mw(),
            r.nadir().1
        ));
    }
    s.push('\n');
    s.push_str(&cmp.comparison_line());
    s.push('\n');
    if !cmp.sweep.is_empty() {
        s.push_str("\ninertia sweep\n");
        for p in &cmp.sweep {
            let b = p.blackout.map_or_else(|| "no".into(), |t| format!("{t:.3} s"));
            s.push_str(&format!(
                "H {:<4} {:<6} blackout {b:<10} EENS {:.3} MWh  shed {:.0} MW  nadir {:.3} Hz\n",
                p.h, p.chain, p.eens_mwh, p.shed_mw, p.nadir_hz
            ));
        }
    }
    let mut f = create(out, "summary.txt")?;
    write_meta(&mut f, &meta)?;
    f.write_all(s.as_bytes())?;
    f.flush()?;
    cmp.summary = s;
    Ok(cmp)
}

/// Dispatches a dataset and returns the summary text.
pub fn run(cfg: &RunConfig, dataset: Dataset, out: &Path) -> Result<String> {
    match dataset {
        Dataset::Ufls => Ok(run_ufls_compare(cfg, out)?.summary),
        d => Ok(run_dataset(cfg, d, out)?.summary),
    }
}
