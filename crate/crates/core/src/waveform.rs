//! Uniformly sampled real-valued records and their CSV representation.
//!
//! File layout:
//!
//! ```text
//! # fs=5000 unit=V t0=0 seed=7
//! 0.9999999
//! 0.9980267284282716
//! ...
//! ```
//!
//! `seed` is `none` for noiseless records. Samples are written with the
//! shortest representation that round-trips the `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    /// Sample rate in Hz.
    pub fs: f64,
    pub samples: Vec<f64>,
    /// Time of the first sample, seconds.
    pub t0: f64,
    /// Physical unit of the samples (`V`, `kV`, `pu`, ...).
    pub unit: String,
    pub label: String,
    /// Seed of the noise stream mixed into the record, if any.
    pub seed: Option<u64>,
}

impl Waveform {
    pub fn new(fs: f64, samples: Vec<f64>) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::invalid(format!("sample rate must be positive, got {fs}")));
        }
        if samples.is_empty() {
            return Err(Error::invalid("waveform needs at least one sample"));
        }
        Ok(Waveform {
            fs,
            samples,
            t0: 0.0,
            unit: "V".to_owned(),
            label: String::new(),
            seed: None,
        })
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Timestamp of sample `n`.
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 / self.fs
    }

    /// Mean power of the record.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    pub fn scaled(&self, c: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|x| x * c).collect(),
            ..self.clone()
        }
    }

    pub fn header_line(&self) -> String {
        let seed = self
            .seed
            .map_or_else(|| "none".to_owned(), |s| s.to_string());
        format!("# fs={} unit={} t0={} seed={}", self.fs, self.unit, self.t0, seed)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.unit.is_empty() || self.unit.contains(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "unit must be a single non-empty token, got {:?}",
                self.unit
            )));
        }
        writeln!(out, "{}", self.header_line())?;
        for x in &self.samples {
            writeln!(out, "{x}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, origin: &Path) -> Result<Waveform> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = input.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| perr(1, "empty file".into()))?;
        let header = header?;
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| perr(1, "missing '# fs=...' header".into()))?;

        let (mut fs, mut unit, mut t0, mut seed) = (None, None, 0.0, None);
        for field in body.split_whitespace() {
            let (key, val) = field
                .split_once('=')
                .ok_or_else(|| perr(1, format!("malformed header field {field:?}")))?;
            match key {
                "fs" => {
                    fs = Some(val.parse::<f64>().map_err(|e| perr(1, format!("fs: {e}")))?)
                }
                "unit" => unit = Some(val.to_owned()),
                "t0" => t0 = val.parse::<f64>().map_err(|e| perr(1, format!("t0: {e}")))?,
                "seed" => {
                    seed = match val {
                        "none" => None,
                        s => Some(s.parse::<u64>().map_err(|e| perr(1, format!("seed: {e}")))?),
                    }
                }
                other => return Err(perr(1, format!("unknown header key {other:?}"))),
            }
        }
        let fs = fs.ok_or_else(|| perr(1, "header lacks fs".into()))?;

        let mut samples = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let x = t
                .parse::<f64>()
                .map_err(|e| perr(i + 1, format!("sample {t:?}: {e}")))?;
            samples.push(x);
        }
        let label = origin
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut w = Waveform::new(fs, samples)?.with_label(label);
        w.unit = unit.unwrap_or_else(|| "V".to_owned());
        w.t0 = t0;
        w.seed = seed;
        Ok(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Waveform> {
        let path = path.as_ref();
        let f = File::open(path)?;
        Waveform::read_csv(BufReader::new(f), path)
    }
}
