//! Hann-windowed DFT referenced to the window midpoint.
//!
//! With `m = n - N/2` the spectrum is
//! `X_k = (2 / sum w) * sum_n w[n] x[n] exp(-j 2 pi k m / N)`,
//! so a cosine `A cos(2 pi f m / fs + phi)` contributes
//! `(A/2) [exp(j phi) K(k - lambda) + exp(-j phi) K(k + lambda)]` with
//! `lambda = f N / fs` and `K` the real kernel below (`K(0) = 2`).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Centred Dirichlet sum `sum_{m=-N/2}^{N/2-1} exp(-j 2 pi nu m / N)`.
fn dirichlet(nu: f64, n: usize) -> Complex64 {
    let nf = n as f64;
    let den = (PI * nu / nf).sin();
    let mag = if den.abs() < 1e-12 {
        nf * (PI * nu).cos() / (PI * nu / nf).cos()
    } else {
        (PI * nu).sin() / den
    };
    Complex64::from_polar(1.0, PI * nu / nf) * mag
}

/// Hann kernel of the midpoint-referenced DFT at fractional bin offset `nu`.
pub fn kernel(nu: f64, n: usize) -> f64 {
    let s = dirichlet(nu, n) * 0.5 + (dirichlet(nu - 1.0, n) + dirichlet(nu + 1.0, n)) * 0.25;
    4.0 * s.re / n as f64
}

/// Spectral contribution of `A cos(2 pi lambda m / N + phi)` at bin `k`.
pub fn tone_bin(amplitude: f64, phase: f64, lambda: f64, k: f64, n: usize) -> Complex64 {
    let pos = Complex64::from_polar(0.5 * amplitude, phase) * kernel(k - lambda, n);
    let neg = Complex64::from_polar(0.5 * amplitude, -phase) * kernel(k + lambda, n);
    pos + neg
}

/// Three-point Hann interpolation offset from bin magnitudes.
pub fn interp_delta(prev: f64, peak: f64, next: f64) -> f64 {
    let den = prev + 2.0 * peak + next;
    if den > 0.0 {
        2.0 * (next - prev) / den
    } else {
        0.0
    }
}

/// Main-lobe amplitude factor `pi d (1 - d^2) / sin(pi d)`, equal to 1 at d = 0.
pub fn amplitude_factor(delta: f64) -> f64 {
    if delta.abs() < 1e-9 {
        // series: 1 + d^2 (pi^2/6 - 1)
        1.0 + delta * delta * (PI * PI / 6.0 - 1.0)
    } else {
        (PI * delta * (1.0 - delta * delta) / (PI * delta).sin()).abs()
    }
}

/// Reusable FFT plan and taper for one window length.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    n: usize,
    taper: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer").field("n", &self.n).finish()
    }
}

impl SpectrumAnalyzer {
    /// The window length must be even so that the kernel is real.
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "window length must be even and at least 8 samples, got {n}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(SpectrumAnalyzer {
            n,
            taper: hann(n),
            fft,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Bins `0..=N/2` of the normalised midpoint-referenced spectrum.
    pub fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.n);
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(&self.taper)
            .map(|(v, w)| Complex64::new(v * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        let scale = 4.0 / self.n as f64;
        buf.truncate(self.n / 2 + 1);
        for (k, b) in buf.iter_mut().enumerate() {
            *b *= if k % 2 == 0 { scale } else { -scale };
        }
        buf
    }
}

/// Bin `k` of a real-signal spectrum, extended to negative indices by symmetry.
pub fn bin_at(spec: &[Complex64], k: isize) -> Complex64 {
    if k < 0 {
        spec[(-k) as usize].conj()
    } else {
        spec[k as usize]
    }
}
