//! ROCOF metrology toolkit.
//!
//! The crate is organised as a pipeline:
//!
//! * [`wavegen`] synthesises the multitone, inter-area oscillation and
//!   islanding-step test waveforms and injects calibrated noise;
//! * [`truth`] computes analytic reference frequency / ROCOF series;
//! * [`estimators`] runs window-based synchrophasor estimators (e-IpDFT,
//!   i-IpDFT and a Taylor-Fourier dynamic estimator) at the reporting rate;
//! * [`metrics`] scores estimate streams (RFE statistics, CDF, nRMSE);
//! * [`uflsim`] closes the loop through a single-bus frequency surrogate with
//!   frequency- and ROCOF-based load-shedding relays;
//! * [`cli`] orchestrates full dataset runs and writes report bundles.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod metrics;
pub mod truth;
pub mod uflsim;
pub mod units;
pub mod waveform;
pub mod wavegen;

pub use error::{Error, Result};
pub use waveform::Waveform;
