//! Multitaper spectral estimation.
//!
//! * [`dpss`]: Slepian tapers, eigenvalues and eigenvalue bounds.
//! * [`estimators`]: periodogram, tapered and multitaper estimates, the
//!   spectral window, adaptive weighting and the log-deviation metric.
//! * [`fast`]: the approximate multitaper estimate that needs only the
//!   tapers in the eigenvalue transition region.
//! * [`bounds`]: bias, variance, covariance and tail bounds.
//! * [`synth`]: power spectral density models and Gaussian process sampling.
//! * [`montecarlo`] and [`bench`]: experiment drivers used by the CLI.

pub mod bench;
pub mod bounds;
pub mod dpss;
pub mod error;
pub mod estimators;
pub mod fast;
pub mod fft;
pub mod io;
pub mod method;
pub mod montecarlo;
pub mod synth;

pub use error::{Error, Result};
pub use num_complex::Complex64;
