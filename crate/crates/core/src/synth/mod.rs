//! Power spectral density models and Gaussian process sampling.

mod psd;
mod sampler;

pub use psd::{multiband_fixture, LogFourierPsd, PiecewisePsd, PowerSpectrum, Psd};
pub use sampler::{Factorization, ProcessSampler};
