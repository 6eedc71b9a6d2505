//! Thin wrapper around `rustfft` with a per-thread plan cache and
//! transform accounting.

use std::cell::{Cell, RefCell};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized forward transform `X[k] = sum x[n] e^{-j 2 pi k n / L}` in place.
pub fn forward(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), false).process(buf);
    }
}

/// Unnormalized inverse transform `x[n] = sum X[k] e^{+j 2 pi k n / L}` in place.
pub fn inverse(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), true).process(buf);
    }
}

/// Counts transforms and scratch buffers used by one estimator invocation.
///
/// `points` accumulates transform lengths so that work can be expressed in
/// units of a reference length (see [`FftMeter::equivalent`]).
#[derive(Debug, Default)]
pub struct FftMeter {
    transforms: Cell<usize>,
    points: Cell<usize>,
    live: Cell<usize>,
    peak: Cell<usize>,
}

impl FftMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.tick(buf.len());
        forward(buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.tick(buf.len());
        inverse(buf);
    }

    fn tick(&self, len: usize) {
        self.transforms.set(self.transforms.get() + 1);
        self.points.set(self.points.get() + len);
    }

    /// Allocates a zeroed scratch buffer that is tracked until dropped.
    pub fn buffer(&self, len: usize) -> Scratch<'_> {
        let live = self.live.get() + 1;
        self.live.set(live);
        self.peak.set(self.peak.get().max(live));
        Scratch {
            data: vec![Complex64::new(0.0, 0.0); len],
            meter: self,
        }
    }

    /// Number of transforms performed.
    pub fn transforms(&self) -> usize {
        self.transforms.get()
    }

    /// Work expressed as a number of length-`len` transforms.
    pub fn equivalent(&self, len: usize) -> usize {
        self.points.get().div_ceil(len)
    }

    /// Largest number of scratch buffers alive at the same time.
    pub fn peak_buffers(&self) -> usize {
        self.peak.get()
    }
}

/// Scratch buffer owned by an [`FftMeter`].
pub struct Scratch<'a> {
    data: Vec<Complex64>,
    meter: &'a FftMeter,
}

impl std::ops::Deref for Scratch<'_> {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.data
    }
}

impl std::ops::DerefMut for Scratch<'_> {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}

impl Drop for Scratch<'_> {
    fn drop(&mut self) {
        self.meter.live.set(self.meter.live.get() - 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meter_counts_transforms_and_buffers() {
        let meter = FftMeter::new();
        {
            let mut a = meter.buffer(8);
            let mut b = meter.buffer(16);
            meter.forward(&mut a);
            meter.inverse(&mut b);
        }
        let _c = meter.buffer(8);
        assert_eq!(meter.transforms(), 2);
        assert_eq!(meter.equivalent(8), 3);
        assert_eq!(meter.peak_buffers(), 2);
    }

    #[test]
    fn forward_then_inverse_scales_by_length() {
        let mut v: Vec<Complex64> = (0..12).map(|i| Complex64::new(i as f64, -(i as f64) / 3.0)).collect();
        let orig = v.clone();
        forward(&mut v);
        inverse(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a / 12.0 - b).norm() < 1e-12);
        }
    }
}
