//! Approximate multitaper estimation using only the transition-region tapers.
//!
//! The eigenvalue-weighted sum `Psi(f) = sum_k lambda_k S_k(f)` over all `n`
//! Slepian tapers equals `x^* E_f B E_f^* x` and costs three FFTs without any
//! tapers. The multitaper estimate differs from `Psi / K` only through tapers
//! whose eigenvalues are neither close to 1 nor close to 0, so those are the
//! only ones that have to be computed.

use std::ops::Range;

use num_complex::Complex64;

use crate::dpss::{sinc_sample, transition_width_bound, validate, Slepian, TaperBank};
use crate::error::{param, Error, Result};
use crate::estimators::{tapered_power, EstimateMeta, FrequencyGrid, Method, SpectralEstimate};
use crate::fft::FftMeter;

/// Prolate kernel samples wrapped onto a length-`l` circle, `l >= 2n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SincKernelExt {
    b: Vec<f64>,
}

impl SincKernelExt {
    pub fn l(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }
}

pub fn build_sinc_kernel(n: usize, w: f64, l: usize) -> Result<SincKernelExt> {
    validate(n, w)?;
    if l < 2 * n {
        return param(format!("extension length {l} must be at least 2n = {}", 2 * n));
    }
    let mut b = vec![0.0; l];
    b[0] = 2.0 * w;
    for m in 1..n {
        let v = sinc_sample(w, m as i64);
        b[m] = v;
        b[l - m] = v;
    }
    Ok(SincKernelExt { b })
}

/// `Psi(j / l)` for every grid index, computed without tapers.
pub fn psi_weighted_sum(x: &[Complex64], w: f64, l: usize) -> Result<Vec<f64>> {
    psi_metered(x, w, l, &FftMeter::new())
}

fn psi_metered(x: &[Complex64], w: f64, l: usize, meter: &FftMeter) -> Result<Vec<f64>> {
    let n = x.len();
    validate(n, w)?;
    if l < n {
        return param(format!("grid size {l} must be at least n = {n}"));
    }
    if l < 2 * n {
        // evaluate on the doubled grid, then keep every second point
        let fine = psi_metered(x, w, 2 * l, meter)?;
        return Ok(fine.into_iter().step_by(2).collect());
    }
    let kernel = build_sinc_kernel(n, w, l)?;
    let mut buf = meter.buffer(l);
    buf[..n].copy_from_slice(x);
    meter.forward(&mut buf);
    buf.iter_mut().for_each(|z| *z = Complex64::new(z.norm_sqr(), 0.0));
    // circular autocorrelation of x; no aliasing since l >= 2n
    meter.inverse(&mut buf);
    let scale = 1.0 / l as f64;
    buf.iter_mut().zip(kernel.b()).for_each(|(z, b)| *z *= b * scale);
    meter.forward(&mut buf);
    Ok(buf.iter().map(|z| z.re).collect())
}

/// Classification of taper indices for a fixed `K` and tolerance `eps`:
/// `i1` and `i2` split `0..K` at the first eigenvalue below `1 - eps`,
/// `i3` and `i4` split `K..n` at the first eigenvalue at or below `eps`.
/// Eigenvalues are non-increasing, so each set is a contiguous range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    n: usize,
    k: usize,
    epsilon_bits: u64,
    near_one_end: usize,
    near_zero_start: usize,
}

impl IndexPartition {
    /// Builds the partition from `eigenvalues[0..]`, which must extend to the
    /// first index with `lambda <= eps` (or to `n`).
    pub fn from_eigenvalues(eigenvalues: &[f64], n: usize, k: usize, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        if k == 0 || k > n || eigenvalues.len() > n {
            return param(format!("taper count {k} must be in 1..={n}"));
        }
        if eigenvalues.len() < k {
            return param(format!("need eigenvalues up to index {k}, got {}", eigenvalues.len()));
        }
        let lam_k = eigenvalues.get(k).copied();
        check_standing_assumption(eigenvalues[k - 1], lam_k, k, eps)?;
        let near_zero_start = k + eigenvalues[k..].partition_point(|&l| l > eps);
        if near_zero_start == eigenvalues.len() && near_zero_start < n {
            return param(format!(
                "eigenvalues stop at index {near_zero_start} before reaching {eps}; extend the list"
            ));
        }
        let near_one_end = eigenvalues[..k].partition_point(|&l| l >= 1.0 - eps);
        Self::from_boundaries(n, k, eps, near_one_end, near_zero_start)
    }

    /// `near_one_end`: first index with `lambda < 1 - eps`;
    /// `near_zero_start`: first index with `lambda <= eps`.
    pub fn from_boundaries(n: usize, k: usize, eps: f64, near_one_end: usize, near_zero_start: usize) -> Result<Self> {
        check_eps(eps)?;
        if !(near_one_end <= k && k <= near_zero_start && near_zero_start <= n) {
            return param(format!(
                "inconsistent boundaries {near_one_end} <= {k} <= {near_zero_start} <= {n}"
            ));
        }
        Ok(Self { n, k, epsilon_bits: eps.to_bits(), near_one_end, near_zero_start })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        f64::from_bits(self.epsilon_bits)
    }

    /// `k < K` with `lambda_k >= 1 - eps`.
    pub fn i1(&self) -> Range<usize> {
        0..self.near_one_end
    }

    /// `k < K` with `lambda_k < 1 - eps`.
    pub fn i2(&self) -> Range<usize> {
        self.near_one_end..self.k
    }

    /// `k >= K` with `lambda_k > eps`.
    pub fn i3(&self) -> Range<usize> {
        self.k..self.near_zero_start
    }

    /// `k >= K` with `lambda_k <= eps`; never materialized.
    pub fn i4(&self) -> Range<usize> {
        self.near_zero_start..self.n
    }

    /// `i2` followed by `i3`: the only tapers the estimate needs.
    pub fn transition(&self) -> Range<usize> {
        self.near_one_end..self.near_zero_start
    }
}

/// Alias for [`IndexPartition::from_eigenvalues`].
pub fn partition_indices(eigenvalues: &[f64], n: usize, k: usize, eps: f64) -> Result<IndexPartition> {
    IndexPartition::from_eigenvalues(eigenvalues, n, k, eps)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return param(format!("tolerance {eps} must lie in (0, 1/2)"));
    }
    Ok(())
}

fn check_standing_assumption(lam_last: f64, lam_next: Option<f64>, k: usize, eps: f64) -> Result<()> {
    if lam_last < 0.5 {
        return Err(Error::Configuration(format!(
            "lambda_{} = {lam_last:e} violates lambda_(K-1) >= 1/2 for K = {k}",
            k - 1
        )));
    }
    if let Some(l) = lam_next {
        if l > 1.0 - eps {
            return Err(Error::Configuration(format!(
                "lambda_{k} = {l} violates lambda_K <= 1 - eps = {} for K = {k}",
                1.0 - eps
            )));
        }
    }
    Ok(())
}

/// `Psi / K + (1/K) sum_{i2} (1 - lambda) S_i - (1/K) sum_{i3} lambda S_i`.
///
/// `transition` must hold the tapers for every index in `partition.transition()`.
/// The reported FFT count is in units of length-`l` transforms.
pub fn multitaper_approx(
    x: &[Complex64],
    transition: &TaperBank,
    partition: &IndexPartition,
    l: usize,
) -> Result<SpectralEstimate> {
    let n = x.len();
    let grid = FrequencyGrid::for_samples(n, l)?;
    if transition.n() != n || partition.n() != n {
        return param(format!("{n} samples but tapers/partition were built for n = {}", transition.n()));
    }
    let need = partition.transition();
    let have = transition.indices();
    if !need.is_empty() && (need.start < have.start || need.end > have.end) {
        return param(format!("tapers {need:?} are required but only {have:?} were supplied"));
    }
    let meter = FftMeter::new();
    let k = partition.k() as f64;
    let mut acc = psi_metered(x, transition.w(), l, &meter)?;
    for i in need {
        let s = transition.taper(i).expect("range checked");
        let lam = transition.eigenvalue(i).expect("range checked");
        let weight = if i < partition.k() { 1.0 - lam } else { -lam };
        let p = tapered_power(x, Some(s), l, &meter);
        acc.iter_mut().zip(&p).for_each(|(a, v)| *a += weight * v);
    }
    acc.iter_mut().for_each(|a| *a = (*a / k).max(0.0));
    Ok(SpectralEstimate {
        grid,
        values: acc,
        method: Method::MultitaperApprox,
        meta: EstimateMeta {
            n,
            w: Some(transition.w()),
            k: Some(partition.k()),
            epsilon: Some(partition.epsilon()),
            fft_count: Some(meter.equivalent(l)),
            peak_buffers: Some(meter.peak_buffers()),
        },
    })
}

/// Everything the approximate estimator needs for fixed `(n, w, K, eps)`:
/// the partition and the transition tapers. Eigenvalues deep in `i4` are
/// never computed.
#[derive(Debug, Clone)]
pub struct FastPlan {
    partition: IndexPartition,
    transition: TaperBank,
}

impl FastPlan {
    pub fn new(n: usize, w: f64, k: usize, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let slepian = Slepian::new(n, w)?;
        if k == 0 || k > n {
            return param(format!("taper count {k} must be in 1..={n}"));
        }
        let lam_next = if k < n { Some(slepian.eigenvalue(k)?) } else { None };
        check_standing_assumption(slepian.eigenvalue(k - 1)?, lam_next, k, eps)?;
        let near_one_end = slepian.partition_point(|l| l >= 1.0 - eps)?.min(k);
        // below about n * machine epsilon computed eigenvalues are noise, so the
        // search alone can run to n for tiny eps; the width bound caps it
        let cap = near_one_end + transition_width_bound(n, w, eps)?.floor() as usize;
        let near_zero_start = slepian.partition_point(|l| l > eps)?.min(cap).max(k);
        let partition = IndexPartition::from_boundaries(n, k, eps, near_one_end, near_zero_start)?;
        let transition = slepian.bank(partition.transition())?;
        Ok(Self { partition, transition })
    }

    pub fn partition(&self) -> &IndexPartition {
        &self.partition
    }

    pub fn transition_bank(&self) -> &TaperBank {
        &self.transition
    }

    pub fn estimate(&self, x: &[Complex64], l: usize) -> Result<SpectralEstimate> {
        multitaper_approx(x, &self.transition, &self.partition, l)
    }
}
