//! Spectral estimators evaluated on the uniform grid `l / L`, `l in 0..L`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dpss::TaperBank;
use crate::error::{param, Result};
use crate::fft::FftMeter;
use crate::synth::PowerSpectrum;

/// `L` evenly spaced frequencies `l / L` covering one period `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    l: usize,
}

impl FrequencyGrid {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 {
            return param("grid size must be positive");
        }
        Ok(Self { l })
    }

    /// Grid for a length-`n` input; requires `l >= n`.
    pub fn for_samples(n: usize, l: usize) -> Result<Self> {
        if n == 0 {
            return param("empty input");
        }
        if l < n {
            return param(format!("grid size {l} is smaller than the sample count {n}"));
        }
        Self::new(l)
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    pub fn frequency(&self, index: usize) -> f64 {
        index as f64 / self.l as f64
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.l).map(|i| self.frequency(i))
    }

    /// Index of the grid point nearest to `f` (taken modulo 1).
    pub fn nearest_index(&self, f: f64) -> usize {
        let f = f.rem_euclid(1.0);
        ((f * self.l as f64).round() as usize) % self.l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Periodogram,
    Single,
    Multitaper,
    MultitaperApprox,
    Adaptive,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Work in units of length-`L` transforms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fft_count: Option<usize>,
    /// Largest number of length-`L` scratch buffers alive at once.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_buffers: Option<usize>,
}

/// Estimator output on a [`FrequencyGrid`]. Values are nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    pub method: Method,
    pub meta: EstimateMeta,
}

/// `|DFT_L(taper .* x)|^2` on the grid; `taper = None` means all ones.
pub(crate) fn tapered_power(x: &[Complex64], taper: Option<&[f64]>, l: usize, meter: &FftMeter) -> Vec<f64> {
    let mut buf = meter.buffer(l);
    match taper {
        Some(t) => {
            for ((b, &xi), &ti) in buf.iter_mut().zip(x).zip(t) {
                *b = xi * ti;
            }
        }
        None => buf[..x.len()].copy_from_slice(x),
    }
    meter.forward(&mut buf);
    buf.iter().map(|z| z.norm_sqr()).collect()
}

fn check_taper(taper: &[f64], n: usize) -> Result<()> {
    if taper.len() != n {
        return param(format!("taper length {} does not match {n} samples", taper.len()));
    }
    let norm = taper.iter().map(|t| t * t).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return param(format!("taper norm {norm} is not 1"));
    }
    Ok(())
}

fn check_bank(x: &[Complex64], bank: &TaperBank, k: usize) -> Result<()> {
    if x.len() != bank.n() {
        return param(format!("{} samples but the bank was built for n = {}", x.len(), bank.n()));
    }
    bank.require_prefix(k)
}

/// Classical periodogram `(1/n) |sum x[t] e^{-j 2 pi f t}|^2`.
pub fn periodogram(x: &[Complex64], l: usize) -> Result<SpectralEstimate> {
    let grid = FrequencyGrid::for_samples(x.len(), l)?;
    let meter = FftMeter::new();
    let scale = 1.0 / x.len() as f64;
    let values = tapered_power(x, None, l, &meter).into_iter().map(|v| v * scale).collect();
    Ok(SpectralEstimate {
        grid,
        values,
        method: Method::Periodogram,
        meta: EstimateMeta {
            n: x.len(),
            fft_count: Some(1),
            ..Default::default()
        },
    })
}

/// Periodogram of the tapered samples; the taper must have unit norm.
pub fn tapered_periodogram(x: &[Complex64], taper: &[f64], l: usize) -> Result<SpectralEstimate> {
    let grid = FrequencyGrid::for_samples(x.len(), l)?;
    check_taper(taper, x.len())?;
    let meter = FftMeter::new();
    Ok(SpectralEstimate {
        grid,
        values: tapered_power(x, Some(taper), l, &meter),
        method: Method::Single,
        meta: EstimateMeta {
            n: x.len(),
            fft_count: Some(1),
            ..Default::default()
        },
    })
}

/// The `k` single-taper estimates `S_i(f)`, one vector per taper.
pub fn single_taper_estimates(x: &[Complex64], bank: &TaperBank, k: usize, l: usize) -> Result<Vec<Vec<f64>>> {
    FrequencyGrid::for_samples(x.len(), l)?;
    check_bank(x, bank, k)?;
    let meter = FftMeter::new();
    Ok(bank
        .iter()
        .take(k)
        .map(|(_, s, _)| tapered_power(x, Some(s), l, &meter))
        .collect())
}

/// Average of the first `k` tapered periodograms. Costs `k` transforms.
pub fn multitaper_exact(x: &[Complex64], bank: &TaperBank, k: usize, l: usize) -> Result<SpectralEstimate> {
    let grid = FrequencyGrid::for_samples(x.len(), l)?;
    check_bank(x, bank, k)?;
    let meter = FftMeter::new();
    let mut acc = vec![0.0; l];
    for (_, s, _) in bank.iter().take(k) {
        let p = tapered_power(x, Some(s), l, &meter);
        acc.iter_mut().zip(&p).for_each(|(a, v)| *a += v);
    }
    let scale = 1.0 / k as f64;
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(SpectralEstimate {
        grid,
        values: acc,
        method: Method::Multitaper,
        meta: EstimateMeta {
            n: x.len(),
            w: Some(bank.w()),
            k: Some(k),
            fft_count: Some(meter.transforms()),
            peak_buffers: Some(meter.peak_buffers()),
            ..Default::default()
        },
    })
}

/// Spectral window `psi(f) = (1/k) sum_i |DTFT(s_i)(f)|^2` on `l` points.
pub fn spectral_window(bank: &TaperBank, k: usize, l: usize) -> Result<Vec<f64>> {
    bank.require_prefix(k)?;
    FrequencyGrid::for_samples(bank.n(), l)?;
    let meter = FftMeter::new();
    let ones = vec![Complex64::new(1.0, 0.0); bank.n()];
    let mut acc = vec![0.0; l];
    for (_, s, _) in bank.iter().take(k) {
        let p = tapered_power(&ones, Some(s), l, &meter);
        acc.iter_mut().zip(&p).for_each(|(a, v)| *a += v);
    }
    acc.iter_mut().for_each(|a| *a /= k as f64);
    Ok(acc)
}

/// Output of [`adaptive_multitaper`].
#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    pub estimate: SpectralEstimate,
    /// `weights[i][f]`: weight of taper `i` at grid index `f`.
    pub weights: Vec<Vec<f64>>,
    /// Largest iteration count over all frequencies.
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed-point iteration for adaptively weighted single-taper estimates.
///
/// Returns `(values, weights, iterations, converged)`; `single[i]` is the
/// estimate of taper `i` and `eigenvalues[i]` its concentration.
pub fn adaptive_weights(
    single: &[Vec<f64>],
    eigenvalues: &[f64],
    sigma2: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize, bool)> {
    let k = single.len();
    if k == 0 || eigenvalues.len() < k {
        return param("adaptive weighting needs at least one taper with an eigenvalue");
    }
    if !(tol > 0.0) {
        return param(format!("tolerance {tol} must be positive"));
    }
    let l = single[0].len();
    let mut values = vec![0.0; l];
    let mut weights = vec![vec![0.0; l]; k];
    let mut max_iters = 0;
    let mut all_converged = true;
    let init = k.min(2);
    let mut alpha = vec![0.0; k];

    for f in 0..l {
        let mut est = single[..init].iter().map(|s| s[f]).sum::<f64>() / init as f64;
        let mut converged = false;
        let mut iters = 0;
        if !(est > 0.0) {
            converged = true;
            est = 0.0;
            alpha.iter_mut().for_each(|a| *a = 0.0);
        }
        while !converged && iters < max_iter {
            iters += 1;
            for (a, &lam) in alpha.iter_mut().zip(eigenvalues) {
                let d = lam * est + (1.0 - lam) * sigma2;
                *a = if d > 0.0 { lam * est * est / (d * d) } else { 0.0 };
            }
            let den: f64 = alpha.iter().sum();
            if !(den > 0.0) || !den.is_finite() {
                est = 0.0;
                alpha.iter_mut().for_each(|a| *a = 0.0);
                converged = true;
                break;
            }
            let next = alpha.iter().zip(single).map(|(a, s)| a * s[f]).sum::<f64>() / den;
            let change = (next - est).abs() / next.abs().max(f64::MIN_POSITIVE);
            est = next;
            if change < tol {
                converged = true;
            }
        }
        values[f] = est;
        for (row, &a) in weights.iter_mut().zip(&alpha) {
            row[f] = a;
        }
        max_iters = max_iters.max(iters);
        all_converged &= converged;
    }
    Ok((values, weights, max_iters, all_converged))
}

/// Adaptively weighted multitaper estimate with `sigma^2 = ||x||^2 / n`.
pub fn adaptive_multitaper(
    x: &[Complex64],
    bank: &TaperBank,
    k: usize,
    l: usize,
    tol: f64,
    max_iter: usize,
) -> Result<AdaptiveResult> {
    let grid = FrequencyGrid::for_samples(x.len(), l)?;
    let single = single_taper_estimates(x, bank, k, l)?;
    let sigma2 = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
    let (values, weights, iterations, converged) = adaptive_weights(&single, bank.eigenvalues(), sigma2, tol, max_iter)?;
    Ok(AdaptiveResult {
        estimate: SpectralEstimate {
            grid,
            values,
            method: Method::Adaptive,
            meta: EstimateMeta {
                n: x.len(),
                w: Some(bank.w()),
                k: Some(k),
                fft_count: Some(k),
                ..Default::default()
            },
        },
        weights,
        iterations,
        converged,
    })
}

/// `|10 log10(estimate / truth)|`, or `+inf` when exactly one side is not positive.
pub fn log_deviation(estimate: f64, truth: f64) -> f64 {
    if estimate > 0.0 && truth > 0.0 {
        (10.0 * (estimate / truth).log10()).abs()
    } else if estimate == 0.0 && truth == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Per-frequency log deviation in dB against a true spectrum.
pub fn mean_log_deviation(estimate: &SpectralEstimate, truth: &dyn PowerSpectrum) -> Vec<f64> {
    estimate
        .grid
        .frequencies()
        .zip(&estimate.values)
        .map(|(f, &v)| log_deviation(v, truth.density(f)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpss::build_taper_bank;
    use crate::synth::PiecewisePsd;
    use std::f64::consts::PI;

    fn signal(n: usize, seed: u64) -> Vec<Complex64> {
        let mut s = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        (0..n).map(|_| Complex64::new(next(), next())).collect()
    }

    fn dtft_power(x: &[Complex64], taper: &[f64], f: f64) -> f64 {
        x.iter()
            .zip(taper)
            .enumerate()
            .map(|(t, (xi, w))| xi * w * Complex64::from_polar(1.0, -2.0 * PI * f * t as f64))
            .sum::<Complex64>()
            .norm_sqr()
    }

    #[test]
    fn periodogram_of_on_grid_tone() {
        let (n, l, m) = (16, 32, 5);
        let x: Vec<Complex64> = (0..n)
            .map(|t| Complex64::from_polar(1.0, 2.0 * PI * m as f64 * t as f64 / l as f64))
            .collect();
        let p = periodogram(&x, l).unwrap();
        assert!((p.values[m] - n as f64).abs() < 1e-12);
        let zero = periodogram(&[Complex64::new(0.0, 0.0); 16], 32).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn periodogram_matches_direct_sum() {
        let x = signal(16, 3);
        let p = periodogram(&x, 32).unwrap();
        let ones = vec![1.0; 16];
        for (i, &v) in p.values.iter().enumerate() {
            let direct = dtft_power(&x, &ones, i as f64 / 32.0) / 16.0;
            assert!((v - direct).abs() <= 1e-12 * direct.max(1.0));
        }
        assert!(periodogram(&x, 15).is_err());
    }

    #[test]
    fn parseval() {
        let x = signal(40, 9);
        let p = periodogram(&x, 97).unwrap();
        let mean = p.values.iter().sum::<f64>() / 97.0;
        let energy = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / 40.0;
        assert!((mean - energy).abs() < 1e-10);
    }

    #[test]
    fn rectangular_taper_is_the_periodogram() {
        let x = signal(25, 1);
        let taper = vec![1.0 / 5.0; 25];
        let a = tapered_periodogram(&x, &taper, 50).unwrap();
        let b = periodogram(&x, 50).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() <= 1e-12 * v.max(1.0));
        }
        assert!(tapered_periodogram(&x, &[0.5; 25], 50).is_err());
        let z = tapered_periodogram(&[Complex64::new(0.0, 0.0); 25], &taper, 50).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn slepian_taper_matches_direct_sum() {
        let bank = build_taper_bank(64, 0.1, 1).unwrap();
        let x = signal(64, 5);
        let s0 = bank.taper(0).unwrap();
        let est = tapered_periodogram(&x, s0, 128).unwrap();
        for (i, &v) in est.values.iter().enumerate() {
            let direct = dtft_power(&x, s0, i as f64 / 128.0);
            assert!((v - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn single_taper_multitaper_is_tapered_periodogram() {
        let bank = build_taper_bank(32, 0.1, 4).unwrap();
        let x = signal(32, 2);
        let a = multitaper_exact(&x, &bank, 1, 64).unwrap();
        let b = tapered_periodogram(&x, bank.taper(0).unwrap(), 64).unwrap();
        assert_eq!(a.values, b.values);
        assert!(multitaper_exact(&x, &bank, 5, 64).is_err());
        assert!(multitaper_exact(&x, &bank, 0, 64).is_err());
        assert_eq!(multitaper_exact(&x, &bank, 4, 64).unwrap().meta.fft_count, Some(4));
    }

    #[test]
    fn multitaper_equals_subspace_projection_energy() {
        use nalgebra::{DMatrix, DVector};
        let (n, k, l) = (64, 8, 128);
        let bank = build_taper_bank(n, 0.08, k).unwrap();
        let x = signal(n, 11);
        let est = multitaper_exact(&x, &bank, k, l).unwrap();
        let sk = DMatrix::from_fn(n, k, |r, c| Complex64::new(bank.taper(c).unwrap()[r], 0.0));
        for i in 0..l {
            let f = i as f64 / l as f64;
            let ex = DVector::from_fn(n, |t, _| Complex64::from_polar(1.0, -2.0 * PI * f * t as f64) * x[t]);
            let proj = sk.adjoint() * ex;
            let energy = proj.norm_squared() / k as f64;
            assert!((est.values[i] - energy).abs() <= 1e-10 * energy.max(1.0));
        }
    }

    #[test]
    fn sign_flips_do_not_change_the_estimate() {
        let bank = build_taper_bank(48, 0.1, 6).unwrap();
        let x = signal(48, 4);
        let base = multitaper_exact(&x, &bank, 6, 96).unwrap();
        let mut data = Vec::new();
        for (i, s, _) in bank.iter() {
            let sign = if i % 3 == 1 { -1.0 } else { 1.0 };
            data.extend(s.iter().map(|v| v * sign));
        }
        let flipped = TaperBank::from_parts(48, 0.1, 0, bank.eigenvalues().to_vec(), data);
        let other = multitaper_exact(&x, &flipped, 6, 96).unwrap();
        for (a, b) in base.values.iter().zip(&other.values) {
            assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn spectral_window_properties() {
        let (n, w, k) = (256, 0.02, 8);
        let bank = build_taper_bank(n, w, k).unwrap();
        let l = 8 * n;
        let psi = spectral_window(&bank, k, l).unwrap();
        let total = psi.iter().sum::<f64>() / l as f64;
        assert!((total - 1.0).abs() < 1e-6);
        for i in 1..l {
            assert!((psi[i] - psi[l - i]).abs() < 1e-10);
        }
        assert!(psi.iter().all(|&v| v >= 0.0 && v <= n as f64 / k as f64 + 1e-9));
    }

    #[test]
    fn adaptive_reduces_to_average_when_fully_concentrated() {
        let single = vec![vec![1.0, 4.0, 2.0], vec![3.0, 2.0, 2.0], vec![5.0, 0.0, 8.0]];
        let (values, weights, _, converged) = adaptive_weights(&single, &[1.0, 1.0, 1.0], 0.7, 1e-12, 100).unwrap();
        assert!(converged);
        for f in 0..3 {
            let avg = (single[0][f] + single[1][f] + single[2][f]) / 3.0;
            assert!((values[f] - avg).abs() < 1e-12);
            assert!((weights[0][f] - weights[2][f]).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_zero_input() {
        let bank = build_taper_bank(32, 0.1, 4).unwrap();
        let res = adaptive_multitaper(&[Complex64::new(0.0, 0.0); 32], &bank, 4, 32, 1e-8, 100).unwrap();
        assert!(res.converged);
        assert!(res.estimate.values.iter().all(|&v| v == 0.0));
        assert!(res.weights.iter().flatten().all(|w| w.is_finite()));
    }

    #[test]
    fn adaptive_estimate_consistent_with_weights() {
        let bank = build_taper_bank(128, 0.05, 12).unwrap();
        let x = signal(128, 21);
        let res = adaptive_multitaper(&x, &bank, 12, 256, 1e-10, 1000).unwrap();
        let single = single_taper_estimates(&x, &bank, 12, 256).unwrap();
        for f in 0..256 {
            let num: f64 = (0..12).map(|i| res.weights[i][f] * single[i][f]).sum();
            let den: f64 = (0..12).map(|i| res.weights[i][f]).sum();
            assert!((res.estimate.values[f] - num / den).abs() <= 1e-10 * res.estimate.values[f].max(1.0));
            for i in 0..12 {
                let a = res.weights[i][f];
                assert!(a.is_finite() && a >= 0.0);
            }
        }
    }

    #[test]
    fn adaptive_weights_approach_inverse_eigenvalue_at_high_power() {
        // alpha depends on x only through S / sigma^2, so the limit is reached by
        // raising the single-taper estimates far above sigma^2
        let bank = build_taper_bank(128, 0.05, 12).unwrap();
        let lams = &bank.eigenvalues()[..12];
        let single: Vec<Vec<f64>> = (0..12).map(|i| vec![1e6 * (1.0 + 0.01 * i as f64)]).collect();
        let (_, weights, _, converged) = adaptive_weights(&single, lams, 1.0, 1e-12, 1000).unwrap();
        assert!(converged);
        for i in 0..12 {
            assert!((weights[i][0] * lams[i] - 1.0).abs() < 1e-4, "taper {i}: {}", weights[i][0] * lams[i]);
        }
        // the same holds for any common rescaling of estimates and sigma^2
        let scaled: Vec<Vec<f64>> = single.iter().map(|v| vec![v[0] * 1e6]).collect();
        let (_, w2, _, _) = adaptive_weights(&scaled, lams, 1e6, 1e-12, 1000).unwrap();
        for i in 0..12 {
            assert!((w2[i][0] - weights[i][0]).abs() < 1e-9 * weights[i][0]);
        }
    }

    #[test]
    fn log_deviation_cases() {
        let truth = PiecewisePsd::flat(2.0).unwrap();
        let grid = FrequencyGrid::new(8).unwrap();
        let same = SpectralEstimate {
            grid,
            values: vec![2.0; 8],
            method: Method::Periodogram,
            meta: EstimateMeta::default(),
        };
        assert!(mean_log_deviation(&same, &truth).iter().all(|&v| v == 0.0));
        let double = SpectralEstimate {
            values: vec![4.0; 8],
            ..same.clone()
        };
        for v in mean_log_deviation(&double, &truth) {
            assert!((v - 3.010299956639812).abs() < 1e-12);
        }
        let zero = SpectralEstimate {
            values: vec![0.0; 8],
            ..same
        };
        assert!(mean_log_deviation(&zero, &truth).iter().all(|v| v.is_infinite()));
    }
}
