//! Timing of the exact and approximate multitaper paths as `n` grows.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::dpss::{build_taper_bank, select_num_tapers, transition_width_bound};
use crate::error::{param, Result};
use crate::estimators::multitaper_exact;
use crate::fast::FastPlan;

/// `W = 0.08 n^(-1/5)`, close to the mean-squared-error optimal scaling.
pub fn bench_bandwidth(n: usize) -> f64 {
    0.08 * (n as f64).powf(-0.2)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub epsilons: Vec<f64>,
    /// Taper selection threshold.
    pub delta: f64,
    /// The exact path is skipped above this length.
    pub exact_max_n: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ns: (10..=18).map(|p| 1usize << p).collect(),
            epsilons: vec![1e-4, 1e-8, 1e-12],
            delta: 1e-3,
            exact_max_n: 1 << 17,
            repeats: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PathTiming {
    /// Seconds spent computing tapers.
    pub precompute: f64,
    /// Seconds per estimate, best of the repeats.
    pub compute: f64,
    /// Length-`l` transforms per estimate.
    pub ffts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxTiming {
    pub epsilon: f64,
    pub transition: usize,
    pub transition_bound: f64,
    #[serde(flatten)]
    pub timing: PathTiming,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub l: usize,
    pub w: f64,
    pub k: usize,
    pub exact: Option<PathTiming>,
    pub approx: Vec<ApproxTiming>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerFit {
    pub coefficient: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub available_parallelism: usize,
}

impl MachineInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
            available_parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub machine: MachineInfo,
    pub rows: Vec<BenchRow>,
    /// Fit of exact compute time against `n`.
    pub exact_fit: Option<PowerFit>,
    /// Fits of approximate compute time, one per tolerance.
    pub approx_fits: Vec<(f64, Option<PowerFit>)>,
}

/// Least-squares fit of `log t = log a + p log n`; needs two distinct `n`.
pub fn fit_power_law(ns: &[f64], ts: &[f64]) -> Option<PowerFit> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(ts)
        .filter(|(n, t)| **n > 0.0 && **t > 0.0)
        .map(|(n, t)| (n.ln(), t.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    Some(PowerFit { coefficient: (my - exponent * mx).exp(), exponent })
}

fn white_noise(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect()
}

fn best_of<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut best = f64::INFINITY;
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let out = f()?;
        best = best.min(start.elapsed().as_secs_f64());
        last = Some(out);
    }
    Ok((best, last.expect("at least one repeat")))
}

/// Times one length; the grid is `[n]/n` as in the usual benchmark setup.
pub fn bench_one(n: usize, config: &BenchConfig) -> Result<BenchRow> {
    let w = bench_bandwidth(n);
    let k = select_num_tapers(n, w, config.delta)?;
    if k == 0 {
        return param(format!("no tapers pass delta = {} at n = {n}", config.delta));
    }
    let l = n;
    let x = white_noise(n, config.seed ^ n as u64);
    let exact = if n <= config.exact_max_n {
        let start = Instant::now();
        let bank = build_taper_bank(n, w, k)?;
        let precompute = start.elapsed().as_secs_f64();
        let (compute, est) = best_of(config.repeats, || multitaper_exact(&x, &bank, k, l))?;
        Some(PathTiming { precompute, compute, ffts: est.meta.fft_count.unwrap_or(k) })
    } else {
        None
    };
    let mut approx = Vec::new();
    for &eps in &config.epsilons {
        let start = Instant::now();
        let plan = FastPlan::new(n, w, k, eps)?;
        let precompute = start.elapsed().as_secs_f64();
        let (compute, est) = best_of(config.repeats, || plan.estimate(&x, l))?;
        approx.push(ApproxTiming {
            epsilon: eps,
            transition: plan.partition().transition().len(),
            transition_bound: transition_width_bound(n, w, eps)?,
            timing: PathTiming { precompute, compute, ffts: est.meta.fft_count.unwrap_or(0) },
        });
    }
    Ok(BenchRow { n, l, w, k, exact, approx })
}

pub fn run_bench(config: &BenchConfig, mut progress: impl FnMut(&BenchRow)) -> Result<BenchReport> {
    let mut rows = Vec::new();
    for &n in &config.ns {
        let row = bench_one(n, config)?;
        progress(&row);
        rows.push(row);
    }
    let exact: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.exact.as_ref().map(|e| (r.n as f64, e.compute))).collect();
    let exact_fit = fit_power_law(&exact.iter().map(|p| p.0).collect::<Vec<_>>(), &exact.iter().map(|p| p.1).collect::<Vec<_>>());
    let approx_fits = config
        .epsilons
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let ts: Vec<f64> = rows.iter().map(|r| r.approx[i].timing.compute).collect();
            (eps, fit_power_law(&ns, &ts))
        })
        .collect();
    Ok(BenchReport { machine: MachineInfo::current(), rows, exact_fit, approx_fits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_power_law() {
        let ns = [1e3, 1e4, 1e5];
        let ts: Vec<f64> = ns.iter().map(|n: &f64| 2e-7 * n.powf(1.25)).collect();
        let fit = fit_power_law(&ns, &ts).unwrap();
        assert!((fit.exponent - 1.25).abs() < 1e-12);
        assert!((fit.coefficient - 2e-7).abs() < 1e-18);
        assert!(fit_power_law(&[1e3], &[1.0]).is_none());
        assert!(fit_power_law(&[1e3, 1e3], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn small_bench_counts_transforms() {
        let config = BenchConfig { ns: vec![1 << 10, 1 << 11], repeats: 1, ..Default::default() };
        let report = run_bench(&config, |_| {}).unwrap();
        for row in &report.rows {
            let exact = row.exact.as_ref().unwrap();
            assert_eq!(exact.ffts, row.k);
            for a in &row.approx {
                // l = n is below 2n, so Psi costs six length-l equivalents
                assert_eq!(a.timing.ffts, 6 + a.transition);
                assert!(a.transition as f64 <= a.transition_bound.ceil());
            }
        }
        assert_eq!(report.approx_fits.len(), 3);
    }
}
