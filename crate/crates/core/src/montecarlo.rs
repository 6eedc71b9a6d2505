//! Monte Carlo comparison of estimators against a known spectrum.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{bias_bound_general, local_psd_stats, sigma_stats, variance_bound};
use crate::error::{param, Result};
use crate::estimators::{log_deviation, FrequencyGrid};
use crate::method::{MethodSpec, PreparedMethod};
use crate::synth::{PowerSpectrum, ProcessSampler, Psd};

/// Per-coordinate sample moments. Sums are taken about the first observation
/// to limit cancellation when the mean is large relative to the spread.
#[derive(Debug, Clone)]
pub struct Moments {
    count: usize,
    shift: Vec<f64>,
    sums: [Vec<f64>; 4],
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self { count: 0, shift: vec![0.0; len], sums: std::array::from_fn(|_| vec![0.0; len]) }
    }

    pub fn push(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.shift.len());
        if self.count == 0 {
            self.shift.copy_from_slice(values);
        }
        self.count += 1;
        for (i, v) in values.iter().enumerate() {
            let d = v - self.shift[i];
            let mut p = d;
            for s in &mut self.sums {
                s[i] += p;
                p *= d;
            }
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn raw(&self, i: usize) -> [f64; 4] {
        let t = self.count as f64;
        std::array::from_fn(|j| self.sums[j][i] / t)
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.shift.len()).map(|i| self.shift[i] + self.raw(i)[0]).collect()
    }

    /// Unbiased sample variance (0 for fewer than two observations).
    pub fn variance(&self) -> Vec<f64> {
        let t = self.count as f64;
        (0..self.shift.len())
            .map(|i| {
                if self.count < 2 {
                    return 0.0;
                }
                let [m1, m2, ..] = self.raw(i);
                ((m2 - m1 * m1) * t / (t - 1.0)).max(0.0)
            })
            .collect()
    }

    /// Standard error of the mean.
    pub fn mean_se(&self) -> Vec<f64> {
        let t = self.count as f64;
        self.variance().iter().map(|v| (v / t).sqrt()).collect()
    }

    /// Standard error of the sample variance, `sqrt((mu4 - sigma^4) / T)`.
    pub fn variance_se(&self) -> Vec<f64> {
        let t = self.count as f64;
        (0..self.shift.len())
            .map(|i| {
                let [m1, m2, m3, m4] = self.raw(i);
                let var = m2 - m1 * m1;
                let mu4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1.powi(4);
                ((mu4 - var * var).max(0.0) / t).sqrt()
            })
            .collect()
    }
}

/// Runs `trials` draws, mapping each in parallel and folding the results in
/// trial order, so the outcome does not depend on the thread count.
pub fn run_trials<T, M, F>(sampler: &ProcessSampler, trials: usize, map: M, mut fold: F) -> Result<()>
where
    T: Send,
    M: Fn(u64, &[Complex64]) -> Result<T> + Sync,
    F: FnMut(u64, T),
{
    let chunk = (4 * rayon::current_num_threads()).max(8);
    let mut start = 0;
    while start < trials {
        let end = (start + chunk).min(trials);
        let out: Vec<Result<T>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let x = sampler.draw(i as u64);
                map(i as u64, &x)
            })
            .collect();
        for (i, r) in (start..end).zip(out) {
            fold(i as u64, r?);
        }
        start = end;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub psd: Psd,
    pub n: usize,
    pub l: usize,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<MethodSpec>,
    /// Bandwidth for methods that do not set their own.
    pub default_w: Option<f64>,
    /// Frequency bands over which mean deviations are also reported.
    pub bands: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BandDeviation {
    pub start: f64,
    pub end: f64,
    pub mean_log_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub label: String,
    pub k: usize,
    pub w: Option<f64>,
    /// Mean log deviation in dB averaged over trials and the whole grid.
    pub average_mld: f64,
    pub bands: Vec<BandDeviation>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub mld: Vec<f64>,
    pub bias: Vec<f64>,
    /// Standard errors; absent when the trial count makes them meaningless.
    pub bias_se: Option<Vec<f64>>,
    pub variance_se: Option<Vec<f64>>,
    /// Bounds for exact multitaper methods on piecewise-constant spectra.
    pub bias_bound: Option<Vec<f64>>,
    pub variance_bound: Option<Vec<f64>>,
    /// Grid points where the empirical value exceeds the bound by more than 3 standard errors.
    pub bias_violations: Option<usize>,
    pub variance_violations: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub n: usize,
    pub l: usize,
    pub trials: usize,
    pub seed: u64,
    pub sampler: String,
    /// False when there are too few trials for standard errors.
    pub mc_reliable: bool,
    pub frequencies: Vec<f64>,
    pub truth: Vec<f64>,
    pub methods: Vec<MethodReport>,
}

pub fn simulate(config: &SimulationConfig) -> Result<SimulationReport> {
    if config.trials == 0 {
        return param("need at least one trial");
    }
    if config.methods.is_empty() {
        return param("need at least one method");
    }
    let grid = FrequencyGrid::for_samples(config.n, config.l)?;
    let freqs: Vec<f64> = grid.frequencies().collect();
    let truth: Vec<f64> = freqs.iter().map(|&f| config.psd.density(f)).collect();
    let methods: Vec<PreparedMethod> = config
        .methods
        .iter()
        .map(|m| m.prepare(config.n, config.default_w))
        .collect::<Result<_>>()?;
    let sampler = ProcessSampler::new(&config.psd, config.n, config.seed)?;
    let l = config.l;
    let mut values: Vec<Moments> = methods.iter().map(|_| Moments::new(l)).collect();
    let mut deviations: Vec<Moments> = methods.iter().map(|_| Moments::new(l)).collect();
    run_trials(
        &sampler,
        config.trials,
        |_, x| {
            methods
                .iter()
                .map(|m| {
                    let est = m.estimate(x, l)?;
                    let dev: Vec<f64> = est.values.iter().zip(&truth).map(|(&e, &s)| log_deviation(e, s)).collect();
                    Ok((est.values, dev))
                })
                .collect::<Result<Vec<_>>>()
        },
        |_, per_method| {
            for (i, (v, d)) in per_method.into_iter().enumerate() {
                values[i].push(&v);
                deviations[i].push(&d);
            }
        },
    )?;
    let reliable = config.trials >= 2;
    let reports = methods
        .iter()
        .enumerate()
        .map(|(i, m)| method_report(m, &values[i], &deviations[i], config, &freqs, &truth, reliable))
        .collect::<Result<_>>()?;
    Ok(SimulationReport {
        n: config.n,
        l,
        trials: config.trials,
        seed: config.seed,
        sampler: format!("{:?}", sampler.factorization()).to_lowercase(),
        mc_reliable: reliable,
        frequencies: freqs,
        truth,
        methods: reports,
    })
}

fn method_report(
    m: &PreparedMethod,
    values: &Moments,
    deviations: &Moments,
    config: &SimulationConfig,
    freqs: &[f64],
    truth: &[f64],
    reliable: bool,
) -> Result<MethodReport> {
    let mean = values.mean();
    let variance = values.variance();
    let mld = deviations.mean();
    let bias: Vec<f64> = mean.iter().zip(truth).map(|(m, s)| m - s).collect();
    let average_mld = mld.iter().sum::<f64>() / mld.len() as f64;
    let bands = config
        .bands
        .iter()
        .map(|&(start, end)| {
            let inside: Vec<f64> = freqs
                .iter()
                .zip(&mld)
                .filter(|(f, _)| **f >= start && **f <= end)
                .map(|(_, d)| *d)
                .collect();
            BandDeviation { start, end, mean_log_deviation: inside.iter().sum::<f64>() / inside.len().max(1) as f64 }
        })
        .collect();
    let bias_se = reliable.then(|| values.mean_se());
    let variance_se = reliable.then(|| values.variance_se());
    let (mut bias_bound, mut var_bound) = (None, None);
    if let (Some(bank), Some(psd)) = (m.averaging_bank(), config.psd.as_piecewise()) {
        let sig = sigma_stats(bank.eigenvalues(), m.k())?;
        let mut bb = Vec::with_capacity(freqs.len());
        let mut vb = Vec::with_capacity(freqs.len());
        for &f in freqs {
            let loc = local_psd_stats(psd, f, bank.w())?;
            bb.push(bias_bound_general(&loc, &sig));
            vb.push(variance_bound(&loc, &sig, config.n));
        }
        bias_bound = Some(bb);
        var_bound = Some(vb);
    }
    let bias_violations = match (&bias_bound, &bias_se) {
        (Some(b), Some(se)) => Some((0..b.len()).filter(|&i| bias[i].abs() > b[i] + 3.0 * se[i]).count()),
        _ => None,
    };
    let variance_violations = match (&var_bound, &variance_se) {
        (Some(b), Some(se)) => Some((0..b.len()).filter(|&i| variance[i] > b[i] + 3.0 * se[i]).count()),
        _ => None,
    };
    Ok(MethodReport {
        label: m.label().to_string(),
        k: m.k(),
        w: m.w(),
        average_mld,
        bands,
        mean,
        variance,
        mld,
        bias,
        bias_se,
        variance_se,
        bias_bound,
        variance_bound: var_bound,
        bias_violations,
        variance_violations,
    })
}

/// Plot data: frequency, true density, then mean estimate and mean log
/// deviation for each method.
pub fn write_report_csv<W: Write>(report: &SimulationReport, mut out: W) -> Result<()> {
    write!(out, "frequency,truth")?;
    for m in &report.methods {
        write!(out, ",{0}_mean,{0}_mld", m.label)?;
    }
    writeln!(out)?;
    for i in 0..report.frequencies.len() {
        write!(out, "{:.16e},{:.16e}", report.frequencies[i], report.truth[i])?;
        for m in &report.methods {
            write!(out, ",{:.16e},{:.16e}", m.mean[i], m.mld[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
