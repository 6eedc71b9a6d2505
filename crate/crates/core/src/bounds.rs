//! Non-asymptotic bias, variance, covariance and concentration bounds for
//! the multitaper estimate of a Gaussian process, plus exact moments used to
//! check them.

use num_complex::Complex64;
use serde::Serialize;

use crate::dpss::TaperBank;
use crate::error::{param, Error, Result};
use crate::fft;
use crate::synth::{PiecewisePsd, PowerSpectrum};

/// Mean and root-mean-square of `1 - lambda_k` over the first `k` tapers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaStats {
    pub k: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    /// `lambda_{k-1}`.
    pub lambda_last: f64,
}

pub fn sigma_stats(eigenvalues: &[f64], k: usize) -> Result<SigmaStats> {
    if k == 0 || k > eigenvalues.len() {
        return param(format!("taper count {k} must be in 1..={}", eigenvalues.len()));
    }
    let lams = &eigenvalues[..k];
    if lams.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return param("eigenvalues must lie in [0, 1]");
    }
    let kf = k as f64;
    let sigma1 = lams.iter().map(|l| 1.0 - l).sum::<f64>() / kf;
    let sigma2 = (lams.iter().map(|l| (1.0 - l).powi(2)).sum::<f64>() / kf).sqrt();
    Ok(SigmaStats { k, sigma1, sigma2, lambda_last: lams[k - 1] })
}

/// Minimum, maximum, average and RMS of `S` over `[f - w, f + w]`, the global
/// maximum, and (when known) a bound on `|S''|` over the interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalPsdStats {
    pub f: f64,
    pub w: f64,
    pub m_f: f64,
    pub big_m_f: f64,
    pub a_f: f64,
    pub r_f: f64,
    pub big_m: f64,
    pub m2_f: Option<f64>,
}

/// Exact interval statistics of a piecewise-constant density. Extremes are
/// taken over pieces that overlap the interval in a set of positive length.
pub fn local_psd_stats(psd: &PiecewisePsd, f: f64, w: f64) -> Result<LocalPsdStats> {
    if !(w > 0.0 && w < 0.5) || !f.is_finite() {
        return param(format!("need finite f and 0 < w < 1/2, got f = {f}, w = {w}"));
    }
    let parts = psd.overlaps(f - w, f + w);
    let total: f64 = parts.iter().map(|p| p.0).sum();
    let m_f = parts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let big_m_f = parts.iter().map(|p| p.1).fold(0.0, f64::max);
    let a_f = parts.iter().map(|(len, s)| len * s).sum::<f64>() / total;
    let r_f = (parts.iter().map(|(len, s)| len * s * s).sum::<f64>() / total).sqrt();
    // strictly inside one piece, with a margin so the closed interval avoids jumps
    let margin = 1e-9;
    let strictly_inside = 2.0 * (w + margin) >= 1.0 && parts.len() == 1
        || psd.overlaps(f - w - margin, f + w + margin).len() == 1;
    Ok(LocalPsdStats {
        f,
        w,
        m_f,
        big_m_f,
        a_f: a_f.clamp(m_f, big_m_f),
        r_f: r_f.clamp(m_f, big_m_f),
        big_m: psd.max_density(),
        m2_f: strictly_inside.then_some(0.0),
    })
}

/// Bias bound for spectra that are twice continuously differentiable on the interval.
pub fn bias_bound_smooth(stats: &LocalPsdStats, sig: &SigmaStats, n: usize) -> Result<f64> {
    let m2 = stats.m2_f.ok_or_else(|| {
        Error::Inapplicable(format!(
            "the density is not twice differentiable on [{}, {}]",
            stats.f - stats.w,
            stats.f + stats.w
        ))
    })?;
    let w = stats.w;
    Ok(m2 * n as f64 * w.powi(3) / (3.0 * sig.k as f64) + (stats.big_m + stats.big_m_f) * sig.sigma1)
}

/// Bias bound requiring only boundedness: `(M_f - m_f)(1 - S1) + M S1`.
pub fn bias_bound_general(stats: &LocalPsdStats, sig: &SigmaStats) -> f64 {
    (stats.big_m_f - stats.m_f) * (1.0 - sig.sigma1) + stats.big_m * sig.sigma1
}

/// `(1/K) (R_f sqrt(2NW/K) + M S2)^2`.
pub fn variance_bound(stats: &LocalPsdStats, sig: &SigmaStats, n: usize) -> f64 {
    let k = sig.k as f64;
    let t = stats.r_f * (2.0 * n as f64 * stats.w / k).sqrt() + stats.big_m * sig.sigma2;
    t * t / k
}

/// Distance between two frequencies on the unit circle.
pub fn circular_distance(f1: f64, f2: f64) -> f64 {
    let d = (f1 - f2).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Covariance bound for frequencies more than `2W` apart on the circle.
pub fn covariance_bound(s1: &LocalPsdStats, s2: &LocalPsdStats, sig: &SigmaStats, n: usize) -> Result<f64> {
    let w = s1.w;
    let d = circular_distance(s1.f, s2.f);
    if !(d > 2.0 * w) {
        return Err(Error::Inapplicable(format!(
            "frequencies {} and {} are {d} apart, not more than 2W = {}",
            s1.f,
            s2.f,
            2.0 * w
        )));
    }
    let k = sig.k as f64;
    let t = (s1.r_f + s2.r_f) * (2.0 * n as f64 * w / k * sig.sigma1).sqrt() + s1.big_m.max(s2.big_m) * sig.sigma1;
    Ok(t * t)
}

/// Lower bound on the concentration parameter `kappa_f`; may be negative,
/// in which case the tail bounds are vacuous.
pub fn kappa_lower_bound(stats: &LocalPsdStats, sig: &SigmaStats, n: usize) -> Result<f64> {
    let den = stats.big_m_f + (stats.big_m - stats.big_m_f) * (1.0 - sig.lambda_last);
    if !(den > 0.0) {
        return Err(Error::Inapplicable("kappa bound has a zero denominator".into()));
    }
    let num = sig.k as f64 * (1.0 - sig.sigma1) * stats.big_m_f - 2.0 * n as f64 * stats.w * (stats.big_m_f - stats.a_f);
    Ok(num / den)
}

/// `(upper, lower)` tail bounds for `P{S >= beta E S}` (beta > 1) and
/// `P{S <= beta E S}` (beta < 1); the side that does not apply is 1.
pub fn tail_probability(kappa: f64, beta: f64) -> Result<(f64, f64)> {
    if !(kappa > 0.0) {
        return param(format!("kappa = {kappa} must be positive"));
    }
    if !(beta > 0.0) || beta == 1.0 || !beta.is_finite() {
        return param(format!("beta = {beta} must be positive and different from 1"));
    }
    let e = (-kappa * (beta - 1.0 - beta.ln())).exp();
    Ok(if beta > 1.0 { (e / beta, 1.0) } else { (1.0, e) })
}

/// All bounds at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub w: f64,
    pub k: usize,
    pub f: f64,
    pub sigma: SigmaStats,
    pub local: LocalPsdStats,
    pub bias_smooth: Option<f64>,
    pub bias_general: f64,
    pub variance: f64,
    pub kappa_lower: Option<f64>,
    pub kappa_vacuous: bool,
}

impl BoundReport {
    pub fn evaluate(psd: &PiecewisePsd, eigenvalues: &[f64], n: usize, w: f64, k: usize, f: f64) -> Result<Self> {
        let sigma = sigma_stats(eigenvalues, k)?;
        let local = local_psd_stats(psd, f, w)?;
        let kappa_lower = kappa_lower_bound(&local, &sigma, n).ok();
        Ok(Self {
            n,
            w,
            k,
            f,
            sigma,
            local,
            bias_smooth: bias_bound_smooth(&local, &sigma, n).ok(),
            bias_general: bias_bound_general(&local, &sigma),
            variance: variance_bound(&local, &sigma, n),
            kappa_lower,
            kappa_vacuous: kappa_lower.is_none_or(|v| v <= 0.0),
        })
    }

    /// One `name value` pair per line; absent values print as `none`.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:e}"));
        let lines = [
            ("n", self.n.to_string()),
            ("w", format!("{:e}", self.w)),
            ("k", self.k.to_string()),
            ("f", format!("{:e}", self.f)),
            ("sigma1", format!("{:e}", self.sigma.sigma1)),
            ("sigma2", format!("{:e}", self.sigma.sigma2)),
            ("lambda_last", format!("{:e}", self.sigma.lambda_last)),
            ("m_f", format!("{:e}", self.local.m_f)),
            ("big_m_f", format!("{:e}", self.local.big_m_f)),
            ("a_f", format!("{:e}", self.local.a_f)),
            ("r_f", format!("{:e}", self.local.r_f)),
            ("big_m", format!("{:e}", self.local.big_m)),
            ("m2_f", opt(self.local.m2_f)),
            ("bias_smooth", opt(self.bias_smooth)),
            ("bias_general", format!("{:e}", self.bias_general)),
            ("variance", format!("{:e}", self.variance)),
            ("kappa_lower", opt(self.kappa_lower)),
            ("kappa_vacuous", self.kappa_vacuous.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} {v}\n")).collect()
    }
}

fn check_moments_input(bank: &TaperBank, k: usize) -> Result<()> {
    bank.require_prefix(k)
}

/// Multiplies `y` by the Hermitian Toeplitz covariance `R[m, n] = r(m - n)`
/// through a circulant embedding of length `spectrum.len()`.
struct ToeplitzOp {
    n: usize,
    spectrum: Vec<Complex64>,
}

impl ToeplitzOp {
    fn new(psd: &dyn PowerSpectrum, n: usize) -> Self {
        let m = (2 * n).next_power_of_two();
        let r = psd.autocorrelations(n);
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        for d in 0..n {
            c[d] = r[d];
            if d > 0 {
                c[m - d] = r[d].conj();
            }
        }
        fft::forward(&mut c);
        Self { n, spectrum: c }
    }

    fn apply(&self, y: &[Complex64]) -> Vec<Complex64> {
        let m = self.spectrum.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        buf[..self.n].copy_from_slice(y);
        fft::forward(&mut buf);
        buf.iter_mut().zip(&self.spectrum).for_each(|(b, s)| *b *= s);
        fft::inverse(&mut buf);
        buf.truncate(self.n);
        buf.iter_mut().for_each(|b| *b /= m as f64);
        buf
    }
}

/// Exact `E S_mt(j / l)` for a Gaussian process with density `psd`:
/// `sum_d rho(d) r(d) e^{-j 2 pi f d}` with `rho` the averaged taper autocorrelation.
pub fn expected_multitaper(bank: &TaperBank, k: usize, psd: &dyn PowerSpectrum, l: usize) -> Result<Vec<f64>> {
    check_moments_input(bank, k)?;
    if l == 0 {
        return param("grid size must be positive");
    }
    let n = bank.n();
    let m = (2 * n).next_power_of_two();
    let mut rho = vec![Complex64::new(0.0, 0.0); m];
    for (_, s, _) in bank.iter().take(k) {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        buf.iter_mut().zip(s).for_each(|(b, &v)| *b = Complex64::new(v, 0.0));
        fft::forward(&mut buf);
        rho.iter_mut().zip(&buf).for_each(|(r, b)| *r += b.norm_sqr());
    }
    fft::inverse(&mut rho);
    let scale = 1.0 / (m as f64 * k as f64);
    let r = psd.autocorrelations(n);
    let mut g = vec![Complex64::new(0.0, 0.0); l];
    for d in 0..n {
        let rho_d = rho[d].re * scale;
        g[d % l] += rho_d * r[d];
        if d > 0 {
            g[(l - d % l) % l] += rho_d * r[d].conj();
        }
    }
    fft::forward(&mut g);
    Ok(g.iter().map(|z| z.re).collect())
}

/// Exact `Cov[S_mt(f1), S_mt(f2)]`; `f1 = f2` gives the variance.
pub fn multitaper_covariance(bank: &TaperBank, k: usize, psd: &dyn PowerSpectrum, f1: f64, f2: f64) -> Result<f64> {
    check_moments_input(bank, k)?;
    let n = bank.n();
    let op = ToeplitzOp::new(psd, n);
    let modulated = |f: f64| -> Vec<Vec<Complex64>> {
        bank.iter()
            .take(k)
            .map(|(_, s, _)| {
                s.iter()
                    .enumerate()
                    .map(|(t, &v)| v * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * t as f64))
                    .collect()
            })
            .collect()
    };
    let y1 = modulated(f1);
    let y2 = modulated(f2);
    let ry2: Vec<Vec<Complex64>> = y2.iter().map(|y| op.apply(y)).collect();
    let mut total = 0.0;
    for a in &y1 {
        for b in &ry2 {
            let g: Complex64 = a.iter().zip(b).map(|(a, b)| a.conj() * b).sum();
            total += g.norm_sqr();
        }
    }
    Ok(total / (k * k) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpss::build_taper_bank;
    use crate::synth::multiband_fixture;
    use nalgebra::DMatrix;

    fn flat(c: f64) -> PiecewisePsd {
        PiecewisePsd::flat(c).unwrap()
    }

    #[test]
    fn sigma_examples() {
        let s = sigma_stats(&[1.0, 1.0, 1.0], 3).unwrap();
        assert_eq!((s.sigma1, s.sigma2), (0.0, 0.0));
        let s = sigma_stats(&[1.0, 1.0, 0.5], 3).unwrap();
        assert!((s.sigma1 - 1.0 / 6.0).abs() < 1e-15);
        assert!((s.sigma2 - (1.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(sigma_stats(&[1.0], 2).is_err());
        assert!(sigma_stats(&[1.0], 0).is_err());
    }

    #[test]
    fn sigma_chain_for_the_standard_bank() {
        let bank = build_taper_bank(2000, 0.01, 39).unwrap();
        for k in [29, 36, 39] {
            let s = sigma_stats(bank.eigenvalues(), k).unwrap();
            assert!(0.0 <= s.sigma1 && s.sigma1 <= s.sigma2 && s.sigma2 <= 1.0 - s.lambda_last);
        }
        let s = sigma_stats(bank.eigenvalues(), 29).unwrap();
        assert!(s.sigma2 <= 1e-9);
    }

    #[test]
    fn local_stats_examples() {
        let s = local_psd_stats(&flat(3.0), 0.4, 0.05).unwrap();
        assert_eq!((s.m_f, s.big_m_f, s.a_f, s.r_f, s.big_m), (3.0, 3.0, 3.0, 3.0, 3.0));
        assert_eq!(s.m2_f, Some(0.0));
        let p = multiband_fixture();
        let s = local_psd_stats(&p, 0.30, 0.01).unwrap();
        assert_eq!((s.m_f, s.big_m_f, s.big_m), (1e9, 1e9, 1e9));
        assert!((s.a_f - 1e9).abs() < 1e-3 && (s.r_f - 1e9).abs() < 1e-3);
        let s = local_psd_stats(&p, 0.80, 0.01).unwrap();
        assert_eq!((s.m_f, s.big_m_f), (10.0, 10.0));
        assert_eq!(s.m2_f, Some(0.0));
        let s = local_psd_stats(&p, 0.22, 0.01).unwrap();
        assert_eq!((s.m_f, s.big_m_f), (1.0, 1e3));
        assert!((s.a_f - 1001.0 / 2.0).abs() < 1e-8);
        assert!((s.r_f - (1_000_001.0f64 / 2.0).sqrt()).abs() < 1e-8);
        assert_eq!(s.m2_f, None);
    }

    #[test]
    fn local_stats_wrap_around_zero() {
        let p = PiecewisePsd::from_bands(1.0, &[(0.95, 1.0, 4.0)]).unwrap();
        let s = local_psd_stats(&p, 0.0, 0.05).unwrap();
        assert_eq!((s.m_f, s.big_m_f), (1.0, 4.0));
        assert!((s.a_f - 2.5).abs() < 1e-12);
    }

    #[test]
    fn bias_examples() {
        let loc = local_psd_stats(&flat(2.0), 0.1, 0.02).unwrap();
        let sig = SigmaStats { k: 5, sigma1: 0.1, sigma2: 0.2, lambda_last: 0.5 };
        assert!((bias_bound_smooth(&loc, &sig, 100).unwrap() - 0.4).abs() < 1e-15);
        assert!((bias_bound_general(&loc, &sig) - 0.2).abs() < 1e-15);
        let zero = SigmaStats { sigma1: 0.0, ..sig };
        assert_eq!(bias_bound_smooth(&loc, &zero, 100).unwrap(), 0.0);
        let one = SigmaStats { sigma1: 1.0, ..sig };
        assert_eq!(bias_bound_general(&loc, &one), 2.0);
        let edge = local_psd_stats(&multiband_fixture(), 0.22, 0.01).unwrap();
        assert!(matches!(bias_bound_smooth(&edge, &sig, 100), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn variance_examples() {
        let (n, w) = (100, 0.05);
        let loc = local_psd_stats(&flat(3.0), 0.1, w).unwrap();
        let sig = SigmaStats { k: 10, sigma1: 0.0, sigma2: 0.0, lambda_last: 1.0 };
        assert!((variance_bound(&loc, &sig, n) - 0.9).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for k in 2..10 {
            let v = variance_bound(&loc, &SigmaStats { k, sigma2: 0.01, ..sig }, n);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn covariance_examples() {
        let p = multiband_fixture();
        let a = local_psd_stats(&p, 0.2, 0.01).unwrap();
        let b = local_psd_stats(&p, 0.8, 0.01).unwrap();
        let sig = SigmaStats { k: 29, sigma1: 1e-10, sigma2: 1e-10, lambda_last: 1.0 - 1e-9 };
        let ab = covariance_bound(&a, &b, &sig, 2000).unwrap();
        assert_eq!(ab, covariance_bound(&b, &a, &sig, 2000).unwrap());
        assert!(ab > 0.0);
        let z = SigmaStats { sigma1: 0.0, ..sig };
        assert_eq!(covariance_bound(&a, &b, &z, 2000).unwrap(), 0.0);
        let near = local_psd_stats(&p, 0.215, 0.01).unwrap();
        assert!(matches!(covariance_bound(&a, &near, &sig, 2000), Err(Error::Inapplicable(_))));
        // 0.995 and 0.005 are close on the circle
        let c = local_psd_stats(&p, 0.995, 0.01).unwrap();
        let d = local_psd_stats(&p, 0.005, 0.01).unwrap();
        assert!(covariance_bound(&c, &d, &sig, 2000).is_err());
    }

    #[test]
    fn kappa_examples() {
        let (n, w) = (100, 0.05);
        let loc = local_psd_stats(&flat(2.0), 0.3, w).unwrap();
        let sig = SigmaStats { k: 8, sigma1: 0.0, sigma2: 0.0, lambda_last: 1.0 };
        assert_eq!(kappa_lower_bound(&loc, &sig, n).unwrap(), 8.0);
        // k = 2nw with general sigma, M > c through a distant peak
        let p = PiecewisePsd::from_bands(2.0, &[(0.7, 0.75, 50.0)]).unwrap();
        let loc = local_psd_stats(&p, 0.3, w).unwrap();
        let sig = SigmaStats { k: 10, sigma1: 0.05, sigma2: 0.1, lambda_last: 0.9 };
        let want = 10.0 * 0.95 / (1.0 + (25.0 - 1.0) * 0.1);
        assert!((kappa_lower_bound(&loc, &sig, n).unwrap() - want).abs() < 1e-12);
        let zero = local_psd_stats(&flat(0.0), 0.3, w).unwrap();
        assert!(kappa_lower_bound(&zero, &SigmaStats { lambda_last: 1.0, ..sig }, n).is_err());
    }

    #[test]
    fn tail_examples() {
        let (up, low) = tail_probability(10.0, 2.0).unwrap();
        let want = 0.5 * (-10.0 * (1.0 - 2f64.ln())).exp();
        assert!((up - want).abs() < 1e-15 && (up - 0.0232448).abs() < 1e-6);
        assert_eq!(low, 1.0);
        let (up, low) = tail_probability(10.0, 0.5).unwrap();
        assert_eq!(up, 1.0);
        assert!(low < 1.0);
        assert!(tail_probability(10.0, 1.0 + 1e-9).unwrap().0 > 0.999);
        assert!(tail_probability(10.0, 1.0).is_err());
        assert!(tail_probability(-1.0, 2.0).is_err());
        assert!(tail_probability(20.0, 2.0).unwrap().0 < tail_probability(10.0, 2.0).unwrap().0);
    }

    #[test]
    fn bounds_grow_with_global_max() {
        let p = multiband_fixture();
        let loc = local_psd_stats(&p, 0.8, 0.01).unwrap();
        let big = LocalPsdStats { big_m: 2.0 * loc.big_m, ..loc };
        let sig = SigmaStats { k: 36, sigma1: 1e-5, sigma2: 2e-5, lambda_last: 0.999 };
        assert!(bias_bound_general(&big, &sig) > bias_bound_general(&loc, &sig));
        assert!(bias_bound_smooth(&big, &sig, 2000).unwrap() > bias_bound_smooth(&loc, &sig, 2000).unwrap());
        assert!(variance_bound(&big, &sig, 2000) > variance_bound(&loc, &sig, 2000));
        let other = local_psd_stats(&p, 0.2, 0.01).unwrap();
        let other_big = LocalPsdStats { big_m: 2.0 * other.big_m, ..other };
        assert!(covariance_bound(&big, &other_big, &sig, 2000).unwrap() > covariance_bound(&loc, &other, &sig, 2000).unwrap());
        // kappa's lower bound shrinks as M grows, loosening the tails
        assert!(kappa_lower_bound(&big, &sig, 2000).unwrap() < kappa_lower_bound(&loc, &sig, 2000).unwrap());
    }

    #[test]
    fn report_text_has_one_field_per_line() {
        let bank = build_taper_bank(200, 0.05, 12).unwrap();
        let r = BoundReport::evaluate(&multiband_fixture(), bank.eigenvalues(), 200, 0.05, 12, 0.6).unwrap();
        let text = r.to_text();
        assert_eq!(text.lines().count(), 18);
        assert!(text.lines().all(|l| l.split(' ').count() == 2));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["k"], 12);
    }

    fn dense_cov(psd: &dyn PowerSpectrum, n: usize) -> DMatrix<Complex64> {
        let r = psd.autocorrelations(n);
        DMatrix::from_fn(n, n, |a, b| if a >= b { r[a - b] } else { r[b - a].conj() })
    }

    fn dense_gram(bank: &TaperBank, k: usize, cov: &DMatrix<Complex64>, f1: f64, f2: f64) -> DMatrix<Complex64> {
        let n = bank.n();
        let y = |f: f64| {
            DMatrix::from_fn(n, k, |t, i| {
                bank.taper(i).unwrap()[t] * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * t as f64)
            })
        };
        y(f1).adjoint() * cov * y(f2)
    }

    #[test]
    fn exact_moments_match_dense_oracle() {
        let p = PiecewisePsd::from_bands(0.5, &[(0.1, 0.2, 30.0), (0.6, 0.62, 4.0)]).unwrap();
        let (n, k, l) = (40, 5, 64);
        let bank = build_taper_bank(n, 0.08, k).unwrap();
        let cov = dense_cov(&p, n);
        let mean = expected_multitaper(&bank, k, &p, l).unwrap();
        for j in [0, 7, 20, 41] {
            let f = j as f64 / l as f64;
            let g = dense_gram(&bank, k, &cov, f, f);
            let want = (0..k).map(|i| g[(i, i)].re).sum::<f64>() / k as f64;
            assert!((mean[j] - want).abs() < 1e-10 * want.max(1.0), "{} vs {want}", mean[j]);
        }
        for (f1, f2) in [(0.15, 0.15), (0.15, 0.61), (0.3, 0.9)] {
            let g = dense_gram(&bank, k, &cov, f1, f2);
            let want = g.iter().map(|z| z.norm_sqr()).sum::<f64>() / (k * k) as f64;
            let got = multitaper_covariance(&bank, k, &p, f1, f2).unwrap();
            assert!((got - want).abs() < 1e-9 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn exact_bias_respects_the_general_bound() {
        let p = multiband_fixture();
        let (n, w) = (512, 0.02);
        let bank = build_taper_bank(n, w, 20).unwrap();
        let l = 1024;
        let mean = expected_multitaper(&bank, 20, &p, l).unwrap();
        let sig = sigma_stats(bank.eigenvalues(), 20).unwrap();
        for j in (0..l).step_by(16) {
            let f = j as f64 / l as f64;
            let loc = local_psd_stats(&p, f, w).unwrap();
            let bias = (mean[j] - p.density(f)).abs();
            assert!(bias <= bias_bound_general(&loc, &sig) * (1.0 + 1e-9) + 1e-6, "f = {f}");
            let var = multitaper_covariance(&bank, 20, &p, f, f).unwrap();
            assert!(var <= variance_bound(&loc, &sig, n) * (1.0 + 1e-9), "f = {f}");
        }
    }
}
