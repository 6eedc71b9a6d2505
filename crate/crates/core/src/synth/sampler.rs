use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::PowerSpectrum;
use crate::error::{param, Error, Result};
use crate::fft;

/// Largest length for which the O(n^2) fallback factorizations are attempted.
pub const DENSE_LIMIT: usize = 4096;

/// How the covariance square root is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    /// Circulant embedding diagonalized by the FFT.
    Circulant,
    /// Sequential linear prediction (Toeplitz Cholesky).
    Recursive,
    /// Dense Hermitian eigendecomposition.
    Eigen,
}

#[derive(Debug, Clone)]
enum Factor {
    Circulant { scale: Vec<f64> },
    Recursive { coeffs: Vec<Complex64>, innovation: Vec<f64> },
    Eigen { g: DMatrix<Complex64> },
}

/// Draws zero-mean circular complex Gaussian vectors with covariance
/// `R[m, n] = r(m - n)`.
///
/// Draw `i` of a sampler seeded with `s` is a pure function of `(s, i)`, so
/// results do not depend on thread count or draw order.
#[derive(Debug, Clone)]
pub struct ProcessSampler {
    n: usize,
    seed: u64,
    factor: Factor,
    min_eigenvalue_ratio: f64,
}

impl ProcessSampler {
    pub fn new(psd: &dyn PowerSpectrum, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return param("sample length must be positive");
        }
        let m = (2 * n).next_power_of_two();
        let r = psd.autocorrelations(m / 2);
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        c[..m / 2].copy_from_slice(&r[..m / 2]);
        c[m / 2] = Complex64::new(r[m / 2].re, 0.0);
        for d in 1..m / 2 {
            c[m - d] = r[d].conj();
        }
        fft::forward(&mut c);
        let max = c.iter().map(|z| z.re).fold(0.0, f64::max);
        let min = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if max > 0.0 && ratio >= -1e-8 {
            let scale = c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
            return Ok(Self { n, seed, factor: Factor::Circulant { scale }, min_eigenvalue_ratio: ratio });
        }
        if n > DENSE_LIMIT {
            return Err(Error::Configuration(format!(
                "circulant embedding of length {m} has eigenvalue ratio {ratio:.3e} and n = {n} exceeds the \
                 dense fallback limit {DENSE_LIMIT}; use a smoother spectrum or a shorter record"
            )));
        }
        let r = &r[..n];
        let factor = match levinson(r) {
            Some(f) => f,
            None => eigen_factor(r)?,
        };
        Ok(Self { n, seed, factor, min_eigenvalue_ratio: ratio })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn factorization(&self) -> Factorization {
        match self.factor {
            Factor::Circulant { .. } => Factorization::Circulant,
            Factor::Recursive { .. } => Factorization::Recursive,
            Factor::Eigen { .. } => Factorization::Eigen,
        }
    }

    /// Smallest over largest eigenvalue of the circulant embedding.
    pub fn embedding_ratio(&self) -> f64 {
        self.min_eigenvalue_ratio
    }

    /// Length of the white-noise vector consumed per draw.
    pub fn noise_len(&self) -> usize {
        match &self.factor {
            Factor::Circulant { scale } => scale.len(),
            _ => self.n,
        }
    }

    /// Maps white noise `z` (length [`noise_len`](Self::noise_len)) to a sample.
    pub fn color(&self, z: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(z.len(), self.noise_len());
        match &self.factor {
            Factor::Circulant { scale } => {
                let mut y: Vec<Complex64> = z.iter().zip(scale).map(|(z, s)| z * s).collect();
                fft::inverse(&mut y);
                y.truncate(self.n);
                y
            }
            Factor::Recursive { coeffs, innovation } => {
                let mut x = Vec::with_capacity(self.n);
                for t in 0..self.n {
                    let a = &coeffs[t * t.saturating_sub(1) / 2..][..t];
                    let mut pred = Complex64::new(0.0, 0.0);
                    for (j, aj) in a.iter().enumerate() {
                        pred += aj * x[t - 1 - j];
                    }
                    x.push(pred + innovation[t].sqrt() * z[t]);
                }
                x
            }
            Factor::Eigen { g } => {
                let zv = nalgebra::DVector::from_column_slice(z);
                (g * zv).as_slice().to_vec()
            }
        }
    }

    /// Covariance implied by the factorization, `G G^*` (row-major `n x n`).
    pub fn implied_covariance(&self) -> Vec<Complex64> {
        let dim = self.noise_len();
        let mut cov = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        let mut e = vec![Complex64::new(0.0, 0.0); dim];
        for k in 0..dim {
            e[k] = Complex64::new(1.0, 0.0);
            let g = self.color(&e);
            e[k] = Complex64::new(0.0, 0.0);
            for a in 0..self.n {
                for b in 0..self.n {
                    cov[a * self.n + b] += g[a] * g[b].conj();
                }
            }
        }
        cov
    }

    /// Sample number `index` of this sampler's stream.
    pub fn draw(&self, index: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z: Vec<Complex64> = (0..self.noise_len())
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * s, im * s)
            })
            .collect();
        self.color(&z)
    }

    /// Draws `start..start + count` in parallel, returned in index order.
    pub fn draw_many(&self, start: u64, count: usize) -> Vec<Vec<Complex64>> {
        (0..count as u64).into_par_iter().map(|i| self.draw(start + i)).collect()
    }
}

/// Order-`t` predictor coefficients for every `t < n`, stored back to back
/// (order `t` starts at offset `t (t - 1) / 2`), plus the prediction error
/// powers. Returns `None` when the recursion loses positive definiteness.
fn levinson(r: &[Complex64]) -> Option<Factor> {
    let n = r.len();
    let r0 = r[0].re;
    if !(r0 > 0.0) {
        return None;
    }
    let mut coeffs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    let mut innovation = Vec::with_capacity(n);
    let mut a: Vec<Complex64> = Vec::with_capacity(n);
    let mut p = r0;
    innovation.push(p);
    for order in 1..n {
        // extend order-1 predictor a (length order-1) to length order
        let mut acc = r[order];
        for (j, aj) in a.iter().enumerate() {
            acc -= aj * r[order - 1 - j];
        }
        let kappa = acc / p;
        let prev = a.clone();
        for j in 0..prev.len() {
            a[j] = prev[j] - kappa * prev[prev.len() - 1 - j].conj();
        }
        a.push(kappa);
        p *= 1.0 - kappa.norm_sqr();
        if !(p > 1e-13 * r0) {
            return None;
        }
        coeffs.extend_from_slice(&a);
        innovation.push(p);
    }
    Some(Factor::Recursive { coeffs, innovation })
}

fn eigen_factor(r: &[Complex64]) -> Result<Factor> {
    let n = r.len();
    let cov = DMatrix::from_fn(n, n, |i, j| if i >= j { r[i - j] } else { r[j - i].conj() });
    let eig = cov.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if eig.eigenvalues.iter().any(|&v| v < -1e-8 * max) || !(max > 0.0) {
        return Err(Error::Numerical {
            index: 0,
            reason: "covariance matrix is not positive semidefinite".into(),
        });
    }
    let mut g = eig.eigenvectors;
    for (k, v) in eig.eigenvalues.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        g.column_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    Ok(Factor::Eigen { g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{multiband_fixture, LogFourierPsd, PiecewisePsd};

    fn max_cov_error(s: &ProcessSampler, psd: &dyn PowerSpectrum) -> f64 {
        let n = s.len();
        let cov = s.implied_covariance();
        let r = psd.autocorrelations(n);
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let want = if a >= b { r[a - b] } else { r[b - a].conj() };
                worst = worst.max((cov[a * n + b] - want).norm());
            }
        }
        worst / psd.total_power()
    }

    #[test]
    fn smooth_spectrum_uses_circulant_embedding() {
        let psd = LogFourierPsd::new(0.5, vec![0.8], vec![0.3]).unwrap();
        let s = ProcessSampler::new(&psd, 48, 1).unwrap();
        assert_eq!(s.factorization(), Factorization::Circulant);
        assert!(max_cov_error(&s, &psd) < 1e-10);
    }

    #[test]
    fn multiband_needs_the_fallback() {
        let psd = multiband_fixture();
        let s = ProcessSampler::new(&psd, 64, 1).unwrap();
        assert_ne!(s.factorization(), Factorization::Circulant);
        assert!(s.embedding_ratio() < -1e-8);
        assert!(max_cov_error(&s, &psd) < 1e-10);
    }

    #[test]
    fn recursive_factor_matches_covariance() {
        let psd = PiecewisePsd::from_bands(0.5, &[(0.1, 0.3, 20.0), (0.6, 0.65, 3.0)]).unwrap();
        let r = psd.autocorrelations(40);
        let f = levinson(&r[..40]).unwrap();
        let s = ProcessSampler { n: 40, seed: 0, factor: f, min_eigenvalue_ratio: 0.0 };
        assert!(max_cov_error(&s, &psd) < 1e-10);
    }

    #[test]
    fn singular_covariance_falls_back_to_eigen() {
        // band-limited with tiny support: R is numerically singular for this n
        let psd = PiecewisePsd::from_bands(0.0, &[(0.2, 0.21, 100.0)]).unwrap();
        let s = ProcessSampler::new(&psd, 96, 3).unwrap();
        assert_eq!(s.factorization(), Factorization::Eigen);
        assert!(max_cov_error(&s, &psd) < 1e-10);
    }

    #[test]
    fn oversize_infeasible_embedding_is_a_configuration_error() {
        let psd = multiband_fixture();
        let err = ProcessSampler::new(&psd, DENSE_LIMIT + 1, 0).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn draws_are_reproducible_and_distinct() {
        let psd = PiecewisePsd::flat(1.0).unwrap();
        let s = ProcessSampler::new(&psd, 32, 9).unwrap();
        assert_eq!(s.draw(4), s.draw(4));
        assert_ne!(s.draw(4), s.draw(5));
        let batch = s.draw_many(3, 3);
        assert_eq!(batch[1], s.draw(4));
        let other = ProcessSampler::new(&psd, 32, 10).unwrap();
        assert_ne!(other.draw(4), s.draw(4));
    }

    #[test]
    fn white_noise_sample_variance() {
        let psd = PiecewisePsd::flat(2.0).unwrap();
        let s = ProcessSampler::new(&psd, 256, 5).unwrap();
        let mut acc = 0.0;
        let draws = 200;
        for i in 0..draws {
            acc += s.draw(i).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mean = acc / (draws as f64 * 256.0);
        // 51200 exponential(2) terms: standard error about 0.009
        assert!((mean - 2.0).abs() < 0.05, "{mean}");
    }
}
