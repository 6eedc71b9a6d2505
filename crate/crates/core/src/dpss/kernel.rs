use num_complex::Complex64;

use crate::error::{param, Result};
use crate::fft;

/// Samples of the prolate sinc kernel: `2w` at lag 0, `sin(2 pi w m) / (pi m)` otherwise.
pub fn sinc_sample(w: f64, lag: i64) -> f64 {
    if lag == 0 {
        2.0 * w
    } else {
        let m = lag as f64;
        (2.0 * std::f64::consts::PI * w * m).sin() / (std::f64::consts::PI * m)
    }
}

/// The `n x n` prolate matrix, stored as its first column together with the
/// spectrum of a circulant embedding so that products cost two FFTs.
#[derive(Debug, Clone)]
pub struct ProlateKernel {
    n: usize,
    w: f64,
    first_column: Vec<f64>,
    spectrum: Vec<Complex64>,
}

impl ProlateKernel {
    pub fn new(n: usize, w: f64) -> Result<Self> {
        if n == 0 {
            return param("sample count must be positive");
        }
        if !(w > 0.0 && w < 0.5) {
            return param(format!("half-bandwidth {w} outside (0, 1/2)"));
        }
        let first_column: Vec<f64> = (0..n).map(|m| sinc_sample(w, m as i64)).collect();
        let len = (2 * n).next_power_of_two();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
        for (m, &b) in first_column.iter().enumerate() {
            spectrum[m].re = b;
            if m > 0 {
                spectrum[len - m].re = b;
            }
        }
        fft::forward(&mut spectrum);
        Ok(Self {
            n,
            w,
            first_column,
            spectrum,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn first_column(&self) -> &[f64] {
        &self.first_column
    }

    /// Entry `(row, col)` of the Toeplitz matrix.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.first_column[row.abs_diff(col)]
    }

    /// Computes `B v` for a complex vector via the circulant embedding.
    pub fn apply_complex(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.n {
            return param(format!("vector length {} does not match kernel size {}", v.len(), self.n));
        }
        let len = self.spectrum.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        buf[..self.n].copy_from_slice(v);
        fft::forward(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        fft::inverse(&mut buf);
        let scale = 1.0 / len as f64;
        Ok(buf[..self.n].iter().map(|z| z * scale).collect())
    }

    /// Computes `B v` for a real vector.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let z: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Ok(self.apply_complex(&z)?.into_iter().map(|z| z.re).collect())
    }

    /// Rayleigh quotient `v^T B v`.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        let bv = self.apply(v)?;
        Ok(v.iter().zip(&bv).map(|(a, b)| a * b).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(k: &ProlateKernel, v: &[Complex64]) -> Vec<Complex64> {
        (0..k.n())
            .map(|r| (0..k.n()).map(|c| v[c] * k.entry(r, c)).sum())
            .collect()
    }

    #[test]
    fn zero_maps_to_zero() {
        let k = ProlateKernel::new(16, 0.1).unwrap();
        assert!(k.apply(&[0.0; 16]).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn unit_vector_gives_first_column() {
        let k = ProlateKernel::new(8, 0.25).unwrap();
        let mut e0 = vec![0.0; 8];
        e0[0] = 1.0;
        let col = k.apply(&e0).unwrap();
        let expected = [0.5, 0.31831, 0.0, -0.10610, 0.0, 0.06366, 0.0, -0.04547];
        // the listed decimals are rounded; compare against exact sinc values and
        // against the rounded figures at their printed precision
        for (m, (&c, &e)) in col.iter().zip(&expected).enumerate() {
            let exact = if m == 0 {
                0.5
            } else {
                (std::f64::consts::PI * m as f64 / 2.0).sin() / (std::f64::consts::PI * m as f64)
            };
            assert!((c - exact).abs() < 1e-12, "m={m}: {c} vs {exact}");
            assert!((c - e).abs() < 1e-5);
        }
    }

    #[test]
    fn matches_dense_product() {
        let k = ProlateKernel::new(32, 0.07).unwrap();
        let v: Vec<Complex64> = (0..32)
            .map(|i| Complex64::new(((i * 7919) % 13) as f64 - 6.0, ((i * 104729) % 11) as f64 - 5.0))
            .collect();
        let fast = k.apply_complex(&v).unwrap();
        let dense = dense_apply(&k, &v);
        let scale: f64 = dense.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&dense) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ProlateKernel::new(8, 0.5).is_err());
        assert!(ProlateKernel::new(8, 0.0).is_err());
        let k = ProlateKernel::new(8, 0.2).unwrap();
        assert!(k.apply(&[1.0; 7]).is_err());
    }

    #[test]
    fn toeplitz_structure() {
        let k = ProlateKernel::new(10, 0.13).unwrap();
        assert_eq!(k.entry(0, 0), 0.26);
        for r in 0..10 {
            for c in 0..10 {
                assert_eq!(k.entry(r, c), k.entry(c, r));
                if r > 0 && c > 0 {
                    assert_eq!(k.entry(r, c), k.entry(r - 1, c - 1));
                }
            }
        }
    }
}
