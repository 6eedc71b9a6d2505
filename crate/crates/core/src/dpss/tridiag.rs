//! Selected eigenpairs of the symmetric tridiagonal matrix that commutes with
//! the prolate matrix, by Sturm-sequence bisection and inverse iteration.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct CommutingTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    off_sq: Vec<f64>,
    lower: f64,
    upper: f64,
    scale: f64,
    pivmin: f64,
}

impl CommutingTridiagonal {
    pub fn new(n: usize, w: f64) -> Self {
        let c = (2.0 * std::f64::consts::PI * w).cos();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let h = (n as f64 - 1.0 - 2.0 * i as f64) / 2.0;
                h * h * c
            })
            .collect();
        let off: Vec<f64> = (0..n.saturating_sub(1))
            .map(|i| (i as f64 + 1.0) * (n as f64 - 1.0 - i as f64) / 2.0)
            .collect();
        let off_sq: Vec<f64> = off.iter().map(|e| e * e).collect();

        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
            lower = lower.min(diag[i] - r);
            upper = upper.max(diag[i] + r);
        }
        let scale = lower.abs().max(upper.abs()).max(f64::MIN_POSITIVE);
        let max_sq = off_sq.iter().cloned().fold(1.0, f64::max);
        // widen slightly so both ends are strict brackets
        let pad = 2.0 * f64::EPSILON * scale * n as f64 + f64::MIN_POSITIVE;
        Self {
            diag,
            off,
            off_sq,
            lower: lower - pad,
            upper: upper + pad,
            scale,
            pivmin: f64::MIN_POSITIVE * max_sq,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < self.pivmin {
            q = -self.pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            q = self.diag[i] - x - self.off_sq[i - 1] / q;
            if q.abs() < self.pivmin {
                q = -self.pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th largest eigenvalue (0-based) by bisection.
    pub fn eigenvalue_desc(&self, k: usize) -> f64 {
        let target = self.len() - 1 - k;
        let (mut lo, mut hi) = (self.lower, self.upper);
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + self.pivmin {
                break;
            }
            if self.count_below(mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn residual(&self, shift: f64, v: &[f64]) -> f64 {
        let n = v.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut r = (self.diag[i] - shift) * v[i];
            if i > 0 {
                r += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                r += self.off[i] * v[i + 1];
            }
            acc += r * r;
        }
        acc.sqrt()
    }

    /// Unit eigenvector for eigenvalue approximation `shift`; `index` seeds the
    /// start vector and labels errors.
    pub fn eigenvector(&self, shift: f64, index: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let lu = ShiftedLu::factor(&self.diag, &self.off, shift, f64::EPSILON * self.scale);

        let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        normalize(&mut v);

        let tol = 8.0 * (n as f64).sqrt() * f64::EPSILON * self.scale;
        let mut last = f64::INFINITY;
        for _ in 0..12 {
            lu.solve(&mut v);
            if !normalize(&mut v) {
                return Err(Error::Numerical {
                    index,
                    reason: "inverse iteration produced a non-finite vector".into(),
                });
            }
            last = self.residual(shift, &v);
            if last <= tol {
                return Ok(v);
            }
        }
        if last <= 1e-6 * self.scale {
            Ok(v)
        } else {
            Err(Error::Numerical {
                index,
                reason: format!("inverse iteration did not converge (relative residual {:e})", last / self.scale),
            })
        }
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let big = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(big.is_finite() && big > 0.0) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= big);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// LU factorization with partial pivoting of `T - shift I`.
struct ShiftedLu {
    lower: Vec<f64>,
    diag: Vec<f64>,
    up1: Vec<f64>,
    up2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
        let mut dl = off.to_vec();
        let mut du = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                } else {
                    dl[i] = 0.0;
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let tiny = tiny.max(f64::MIN_POSITIVE);
        for x in d.iter_mut() {
            if x.abs() < tiny {
                *x = if *x < 0.0 { -tiny } else { tiny };
            }
        }
        Self {
            lower: dl,
            diag: d,
            up1: du,
            up2: du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.lower[i] * b[i];
        }
        b[n - 1] /= self.diag[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.up1[n - 2] * b[n - 1]) / self.diag[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.up1[i] * b[i + 1] - self.up2[i] * b[i + 2]) / self.diag[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense(t: &CommutingTridiagonal) -> DMatrix<f64> {
        let n = t.len();
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                t.diag[r]
            } else if r + 1 == c {
                t.off[r]
            } else if c + 1 == r {
                t.off[c]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn bisection_matches_dense_eigenvalues() {
        let t = CommutingTridiagonal::new(40, 0.1);
        let mut ev: Vec<f64> = dense(&t).symmetric_eigen().eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (k, &e) in ev.iter().enumerate() {
            let b = t.eigenvalue_desc(k);
            assert!((b - e).abs() <= 1e-10 * t.scale, "k={k}: {b} vs {e}");
        }
    }

    #[test]
    fn inverse_iteration_gives_eigenvectors() {
        let t = CommutingTridiagonal::new(33, 0.2);
        let m = dense(&t);
        for k in [0, 5, 16, 32] {
            let mu = t.eigenvalue_desc(k);
            let v = t.eigenvector(mu, k).unwrap();
            let mv = &m * nalgebra::DVector::from_vec(v.clone());
            let r = mv - nalgebra::DVector::from_vec(v).scale(mu);
            assert!(r.norm() <= 1e-9 * t.scale);
        }
    }
}
