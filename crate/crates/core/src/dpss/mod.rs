//! Discrete prolate spheroidal sequences (Slepian tapers) and their
//! eigenvalues, plus the non-asymptotic eigenvalue bounds used to size
//! taper counts and transition regions.
//!
//! Tapers are eigenvectors of a symmetric tridiagonal matrix that commutes
//! with the prolate matrix; each one is found independently by bisection and
//! inverse iteration, so any subset of indices can be computed in `O(n)`
//! memory. Eigenvalues of the prolate matrix itself are recovered as Rayleigh
//! quotients through an FFT-based Toeplitz product.

mod file;
mod kernel;
mod tridiag;

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{param, Result};

pub use file::{read_bank, write_bank};
pub use kernel::{sinc_sample, ProlateKernel};
use tridiag::CommutingTridiagonal;

pub(crate) fn validate(n: usize, w: f64) -> Result<()> {
    if n == 0 {
        return param("sample count must be positive");
    }
    if !(w > 0.0 && w < 0.5) {
        return param(format!("half-bandwidth {w} outside (0, 1/2)"));
    }
    Ok(())
}

/// `2nw` rounded down, tolerant of representation error in `w`.
pub fn floor_time_bandwidth(n: usize, w: f64) -> usize {
    (2.0 * n as f64 * w + 1e-9).floor() as usize
}

/// A contiguous run of Slepian tapers `first..first + len` with eigenvalues.
///
/// Tapers are stored column-major: taper `k` occupies one contiguous slice of
/// length `n`.
#[derive(Debug, Clone)]
pub struct TaperBank {
    n: usize,
    w: f64,
    first: usize,
    eigenvalues: Vec<f64>,
    data: Vec<f64>,
    low_bandwidth: bool,
}

impl TaperBank {
    pub(crate) fn from_parts(n: usize, w: f64, first: usize, eigenvalues: Vec<f64>, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), eigenvalues.len() * n);
        Self {
            n,
            w,
            first,
            eigenvalues,
            data,
            low_bandwidth: 2.0 * n as f64 * w <= 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// Index of the first stored taper (0 for banks from [`build_taper_bank`]).
    pub fn first_index(&self) -> usize {
        self.first
    }

    /// Absolute taper indices held by this bank.
    pub fn indices(&self) -> Range<usize> {
        self.first..self.first + self.eigenvalues.len()
    }

    /// Number of tapers materialized.
    pub fn k_computed(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues in index order (non-increasing).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Set when `2nw <= 1`; the concentration properties of the tapers are weak.
    pub fn low_bandwidth(&self) -> bool {
        self.low_bandwidth
    }

    pub fn taper(&self, k: usize) -> Option<&[f64]> {
        let i = k.checked_sub(self.first)?;
        (i < self.eigenvalues.len()).then(|| &self.data[i * self.n..(i + 1) * self.n])
    }

    pub fn eigenvalue(&self, k: usize) -> Option<f64> {
        let i = k.checked_sub(self.first)?;
        self.eigenvalues.get(i).copied()
    }

    /// Iterates `(index, taper, eigenvalue)` in index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64], f64)> + '_ {
        self.data
            .chunks_exact(self.n)
            .zip(&self.eigenvalues)
            .enumerate()
            .map(move |(i, (s, &l))| (self.first + i, s, l))
    }

    pub(crate) fn raw_data(&self) -> &[f64] {
        &self.data
    }

    /// Requires the bank to start at index 0 and hold at least `k` tapers.
    pub(crate) fn require_prefix(&self, k: usize) -> Result<()> {
        if k == 0 {
            return param("taper count must be positive");
        }
        if self.first != 0 || k > self.eigenvalues.len() {
            return param(format!(
                "requested {k} tapers but the bank holds indices {:?}",
                self.indices()
            ));
        }
        Ok(())
    }
}

/// Computes individual Slepian tapers and eigenvalues for fixed `(n, w)`.
#[derive(Debug, Clone)]
pub struct Slepian {
    tri: CommutingTridiagonal,
    kernel: ProlateKernel,
}

impl Slepian {
    pub fn new(n: usize, w: f64) -> Result<Self> {
        validate(n, w)?;
        Ok(Self {
            tri: CommutingTridiagonal::new(n, w),
            kernel: ProlateKernel::new(n, w)?,
        })
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    pub fn w(&self) -> f64 {
        self.kernel.w()
    }

    pub fn kernel(&self) -> &ProlateKernel {
        &self.kernel
    }

    fn eigenvalue_floor(&self) -> f64 {
        f64::EPSILON * self.n() as f64
    }

    /// Taper `k` (unit norm, sign-normalized) and its eigenvalue.
    pub fn taper(&self, k: usize) -> Result<(Vec<f64>, f64)> {
        let n = self.n();
        if k >= n {
            return param(format!("taper index {k} out of range for n = {n}"));
        }
        let mu = self.tri.eigenvalue_desc(k);
        let mut s = self.tri.eigenvector(mu, k)?;
        normalize_sign(&mut s);
        let rq = self.kernel.quadratic_form(&s)?;
        let lambda = rq.clamp(self.eigenvalue_floor().min(0.5), 1.0 - f64::EPSILON / 2.0);
        Ok((s, lambda))
    }

    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        self.taper(k).map(|(_, l)| l)
    }

    /// Tapers for a contiguous index range, computed in parallel.
    pub fn bank(&self, range: Range<usize>) -> Result<TaperBank> {
        let n = self.n();
        if range.end > n || range.start > range.end {
            return param(format!("taper range {range:?} invalid for n = {n}"));
        }
        let pairs: Vec<(Vec<f64>, f64)> = range
            .clone()
            .into_par_iter()
            .map(|k| self.taper(k))
            .collect::<Result<_>>()?;
        let mut eigenvalues = Vec::with_capacity(pairs.len());
        let mut data = Vec::with_capacity(pairs.len() * n);
        for (s, l) in pairs {
            // exact eigenvalues are strictly decreasing; suppress rounding-level inversions
            let l = eigenvalues.last().map_or(l, |&prev: &f64| l.min(prev));
            eigenvalues.push(l);
            data.extend_from_slice(&s);
        }
        Ok(TaperBank::from_parts(n, self.w(), range.start, eigenvalues, data))
    }

    /// Smallest index `k` for which `keep(lambda_k)` is false, assuming `keep`
    /// holds on a prefix of indices. Returns `n` if it holds everywhere.
    pub fn partition_point(&self, keep: impl Fn(f64) -> bool) -> Result<usize> {
        let (mut lo, mut hi) = (0usize, self.n());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if keep(self.eigenvalue(mid)?) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// Scales a taper so its entry sum is positive, or, for (anti)symmetric
/// tapers whose sum vanishes, so that its first significant entry is positive.
pub fn normalize_sign(s: &mut [f64]) {
    let sum: f64 = s.iter().sum();
    let abs_sum: f64 = s.iter().map(|x| x.abs()).sum();
    let flip = if sum.abs() > 1e-8 * abs_sum {
        sum < 0.0
    } else {
        let peak = s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        s.iter().find(|x| x.abs() > 1e-6 * peak).is_some_and(|&x| x < 0.0)
    };
    if flip {
        s.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The first `k_max` Slepian tapers and eigenvalues for `(n, w)`.
pub fn build_taper_bank(n: usize, w: f64, k_max: usize) -> Result<TaperBank> {
    validate(n, w)?;
    if k_max == 0 || k_max > n {
        return param(format!("taper count {k_max} must lie in 1..={n}"));
    }
    Slepian::new(n, w)?.bank(0..k_max)
}

/// Upper bound on `#{k : eps < lambda_k < 1 - eps}` (natural logarithms).
pub fn transition_width_bound(n: usize, w: f64, eps: f64) -> Result<f64> {
    validate(n, w)?;
    if !(eps > 0.0 && eps < 0.5) {
        return param(format!("tolerance {eps} outside (0, 1/2)"));
    }
    let nw = n as f64 * w;
    Ok(2.0 / (std::f64::consts::PI.powi(2)) * (100.0 * nw + 25.0).ln() * (5.0 / (eps * (1.0 - eps))).ln() + 7.0)
}

/// Lower bound on `lambda_k` for `0 <= k <= floor(2nw) - 1`. May be negative.
pub fn eigenvalue_lower_bound(n: usize, w: f64, k: usize) -> Result<f64> {
    validate(n, w)?;
    let m = floor_time_bandwidth(n, w);
    if m == 0 || k >= m {
        return param(format!("index {k} outside 0..={}", m as i64 - 1));
    }
    let nw = n as f64 * w;
    let scale = 2.0 / std::f64::consts::PI.powi(2) * (100.0 * nw + 25.0).ln();
    Ok(1.0 - 10.0 * (-((m as f64 - k as f64 - 7.0) / scale)).exp())
}

/// Largest `K` with `lambda_{K-1} >= 1 - delta`; 0 if `lambda_0 < 1 - delta`.
pub fn select_num_tapers(n: usize, w: f64, delta: f64) -> Result<usize> {
    validate(n, w)?;
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("eigenvalue gap {delta} outside (0, 1)"));
    }
    Slepian::new(n, w)?.partition_point(|l| l >= 1.0 - delta)
}
