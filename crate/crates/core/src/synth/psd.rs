use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fft;

/// A bounded, integrable, 1-periodic power spectral density.
///
/// The autocorrelation convention is `r(d) = int_0^1 S(f) e^{j 2 pi f d} df`,
/// so a sample vector has covariance `E[x_m conj(x_n)] = r(m - n)`.
pub trait PowerSpectrum: Send + Sync {
    fn density(&self, f: f64) -> f64;

    fn autocorrelation(&self, lag: i64) -> Complex64;

    /// `r(0), r(1), ..., r(max_lag)`.
    fn autocorrelations(&self, max_lag: usize) -> Vec<Complex64> {
        (0..=max_lag).map(|d| self.autocorrelation(d as i64)).collect()
    }

    /// Global maximum `M` of the density.
    fn max_density(&self) -> f64;

    fn total_power(&self) -> f64 {
        self.autocorrelation(0).re
    }
}

/// Piecewise-constant density. Piece `i` covers `[breakpoints[i], breakpoints[i + 1])`
/// and the last piece runs up to 1; the first breakpoint is always 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePsd {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

const OVERLAP_TOL: f64 = 1e-12;

impl PiecewisePsd {
    /// Pieces start at the sorted `breakpoints` in `[0, 1)`; the last piece
    /// wraps around to the first breakpoint.
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != levels.len() {
            return param("need one level per breakpoint and at least one piece");
        }
        if breakpoints.iter().any(|b| !(0.0..1.0).contains(b)) {
            return param("breakpoints must lie in [0, 1)");
        }
        if breakpoints.windows(2).any(|p| p[0] >= p[1]) {
            return param("breakpoints must be strictly increasing");
        }
        if levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return param("levels must be finite and nonnegative");
        }
        let (mut breakpoints, mut levels) = (breakpoints, levels);
        if breakpoints[0] > 0.0 {
            // the wrapping last piece also covers [0, first breakpoint)
            breakpoints.insert(0, 0.0);
            let last = *levels.last().unwrap();
            levels.insert(0, last);
        }
        Ok(Self { breakpoints, levels })
    }

    pub fn flat(level: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![level])
    }

    /// Background level plus non-overlapping bands `(start, end, level)`.
    /// Bands may start below 0 or end above 1; they are wrapped modulo 1.
    pub fn from_bands(background: f64, bands: &[(f64, f64, f64)]) -> Result<Self> {
        let mut segments: Vec<(f64, f64, f64)> = Vec::new();
        for &(start, end, level) in bands {
            if !(end > start) || end - start > 1.0 + OVERLAP_TOL {
                return param(format!("band [{start}, {end}] must have width in (0, 1]"));
            }
            let a = start.rem_euclid(1.0);
            let b = a + (end - start);
            if b > 1.0 + OVERLAP_TOL {
                segments.push((a, 1.0, level));
                segments.push((0.0, b - 1.0, level));
            } else {
                segments.push((a, b.min(1.0), level));
            }
        }
        segments.sort_by(|x, y| x.0.total_cmp(&y.0));
        for pair in segments.windows(2) {
            if pair[1].0 < pair[0].1 - OVERLAP_TOL {
                return param(format!("bands overlap near f = {}", pair[1].0));
            }
        }
        let mut breakpoints = Vec::new();
        let mut levels = Vec::new();
        let mut cursor = 0.0;
        for (a, b, level) in segments {
            if a > cursor + OVERLAP_TOL {
                breakpoints.push(cursor);
                levels.push(background);
            }
            if b - a > OVERLAP_TOL {
                breakpoints.push(a.max(cursor));
                levels.push(level);
            }
            cursor = b;
        }
        if cursor < 1.0 - OVERLAP_TOL {
            breakpoints.push(cursor);
            levels.push(background);
        }
        Self::new(breakpoints, levels)
    }

    /// `(start, end, level)` for each piece; pieces tile `[0, 1)`.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.levels.len()).map(move |i| {
            let end = self.breakpoints.get(i + 1).copied().unwrap_or(1.0);
            (self.breakpoints[i], end, self.levels[i])
        })
    }

    /// Pieces overlapping `[lo, hi]` (with `hi - lo <= 1`) with the overlap lengths.
    pub(crate) fn overlaps(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let width = hi - lo;
        let a = lo.rem_euclid(1.0);
        let mut windows = vec![(a, (a + width).min(1.0))];
        if a + width > 1.0 {
            windows.push((0.0, a + width - 1.0));
        }
        let mut out = Vec::new();
        for (wa, wb) in windows {
            for (pa, pb, level) in self.pieces() {
                let len = wb.min(pb) - wa.max(pa);
                if len > OVERLAP_TOL {
                    out.push((len, level));
                }
            }
        }
        out
    }
}

impl PowerSpectrum for PiecewisePsd {
    fn density(&self, f: f64) -> f64 {
        let f = f.rem_euclid(1.0);
        let i = self.breakpoints.partition_point(|&b| b <= f);
        self.levels[i.saturating_sub(1)]
    }

    fn autocorrelation(&self, lag: i64) -> Complex64 {
        if lag == 0 {
            return Complex64::new(self.total_power(), 0.0);
        }
        let d = lag as f64;
        let j2pid = Complex64::new(0.0, 2.0 * std::f64::consts::PI * d);
        self.pieces()
            .map(|(a, b, level)| {
                let eb = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * b * d);
                let ea = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * a * d);
                level * (eb - ea) / j2pid
            })
            .sum()
    }

    fn max_density(&self) -> f64 {
        self.levels.iter().cloned().fold(0.0, f64::max)
    }

    fn total_power(&self) -> f64 {
        self.pieces().map(|(a, b, level)| level * (b - a)).sum()
    }
}

/// Smooth density `S(f) = 10^{p(f)}` for a real trigonometric polynomial
/// `p(f) = mean + sum_i cos_i cos(2 pi i f) + sin_i sin(2 pi i f)`.
///
/// Its autocorrelation decays faster than any power of the lag, so the
/// coefficients are obtained to rounding accuracy from a finely sampled
/// trapezoidal rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFourierPsd {
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl LogFourierPsd {
    pub fn new(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if !mean.is_finite() || cos.iter().chain(&sin).any(|c| !c.is_finite()) {
            return param("coefficients must be finite");
        }
        Ok(Self { mean, cos, sin })
    }

    fn exponent(&self, f: f64) -> f64 {
        let t = 2.0 * std::f64::consts::PI * f;
        let mut p = self.mean;
        for (i, c) in self.cos.iter().enumerate() {
            p += c * (t * (i + 1) as f64).cos();
        }
        for (i, s) in self.sin.iter().enumerate() {
            p += s * (t * (i + 1) as f64).sin();
        }
        p
    }

    fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }
}

impl PowerSpectrum for LogFourierPsd {
    fn density(&self, f: f64) -> f64 {
        10f64.powf(self.exponent(f))
    }

    fn autocorrelation(&self, lag: i64) -> Complex64 {
        let r = self.autocorrelations(lag.unsigned_abs() as usize)[lag.unsigned_abs() as usize];
        if lag < 0 {
            r.conj()
        } else {
            r
        }
    }

    fn autocorrelations(&self, max_lag: usize) -> Vec<Complex64> {
        // amplitude of p bounds how far the coefficients spread in lag
        let amp: f64 = self.cos.iter().chain(&self.sin).map(|c| c.abs()).sum();
        let spread = ((amp * std::f64::consts::LN_10 + 1.0) * self.degree().max(1) as f64 * 8.0) as usize + 64;
        let q = (4 * (max_lag + 1)).max(4 * spread).max(1024).next_power_of_two();
        let mut buf: Vec<Complex64> = (0..q)
            .map(|i| Complex64::new(self.density(i as f64 / q as f64), 0.0))
            .collect();
        fft::inverse(&mut buf);
        buf.truncate(max_lag + 1);
        buf.iter_mut().for_each(|z| *z /= q as f64);
        buf
    }

    fn max_density(&self) -> f64 {
        // dense scan; adequate for low-degree polynomials
        let m = 8192 * self.degree().max(1);
        (0..m).map(|i| self.density(i as f64 / m as f64)).fold(0.0, f64::max)
    }
}

/// Either supported density model.
#[derive(Debug, Clone, PartialEq)]
pub enum Psd {
    Piecewise(PiecewisePsd),
    LogFourier(LogFourierPsd),
}

impl Psd {
    pub fn as_piecewise(&self) -> Option<&PiecewisePsd> {
        match self {
            Psd::Piecewise(p) => Some(p),
            Psd::LogFourier(_) => None,
        }
    }

    /// Parses the JSON description used by the CLI: a bare list of pieces,
    /// `{"background": b, "pieces": [...]}`, or `{"log10_fourier": {...}}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PsdJson = serde_json::from_str(text).map_err(|e| Error::Input(format!("bad PSD description: {e}")))?;
        match spec {
            PsdJson::Pieces(pieces) => Ok(Psd::Piecewise(pieces_to_psd(0.0, &pieces)?)),
            PsdJson::Banded { background, pieces } => Ok(Psd::Piecewise(pieces_to_psd(background, &pieces)?)),
            PsdJson::Smooth { log10_fourier } => {
                let p = log10_fourier;
                Ok(Psd::LogFourier(LogFourierPsd::new(p.mean, p.cos, p.sin)?))
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Psd::Piecewise(p) => serde_json::json!({
                "background": 0.0,
                "pieces": p.pieces().map(|(start, end, level)| PieceJson { start, end, level }).collect::<Vec<_>>(),
            }),
            Psd::LogFourier(p) => serde_json::json!({ "log10_fourier": p }),
        }
    }
}

fn pieces_to_psd(background: f64, pieces: &[PieceJson]) -> Result<PiecewisePsd> {
    let bands: Vec<_> = pieces.iter().map(|p| (p.start, p.end, p.level)).collect();
    PiecewisePsd::from_bands(background, &bands)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PieceJson {
    start: f64,
    end: f64,
    level: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PsdJson {
    Pieces(Vec<PieceJson>),
    Banded {
        #[serde(default)]
        background: f64,
        pieces: Vec<PieceJson>,
    },
    Smooth {
        log10_fourier: LogFourierPsd,
    },
}

impl PowerSpectrum for Psd {
    fn density(&self, f: f64) -> f64 {
        match self {
            Psd::Piecewise(p) => p.density(f),
            Psd::LogFourier(p) => p.density(f),
        }
    }

    fn autocorrelation(&self, lag: i64) -> Complex64 {
        match self {
            Psd::Piecewise(p) => p.autocorrelation(lag),
            Psd::LogFourier(p) => p.autocorrelation(lag),
        }
    }

    fn autocorrelations(&self, max_lag: usize) -> Vec<Complex64> {
        match self {
            Psd::Piecewise(p) => p.autocorrelations(max_lag),
            Psd::LogFourier(p) => p.autocorrelations(max_lag),
        }
    }

    fn max_density(&self) -> f64 {
        match self {
            Psd::Piecewise(p) => p.max_density(),
            Psd::LogFourier(p) => p.max_density(),
        }
    }

    fn total_power(&self) -> f64 {
        match self {
            Psd::Piecewise(p) => p.total_power(),
            Psd::LogFourier(p) => p.total_power(),
        }
    }
}

/// Four narrowband sources over a unit noise floor: `1e3` on `[0.18, 0.22]`,
/// `1e9` on `[0.28, 0.32]`, `1e2` on `[0.38, 0.42]`, `1e1` on `[0.78, 0.82]`.
pub fn multiband_fixture() -> PiecewisePsd {
    PiecewisePsd::from_bands(
        1.0,
        &[(0.18, 0.22, 1e3), (0.28, 0.32, 1e9), (0.38, 0.42, 1e2), (0.78, 0.82, 1e1)],
    )
    .expect("fixture bands are disjoint")
}
