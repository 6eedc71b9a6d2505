//! Estimator selection shared by the CLI and the Monte Carlo driver.
//!
//! A method is written `name[:key=value]*`, e.g. `mt:k=29`,
//! `mt-fast:w=0.002:delta=1e-9:eps=1e-9` or `adaptive:k=39`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::dpss::{build_taper_bank, floor_time_bandwidth, select_num_tapers, TaperBank};
use crate::error::{param, Error, Result};
use crate::estimators::{adaptive_multitaper, multitaper_exact, periodogram, tapered_periodogram, Method, SpectralEstimate};
use crate::fast::FastPlan;

pub const DEFAULT_ADAPTIVE_TOL: f64 = 1e-8;
pub const DEFAULT_ADAPTIVE_MAX_ITER: usize = 1000;

/// How many tapers to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaperCount {
    Fixed(usize),
    /// All tapers with `lambda >= 1 - delta`.
    Delta(f64),
    /// `floor(2nw) - 1`.
    FloorMinusOne,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSpec {
    pub method: Method,
    pub w: Option<f64>,
    pub count: Option<TaperCount>,
    pub epsilon: Option<f64>,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        Self { method, w: None, count: None, epsilon: None }
    }

    pub fn with_w(mut self, w: f64) -> Self {
        self.w = Some(w);
        self
    }

    pub fn with_count(mut self, count: TaperCount) -> Self {
        self.count = Some(count);
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    /// Resolves defaults against the sample length and a fallback bandwidth.
    pub fn prepare(&self, n: usize, default_w: Option<f64>) -> Result<PreparedMethod> {
        if self.method == Method::Periodogram {
            return Ok(PreparedMethod { label: self.to_string(), kind: Kind::Periodogram, n });
        }
        let w = self
            .w
            .or(default_w)
            .ok_or_else(|| Error::Parameter(format!("method {self} needs a bandwidth w")))?;
        let k = match self.method {
            Method::Single => 1,
            _ => match self.count {
                Some(TaperCount::Fixed(k)) => k,
                Some(TaperCount::Delta(delta)) => select_num_tapers(n, w, delta)?,
                Some(TaperCount::FloorMinusOne) => floor_time_bandwidth(n, w).saturating_sub(1),
                None => return param(format!("method {self} needs k, delta or k=floor-1")),
            },
        };
        if k == 0 {
            return param(format!("method {self} selects no tapers at n = {n}, w = {w}"));
        }
        let kind = match self.method {
            Method::Periodogram => unreachable!(),
            Method::Single | Method::Multitaper => Kind::Bank(build_taper_bank(n, w, k)?, k),
            Method::Adaptive => Kind::Adaptive(build_taper_bank(n, w, k)?, k),
            Method::MultitaperApprox => {
                let eps = self.epsilon.unwrap_or(1e-9);
                Kind::Fast(FastPlan::new(n, w, k, eps)?)
            }
        };
        Ok(PreparedMethod { label: self.to_string(), kind, n })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.method {
            Method::Periodogram => "periodogram",
            Method::Single => "single",
            Method::Multitaper => "mt",
            Method::MultitaperApprox => "mt-fast",
            Method::Adaptive => "adaptive",
        };
        write!(f, "{name}")?;
        if let Some(w) = self.w {
            write!(f, ":w={}", short(w))?;
        }
        match self.count {
            Some(TaperCount::Fixed(k)) => write!(f, ":k={k}")?,
            Some(TaperCount::Delta(d)) => write!(f, ":delta={}", short(d))?,
            Some(TaperCount::FloorMinusOne) => write!(f, ":k=floor-1")?,
            None => {}
        }
        if let Some(e) = self.epsilon {
            write!(f, ":eps={}", short(e))?;
        }
        Ok(())
    }
}

fn short(v: f64) -> String {
    if v != 0.0 && !(1e-3..1e6).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let method = match parts.next().unwrap_or("") {
            "periodogram" => Method::Periodogram,
            "single" => Method::Single,
            "mt" => Method::Multitaper,
            "mt-fast" => Method::MultitaperApprox,
            "adaptive" => Method::Adaptive,
            other => return param(format!("unknown method '{other}'")),
        };
        let mut spec = MethodSpec::new(method);
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("expected key=value in '{part}'")))?;
            let number = || value.parse::<f64>().map_err(|_| Error::Parameter(format!("bad number '{value}' for {key}")));
            match key {
                "w" => spec.w = Some(number()?),
                "eps" => spec.epsilon = Some(number()?),
                "delta" => spec.count = Some(TaperCount::Delta(number()?)),
                "k" if value == "floor-1" => spec.count = Some(TaperCount::FloorMinusOne),
                "k" => {
                    let k = value.parse().map_err(|_| Error::Parameter(format!("bad taper count '{value}'")))?;
                    spec.count = Some(TaperCount::Fixed(k));
                }
                _ => return param(format!("unknown method option '{key}'")),
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Periodogram,
    Bank(TaperBank, usize),
    Adaptive(TaperBank, usize),
    Fast(FastPlan),
}

/// A method with its tapers precomputed for one sample length.
#[derive(Debug, Clone)]
pub struct PreparedMethod {
    label: String,
    kind: Kind,
    n: usize,
}

impl PreparedMethod {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of tapers averaged (1 for the periodogram).
    pub fn k(&self) -> usize {
        match &self.kind {
            Kind::Periodogram => 1,
            Kind::Bank(_, k) | Kind::Adaptive(_, k) => *k,
            Kind::Fast(plan) => plan.partition().k(),
        }
    }

    pub fn w(&self) -> Option<f64> {
        match &self.kind {
            Kind::Periodogram => None,
            Kind::Bank(b, _) | Kind::Adaptive(b, _) => Some(b.w()),
            Kind::Fast(plan) => Some(plan.transition_bank().w()),
        }
    }

    /// The taper bank for exact multitaper methods.
    pub fn bank(&self) -> Option<&TaperBank> {
        match &self.kind {
            Kind::Bank(b, _) | Kind::Adaptive(b, _) => Some(b),
            _ => None,
        }
    }

    /// The bank when the estimate is a plain average of tapered periodograms.
    pub fn averaging_bank(&self) -> Option<&TaperBank> {
        match &self.kind {
            Kind::Bank(b, _) => Some(b),
            _ => None,
        }
    }

    pub fn fast_plan(&self) -> Option<&FastPlan> {
        match &self.kind {
            Kind::Fast(p) => Some(p),
            _ => None,
        }
    }

    pub fn estimate(&self, x: &[Complex64], l: usize) -> Result<SpectralEstimate> {
        match &self.kind {
            Kind::Periodogram => periodogram(x, l),
            Kind::Bank(bank, 1) if bank.k_computed() == 1 => {
                let mut est = tapered_periodogram(x, bank.taper(0).expect("one taper"), l)?;
                est.meta.w = Some(bank.w());
                Ok(est)
            }
            Kind::Bank(bank, k) => multitaper_exact(x, bank, *k, l),
            Kind::Adaptive(bank, k) => {
                adaptive_multitaper(x, bank, *k, l, DEFAULT_ADAPTIVE_TOL, DEFAULT_ADAPTIVE_MAX_ITER).map(|r| r.estimate)
            }
            Kind::Fast(plan) => plan.estimate(x, l),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["periodogram", "single:w=0.01", "mt:k=29", "mt:w=0.01:delta=1e-9", "mt-fast:w=0.002:k=floor-1:eps=1e-9", "adaptive:k=39"] {
            let spec: MethodSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("spline".parse::<MethodSpec>().is_err());
        assert!("mt:k".parse::<MethodSpec>().is_err());
        assert!("mt:q=1".parse::<MethodSpec>().is_err());
        assert!("mt:k=x".parse::<MethodSpec>().is_err());
    }

    #[test]
    fn prepare_resolves_counts() {
        let n = 2000;
        let m: MethodSpec = "mt:delta=1e-9".parse().unwrap();
        assert_eq!(m.prepare(n, Some(0.01)).unwrap().k(), 29);
        let m: MethodSpec = "mt:k=floor-1".parse().unwrap();
        assert_eq!(m.prepare(n, Some(0.01)).unwrap().k(), 39);
        let m: MethodSpec = "mt:k=5".parse().unwrap();
        assert!(m.prepare(n, None).is_err());
        let m: MethodSpec = "mt".parse().unwrap();
        assert!(m.prepare(n, Some(0.01)).is_err());
        let m: MethodSpec = "single".parse().unwrap();
        assert_eq!(m.prepare(64, Some(0.0625)).unwrap().k(), 1);
    }

    #[test]
    fn prepared_methods_estimate() {
        let n = 128;
        let x: Vec<Complex64> = (0..n).map(|t| Complex64::from_polar(1.0, 0.7 * t as f64)).collect();
        for s in ["periodogram", "single", "mt:k=10", "mt-fast:k=10:eps=1e-6", "adaptive:k=10"] {
            let p = s.parse::<MethodSpec>().unwrap().prepare(n, Some(0.05)).unwrap();
            let est = p.estimate(&x, 256).unwrap();
            assert_eq!(est.values.len(), 256);
            assert!(est.values.iter().all(|v| v.is_finite() && *v >= 0.0), "{s}");
        }
    }
}
