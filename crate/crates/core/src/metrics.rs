//! Accuracy metrics of estimated Greeks against a benchmark surface, and
//! hedging-error summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greeks::z_value;
use crate::hedging::HedgeOutcome;
use crate::scalar::Scalar;

fn same_len<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("metrics need at least one site"));
    }
    Ok(())
}

pub fn mean<T: Scalar>(v: &[T]) -> T {
    if v.is_empty() {
        return T::nan();
    }
    v.iter().copied().sum::<T>() / T::lit(v.len() as f64)
}

/// Sample variance with the `n − 1` denominator (0 for a single value).
pub fn sample_variance<T: Scalar>(v: &[T]) -> T {
    let n = v.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(v);
    v.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::lit((n - 1) as f64)
}

/// Median; an even count takes the midpoint of the two central values.
pub fn median<T: Scalar>(v: &[T]) -> T {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = s.len();
    if n == 0 {
        T::nan()
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / T::lit(2.0)
    }
}

/// Root of the mean squared deviation.
pub fn rimse<T: Scalar>(estimates: &[T], benchmarks: &[T]) -> Result<T> {
    same_len(estimates, benchmarks)?;
    let sq: Vec<T> = estimates.iter().zip(benchmarks).map(|(&e, &b)| (e - b) * (e - b)).collect();
    Ok(mean(&sq).sqrt())
}

/// Median absolute deviation between estimates and benchmarks.
pub fn mad<T: Scalar>(estimates: &[T], benchmarks: &[T]) -> Result<T> {
    same_len(estimates, benchmarks)?;
    let abs: Vec<T> = estimates.iter().zip(benchmarks).map(|(&e, &b)| (e - b).abs()).collect();
    Ok(median(&abs))
}

/// Fraction of sites whose benchmark falls inside the central credible
/// interval at `level`.
pub fn coverage<T: Scalar>(estimates: &[T], variances: &[T], benchmarks: &[T], level: f64) -> Result<T> {
    same_len(estimates, benchmarks)?;
    same_len(variances, benchmarks)?;
    let z = T::lit(z_value(level)?);
    let hits = estimates
        .iter()
        .zip(variances)
        .zip(benchmarks)
        .filter(|((&e, &v), &b)| {
            let half = if v > T::zero() { z * v.sqrt() } else { T::zero() };
            (b - e).abs() <= half
        })
        .count();
    Ok(T::lit(hits as f64 / estimates.len() as f64))
}

/// Site mean of `(Δ − Δ̂)²/V + log V`.
pub fn nlpd<T: Scalar>(estimates: &[T], variances: &[T], benchmarks: &[T]) -> Result<T> {
    same_len(estimates, benchmarks)?;
    same_len(variances, benchmarks)?;
    let terms: Vec<T> = estimates
        .iter()
        .zip(variances)
        .zip(benchmarks)
        .map(|((&e, &v), &b)| (b - e) * (b - e) / v + v.ln())
        .collect();
    Ok(mean(&terms))
}

/// Mean signed deviation `Δ̂ − Δ`.
pub fn bias<T: Scalar>(estimates: &[T], benchmarks: &[T]) -> Result<T> {
    same_len(estimates, benchmarks)?;
    let d: Vec<T> = estimates.iter().zip(benchmarks).map(|(&e, &b)| e - b).collect();
    Ok(mean(&d))
}

/// Sample variance of the terminal hedging error.
pub fn pnl_variance(outcomes: &[HedgeOutcome]) -> f64 {
    sample_variance(&outcomes.iter().map(|o| o.total_error).collect::<Vec<_>>())
}

/// Test sites `(t, S)` in calendar time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestGrid {
    pub sites: Vec<(f64, f64)>,
}

impl TestGrid {
    /// Cartesian product, time-major.
    pub fn rectangular(ts: &[f64], ss: &[f64]) -> Self {
        Self {
            sites: ts.iter().flat_map(|&t| ss.iter().map(move |&s| (t, s))).collect(),
        }
    }

    /// `t ∈ {−0.01, 0.01, …, 0.37}` × `S ∈ {30, 30.5, …, 69.5}` (1600 sites).
    pub fn black_scholes() -> Self {
        let ts: Vec<f64> = (0..20).map(|i| -0.01 + 0.02 * i as f64).collect();
        let ss: Vec<f64> = (0..80).map(|i| 30.0 + 0.5 * i as f64).collect();
        Self::rectangular(&ts, &ss)
    }

    /// `t ∈ {0, 0.04, …, 0.4}` × 31 prices spaced evenly from 29.4 to 78.4 (341 sites).
    pub fn local_vol() -> Self {
        let ts: Vec<f64> = (0..11).map(|i| 0.04 * i as f64).collect();
        let ss: Vec<f64> = (0..31).map(|i| 29.4 + (78.4 - 29.4) * i as f64 / 30.0).collect();
        Self::rectangular(&ts, &ss)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = Vec::new();
        for &(t, _) in &self.sites {
            if !ts.contains(&t) {
                ts.push(t);
            }
        }
        ts
    }
}

/// Delta accuracy block of a report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreekAccuracy {
    pub rimse: f64,
    pub mad: f64,
    pub cvr95: f64,
    pub bias: f64,
    pub nlpd: f64,
}

impl GreekAccuracy {
    pub fn compute(estimates: &[f64], variances: &[f64], benchmarks: &[f64]) -> Result<Self> {
        Ok(Self {
            rimse: rimse(estimates, benchmarks)?,
            mad: mad(estimates, benchmarks)?,
            cvr95: coverage(estimates, variances, benchmarks, 0.95)?,
            bias: bias(estimates, benchmarks)?,
            nlpd: nlpd(estimates, variances, benchmarks)?,
        })
    }
}
