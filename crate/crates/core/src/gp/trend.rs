use serde::{Deserialize, Serialize};

use super::{TimeConvention, S_COORD, TIME_COORD};
use crate::models::{bs_delta, bs_price, bs_theta, BsParams};
use crate::scalar::Scalar;

/// Black–Scholes call with a fixed volatility, used as a known trend that
/// is subtracted before fitting and added back at prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePrice {
    pub rate: f64,
    pub volatility: f64,
    pub strike: f64,
    pub maturity: f64,
}

impl ReferencePrice {
    fn params(&self) -> BsParams {
        BsParams {
            r: self.rate,
            sigma: self.volatility,
            strike: self.strike,
            maturity: self.maturity,
            mu: self.rate,
        }
    }

    fn tau(&self, convention: TimeConvention, x0: f64) -> f64 {
        (self.maturity - convention.to_calendar(x0)).max(0.0)
    }

    pub fn price(&self, convention: TimeConvention, x: &[f64]) -> f64 {
        bs_price(&self.params(), self.tau(convention, x[TIME_COORD]), x[S_COORD])
    }

    /// Derivative in raw coordinate `j` (time in the model's convention).
    pub fn grad(&self, convention: TimeConvention, j: usize, x: &[f64]) -> f64 {
        let tau = self.tau(convention, x[TIME_COORD]);
        let p = self.params();
        match j {
            S_COORD => bs_delta(&p, tau, x[S_COORD]),
            TIME_COORD => bs_theta(&p, tau, x[S_COORD]).unwrap_or(0.0) * convention.calendar_sign(),
            _ => 0.0,
        }
    }
}

/// Mean function `m(x) = reference(x) + Σ β_k φ_k(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrendSpec {
    /// `β₀`.
    Constant,
    /// `β₀ + β₁ S`.
    LinearInS,
    /// A fixed reference price plus a constant `β₀` on the residual.
    ExternalReference(ReferencePrice),
}

impl TrendSpec {
    pub fn n_coefficients(&self) -> usize {
        match self {
            TrendSpec::LinearInS => 2,
            _ => 1,
        }
    }

    pub(crate) fn basis<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        match self {
            TrendSpec::LinearInS => vec![T::one(), x[S_COORD]],
            _ => vec![T::one()],
        }
    }

    /// Gradient of the basis in coordinate `j`.
    pub(crate) fn basis_grad<T: Scalar>(&self, j: usize) -> Vec<T> {
        match self {
            TrendSpec::LinearInS if j == S_COORD => vec![T::zero(), T::one()],
            TrendSpec::LinearInS => vec![T::zero(), T::zero()],
            _ => vec![T::zero()],
        }
    }

    pub(crate) fn reference<T: Scalar>(&self, convention: TimeConvention, x: &[T]) -> T {
        match self {
            TrendSpec::ExternalReference(r) => {
                let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
                T::lit(r.price(convention, &xf))
            }
            _ => T::zero(),
        }
    }

    pub(crate) fn reference_grad<T: Scalar>(&self, convention: TimeConvention, j: usize, x: &[T]) -> T {
        match self {
            TrendSpec::ExternalReference(r) => {
                let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
                T::lit(r.grad(convention, j, &xf))
            }
            _ => T::zero(),
        }
    }

    pub(crate) fn min_dim(&self) -> usize {
        match self {
            TrendSpec::Constant => 1,
            _ => 2,
        }
    }
}
