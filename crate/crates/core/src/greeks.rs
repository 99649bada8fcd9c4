//! Greeks of a fitted surrogate: analytic gradient posteriors for Delta and
//! Theta, a finite-difference Gamma with propagated covariance, and
//! credible bands.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gp::{GpModel, S_COORD, TIME_COORD};
use crate::io::write_csv;
use crate::kernels::KernelFamily;
use crate::linalg::dot;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreekKind {
    Price,
    Delta,
    Theta,
    Gamma,
    /// Derivative in a coordinate other than the price, in raw units.
    Gradient,
}

impl GreekKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GreekKind::Price => "price",
            GreekKind::Delta => "delta",
            GreekKind::Theta => "theta",
            GreekKind::Gamma => "gamma",
            GreekKind::Gradient => "gradient",
        }
    }
}

/// Posterior mean and variance of one sensitivity at one site.
#[derive(Clone, Debug, PartialEq)]
pub struct GreekEstimate<T> {
    pub value: T,
    pub variance: T,
    pub kind: GreekKind,
    pub site: Vec<T>,
    /// Raised when the estimate relies on derivatives the kernel does not
    /// have (Matérn 3/2 Gamma).
    pub degraded: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CredibleBand<T> {
    pub lower: T,
    pub upper: T,
    pub level: f64,
}

impl<T: Scalar> CredibleBand<T> {
    pub fn contains(&self, v: T) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }
}

/// Two-sided standard normal quantile for a central `level` interval.
pub fn z_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::invalid(format!("band level {level} outside (0, 1]")));
    }
    if level == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(0.5 * (1.0 + level)))
}

/// `[value − z√variance, value + z√variance]`. A level of 1 gives an
/// unbounded band.
pub fn credible_band<T: Scalar>(est: &GreekEstimate<T>, level: f64) -> Result<CredibleBand<T>> {
    let z = z_value(level)?;
    let sd = est.variance.max(T::zero()).sqrt();
    let half = if sd == T::zero() { T::zero() } else { T::lit(z) * sd };
    Ok(CredibleBand {
        lower: est.value - half,
        upper: est.value + half,
        level,
    })
}

fn site<T: Scalar>(t: T, s: T) -> Vec<T> {
    let mut x = vec![T::zero(); 2];
    x[TIME_COORD] = t;
    x[S_COORD] = s;
    x
}

/// Posterior of ∂P/∂x_j at `x`: mean from the kernel gradient against the
/// cached weights, variance from the prior gradient variance minus the
/// explained part.
pub fn gradient_posterior<T: Scalar>(model: &GpModel<T>, j: usize, x: &[T]) -> Result<GreekEstimate<T>> {
    let kernel = model.kernel();
    if x.len() != kernel.dim() {
        return Err(Error::invalid("site dimension does not match the model"));
    }
    let prior = kernel.grad_prior_variance(j)?;
    let g = kernel.cross_grad_vec(j, x, &model.training_set().inputs);
    let value = model.trend_grad(j, x) + dot(&g, model.alpha());
    let v = model.whiten(&g);
    let variance = crate::gp::clamp_variance(prior - dot(&v, &v));
    Ok(GreekEstimate {
        value,
        variance,
        kind: if j == S_COORD { GreekKind::Delta } else { GreekKind::Gradient },
        site: x.to_vec(),
        degraded: false,
    })
}

/// Posterior mean of ∂P/∂x_j only; skips the O(N²) variance.
pub fn gradient_mean<T: Scalar>(model: &GpModel<T>, j: usize, x: &[T]) -> Result<T> {
    if x.len() != model.kernel().dim() {
        return Err(Error::invalid("site dimension does not match the model"));
    }
    let g = model.kernel().cross_grad_vec(j, x, &model.training_set().inputs);
    Ok(model.trend_grad(j, x) + dot(&g, model.alpha()))
}

/// Delta at `(t, S)`, with `t` in the model's time convention.
pub fn delta<T: Scalar>(model: &GpModel<T>, t: T, s: T) -> Result<GreekEstimate<T>> {
    gradient_posterior(model, S_COORD, &site(t, s))
}

/// Calendar-time Theta ∂P/∂t at `(t, S)`, with `t` in the model's time
/// convention. Under time to maturity the raw gradient changes sign.
pub fn theta<T: Scalar>(model: &GpModel<T>, t: T, s: T) -> Result<GreekEstimate<T>> {
    let mut est = gradient_posterior(model, TIME_COORD, &site(t, s))?;
    est.value = est.value * T::lit(model.convention().calendar_sign());
    est.kind = GreekKind::Theta;
    Ok(est)
}

/// Posterior of the price itself.
pub fn price<T: Scalar>(model: &GpModel<T>, t: T, s: T) -> Result<GreekEstimate<T>> {
    let x = site(t, s);
    let (value, variance) = model.predict(&x)?;
    Ok(GreekEstimate {
        value,
        variance,
        kind: GreekKind::Price,
        site: x,
        degraded: false,
    })
}

/// Central second difference of the posterior mean with step `h`; the
/// variance is `wᵀ Σ₃ w` for the 3-site posterior covariance `Σ₃`.
pub fn gamma_fd<T: Scalar>(model: &GpModel<T>, t: T, s: T, h: T) -> Result<GreekEstimate<T>> {
    if !(h > T::zero()) {
        return Err(Error::invalid("gamma step must be positive"));
    }
    let sites = vec![site(t, s - h), site(t, s), site(t, s + h)];
    let means = sites
        .iter()
        .map(|x| model.predict_mean(x))
        .collect::<Result<Vec<T>>>()?;
    let cov = model.predict_cov(&sites)?;
    let w = gamma_weights(h);
    let value = dot(&w, &means);
    let cw = cov.mat_vec(&w);
    let variance = crate::gp::clamp_variance(dot(&w, &cw));
    Ok(GreekEstimate {
        value,
        variance,
        kind: GreekKind::Gamma,
        site: site(t, s),
        degraded: model.kernel().family() == KernelFamily::Matern32,
    })
}

/// Finite-difference weights `(1, −2, 1)/h²`.
pub fn gamma_weights<T: Scalar>(h: T) -> [T; 3] {
    let h2 = h * h;
    [T::one() / h2, -T::lit(2.0) / h2, T::one() / h2]
}

/// Default Gamma step: one percent of the spot.
pub fn default_gamma_step<T: Scalar>(s: T) -> T {
    T::lit(0.01) * s
}

/// One row of an exported Greek surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreekRow {
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub kind: GreekKind,
    pub value: f64,
    pub variance: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl GreekRow {
    /// Row for an estimate; `t` is the calendar time of the site.
    pub fn from_estimate<T: Scalar>(t: f64, est: &GreekEstimate<T>) -> Result<Self> {
        let band = credible_band(est, 0.95)?;
        Ok(Self {
            t,
            s: est.site[S_COORD].as_f64(),
            kind: est.kind,
            value: est.value.as_f64(),
            variance: est.variance.as_f64(),
            lo95: band.lower.as_f64(),
            hi95: band.upper.as_f64(),
        })
    }
}

pub fn write_greeks_csv(path: &Path, rows: &[GreekRow]) -> Result<()> {
    write_csv(path, rows)
}
