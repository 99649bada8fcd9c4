//! Black–Scholes call analytics and exact Monte Carlo sampling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{Dynamics, McSample, Measure};
use crate::error::{Error, Result};

/// Parameters of a European call under Black–Scholes dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsParams {
    pub r: f64,
    pub sigma: f64,
    pub strike: f64,
    pub maturity: f64,
    /// Physical drift, used only for hedging paths.
    pub mu: f64,
}

impl BsParams {
    pub fn new(r: f64, sigma: f64, strike: f64, maturity: f64, mu: f64) -> Result<Self> {
        if !(sigma > 0.0 && strike > 0.0 && maturity > 0.0) {
            return Err(Error::invalid("BS parameters need sigma, strike and maturity > 0"));
        }
        Ok(Self {
            r,
            sigma,
            strike,
            maturity,
            mu,
        })
    }

    /// The case-study contract: r = 4%, σ = 22%, K = 50, T = 0.4, μ = 6%.
    pub fn case_study() -> Self {
        Self {
            r: 0.04,
            sigma: 0.22,
            strike: 50.0,
            maturity: 0.4,
            mu: 0.06,
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn norm_pdf(x: f64) -> f64 {
    std_normal().pdf(x)
}

fn d1_d2(p: &BsParams, tau: f64, s: f64) -> (f64, f64) {
    let sd = p.sigma * tau.sqrt();
    let d1 = ((s / p.strike).ln() + (p.r + 0.5 * p.sigma * p.sigma) * tau) / sd;
    (d1, d1 - sd)
}

fn require_positive_tau(tau: f64, what: &str) -> Result<()> {
    if tau > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} is singular at tau = {tau}")))
    }
}

/// Call price with time to maturity `tau`; at `tau = 0` the payoff.
pub fn bs_price(p: &BsParams, tau: f64, s: f64) -> f64 {
    if tau <= 0.0 || s <= 0.0 {
        return (s - p.strike).max(0.0);
    }
    let (d1, d2) = d1_d2(p, tau, s);
    s * norm_cdf(d1) - p.strike * (-p.r * tau).exp() * norm_cdf(d2)
}

/// ∂P/∂S. At `tau = 0` returns the payoff slope 1{S > K}.
pub fn bs_delta(p: &BsParams, tau: f64, s: f64) -> f64 {
    if tau <= 0.0 {
        return if s > p.strike { 1.0 } else { 0.0 };
    }
    if s <= 0.0 {
        return 0.0;
    }
    norm_cdf(d1_d2(p, tau, s).0)
}

/// ∂²P/∂S².
pub fn bs_gamma(p: &BsParams, tau: f64, s: f64) -> Result<f64> {
    require_positive_tau(tau, "gamma")?;
    let (d1, _) = d1_d2(p, tau, s);
    Ok(norm_pdf(d1) / (s * p.sigma * tau.sqrt()))
}

/// Calendar-time Theta ∂P/∂t (negative for calls).
pub fn bs_theta(p: &BsParams, tau: f64, s: f64) -> Result<f64> {
    require_positive_tau(tau, "theta")?;
    let (d1, d2) = d1_d2(p, tau, s);
    Ok(-s * norm_pdf(d1) * p.sigma / (2.0 * tau.sqrt())
        - p.r * p.strike * (-p.r * tau).exp() * norm_cdf(d2))
}

/// ∂P/∂σ.
pub fn bs_vega(p: &BsParams, tau: f64, s: f64) -> Result<f64> {
    require_positive_tau(tau, "vega")?;
    let (d1, _) = d1_d2(p, tau, s);
    Ok(s * norm_pdf(d1) * tau.sqrt())
}

/// Discounted mean payoff over `n_inner` exact lognormal terminal draws
/// under the pricing measure.
pub fn bs_mc_sample<R: Rng>(p: &BsParams, tau: f64, s: f64, n_inner: usize, rng: &mut R) -> McSample {
    let payoff = |st: f64| (st - p.strike).max(0.0);
    if tau <= 0.0 {
        return McSample {
            y: payoff(s),
            sigma2_hat: 0.0,
            n_inner,
        };
    }
    let disc = (-p.r * tau).exp();
    let drift = (p.r - 0.5 * p.sigma * p.sigma) * tau;
    let sd = p.sigma * tau.sqrt();
    let draws = (0..n_inner).map(|_| {
        let z: f64 = rng.sample(StandardNormal);
        disc * payoff(s * (drift + sd * z).exp())
    });
    sample_moments(draws, n_inner)
}

/// Mean and variance-of-the-mean of `n` draws (Welford).
pub(crate) fn sample_moments(draws: impl Iterator<Item = f64>, n: usize) -> McSample {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut k = 0.0;
    for x in draws {
        k += 1.0;
        let d = x - mean;
        mean += d / k;
        m2 += d * (x - mean);
    }
    let var = if k > 1.0 { m2 / (k - 1.0) } else { 0.0 };
    McSample {
        y: mean,
        sigma2_hat: if k > 0.0 { var / k } else { 0.0 },
        n_inner: n,
    }
}

impl Dynamics for BsParams {
    fn rate(&self) -> f64 {
        self.r
    }

    fn drift(&self) -> f64 {
        self.mu
    }

    fn volatility(&self, _t: f64, _s: f64) -> f64 {
        self.sigma
    }

    fn step(&self, _t: f64, s: f64, dt: f64, z: f64, measure: Measure) -> f64 {
        let m = self.measure_drift(measure);
        s * ((m - 0.5 * self.sigma * self.sigma) * dt + self.sigma * dt.sqrt() * z).exp()
    }
}
